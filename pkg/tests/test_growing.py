import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat_raster, make_cloud
from oracles import canonical_partition, union_find_partition
from urbanlabel.core import LabelCode
from urbanlabel.growing import (ClusterIndex, GrowBand, connected_components, grow_banded, grow_label,
                                validate_bands, voxel_coords)
from urbanlabel.synthgen import _box_surface, _cylinder


def blob(center, n, spread=0.2, seed=0):
    rng = np.random.default_rng(seed)
    return np.asarray(center) + rng.uniform(-spread, spread, (n, 3))


def cc(pts, voxel=0.3, min_points=1, mask=None):
    c = make_cloud(pts)
    m = np.ones(len(c), bool) if mask is None else mask
    return connected_components(c, m, voxel, min_points)


def test_two_blobs():
    pts = np.vstack([blob((10, 10, 1), 100), blob((15, 10, 1), 100, seed=1)])
    assert cc(pts).n_clusters == 2


def test_chain_is_one_cluster():
    pts = np.column_stack((np.arange(50) * 0.2 + 1.01, np.full(50, 1.01), np.full(50, 1.01)))
    assert cc(pts).n_clusters == 1


def test_min_points_filter():
    ids = cc(blob((5, 5, 5), 10), min_points=50).ids
    assert np.all(ids == -1)


def test_mask_excludes_points():
    pts = blob((5, 5, 5), 20)
    mask = np.zeros(20, bool)
    mask[:5] = True
    ids = cc(pts, mask=mask).ids
    assert np.all(ids[5:] == -1) and np.all(ids[:5] == 0)


def test_voxel_grid_anchored_at_origin():
    assert voxel_coords([0.29, 0.31, -0.01], [0, 0, 0], [0, 0, 0], 0.3)[:, 0].tolist() == [0, 1, -1]


def test_ids_ordered_by_first_point():
    pts = np.vstack([blob((20, 10, 1), 30), blob((10, 10, 1), 30, seed=1)])
    ids = cc(pts).ids
    assert ids[0] == 0 and ids[-1] == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_matches_union_find_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 400))
    pts = rng.uniform(0, rng.uniform(0.5, 4.0), (n, 3))
    voxel = float(rng.uniform(0.1, 0.5))
    got = canonical_partition(cc(pts, voxel).ids.tolist())
    assert got == union_find_partition(pts, voxel)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 3, (300, 3))
    perm = rng.permutation(len(pts))
    a = cc(pts).ids
    b = cc(pts[perm]).ids
    # same partition: cluster id pairs map one-to-one
    pairs = set(zip(a[perm].tolist(), b.tolist()))
    assert len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def cluster_of(labels):
    c = make_cloud(np.zeros((len(labels), 3)), np.asarray(labels, dtype=np.uint8))
    return c, ClusterIndex(np.zeros(len(labels), dtype=np.int64), 0.3)


def test_grow_majority():
    c, cl = cluster_of([2] * 60 + [0] * 40)
    assert grow_label(c, cl, LabelCode.BUILDING, 0.5) == 40
    assert np.all(c.label == 2)


def test_grow_strict_exceed():
    c, cl = cluster_of([2] * 50 + [0] * 50)
    assert grow_label(c, cl, LabelCode.BUILDING, 0.5) == 0
    c, cl = cluster_of([2] * 51 + [0] * 49)
    assert grow_label(c, cl, LabelCode.BUILDING, 0.5) == 49


def test_grow_nothing_labelled():
    c, cl = cluster_of([0] * 100)
    assert grow_label(c, cl, LabelCode.BUILDING, 0.5) == 0


def test_grow_keeps_other_labels():
    c, cl = cluster_of([2] * 80 + [3] * 10 + [0] * 10)
    grow_label(c, cl, LabelCode.BUILDING, 0.5)
    assert (c.label == 3).sum() == 10 and (c.label == 0).sum() == 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([0, 0, 2, 3]), min_size=1, max_size=80), st.floats(0.01, 1.0),
       st.floats(0.01, 1.0))
def test_lower_threshold_grows_more(labels, t1, t2):
    lo, hi = sorted((t1, t2))
    a, cl = cluster_of(labels)
    b, _ = cluster_of(labels)
    assert grow_label(a, cl, LabelCode.BUILDING, lo) >= grow_label(b, cl, LabelCode.BUILDING, hi)


def test_band_validation():
    with pytest.raises(ValueError):
        validate_bands([GrowBand(0, 3, 0.1, 0.8), GrowBand(2.5, math.inf, 0.3, 0.5)])
    with pytest.raises(ValueError):
        GrowBand(3, 3, 0.1, 0.5)
    with pytest.raises(ValueError):
        GrowBand(0, 3, 0.1, 0.0)
    b = GrowBand.from_dict({"z_min_m": 3, "z_max_m": None, "voxel_m": 0.3, "threshold": 0.5})
    assert b.z_max == math.inf and GrowBand.from_dict(b.to_dict()) == b


BANDS = [GrowBand(0, 3, 0.1, 0.8), GrowBand(3, math.inf, 0.3, 0.5)]


def test_balcony_grown_from_facade():
    rng = np.random.default_rng(2)
    ys = rng.uniform(10, 20, 20000)
    zs = rng.uniform(0, 8, 20000)
    wall = np.column_stack((np.full(20000, 10.0), ys, zs))
    balcony = _box_surface(rng, (9.4, 15), (1.2, 3.0), 0.0, 4.0, 5.0, 800)
    balcony = balcony[balcony[:, 0] < 10.0 - 1e-9]
    pts = np.vstack([wall, balcony])
    lab = np.zeros(len(pts), np.uint8)
    lab[:len(wall)] = 2
    c = make_cloud(pts, lab)
    # 70% of the upper-band cluster is pre-labelled facade
    upper = pts[:, 2] >= 3
    assert 0.6 < (lab[upper] == 2).mean() < 0.9
    grow_banded(c, flat_raster(0.0, n=60), LabelCode.BUILDING, BANDS)
    assert np.all(c.label[len(wall):] == LabelCode.BUILDING)


def test_bicycle_next_to_pole_stays_unlabelled():
    rng = np.random.default_rng(4)
    post = _cylinder(rng, (10, 10), 0.0, 5.0, 0.07, 2000)
    bike = _box_surface(rng, (10 + 0.07 + 0.35 + 0.85, 10), (1.7, 0.5), 0.0, 0.05, 1.05, 1500)
    pts = np.vstack([post, bike])
    lab = np.zeros(len(pts), np.uint8)
    lab[:len(post)] = LabelCode.LAMP_POST
    c = make_cloud(pts, lab)
    grow_banded(c, flat_raster(0.0, n=60), LabelCode.LAMP_POST,
                [GrowBand(0, 2.5, 0.1, 0.8), GrowBand(2.5, math.inf, 0.25, 0.4)])
    assert np.all(c.label[len(post):] == LabelCode.UNLABELLED)


def test_empty_band_is_noop():
    c = make_cloud(blob((5, 5, 1), 50), np.full(50, 2, np.uint8))
    assert grow_banded(c, flat_raster(0.0), LabelCode.BUILDING, [GrowBand(10, 20, 0.3, 0.5)]) == 0
