import dataclasses
import math

import numpy as np
import pytest

from urbanlabel import io
from urbanlabel.core import LabelCode
from urbanlabel.growing import connected_components
from urbanlabel.synthgen import (BuildingSpec, CarSpec, GroundSpec, PoleSpec, RoadSpec, SceneSpec, SpecError,
                                 build_scene, building_roof_z, demo_spec, generate, map_location, suite_spec)
from urbanlabel.vector import points_in_polygon

ROAD = RoadSpec([(0, 20), (50, 20), (50, 27), (0, 27)])


def test_flat_plane_only():
    s = build_scene(SceneSpec(seed=1, ground=GroundSpec(z0=1.0), density=200))
    assert np.all(s.truth.label == LabelCode.GROUND)
    assert np.allclose(s.ground.values, 1.0) and not s.ground.mask.any()
    assert abs(s.truth.z.mean() - 1.0) < 0.01
    assert s.roof.mask.all()


def test_single_car_cluster():
    spec = SceneSpec(seed=2, roads=[ROAD], cars=[CarSpec((20, 23.5), (4.4, 1.8, 1.5))], density=300,
                     noise_sigma=0.0)
    s = build_scene(spec)
    car = s.truth.label == LabelCode.CAR
    cl = connected_components(s.truth, car, 0.3, 100)
    assert cl.n_clusters == 1
    x, y = s.truth.x[car] - 119300, s.truth.y[car] - 485100
    assert 4.3 < x.max() - x.min() < 4.5 and 1.7 < y.max() - y.min() < 1.9
    assert points_in_polygon(s.topo.roads[0][0], np.array([s.truth.x[car].mean()]),
                             np.array([s.truth.y[car].mean()]))[0]


def test_pole_offset_in_map():
    spec = dataclasses.replace(demo_spec(density=50), pole_offset=2.0)
    s = build_scene(spec)
    ox, oy = spec.origin
    for p, obj in zip(spec.poles, s.topo.point_objects):
        assert math.hypot(obj.x - ox - p.location[0], obj.y - oy - p.location[1]) == pytest.approx(2.0)


def test_overlapping_footprints_rejected():
    spec = SceneSpec(buildings=[BuildingSpec((0, 0, 10, 10), 5), BuildingSpec((9, 9, 15, 15), 5)])
    with pytest.raises(SpecError, match="overlap"):
        build_scene(spec)


def test_on_road_flag_checked():
    with pytest.raises(SpecError):
        build_scene(SceneSpec(roads=[ROAD], cars=[CarSpec((20, 10), on_road=True)]))


def test_unknown_spec_keys_rejected():
    with pytest.raises(SpecError):
        SceneSpec.from_dict({"seed": 1, "colour": "red"})
    with pytest.raises(SpecError):
        SceneSpec.from_dict({"cars": [{"center": [1, 2], "wheels": 4}]})


def test_spec_yaml_round_trip(tmp_path):
    spec = suite_spec(3, density=100)
    p = tmp_path / "s.yaml"
    p.write_text(spec.dump())
    back = SceneSpec.load(p)
    assert back.to_dict() == spec.to_dict()


def test_generate_reproducible(tmp_path):
    spec = demo_spec(density=60)
    a = generate(spec, tmp_path / "a")
    b = generate(spec, tmp_path / "b")
    for key in a:
        with open(a[key], "rb") as fa, open(b[key], "rb") as fb:
            assert fa.read() == fb.read(), key
    truth = io.read_cloud_csv(a["truth"])
    cloud = io.read_cloud_csv(a["cloud"])
    assert len(truth) == len(cloud) and np.all(cloud.label == 0)
    assert truth.tile_origin == (119300.0, 485100.0)
    assert io.read_raster_asc(a["ground"]).cell_size == pytest.approx(0.1)


def test_objects_independent_of_other_objects():
    spec = demo_spec(density=80)
    more = dataclasses.replace(spec, poles=spec.poles + [PoleSpec("tree", (45, 5), 8.0, 0.2)])
    a, b = build_scene(spec), build_scene(more)
    for oid in (1000, 2001, 3000):
        ma, mb = a.object_ids == oid, b.object_ids == oid
        assert np.array_equal(a.truth.x[ma], b.truth.x[mb]) and np.array_equal(a.truth.z[ma], b.truth.z[mb])


def test_density_within_five_percent():
    rho = 400.0
    spec = SceneSpec(seed=4, density=rho, noise_sigma=0.0,
                     buildings=[BuildingSpec((10, 10, 30, 25), 8.0)], roads=[ROAD],
                     cars=[CarSpec((5, 23), (4.4, 1.8, 1.5))])
    s = build_scene(spec)
    ground_area = 2500 - 20 * 15
    assert abs((s.object_ids == -1).sum() / (ground_area * rho) - 1) < 0.05
    wall_area = 2 * (20 + 15) * 8.0
    assert abs((s.object_ids == 1000).sum() / (wall_area * rho) - 1) < 0.05
    car_area = 4.4 * 1.8 + 2 * (4.4 + 1.8) * 1.2
    assert abs((s.object_ids == 2000).sum() / (car_area * rho) - 1) < 0.05


def test_labels_consistent_with_primitives():
    spec = SceneSpec(seed=5, density=300, noise_sigma=0.0, roads=[ROAD],
                     buildings=[BuildingSpec((5, 32, 20, 45), 9.0)],
                     cars=[CarSpec((30, 23.5), (4.4, 1.8, 1.5), yaw=0.2)],
                     poles=[PoleSpec("lamp_post", (10, 17), 5.0, 0.08, arm_dir=math.pi / 2)])
    s = build_scene(spec)
    ox, oy = spec.origin
    x, y, z = s.truth.x - ox, s.truth.y - oy, s.truth.z
    b = s.truth.label == LabelCode.BUILDING
    on_wall = (np.isclose(x[b], 5, atol=2e-3) | np.isclose(x[b], 20, atol=2e-3)
               | np.isclose(y[b], 32, atol=2e-3) | np.isclose(y[b], 45, atol=2e-3))
    assert on_wall.all() and z[b].max() <= building_roof_z(spec, spec.buildings[0]) + 1e-3
    c = s.truth.label == LabelCode.CAR
    u = (x[c] - 30) * math.cos(0.2) + (y[c] - 23.5) * math.sin(0.2)
    v = -(x[c] - 30) * math.sin(0.2) + (y[c] - 23.5) * math.cos(0.2)
    assert np.all(np.abs(u) <= 2.2 + 2e-3) and np.all(np.abs(v) <= 0.9 + 2e-3)
    assert np.all((z[c] >= 1.3 - 1e-3) & (z[c] <= 2.5 + 1e-3))
    g = s.truth.label == LabelCode.GROUND
    assert np.allclose(z[g], 1.0)
    lp = s.truth.label == LabelCode.LAMP_POST
    assert np.all(np.hypot(x[lp] - 10, y[lp] - 17) <= 1.0 + 0.3 + 0.08)


def test_stale_building_in_grids():
    spec = SceneSpec(seed=6, density=50, buildings=[BuildingSpec((5, 5, 15, 15), 6.0, stale=True)])
    s = build_scene(spec)
    assert s.roof.mask.all() and not s.ground.mask.any()
    assert len(s.topo.footprints) == 1


def test_terrace_ground():
    g = GroundSpec("terrace", 1.0, 2.0, "x", 25.0)
    assert g.height(24.9, 0) == 1.0 and g.height(25.0, 0) == 3.0


def test_suite_specs_valid():
    for i in range(10):
        spec = suite_spec(i, density=10)
        spec.validate()
        assert {p.kind for p in spec.poles} == {"tree", "lamp_post", "traffic_sign"}
        assert len(spec.cars) >= 3 and len(spec.buildings) >= 2
        assert map_location(spec, 0) == spec.poles[0].location
