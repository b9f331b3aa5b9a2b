"""Label codes, the columnar point container and label bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

DEFAULT_TILE_SIZE = 50.0


class LabelCode(IntEnum):
    UNLABELLED = 0
    GROUND = 1
    BUILDING = 2
    CAR = 3
    TREE = 4
    LAMP_POST = 5
    TRAFFIC_SIGN = 6
    NOISE = 99


VALID_CODES = np.array(sorted(int(c) for c in LabelCode), dtype=np.int64)

# Output names used by reports and config ("lamp_post", ...).
CODE_NAMES = {c: c.name.lower() for c in LabelCode}
NAME_TO_CODE = {v: k for k, v in CODE_NAMES.items()}

POLE_CODES = {
    "tree": LabelCode.TREE,
    "lamp_post": LabelCode.LAMP_POST,
    "traffic_sign": LabelCode.TRAFFIC_SIGN,
}


def is_valid_code(values) -> np.ndarray:
    """Elementwise membership test against the closed set of label codes."""
    return np.isin(np.asarray(values), VALID_CODES)


def parse_label_set(text: str) -> set[LabelCode]:
    """Parse ``"unlabelled,noise"`` style lists into label codes."""
    out = set()
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if tok.lstrip("-").isdigit():
            code = int(tok)
            if not is_valid_code(code):
                raise ValueError(f"invalid label code: {tok}")
            out.add(LabelCode(code))
        elif tok in NAME_TO_CODE:
            out.add(NAME_TO_CODE[tok])
        else:
            raise ValueError(f"unknown label name: {tok}")
    return out


@dataclass
class LabeledCloud:
    """Columnar point set with one label per point.

    Coordinates are meters in a shared planar CRS.  ``rgb`` is ``(N, 3)``
    uint8 when present.  Only ``label`` is ever mutated by the pipeline.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    label: Optional[np.ndarray] = None
    rgb: Optional[np.ndarray] = None
    intensity: Optional[np.ndarray] = None
    tile_origin: tuple[float, float] = (0.0, 0.0)
    tile_size: float = DEFAULT_TILE_SIZE

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.z = np.ascontiguousarray(self.z, dtype=np.float64)
        n = self.x.shape[0]
        if self.x.ndim != 1 or self.y.shape != (n,) or self.z.shape != (n,):
            raise ValueError("x, y, z must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.z)):
            raise ValueError("z must be finite for every point")
        if self.label is None:
            self.label = np.zeros(n, dtype=np.uint8)
        else:
            label = np.asarray(self.label)
            if label.shape != (n,):
                raise ValueError(f"label column has length {label.shape[0]}, expected {n}")
            if not np.all(is_valid_code(label)):
                raise ValueError("label column contains invalid codes")
            self.label = label.astype(np.uint8)
        if self.rgb is not None:
            rgb = np.asarray(self.rgb)
            if rgb.shape != (n, 3):
                raise ValueError(f"rgb must have shape ({n}, 3), got {rgb.shape}")
            if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
                raise ValueError("rgb values must lie in [0, 255]")
            self.rgb = rgb.astype(np.uint8)
        if self.intensity is not None:
            intensity = np.asarray(self.intensity, dtype=np.float64)
            if intensity.shape != (n,):
                raise ValueError(f"intensity has length {intensity.shape[0]}, expected {n}")
            self.intensity = intensity
        self.tile_origin = (float(self.tile_origin[0]), float(self.tile_origin[1]))
        self.tile_size = float(self.tile_size)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack((self.x, self.y))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """Tile extent as ``(xmin, ymin, xmax, ymax)``."""
        x0, y0 = self.tile_origin
        return (x0, y0, x0 + self.tile_size, y0 + self.tile_size)

    def in_tile(self) -> np.ndarray:
        x0, y0, x1, y1 = self.bounds
        return (self.x >= x0) & (self.x < x1) & (self.y >= y0) & (self.y < y1)

    def unlabelled(self) -> np.ndarray:
        return self.label == LabelCode.UNLABELLED

    def copy(self) -> "LabeledCloud":
        return LabeledCloud(
            self.x.copy(), self.y.copy(), self.z.copy(), self.label.copy(),
            None if self.rgb is None else self.rgb.copy(),
            None if self.intensity is None else self.intensity.copy(),
            self.tile_origin, self.tile_size,
        )

    def subset(self, index) -> "LabeledCloud":
        """A new cloud holding the selected points (used by tools, never by the pipeline)."""
        return LabeledCloud(
            self.x[index], self.y[index], self.z[index], self.label[index],
            None if self.rgb is None else self.rgb[index],
            None if self.intensity is None else self.intensity[index],
            self.tile_origin, self.tile_size,
        )

    def class_counts(self) -> dict[LabelCode, int]:
        counts = np.bincount(self.label, minlength=int(LabelCode.NOISE) + 1)
        return {c: int(counts[int(c)]) for c in LabelCode}


def apply_labels(cloud: LabeledCloud, mask, code: LabelCode, overwrite: bool = False) -> int:
    """Assign ``code`` to the masked points and return how many changed.

    With ``overwrite=False`` only Unlabelled points are touched, so the
    order in which modules run decides precedence.
    """
    mask = np.asarray(mask)
    if mask.dtype != bool:
        raise ValueError("mask must be boolean")
    if mask.shape != (len(cloud),):
        raise ValueError(f"mask has length {mask.shape[0] if mask.ndim else 0}, cloud has {len(cloud)}")
    code = LabelCode(code)
    if overwrite:
        target = mask & (cloud.label != code)
    else:
        target = mask & (cloud.label == LabelCode.UNLABELLED)
        if code == LabelCode.UNLABELLED:
            return 0
    n = int(np.count_nonzero(target))
    if n:
        cloud.label[target] = np.uint8(code)
    return n


def apply_labels_at(cloud: LabeledCloud, index: np.ndarray, code: LabelCode) -> int:
    """Index-based variant of :func:`apply_labels` (overwrite=False) for sparse selections."""
    index = np.asarray(index, dtype=np.int64)
    if index.size == 0:
        return 0
    if index.min() < 0 or index.max() >= len(cloud):
        raise ValueError("point index out of range")
    index = index[cloud.label[index] == LabelCode.UNLABELLED]
    index = np.unique(index)
    cloud.label[index] = np.uint8(LabelCode(code))
    return int(index.size)
