"""
Prior-box lattice for the six-map adaptive predictor layer.

Anchors are grouped by aspect ratio into five categories. Each map has its
own stride, base scale and densities; a density ``d`` duplicates an anchor
``d`` times inside its cell (``d * d`` times for square anchors), shifting
horizontal anchors vertically and vertical anchors horizontally.

The lattice is stored column-wise in numpy arrays, because the default
configuration at 960x1728 already holds well over a million anchors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from enum import IntEnum

import numpy as np

from .errors import InvalidInputError
from .geometry import AARect, Quad

N_MAPS = 6


class AnchorCategory(IntEnum):
    SQUARE = 0
    MEDIUM_HORIZONTAL = 1
    MEDIUM_VERTICAL = 2
    LONG_HORIZONTAL = 3
    LONG_VERTICAL = 4

    @property
    def is_long(self) -> bool:
        return self in (AnchorCategory.LONG_HORIZONTAL, AnchorCategory.LONG_VERTICAL)


LONG_CATEGORIES = (AnchorCategory.LONG_HORIZONTAL, AnchorCategory.LONG_VERTICAL)

# width / height; "1:2" (height:width) for a horizontal anchor is 2.0 here
DEFAULT_ASPECT_RATIOS = {
    AnchorCategory.SQUARE: (1.0,),
    AnchorCategory.MEDIUM_HORIZONTAL: (2.0, 3.0, 5.0, 7.0),
    AnchorCategory.MEDIUM_VERTICAL: (1 / 2, 1 / 3, 1 / 5, 1 / 7),
    AnchorCategory.LONG_HORIZONTAL: (15.0, 25.0, 35.0),
    AnchorCategory.LONG_VERTICAL: (1 / 15, 1 / 25, 1 / 35),
}

# predictor filter shapes (rows x cols); informational only
DEFAULT_FILTER_SIZES = {
    AnchorCategory.SQUARE: (3, 3),
    AnchorCategory.MEDIUM_HORIZONTAL: (3, 5),
    AnchorCategory.MEDIUM_VERTICAL: (5, 3),
    AnchorCategory.LONG_HORIZONTAL: (1, "n"),
    AnchorCategory.LONG_VERTICAL: ("n", 1),
}


@dataclass(frozen=True)
class APLConfig:
    """Anchor layout for the six prediction maps.

    ``base_scales`` defaults to ``1.5 * stride``. ``long_density[0]`` is
    ignored because map 1 never carries long anchors. ``long_filter_n`` is
    the length of the 1 x n / n x 1 predictor filters and does not affect
    the lattice.
    """

    strides: tuple = (4, 16, 32, 64, 64, 64)
    base_scales: tuple | None = None
    aspect_ratios: dict = field(default_factory=lambda: dict(DEFAULT_ASPECT_RATIOS))
    medium_density: tuple = (1, 2, 3, 4, 3, 2)
    long_density: tuple = (1, 4, 4, 6, 4, 3)
    long_enabled: tuple = (False, True, True, True, True, True)
    map_enabled: tuple = (True,) * N_MAPS
    long_filter_n: tuple = (None, 33, 29, 15, 15, 15)

    def __post_init__(self):
        for name in ("strides", "medium_density", "long_density", "long_enabled", "map_enabled", "long_filter_n"):
            value = tuple(getattr(self, name))
            if len(value) != N_MAPS:
                raise InvalidInputError(f"{name} needs {N_MAPS} entries, got {len(value)}")
            object.__setattr__(self, name, value)
        if self.base_scales is None:
            object.__setattr__(self, "base_scales", tuple(1.5 * s for s in self.strides))
        else:
            scales = tuple(float(s) for s in self.base_scales)
            if len(scales) != N_MAPS:
                raise InvalidInputError(f"base_scales needs {N_MAPS} entries")
            object.__setattr__(self, "base_scales", scales)
        ratios = {AnchorCategory(k): tuple(float(r) for r in v) for k, v in self.aspect_ratios.items()}
        for cat in AnchorCategory:
            ratios.setdefault(cat, ())
        object.__setattr__(self, "aspect_ratios", ratios)

        if any(s <= 0 for s in self.strides):
            raise InvalidInputError("strides must be positive")
        if any(s <= 0 for s in self.base_scales):
            raise InvalidInputError("base scales must be positive")
        if any(int(d) != d or d < 1 for d in self.medium_density + self.long_density):
            raise InvalidInputError("densities must be integers >= 1")
        if self.long_enabled[0]:
            raise InvalidInputError("long anchors are not allowed on map 1")
        if any(r <= 0 for rs in ratios.values() for r in rs):
            raise InvalidInputError("aspect ratios must be positive")

    def density(self, map_index: int, category: AnchorCategory) -> int:
        m = map_index - 1
        return int(self.long_density[m] if category.is_long else self.medium_density[m])

    def categories_on(self, map_index: int) -> list[AnchorCategory]:
        m = map_index - 1
        if not self.map_enabled[m]:
            return []
        return [c for c in AnchorCategory if not c.is_long or self.long_enabled[m]]

    def grid_shape(self, map_index: int, input_w: int, input_h: int) -> tuple[int, int]:
        s = self.strides[map_index - 1]
        return math.ceil(input_h / s), math.ceil(input_w / s)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "aspect_ratios":
                value = {c.name.lower(): list(v) for c, v in value.items()}
            else:
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "APLConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown anchor config keys: {sorted(unknown)}")
        if "aspect_ratios" in data:
            ratios = dict(DEFAULT_ASPECT_RATIOS)
            for k, v in data["aspect_ratios"].items():
                ratios[AnchorCategory[k.upper()]] = tuple(v)
            data["aspect_ratios"] = ratios
        return cls(**data)


@dataclass(frozen=True)
class Anchor:
    cx: float
    cy: float
    w: float
    h: float
    map_index: int
    category: AnchorCategory
    cell: tuple[int, int]
    density_offset: tuple[int, int]

    def rect(self) -> AARect:
        return AARect(self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)

    def corners(self) -> np.ndarray:
        """TL, TR, BR, BL, matching the canonical quad order."""
        x0, y0, x1, y1 = self.rect()
        return np.array([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    def quad(self) -> Quad:
        return Quad(self.corners())


_COLUMNS = ("cx", "cy", "w", "h", "map_index", "category", "row", "col", "off_i", "off_j", "index")


@dataclass(frozen=True, eq=False)
class AnchorLattice:
    """Ordered anchor set: map, cell (row-major), category, ratio, density offset.

    ``index`` holds each anchor's position in the untrimmed lattice, so
    prediction tensors produced for the full lattice can be looked up after
    trimming.
    """

    cx: np.ndarray
    cy: np.ndarray
    w: np.ndarray
    h: np.ndarray
    map_index: np.ndarray
    category: np.ndarray
    row: np.ndarray
    col: np.ndarray
    off_i: np.ndarray
    off_j: np.ndarray
    index: np.ndarray
    config: APLConfig
    input_size: tuple[int, int]

    def __len__(self):
        return len(self.cx)

    def __getitem__(self, i) -> Anchor:
        return Anchor(
            float(self.cx[i]),
            float(self.cy[i]),
            float(self.w[i]),
            float(self.h[i]),
            int(self.map_index[i]),
            AnchorCategory(int(self.category[i])),
            (int(self.row[i]), int(self.col[i])),
            (int(self.off_i[i]), int(self.off_j[i])),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def per_map_counts(self) -> list[int]:
        return np.bincount(self.map_index, minlength=N_MAPS + 1)[1:].tolist()

    def rects(self) -> np.ndarray:
        """``(N, 4)`` as ``xmin, ymin, xmax, ymax``."""
        hw, hh = self.w / 2, self.h / 2
        return np.stack([self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh], axis=1)

    def corners(self) -> np.ndarray:
        """``(N, 4, 2)`` corner array in TL, TR, BR, BL order."""
        x0, y0, x1, y1 = self.rects().T
        return np.stack(
            [np.stack([x0, y0], 1), np.stack([x1, y0], 1), np.stack([x1, y1], 1), np.stack([x0, y1], 1)],
            axis=1,
        )

    def subset(self, mask_or_idx) -> "AnchorLattice":
        cols = {name: getattr(self, name)[mask_or_idx] for name in _COLUMNS}
        return AnchorLattice(**cols, config=self.config, input_size=self.input_size)

    def equals(self, other: "AnchorLattice") -> bool:
        return len(self) == len(other) and all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in _COLUMNS
        )


def _cell_template(cfg: APLConfig, map_index: int):
    """Per-cell anchor list for one map, in enumeration order."""
    m = map_index - 1
    s = cfg.strides[m]
    base = cfg.base_scales[m]
    out = []
    for cat in cfg.categories_on(map_index):
        d = cfg.density(map_index, cat)
        for ar in cfg.aspect_ratios[cat]:
            w = base * math.sqrt(ar)
            h = base / math.sqrt(ar)
            step = s / d
            if cat == AnchorCategory.SQUARE:
                shifts = [(i, j, (j + 0.5) * step, (i + 0.5) * step) for i in range(d) for j in range(d)]
            elif cat in (AnchorCategory.MEDIUM_HORIZONTAL, AnchorCategory.LONG_HORIZONTAL):
                shifts = [(k, 0, 0.5 * s, (k + 0.5) * step) for k in range(d)]
            else:
                shifts = [(0, k, (k + 0.5) * step, 0.5 * s) for k in range(d)]
            for i, j, dx, dy in shifts:
                out.append((dx, dy, w, h, int(cat), i, j))
    return out


def build_lattice(cfg: APLConfig, input_w: int, input_h: int) -> AnchorLattice:
    if input_w <= 0 or input_h <= 0:
        raise InvalidInputError(f"input size must be positive, got {input_w}x{input_h}")
    parts = {name: [] for name in _COLUMNS[:-1]}
    for map_index in range(1, N_MAPS + 1):
        tmpl = _cell_template(cfg, map_index)
        if not tmpl:
            continue
        gh, gw = cfg.grid_shape(map_index, input_w, input_h)
        s = cfg.strides[map_index - 1]
        t = np.array(tmpl, dtype=np.float64)
        rows, cols = np.divmod(np.arange(gh * gw), gw)
        ncell, nt = len(rows), len(tmpl)
        parts["cx"].append((cols[:, None] * s + t[None, :, 0]).ravel())
        parts["cy"].append((rows[:, None] * s + t[None, :, 1]).ravel())
        parts["w"].append(np.tile(t[:, 2], ncell))
        parts["h"].append(np.tile(t[:, 3], ncell))
        parts["map_index"].append(np.full(ncell * nt, map_index, dtype=np.int8))
        parts["category"].append(np.tile(t[:, 4].astype(np.int8), ncell))
        parts["row"].append(np.repeat(rows.astype(np.int32), nt))
        parts["col"].append(np.repeat(cols.astype(np.int32), nt))
        parts["off_i"].append(np.tile(t[:, 5].astype(np.int16), ncell))
        parts["off_j"].append(np.tile(t[:, 6].astype(np.int16), ncell))

    dtypes = {"map_index": np.int8, "category": np.int8, "row": np.int32, "col": np.int32,
              "off_i": np.int16, "off_j": np.int16}
    cols = {
        name: (np.concatenate(v) if v else np.zeros(0, dtype=dtypes.get(name, np.float64)))
        for name, v in parts.items()
    }
    cols["index"] = np.arange(len(cols["cx"]), dtype=np.int64)
    return AnchorLattice(**cols, config=cfg, input_size=(int(input_w), int(input_h)))


def count_anchors(cfg: APLConfig, input_w: int, input_h: int) -> list[int]:
    """Closed-form per-map anchor counts (no enumeration)."""
    counts = []
    for map_index in range(1, N_MAPS + 1):
        per_cell = 0
        for cat in cfg.categories_on(map_index):
            d = cfg.density(map_index, cat)
            mult = d * d if cat == AnchorCategory.SQUARE else d
            per_cell += len(cfg.aspect_ratios[cat]) * mult
        gh, gw = cfg.grid_shape(map_index, input_w, input_h)
        counts.append(gh * gw * per_cell)
    return counts


def trim_for_inference(lattice: AnchorLattice) -> AnchorLattice:
    """Keep every map-1 anchor plus the long anchors of maps 2-6."""
    keep = (lattice.map_index == 1) | np.isin(lattice.category, [int(c) for c in LONG_CATEGORIES])
    return lattice.subset(keep)
