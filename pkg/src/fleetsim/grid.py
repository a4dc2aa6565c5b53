"""Regular-grid aggregation and disaggregation over the operating area.

A grid partitions the area into n_x by n_y cells indexed 1-based as (m, n)
with m along x and n along y. Aggregation counts entities per cell;
disaggregation draws uniform random positions inside each cell, preserving
per-cell counts exactly. Count matrices are stored as (n_x, n_y) integer
arrays whose row-major flattening is the wire order used by the protocol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OutOfBounds(Exception):
    """Point outside the closed operating area."""


@dataclass(frozen=True)
class GridSpec:
    n_x: int
    n_y: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("grid needs at least one cell per axis")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("degenerate operating area")

    @property
    def cell_w(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def cell_h(self) -> float:
        return (self.y_max - self.y_min) / self.n_y

    def cell_bounds(self, m: int, n: int) -> tuple[float, float, float, float]:
        """(x_lo, x_hi, y_lo, y_hi) of 1-based cell (m, n)."""
        return (self.x_min + (m - 1) * self.cell_w,
                self.x_min + m * self.cell_w,
                self.y_min + (n - 1) * self.cell_h,
                self.y_min + n * self.cell_h)


def cell_of(spec: GridSpec, x: float, y: float) -> tuple[int, int]:
    """1-based cell indices of a point.

    Cells are half-open: a point on an interior boundary belongs to the
    higher-index cell, and the max boundary belongs to the last cell, so the
    mapping is total on the closed area.
    """
    if not (spec.x_min <= x <= spec.x_max and spec.y_min <= y <= spec.y_max):
        raise OutOfBounds(f"({x}, {y}) outside operating area")
    m = min(int((x - spec.x_min) / spec.cell_w) + 1, spec.n_x)
    n = min(int((y - spec.y_min) / spec.cell_h) + 1, spec.n_y)
    return m, n


def zero_counts(spec: GridSpec) -> np.ndarray:
    return np.zeros((spec.n_x, spec.n_y), dtype=int)


def aggregate(spec: GridSpec, positions) -> np.ndarray:
    """Count positions per cell; entry [m-1, n-1] is the count of cell (m, n)."""
    counts = zero_counts(spec)
    for x, y in positions:
        m, n = cell_of(spec, x, y)
        counts[m - 1, n - 1] += 1
    return counts


def _validate_counts(spec: GridSpec, counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts)
    if counts.shape != (spec.n_x, spec.n_y):
        raise ValueError(f"count matrix shape {counts.shape} != grid {(spec.n_x, spec.n_y)}")
    if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
        raise ValueError("counts must be nonnegative integers")
    return counts


def disaggregate(spec: GridSpec, counts: np.ndarray, rng_seed) -> list[tuple[float, float]]:
    """Draw sum(counts) positions uniformly at random, count-many per cell.

    Every position is strictly inside its source cell, so aggregating the
    result reproduces the count matrix exactly. rng_seed may be anything
    np.random.default_rng accepts, including an existing Generator.
    """
    counts = _validate_counts(spec, counts)
    rng = np.random.default_rng(rng_seed)
    out: list[tuple[float, float]] = []
    for m in range(1, spec.n_x + 1):
        for n in range(1, spec.n_y + 1):
            k = int(counts[m - 1, n - 1])
            if k == 0:
                continue
            x_lo, x_hi, y_lo, y_hi = spec.cell_bounds(m, n)
            for _ in range(k):
                x = x_lo + rng.random() * (x_hi - x_lo)
                y = y_lo + rng.random() * (y_hi - y_lo)
                # Float rounding can land exactly on a boundary; fall back to
                # the cell center so the count round-trip stays exact.
                if not (x_lo < x < x_hi):
                    x = (x_lo + x_hi) / 2
                if not (y_lo < y < y_hi):
                    y = (y_lo + y_hi) / 2
                out.append((x, y))
    return out


def flatten(counts: np.ndarray) -> list:
    """Row-major (m outer, n inner) flattening used on the wire."""
    return [int(v) for v in np.asarray(counts).reshape(-1)]


def unflatten(spec: GridSpec, flat) -> np.ndarray:
    arr = np.asarray(list(flat))
    if arr.size != spec.n_x * spec.n_y:
        raise ValueError(f"expected {spec.n_x * spec.n_y} entries, got {arr.size}")
    return arr.reshape(spec.n_x, spec.n_y)
