# Copyright ©2022-2023. The Regents of the University of California
# (Regents). All Rights Reserved.

# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions
# are met: 

# 1. Redistributions of source code must retain the above copyright
# notice, this list of conditions and the following disclaimer. 

# 2. Redistributions in binary form must reproduce the above copyright
# notice, this list of conditions and the following disclaimer in the 
# documentation and/or other materials provided with the
# distribution. 

# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR
# A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT
# HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL,
# SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING, BUT NOT
# LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES; LOSS OF USE,
# DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER CAUSED AND ON ANY
# THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY, OR TORT
# (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

from dataclasses import dataclass, field
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed
import numpy as np
from numpy import ndarray
import pandas as pd
from pandas import DataFrame as PandasDataFrame
from scipy import ndimage

from .cover import LiftedAnnulusMap, OVERFLOW_GUARD
from .errors import MapEvaluationError, PreconditionError

IMAGE_CHUNK = 65536


@dataclass(frozen=True)
class GraphCurve:
    """Essential curve y = g(theta) of a continuous 1-periodic g, sampled at n equally spaced nodes."""
    nodes: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.nodes) < 1 or not all(math.isfinite(v) for v in self.nodes):
            raise ValueError('GraphCurve needs at least one finite node')

    @classmethod
    def horizontal(cls, level: float, n: int = 1) -> 'GraphCurve':
        return cls(tuple([float(level)] * n))

    @classmethod
    def from_function(cls, fn: Callable[[ndarray], ndarray], n: int = 256) -> 'GraphCurve':
        theta = np.arange(n) / n
        return cls(tuple(float(v) for v in np.asarray(fn(theta), dtype=float)))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def __call__(self, x: Any) -> ndarray:
        x = np.asarray(x, dtype=float)
        if self.n == 1:
            return np.full_like(x, self.nodes[0])
        theta = np.arange(self.n + 1) / self.n
        return np.interp(x - np.floor(x), theta, list(self.nodes) + [self.nodes[0]])

    @property
    def level_range(self) -> Tuple[float, float]:
        return min(self.nodes), max(self.nodes)

    def is_horizontal(self) -> bool:
        return max(self.nodes) == min(self.nodes)

    def shifted(self, dy: float) -> 'GraphCurve':
        return GraphCurve(tuple(v + dy for v in self.nodes))

    def to_dict(self) -> Dict[str, Any]:
        if self.is_horizontal():
            return {'level': self.nodes[0]}
        return {'nodes': list(self.nodes)}

    @classmethod
    def from_config(cls, cfg: Any) -> 'GraphCurve':
        if isinstance(cfg, (int, float)):
            return cls.horizontal(float(cfg))
        if 'level' in cfg:
            return cls.horizontal(float(cfg['level']))
        return cls(tuple(float(v) for v in cfg['nodes']))


class GridRegion:
    """
    Occupancy grid over the window [x_lo, x_lo + width) x [y_lo, y_hi] of the cover, row 0 at y_lo.

    A periodic region spans one fundamental domain (width 1) and stands for its T-periodic extension; a
    non-periodic region is a bounded piece of the cover.
    """

    def __init__(self, x_lo: float, width: float, y_lo: float, y_hi: float, occupancy: ndarray,
                 periodic: bool = True):
        occupancy = np.asarray(occupancy, dtype=bool)
        if occupancy.ndim != 2 or occupancy.size == 0:
            raise ValueError('occupancy must be a non-empty 2-d array')
        if not (width > 0 and y_hi > y_lo):
            raise ValueError('Empty region window')
        if periodic and not math.isclose(width, 1.0):
            raise ValueError('A periodic region spans exactly one fundamental domain')
        self.x_lo = float(x_lo)
        self.width = float(width)
        self.y_lo = float(y_lo)
        self.y_hi = float(y_hi)
        self.occupancy = occupancy
        self.periodic = periodic

    # geometry

    @property
    def ny(self) -> int:
        return int(self.occupancy.shape[0])

    @property
    def nx(self) -> int:
        return int(self.occupancy.shape[1])

    @property
    def dx(self) -> float:
        return self.width / self.nx

    @property
    def dy(self) -> float:
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def x_hi(self) -> float:
        return self.x_lo + self.width

    def geometry(self) -> Tuple[float, float, float, float, int, int, bool]:
        return self.x_lo, self.width, self.y_lo, self.y_hi, self.nx, self.ny, self.periodic

    def same_grid(self, other: 'GridRegion') -> bool:
        a, b = self.geometry(), other.geometry()
        return all(math.isclose(u, v) if isinstance(u, float) else u == v for u, v in zip(a, b))

    def _check_grid(self, other: 'GridRegion') -> None:
        if not self.same_grid(other):
            raise ValueError('Region operation on different grids')

    def with_occupancy(self, occupancy: ndarray) -> 'GridRegion':
        return GridRegion(self.x_lo, self.width, self.y_lo, self.y_hi, occupancy, self.periodic)

    # construction

    @classmethod
    def band(cls, y_lo: float, y_hi: float, nx: int, ny: int, x_lo: float = 0.0, width: float = 1.0,
             periodic: bool = True) -> 'GridRegion':
        return cls(x_lo, width, y_lo, y_hi, np.ones((ny, nx), dtype=bool), periodic)

    @classmethod
    def between(cls, lower: GraphCurve, upper: GraphCurve, nx: int, ny: int,
                y_lo: Optional[float] = None, y_hi: Optional[float] = None,
                x_lo: float = 0.0, width: float = 1.0, periodic: bool = True) -> 'GridRegion':
        """Cells whose vertical extent meets the closed region lower(x) <= y <= upper(x) at the column center."""
        y_lo = lower.level_range[0] if y_lo is None else y_lo
        y_hi = upper.level_range[1] if y_hi is None else y_hi
        region = cls.band(y_lo, y_hi, nx, ny, x_lo, width, periodic)
        xc, yc = region.centers()
        half = region.dy / 2
        occupancy = (yc + half >= lower(xc)) & (yc - half <= upper(xc))
        return region.with_occupancy(occupancy)

    def empty_like(self) -> 'GridRegion':
        return self.with_occupancy(np.zeros_like(self.occupancy))

    def full_like(self) -> 'GridRegion':
        return self.with_occupancy(np.ones_like(self.occupancy))

    def centers(self) -> Tuple[ndarray, ndarray]:
        xs = self.x_lo + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.y_lo + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(xs, ys)

    def occupied_centers(self) -> Tuple[ndarray, ndarray]:
        xc, yc = self.centers()
        return xc[self.occupancy], yc[self.occupancy]

    # membership

    def cell_index(self, x: Any, y: Any) -> Tuple[ndarray, ndarray, ndarray]:
        """(row, column, inside) of the cells containing the points; the top edge y == y_hi belongs to the last row."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        finite = np.isfinite(x) & np.isfinite(y) & (np.abs(x) <= OVERFLOW_GUARD) & (np.abs(y) <= OVERFLOW_GUARD)
        xs = np.where(finite, x, self.x_lo)
        ys = np.where(finite, y, self.y_lo)
        row = np.floor((ys - self.y_lo) / self.dy).astype(np.int64)
        row = np.where(ys == self.y_hi, self.ny - 1, row)
        col = np.floor((xs - self.x_lo) / self.dx).astype(np.int64)
        if self.periodic:
            col = np.mod(col, self.nx)
            inside = finite & (row >= 0) & (row < self.ny)
        else:
            col = np.where(xs == self.x_hi, self.nx - 1, col)
            inside = finite & (row >= 0) & (row < self.ny) & (col >= 0) & (col < self.nx)
        return np.clip(row, 0, self.ny - 1), np.clip(col, 0, self.nx - 1), inside

    def contains(self, x: Any, y: Any) -> ndarray:
        row, col, inside = self.cell_index(x, y)
        return inside & self.occupancy[row, col]

    # set algebra

    def __and__(self, other: 'GridRegion') -> 'GridRegion':
        self._check_grid(other)
        return self.with_occupancy(self.occupancy & other.occupancy)

    def __or__(self, other: 'GridRegion') -> 'GridRegion':
        self._check_grid(other)
        return self.with_occupancy(self.occupancy | other.occupancy)

    def __sub__(self, other: 'GridRegion') -> 'GridRegion':
        self._check_grid(other)
        return self.with_occupancy(self.occupancy & ~other.occupancy)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridRegion):
            return NotImplemented
        return self.same_grid(other) and bool(np.array_equal(self.occupancy, other.occupancy))

    def __hash__(self) -> int:
        return hash((self.geometry(), self.occupancy.tobytes()))

    def complement(self) -> 'GridRegion':
        return self.with_occupancy(~self.occupancy)

    def issubset(self, other: 'GridRegion') -> bool:
        self._check_grid(other)
        return not bool(np.any(self.occupancy & ~other.occupancy))

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    def is_empty(self) -> bool:
        return not bool(self.occupancy.any())

    @property
    def area(self) -> float:
        return self.count * self.dx * self.dy

    def dilate(self, cells: int = 1, connectivity: int = 4) -> 'GridRegion':
        occupancy = self.occupancy
        for _ in range(cells):
            grown = occupancy.copy()
            shifts = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            if connectivity == 8:
                shifts += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
            for dr, dc in shifts:
                grown |= _shift(occupancy, dr, dc, self.periodic)
            occupancy = grown
        return self.with_occupancy(occupancy)

    # cover windows

    def unroll(self, x_lo: int, units: int) -> 'GridRegion':
        """Tile a periodic region over the integer-aligned window [x_lo, x_lo + units)."""
        if not self.periodic:
            raise ValueError('only periodic regions unroll')
        if int(x_lo) != x_lo or units < 1:
            raise ValueError('unroll needs an integer start and at least one unit')
        occupancy = np.roll(self.occupancy, int(round((self.x_lo - x_lo) / self.dx)) % self.nx, axis=1)
        return GridRegion(float(x_lo), float(units), self.y_lo, self.y_hi, np.tile(occupancy, (1, units)),
                          periodic=False)

    def fold(self) -> 'GridRegion':
        """Project a non-periodic, integer-aligned region to one fundamental domain (union of translates)."""
        if self.periodic:
            return self
        units = int(round(self.width))
        if not math.isclose(units, self.width) or int(self.x_lo) != self.x_lo:
            raise ValueError('fold needs an integer-aligned window')
        per_unit = self.nx // units
        folded = self.occupancy.reshape(self.ny, units, per_unit).any(axis=1)
        shift = int(round((self.x_lo - math.floor(self.x_lo)) / self.dx))
        return GridRegion(0.0, 1.0, self.y_lo, self.y_hi, np.roll(folded, shift, axis=1), periodic=True)

    def translate(self, k: int) -> 'GridRegion':
        if self.periodic:
            return self
        return GridRegion(self.x_lo + k, self.width, self.y_lo, self.y_hi, self.occupancy, periodic=False)

    def bounding_columns(self) -> Optional[Tuple[int, int]]:
        cols = np.flatnonzero(self.occupancy.any(axis=0))
        if cols.size == 0:
            return None
        return int(cols[0]), int(cols[-1])

    def x_extent(self) -> Optional[Tuple[float, float]]:
        cols = self.bounding_columns()
        if cols is None:
            return None
        return self.x_lo + cols[0] * self.dx, self.x_lo + (cols[1] + 1) * self.dx

    def meets_curve(self, curve: GraphCurve, tolerance_cells: int = 0) -> bool:
        xc, _ = self.centers()
        level = curve(xc[0])
        row = np.floor((level - self.y_lo) / self.dy).astype(np.int64)
        hit = np.zeros(self.nx, dtype=bool)
        for dr in range(-tolerance_cells, tolerance_cells + 1):
            r = row + dr
            ok = (r >= 0) & (r < self.ny)
            hit[ok] |= self.occupancy[r[ok], np.flatnonzero(ok)]
        return bool(hit.any())

    # export

    def rle(self) -> List[List[int]]:
        """Runs of occupied cells as [row, start_column, length]."""
        runs: List[List[int]] = []
        padded = np.zeros((self.ny, self.nx + 2), dtype=np.int8)
        padded[:, 1:-1] = self.occupancy
        edges = np.diff(padded, axis=1)
        for r in range(self.ny):
            starts = np.flatnonzero(edges[r] == 1)
            ends = np.flatnonzero(edges[r] == -1)
            runs.extend([[r, int(s), int(e - s)] for s, e in zip(starts, ends)])
        return runs

    def to_pbm(self) -> str:
        """Plain PBM (P1) bitmap, top row first."""
        lines = ['P1', f'{self.nx} {self.ny}']
        for row in self.occupancy[::-1]:
            lines.append(' '.join('1' if v else '0' for v in row))
        return '\n'.join(lines) + '\n'

    def to_dict(self) -> Dict[str, Any]:
        return {'x_lo': self.x_lo, 'width': self.width, 'y_lo': self.y_lo, 'y_hi': self.y_hi,
                'nx': self.nx, 'ny': self.ny, 'periodic': self.periodic, 'count': self.count, 'rle': self.rle()}

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> 'GridRegion':
        occupancy = np.zeros((record['ny'], record['nx']), dtype=bool)
        for r, s, length in record['rle']:
            occupancy[r, s:s + length] = True
        return cls(record['x_lo'], record['width'], record['y_lo'], record['y_hi'], occupancy, record['periodic'])

    def __repr__(self) -> str:
        kind = 'periodic' if self.periodic else 'cover'
        return (f'GridRegion({kind}, x=[{self.x_lo}, {self.x_hi}), y=[{self.y_lo}, {self.y_hi}], '
                f'{self.ny}x{self.nx}, {self.count} cells)')


def _shift(occupancy: ndarray, dr: int, dc: int, wrap_x: bool) -> ndarray:
    out = np.zeros_like(occupancy)
    ny, nx = occupancy.shape
    rows_src = slice(max(0, -dr), ny - max(0, dr))
    rows_dst = slice(max(0, dr), ny - max(0, -dr))
    if wrap_x:
        out[rows_dst] = np.roll(occupancy[rows_src], dc, axis=1)
    else:
        cols_src = slice(max(0, -dc), nx - max(0, dc))
        cols_dst = slice(max(0, dc), nx - max(0, -dc))
        out[rows_dst, cols_dst] = occupancy[rows_src, cols_src]
    return out


# Conservative images


def _box_counts(region: GridRegion, lifted_map: LiftedAnnulusMap, direction: int,
                rows: ndarray, cols: ndarray) -> Tuple[ndarray, bool]:
    """Difference-array paint of the dilated bounding boxes of the cells' images."""
    x0 = region.x_lo + cols * region.dx
    y0 = region.y_lo + rows * region.dy
    px = np.stack([x0, x0 + region.dx, x0, x0 + region.dx, x0 + region.dx / 2])
    py = np.stack([y0, y0, y0 + region.dy, y0 + region.dy, y0 + region.dy / 2])
    X, Y = lifted_map.step(px, py, direction)
    bad = ~(np.isfinite(X) & np.isfinite(Y)) | (np.abs(X) > OVERFLOW_GUARD) | (np.abs(Y) > OVERFLOW_GUARD)
    if bad.any():
        k = np.argwhere(bad)[0]
        raise MapEvaluationError('Non-finite image of a grid cell', (px[k[0], k[1]], py[k[0], k[1]]))

    r_lo = np.floor((Y.min(axis=0) - region.y_lo) / region.dy).astype(np.int64) - 1
    r_hi = np.floor((Y.max(axis=0) - region.y_lo) / region.dy).astype(np.int64) + 1
    c_lo = np.floor((X.min(axis=0) - region.x_lo) / region.dx).astype(np.int64) - 1
    c_hi = np.floor((X.max(axis=0) - region.x_lo) / region.dx).astype(np.int64) + 1

    keep = (r_hi >= 0) & (r_lo < region.ny)
    ny, nx = region.ny, region.nx
    if region.periodic:
        # Paint on a doubled strip, folded back by the caller
        length = c_hi - c_lo + 1
        full = length >= nx
        start = np.mod(c_lo, nx)
        c_lo = np.where(full, 0, start)
        c_hi = np.where(full, nx - 1, start + length - 1)
        width = 2 * nx
        overflow = False
    else:
        overflow = bool(np.any(keep & ((c_lo < 0) | (c_hi >= nx))))
        keep &= (c_hi >= 0) & (c_lo < nx)
        c_lo = np.clip(c_lo, 0, nx - 1)
        c_hi = np.clip(c_hi, 0, nx - 1)
        width = nx
    r_lo = np.clip(r_lo, 0, ny - 1)
    r_hi = np.clip(r_hi, 0, ny - 1)
    r_lo, r_hi, c_lo, c_hi = r_lo[keep], r_hi[keep], c_lo[keep], c_hi[keep]

    diff = np.zeros((ny + 1, width + 1), dtype=np.int64)
    np.add.at(diff, (r_lo, c_lo), 1)
    np.add.at(diff, (r_lo, c_hi + 1), -1)
    np.add.at(diff, (r_hi + 1, c_lo), -1)
    np.add.at(diff, (r_hi + 1, c_hi + 1), 1)
    return diff, overflow




def image(region: GridRegion, lifted_map: LiftedAnnulusMap, direction: int = 1, threads: int = 1,
          return_overflow: bool = False) -> Any:
    """
    Conservative image of the occupied cells under f (direction=1) or f^-1 (direction=-1): each cell is
    replaced by the bounding box of its four corners and center, dilated by one cell, restricted to the
    region's window. Per-chunk box counts are summed, so the result does not depend on threads.
    """
    rows, cols = np.nonzero(region.occupancy)
    if rows.size == 0:
        result = region.empty_like()
        return (result, False) if return_overflow else result

    chunks = [(rows[i:i + IMAGE_CHUNK], cols[i:i + IMAGE_CHUNK]) for i in range(0, rows.size, IMAGE_CHUNK)]
    if threads == 1 or len(chunks) == 1:
        parts = [_box_counts(region, lifted_map, direction, r, c) for r, c in chunks]
    else:
        parts = Parallel(n_jobs=threads, prefer='threads')(
            delayed(_box_counts)(region, lifted_map, direction, r, c) for r, c in chunks
        )
    diff = sum(p[0] for p in parts)
    overflow = any(p[1] for p in parts)
    counts = np.cumsum(np.cumsum(diff, axis=0), axis=1)[:region.ny]
    if region.periodic:
        occupancy = (counts[:, :region.nx] + counts[:, region.nx:2 * region.nx]) > 0
    else:
        occupancy = counts[:, :region.nx] > 0
    result = region.with_occupancy(occupancy)
    return (result, overflow) if return_overflow else result


def preimage(region: GridRegion, lifted_map: LiftedAnnulusMap, threads: int = 1) -> GridRegion:
    return image(region, lifted_map, direction=-1, threads=threads)


# Maximal invariant sets


@dataclass
class ThetaResult:
    """Depth-N outer approximation of a maximal invariant set with a per-cell removal step (-1: survived)."""
    region: GridRegion
    horizon: int
    removal_step: ndarray = field(repr=False)
    counts: List[int] = field(default_factory=list)

    @property
    def escaped_by_horizon(self) -> bool:
        return self.region.is_empty()

    def history(self) -> PandasDataFrame:
        return pd.DataFrame({'step': range(len(self.counts)), 'cells': self.counts})


def theta_maximal(lifted_map: LiftedAnnulusMap, A: GridRegion, N: int, threads: int = 1) -> ThetaResult:
    """Theta_k = Theta_{k-1} & f(Theta_{k-1}) & f^-1(Theta_{k-1}), k = 1..N, with Theta_0 = A."""
    if N < 1:
        raise ValueError('N must be >= 1')
    current = A
    removal = np.full(A.occupancy.shape, -1, dtype=np.int64)
    removal[~A.occupancy] = 0
    counts = [A.count]
    for k in range(1, N + 1):
        if current.is_empty():
            counts.append(0)
            continue
        forward = image(current, lifted_map, 1, threads)
        backward = image(current, lifted_map, -1, threads)
        nxt = current & forward & backward
        removal[current.occupancy & ~nxt.occupancy] = k
        current = nxt
        counts.append(current.count)
    return ThetaResult(current, N, removal, counts)


def survival_steps(lifted_map: LiftedAnnulusMap, x: ndarray, y: ndarray, inside: Callable[[ndarray, ndarray], ndarray],
                   N: int, direction: int) -> ndarray:
    """Number of consecutive iterates (up to N) that stay inside, for each starting point."""
    x = np.asarray(x, dtype=float).copy()
    y = np.asarray(y, dtype=float).copy()
    steps = np.zeros(x.shape, dtype=np.int64)
    alive = np.asarray(inside(x, y), dtype=bool).copy()
    for _ in range(N):
        if not alive.any():
            break
        x[alive], y[alive] = lifted_map.step(x[alive], y[alive], direction)
        ok = np.zeros_like(alive)
        ok[alive] = inside(x[alive], y[alive])
        alive &= ok
        steps += alive
    return steps


def theta_escape_time(lifted_map: LiftedAnnulusMap, A: GridRegion, N: int,
                      one_sided: Optional[int] = None) -> GridRegion:
    """
    Pointwise depth-N set: occupied cells whose center stays in A for n = 1..N in both directions (or only
    forward / backward when one_sided is 1 / -1).
    """
    xc, yc = A.occupied_centers()
    keep = np.ones(xc.shape, dtype=bool)
    for direction in ((1, -1) if one_sided is None else (one_sided,)):
        keep &= survival_steps(lifted_map, xc, yc, A.contains, N, direction) >= N
    occupancy = np.zeros_like(A.occupancy)
    occupancy[A.occupancy] = keep
    return A.with_occupancy(occupancy)


def invariance_sandwich_holds(lifted_map: LiftedAnnulusMap, pointwise: GridRegion, previous: GridRegion) -> bool:
    """Images of pointwise members of Theta_N land in the one-cell dilation of Theta_{N-1}, within the window."""
    xc, yc = pointwise.occupied_centers()
    X, Y = lifted_map(xc, yc)
    _, _, inside = previous.cell_index(X, Y)
    return bool(np.all(previous.dilate(1).contains(X, Y) | ~inside))


# Free curves


@dataclass(frozen=True)
class CurveClassification:
    kind: str  # 'attracting', 'repulsing', 'not-free' or 'undecided'
    margin: float
    min_clearance: float
    max_clearance: float

    @property
    def is_free(self) -> bool:
        return self.kind in ('attracting', 'repulsing')

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'margin': self.margin, 'min_clearance': self.min_clearance,
                'max_clearance': self.max_clearance}


def free_curve_classify(lifted_map: LiftedAnnulusMap, curve: GraphCurve, resolution: float,
                        samples: int = 1024) -> CurveClassification:
    """
    Signed clearance Y - g(X) of the image of dense curve samples. Entirely below the curve: attracting;
    entirely above: repulsing; touching or on both sides: not free. A one-sided margin below `resolution`
    is reported as undecided; callers pass the cell height of the grid the curve bounds.
    """
    if not resolution > 0:
        raise ValueError(f'resolution must be positive, got {resolution}')
    theta = np.arange(samples) / samples
    X, Y = lifted_map(theta, curve(theta))
    clearance = Y - curve(X)
    lo, hi = float(clearance.min()), float(clearance.max())
    if lo <= 0 <= hi:
        return CurveClassification('not-free', max(-lo, hi), lo, hi)
    margin = -hi if hi < 0 else lo
    if margin < resolution:
        return CurveClassification('undecided', margin, lo, hi)
    return CurveClassification('attracting' if hi < 0 else 'repulsing', margin, lo, hi)


@dataclass(frozen=True)
class EndNeighborhood:
    """Half-infinite band at an end: y <= level at S, y >= level at N, truncated to `depth` for gridding."""
    end: str
    level: float
    depth: float = 3.0

    def __post_init__(self) -> None:
        if self.end not in ('N', 'S'):
            raise ValueError(f'Invalid end {self.end}')

    def region(self, nx: int, ny: int) -> GridRegion:
        if self.end == 'S':
            return GridRegion.band(self.level - self.depth, self.level, nx, ny)
        return GridRegion.band(self.level, self.level + self.depth, nx, ny)


def _theta_one_sided(lifted_map: LiftedAnnulusMap, V: EndNeighborhood, N: int, nx: int, ny: int,
                     direction: int, threads: int) -> ThetaResult:
    current = V.region(nx, ny)
    boundary = free_curve_classify(lifted_map, GraphCurve.horizontal(V.level), current.dy)
    # f(Cl V) inside V needs the boundary pushed into V: downward at S, upward at N
    needed = 'attracting' if (V.end == 'S') == (direction == 1) else 'repulsing'
    if boundary.kind != needed:
        inclusion = 'f(Cl V) in V' if direction == 1 else 'f^-1(Cl V) in V'
        raise PreconditionError(f'{inclusion} fails for V at the {V.end} end, level {V.level}: boundary is '
                                f'{boundary.kind} '
                                f'(clearance {boundary.min_clearance:.3g}..{boundary.max_clearance:.3g})')
    removal = np.full(current.occupancy.shape, -1, dtype=np.int64)
    counts = [current.count]
    for k in range(1, N + 1):
        nxt = current & image(current, lifted_map, direction, threads)
        removal[current.occupancy & ~nxt.occupancy] = k
        current = nxt
        counts.append(current.count)
    return ThetaResult(current, N, removal, counts)


def theta_forward(lifted_map: LiftedAnnulusMap, V: EndNeighborhood, N: int, nx: int = 256, ny: int = 512,
                  threads: int = 1) -> ThetaResult:
    """Decreasing intersection of the forward images of V up to depth N; refuses unless f(Cl V) is inside V."""
    return _theta_one_sided(lifted_map, V, N, nx, ny, 1, threads)


def theta_backward(lifted_map: LiftedAnnulusMap, V: EndNeighborhood, N: int, nx: int = 256, ny: int = 512,
                   threads: int = 1) -> ThetaResult:
    return _theta_one_sided(lifted_map, V, N, nx, ny, -1, threads)


def intersection_property_check(lifted_map: LiftedAnnulusMap, levels: Sequence[float], resolution: float,
                                amplitudes: Sequence[float] = (0.0, 0.05, 0.1)) -> Dict[str, Any]:
    """
    Curve-level local intersection test near an end: every sampled essential curve y = level + a sin(2 pi x)
    should meet its image. Reports the first free curve found. Curves whose clearance stays one-sided but
    below `resolution` are counted as undecided, and then the property is not confirmed.
    """
    undecided = 0
    for level in levels:
        for amplitude in amplitudes:
            curve = GraphCurve.from_function(lambda t: level + amplitude * np.sin(2 * np.pi * t), 256)
            classification = free_curve_classify(lifted_map, curve, resolution)
            if classification.kind == 'undecided':
                undecided += 1
            elif classification.kind != 'not-free':
                return {'holds': False, 'level': level, 'amplitude': amplitude,
                        'classification': classification.to_dict(), 'curves_checked': None,
                        'undecided': undecided}
    return {'holds': True if undecided == 0 else None, 'level': None, 'amplitude': None,
            'classification': None, 'curves_checked': len(levels) * len(amplitudes), 'undecided': undecided}


# Connected components


@dataclass
class Component:
    region: GridRegion
    least_cell: int
    touches_bottom: bool
    touches_top: bool
    touches_left: bool
    touches_right: bool

    @property
    def cells(self) -> int:
        return self.region.count

    def to_dict(self) -> Dict[str, Any]:
        return {'cells': self.cells, 'least_cell': self.least_cell, 'touches_bottom': self.touches_bottom,
                'touches_top': self.touches_top, 'touches_left': self.touches_left,
                'touches_right': self.touches_right}


def label_components(region: GridRegion, connectivity: int = 4) -> Tuple[ndarray, int]:
    """Labels 1..k in order of each component's least row-major cell, 0 for empty cells; x wraps if periodic."""
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, count = ndimage.label(region.occupancy, structure=structure)
    if count == 0:
        return labels, 0

    parent = list(range(count + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if region.periodic and region.nx > 1:
        left, right = labels[:, 0], labels[:, -1]
        offsets = (0,) if connectivity == 4 else (-1, 0, 1)
        for off in offsets:
            a = left[max(0, off):region.ny + min(0, off)]
            b = right[max(0, -off):region.ny - max(0, off)]
            for u, v in zip(a, b):
                if u and v:
                    ru, rv = find(int(u)), find(int(v))
                    if ru != rv:
                        parent[max(ru, rv)] = min(ru, rv)

    roots = np.array([find(i) for i in range(count + 1)])
    merged = roots[labels]
    flat = merged.ravel()
    occupied = np.flatnonzero(flat)
    _, first = np.unique(flat[occupied], return_index=True)
    order = np.argsort(occupied[first])
    relabel = np.zeros(count + 1, dtype=np.int64)
    relabel[np.unique(flat[occupied])[order]] = np.arange(1, order.size + 1)
    return relabel[merged], int(order.size)


def connected_components(region: GridRegion, connectivity: int = 4) -> List[Component]:
    """4-connected components (8 behind the flag), x wrapping for periodic regions, ordered by least cell."""
    labels, count = label_components(region, connectivity)
    components = []
    for k in range(1, count + 1):
        mask = labels == k
        flat = int(np.flatnonzero(mask.ravel())[0])
        components.append(Component(region=region.with_occupancy(mask), least_cell=flat,
                                    touches_bottom=bool(mask[0].any()), touches_top=bool(mask[-1].any()),
                                    touches_left=(not region.periodic) and bool(mask[:, 0].any()),
                                    touches_right=(not region.periodic) and bool(mask[:, -1].any())))
    return components


def theta_connectedness_check(lifted_map: LiftedAnnulusMap, gamma: GraphCurve, gamma_prime: GraphCurve, N: int,
                              nx: int = 256, ny: int = 512, connectivity: int = 4, threads: int = 1) -> Dict[str, Any]:
    """
    Connectedness of the maximal invariant set of the closed annulus between an attracting and a repulsing
    free curve. Refuses unless the classifications are one of each.
    """
    if gamma.level_range[0] > gamma_prime.level_range[1]:
        lower, upper = gamma_prime, gamma
    elif gamma_prime.level_range[0] > gamma.level_range[1]:
        lower, upper = gamma, gamma_prime
    else:
        raise PreconditionError('curves must be disjoint with one above the other')
    A = GridRegion.between(lower, upper, nx, ny)
    kinds = {free_curve_classify(lifted_map, curve, A.dy).kind for curve in (gamma, gamma_prime)}
    if kinds != {'attracting', 'repulsing'}:
        raise PreconditionError(f'need one attracting and one repulsing free curve, got {sorted(kinds)}')
    theta = theta_maximal(lifted_map, A, N, threads)
    components = connected_components(theta.region, connectivity)
    return {'components': len(components), 'connected': len(components) == 1, 'cells': theta.region.count,
            'theta': theta}


# Horizons


@dataclass
class FreeHorizonResult:
    n0: Optional[int]
    horizon: int
    disjoint: List[bool]
    margin_cells: Optional[int]
    modulo_deck: bool

    @property
    def status(self) -> str:
        return 'found' if self.n0 is not None else 'not found'

    def to_dict(self) -> Dict[str, Any]:
        return {'n0': self.n0, 'status': self.status, 'horizon': self.horizon, 'disjoint': self.disjoint,
                'margin_cells': self.margin_cells, 'modulo_deck': self.modulo_deck}


def free_horizon(lifted_map: LiftedAnnulusMap, K: GridRegion, N: int, modulo_deck: bool = False,
                 y_pad: float = 1.0, threads: int = 1) -> FreeHorizonResult:
    """
    Least n0 such that the conservative images f^n(K) miss K for every n in [n0, N]. K is a bounded piece
    of the cover; images live in a cover window widened by N * M0 + 1 on each side. With modulo_deck the
    test is against every deck translate of K.
    """
    if K.periodic:
        raise ValueError('free_horizon works on a bounded lift of K; pass a non-periodic region')
    if K.is_empty():
        raise ValueError('K is empty')
    pad_units = int(math.ceil(N * lifted_map.horizontal_bound + 1))
    x_lo = math.floor(K.x_lo) - pad_units
    units = int(math.ceil(K.x_hi)) + pad_units - x_lo
    per_unit = int(round(1.0 / K.dx))
    rows_pad = int(math.ceil(y_pad / K.dy))
    window = GridRegion(float(x_lo), float(units), K.y_lo - rows_pad * K.dy, K.y_hi + rows_pad * K.dy,
                        np.zeros((K.ny + 2 * rows_pad, units * per_unit), dtype=bool), periodic=False)

    xc, yc = K.occupied_centers()
    home = window.empty_like()
    r, c, inside = window.cell_index(xc, yc)
    home.occupancy[r[inside], c[inside]] = True
    target = home.fold().unroll(x_lo, units) if modulo_deck else home
    distance = ndimage.distance_transform_cdt(~target.occupancy, metric='taxicab')

    disjoint: List[bool] = []
    margins: List[int] = []
    current = home
    for _ in range(N):
        current = image(current, lifted_map, 1, threads)
        meets = bool(np.any(current.occupancy & target.occupancy))
        disjoint.append(not meets)
        margins.append(int(distance[current.occupancy].min()) if current.count else -1)

    n0: Optional[int] = None
    for n in range(N, 0, -1):
        if not disjoint[n - 1]:
            break
        n0 = n
    margin = min(m for m in margins[n0 - 1:]) if n0 is not None else None
    return FreeHorizonResult(n0, N, disjoint, margin, modulo_deck)


def drift_horizon(lifted_map: LiftedAnnulusMap, x: Sequence[float], y: Sequence[float],
                  thresholds: Sequence[float], N: int) -> PandasDataFrame:
    """
    For each threshold M, the least n0 with p1(f^-n(z)) - p1(z) < -M for every n in [n0, N], taken as the
    worst case over the seeds (None when some seed never settles below -M within N).
    """
    x0 = np.asarray(x, dtype=float)
    xs, ys = x0.copy(), np.asarray(y, dtype=float).copy()
    shifts = np.empty((N, x0.size))
    for n in range(N):
        xs, ys = lifted_map.inverse_lift(xs, ys)
        shifts[n] = xs - x0
    rows = []
    for M in thresholds:
        below = shifts < -M
        # last index where the condition fails, per seed
        failing = np.where(~below, np.arange(1, N + 1)[:, None], 0).max(axis=0)
        settled = failing < N
        n0 = int(failing.max()) + 1 if settled.all() else None
        rows.append({'M': float(M), 'n0': n0, 'seeds': int(x0.size), 'settled': int(settled.sum())})
    return pd.DataFrame(rows)
