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
import warnings

from joblib import Parallel, delayed
import numpy as np
from numpy import ndarray
import pandas as pd
from pandas import DataFrame as PandasDataFrame
from scipy.stats import qmc

from .cover import LiftedAnnulusMap, OVERFLOW_GUARD
from .invsets import GridRegion
from .mapzoo import reflect, rigid_rotation_isotopy_power

MERGE_EPSILON = 0.01
INFINITE_CAP = 1e3
SEED_CHUNK = 4096

Predicate = Callable[[ndarray, ndarray], ndarray]
Estimator = Callable[[LiftedAnnulusMap], 'RotationSetEstimate']


def _encode(value: float) -> Any:
    if math.isinf(value):
        return '+inf' if value > 0 else '-inf'
    return float(value)


def _decode(value: Any) -> float:
    if isinstance(value, str):
        return math.inf if value.startswith('+') else -math.inf
    return float(value)


@dataclass(frozen=True)
class ExtendedInterval:
    """Closed interval of the extended reals; infinite endpoints only as the outer ends."""
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f'Invalid interval [{self.lo}, {self.hi}]')
        if self.lo == math.inf or self.hi == -math.inf:
            raise ValueError('Infinite sentinels only at the outer ends')

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def affine(self, q: float, p: float) -> 'ExtendedInterval':
        a, b = q * self.lo + p, q * self.hi + p
        return ExtendedInterval(min(a, b), max(a, b))

    def to_list(self) -> List[Any]:
        return [_encode(self.lo), _encode(self.hi)]


def merge_intervals(intervals: Sequence[ExtendedInterval], merge_epsilon: float) -> List[ExtendedInterval]:
    """Sort by lo and join neighbours whose gap is at most merge_epsilon."""
    merged: List[ExtendedInterval] = []
    for interval in sorted(intervals, key=lambda i: (i.lo, i.hi)):
        if merged and interval.lo - merged[-1].hi <= merge_epsilon:
            merged[-1] = ExtendedInterval(merged[-1].lo, max(merged[-1].hi, interval.hi))
        else:
            merged.append(interval)
    return merged


class SampleAccumulator:
    """
    Order-independent reduction of rotation samples: values are binned by floor(v / merge_epsilon) and each
    bin keeps its min, max and count. Samples with |v| above the cap only raise an infinity flag.
    """

    def __init__(self, merge_epsilon: float = MERGE_EPSILON, cap: float = INFINITE_CAP):
        if merge_epsilon <= 0:
            raise ValueError('merge_epsilon must be positive')
        self.merge_epsilon = float(merge_epsilon)
        self.cap = float(cap)
        self.keys = np.empty(0, dtype=np.int64)
        self.mins = np.empty(0)
        self.maxs = np.empty(0)
        self.counts = np.empty(0, dtype=np.int64)
        self.infinite_flags = {'-inf': False, '+inf': False}

    @property
    def sample_count(self) -> int:
        return int(self.counts.sum())

    def _reduce(self, keys: ndarray, mins: ndarray, maxs: ndarray, counts: ndarray) -> None:
        unique, inverse = np.unique(keys, return_inverse=True)
        lo = np.full(unique.size, np.inf)
        hi = np.full(unique.size, -np.inf)
        np.minimum.at(lo, inverse, mins)
        np.maximum.at(hi, inverse, maxs)
        self.keys, self.mins, self.maxs = unique, lo, hi
        self.counts = np.bincount(inverse, weights=counts, minlength=unique.size).astype(np.int64)

    def add(self, values: ndarray) -> None:
        values = np.asarray(values, dtype=float).ravel()
        values = values[np.isfinite(values)]
        if values.size == 0:
            return
        big = np.abs(values) > self.cap
        if big.any():
            self.infinite_flags['+inf'] |= bool(np.any(values[big] > 0))
            self.infinite_flags['-inf'] |= bool(np.any(values[big] < 0))
            values = values[~big]
        keys = np.floor(values / self.merge_epsilon).astype(np.int64)
        self._reduce(np.concatenate([self.keys, keys]), np.concatenate([self.mins, values]),
                     np.concatenate([self.maxs, values]),
                     np.concatenate([self.counts, np.ones(values.size, dtype=np.int64)]))

    def merge(self, other: 'SampleAccumulator') -> 'SampleAccumulator':
        if not math.isclose(self.merge_epsilon, other.merge_epsilon):
            raise ValueError('Cannot merge accumulators with different merge_epsilon')
        out = SampleAccumulator(self.merge_epsilon, self.cap)
        out._reduce(np.concatenate([self.keys, other.keys]), np.concatenate([self.mins, other.mins]),
                    np.concatenate([self.maxs, other.maxs]), np.concatenate([self.counts, other.counts]))
        out.infinite_flags = {k: self.infinite_flags[k] or other.infinite_flags[k] for k in self.infinite_flags}
        return out

    def intervals(self) -> List[ExtendedInterval]:
        return merge_intervals([ExtendedInterval(lo, hi) for lo, hi in zip(self.mins, self.maxs)],
                               self.merge_epsilon)

    def to_frame(self) -> PandasDataFrame:
        return pd.DataFrame({'bin': self.keys, 'min': self.mins, 'max': self.maxs, 'count': self.counts})


@dataclass
class RotationSetEstimate:
    """
    Finite-scale rotation set: a sorted union of disjoint closed intervals (gaps above merge_epsilon) plus
    flags for samples beyond the finite cap. An empty estimate carries a status explaining why.
    """
    intervals: List[ExtendedInterval]
    sample_count: int
    horizon_range: Tuple[int, int]
    merge_epsilon: float = MERGE_EPSILON
    infinite_flags: Dict[str, bool] = field(default_factory=lambda: {'-inf': False, '+inf': False})
    status: str = 'ok'
    tail: Optional['RotationSetEstimate'] = None
    convergence: Optional[PandasDataFrame] = None
    bins: Optional[PandasDataFrame] = field(default=None, repr=False)
    label: str = ''

    @classmethod
    def from_accumulator(cls, accumulator: SampleAccumulator, horizon_range: Tuple[int, int],
                         empty_status: str = 'no returning orbits', **kwargs: Any) -> 'RotationSetEstimate':
        count = accumulator.sample_count
        return cls(intervals=accumulator.intervals(), sample_count=count, horizon_range=tuple(horizon_range),
                   merge_epsilon=accumulator.merge_epsilon, infinite_flags=dict(accumulator.infinite_flags),
                   status='ok' if count or any(accumulator.infinite_flags.values()) else empty_status,
                   bins=accumulator.to_frame(), **kwargs)

    @classmethod
    def point(cls, value: float, merge_epsilon: float = MERGE_EPSILON) -> 'RotationSetEstimate':
        return cls([ExtendedInterval(value, value)], 1, (1, 1), merge_epsilon)

    @property
    def is_empty(self) -> bool:
        return not self.intervals and not any(self.infinite_flags.values())

    def is_interval(self, gap_tolerance: Optional[float] = None) -> bool:
        """Connectedness; with gap_tolerance, gaps up to that width are forgiven."""
        if gap_tolerance is None:
            return len(self.intervals) <= 1
        return all(g <= gap_tolerance for g in self.gaps())

    def gaps(self) -> List[float]:
        return [b.lo - a.hi for a, b in zip(self.intervals, self.intervals[1:])]

    def gap_measure(self) -> float:
        return float(sum(self.gaps()))

    def hull(self) -> Optional[ExtendedInterval]:
        """Convex hull of the finite part, opened to an infinite end when that flag is set."""
        if not self.intervals:
            if all(self.infinite_flags.values()):
                return ExtendedInterval(-math.inf, math.inf)
            return None
        lo = -math.inf if self.infinite_flags['-inf'] else self.intervals[0].lo
        hi = math.inf if self.infinite_flags['+inf'] else self.intervals[-1].hi
        return ExtendedInterval(lo, hi)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return any(i.contains(value, tol) for i in self.intervals)

    def affine(self, q: float, p: float) -> 'RotationSetEstimate':
        """Image under v -> q v + p (q != 0); a negative q swaps the infinity flags."""
        if q == 0:
            raise ValueError('q must be non-zero')
        flags = dict(self.infinite_flags)
        if q < 0:
            flags = {'-inf': flags['+inf'], '+inf': flags['-inf']}
        return RotationSetEstimate(merge_intervals([i.affine(q, p) for i in self.intervals], 0.0),
                                   self.sample_count, self.horizon_range, self.merge_epsilon, flags, self.status,
                                   label=self.label)

    def _endpoints(self) -> List[float]:
        return [v for i in self.intervals for v in (i.lo, i.hi)]

    def _distance_to(self, value: float) -> float:
        return min(max(i.lo - value, value - i.hi, 0.0) for i in self.intervals)

    def _directed(self, other: 'RotationSetEstimate') -> float:
        candidates = self._endpoints()
        candidates += [(a.hi + b.lo) / 2 for a, b in zip(other.intervals, other.intervals[1:])
                       if self.contains((a.hi + b.lo) / 2)]
        return max(other._distance_to(v) for v in candidates)

    def hausdorff(self, other: 'RotationSetEstimate') -> float:
        """Hausdorff distance between the finite parts; infinite if exactly one side is empty."""
        if not self.intervals and not other.intervals:
            return 0.0
        if not self.intervals or not other.intervals:
            return math.inf
        return max(self._directed(other), other._directed(self))

    def intersect(self, other: 'RotationSetEstimate') -> 'RotationSetEstimate':
        parts = []
        for a in self.intervals:
            for b in other.intervals:
                lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
                if lo <= hi:
                    parts.append(ExtendedInterval(lo, hi))
        flags = {k: self.infinite_flags[k] and other.infinite_flags[k] for k in self.infinite_flags}
        return RotationSetEstimate(merge_intervals(parts, 0.0), min(self.sample_count, other.sample_count),
                                   self.horizon_range, self.merge_epsilon, flags,
                                   'ok' if parts or any(flags.values()) else 'empty intersection')

    def union(self, other: 'RotationSetEstimate') -> 'RotationSetEstimate':
        flags = {k: self.infinite_flags[k] or other.infinite_flags[k] for k in self.infinite_flags}
        intervals = merge_intervals(self.intervals + other.intervals, self.merge_epsilon)
        horizon = (min(self.horizon_range[0], other.horizon_range[0]),
                   max(self.horizon_range[1], other.horizon_range[1]))
        status = 'ok' if intervals or any(flags.values()) else self.status
        return RotationSetEstimate(intervals, self.sample_count + other.sample_count, horizon, self.merge_epsilon,
                                   flags, status)

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            'intervals': [i.to_list() for i in self.intervals],
            'sample_count': self.sample_count,
            'horizon_range': list(self.horizon_range),
            'merge_epsilon': self.merge_epsilon,
            'infinite_flags': dict(self.infinite_flags),
            'status': self.status,
            'is_interval': self.is_interval(),
            'gap_measure': self.gap_measure(),
        }
        if self.label:
            record['label'] = self.label
        if self.tail is not None:
            record['tail'] = self.tail.to_dict()
        if self.convergence is not None:
            record['convergence'] = self.convergence.to_dict(orient='records')
        return record

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> 'RotationSetEstimate':
        tail = cls.from_dict(record['tail']) if record.get('tail') else None
        convergence = pd.DataFrame(record['convergence']) if record.get('convergence') else None
        return cls(intervals=[ExtendedInterval(_decode(lo), _decode(hi)) for lo, hi in record['intervals']],
                   sample_count=int(record['sample_count']), horizon_range=tuple(record['horizon_range']),
                   merge_epsilon=float(record['merge_epsilon']), infinite_flags=dict(record['infinite_flags']),
                   status=record['status'], tail=tail, convergence=convergence, label=record.get('label', ''))

    def __str__(self) -> str:
        if self.is_empty:
            return f'<{self.status}>'
        parts = [f'[{i.lo:.4g}, {i.hi:.4g}]' for i in self.intervals]
        parts += [k for k, v in self.infinite_flags.items() if v]
        return ' U '.join(parts)


# Seeding


@dataclass(frozen=True)
class SamplingPlan:
    """
    Seed layout over a region. 'grid': density_x columns (left-closed) by density_y rows (both ends included)
    over the region's window, optionally jittered by a seeded Halton sequence; 'cells': occupied cell centers.
    Only seeds inside the region are kept.
    """
    density_x: int = 64
    density_y: int = 64
    jitter: float = 0.0
    seed: int = 0
    mode: str = 'grid'

    def __post_init__(self) -> None:
        if self.mode not in ('grid', 'cells'):
            raise ValueError(f'Invalid sampling mode {self.mode}')
        if self.density_x < 1 or self.density_y < 1:
            raise ValueError('Sampling densities must be positive')
        if not 0 <= self.jitter <= 1:
            raise ValueError('jitter is a fraction of the grid step, in [0, 1]')

    def _jitter(self, n: int, dx: float, dy: float) -> Tuple[ndarray, ndarray]:
        if self.jitter == 0 or n == 0:
            return np.zeros(n), np.zeros(n)
        points = qmc.Halton(d=2, scramble=True, seed=self.seed).random(n)
        return (points[:, 0] - 0.5) * self.jitter * dx, (points[:, 1] - 0.5) * self.jitter * dy

    def seeds(self, region: GridRegion) -> Tuple[ndarray, ndarray]:
        if self.mode == 'cells':
            x, y = region.occupied_centers()
            jx, jy = self._jitter(x.size, region.dx, region.dy)
        else:
            xs = np.linspace(region.x_lo, region.x_hi, self.density_x, endpoint=False)
            ys = np.linspace(region.y_lo, region.y_hi, self.density_y)
            gx, gy = np.meshgrid(xs, ys)
            x, y = gx.ravel(), gy.ravel()
            dy = (region.y_hi - region.y_lo) / max(self.density_y - 1, 1)
            jx, jy = self._jitter(x.size, region.width / self.density_x, dy)
        x, y = x + jx, y + jy
        keep = region.contains(x, y)
        return x[keep], y[keep]

    def to_dict(self) -> Dict[str, Any]:
        return {'density_x': self.density_x, 'density_y': self.density_y, 'jitter': self.jitter,
                'seed': self.seed, 'mode': self.mode}

    @classmethod
    def from_config(cls, cfg: Any) -> 'SamplingPlan':
        if cfg is None:
            return cls()
        return cls(**{k: cfg[k] for k in ('density_x', 'density_y', 'jitter', 'seed', 'mode') if k in cfg})


# Sweep engine


@dataclass
class SweepResult:
    main: SampleAccumulator
    tail: SampleAccumulator
    levels: List[SampleAccumulator]
    seeds: int


def _sweep_chunk(lifted_map: LiftedAnnulusMap, x0: ndarray, y0: ndarray, m: int, N: int,
                 stay: Optional[Predicate], land: Predicate, horizons: Sequence[int],
                 merge_epsilon: float, cap: float) -> SweepResult:
    x, y = x0.copy(), y0.copy()
    alive = np.ones(x0.size, dtype=bool)
    main = SampleAccumulator(merge_epsilon, cap)
    tail = SampleAccumulator(merge_epsilon, cap)
    levels = [SampleAccumulator(merge_epsilon, cap) for _ in horizons]
    tail_start = max(m, N // 2)
    for n in range(1, N + 1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        X, Y = lifted_map(x[idx], y[idx])
        ok = np.isfinite(X) & np.isfinite(Y) & (np.abs(X) <= OVERFLOW_GUARD) & (np.abs(Y) <= OVERFLOW_GUARD)
        if stay is not None:
            ok[ok] = stay(X[ok], Y[ok])
        alive[idx[~ok]] = False
        idx, X, Y = idx[ok], X[ok], Y[ok]
        x[idx], y[idx] = X, Y
        if n < m or idx.size == 0:
            continue
        hit = land(X, Y)
        values = (X[hit] - x0[idx[hit]]) / n
        main.add(values)
        if n >= tail_start:
            tail.add(values)
        for h, acc in zip(horizons, levels):
            if n <= h:
                acc.add(values)
    return SweepResult(main, tail, levels, int(x0.size))


def sweep(lifted_map: LiftedAnnulusMap, x0: ndarray, y0: ndarray, m: int, N: int, land: Predicate,
          stay: Optional[Predicate] = None, horizons: Sequence[int] = (), merge_epsilon: float = MERGE_EPSILON,
          cap: float = INFINITE_CAP, threads: int = 1) -> SweepResult:
    """
    Collect (p1(f^n z) - p1(z)) / n for every seed z and every n in [m, N] such that the orbit segment
    satisfies `stay` at each step and f^n(z) satisfies `land`. Chunks are reduced bin-wise, so the result
    does not depend on threads.
    """
    if not 1 <= m <= N:
        raise ValueError(f'need 1 <= m <= N, got m={m}, N={N}')
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    chunks = [(x0[i:i + SEED_CHUNK], y0[i:i + SEED_CHUNK]) for i in range(0, x0.size, SEED_CHUNK)]
    args = (m, N, stay, land, tuple(horizons), merge_epsilon, cap)
    if threads == 1 or len(chunks) <= 1:
        parts = [_sweep_chunk(lifted_map, cx, cy, *args) for cx, cy in chunks]
    else:
        parts = Parallel(n_jobs=threads, prefer='threads')(
            delayed(_sweep_chunk)(lifted_map, cx, cy, *args) for cx, cy in chunks
        )
    result = SweepResult(SampleAccumulator(merge_epsilon, cap), SampleAccumulator(merge_epsilon, cap),
                         [SampleAccumulator(merge_epsilon, cap) for _ in horizons], 0)
    for part in parts:
        result.main = result.main.merge(part.main)
        result.tail = result.tail.merge(part.tail)
        result.levels = [a.merge(b) for a, b in zip(result.levels, part.levels)]
        result.seeds += part.seeds
    return result


def _convergence_table(result: SweepResult, m: int, horizons: Sequence[int]) -> PandasDataFrame:
    rows = []
    for level, (h, acc) in enumerate(zip(horizons, result.levels)):
        estimate = RotationSetEstimate.from_accumulator(acc, (m, h))
        hull = estimate.hull()
        rows.append({'level': level, 'horizon': h, 'sample_count': estimate.sample_count,
                     'intervals': len(estimate.intervals), 'gap_measure': estimate.gap_measure(),
                     'lo': hull.lo if hull else np.nan, 'hi': hull.hi if hull else np.nan})
    return pd.DataFrame(rows, columns=['level', 'horizon', 'sample_count', 'intervals', 'gap_measure', 'lo', 'hi'])


def default_horizons(m: int, N: int) -> List[int]:
    return sorted({max(m, N // 4), max(m, N // 2), N})


def _estimate(result: SweepResult, m: int, N: int, horizons: Sequence[int], label: str,
              empty_status: str = 'no returning orbits') -> RotationSetEstimate:
    tail = RotationSetEstimate.from_accumulator(result.tail, (max(m, N // 2), N), empty_status, label=f'{label} tail')
    return RotationSetEstimate.from_accumulator(result.main, (m, N), empty_status, tail=tail,
                                                convergence=_convergence_table(result, m, horizons), label=label)


# Estimators


def rho_K(lifted_map: LiftedAnnulusMap, K: GridRegion, m: int, N: int, plan: Optional[SamplingPlan] = None,
          merge_epsilon: float = MERGE_EPSILON, cap: float = INFINITE_CAP, dilation: int = 0,
          threads: int = 1) -> RotationSetEstimate:
    """
    Rotation set of the compact set K: rho_n(z) for seeded z in K and n in [m, N] with f^n(z) in K (cell
    membership of the projected point, optionally against a dilated K). The tail [max(m, N/2), N] is attached
    as the finite stand-in for the intersection over m.
    """
    plan = plan or SamplingPlan()
    x0, y0 = plan.seeds(K)
    target = K.dilate(dilation) if dilation else K
    horizons = default_horizons(m, N)
    result = sweep(lifted_map, x0, y0, m, N, land=target.contains, horizons=horizons,
                   merge_epsilon=merge_epsilon, cap=cap, threads=threads)
    return _estimate(result, m, N, horizons, f'rho_K {lifted_map.name}')


@dataclass(frozen=True)
class EndWindow:
    """Half-infinite end neighborhood: y >= level at the N end, y <= level at the S end."""
    end: str
    level: float

    def __post_init__(self) -> None:
        if self.end not in ('N', 'S'):
            raise ValueError(f'Invalid end {self.end}')

    @property
    def sign(self) -> int:
        return 1 if self.end == 'N' else -1

    def contains(self, x: ndarray, y: ndarray) -> ndarray:
        y = np.asarray(y, dtype=float)
        return y >= self.level if self.end == 'N' else y <= self.level

    def is_inside(self, other: 'EndWindow') -> bool:
        """Strictly nested in other (self is the smaller neighborhood of the same end)."""
        return self.end == other.end and self.sign * (self.level - other.level) > 0

    def shell(self, inner: 'EndWindow', nx: int = 1, ny: int = 1) -> GridRegion:
        """The bounded band V \\ W as a grid region (top edge belongs to W at the N end)."""
        lo, hi = sorted((self.level, inner.level))
        return GridRegion.band(lo, hi, nx, ny)


def rho_VW(lifted_map: LiftedAnnulusMap, V: EndWindow, W: EndWindow, m: int, N: int,
           plan: Optional[SamplingPlan] = None, merge_epsilon: float = MERGE_EPSILON, cap: float = INFINITE_CAP,
           threads: int = 1) -> RotationSetEstimate:
    """rho_n(z) for z outside W, f^n(z) outside W and the whole segment z, ..., f^n(z) inside V."""
    if not W.is_inside(V):
        raise ValueError('W must lie strictly inside V at the same end')
    plan = plan or SamplingPlan()
    x0, y0 = plan.seeds(V.shell(W))
    start = V.contains(x0, y0) & ~W.contains(x0, y0)
    x0, y0 = x0[start], y0[start]

    def outside_w(x: ndarray, y: ndarray) -> ndarray:
        return ~W.contains(x, y)

    horizons = default_horizons(m, N)
    result = sweep(lifted_map, x0, y0, m, N, land=outside_w, stay=V.contains, horizons=horizons,
                   merge_epsilon=merge_epsilon, cap=cap, threads=threads)
    return _estimate(result, m, N, horizons, f'rho_VW {lifted_map.name} {V.end} {V.level:g}/{W.level:g}')


@dataclass(frozen=True)
class RadiiSchedule:
    """
    Nested end windows: V_k at initial_level + k * step toward the end, k < depth, and for each V_k the inner
    windows W_kj one to inner_depth steps deeper. The step is -log_b(shrink) in chart units, so radii shrink
    by the factor `shrink` per level.
    """
    initial_level: float
    shrink: float = 0.5
    depth: int = 3
    inner_depth: int = 2
    log_base: float = math.e

    def __post_init__(self) -> None:
        if not 0 < self.shrink < 1:
            raise ValueError('shrink must lie in (0, 1)')
        if self.depth < 2:
            raise ValueError('schedule depth must be at least 2')
        if self.inner_depth < 1:
            raise ValueError('inner_depth must be at least 1')

    @property
    def step(self) -> float:
        return -math.log(self.shrink) / math.log(self.log_base)

    def windows(self, end: str = 'N') -> List[EndWindow]:
        sign = 1 if end == 'N' else -1
        return [EndWindow(end, self.initial_level + sign * k * self.step) for k in range(self.depth)]

    def inner(self, V: EndWindow) -> List[EndWindow]:
        return [EndWindow(V.end, V.level + V.sign * (j + 1) * self.step) for j in range(self.inner_depth)]

    def to_dict(self) -> Dict[str, Any]:
        return {'initial_level': self.initial_level, 'shrink': self.shrink, 'depth': self.depth,
                'inner_depth': self.inner_depth, 'log_base': self.log_base}


@dataclass
class LocalRotationResult:
    levels: List[RotationSetEstimate]
    extrapolated: RotationSetEstimate
    monotone: bool
    converged: bool
    table: PandasDataFrame
    end: str = 'N'

    def to_dict(self) -> Dict[str, Any]:
        return {'levels': [e.to_dict() for e in self.levels], 'extrapolated': self.extrapolated.to_dict(),
                'monotone': self.monotone, 'converged': self.converged, 'end': self.end,
                'table': self.table.to_dict(orient='records')}


def _local_summary(levels: List[RotationSetEstimate], windows: List[EndWindow], merge_epsilon: float,
                   end: str) -> LocalRotationResult:
    extrapolated = levels[-2].intersect(levels[-1])
    extrapolated.label = 'extrapolated'
    monotone = True
    for outer, inner in zip(levels, levels[1:]):
        a, b = outer.hull(), inner.hull()
        if a is not None and b is not None and (b.lo < a.lo - merge_epsilon or b.hi > a.hi + merge_epsilon):
            monotone = False
    converged = levels[-2].hausdorff(levels[-1]) <= merge_epsilon
    if not converged:
        warnings.warn(f'Local rotation schedule has not stabilized: last two levels differ by '
                      f'{levels[-2].hausdorff(levels[-1]):.3g}')
    rows = []
    for k, (V, estimate) in enumerate(zip(windows, levels)):
        hull = estimate.hull()
        rows.append({'level': k, 'V': V.level, 'sample_count': estimate.sample_count,
                     'intervals': len(estimate.intervals), 'gap_measure': estimate.gap_measure(),
                     'lo': hull.lo if hull else np.nan, 'hi': hull.hi if hull else np.nan})
    return LocalRotationResult(levels, extrapolated, monotone, converged, pd.DataFrame(rows), end)


def rho_local(lifted_map: LiftedAnnulusMap, schedule: RadiiSchedule, m: int, N: int, end: str = 'N',
              plan: Optional[SamplingPlan] = None, merge_epsilon: float = MERGE_EPSILON, cap: float = INFINITE_CAP,
              threads: int = 1) -> LocalRotationResult:
    """
    Local rotation set at an end, in x-rotation units: per V level the union of rho_VW over the inner W's,
    and the intersection of the two deepest levels as the extrapolated value. For a plane map fixing 0 in
    the chart of PlaneChart, the end is N and the values are plane-orientation turns.
    """
    windows = schedule.windows(end)
    levels = []
    for V in windows:
        per_level: Optional[RotationSetEstimate] = None
        for W in schedule.inner(V):
            estimate = rho_VW(lifted_map, V, W, m, N, plan, merge_epsilon, cap, threads)
            per_level = estimate if per_level is None else per_level.union(estimate)
        assert per_level is not None
        per_level.label = f'rho_V {V.end} {V.level:g}'
        levels.append(per_level)
    return _local_summary(levels, windows, merge_epsilon, end)


def rho_local_naive(lifted_map: LiftedAnnulusMap, schedule: RadiiSchedule, m: int, N: int, end: str = 'N',
                    plan: Optional[SamplingPlan] = None, merge_epsilon: float = MERGE_EPSILON,
                    cap: float = INFINITE_CAP, threads: int = 1) -> LocalRotationResult:
    """Same schedule with only the segment-in-V condition; seeds fill V down to its deepest inner window."""
    plan = plan or SamplingPlan()
    windows = schedule.windows(end)
    levels = []
    horizons = default_horizons(m, N)
    for V in windows:
        deepest = schedule.inner(V)[-1]
        x0, y0 = plan.seeds(V.shell(deepest))
        keep = V.contains(x0, y0)
        result = sweep(lifted_map, x0[keep], y0[keep], m, N, land=V.contains, stay=V.contains,
                       horizons=horizons, merge_epsilon=merge_epsilon, cap=cap, threads=threads)
        levels.append(_estimate(result, m, N, horizons, f'rho_V naive {V.end} {V.level:g}'))
    return _local_summary(levels, windows, merge_epsilon, end)


def rho_local_at_end(lifted_map: LiftedAnnulusMap, end: str, schedule: RadiiSchedule, m: int, N: int,
                     **kwargs: Any) -> LocalRotationResult:
    """
    Local rotation set of an annulus map relative to an end, with the end viewed as a plane fixed point
    through an orientation preserving chart: values at N are the negated x-rotation, values at S the x-rotation.
    """
    local = rho_local(lifted_map, schedule, m, N, end=end, **kwargs)
    if end == 'S':
        return local
    levels = [e.affine(-1, 0) for e in local.levels]
    flipped = _local_summary(levels, schedule.windows(end), levels[0].merge_epsilon, end)
    return flipped


@dataclass(frozen=True)
class AnnulusWindows:
    """Bands centered at `center`, half-width growing linearly to half_width over `count` steps."""
    center: float
    half_width: float
    count: int = 4

    def __post_init__(self) -> None:
        if self.half_width <= 0 or self.count < 1:
            raise ValueError('need a positive half_width and at least one window')

    def bands(self) -> List[Tuple[float, float]]:
        return [(self.center - self.half_width * j / self.count, self.center + self.half_width * j / self.count)
                for j in range(1, self.count + 1)]


def rho_ann(lifted_map: LiftedAnnulusMap, windows: AnnulusWindows, m: int, N: int,
            plan: Optional[SamplingPlan] = None, nx: int = 64, ny: int = 64,
            merge_epsilon: float = MERGE_EPSILON, cap: float = INFINITE_CAP, threads: int = 1) -> RotationSetEstimate:
    """Union of rho_K over the growing band schedule, with one convergence row per window."""
    total: Optional[RotationSetEstimate] = None
    rows = []
    for j, (lo, hi) in enumerate(windows.bands()):
        estimate = rho_K(lifted_map, GridRegion.band(lo, hi, nx, ny), m, N, plan, merge_epsilon, cap,
                         threads=threads)
        total = estimate if total is None else total.union(estimate)
        hull = total.hull()
        rows.append({'level': j, 'y_lo': lo, 'y_hi': hi, 'sample_count': total.sample_count,
                     'intervals': len(total.intervals), 'gap_measure': total.gap_measure(),
                     'lo': hull.lo if hull else np.nan, 'hi': hull.hi if hull else np.nan})
    assert total is not None
    total.label = f'rho_ann {lifted_map.name}'
    total.convergence = pd.DataFrame(rows)
    return total


def rho_measured(lifted_map: LiftedAnnulusMap, K: GridRegion, burn_in: int, length: int,
                 plan: Optional[SamplingPlan] = None, merge_epsilon: float = MERGE_EPSILON,
                 cap: float = INFINITE_CAP) -> RotationSetEstimate:
    """
    Birkhoff proxy: for each seed whose orbit stays in K for burn_in + length steps, the average displacement
    per iterate over the last `length` steps.
    """
    if burn_in < 0 or length < 1:
        raise ValueError('need burn_in >= 0 and length >= 1')
    plan = plan or SamplingPlan()
    x, y = plan.seeds(K)
    alive = np.ones(x.size, dtype=bool)
    start = x.copy()
    for n in range(burn_in + length):
        x, y = lifted_map(x, y)
        alive &= np.isfinite(x) & np.isfinite(y) & K.contains(x, y)
        if n + 1 == burn_in:
            start = x.copy()
    accumulator = SampleAccumulator(merge_epsilon, cap)
    accumulator.add(((x - start) / length)[alive])
    return RotationSetEstimate.from_accumulator(accumulator, (burn_in, burn_in + length),
                                                'no invariant mass detected', label=f'rho_mes {lifted_map.name}')


# Checks


@dataclass
class AffineLawReport:
    p: int
    q: int
    base: RotationSetEstimate
    transformed: RotationSetEstimate
    expected: RotationSetEstimate
    distance: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.distance <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {'p': self.p, 'q': self.q, 'distance': self.distance, 'tolerance': self.tolerance,
                'passed': self.passed, 'base': self.base.to_dict(), 'transformed': self.transformed.to_dict(),
                'expected': self.expected.to_dict()}


def affine_law_check(lifted_map: LiftedAnnulusMap, p: int, q: int, estimator: Estimator,
                     merge_epsilon: float = MERGE_EPSILON, tol: float = 0.0) -> AffineLawReport:
    """Estimate for the isotopy J^p * I^q against q * estimate + p, compared in Hausdorff distance."""
    if q == 0:
        raise ValueError('q must be non-zero')
    base = estimator(lifted_map)
    transformed = estimator(rigid_rotation_isotopy_power(lifted_map, p, q))
    expected = base.affine(q, p)
    return AffineLawReport(p, q, base, transformed, expected, expected.hausdorff(transformed),
                           abs(q) * merge_epsilon + tol)


def reflect_check(lifted_map: LiftedAnnulusMap, estimator: Estimator, merge_epsilon: float = MERGE_EPSILON,
                  tol: float = 0.0) -> AffineLawReport:
    """Conjugation by (x, y) -> (-x, y) negates the estimate."""
    base = estimator(lifted_map)
    transformed = estimator(reflect(lifted_map))
    expected = base.affine(-1, 0)
    return AffineLawReport(0, -1, base, transformed, expected, expected.hausdorff(transformed), merge_epsilon + tol)


def classify_annulus(estimate: RotationSetEstimate, margin: float = 0.0) -> str:
    """'positive' if the estimate lies in (margin, +inf], 'negative' if in [-inf, -margin), else 'neither'."""
    hull = estimate.hull()
    if hull is None:
        flags = estimate.infinite_flags
        if flags['+inf'] != flags['-inf']:
            return 'positive' if flags['+inf'] else 'negative'
        return 'neither'
    if hull.lo > margin:
        return 'positive'
    if hull.hi < -margin:
        return 'negative'
    return 'neither'
