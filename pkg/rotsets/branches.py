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

from dataclasses import asdict, dataclass, field
import math
from typing import Any, Dict, List, Optional, Tuple, Union
import warnings

import numpy as np
from numpy import ndarray
import pandas as pd
from pandas import DataFrame as PandasDataFrame
from scipy import ndimage

from .cover import CoverPoint, LiftedAnnulusMap, OVERFLOW_GUARD
from .errors import BranchError, WindowOverflowError
from .invsets import (GraphCurve, GridRegion, free_curve_classify, image, label_components, survival_steps,
                      theta_maximal)
from .rotset import MERGE_EPSILON, SamplingPlan, rho_K

UNSTABLE = 'unstable'
STABLE = 'stable'


@dataclass(frozen=True)
class BandSpec:
    """Closed band between the lower curve Gamma_{i+1} and the upper curve Gamma_i."""
    upper: GraphCurve
    lower: GraphCurve
    index: int = 0

    def __post_init__(self) -> None:
        if not self.upper.level_range[0] > self.lower.level_range[1]:
            raise ValueError('band curves must be disjoint with the upper one above')

    def region(self, nx: int, ny: int) -> GridRegion:
        return GridRegion.between(self.lower, self.upper, nx, ny)

    def contains(self, x: ndarray, y: ndarray) -> ndarray:
        return (y >= self.lower(x)) & (y <= self.upper(x))

    def far_curve(self, sign: str) -> GraphCurve:
        # unstable branches reach down to Gamma_{i+1}, stable ones up to Gamma_i
        return self.lower if sign == UNSTABLE else self.upper

    def to_dict(self) -> Dict[str, Any]:
        return {'upper': self.upper.to_dict(), 'lower': self.lower.to_dict(), 'index': self.index}


def _check_sign(sign: str) -> int:
    if sign not in (UNSTABLE, STABLE):
        raise ValueError(f'Invalid branch sign {sign}; use {UNSTABLE!r} or {STABLE!r}')
    return 1 if sign == UNSTABLE else -1


def lambda_sequence(lifted_map: LiftedAnnulusMap, band: BandSpec, n: int, sign: str = UNSTABLE,
                    nx: int = 120, ny: int = 200, threads: int = 1) -> List[GridRegion]:
    """
    Lambda_0, ..., Lambda_n on the periodic band grid. Unstable: Lambda_k = band & f(Lambda_{k-1}), the grid
    form of f^k(Cl U^-(Gamma_i)) & Cl U^+(Gamma_{i+1}); stable uses f^-1. Each step is also intersected with
    the previous set, so the sequence is nested.
    """
    if n < 0:
        raise ValueError('n must be >= 0')
    direction = _check_sign(sign)
    band_region = band.region(nx, ny)
    sequence = [band_region]
    for _ in range(n):
        previous = sequence[-1]
        sequence.append(previous & image(previous, lifted_map, direction, threads))
    return sequence


def lambda_n(lifted_map: LiftedAnnulusMap, band: BandSpec, n: int, sign: str = UNSTABLE, nx: int = 120,
             ny: int = 200, window: Optional[Tuple[int, int]] = None, threads: int = 1) -> GridRegion:
    """Lambda_n on the band grid, unrolled over the cover window (x_lo, units) when one is given."""
    region = lambda_sequence(lifted_map, band, n, sign, nx, ny, threads)[-1]
    return region.unroll(*window) if window else region


@dataclass
class LambdaLimit:
    """Depth-N approximation of Lambda^-_i or Lambda^+_i by conservative images and by escape time."""
    sign: str
    horizon: int
    conservative: GridRegion
    escape: GridRegion
    crosscheck_cells: Optional[int]
    history: PandasDataFrame

    def to_dict(self) -> Dict[str, Any]:
        return {'sign': self.sign, 'horizon': self.horizon, 'conservative': self.conservative.to_dict(),
                'escape': self.escape.to_dict(), 'crosscheck_cells': self.crosscheck_cells,
                'history': self.history.to_dict(orient='records')}


def lambda_limit(lifted_map: LiftedAnnulusMap, band: BandSpec, N: int, sign: str = UNSTABLE, nx: int = 120,
                 ny: int = 200, threads: int = 1) -> LambdaLimit:
    """
    Intersection of Lambda_n for n <= N, together with the escape-time set of band cells whose negative
    (unstable) or positive (stable) iterates stay in the band for N steps. crosscheck_cells is the largest
    taxicab distance, in cells, from a conservative cell to the escape-time set.
    """
    if N < 1:
        raise ValueError('N must be >= 1')
    direction = _check_sign(sign)
    sequence = lambda_sequence(lifted_map, band, N, sign, nx, ny, threads)
    conservative = sequence[-1]

    band_region = sequence[0]
    xc, yc = band_region.occupied_centers()
    steps = survival_steps(lifted_map, xc, yc, band_region.contains, N, -direction)
    occupancy = np.zeros_like(band_region.occupancy)
    occupancy[band_region.occupancy] = steps >= N
    escape = band_region.with_occupancy(occupancy)

    crosscheck: Optional[int] = None
    if not escape.is_empty() and not conservative.is_empty():
        distance = ndimage.distance_transform_cdt(~escape.occupancy, metric='taxicab')
        crosscheck = int(distance[conservative.occupancy].max())
    history = pd.DataFrame({'n': range(N + 1), 'cells': [r.count for r in sequence]})
    return LambdaLimit(sign, N, conservative, escape, crosscheck, history)


@dataclass
class BranchResult:
    """Connected component of a Lambda estimate containing the base point, on an x-unwrapped cover window."""
    base: CoverPoint
    sign: str
    region: GridRegion
    compact: bool
    meets_far_curve: bool
    diameter: float
    diameter_bound: float
    widenings: int = 0

    @property
    def within_bound(self) -> bool:
        return self.diameter <= self.diameter_bound

    @property
    def x_max(self) -> float:
        extent = self.region.x_extent()
        assert extent is not None
        return extent[1]

    def to_dict(self) -> Dict[str, Any]:
        return {'base': [self.base.x, self.base.y], 'sign': self.sign, 'compact': self.compact,
                'meets_far_curve': self.meets_far_curve, 'diameter': self.diameter,
                'diameter_bound': self.diameter_bound, 'within_bound': self.within_bound,
                'cells': self.region.count, 'window': [self.region.x_lo, self.region.x_hi],
                'widenings': self.widenings}


def default_window_units(horizontal_bound: float) -> int:
    return int(math.ceil(8 * (2 * horizontal_bound + 1)))


def branch_window(x: float, units: int) -> Tuple[int, int]:
    return int(math.floor(x)) - units // 2, units


def branch_of(lifted_map: LiftedAnnulusMap, band: BandSpec, x: CoverPoint, limit: LambdaLimit,
              window_units: Optional[int] = None, use: str = 'escape', connectivity: int = 4,
              strict: bool = False, check_diameter: bool = False,
              max_window_units: Optional[int] = None) -> BranchResult:
    """
    Branch Lambda^-_i(x) (or Lambda^+_i(x) for a stable limit): the 4-connected component of the limit
    containing x's cell on a window of window_units fundamental domains centered on floor(x).

    A component reaching the window's x-boundary is recomputed on a window twice as wide, up to
    max_window_units (four times the first window by default). A branch still touching the boundary at
    the cap is reported as not compact.

    Raises:
        BranchError: x's cell is not in the limit (the base point escaped)
        WindowOverflowError: with strict=True, when the component still reaches the x-boundary at the cap
    """
    source = limit.escape if use == 'escape' else limit.conservative
    units = window_units or default_window_units(lifted_map.horizontal_bound)
    cap = max(units, max_window_units or 4 * units)
    widenings = 0
    while True:
        unrolled = source.unroll(*branch_window(x.x, units))
        row, col, inside = unrolled.cell_index(x.x, x.y)
        if not bool(inside) or not unrolled.occupancy[int(row), int(col)]:
            raise BranchError(f'base point ({x.x:.6g}, {x.y:.6g}) is not in the {limit.sign} set '
                              f'at depth {limit.horizon}')
        labels, _ = label_components(unrolled, connectivity)
        mask = labels == labels[int(row), int(col)]
        compact = not (mask[:, 0].any() or mask[:, -1].any())
        if compact or units >= cap:
            break
        units = min(2 * units, cap)
        widenings += 1
    component = unrolled.with_occupancy(mask)

    if not compact and strict:
        raise WindowOverflowError(f'{limit.sign} branch at ({x.x:.6g}, {x.y:.6g}) reaches the edge of a '
                                  f'{units}-unit window')
    first, last = component.bounding_columns()  # type: ignore
    diameter = (last - first + 1) * component.dx
    bound = 2 * lifted_map.horizontal_bound + 1 + 2 * component.dx
    if check_diameter and compact and diameter > bound:
        warnings.warn(f'{limit.sign} branch diameter {diameter:.4g} exceeds 2 M0 + 1 = {bound:.4g}; '
                      'treating it as a grid resolution artifact')
    meets = component.meets_curve(band.far_curve(limit.sign), tolerance_cells=1)
    return BranchResult(x, limit.sign, component, compact, meets, diameter, bound, widenings)


@dataclass
class H2Report:
    holds: bool
    fails_at: Optional[int]
    limiting_level: float
    table: PandasDataFrame

    def to_dict(self) -> Dict[str, Any]:
        return {'holds': self.holds, 'fails_at': self.fails_at, 'limiting_level': self.limiting_level,
                'table': self.table.to_dict(orient='records')}


def h2_check(lifted_map: LiftedAnnulusMap, gamma0: GraphCurve, gamma2: GraphCurve, N: int,
             samples: int = 4096) -> H2Report:
    """
    Does f^n(Gamma_0) meet Gamma_2 for every n in 1..N? A dense sample of Gamma_0 is iterated and the image
    meets Gamma_2 when its clearance above Gamma_2 changes sign or vanishes.
    """
    x = np.arange(samples) / samples
    y = gamma0(x)
    rows = []
    with np.errstate(over='ignore', invalid='ignore'):
        for n in range(1, N + 1):
            x, y = lifted_map(x, y)
            finite = np.isfinite(x) & np.isfinite(y) & (np.abs(y) <= OVERFLOW_GUARD)
            clearance = np.where(finite, y - gamma2(np.where(finite, x, 0.0)), -np.inf)
            lo, hi = float(np.min(clearance)), float(np.max(clearance))
            rows.append({'n': n, 'min_clearance': lo, 'max_clearance': hi, 'meets': lo <= 0 <= hi,
                         'min_level': float(np.min(np.where(finite, y, -np.inf)))})
    table = pd.DataFrame(rows)
    failing = table.loc[~table['meets'], 'n']
    fails_at = int(failing.iloc[0]) if len(failing) else None
    return H2Report(fails_at is None, fails_at, float(table['min_level'].iloc[-1]), table)


# The branch-intersection experiment


@dataclass
class HeteroclinicConfig:
    nx: int = 120
    ny: int = 200
    theta_horizon: int = 30
    lambda_horizon: int = 30
    sweep_horizon: int = 200
    m: int = 1
    N: int = 200
    merge_epsilon: float = MERGE_EPSILON
    plan: SamplingPlan = field(default_factory=lambda: SamplingPlan(mode='cells'))
    k: int = 1000
    witness_horizon: int = 4000
    bisection_steps: int = 40
    window_units: Optional[int] = None
    max_window_units: Optional[int] = None
    threads: int = 1
    tolerance: float = 0.02

    def to_dict(self) -> Dict[str, Any]:
        record = asdict(self)
        record['plan'] = self.plan.to_dict()
        # worker count never enters a record
        record.pop('threads')
        return record

    @classmethod
    def from_config(cls, cfg: Any) -> 'HeteroclinicConfig':
        if cfg is None:
            return cls()
        values = {k: cfg[k] for k in cls.__dataclass_fields__ if k in cfg and k != 'plan'}
        if 'plan' in cfg:
            values['plan'] = SamplingPlan.from_config(cfg['plan'])
        return cls(**values)


@dataclass
class Witness:
    """Mixed orbit segment through z: forward and backward iterates until each falls below p1(z) - k M0."""
    z: Tuple[float, float]
    k: int
    level: float
    n_plus: Optional[int]
    n_minus: Optional[int]
    value: Optional[float]
    contained: bool
    max_right_forward: float
    max_right_backward: float
    samples: List[Dict[str, Any]] = field(default_factory=list)
    forward_trace: ndarray = field(default_factory=lambda: np.empty((0, 2)), repr=False)
    backward_trace: ndarray = field(default_factory=lambda: np.empty((0, 2)), repr=False)

    @property
    def drifts_left(self) -> bool:
        return self.n_plus is not None and self.n_minus is not None

    def passes(self, tolerance: float) -> bool:
        return (self.drifts_left and self.contained and self.value is not None and abs(self.value) <= tolerance
                and self.n_plus + self.n_minus >= 2 * self.k)  # type: ignore

    def to_dict(self, stride: int = 50) -> Dict[str, Any]:
        return {'z': list(self.z), 'k': self.k, 'level': self.level, 'n_plus': self.n_plus,
                'n_minus': self.n_minus, 'value': self.value, 'contained': self.contained,
                'drifts_left': self.drifts_left, 'max_right_forward': self.max_right_forward,
                'max_right_backward': self.max_right_backward, 'samples': self.samples,
                'forward_trace': self.forward_trace[::stride].tolist(),
                'backward_trace': self.backward_trace[::stride].tolist()}


def _trace(lifted_map: LiftedAnnulusMap, z: Tuple[float, float], steps: int, direction: int) -> ndarray:
    out = np.empty((steps + 1, 2))
    out[0] = z
    x, y = np.asarray(z[0]), np.asarray(z[1])
    with np.errstate(over='ignore', invalid='ignore'):
        for n in range(1, steps + 1):
            x, y = lifted_map.step(x, y, direction)
            out[n] = float(x), float(y)
    return out


def _first_below(trace: ndarray, level: float) -> Optional[int]:
    below = np.flatnonzero(trace[1:, 0] < level)
    return int(below[0]) + 1 if below.size else None


def witness_orbit(lifted_map: LiftedAnnulusMap, z: Tuple[float, float], k: int, horizon: int,
                  outer: BandSpec) -> Witness:
    """
    Follow z forward and backward for up to `horizon` steps. n+ and n- are the first times p1 drops below
    p1(z) - k M0; the certified value is (p1(f^n+ z) - p1(f^-n- z)) / (n+ + n-), and the segment must stay in
    the closed annulus between the outer curves.
    """
    M0 = lifted_map.horizontal_bound
    forward = _trace(lifted_map, z, horizon, 1)
    backward = _trace(lifted_map, z, horizon, -1)

    def crossing(level: float) -> Tuple[Optional[int], Optional[int], Optional[float]]:
        n_plus, n_minus = _first_below(forward, level), _first_below(backward, level)
        if n_plus is None or n_minus is None:
            return n_plus, n_minus, None
        return n_plus, n_minus, float((forward[n_plus, 0] - backward[n_minus, 0]) / (n_plus + n_minus))

    level = z[0] - k * M0
    n_plus, n_minus, value = crossing(level)
    if n_plus is not None and n_minus is not None:
        segment = np.vstack([forward[:n_plus + 1], backward[1:n_minus + 1]])
        contained = bool(np.all(np.isfinite(segment)) and np.all(outer.contains(segment[:, 0], segment[:, 1])))
    else:
        contained = False
    samples = []
    for k_i in sorted({max(1, k // 10), max(1, k // 2), k}):
        a, b, v = crossing(z[0] - k_i * M0)
        samples.append({'k': k_i, 'n_plus': a, 'n_minus': b, 'value': v})
    stop_f = n_plus if n_plus is not None else horizon
    stop_b = n_minus if n_minus is not None else horizon
    return Witness(z=(float(z[0]), float(z[1])), k=k, level=float(level), n_plus=n_plus, n_minus=n_minus,
                   value=value, contained=contained,
                   max_right_forward=float(np.nanmax(forward[:stop_f + 1, 0]) - z[0]),
                   max_right_backward=float(np.nanmax(backward[:stop_b + 1, 0]) - z[0]),
                   samples=samples, forward_trace=forward[:stop_f + 1], backward_trace=backward[:stop_b + 1])


@dataclass
class Certificate:
    status: str  # 'certified', 'inconclusive' or 'refused'
    reason: str
    map_metadata: Dict[str, Any]
    config: Dict[str, Any]
    h1: Dict[str, str] = field(default_factory=dict)
    h2: Optional[Dict[str, Any]] = None
    h3: Dict[str, Any] = field(default_factory=dict)
    x: Optional[Tuple[float, float]] = None
    y: Optional[Tuple[float, float]] = None
    unstable_branch: Optional[BranchResult] = None
    stable_branch: Optional[BranchResult] = None
    n_intersection: Optional[int] = None
    witness_interval: Optional[Tuple[float, float, float]] = None
    witness: Optional[Witness] = None
    gamma1_split: Dict[str, Any] = field(default_factory=dict)
    gammas: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status, 'reason': self.reason, 'map': self.map_metadata, 'config': self.config,
            'h1': self.h1, 'h2': self.h2, 'h3': self.h3,
            'x': list(self.x) if self.x else None, 'y': list(self.y) if self.y else None,
            'unstable_branch': self.unstable_branch.to_dict() if self.unstable_branch else None,
            'stable_branch': self.stable_branch.to_dict() if self.stable_branch else None,
            'n_intersection': self.n_intersection,
            'witness_interval': list(self.witness_interval) if self.witness_interval else None,
            'witness': self.witness.to_dict() if self.witness else None,
            'gamma1_split': self.gamma1_split, 'gammas': self.gammas,
        }


def _best_cell(lifted_map: LiftedAnnulusMap, candidates: GridRegion, inside: Any, horizon: int) -> CoverPoint:
    xc, yc = candidates.occupied_centers()
    forward = survival_steps(lifted_map, xc, yc, inside, horizon, 1)
    backward = survival_steps(lifted_map, xc, yc, inside, horizon, -1)
    best = int(np.argmax(np.minimum(forward, backward)))
    return CoverPoint(float(xc[best]), float(yc[best]))


def _bisect_column(lifted_map: LiftedAnnulusMap, x: float, y_lo: float, y_hi: float, inside: Any,
                   horizon: int, steps: int) -> Tuple[float, float]:
    """Greedy bisection in y: keep the half whose midpoint survives longer in both directions."""
    lo, hi = y_lo, y_hi
    for _ in range(steps):
        mid = (lo + hi) / 2
        trial_y = np.array([(lo + mid) / 2, (mid + hi) / 2])
        trial_x = np.full(2, x)
        score = np.minimum(survival_steps(lifted_map, trial_x, trial_y, inside, horizon, 1),
                           survival_steps(lifted_map, trial_x, trial_y, inside, horizon, -1))
        if score[1] > score[0]:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _gamma1_split(lifted_map: LiftedAnnulusMap, band0: BandSpec, unstable: BranchResult,
                  stable: Optional[BranchResult], target: BranchResult, horizon: int) -> Dict[str, Any]:
    """
    Gamma_1 = Gamma_1^l U Gamma_1^r: the right part is the stretch of Gamma_1 bordering the right-unbounded
    component of the band minus the two branches at x. The left part is tested for forward hits in Lambda_1^+(y).
    """
    removed = unstable.region
    if stable is not None and stable.region.same_grid(removed):
        removed = removed | stable.region
    rest = removed.full_like() - removed
    labels, _ = label_components(rest)
    right_labels = set(np.unique(labels[:, -1])) - {0}
    right = np.isin(labels, list(right_labels))
    bottom = right[0]
    xs = rest.x_lo + (np.arange(rest.nx) + 0.5) * rest.dx
    left_mask = ~bottom & ~removed.occupancy[0]
    left_x = xs[left_mask]
    left_y = band0.lower(left_x)
    hit_at: Optional[int] = None
    x, y = left_x.copy(), left_y.copy()
    for n in range(1, horizon + 1):
        if x.size == 0:
            break
        x, y = lifted_map(x, y)
        if np.any(target.region.contains(x, y)):
            hit_at = n
            break
    extent_r = xs[bottom]
    return {'right_cells': int(bottom.sum()), 'left_cells': int(left_mask.sum()),
            'right_x_min': float(extent_r.min()) if extent_r.size else None,
            'left_forward_hit_at': hit_at}


def branch_intersection_experiment(lifted_map: LiftedAnnulusMap, gamma0: GraphCurve, gamma1: GraphCurve,
                                   gamma2: GraphCurve, config: Optional[HeteroclinicConfig] = None) -> Certificate:
    """
    Numerical check that 0 is a rotation value of the maximal invariant set of the annulus between Gamma_0
    and Gamma_2, when the band above Gamma_1 rotates positively and the band below negatively.

    The pipeline picks x in Theta(A_0) on an unstable branch, y in Theta(A_1) far enough to the right on a
    stable branch, finds n with f^n(Lambda_0^-(x)) meeting Lambda_1^+(y), refines a witness point by
    bisection along its grid column and certifies a mixed orbit segment whose average displacement is
    within the tolerance of 0. Failed hypotheses refuse; a missing intersection is inconclusive.
    """
    config = config or HeteroclinicConfig()
    band0 = BandSpec(gamma0, gamma1, 0)
    band1 = BandSpec(gamma1, gamma2, 1)
    outer = BandSpec(gamma0, gamma2, 0)
    cert = Certificate('inconclusive', '', lifted_map.metadata(), config.to_dict(),
                       gammas={'gamma0': gamma0.to_dict(), 'gamma1': gamma1.to_dict(), 'gamma2': gamma2.to_dict()})

    resolution = outer.region(config.nx, config.ny).dy
    cert.h1 = {name: free_curve_classify(lifted_map, curve, resolution).kind
               for name, curve in (('gamma0', gamma0), ('gamma1', gamma1), ('gamma2', gamma2))}
    if any(kind != 'attracting' for kind in cert.h1.values()):
        cert.status, cert.reason = 'refused', f'(H1) fails: curve classifications {cert.h1}'
        return cert
    cert.h2 = h2_check(lifted_map, gamma0, gamma2, config.lambda_horizon).to_dict()

    A0 = band0.region(config.nx, config.ny)
    A1 = band1.region(config.nx, config.ny)
    theta0 = theta_maximal(lifted_map, A0, config.theta_horizon, config.threads).region
    theta1 = theta_maximal(lifted_map, A1, config.theta_horizon, config.threads).region
    rho0 = rho_K(lifted_map, theta0, config.m, config.N, config.plan, config.merge_epsilon, threads=config.threads)
    rho1 = rho_K(lifted_map, theta1, config.m, config.N, config.plan, config.merge_epsilon, threads=config.threads)
    cert.h3 = {'theta0': rho0.to_dict(), 'theta1': rho1.to_dict()}
    hull0, hull1 = rho0.hull(), rho1.hull()
    eps = config.merge_epsilon
    if hull0 is None or hull1 is None or not (hull0.lo > eps and hull1.hi < -eps):
        cert.status = 'refused'
        cert.reason = (f'(H3) fails at this resolution: rotation of Theta(A0) is {rho0}, of Theta(A1) is {rho1}; '
                       f'need > {eps} and < {-eps}')
        return cert

    M0 = lifted_map.horizontal_bound
    units = config.window_units or default_window_units(M0)
    unstable0 = lambda_limit(lifted_map, band0, config.lambda_horizon, UNSTABLE, config.nx, config.ny, config.threads)
    stable0 = lambda_limit(lifted_map, band0, config.lambda_horizon, STABLE, config.nx, config.ny, config.threads)
    stable1 = lambda_limit(lifted_map, band1, config.lambda_horizon, STABLE, config.nx, config.ny, config.threads)

    pick0 = theta0 & unstable0.escape
    pick1 = theta1 & stable1.escape
    if pick0.is_empty() or pick1.is_empty():
        cert.reason = 'no base point: Theta(A_i) misses the branch sets at this resolution'
        return cert
    x = _best_cell(lifted_map, pick0, band0.contains, config.theta_horizon)
    cert.x = (x.x, x.y)
    C0 = branch_of(lifted_map, band0, x, unstable0, units, check_diameter=cert.h2['holds'],
                   max_window_units=config.max_window_units)
    cert.unstable_branch = C0
    if C0.compact:
        M = C0.x_max
    else:
        warnings.warn('unstable branch is not compact in its window; using p1(x) as its right bound')
        M = x.x

    y = _best_cell(lifted_map, pick1, band1.contains, config.theta_horizon)
    shift = int(math.floor(M + 2 * M0 + 1 - y.x)) + 1
    y = y.translate(shift)
    cert.y = (y.x, y.y)
    C1 = branch_of(lifted_map, band1, y, stable1, units, check_diameter=cert.h2['holds'],
                   max_window_units=config.max_window_units)
    cert.stable_branch = C1

    xs, ys = C1.region.occupied_centers()
    px, py = xs.copy(), ys.copy()
    alive = np.ones(xs.size, dtype=bool)
    hits = np.zeros(xs.size, dtype=bool)
    for n in range(1, config.sweep_horizon + 1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        X, Y = lifted_map.inverse_lift(px[idx], py[idx])
        ok = np.isfinite(X) & np.isfinite(Y)
        ok[ok] = outer.contains(X[ok], Y[ok])
        alive[idx[~ok]] = False
        px[idx[ok]], py[idx[ok]] = X[ok], Y[ok]
        landed = idx[ok][C0.region.contains(X[ok], Y[ok])]
        if landed.size:
            hits[landed] = True
            cert.n_intersection = n
            break
    if cert.n_intersection is None:
        cert.reason = (f'inconclusive at horizon {config.sweep_horizon}: no forward image of the unstable branch '
                       'met the stable branch')
        return cert

    cand_x, cand_y = xs[hits], ys[hits]
    forward = survival_steps(lifted_map, cand_x, cand_y, outer.contains, config.sweep_horizon, 1)
    backward = survival_steps(lifted_map, cand_x, cand_y, outer.contains, config.sweep_horizon, -1)
    best = int(np.argmax(np.minimum(forward, backward)))
    cx, cy = float(cand_x[best]), float(cand_y[best])
    half = C1.region.dy / 2
    lo, hi = _bisect_column(lifted_map, cx, cy - half, cy + half, outer.contains, config.witness_horizon,
                            config.bisection_steps)
    cert.witness_interval = (cx, lo, hi)
    witness = witness_orbit(lifted_map, (cx, (lo + hi) / 2), config.k, config.witness_horizon, outer)
    cert.witness = witness

    try:
        stable_x = branch_of(lifted_map, band0, x, stable0, units, max_window_units=config.max_window_units)
    except BranchError:
        stable_x = None
    cert.gamma1_split = _gamma1_split(lifted_map, band0, C0, stable_x, C1, config.sweep_horizon)

    if witness.passes(config.tolerance):
        cert.status = 'certified'
        cert.reason = (f'mixed segment of length {witness.n_plus + witness.n_minus} through z has average '  # type: ignore
                       f'displacement {witness.value:.3g}')
    else:
        cert.reason = (f'inconclusive at horizon {config.witness_horizon}: witness n+={witness.n_plus}, '
                       f'n-={witness.n_minus}, contained={witness.contained}, value={witness.value}')
    return cert


def revalidate_certificate(lifted_map: LiftedAnnulusMap, certificate: Union[Certificate, Dict[str, Any]],
                           tolerance: Optional[float] = None) -> Dict[str, Any]:
    """Re-run the witness orbit from the stored numbers and compare every recorded inequality."""
    record = certificate.to_dict() if isinstance(certificate, Certificate) else certificate
    witness = record.get('witness')
    if record.get('status') != 'certified' or not witness:
        return {'valid': False, 'mismatches': ['certificate has no certified witness']}
    config = record['config']
    tolerance = config['tolerance'] if tolerance is None else tolerance
    if not record.get('gammas'):
        return {'valid': False, 'mismatches': ['certificate does not record its curves']}
    outer = BandSpec(GraphCurve.from_config(record['gammas']['gamma0']),
                     GraphCurve.from_config(record['gammas']['gamma2']))
    fresh = witness_orbit(lifted_map, tuple(witness['z']), int(witness['k']), int(config['witness_horizon']), outer)
    mismatches = []
    for key in ('n_plus', 'n_minus', 'contained'):
        if getattr(fresh, key) != witness[key]:
            mismatches.append(f'{key}: stored {witness[key]}, recomputed {getattr(fresh, key)}')
    if not fresh.passes(tolerance):
        mismatches.append(f'recomputed witness fails the tolerance {tolerance}: value {fresh.value}')
    elif witness['value'] is not None and not math.isclose(fresh.value, witness['value'],  # type: ignore
                                                           rel_tol=1e-9, abs_tol=1e-12):
        mismatches.append(f'value: stored {witness["value"]}, recomputed {fresh.value}')
    return {'valid': not mismatches, 'mismatches': mismatches, 'value': fresh.value,
            'n_plus': fresh.n_plus, 'n_minus': fresh.n_minus}
