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

from dataclasses import dataclass
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from box import Box
import numpy as np

from helpers.io_utils import IOUtils, to_plain
from helpers.utils import build_config_from_file, get_result_format

from .branches import (UNSTABLE, BandSpec, HeteroclinicConfig, branch_intersection_experiment, branch_of, h2_check,
                       lambda_limit, lambda_sequence, revalidate_certificate)
from .cover import TOL_LIFT, CoverPoint, Window, rho_n_cocycle_error, validate_lift
from .errors import BranchError
from .invsets import GraphCurve, GridRegion, theta_escape_time, theta_maximal
from .mapzoo import MapSpec, conjugate, plane_linear
from .rotset import (AnnulusWindows, ExtendedInterval, RadiiSchedule, RotationSetEstimate, SamplingPlan,
                     affine_law_check, reflect_check, rho_K, rho_ann, rho_local, rho_measured)
from .runner import ExitCode, hull_distance, region_from_config

ACCEPTANCE_CONFIG = Path(__file__).parent.parent / 'configs' / 'acceptance.yml'


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: Any = None
    bound: Any = None
    detail: str = ''
    # passed == (value compare bound) whenever both are numbers; None when the pass rule is richer
    compare: Optional[str] = '<='

    def to_dict(self) -> Dict[str, Any]:
        return to_plain({'name': self.name, 'passed': bool(self.passed), 'value': self.value, 'bound': self.bound,
                         'detail': self.detail, 'compare': self.compare})


def _plan(cfg: Box, seed: int) -> SamplingPlan:
    plan_cfg = dict(cfg.get('plan') or {})
    plan_cfg.setdefault('seed', seed)
    return SamplingPlan.from_config(plan_cfg)


def _resolve(map_cfg: Any) -> Any:
    return MapSpec.from_config(map_cfg).resolve()


def _hull_error(estimate: RotationSetEstimate, expected: float) -> float:
    hull = estimate.hull()
    if hull is None:
        return math.inf
    return max(abs(hull.lo - expected), abs(hull.hi - expected))


# Concrete values


def check_plane_local(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """Local rotation sets of z -> a z at 0: the argument of a in turns, for a contraction."""
    schedule = RadiiSchedule(**cfg.schedule)
    results = []
    for case in cfg.cases:
        lifted = plane_linear(float(case.modulus), float(case.angle_turns))
        local = rho_local(lifted, schedule, int(cfg.m), int(cfg.N), 'N', _plan(cfg, seed), float(cfg.merge_epsilon),
                          threads=threads)
        error = _hull_error(local.extrapolated, float(case.expected))
        results.append(CheckResult(f'local rotation of z -> {case.modulus} exp(2 pi i {case.angle_turns}) z',
                                   error <= cfg.tolerance, error, cfg.tolerance, str(local.extrapolated)))
    return results


def check_double_reeb(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """Annulus rotation set [-1, 1] while no compact set is invariant."""
    lifted = _resolve(cfg.map)
    windows = AnnulusWindows(0.0, float(cfg.half_width), int(cfg.count))
    estimate = rho_ann(lifted, windows, int(cfg.m), int(cfg.N), _plan(cfg, seed), int(cfg.nx), int(cfg.ny),
                       float(cfg.merge_epsilon), threads=threads)
    target = RotationSetEstimate([ExtendedInterval(-1.0, 1.0)], 1, (1, 1), float(cfg.merge_epsilon))
    distance = estimate.hausdorff(target)
    band = GridRegion.band(-float(cfg.half_width), float(cfg.half_width), int(cfg.escape.nx), int(cfg.escape.ny))
    survivors = theta_escape_time(lifted, band, int(cfg.escape.horizon))
    return [
        CheckResult('annulus rotation set of the double Reeb map is [-1, 1]', distance <= cfg.tolerance, distance,
                    cfg.tolerance, str(estimate)),
        CheckResult('no cell keeps its full orbit in the window', survivors.is_empty(), survivors.count, 0),
    ]


def check_twice_reeb(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """0 in the rotation set of successive self-similar bands, with no fixed point off the origin."""
    lifted = _resolve(cfg.map)
    grid_min = float(lifted.params['min_grid_displacement'])
    results = [CheckResult('plane displacement bounded away from 0 off the origin',
                           grid_min > cfg.min_displacement, grid_min, cfg.min_displacement, compare='>')]
    for k in cfg.bands:
        region = GridRegion.band(float(k), float(k) + 1.0, int(cfg.nx), int(cfg.ny))
        estimate = rho_K(lifted, region, int(cfg.m), int(cfg.N), _plan(cfg, seed), float(cfg.merge_epsilon),
                         threads=threads)
        results.append(CheckResult(f'0 in the rotation set of band {k}', estimate.contains(0.0, cfg.merge_epsilon),
                                   str(estimate), cfg.merge_epsilon))
    return results


def reference_values(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    return (check_plane_local(cfg.plane_local, seed, threads) + check_double_reeb(cfg.double_reeb, seed, threads)
            + check_twice_reeb(cfg.twice_reeb, seed, threads))


# Properties


def interval_props(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """Rotation sets of compact invariant pieces are intervals, and the gaps close as the horizon grows."""
    results = []
    for case in cfg.cases:
        lifted = _resolve(case.map)
        estimate = rho_K(lifted, region_from_config(case.region), int(cfg.m), int(cfg.N), _plan(cfg, seed),
                         float(cfg.merge_epsilon), threads=threads)
        gaps = estimate.gaps()
        results.append(CheckResult(f'{lifted.name}: estimate is an interval', estimate.is_interval(cfg.gap_tolerance),
                                   max(gaps) if gaps else 0.0, cfg.gap_tolerance, str(estimate)))
        measures = list(estimate.convergence['gap_measure'])[-3:] if estimate.convergence is not None else []
        shrinking = all(b <= a + 1e-12 for a, b in zip(measures, measures[1:]))
        results.append(CheckResult(f'{lifted.name}: gap measure non-increasing over the last horizons', shrinking,
                                   measures))
    return results


def heteroclinic(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """Certificates for the untilted and tilted heteroclinic maps."""
    results = []
    for case in cfg.cases:
        lifted = _resolve(case.map)
        experiment_cfg = dict(case.experiment)
        plan_cfg = dict(experiment_cfg.get('plan') or {})
        plan_cfg.setdefault('seed', seed)
        experiment_cfg['plan'] = plan_cfg
        config = HeteroclinicConfig.from_config(experiment_cfg)
        config.threads = threads
        gammas = [GraphCurve.from_config(case[name]) for name in ('gamma0', 'gamma1', 'gamma2')]
        cert = branch_intersection_experiment(lifted, *gammas, config=config)
        name = case.name
        results.append(CheckResult(f'{name}: certificate emitted', cert.status == 'certified', cert.status,
                                   'certified', cert.reason, compare='=='))
        for key, theta in (('theta0_range', 'theta0'), ('theta1_range', 'theta1')):
            if key in case and theta in cert.h3:
                hull = RotationSetEstimate.from_dict(cert.h3[theta]).hull()
                lo, hi = (float(v) for v in case[key])
                inside = hull is not None and lo < hull.lo and hull.hi < hi
                results.append(CheckResult(f'{name}: rotation of Theta({theta[-1]}) inside ({lo}, {hi})', inside,
                                           hull.to_list() if hull else None, [lo, hi]))
        if cert.n_intersection is not None:
            results.append(CheckResult(f'{name}: branches meet within the horizon',
                                       cert.n_intersection <= case.max_intersection, cert.n_intersection,
                                       case.max_intersection))
        if cert.witness is not None:
            value = cert.witness.value
            results.append(CheckResult(f'{name}: witness average displacement', cert.witness.passes(config.tolerance),
                                       value, config.tolerance, compare=None))
        if cert.status == 'certified':
            check = revalidate_certificate(lifted, to_plain(cert.to_dict()))
            results.append(CheckResult(f'{name}: certificate revalidates from its stored numbers', check['valid'],
                                       check.get('value'), config.tolerance, '; '.join(check['mismatches']),
                                       compare=None))
    return results


def structure(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """Nesting, reach, diameter and backward invariance of the unstable sets of the tilted map."""
    lifted = _resolve(cfg.map)
    g0, g1, g2 = (GraphCurve.from_config(cfg[name]) for name in ('gamma0', 'gamma1', 'gamma2'))
    nx, ny, N = int(cfg.nx), int(cfg.ny), int(cfg.N)
    h2 = h2_check(lifted, g0, g2, N)
    results = [CheckResult('images of Gamma_0 keep meeting Gamma_2', h2.holds, h2.fails_at)]
    for index, band in enumerate((BandSpec(g0, g1, 0), BandSpec(g1, g2, 1))):
        sequence = lambda_sequence(lifted, band, max(int(cfg.nesting_horizon), N), UNSTABLE, nx, ny, threads)
        nested = all(b.issubset(a) for a, b in zip(sequence, sequence[1:]))
        results.append(CheckResult(f'band {index}: unstable sets are nested', nested,
                                   [r.count for r in sequence[-3:]]))

        limit = lambda_limit(lifted, band, N, UNSTABLE, nx, ny, threads)
        results.append(CheckResult(f'band {index}: unstable set meets the lower curve',
                                   limit.conservative.meets_curve(band.lower, tolerance_cells=1)))

        # points whose backward orbit stays N steps in the band step back into Lambda_{N-1}
        previous = sequence[N - 1].dilate(int(cfg.dilation_cells))
        xc, yc = limit.escape.occupied_centers()
        X, Y = lifted.inverse_lift(xc, yc)
        outside = int(np.count_nonzero(~previous.contains(X, Y)))
        results.append(CheckResult(f'band {index}: backward invariance up to {cfg.dilation_cells} cell',
                                   outside == 0, outside, 0))

        theta = theta_maximal(lifted, band.region(nx, ny), N, threads).region
        xc, yc = (theta & limit.escape).occupied_centers()
        if xc.size == 0:
            results.append(CheckResult(f'band {index}: branch diameter', False, None, None,
                                       'Theta misses the unstable set at this resolution'))
            continue
        try:
            branch = branch_of(lifted, band, CoverPoint(float(xc[0]), float(yc[0])), limit)
            results.append(CheckResult(f'band {index}: branch diameter within 2 M0 + 1', branch.within_bound,
                                       branch.diameter, branch.diameter_bound))
        except BranchError as error:
            results.append(CheckResult(f'band {index}: branch diameter', False, None, None, str(error)))
    return results


def measured(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """Orbit-based and Birkhoff-average estimates have the same convex hull."""
    results = []
    for case in cfg.cases:
        lifted = _resolve(case.map)
        K = region_from_config(case.region)
        plan = _plan(cfg, seed)
        if 'theta_horizon' in case:
            K = theta_maximal(lifted, K, int(case.theta_horizon), threads).region
            plan = SamplingPlan.from_config(dict(plan.to_dict(), mode='cells'))
        orbits = rho_K(lifted, K, int(cfg.m), int(cfg.N), plan, float(cfg.merge_epsilon), threads=threads)
        birkhoff = rho_measured(lifted, K, int(cfg.burn_in), int(cfg.length), plan, float(cfg.merge_epsilon))
        distance = hull_distance(orbits, birkhoff)
        results.append(CheckResult(f'{lifted.name}: orbit and measured hulls agree',
                                   distance is not None and distance <= cfg.tolerance, distance, cfg.tolerance))
        a, b = orbits.hull(), birkhoff.hull()
        inside = a is not None and b is not None and b.lo - cfg.tolerance <= a.lo and a.hi <= b.hi + cfg.tolerance
        results.append(CheckResult(f'{lifted.name}: orbit estimate inside the measured hull', inside,
                                   a.to_list() if a else None, b.to_list() if b else None))
    return results


def laws(cfg: Box, seed: int, threads: int) -> List[CheckResult]:
    """Affine law, reflection, conjugacy invariance, lift equivariance and the displacement cocycle."""
    results = []
    eps = float(cfg.merge_epsilon)
    lift_tol = float(cfg.lift_tolerance_factor) * TOL_LIFT
    rng = np.random.default_rng(seed)
    for case in cfg.cases:
        lifted = _resolve(case.map)
        K = region_from_config(case.region)
        plan = _plan(cfg, seed)

        def estimator(f: Any) -> RotationSetEstimate:
            return rho_K(f, K, int(cfg.m), int(cfg.N), plan, eps, threads=threads)

        base = estimator(lifted)
        for p, q in cfg.pairs:
            report = affine_law_check(lifted, int(p), int(q), estimator, eps)
            results.append(CheckResult(f'{lifted.name}: affine law p={p}, q={q}', report.passed, report.distance,
                                       report.tolerance))
        report = reflect_check(lifted, estimator, eps)
        results.append(CheckResult(f'{lifted.name}: reflection negates the estimate', report.passed, report.distance,
                                   report.tolerance))
        for by_cfg in cfg.conjugators:
            by = _resolve(by_cfg)
            distance = estimator(conjugate(lifted, by)).hausdorff(base)
            results.append(CheckResult(f'{lifted.name}: invariant under conjugation by {by.name}',
                                       distance <= cfg.conjugacy_tolerance, distance, cfg.conjugacy_tolerance))

        report = validate_lift(lifted, Window.band(K.y_lo, K.y_hi), int(cfg.lift_samples), tol=lift_tol)
        results.append(CheckResult(f'{lifted.name}: lift equivariance and inverse', report.passed,
                                   max(report.max_equivariance_error, report.max_inverse_error), lift_tol,
                                   compare=None))
        xs = rng.uniform(-10.0, 10.0, int(cfg.cocycle_points))
        ys = rng.uniform(K.y_lo, K.y_hi, int(cfg.cocycle_points))
        worst = max(rho_n_cocycle_error(lifted, CoverPoint(float(x), float(y)), int(cfg.cocycle_n), int(cfg.cocycle_m))
                    for x, y in zip(xs, ys))
        results.append(CheckResult(f'{lifted.name}: displacement cocycle', worst <= lift_tol, worst, lift_tol))
    return results


SuiteFn = Callable[[Box, int, int], List[CheckResult]]

SUITES: Dict[str, List[str]] = {
    'paper-values': ['reference-values'],
    'interval-props': ['interval-props'],
    'theorem-c': ['heteroclinic'],
    'structure': ['structure'],
    'measured': ['measured'],
    'laws': ['laws'],
    'full': ['reference-values', 'interval-props', 'heteroclinic', 'structure', 'measured', 'laws'],
}

# Older names, still accepted
SUITE_ALIASES: Dict[str, str] = {
    'reference-values': 'paper-values',
    'heteroclinic': 'theorem-c',
}

SECTIONS: Dict[str, SuiteFn] = {
    'reference-values': reference_values,
    'interval-props': interval_props,
    'heteroclinic': heteroclinic,
    'structure': structure,
    'measured': measured,
    'laws': laws,
}


def run_suite(name: str, config_path: Optional[Path] = None, threads: int = 1, out_dir: Optional[Path] = None,
              seed: Optional[int] = None, persist: bool = True) -> Dict[str, Any]:
    """
    Run the named acceptance suite from its pinned config and return the aggregate report; the report is
    also appended to results.jsonl of the config's working directory (or out_dir).
    """
    name = SUITE_ALIASES.get(name, name)
    if name not in SUITES:
        raise ValueError(f'Unknown suite {name}, must be one of {", ".join(SUITES)}')
    cfg = build_config_from_file(str(config_path or ACCEPTANCE_CONFIG))
    if out_dir is not None:
        cfg.path.working.directory_path = Path(out_dir)
    if seed is None:
        seed = int(cfg.get('seed') or 0)

    checks: List[Dict[str, Any]] = []
    for section in SUITES[name]:
        print(f'Suite {name}: running {section}...')
        for check in SECTIONS[section](cfg[section], seed, threads):
            checks.append(dict(check.to_dict(), section=section))
            print(f'  [{"pass" if check.passed else "FAIL"}] {check.name}')
    report = {'suite': name, 'checks': checks, 'passed': all(c['passed'] for c in checks)}
    if persist:
        IOUtils(cfg, get_result_format()).write_record(report, 'suite')
    return report


def suite_exit_code(report: Dict[str, Any]) -> ExitCode:
    return ExitCode.SUCCESS if report['passed'] else ExitCode.ASSERTION_FAILURE
