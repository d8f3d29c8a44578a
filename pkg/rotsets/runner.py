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
from enum import IntEnum
from pathlib import Path
import time
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

from box import Box
import pandas as pd
from pandas import DataFrame as PandasDataFrame

from helpers.io_utils import IOUtils, load_records, to_plain
from helpers.utils import (build_config, build_config_from_file, check_allowed_values, compare_stored,
                           get_config_format, get_result_format, missing_required_keys)

from .branches import (STABLE, UNSTABLE, BandSpec, HeteroclinicConfig, branch_intersection_experiment, branch_of,
                       h2_check, lambda_limit, lambda_n, revalidate_certificate)
from .cover import AnnulusPoint, CoverPoint, displacement, rho_n, rho_n_cocycle_error
from .errors import BranchError, ConfigSchemaError, OrbitEscapeError, PreconditionError
from .invsets import (EndNeighborhood, GraphCurve, GridRegion, connected_components, drift_horizon,
                      free_curve_classify, free_horizon, intersection_property_check, invariance_sandwich_holds,
                      theta_backward, theta_connectedness_check, theta_escape_time, theta_forward, theta_maximal)
from .mapzoo import MAP_FAMILIES, MapSpec
from .rotset import (MERGE_EPSILON, AnnulusWindows, RadiiSchedule, RotationSetEstimate, SamplingPlan,
                     classify_annulus, rho_K, rho_ann, rho_local, rho_local_at_end, rho_local_naive, rho_measured)

OperationResult = Tuple[Dict[str, Any], str, Dict[str, PandasDataFrame]]


class ExitCode(IntEnum):
    SUCCESS = 0
    SCHEMA_VIOLATION = 2
    REFUSED = 3
    INCONCLUSIVE = 4
    ASSERTION_FAILURE = 5


STATUS_EXIT_CODES = {
    'ok': ExitCode.SUCCESS,
    'certified': ExitCode.SUCCESS,
    'refused': ExitCode.REFUSED,
    'inconclusive': ExitCode.INCONCLUSIVE,
}


# Subcommand names that run an existing operation
OPERATION_ALIASES: Dict[str, str] = {'theorem-c': 'heteroclinic'}


def canonical_operation(name: Any) -> str:
    return OPERATION_ALIASES.get(str(name), str(name))


def validate_config(cfg: Mapping[str, Any], config_format: Box) -> None:
    """
    Check a config against config_format.yml

    Raises:
        ConfigSchemaError: carrying the dotted path of the first offending field
    """
    missing = missing_required_keys(cfg, config_format.config)
    if missing:
        raise ConfigSchemaError(missing[0])

    operation = cfg['operation']
    problem = check_allowed_values(operation, list(config_format.operations))
    if problem:
        raise ConfigSchemaError('operation', problem)

    family = str(cfg['map']['family']).replace('_', '-')
    problem = check_allowed_values(family, sorted(MAP_FAMILIES))
    if problem:
        raise ConfigSchemaError('map.family', problem)

    params = cfg['params']
    missing = missing_required_keys(params, config_format.params[operation], 'params.')
    if missing:
        raise ConfigSchemaError(missing[0])

    if operation in config_format.region_operations:
        check_region_config(params['region'], config_format, 'params.region')


def check_region_config(cfg: Mapping[str, Any], config_format: Box, field_path: str) -> None:
    missing = missing_required_keys(cfg, config_format.region, f'{field_path}.')
    if missing:
        raise ConfigSchemaError(missing[0])
    if not ({'y_lo', 'y_hi'} <= set(cfg) or {'lower', 'upper'} <= set(cfg)):
        raise ConfigSchemaError(field_path, 'needs either y_lo and y_hi or lower and upper curves')


def region_from_config(cfg: Mapping[str, Any]) -> GridRegion:
    """A band y_lo <= y <= y_hi, or the region between two graph curves, on an nx by ny grid."""
    nx, ny = int(cfg['nx']), int(cfg['ny'])
    x_lo = float(cfg.get('x_lo', 0.0))
    width = float(cfg.get('width', 1.0))
    periodic = bool(cfg.get('periodic', True))
    if 'lower' in cfg and 'upper' in cfg:
        return GridRegion.between(GraphCurve.from_config(cfg['lower']), GraphCurve.from_config(cfg['upper']), nx, ny,
                                  x_lo=x_lo, width=width, periodic=periodic)
    return GridRegion.band(float(cfg['y_lo']), float(cfg['y_hi']), nx, ny, x_lo, width, periodic)


def hull_distance(a: RotationSetEstimate, b: RotationSetEstimate) -> Optional[float]:
    """Largest endpoint difference between the convex hulls, None when either is empty."""
    ha, hb = a.hull(), b.hull()
    if ha is None or hb is None:
        return None
    return max(abs(ha.lo - hb.lo), abs(ha.hi - hb.hi))


def _deep_merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(dict(merged[key]), value)
        else:
            merged[key] = value
    return merged


@dataclass
class RunOutcome:
    record: Dict[str, Any]
    status: str

    @property
    def exit_code(self) -> ExitCode:
        return STATUS_EXIT_CODES.get(self.status, ExitCode.SUCCESS)


class ExperimentRunner:
    """
    Runs one configured operation on one map and persists the result record.

    The record holds the config echo (without paths or worker counts), the map metadata, a status and the
    operation's result; timing goes to run_info.jsonl. Convergence tables and traces are dumped as CSV.
    """

    def __init__(self, config: Union[str, Path, Mapping[str, Any]], overrides: Optional[Mapping[str, Any]] = None):
        if isinstance(config, (str, Path)):
            cfg = build_config_from_file(str(config))
        else:
            cfg = build_config(to_plain(dict(config)))
        if overrides:
            cfg = build_config(_deep_merge(to_plain(cfg.to_dict()), overrides))

        if cfg.get('operation') is not None:
            cfg.operation = canonical_operation(cfg.operation)
        self.config_format = get_config_format()
        validate_config(cfg, self.config_format)
        self.cfg = cfg
        self.operation = str(cfg.operation)
        self.params = cfg.params
        self.seed = int(cfg.get('seed') or 0)
        self.threads = int(cfg.get('threads') or 1)

        self.result_format = get_result_format()
        self.io = IOUtils(cfg, self.result_format)
        # grids exported as PBM bitmaps next to the tables
        self.regions: Dict[str, GridRegion] = {}

        try:
            self.map_spec = MapSpec.from_config(cfg.map)
            self.lifted_map = self.map_spec.resolve()
        except (KeyError, TypeError) as error:
            raise ConfigSchemaError('map.params', f'cannot build {cfg.map.family}: {error}')

    @property
    def operations(self) -> Dict[str, Callable[[Box], OperationResult]]:
        return {
            'rho-n': self.run_rho_n,
            'rho-k': self.run_rho_k,
            'rho-loc': self.run_rho_loc,
            'rho-ann': self.run_rho_ann,
            'rho-mes': self.run_rho_mes,
            'theta': self.run_theta,
            'branches': self.run_branches,
            'heteroclinic': self.run_heteroclinic,
        }

    def config_echo(self) -> Dict[str, Any]:
        return to_plain({'map': self.map_spec.to_dict(), 'operation': self.operation,
                         'params': self.params.to_dict(), 'seed': self.seed})

    def run(self, persist: bool = True, fresh: bool = False) -> RunOutcome:
        print(f'Running {self.operation} on {self.lifted_map.name}...')
        self.regions = {}
        start = time.perf_counter()
        result, status, tables = self.operations[self.operation](self.params)
        record = to_plain({'operation': self.operation, 'config': self.config_echo(),
                           'map': self.lifted_map.metadata(), 'status': status, 'result': result})
        if persist:
            if fresh:
                self.io.reset_results()
            self.io.write_record(record, 'run')
            for name, table in tables.items():
                self.io.save_csv(table, f'{self.operation}_{name}')
            for name, region in self.regions.items():
                self.io.save_pbm(region.to_pbm(), f'{self.operation}_{name}')
            self.io.write_run_info({'operation': self.operation, 'status': status, 'threads': self.threads,
                                    'wall_clock_seconds': round(time.perf_counter() - start, 3)})
        print(f'{self.operation}: {status}')
        return RunOutcome(record, status)

    # Helpers

    def _plan(self, params: Mapping[str, Any], mode: Optional[str] = None) -> SamplingPlan:
        plan_cfg = dict(params.get('plan') or {})
        plan_cfg.setdefault('seed', self.seed)
        if mode is not None:
            plan_cfg.setdefault('mode', mode)
        return SamplingPlan.from_config(plan_cfg)

    @staticmethod
    def _merge_epsilon(params: Mapping[str, Any]) -> float:
        return float(params.get('merge_epsilon', MERGE_EPSILON))

    # Operations

    def run_rho_n(self, params: Box) -> OperationResult:
        x, y = (float(v) for v in params.point)
        n = int(params.n)
        segment = displacement(self.lifted_map, CoverPoint(x, y), n)
        if segment.escaped:
            raise OrbitEscapeError(f'orbit of ({x}, {y}) escaped after {segment.steps_completed} steps', segment)
        result: Dict[str, Any] = {'point': [x, y], 'n': n, 'displacement': segment.displacement,
                                  'rho_n': rho_n(self.lifted_map, AnnulusPoint(x, y), n),
                                  'y_range': [float(segment.y_trace.min()), float(segment.y_trace.max())]}
        if 'm' in params:
            result['cocycle_error'] = rho_n_cocycle_error(self.lifted_map, CoverPoint(x, y), n, int(params.m))
        trace = pd.DataFrame({'n': range(segment.steps_completed + 1), 'x': segment.x_trace, 'y': segment.y_trace})
        return result, 'ok', {'trace': trace}

    def run_rho_k(self, params: Box) -> OperationResult:
        estimate = rho_K(self.lifted_map, region_from_config(params.region), int(params.m), int(params.N),
                         self._plan(params), self._merge_epsilon(params), dilation=int(params.get('dilation', 0)),
                         threads=self.threads)
        result = {'estimate': estimate.to_dict(), 'classification': classify_annulus(estimate)}
        tables = {'convergence': estimate.convergence} if estimate.convergence is not None else {}
        return result, 'ok', tables

    def run_rho_loc(self, params: Box) -> OperationResult:
        schedule_keys = ('initial_level', 'shrink', 'depth', 'inner_depth', 'log_base')
        schedule = RadiiSchedule(**{k: params.schedule[k] for k in schedule_keys if k in params.schedule})
        end = str(params.get('end', 'N'))
        variant = str(params.get('variant', 'nested'))
        problem = check_allowed_values(variant, list(self.config_format.local_variants))
        if problem:
            raise ConfigSchemaError('params.variant', problem)

        m, N = int(params.m), int(params.N)
        kwargs = {'plan': self._plan(params), 'merge_epsilon': self._merge_epsilon(params), 'threads': self.threads}
        if variant == 'naive':
            local = rho_local_naive(self.lifted_map, schedule, m, N, end, **kwargs)
        elif variant == 'at-end':
            local = rho_local_at_end(self.lifted_map, end, schedule, m, N, **kwargs)
        else:
            local = rho_local(self.lifted_map, schedule, m, N, end, **kwargs)

        result = local.to_dict()
        result['variant'] = variant
        result['schedule'] = schedule.to_dict()
        if 'intersection_levels' in params:
            result['intersection_property'] = intersection_property_check(
                self.lifted_map, [float(v) for v in params.intersection_levels],
                float(params.get('intersection_resolution', 1e-3)))
        return result, 'ok', {'convergence': local.table}

    def run_rho_ann(self, params: Box) -> OperationResult:
        w = params.windows
        windows = AnnulusWindows(float(w.center), float(w.half_width), int(w.get('count', 4)))
        estimate = rho_ann(self.lifted_map, windows, int(params.m), int(params.N), self._plan(params),
                           int(params.get('nx', 64)), int(params.get('ny', 64)), self._merge_epsilon(params),
                           threads=self.threads)
        result: Dict[str, Any] = {'estimate': estimate.to_dict(), 'windows': windows.bands()}
        if 'escape_check' in params:
            check = params.escape_check
            band = GridRegion.band(windows.center - windows.half_width, windows.center + windows.half_width,
                                   int(check.nx), int(check.ny))
            survivors = theta_escape_time(self.lifted_map, band, int(check.horizon))
            result['escape_check'] = {'horizon': int(check.horizon), 'grid': [band.nx, band.ny],
                                      'cells': survivors.count}
        tables = {'convergence': estimate.convergence} if estimate.convergence is not None else {}
        return result, 'ok', tables

    def run_rho_mes(self, params: Box) -> OperationResult:
        K = region_from_config(params.region)
        plan = self._plan(params)
        estimate = rho_measured(self.lifted_map, K, int(params.burn_in), int(params.length), plan,
                                self._merge_epsilon(params))
        result: Dict[str, Any] = {'estimate': estimate.to_dict()}
        if 'm' in params and 'N' in params:
            orbits = rho_K(self.lifted_map, K, int(params.m), int(params.N), plan, self._merge_epsilon(params),
                           threads=self.threads)
            result['rho_K'] = orbits.to_dict()
            result['hull_distance'] = hull_distance(estimate, orbits)
        tables = {'bins': estimate.bins} if estimate.bins is not None else {}
        return result, 'ok', tables

    def run_theta(self, params: Box) -> OperationResult:
        mode = str(params.get('mode', 'two-sided'))
        problem = check_allowed_values(mode, list(self.config_format.theta_modes))
        if problem:
            raise ConfigSchemaError('params.mode', problem)
        N = int(params.N)
        nx, ny = int(params.get('nx', 256)), int(params.get('ny', 512))

        if mode != 'two-sided':
            V = EndNeighborhood(str(params.end), float(params.level), float(params.get('depth', 3.0)))
            one_sided = theta_forward if mode == 'forward' else theta_backward
            try:
                theta = one_sided(self.lifted_map, V, N, nx, ny, self.threads)
            except PreconditionError as error:
                return {'mode': mode, 'reason': str(error)}, 'refused', {}
            self.regions['theta'] = theta.region
            return ({'mode': mode, 'cells': theta.region.count, 'region': theta.region.to_dict()}, 'ok',
                    {'history': theta.history()})

        if 'region' not in params:
            raise ConfigSchemaError('params.region')
        check_region_config(params.region, self.config_format, 'params.region')
        A = region_from_config(params.region)
        theta = theta_maximal(self.lifted_map, A, N, self.threads)
        self.regions['theta'] = theta.region
        pointwise = theta_escape_time(self.lifted_map, A, N)
        # cells still present after N - 1 steps
        previous = A.with_occupancy((theta.removal_step == -1) | (theta.removal_step == N))
        components = connected_components(theta.region, int(params.get('connectivity', 4)))
        result: Dict[str, Any] = {
            'mode': mode,
            'cells': theta.region.count,
            'escaped_by_horizon': theta.escaped_by_horizon,
            'pointwise_cells': pointwise.count,
            'pointwise_subset': pointwise.issubset(theta.region),
            'sandwich': invariance_sandwich_holds(self.lifted_map, pointwise, previous),
            'components': [c.to_dict() for c in components],
            'region': theta.region.to_dict(),
        }
        status = 'ok'

        if 'rotation' in params:
            estimate = rho_K(self.lifted_map, theta.region, int(params.rotation.m), int(params.rotation.N),
                             self._plan(params.rotation, mode='cells'), self._merge_epsilon(params.rotation),
                             threads=self.threads)
            result['rotation'] = estimate.to_dict()
            result['classification'] = classify_annulus(estimate)
        if 'curves' in params:
            result['curves'] = [free_curve_classify(self.lifted_map, GraphCurve.from_config(c), A.dy).to_dict()
                                for c in params.curves]
        if 'connectedness' in params:
            try:
                report = theta_connectedness_check(self.lifted_map, GraphCurve.from_config(params.connectedness.gamma),
                                                   GraphCurve.from_config(params.connectedness.gamma_prime), N,
                                                   nx, ny, threads=self.threads)
                report.pop('theta')
                result['connectedness'] = report
            except PreconditionError as error:
                result['connectedness'] = {'reason': str(error)}
                status = 'refused'
        if 'free_horizon' in params:
            fh = params.free_horizon
            K = region_from_config(dict(fh.region, periodic=False))
            result['free_horizon'] = free_horizon(self.lifted_map, K, int(fh.N), bool(fh.get('modulo_deck', False)),
                                                  threads=self.threads).to_dict()
        tables = {'history': theta.history()}
        if 'drift' in params:
            points = [[float(v) for v in p] for p in params.drift.points]
            tables['drift'] = drift_horizon(self.lifted_map, [p[0] for p in points], [p[1] for p in points],
                                            [float(M) for M in params.drift.thresholds], int(params.drift.N))
            result['drift'] = tables['drift'].to_dict(orient='records')
        return result, status, tables

    def run_branches(self, params: Box) -> OperationResult:
        band = BandSpec(GraphCurve.from_config(params.upper), GraphCurve.from_config(params.lower),
                        int(params.get('index', 0)))
        N = int(params.N)
        nx, ny = int(params.get('nx', 120)), int(params.get('ny', 200))
        sign_choice = str(params.get('sign', 'both'))
        problem = check_allowed_values(sign_choice, list(self.config_format.branch_signs))
        if problem:
            raise ConfigSchemaError('params.sign', problem)
        signs = [UNSTABLE, STABLE] if sign_choice == 'both' else [sign_choice]

        result: Dict[str, Any] = {'band': band.to_dict(), 'limits': {}, 'branches': {}}
        tables: Dict[str, PandasDataFrame] = {}
        h2_holds = False
        if 'gamma2' in params:
            h2 = h2_check(self.lifted_map, band.upper, GraphCurve.from_config(params.gamma2), N)
            result['h2'] = h2.to_dict()
            h2_holds = h2.holds

        for sign in signs:
            limit = lambda_limit(self.lifted_map, band, N, sign, nx, ny, self.threads)
            result['limits'][sign] = {
                'cells': limit.conservative.count,
                'escape_cells': limit.escape.count,
                'crosscheck_cells': limit.crosscheck_cells,
                'nested': bool(limit.history['cells'].is_monotonic_decreasing),
                'meets_far_curve': limit.conservative.meets_curve(band.far_curve(sign), tolerance_cells=1),
                'conservative': limit.conservative.to_dict(),
                'escape': limit.escape.to_dict(),
            }
            tables[f'{sign}_history'] = limit.history
            self.regions[f'{sign}_limit'] = limit.conservative
            for n in params.get('lambda_depths') or []:
                depth = lambda_n(self.lifted_map, band, int(n), sign, nx, ny, threads=self.threads)
                result.setdefault('lambda_n', {}).setdefault(sign, []).append({'n': int(n), 'cells': depth.count})
                self.regions[f'{sign}_lambda_{int(n)}'] = depth

            if 'point' in params:
                base = CoverPoint(*(float(v) for v in params.point))
            else:
                xc, yc = limit.escape.occupied_centers()
                if xc.size == 0:
                    result['branches'][sign] = {'reason': f'{sign} set is empty at depth {N}'}
                    continue
                base = CoverPoint(float(xc[0]), float(yc[0]))
            try:
                branch = branch_of(self.lifted_map, band, base, limit, params.get('window_units'),
                                   check_diameter=h2_holds, max_window_units=params.get('max_window_units'))
                result['branches'][sign] = dict(branch.to_dict(), region=branch.region.to_dict())
                self.regions[f'{sign}_branch'] = branch.region
            except BranchError as error:
                result['branches'][sign] = {'reason': str(error)}
        return result, 'ok', tables

    def run_heteroclinic(self, params: Box) -> OperationResult:
        config = HeteroclinicConfig.from_config(params.get('experiment'))
        config.threads = self.threads
        gammas = [GraphCurve.from_config(params[name]) for name in ('gamma0', 'gamma1', 'gamma2')]
        cert = branch_intersection_experiment(self.lifted_map, *gammas, config=config)
        result = cert.to_dict()
        regions = {}
        if cert.unstable_branch is not None:
            regions['unstable_branch'] = cert.unstable_branch.region.to_dict()
            self.regions['unstable_branch'] = cert.unstable_branch.region
        if cert.stable_branch is not None:
            regions['stable_branch'] = cert.stable_branch.region.to_dict()
            self.regions['stable_branch'] = cert.stable_branch.region
        result['regions'] = regions
        if cert.status == 'certified':
            result['revalidation'] = revalidate_certificate(self.lifted_map, cert)
        return result, cert.status, {}


# Re-validation of stored records


def _walk(node: Any, path: str = '') -> List[Tuple[str, Dict[str, Any]]]:
    found: List[Tuple[str, Dict[str, Any]]] = []
    if isinstance(node, dict):
        found.append((path, node))
        for key, value in node.items():
            found += _walk(value, f'{path}.{key}' if path else str(key))
    elif isinstance(node, list):
        for i, value in enumerate(node):
            found += _walk(value, f'{path}[{i}]')
    return found


def check_record(record: Dict[str, Any]) -> List[str]:
    """
    Re-assert the inequalities stored in a record without re-running orbit sweeps: interval flags and gap
    measures of every stored estimate, pass flags of every distance/tolerance report and of every suite check
    (value against bound in its stored direction, `<=` when none is stored), and for certificates the witness
    orbit re-evaluated from the stored point.
    """
    mismatches = []
    for path, node in _walk(record):
        if {'intervals', 'is_interval', 'gap_measure', 'infinite_flags'} <= set(node):
            estimate = RotationSetEstimate.from_dict(node)
            if estimate.is_interval() != node['is_interval']:
                mismatches.append(f'{path}: is_interval stored {node["is_interval"]}')
            if abs(estimate.gap_measure() - node['gap_measure']) > 1e-12:
                mismatches.append(f'{path}: gap_measure stored {node["gap_measure"]}, '
                                  f'recomputed {estimate.gap_measure()}')
        if {'distance', 'tolerance', 'passed'} <= set(node) and node['distance'] is not None:
            if (node['distance'] <= node['tolerance']) != node['passed']:
                mismatches.append(f'{path}: passed={node["passed"]} but distance {node["distance"]} '
                                  f'vs tolerance {node["tolerance"]}')
        if {'value', 'bound', 'passed'} <= set(node):
            compare = node.get('compare', '<=')
            holds = compare_stored(node['value'], compare, node['bound']) if compare is not None else None
            if holds is not None and holds != node['passed']:
                mismatches.append(f'{path}: passed={node["passed"]} but {node["value"]} {compare} {node["bound"]} '
                                  f'is {holds}')

    if record.get('operation') == 'heteroclinic' and record.get('status') == 'certified':
        lifted_map = MapSpec.from_config(record['config']['map']).resolve()
        revalidation = revalidate_certificate(lifted_map, record['result'])
        mismatches += [f'result.witness: {m}' for m in revalidation['mismatches']]
    return mismatches


def check_results(fpath: Path) -> Dict[str, Any]:
    """Re-validate every record of a results.jsonl file."""
    records = load_records(fpath, schema=str(get_result_format().schema))
    mismatches = []
    for i, record in enumerate(records):
        mismatches += [f'record {i}: {m}' for m in check_record(record)]
    return {'source': str(fpath), 'records': len(records), 'valid': not mismatches, 'mismatches': mismatches}
