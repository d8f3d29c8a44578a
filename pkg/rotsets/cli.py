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

import argparse
from pathlib import Path
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from yaml import safe_load

from helpers.io_utils import IOUtils, load_records, to_plain
from helpers.utils import build_config, build_config_from_file, get_default_params, get_result_format

from .errors import (BranchError, ConfigSchemaError, MapEvaluationError, OrbitEscapeError, PreconditionError,
                     WindowOverflowError)
from .plotting import plot_record
from .runner import ExitCode, ExperimentRunner, canonical_operation, check_results
from .suite import SUITE_ALIASES, SUITES, run_suite, suite_exit_code

OPERATIONS = ('rho-n', 'rho-k', 'rho-loc', 'rho-ann', 'rho-mes', 'theta', 'branches', 'theorem-c')

COMMAND_ALIASES: Dict[str, List[str]] = {'theorem-c': ['heteroclinic']}

REFUSALS = (PreconditionError, OrbitEscapeError, BranchError, WindowOverflowError, MapEvaluationError)


def parse_assignment(text: str) -> Tuple[str, Any]:
    """'key=value' with the value read as YAML, so numbers, lists and mappings keep their type."""
    if '=' not in text:
        raise ConfigSchemaError(text, 'expected key=value')
    key, value = text.split('=', 1)
    return key.strip(), safe_load(value)


def parse_point(text: str) -> List[float]:
    parts = text.split(',')
    if len(parts) != 2:
        raise ConfigSchemaError('params.point', f'expected x,y, got {text!r}')
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigSchemaError('params.point', f'expected x,y, got {text!r}')


def set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split('.')
    for key in keys[:-1]:
        node = target.get(key)
        if not isinstance(node, dict):
            node = target[key] = {}
        target = node
    target[keys[-1]] = value


def _add_global_options(parser: argparse.ArgumentParser, suppress: bool = False) -> None:
    # Subcommand copies must not reset values given before the subcommand
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument('--config', type=Path, default=default, help='YAML experiment or suite config')
    parser.add_argument('--out', type=Path, default=default, help='output directory')
    parser.add_argument('--threads', type=int, default=default, help='worker count (speed only)')
    parser.add_argument('--seed', type=int, default=default, help='sampling seed')


def operation_config(operation: str, args: argparse.Namespace) -> Dict[str, Any]:
    """
    Experiment config for one operation: the --config file when given, the packaged defaults otherwise,
    with the command line flags applied on top.
    """
    defaults = get_default_params()
    if args.config is not None:
        config = to_plain(build_config_from_file(str(args.config)).to_dict())
        if canonical_operation(config.get('operation', operation)) != operation:
            raise ConfigSchemaError('operation', f'{args.config} configures {config["operation"]}, not {operation}')
        config['operation'] = operation
    else:
        config = {'operation': operation, 'map': defaults.maps[operation].to_dict(),
                  'params': defaults.params[operation].to_dict()}

    if args.map is not None and config.get('map', {}).get('family') != args.map:
        config['map'] = {'family': args.map, 'params': {}}
    map_params = config.setdefault('map', {}).setdefault('params', {})
    for assignment in args.param or []:
        set_dotted(map_params, *parse_assignment(assignment))
    if args.eps is not None:
        map_params['tilt'] = args.eps

    params = config.setdefault('params', {})
    for assignment in args.set or []:
        set_dotted(params, *parse_assignment(assignment))
    if args.horizon is not None:
        if operation not in defaults.horizon_keys:
            raise ConfigSchemaError('--horizon', f'{operation} has no horizon; use --n')
        set_dotted(params, defaults.horizon_keys[operation], args.horizon)
    if args.n is not None:
        params['n'] = args.n
    if args.point is not None:
        params['point'] = parse_point(args.point)

    if args.seed is not None:
        config['seed'] = args.seed
    if args.threads is not None:
        config['threads'] = args.threads
    if args.out is not None:
        config['path'] = {'working': {'directory_path': str(args.out.resolve())}}
    return config


def run_operation(args: argparse.Namespace) -> int:
    runner = ExperimentRunner(operation_config(canonical_operation(args.command), args))
    outcome = runner.run(fresh=args.fresh)
    print(f'Results appended to {runner.io.results_path}')
    return int(outcome.exit_code)


def run_suite_command(args: argparse.Namespace) -> int:
    report = run_suite(args.name, args.config, threads=args.threads or 1,
                       out_dir=args.out.resolve() if args.out is not None else None, seed=args.seed)
    failed = [c for c in report['checks'] if not c['passed']]
    print(f'Suite {args.name}: {len(report["checks"]) - len(failed)}/{len(report["checks"])} checks passed')
    for check in failed:
        print(f'  FAIL {check["section"]}: {check["name"]} (value {check["value"]}, bound {check["bound"]})')
    return int(suite_exit_code(report))


def run_plot(args: argparse.Namespace) -> int:
    records = [r for r in load_records(args.results, schema=str(get_result_format().schema))
               if r.get('kind') == 'run']
    if not records:
        raise ValueError(f'{args.results} holds no run records')
    if not -len(records) <= args.index < len(records):
        raise ValueError(f'record index {args.index} out of range for {len(records)} run records')
    index = args.index % len(records)
    record = records[index]
    out_dir = args.out if args.out is not None else args.results.parent / 'figures'
    for fpath in plot_record(record, out_dir, stem=f'{record["operation"]}_{index}'):
        print(fpath)
    return int(ExitCode.SUCCESS)


def run_check(args: argparse.Namespace) -> int:
    report = check_results(args.results)
    out_dir = args.out if args.out is not None else args.results.parent
    io = IOUtils(build_config({'path': {'working': {'directory_path': str(out_dir.resolve())}}}),
                 get_result_format())
    io.write_record(report, 'check', fpath=io.outputs / 'checks.jsonl')
    print(f'Checked {report["records"]} records from {report["source"]}: '
          f'{"valid" if report["valid"] else "mismatches found"}')
    for mismatch in report['mismatches']:
        print(f'  {mismatch}')
    return int(ExitCode.SUCCESS if report['valid'] else ExitCode.ASSERTION_FAILURE)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='rotsets',
                                     description='Finite-scale rotation sets of annulus and plane homeomorphisms')
    _add_global_options(parser)
    subparsers = parser.add_subparsers(dest='command', required=True)

    handlers: Dict[str, Callable[[argparse.Namespace], int]] = {}
    for operation in OPERATIONS:
        aliases = COMMAND_ALIASES.get(operation, [])
        sub = subparsers.add_parser(operation, aliases=aliases, help=f'run the {operation} operation')
        _add_global_options(sub, suppress=True)
        sub.add_argument('--map', help='map family (replaces the configured map)')
        sub.add_argument('--param', action='append', metavar='KEY=VALUE', help='map parameter, repeatable')
        sub.add_argument('--set', action='append', metavar='KEY=VALUE',
                         help='operation parameter, dotted keys allowed, repeatable')
        sub.add_argument('--horizon', type=int, help='orbit horizon N (iterates)')
        sub.add_argument('--n', type=int, help='iterate count for rho-n')
        sub.add_argument('--point', help='cover point x,y for rho-n and branches')
        sub.add_argument('--eps', type=float, help='tilt of the heteroclinic skew products')
        sub.add_argument('--fresh', action='store_true', help='start a new results.jsonl instead of appending')
        for command in [operation] + aliases:
            handlers[command] = run_operation

    sub = subparsers.add_parser('suite', help='run an acceptance suite')
    _add_global_options(sub, suppress=True)
    sub.add_argument('name', choices=sorted(SUITES) + sorted(SUITE_ALIASES))
    handlers['suite'] = run_suite_command

    sub = subparsers.add_parser('plot', help='SVG figures for a run record')
    _add_global_options(sub, suppress=True)
    sub.add_argument('results', type=Path, help='results.jsonl file')
    sub.add_argument('--index', type=int, default=-1, help='run record to plot, counted among run records')
    handlers['plot'] = run_plot

    sub = subparsers.add_parser('check', help='re-validate the inequalities stored in a results file')
    _add_global_options(sub, suppress=True)
    sub.add_argument('results', type=Path, help='results.jsonl file')
    handlers['check'] = run_check

    parser.set_defaults(handlers=handlers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handlers[args.command](args)
    except ConfigSchemaError as error:
        print(f'Schema violation: {error}', file=sys.stderr)
        return int(ExitCode.SCHEMA_VIOLATION)
    except REFUSALS as error:
        print(f'Refused: {error}', file=sys.stderr)
        return int(ExitCode.REFUSED)
    except KeyError as error:
        print(f'Schema violation: params: missing required field {error}', file=sys.stderr)
        return int(ExitCode.SCHEMA_VIOLATION)
    except (ValueError, OSError) as error:
        print(f'Invalid input: {error}', file=sys.stderr)
        return int(ExitCode.SCHEMA_VIOLATION)
