"""
Command-line entry point: python -m app.cli <subcommand> ...

Every run logs its fully-resolved arguments at INFO on stderr. Exit codes:
0 success, 1 invalid input, 2 a failing `verify` check.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from app.config import configure_logging, get_settings
from app.errors import RSPError
from app.schemas import ExperimentConfig
from app.services.asymptotics import (
    AppendixOracleInput,
    appendix_limit_estimate,
    appendix_limit_partial,
    appendix_limit_value,
    closed_form,
    covariance_report,
)
from app.services.dynamics import ForcingVariant, ReinforcementSchedule, enumerate_exact, project, simulate
from app.services.harness import verify
from app.services.inference import confidence_interval, topology_test
from app.services.network import GENERATORS, WeightedNetwork, load_network, network_from_spec
from app.services.spectral import classify_regime, decompose

logger = logging.getLogger('app.cli')

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2


class UsageError(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 and no abbreviated flags"""

    def __init__(self, *args, **kwargs):
        kwargs.setdefault('allow_abbrev', False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def uint64(text: str) -> int:
    value = int(text, 10)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def add_network_args(parser: argparse.ArgumentParser, prefix: str = '') -> None:
    group = parser.add_argument_group(f"{prefix or 'network'}")
    group.add_argument(f"--{prefix}gen", choices=GENERATORS, help="network generator")
    group.add_argument(f"--{prefix}n", type=int, help="number of vertices for the generator")
    group.add_argument(f"--{prefix}alpha", type=float, default=1.0, help="mean-field coupling alpha in (0, 1]")
    group.add_argument(f"--{prefix}p", type=float, help="special-vertex weight p in (0, 1)")
    group.add_argument(f"--{prefix}network", type=Path, help="JSON network document {n, weights} (overrides --gen)")


def add_schedule_args(parser: argparse.ArgumentParser, with_offset: bool = False) -> None:
    parser.add_argument('--gamma', type=float, required=True, help="schedule exponent gamma in (1/2, 1]")
    parser.add_argument('--c', type=float, default=1.0, help="schedule constant c > 0")
    if with_offset:
        parser.add_argument('--offset', type=float, help="schedule offset n0 (default max(1, ceil(c^(1/gamma)) + 1))")


def add_output_args(parser: argparse.ArgumentParser, formats=('json',)) -> None:
    parser.add_argument('--output', '-o', type=Path, help="output file (default stdout)")
    if len(formats) > 1:
        parser.add_argument('--format', choices=formats, default=formats[0], help="output format")


def resolve_network(args, prefix: str = '') -> WeightedNetwork:
    path = getattr(args, f"{prefix}network")
    if path is not None:
        return load_network(path)
    kind = getattr(args, f"{prefix}gen")
    if kind is None:
        raise UsageError(f"one of --{prefix}gen or --{prefix}network is required")
    return network_from_spec(
        kind, n=getattr(args, f"{prefix}n"), alpha=getattr(args, f"{prefix}alpha"), p=getattr(args, f"{prefix}p"),
    )


def emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
        if not text.endswith('\n'):
            sys.stdout.write('\n')
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    with open(output, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    logger.info("Wrote %s", output)


def dump(document) -> str:
    return json.dumps(document, indent=2)


def state_vector(values: List[float], n_vertices: int) -> np.ndarray:
    z = np.asarray(values, dtype=float)
    return np.full(n_vertices, z[0]) if z.size == 1 else z


# Subcommands


def cmd_spectrum(args) -> int:
    spec = decompose(resolve_network(args))
    emit(dump(spec.to_dict()), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.config is not None:
        config = ExperimentConfig.from_file(args.config)
        net, sched = config.network.build(), config.schedule.build()
        variant = config.forcing.build() if config.forcing is not None else None
        z0, horizon = config.initial_state(net.n_vertices), config.horizon
        seed = config.seed if args.seed is None else args.seed
    else:
        if args.gamma is None or args.horizon is None:
            raise UsageError("--gamma and --horizon are required without --config")
        net = resolve_network(args)
        sched = ReinforcementSchedule(gamma=args.gamma, c=args.c, offset=args.offset)
        variant = ForcingVariant(rho=args.rho, q=args.q) if args.q is not None else None
        z0, horizon = state_vector(args.z0, net.n_vertices), args.horizon
        seed = 0 if args.seed is None else args.seed

    trajectory = simulate(net, sched, z0, horizon, stride=args.stride, variant=variant,
                          seed=seed, replication=args.replication)
    if args.format == 'csv':
        emit(trajectory.to_csv(), args.output)
    else:
        spec = decompose(net) if net.irreducible else None
        emit(dump(trajectory.summary(spec)), args.output)
    return EXIT_OK


def cmd_covariance(args) -> int:
    net = resolve_network(args)
    spec = decompose(net)
    regime = classify_regime(spec, args.gamma, args.c, args.tol)
    if args.closed_form:
        if args.gen is None:
            raise UsageError("--closed-form needs --gen")
        report = closed_form(args.gen, regime, net.n_vertices, alpha=args.alpha, p=args.p)
    else:
        report = covariance_report(spec, regime)
    emit(dump(report.to_dict()), args.output)
    return EXIT_OK


def _z_tilde(args, net: WeightedNetwork, spec) -> float:
    if args.z_tilde is not None:
        return args.z_tilde
    if args.state is None:
        raise UsageError("one of --z-tilde or --state is required")
    return project(spec, state_vector(args.state, net.n_vertices))[0]


def cmd_ci(args) -> int:
    net = resolve_network(args)
    spec = decompose(net)
    interval = confidence_interval(_z_tilde(args, net, spec), args.step, args.gamma, args.c, spec, args.level)
    emit(dump(interval.to_dict()), args.output)
    return EXIT_OK


def cmd_test(args) -> int:
    net = resolve_network(args)
    result = topology_test(state_vector(args.state, net.n_vertices), args.step, net, args.gamma, args.c,
                           args.level, args.tol)
    emit(dump(result.to_dict()), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config = config.model_copy(update={'seed': args.seed})
    logger.info("Experiment config: %s", config.model_dump_json())
    output_dir = args.output_dir or get_settings().output_dir
    summary = verify(config, output_dir)
    for check in summary.checks:
        sys.stdout.write(f"{'✓' if check.passed else '✗'} {check.name}\n")
    return EXIT_OK if summary.passed else EXIT_CHECK_FAILED


def cmd_oracle_enumerate(args) -> int:
    net = resolve_network(args)
    sched = ReinforcementSchedule(gamma=args.gamma, c=args.c, offset=args.offset)
    variant = ForcingVariant(rho=args.rho, q=args.q) if args.q is not None else None
    exact = enumerate_exact(net, sched, state_vector(args.z0, net.n_vertices), args.n_max, variant)
    document = {
        'n': exact.n,
        'atoms': exact.atoms(),
        'mean': exact.mean().tolist(),
    }
    if net.irreducible and variant is None:
        document['expected_z_tilde'] = exact.expected_z_tilde(decompose(net))
    emit(dump(document), args.output)
    return EXIT_OK


def cmd_oracle_appendix(args) -> int:
    inp = AppendixOracleInput(args.alpha1, args.alpha2, args.gamma, args.c, args.n, args.m0)
    partial = appendix_limit_partial(inp)
    limit = appendix_limit_value(inp)
    document = {
        'n': inp.n,
        'm0': inp.m0,
        'log_normalized': inp.log_normalized,
        'partial': {'re': partial.real, 'im': partial.imag},
        'limit': {'re': limit.real, 'im': limit.imag},
    }
    if args.extrapolate:
        estimate = appendix_limit_estimate(inp, args.n_ratio)
        document['estimate'] = {'re': estimate.real, 'im': estimate.imag}
    emit(dump(document), args.output)
    return EXIT_OK


def build_parser() -> CliParser:
    formatter = argparse.ArgumentDefaultsHelpFormatter
    parser = CliParser(prog='rsp', description="Interacting reinforced stochastic processes on networks",
                       formatter_class=formatter)
    parser.add_argument('--log-level', help="override RSP_LOG_LEVEL")
    commands = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    p = commands.add_parser('spectrum', help="biorthogonal eigen-decomposition of W", formatter_class=formatter)
    add_network_args(p)
    add_output_args(p)
    p.set_defaults(func=cmd_spectrum)

    p = commands.add_parser('simulate', help="one trajectory as CSV or a JSON summary", formatter_class=formatter)
    p.add_argument('--config', type=Path, help="experiment config JSON (network, schedule, z0, horizon, seed)")
    add_network_args(p)
    p.add_argument('--gamma', type=float, help="schedule exponent gamma in (1/2, 1]")
    p.add_argument('--c', type=float, default=1.0, help="schedule constant c > 0")
    p.add_argument('--offset', type=float, help="schedule offset n0 (default max(1, ceil(c^(1/gamma)) + 1))")
    p.add_argument('--z0', type=float_list, default=[0.5], help="initial state, one value or N comma-separated")
    p.add_argument('--horizon', type=int, help="number of steps")
    p.add_argument('--stride', type=int, help="record every stride-th step (default powers of two)")
    p.add_argument('--rho', type=float, default=0.5, help="forcing weight rho in [0, 1)")
    p.add_argument('--q', type=float, help="forcing target q in [0, 1] (enables forcing)")
    p.add_argument('--seed', type=uint64, help="master seed (decimal uint64)")
    p.add_argument('--replication', type=int, default=0, help="replication index of the stream")
    add_output_args(p, formats=('csv', 'json'))
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser('covariance', help="asymptotic covariance report", formatter_class=formatter)
    add_network_args(p)
    add_schedule_args(p)
    p.add_argument('--tol', type=float, default=1e-9, help="regime tolerance on Re(lambda*)")
    p.add_argument('--closed-form', action='store_true', help="use the family's closed form (needs --gen)")
    add_output_args(p)
    p.set_defaults(func=cmd_covariance)

    p = commands.add_parser('ci', help="confidence interval for Z_inf", formatter_class=formatter)
    add_network_args(p)
    add_schedule_args(p)
    p.add_argument('--z-tilde', type=float, help="observed Z~_n")
    p.add_argument('--state', type=float_list, help="observed Z_n, N comma-separated values")
    p.add_argument('--step', type=int, required=True, help="time n of the observation")
    p.add_argument('--level', type=float, default=0.95, help="confidence level")
    add_output_args(p)
    p.set_defaults(func=cmd_ci)

    p = commands.add_parser('test', help="chi-square test of a hypothesized W", formatter_class=formatter)
    add_network_args(p)
    add_schedule_args(p)
    p.add_argument('--state', type=float_list, required=True, help="observed Z_n, N comma-separated values")
    p.add_argument('--step', type=int, required=True, help="time n of the observation")
    p.add_argument('--level', type=float, default=0.95, help="1 - size of the test")
    p.add_argument('--tol', type=float, default=1e-9, help="regime tolerance on Re(lambda*)")
    add_output_args(p)
    p.set_defaults(func=cmd_test)

    p = commands.add_parser('verify', help="run an experiment config and its checks", formatter_class=formatter)
    p.add_argument('--config', type=Path, required=True, help="experiment config JSON")
    p.add_argument('--seed', type=uint64, help="override the config's master seed")
    p.add_argument('--output-dir', type=Path, help="report directory (default RSP_OUTPUT_DIR)")
    p.set_defaults(func=cmd_verify)

    p = commands.add_parser('oracle', help="exact reference computations", formatter_class=formatter)
    oracles = p.add_subparsers(dest='oracle', required=True, parser_class=CliParser)

    q = oracles.add_parser('enumerate', help="exact law of Z_n by enumeration", formatter_class=formatter)
    add_network_args(q)
    add_schedule_args(q, with_offset=True)
    q.add_argument('--z0', type=float_list, default=[0.5], help="initial state, one value or N comma-separated")
    q.add_argument('--n-max', type=int, required=True, help="number of steps (N * n-max <= 24)")
    q.add_argument('--rho', type=float, default=0.5, help="forcing weight rho in [0, 1)")
    q.add_argument('--q', type=float, help="forcing target q in [0, 1] (enables forcing)")
    add_output_args(q)
    q.set_defaults(func=cmd_oracle_enumerate)

    q = oracles.add_parser('appendix', help="normalized truncated product-sums", formatter_class=formatter)
    q.add_argument('--alpha1', type=complex, required=True, help="first rate, complex allowed (e.g. 0.5+0.3j)")
    q.add_argument('--alpha2', type=complex, required=True, help="second rate, complex allowed")
    add_schedule_args(q)
    q.add_argument('--n', type=int, default=10 ** 6, help="truncation index")
    q.add_argument('--m0', type=int, help="first index of the products (default smallest admissible)")
    q.add_argument('--extrapolate', action='store_true', help="also report the bias-corrected estimate")
    q.add_argument('--n-ratio', type=int, default=10, help="ratio between the two extrapolation points")
    add_output_args(q)
    q.set_defaults(func=cmd_oracle_appendix)

    return parser


def _resolved(args) -> dict:
    return {key: str(value) if isinstance(value, (Path, complex)) else value
            for key, value in vars(args).items() if key != 'func'}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    logger.info("Resolved arguments: %s", json.dumps(_resolved(args), default=str))
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"rsp {args.command}: error: {e}\n")
        return EXIT_INVALID
    except (RSPError, ValidationError) as e:
        sys.stderr.write(f"rsp {args.command}: {type(e).__name__}: {e}\n")
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError) as e:
        sys.stderr.write(f"rsp {args.command}: cannot read input: {e}\n")
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
