"""Command-line harness: ``hbfw run``, ``hbfw compare`` and ``hbfw selfcheck``."""

import argparse
import csv
import math
import sys

import numpy as np

from . import checks
from .exceptions import BoundViolation, InvalidInputError, NumericFailure, ParseError
from .geometry import make_region
from .io import TRACE_HEADER, load_config, load_ratings, parse_libsvm, trace_rows, write_trace
from .objectives import LogisticProblem
from .restart import restart_bound, run_restart
from .solver import ConstantDelta, gap_bound, make_policy, momentum_error, run_fw, run_hfw
from .synthetic import make_logistic, make_matrix_completion, make_quadratic

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_BOUND = 3
BOUND_TOL = 1e-9


def build_problem(cfg):
    if cfg.problem == "quadratic":
        if cfg.dataset:
            raise InvalidInputError("the quadratic problem is synthetic only")
        return make_quadratic(cfg.n_features, cfg.target_norm * cfg.radius, seed=cfg.seed)
    if cfg.problem == "logistic":
        if cfg.dataset:
            ds = parse_libsvm(cfg.dataset)
            return LogisticProblem(ds.X, ds.y)
        return make_logistic(cfg.n_samples, cfg.n_features, seed=cfg.seed)
    if cfg.dataset:
        return load_ratings(cfg.dataset)
    return make_matrix_completion(cfg.rows, cfg.cols, cfg.observed_fraction, seed=cfg.seed)


def build_region(cfg, problem):
    extra = {"seed": cfg.seed} if cfg.constraint == "nuclear" else {}
    return make_region(cfg.constraint, cfg.radius, problem.shape, n=cfg.n, **extra)


def build_policy(cfg):
    params = {}
    if cfg.policy == "constant-delta":
        params = dict(delta_value=cfg.delta, c=cfg.c, k0=cfg.k0)
    elif cfg.policy == "joint-descent":
        params = dict(grid_size=cfg.grid_size)
    return make_policy(cfg.policy, **params)


def initial_point(cfg, problem, region):
    x0 = np.zeros(region.shape)
    if cfg.init == "lmo":
        x0 = region.lmo(problem.gradient(x0))
    return x0


def momentum_constant(delta, c, k0):
    """Smallest ``c0`` with ``c^2 <= [1 - (1 - delta)(k0 + 1)^2 / k0^2] delta c0^2``."""
    if k0 <= 0:
        return None
    bracket = 1.0 - (1.0 - delta) * (k0 + 1.0) ** 2 / k0**2
    if bracket <= 0:
        return None
    return c / math.sqrt(bracket * delta)


def execute(cfg, check_bounds=False):
    """Run one configured experiment and return its result object.

    With `check_bounds`, every row is checked against the applicable
    certified bound and :class:`BoundViolation` is raised at the first
    failure.
    """
    problem = build_problem(cfg)
    region = build_region(cfg, problem)
    x0 = initial_point(cfg, problem, region)
    L, D = problem.global_lipschitz(), region.diameter()
    common = dict(epsilon=cfg.epsilon, x0=x0, timed=cfg.record_time)
    extras = {"lipschitz": L, "diameter": D}

    if cfg.algorithm == "fw":
        result = run_fw(problem, region, build_policy(cfg), max_iter=cfg.max_iter, **common)
    elif cfg.algorithm == "restart":
        mode = "delta-matched" if cfg.policy == "open-loop-2" else cfg.policy
        result = run_restart(problem, region, mode, max_total_iter=cfg.max_iter, **common)
    else:
        policy = build_policy(cfg)
        momentum = []
        prev = {}

        def watch(state):
            if "grad" in prev:
                momentum.append(momentum_error(state, prev["grad"]))
            prev["grad"] = state.grad_x

        result = run_hfw(problem, region, policy, max_iter=cfg.max_iter,
                         emit_vanilla_gap=cfg.emit_vanilla_gap, callback=watch, **common)
        extras["momentum_error"] = momentum
        extras["policy"] = policy
    result.extras.update(extras)
    if check_bounds:
        check_result_bounds(cfg, result)
    return result


def check_result_bounds(cfg, result):
    """Raise :class:`BoundViolation` at the first row breaking its bound."""
    L, D = result.extras["lipschitz"], result.extras["diameter"]
    for row, rec in enumerate(result.trace):
        if rec.gap_gen < -BOUND_TOL:
            raise BoundViolation(f"row {row}: negative gap {rec.gap_gen!r}", row)
    if cfg.algorithm == "restart":
        for row, (rec, (s, k, C_s)) in enumerate(zip(result.trace, result.steps)):
            bound = restart_bound(s, k, C_s, L, D)
            if bound is not None and rec.gap_gen > bound + BOUND_TOL:
                raise BoundViolation(
                    f"row {row}: stage {s} gap {rec.gap_gen!r} exceeds {bound!r}", row)
        for prev, st in zip(result.stages, result.stages[1:]):
            if st.C < prev.C + prev.K - 1e-6:
                raise BoundViolation(f"stage {st.s}: offset {st.C!r} below C + K", st.start_row)
        return
    if cfg.algorithm != "hfw":
        return
    policy = result.extras["policy"]
    for row, rec in enumerate(result.trace):
        bound = gap_bound(policy, rec.k, L, D)
        if bound is not None and rec.gap_gen > bound + BOUND_TOL:
            raise BoundViolation(f"row {row}: gap {rec.gap_gen!r} exceeds {bound!r}", row)
    if isinstance(policy, ConstantDelta):
        c0 = momentum_constant(policy.delta_value, policy.c, policy.k0)
        if c0 is None:
            return
        for k, err in enumerate(result.extras["momentum_error"]):
            bound = (c0 * L * D / (k + policy.k0)) ** 2
            if err**2 > bound + BOUND_TOL:
                raise BoundViolation(
                    f"row {k + 1}: momentum error {err**2!r} exceeds {bound!r}", k + 1)


def summarize(cfg, result, out=None):
    out = sys.stdout if out is None else out
    last = result.trace[-1]
    print(f"label        {cfg.display_label()}", file=out)
    print(f"rows         {len(result.trace)}", file=out)
    print(f"final f      {last.f:.10g}", file=out)
    print(f"final gap    {last.gap_gen:.6g}", file=out)
    if last.gap_vanilla is not None:
        print(f"vanilla gap  {last.gap_vanilla:.6g}", file=out)
    print(f"converged    {result.converged}", file=out)
    if cfg.algorithm == "restart":
        print("stages       s  K  C^s  final_gap", file=out)
        for st in result.stages:
            print(f"             {st.s} {st.K} {st.C:.6g} {st.gap_gen:.6g}", file=out)


def certified_lower_bound(results):
    """Largest certified lower bound on ``f*`` over all rows of all runs."""
    best = -np.inf
    for result in results:
        for rec in result.trace:
            best = max(best, rec.f - rec.gap_gen)
            if rec.gap_vanilla is not None:
                best = max(best, rec.f - rec.gap_vanilla)
    return best


def merge_traces(labels, results):
    """Wide table keyed by k: every trace column, prefixed by its label.

    Each group also gets ``<label>.primal_error`` measured against the
    shared certified lower bound.
    """
    f_low = certified_lower_bound(results)
    columns = [c for c in TRACE_HEADER if c != "k"]
    header = ["k"]
    for label in labels:
        header += [f"{label}.{c}" for c in columns] + [f"{label}.primal_error"]
    n_rows = max(len(r.trace) for r in results)
    rows = []
    formatted = [list(trace_rows(r.trace)) for r in results]
    for i in range(n_rows):
        row = [str(i)]
        for result, fmt in zip(results, formatted):
            if i < len(fmt):
                row += fmt[i][1:] + [format(result.trace[i].f - f_low, ".17g")]
            else:
                row += [""] * (len(columns) + 1)
        rows.append(row)
    return header, rows, f_low


def _unique_labels(configs):
    labels, seen = [], {}
    for cfg in configs:
        base = cfg.display_label()
        seen[base] = seen.get(base, 0) + 1
        labels.append(base if seen[base] == 1 else f"{base}-{seen[base]}")
    return labels


def cmd_run(args):
    cfg = _config(args, args.config)
    result = execute(cfg, check_bounds=args.check_bounds)
    path = args.out or cfg.trace
    if path:
        write_trace(path, result.trace)
    summarize(cfg, result)
    return EXIT_OK


def cmd_compare(args):
    if not args.config:
        raise InvalidInputError("compare needs at least one --config")
    configs = [_config(args, path) for path in args.config]
    keys = {cfg.problem_key() for cfg in configs}
    if len(keys) > 1:
        raise InvalidInputError("compared configs must share problem and region")
    labels = _unique_labels(configs)
    results = [execute(cfg, check_bounds=args.check_bounds) for cfg in configs]
    header, rows, f_low = merge_traces(labels, results)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    print(f"certified lower bound on f*: {f_low:.10g}")
    print(f"{'label':<28} {'rows':>6} {'final f':>16} {'primal error':>14} {'gap':>12}")
    for label, result in zip(labels, results):
        last = result.trace[-1]
        print(f"{label:<28} {len(result.trace):>6} {last.f:>16.10g} "
              f"{last.f - f_low:>14.6g} {last.gap_gen:>12.6g}")
    return EXIT_OK


def cmd_selfcheck(args):
    results = checks.selfcheck(seed=args.seed or 0, fault=args.inject_fault)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


def _config(args, path):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(path, overrides)


def build_arg_parser():
    parser = argparse.ArgumentParser(
        prog="hbfw", description="Heavy-ball Frank-Wolfe experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi_config=False):
        if multi_config:
            p.add_argument("--config", action="append", metavar="PATH",
                           help="config file (repeat once per algorithm)")
        else:
            p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="random seed for synthetic data")
        p.add_argument("--out", metavar="PATH", help="output CSV path")
        p.add_argument("--check-bounds", action="store_true",
                       help="assert the certified bound on every trace row")

    p_run = sub.add_parser("run", help="run one configured experiment")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several configs and merge their traces")
    common(p_cmp, multi_config=True)
    p_cmp.set_defaults(func=cmd_compare)

    p_self = sub.add_parser("selfcheck", help="run built-in consistency checks")
    p_self.add_argument("--seed", type=int)
    p_self.add_argument("--inject-fault", choices=["lmo"], help=argparse.SUPPRESS)
    p_self.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None):
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, ParseError) as exc:
        print(f"hbfw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BoundViolation as exc:
        print(f"hbfw: bound violated: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (NumericFailure, OSError) as exc:
        print(f"hbfw: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
