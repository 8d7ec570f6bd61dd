"""Command line front end: ``ccp-exact {solve,count,simulate,compare,bench}``.

Exit codes: 0 success, 2 usage, 3 invalid input, 4 state cap exceeded,
5 anything else.  JSON goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import counting, montecarlo
from .errors import CCPError, Overflow, ValidationError
from .model import Problem, group_decompose, parse_probabilities, read_probabilities, validate_problem
from .solver import DEFAULT_STATE_CAP, choose_engine, solve

SCHEMA = "ccp-exact/1"
DEFAULT_SEED = 0xC0FFEE
DEFAULT_ITERATIONS = 100_000
#: desk-scale sweep used by ``bench`` when neither --sweep nor --n is given
DEFAULT_SWEEP = (50, 100, 150, 200, 250, 300)
BENCH_COLUMNS = ("n", "k", "t", "engine", "states", "edges", "expectation", "variance", "wall_time_s")
MC_COLUMNS = ("mc_iters", "mc_mean", "mc_rel_error", "mc_time_s")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    n: int | None
    k: int | None
    t: int | None
    dist_spec: str | list[float]
    renormalize: bool
    engine: str
    iterations: int
    seed: int
    output: str
    sweep: list[int] | None
    mc_iters: list[int]
    reps: int
    state_cap: int


# -- serialization ------------------------------------------------------------


def format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def to_json(obj) -> str:
    """Compact JSON with every float written to 17 significant digits."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format_float(v).replace("null", "")
    return str(v)


# -- argument parsing ---------------------------------------------------------


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok, 0) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--n", type=_int, help="number of coupon types")
    common.add_argument("--k", type=_int, help="how many coupon types must be completed (default n)")
    common.add_argument("--t", type=_int, help="copies needed per coupon type")
    dist = common.add_mutually_exclusive_group()
    dist.add_argument("--uniform", action="store_true", help="equally likely coupons")
    dist.add_argument("--probs", help="probability file (JSON array or whitespace separated) "
                                      "or an inline comma-separated list")
    common.add_argument("--renormalize", action="store_true",
                        help="rescale probabilities whose sum is within 1e-3 of 1")
    common.add_argument("--engine", default="auto", choices=("auto", "ba", "uda", "dpsa"),
                        type=str.lower)
    common.add_argument("--iterations", type=_int, default=DEFAULT_ITERATIONS)
    common.add_argument("--seed", type=_int, default=DEFAULT_SEED)
    common.add_argument("--output", choices=("json", "csv"), default=None)
    common.add_argument("--sweep", type=_int_list, help="comma-separated n values (bench)")
    common.add_argument("--mc-iters", type=_int_list, default=[],
                        help="comma-separated Monte Carlo iteration counts (bench)")
    common.add_argument("--reps", type=_int, default=3, help="timing repetitions (bench)")
    common.add_argument("--state-cap", type=_int, default=DEFAULT_STATE_CAP)

    parser = _Parser(prog="ccp-exact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="exact mean and variance")
    sub.add_parser("count", parents=[common], help="chain sizes per engine")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate")
    sub.add_parser("compare", parents=[common], help="exact result against simulation")
    sub.add_parser("bench", parents=[common], help="timing sweep as CSV")
    return parser


def _dist_spec(args) -> str | list[float]:
    if args.uniform:
        return "uniform"
    if args.probs is None:
        return "unspecified"
    path = Path(args.probs)
    try:
        if path.is_file():
            return read_probabilities(path)
        return parse_probabilities(args.probs)
    except (ValueError, OSError) as exc:
        raise ValidationError(f"cannot read probabilities from {args.probs!r}: {exc}") from None


def parse_args(argv: Sequence[str] | None = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    spec = _dist_spec(args)
    cmd = args.subcommand
    if cmd != "bench":
        if args.n is None and isinstance(spec, list):
            args.n = len(spec)
        if args.n is None or args.t is None:
            raise UsageError(f"{cmd} needs --n and --t")
        if spec == "unspecified":
            raise UsageError(f"{cmd} needs --uniform or --probs")
    else:
        if args.sweep is not None and args.n is not None:
            raise UsageError("bench takes either --sweep or --n, not both")
        if spec == "unspecified":
            spec = "uniform"
        if args.sweep is not None or args.n is None:
            if spec != "uniform":
                raise UsageError("a bench sweep needs --uniform")
    sweep = args.sweep
    if sweep is not None:
        if not sweep or any(b <= a for a, b in zip(sweep, sweep[1:])) or sweep[0] < 1:
            raise ValidationError(f"--sweep must be positive and strictly increasing, got {sweep}")
    for name in ("iterations", "reps", "state_cap"):
        if getattr(args, name) < 1:
            raise ValidationError(f"--{name.replace('_', '-')} must be >= 1")
    if any(m < 1 for m in args.mc_iters):
        raise ValidationError("--mc-iters values must be >= 1")
    output = args.output or ("csv" if cmd == "bench" else "json")
    return RunConfig(
        subcommand=cmd, n=args.n, k=args.k, t=args.t, dist_spec=spec,
        renormalize=args.renormalize, engine=args.engine, iterations=args.iterations,
        seed=args.seed, output=output, sweep=sweep, mc_iters=args.mc_iters,
        reps=args.reps, state_cap=args.state_cap,
    )


def make_problem(config: RunConfig, n: int | None = None) -> Problem:
    n = config.n if n is None else n
    k = n if config.k is None else config.k
    return validate_problem(n, k, config.t, config.dist_spec, renormalize=config.renormalize)


# -- commands -----------------------------------------------------------------


def _problem_dict(problem: Problem) -> dict:
    return {
        "n": problem.n,
        "k": problem.k,
        "t": problem.t,
        "distribution": "uniform" if problem.dist.probs is None else list(problem.dist.probs),
    }


def _emit(config: RunConfig, payload: dict, out) -> None:
    if config.output == "json":
        out.write(to_json({"schema": SCHEMA, "command": config.subcommand, **payload}) + "\n")
        return
    flat = {}
    for key, value in payload.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                if not isinstance(v, (dict, list)):
                    flat[f"{key}.{sub}"] = v
        elif not isinstance(value, list):
            flat[key] = value
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(flat.keys())
    writer.writerow(_csv_cell(v) for v in flat.values())


def cmd_solve(config: RunConfig, out) -> None:
    problem = make_problem(config)
    result = solve(problem, config.engine, state_cap=config.state_cap)
    _emit(config, {**result.as_dict(), "problem": _problem_dict(problem)}, out)


def _measured(problem: Problem, engine: str, state_cap: int) -> dict:
    r = solve(problem, engine, state_cap=state_cap)
    return {"vertices": r.states_expanded, "edges": r.edges_traversed, "source": "measured"}


def cmd_count(config: RunConfig, out) -> None:
    problem = make_problem(config)
    n, k, t = problem.n, problem.k, problem.t
    decomposition = group_decompose(problem.dist)

    def closed(size):
        return {**size.as_dict(), "source": "closed-form"}

    uda = closed(counting.count_uda(n, k, t)) if problem.dist.is_uniform else None
    if decomposition.G == 1:
        dpsa = closed(counting.count_uda(n, k, t))
    elif k == n:
        dpsa = closed(counting.count_dpsa(decomposition, t))
    else:
        # no closed form for k < n: walk the chain and report what was seen
        dpsa = _measured(problem, "DPSA", config.state_cap)
    vb, eb = counting.dpsa_bounds(n, decomposition.G, t)
    payload = {
        "ba": closed(counting.count_ba(n, k, t)),
        "uda": uda,
        "dpsa": dpsa,
        "dpsa_bounds": {"groups": decomposition.G, "vertices": vb, "edges": eb},
        "problem": _problem_dict(problem),
    }
    _emit(config, payload, out)


def cmd_simulate(config: RunConfig, out) -> None:
    problem = make_problem(config)
    sim = montecarlo.simulate(problem, config.iterations, config.seed)
    _emit(config, {**sim.as_dict(), "problem": _problem_dict(problem)}, out)


def cmd_compare(config: RunConfig, out) -> None:
    problem = make_problem(config)
    report = montecarlo.compare(problem, config.engine, config.iterations, config.seed,
                                state_cap=config.state_cap)
    _emit(config, {**report.as_dict(), "problem": _problem_dict(problem)}, out)


def bench_rows(config: RunConfig):
    """Yield one CSV row per sweep point, then one per Monte Carlo iteration count."""
    from .dense import warm_up

    if config.t is None:
        raise UsageError("bench needs --t")
    warm_up()
    points = config.sweep or ([config.n] if config.n is not None else list(DEFAULT_SWEEP))
    for n in points:
        problem = make_problem(config, n)
        times, result = [], None
        for _ in range(config.reps):
            result = solve(problem, config.engine, state_cap=config.state_cap)
            times.append(result.wall_time)
        base = [n, problem.k, problem.t, result.engine, result.states_expanded,
                result.edges_traversed, result.expectation, result.variance,
                statistics.median(times)]
        yield base + [None] * len(MC_COLUMNS) if config.mc_iters else base
        for iters in config.mc_iters:
            sim = montecarlo.simulate(problem, iters, config.seed)
            rel = abs(sim.mean - result.expectation) / result.expectation
            yield base + [iters, sim.mean, rel, sim.wall_time]


def cmd_bench(config: RunConfig, out) -> None:
    if config.output != "csv":
        raise UsageError("bench writes CSV only")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS + (MC_COLUMNS if config.mc_iters else ()))
    for row in bench_rows(config):
        writer.writerow(_csv_cell(v) for v in row)
        out.flush()


COMMANDS = {
    "solve": cmd_solve,
    "count": cmd_count,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "bench": cmd_bench,
}


def _error_payload(exc: BaseException, config: RunConfig | None) -> dict:
    payload = {"schema": SCHEMA, "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, Overflow):
        predicted = None
        if config is not None:
            try:
                problem = make_problem(config)
                engine = (choose_engine(problem) if config.engine == "auto"
                          else config.engine.upper())
                predicted = counting.predicted_states(problem, engine)
            except Exception:  # the prediction is best effort
                predicted = None
        payload["predicted_states"] = predicted
        payload["state_cap"] = exc.cap
    return payload


def run(config: RunConfig, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        COMMANDS[config.subcommand](config, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except CCPError as exc:
        print(f"ccp-exact: {type(exc).__name__}: {exc}", file=sys.stderr)
        out.write(to_json(_error_payload(exc, config)) + "\n")
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-error exit code
        print(f"ccp-exact: internal error: {exc!r}", file=sys.stderr)
        out.write(to_json({"schema": SCHEMA, "error": "InternalError", "message": str(exc)}) + "\n")
        return 5
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"ccp-exact: {type(exc).__name__}: {exc}", file=sys.stderr)
        sys.stdout.write(to_json(_error_payload(exc, None)) + "\n")
        return exc.exit_code
    return run(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
