"""Command-line interface: ``exactperm {permp,count,test,simulate}``.

Exit codes: 0 success, 2 invalid input, 3 degenerate test statistic.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .combinatorics import GroupConfig, Sidedness, count_space
from .engine import (
    DEFAULT_ENUMERATION_BUDGET,
    Dataset,
    Sampling,
    StatisticKind,
    StatisticSpec,
    exhaustive_test,
    sample_with_replacement,
    sample_without_replacement,
)
from .exceptions import DegenerateStatistic, ExactPermError
from .pvalues import Method, NullSpace, TestOutcome, p_exact

EXIT_INVALID = 2
EXIT_DEGENERATE = 3

_METHODS = {
    "auto": None,
    "exact": Method.EXACT_SUM,
    "integral": Method.INTEGRAL_APPROX,
    "upper": Method.UPPER_BOUND_LIMIT,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    return sizes


def _alphas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_format(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--format",
        choices=("json", "csv", "plain"),
        default="json",
        help="output format (default: json)",
    )


def _add_sided(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--sided",
        choices=("one", "two"),
        default="one",
        help="one- or two-sided statistic (default: one)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exactperm", description="Exact p-values for randomly drawn permutations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("permp", help="p-values from an exceedance count b out of m permutations")
    p.add_argument("--b", type=int, required=True, help="number of permuted statistics >= observed")
    p.add_argument("--m", type=int, required=True, help="number of random permutations drawn")
    space = p.add_mutually_exclusive_group(required=True)
    space.add_argument("--sizes", type=_sizes, help="group sizes, e.g. 5,5; m_t is derived from them")
    space.add_argument("--mt", type=int, help="number of distinct non-original statistic values m_t")
    space.add_argument("--mt-infinite", action="store_true", help="treat the permutation space as unbounded")
    _add_sided(p)
    p.add_argument("--method", choices=tuple(_METHODS), default="auto", help="force an evaluation method")
    _add_format(p)

    p = sub.add_parser("count", help="number m_t+1 of distinct labelings for group sizes")
    p.add_argument("--sizes", type=_sizes, required=True, help="group sizes, e.g. 5,5 or 3,2,1")
    _add_sided(p)
    _add_format(p)

    p = sub.add_parser("test", help="run a permutation test on a value,group CSV file")
    p.add_argument("data", help="CSV file with header 'value,group'")
    p.add_argument("--statistic", choices=("diff", "t"), default="t", help="difference of means or pooled t (default: t)")
    _add_sided(p)
    p.add_argument("--m", type=int, default=1000, help="number of permutations (ignored when exhaustive)")
    p.add_argument(
        "--mode",
        choices=[s.value for s in Sampling],
        default=Sampling.WITH_REPLACEMENT.value,
        help="how permutations are drawn (default: with-replacement)",
    )
    p.add_argument("--seed", type=int, help="RNG seed; generated and reported when omitted")
    p.add_argument("--budget", type=int, default=DEFAULT_ENUMERATION_BUDGET, help="maximum labelings for exhaustive mode")
    _add_format(p)

    p = sub.add_parser("simulate", help="run a simulation experiment and write its table")
    p.add_argument("experiment", choices=("staircase", "ratio", "fwer", "power"))
    p.add_argument("--m", type=int, default=20, help="permutations per test")
    p.add_argument("--mt", type=int, help="m_t for ratio (required) or the two-stage model (default unbounded)")
    p.add_argument("--replicates", type=int, default=10_000, help="number of simulated replicates")
    p.add_argument("--alpha", type=_alphas, help="comma-separated nominal levels (default depends on experiment)")
    p.add_argument("--genes", type=int, default=30_000, help="simultaneous tests for fwer")
    p.add_argument("--effect", type=float, default=0.0, help="mean shift of group 0 for power")
    p.add_argument("--sizes", type=_sizes, default=(5, 5), help="group sizes for power / full-data fwer")
    p.add_argument("--fwer-mode", choices=("two-stage", "full"), default="two-stage", help="null model for fwer")
    p.add_argument("--seed", type=int, help="master seed; generated and reported when omitted")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("--out", help="write the table here (CSV) instead of stdout")
    p.add_argument("--summary", help="also write a JSON summary here")
    return parser


def _emit(record: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(record) + "\n")
    elif fmt == "csv":
        keys = list(record)
        out.write(",".join(keys) + "\n")
        out.write(",".join(_csv_cell(record[k]) for k in keys) + "\n")
    else:
        for k, v in record.items():
            out.write(f"{k}: {_plain(v)}\n")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return '"' + ";".join(str(x) for x in v) + '"'
    return str(v)


def _plain(v) -> str:
    if isinstance(v, float):
        return f"{v:.9f}"
    return str(v)


def _new_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint32)[0])


def _cmd_permp(args, out) -> int:
    outcome = TestOutcome(args.b, args.m)
    sided = Sidedness(args.sided)
    if args.sizes is not None:
        space = NullSpace.from_count(count_space(GroupConfig(args.sizes, sided)))
    elif args.mt_infinite:
        space = NullSpace(None)
    else:
        space = NullSpace(args.mt)
    report = p_exact(outcome, space, method=_METHODS[args.method])
    _emit({"b": outcome.b, "m": outcome.m, "m_t": space.m_t, **report.as_dict()}, args.format, out)
    return 0


def _cmd_count(args, out) -> int:
    count = count_space(GroupConfig(args.sizes, Sidedness(args.sided)))
    record = {"sizes": list(args.sizes), "sided": args.sided, "total": count.total, "m_t": count.m_t, "overflowed": count.overflowed}
    _emit(record, args.format, out)
    return 0


def _cmd_test(args, out) -> int:
    data = Dataset.from_csv(args.data)
    spec = StatisticSpec(StatisticKind(args.statistic), Sidedness(args.sided))
    mode = Sampling(args.mode)
    if mode is Sampling.EXHAUSTIVE:
        result = exhaustive_test(data, spec, budget=args.budget)
    else:
        seed = args.seed if args.seed is not None else _new_seed()
        run = sample_with_replacement if mode is Sampling.WITH_REPLACEMENT else sample_without_replacement
        result = run(data, spec, args.m, seed=seed)
    record = {"file": str(args.data), "sizes": list(data.sizes), "groups": list(data.group_names), "statistic": args.statistic, **result.as_dict()}
    _emit(record, args.format, out)
    return 0


_DEFAULT_ALPHA = {
    "staircase": tuple(np.round(np.arange(1, 100) / 100, 2).tolist()),
    "fwer": (0.05,),
    "power": (0.01, 0.05, 0.1),
}


def _cmd_simulate(args, out) -> int:
    seed = args.seed if args.seed is not None else _new_seed()
    if args.experiment == "ratio":
        if args.mt is None:
            raise ExactPermError("simulate ratio needs --mt")
        report = harness.ratio_curve(args.m, args.mt)
    else:
        cfg = harness.SimConfig(
            replicates=args.replicates,
            m=args.m,
            alpha_grid=args.alpha or _DEFAULT_ALPHA[args.experiment],
            genes=args.genes,
            effect_size=args.effect,
            seed=seed,
            sizes=args.sizes,
            m_t=args.mt,
            threads=args.threads,
        )
        if args.experiment == "staircase":
            report = harness.type1_staircase(cfg)
        elif args.experiment == "fwer":
            report = harness.fwer_demo(cfg, mode=args.fwer_mode)
        else:
            report = harness.power_compare(cfg)
        report.summary["seed"] = seed
    summary = {"experiment": report.experiment, "rows": len(report.rows), **report.summary}
    summary.pop("b_counts", None)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(report.to_json() + "\n")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(report.to_csv())
        out.write(json.dumps(summary) + "\n")
    else:
        out.write(report.to_csv())
        sys.stderr.write(json.dumps(summary) + "\n")
    return 0


_COMMANDS = {"permp": _cmd_permp, "count": _cmd_count, "test": _cmd_test, "simulate": _cmd_simulate}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args, out)
    except DegenerateStatistic as exc:
        sys.stderr.write(f"exactperm {args.command}: degenerate statistic: {exc}\n")
        return EXIT_DEGENERATE
    except (ExactPermError, OSError) as exc:
        sys.stderr.write(f"exactperm {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
