"""Command-line entry point: analyze, simulate, compare, reproduce.

Exit codes: 0 success, 2 usage error, 3 violated mathematical precondition.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from . import analytics as an
from .dispersal import DispersalVariant, Graph, Variant
from .errors import DomainError, PreconditionError
from .laws import PoissonBinomialLaw, SurvivorLaw, law_from_json, law_to_json, point_mass
from .simulator import SimConfig, default_threads, estimate, outcomes_to_csv

EXIT_USAGE = 2
EXIT_PRECONDITION = 3

QUANTITIES = ("survival", "critical-p", "reach", "colonies", "extinction-time", "limits")
TARGETS = ("table1", "example-pc", "example-survival", "example-colonies", "example-limits")


class UsageError(Exception):
    pass


# -- formatting -----------------------------------------------------------------


def _fmt_number(x: Any, precision: str) -> Any:
    if isinstance(x, bool) or not isinstance(x, float):
        return x
    if not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x if precision == "full" else float(f"{x:.6g}")


def _round_tree(obj: Any, precision: str) -> Any:
    if isinstance(obj, dict):
        return {k: _round_tree(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v, precision) for v in obj]
    return _fmt_number(obj, precision)


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, separators=(",", ":"))
    return str(v)


def render(records: list[dict], fmt: str, precision: str) -> str:
    records = [_round_tree(r, precision) for r in records]
    if fmt == "json":
        body = records[0] if len(records) == 1 else records
        return json.dumps(body, indent=2, ensure_ascii=False) + "\n"
    columns: list[str] = []
    for r in records:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        writer.writerow([_csv_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


# -- law and variant parsing ---------------------------------------------------------


def _law_from_args(args) -> SurvivorLaw:
    if getattr(args, "law_file", None):
        if args.lam is not None or args.p is not None:
            raise UsageError("--law-file cannot be combined with --lambda/--p")
        try:
            text = Path(args.law_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read law file: {exc}") from None
        try:
            return law_from_json(text)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"invalid law file: {exc}") from None
    if args.p is None:
        raise UsageError("a survivor law is required: --lambda and --p, or --law-file")
    if args.p == 0.0 and args.lam is None:
        # N = 0 almost surely whatever the growth rate
        return point_mass(0)
    if args.lam is None:
        raise UsageError("--lambda is required when p > 0")
    return PoissonBinomialLaw(args.lam, args.p)


def _law_params(law: SurvivorLaw) -> dict:
    return law_to_json(law)


def _require_d(args, minimum: int = 1) -> int:
    if args.d is None:
        raise UsageError("--d is required")
    if args.d < minimum:
        raise UsageError(f"--d must be >= {minimum}")
    return args.d


def _exact_or_reason(fn: Callable[[], float]) -> Any:
    try:
        return fn()
    except PreconditionError as exc:
        return f"undefined: {exc}"


# -- analyze ----------------------------------------------------------------------


def _bounds_record(quantity: str, params: dict, report: an.BoundsReport, **extra) -> dict:
    rec = {
        "quantity": quantity,
        "params": params,
        "lower": report.lower,
        "upper": report.upper,
        "method": f"lower: {report.lower_source}; upper: {report.upper_source}",
    }
    rec.update(extra)
    return rec


def analyze_records(args) -> list[dict]:
    q = args.quantity
    if q == "critical-p":
        if args.lam is None:
            raise UsageError("critical-p needs --lambda")
        d = _require_d(args)
        rep = an.critical_p_bracket(args.lam, d)
        return [_bounds_record("critical-p", {"lambda": args.lam, "d": d}, rep)]
    law = _law_from_args(args)
    base = _law_params(law)
    if q == "limits":
        return _limit_records(law, base)
    d = _require_d(args)
    params = {**base, "d": d}
    if q == "survival":
        psi, rho = an.survival_fixed_points(law, d)
        rep = an.survival_prob_bounds(law, d)
        return [
            _bounds_record(
                "survival",
                params,
                rep,
                psi=psi.value,
                rho=rho.value,
                classification=an.classify_survival(law, d).value,
            )
        ]
    if q == "reach":
        rows = []
        for n in range(args.n + 1):
            rep = an.reach_cdf_bounds(law, d, n)
            rows.append(
                _bounds_record(
                    "reach-cdf",
                    {**params, "n": n},
                    rep,
                    exact_move_forward_or_die=an.reach_cdf_exact(
                        DispersalVariant(Variant.MOVE_FORWARD_OR_DIE, d), law, n
                    ),
                    exact_self_avoiding_d_plus_1=an.reach_cdf_exact(
                        DispersalVariant(Variant.SELF_AVOIDING, d + 1), law, n
                    ),
                )
            )
        return rows
    if q == "colonies":
        rep = an.expected_colonies_bounds(law, d)
        graph = Graph(args.graph or "full")
        exact = {
            v.value: _exact_or_reason(lambda v=v: an.expected_colonies_exact(DispersalVariant(v, d), law, graph))
            for v in (Variant.SELF_AVOIDING, Variant.MOVE_FORWARD_OR_DIE, Variant.INDEPENDENT)
        }
        return [_bounds_record("colonies", {**params, "graph": graph.value}, rep, exact=exact)]
    if q == "extinction-time":
        rep = an.extinction_time_bounds_fulltree(law, d)
        exact = {
            v.value: _exact_or_reason(lambda v=v: an.extinction_time_mean(DispersalVariant(v, d), law))
            for v in (Variant.SELF_AVOIDING, Variant.MOVE_FORWARD_OR_DIE, Variant.INDEPENDENT)
        }
        return [_bounds_record("extinction-time", params, rep, exact=exact)]
    raise UsageError(f"unknown quantity {q!r}")


def _limit_records(law: SurvivorLaw, base: dict) -> list[dict]:
    out = [
        {
            "quantity": "survival-limit",
            "params": base,
            "exact": an.survival_prob_limit(law),
            "method": "1 - smallest fixed point of E[s^N]",
        },
        {
            "quantity": "colonies-limit",
            "params": base,
            "exact": _exact_or_reason(lambda: an.colonies_limit(law)),
            "method": "1 / (1 - E(N))",
        },
        {
            "quantity": "reach-limit-mean",
            "params": base,
            "exact": _exact_or_reason(lambda: an.reach_limit_mean(law)),
            "method": "tail sum of the iterated E[s^N]",
        },
    ]
    if isinstance(law, PoissonBinomialLaw):
        out[0]["closed_form"] = an.survival_prob_limit_closed(law.lam, law.p)
        out[2]["closed_form"] = _exact_or_reason(lambda: an.reach_limit_mean_closed(law.lam, law.p))
    return out


# -- simulate -------------------------------------------------------------------------


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.threads
    try:
        return default_threads()
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def simulate_summary(args) -> dict:
    law = _law_from_args(args)
    d = _require_d(args)
    if args.replicas < 1:
        raise UsageError("--replicas must be >= 1")
    config = SimConfig(
        DispersalVariant(Variant(args.variant), d),
        law,
        graph=Graph(args.graph) if args.graph else None,
        max_colonies=args.max_colonies,
        max_events=args.max_events,
        max_time=args.max_time,
        master_seed=args.seed,
    )
    summary, outcomes = estimate(config, args.replicas, _threads(args))
    if args.raw:
        Path(args.raw).write_text(outcomes_to_csv(outcomes), encoding="utf-8")
    return summary.to_dict()


# -- reproduce ---------------------------------------------------------------------------


def _mc_mean(variant: Variant, law: SurvivorLaw, d: int, args, field: str, graph: Graph | None = None) -> dict:
    config = SimConfig(
        DispersalVariant(variant, d),
        law,
        graph=graph,
        max_colonies=args.max_colonies,
        master_seed=args.seed,
    )
    summary, _ = estimate(config, args.replicas, _threads(args))
    if field == "survival":
        return {
            "mc_survival": summary.survival_proportion,
            "mc_ci95_low": summary.survival_ci95[0],
            "mc_ci95_high": summary.survival_ci95[1],
            "mc_replicas": summary.replicas,
        }
    est = getattr(summary, field)
    return {"mc_mean": est.mean, "mc_se": est.se, "mc_censored": summary.censored, "mc_replicas": summary.replicas}


def reproduce_records(args) -> list[dict]:
    t = args.target
    if t == "table1":
        law = PoissonBinomialLaw(1.0, 0.5)
        rows = []
        for label, variant in (("uniform", Variant.SELF_AVOIDING), ("independent", Variant.INDEPENDENT)):
            row: dict = {"scheme": label}
            for d in range(2, 7):
                row[f"d={d}"] = an.extinction_time_mean(DispersalVariant(variant, d), law)
            rows.append(row)
            if args.with_mc:
                mc_row: dict = {"scheme": f"{label} (MC mean)"}
                se_row: dict = {"scheme": f"{label} (MC se)"}
                for d in range(2, 7):
                    mc = _mc_mean(variant, law, d, args, "extinction_time")
                    mc_row[f"d={d}"], se_row[f"d={d}"] = mc["mc_mean"], mc["mc_se"]
                rows += [mc_row, se_row]
        return rows
    if t == "example-pc":
        rep = an.critical_p_bracket(10.0, 30)
        return [_bounds_record("critical-p", {"lambda": 10.0, "d": 30}, rep)]
    if t == "example-survival":
        law = PoissonBinomialLaw(5.0, 0.6)
        psi, rho = an.survival_fixed_points(law, 10)
        rep = an.survival_prob_bounds(law, 10)
        rec = _bounds_record("survival", {**_law_params(law), "d": 10}, rep, psi=psi.value, rho=rho.value)
        if args.with_mc:
            rec.update(_mc_mean(Variant.FULL_TREE, law, 10, args, "survival"))
        return [rec]
    if t == "example-colonies":
        law = PoissonBinomialLaw(9.0, 0.099)
        rep = an.expected_colonies_bounds(law, 800)
        rec = _bounds_record(
            "colonies", {**_law_params(law), "d": 800}, rep, limit=an.colonies_limit(law)
        )
        if args.with_mc:
            rec.update(_mc_mean(Variant.FULL_TREE, law, 800, args, "colonies_created"))
        return [rec]
    if t == "example-limits":
        rows = []
        law = PoissonBinomialLaw(1.0, 0.75)
        rows.append(
            {
                "quantity": "survival-limit",
                "params": _law_params(law),
                "exact": an.survival_prob_limit(law),
                "closed_form": an.survival_prob_limit_closed(1.0, 0.75),
            }
        )
        law = PoissonBinomialLaw(5.0, 0.6)
        for d in (10, 50, 200):
            rep = an.survival_prob_bounds(law, d)
            rows.append(
                _bounds_record(
                    "survival", {**_law_params(law), "d": d}, rep, limit=an.survival_prob_limit(law)
                )
            )
        law = PoissonBinomialLaw(9.0, 0.099)
        rows.append({"quantity": "colonies-limit", "params": _law_params(law), "exact": an.colonies_limit(law)})
        law = PoissonBinomialLaw(1.0, 0.25)
        rows.append(
            {
                "quantity": "reach-limit-mean",
                "params": _law_params(law),
                "exact": an.reach_limit_mean(law),
                "closed_form": an.reach_limit_mean_closed(1.0, 0.25),
            }
        )
        return rows
    raise UsageError(f"unknown target {t!r}")


# -- compare -------------------------------------------------------------------------------


def compare_record(args) -> dict:
    law = _law_from_args(args)
    d = _require_d(args, 2)
    out = an.compare_dispersal(law, d)
    return {"params": _law_params(law), **out}


# -- parser ----------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_law(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, help="colony growth rate")
    p.add_argument("--p", type=float, help="per-individual catastrophe survival probability")
    p.add_argument("--law-file", help="JSON survivor law (exclusive with --lambda/--p)")


def _add_output(p: argparse.ArgumentParser, default_fmt: str) -> None:
    p.add_argument("--format", choices=("csv", "json"), default=default_fmt)
    p.add_argument("--output", "-o", help="output path (default stdout)")
    p.add_argument("--precision", choices=("6", "full"), default="6", help="significant digits")


def _add_mc(p: argparse.ArgumentParser, replicas: int) -> None:
    p.add_argument("--replicas", type=int, default=replicas)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, help="worker processes (default $DISPERSAL_LAB_THREADS or cpu count)")
    p.add_argument("--max-colonies", type=int, default=10_000, help="live-colony cap")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dispersal-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="theorem-level quantities")
    _add_law(a)
    a.add_argument("--d", type=int)
    a.add_argument("--quantity", choices=QUANTITIES, required=True)
    a.add_argument("--n", type=int, default=10, help="largest n for the reach CDF")
    a.add_argument("--graph", choices=[g.value for g in Graph], help="graph for exact colony counts")
    _add_output(a, "json")

    s = sub.add_parser("simulate", help="Monte Carlo estimate")
    _add_law(s)
    s.add_argument("--variant", choices=[v.value for v in Variant], required=True)
    s.add_argument("--d", type=int)
    s.add_argument("--graph", choices=[g.value for g in Graph])
    _add_mc(s, 10_000)
    s.add_argument("--max-events", type=int, default=1_000_000)
    s.add_argument("--max-time", type=float, default=math.inf)
    s.add_argument("--raw", help="write per-replica outcomes as CSV to this path")
    _add_output(s, "json")

    c = sub.add_parser("compare", help="uniform vs independent dispersal")
    _add_law(c)
    c.add_argument("--d", type=int)
    _add_output(c, "json")

    r = sub.add_parser("reproduce", help="published tables and examples")
    r.add_argument("--target", choices=TARGETS, required=True)
    r.add_argument("--with-mc", action="store_true", help="add Monte Carlo cross-checks")
    _add_mc(r, 10_000)
    _add_output(r, "csv")
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "analyze":
            text = render(analyze_records(args), args.format, args.precision)
        elif args.command == "simulate":
            text = render([simulate_summary(args)], args.format, args.precision)
        elif args.command == "compare":
            text = render([compare_record(args)], args.format, args.precision)
        else:
            if args.replicas < 1:
                raise UsageError("--replicas must be >= 1")
            text = render(reproduce_records(args), args.format, args.precision)
        _emit(text, args.output)
    except UsageError as exc:
        print(f"dispersal-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"dispersal-lab: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except DomainError as exc:
        print(f"dispersal-lab: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
