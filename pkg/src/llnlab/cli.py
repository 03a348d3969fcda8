"""Batch front end: run condition checks and simulations, emit reports.

Outputs are JSON (verdicts, reports) and CSV (simulation tables); progress
goes to stderr.  Every run writes a manifest next to its outputs; ``replay``
re-executes a manifest's command line and reproduces the outputs bitwise
(seeds are explicit everywhere).

Exit codes: 0 = ran and matched attached expectations (fixtures), 1 = some
expectation failed, 2 = unusable input (parse error).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .conditions import (
    chandra_ghosal_integral,
    count_tail_vanishes,
    exceedance_series,
    norming_ratio_bound,
    norming_ratio_bound_sq,
)
from .domination import cesaro_tail_sup, dominating_cdf, weighted_tail_sup
from .errors import LlnLabError, SpecError
from .fixtures import FIXTURE_NAMES, load as load_fixture
from .model import DEFAULT_N_SUP, uniform_weights
from .moments import MomentFunction, bounded_moment_condition, ui_check
from .numerics import decay_gate, growth_gate, slope_certified_decay
from .simulate import (
    SimPlan,
    slln_path_diagnostic,
    slln_series_estimate,
    wlln_estimate,
)
from .specio import LoadedSpec, load_spec

_DEFAULT_KG_GRID = tuple(2**j for j in range(0, 41))
_DEFAULT_UI_GRID = tuple(2.0**j for j in range(0, 41, 2))


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Condition runners
# ---------------------------------------------------------------------------


def _cesaro_source(spec: LoadedSpec, n_sup: int):
    fx = spec.fixture
    if fx is not None and "cesaro_sup" in fx.closed:
        return fx.cesaro_tail()
    return lambda x: cesaro_tail_sup(spec.arr, x, n_sup=n_sup)


def _weighted_source(spec: LoadedSpec, n_sup: int):
    fx = spec.fixture
    if fx is not None and "weighted_sup" in fx.closed:
        return fx.closed["weighted_sup"]
    return lambda x: weighted_tail_sup(spec.arr, spec.weights, x, n_sup=n_sup)


def _run_condition(name: str, spec: LoadedSpec, n_sup: int, budget: int) -> dict:
    fx = spec.fixture
    if name == "cesaro-domination":
        rep = dominating_cdf(spec.arr, uniform_weights(spec.arr.row_length), n_sup=n_sup)
        outcome = "valid" if rep.valid else "invalid"
        detail = rep.to_json_obj()
    elif name == "weighted-domination":
        rep = dominating_cdf(spec.arr, spec.weights, n_sup=n_sup)
        outcome = "valid" if rep.valid else "invalid"
        detail = rep.to_json_obj()
    elif name == "chandra-ghosal":
        verdict = chandra_ghosal_integral(_cesaro_source(spec, n_sup), spec.p, spec.sv)
        outcome = verdict.verdict
        detail = verdict.to_json_obj()
    elif name == "series":
        verdict = exceedance_series(spec.arr, spec.p, N=budget)
        outcome = verdict.verdict
        detail = verdict.to_json_obj()
    elif name == "b-regularity-wlln":
        verdict = norming_ratio_bound(spec.b, N=budget)
        outcome = verdict.verdict
        detail = verdict.to_json_obj()
    elif name == "b-regularity-l2":
        verdict = norming_ratio_bound_sq(spec.b, N=budget)
        outcome = verdict.verdict
        detail = verdict.to_json_obj()
    elif name == "kG":
        grid = fx.kg_grid if fx is not None and fx.kg_grid else _DEFAULT_KG_GRID
        verdict = count_tail_vanishes(_cesaro_source(spec, n_sup), spec.b, grid)
        outcome = verdict.verdict
        detail = {"rule": verdict.rule, "last_value": verdict.value}
    elif name == "kG-hat":
        grid = fx.kg_grid if fx is not None and fx.kg_grid else _DEFAULT_KG_GRID
        verdict = count_tail_vanishes(_weighted_source(spec, n_sup), spec.b, grid)
        outcome = verdict.verdict
        detail = {"rule": verdict.rule, "last_value": verdict.value}
    elif name == "ui":
        closed = fx.closed.get("ui_cesaro_pow_p") if fx is not None else None
        grid = fx.ui_grid if fx is not None and fx.ui_grid else _DEFAULT_UI_GRID
        values = ui_check(
            spec.arr,
            uniform_weights(spec.arr.row_length),
            MomentFunction(power=spec.p),
            grid,
            n_sup=n_sup,
            closed_sup=closed,
        )
        if decay_gate(values) or slope_certified_decay(values):
            outcome = "decays"
        elif growth_gate(values):
            outcome = "diverges"
        else:
            outcome = "inconclusive"
        detail = {"values_head": values[:5], "values_tail": values[-5:]}
    elif name == "bounded-moment":
        g = MomentFunction(power=spec.p, log_factor_nu=spec.nu)
        sup = bounded_moment_condition(
            spec.arr, uniform_weights(spec.arr.row_length), g, n_sup=n_sup
        )
        outcome = "growing" if sup.growing else "finite"
        detail = {"sup": float(sup), "attained_at": sup.attained_at}
    else:
        raise SpecError(f"unknown condition {name!r}")
    expected = fx.expected.get(name) if fx is not None else None
    return {
        "condition": name,
        "outcome": outcome,
        "expected": expected,
        "match": (expected is None) or (outcome == expected),
        "detail": detail,
    }


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------


def _parse_rows(text: str) -> tuple[int, ...]:
    def one(tok: str) -> int:
        tok = tok.strip()
        if "^" in tok:
            base, exp = tok.split("^")
            return int(base) ** int(exp)
        return int(tok)

    if ".." in text:
        lo, hi = (one(t) for t in text.split(".."))
        rows = []
        n = lo
        while n <= hi:
            rows.append(n)
            n *= 2
        return tuple(rows)
    return tuple(sorted(one(t) for t in text.split(",")))


def _load(args) -> LoadedSpec:
    if args.fixture is not None:
        fx = load_fixture(args.fixture, p=args.p, nu=args.nu)
        return LoadedSpec(
            arr=fx.arr, weights=fx.weights, b=fx.b, sv=None,
            p=fx.p, nu=fx.nu, fixture=fx, label=fx.name,
        )
    return load_spec(args.spec)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out_base: Path, argv: list[str], outputs: list[str]) -> None:
    _write_json(
        out_base.with_suffix(".manifest.json"),
        {"tool": "llnlab", "version": __version__, "argv": argv, "outputs": outputs},
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_check(args, argv: list[str]) -> int:
    try:
        spec = _load(args)
        names = [c.strip() for c in args.conditions.split(",") if c.strip()]
        results = [
            _run_condition(name, spec, args.n_sup, args.n) for name in names
        ]
    except (SpecError, LlnLabError, ValueError) as exc:
        _log(f"error: {exc}")
        return 2
    ok = all(r["match"] for r in results)
    for r in results:
        exp = "" if r["expected"] is None else f" (expected {r['expected']})"
        _log(f"check {spec.label} {r['condition']}: {r['outcome']}{exp}")
    out = Path(args.out)
    _write_json(
        out.with_suffix(".json"),
        {"input": spec.label, "results": results},
    )
    _write_manifest(out, argv, [str(out.with_suffix(".json"))])
    return 0 if ok else 1


def cmd_simulate(args, argv: list[str]) -> int:
    try:
        spec = _load(args)
        rows = _parse_rows(args.rows)
        eps = tuple(float(t) for t in args.eps.split(","))
        c_fn = spec.fixture.c_fn if spec.fixture is not None else None
        plan = SimPlan(
            arr=spec.arr,
            b=spec.b,
            rows=rows,
            reps=args.reps,
            eps=eps,
            seed=args.seed,
            c=c_fn,
        )
    except (SpecError, LlnLabError, ValueError) as exc:
        _log(f"error: {exc}")
        return 2
    _log(f"simulate {spec.label} mode={args.mode} rows={rows} reps={args.reps}")
    if args.mode == "wlln":
        report = wlln_estimate(plan, threads=args.threads)
    elif args.mode == "slln-series":
        report = slln_series_estimate(plan, spec.sv, spec.p, threads=args.threads)
    elif args.mode == "slln-path":
        path_rep = slln_path_diagnostic(plan)
        out = Path(args.out)
        obj = {
            "mode": "slln-path",
            "rows": list(path_rep.rows),
            "eps": list(path_rep.eps),
            "seed": path_rep.seed,
            "reps": path_rep.reps,
            "fraction_below": {
                f"{eps}": [path_rep.fraction_below(n, eps) for n in path_rep.rows]
                for eps in path_rep.eps
            },
        }
        _write_json(out.with_suffix(".json"), obj)
        _write_manifest(out, argv, [str(out.with_suffix(".json"))])
        return 0
    else:
        _log(f"error: unknown mode {args.mode}")
        return 2
    out = Path(args.out)
    outputs = []
    if args.format in ("csv", "both"):
        out.parent.mkdir(parents=True, exist_ok=True)
        csv_path = out.with_suffix(".csv")
        csv_path.write_text(report.to_csv_str())
        outputs.append(str(csv_path))
    if args.format in ("json", "both"):
        _write_json(out.with_suffix(".json"), report.to_json_obj())
        outputs.append(str(out.with_suffix(".json")))
    _write_manifest(out, argv, outputs)
    return 0


def cmd_verify_fixtures(args, argv: list[str]) -> int:
    names = [args.only] if args.only else list(FIXTURE_NAMES)
    failures = []
    for name in names:
        try:
            fx = load_fixture(name)
            spec = LoadedSpec(
                arr=fx.arr, weights=fx.weights, b=fx.b, sv=None,
                p=fx.p, nu=fx.nu, fixture=fx, label=fx.name,
            )
        except SpecError as exc:
            _log(f"error: {exc}")
            return 2
        checks = [k for k in fx.expected if k != "c0"]
        for cname in checks:
            r = _run_condition(cname, spec, args.n_sup, args.n)
            status = "ok" if r["match"] else "MISMATCH"
            _log(f"{name} :: {cname}: {r['outcome']} vs {r['expected']} [{status}]")
            if not r["match"]:
                failures.append(f"{name}:{cname}")
        if "c0" in fx.expected:
            c0, at = fx.weights.c0(args.n_sup)
            ok = abs(c0 - fx.expected["c0"]) < 1e-12
            _log(f"{name} :: c0: {c0} (row {at}) [{'ok' if ok else 'MISMATCH'}]")
            if not ok:
                failures.append(f"{name}:c0")
    if failures:
        _log("failing expectations: " + ", ".join(failures))
        return 1
    return 0


def cmd_replay(args, argv: list[str]) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        recorded = manifest["argv"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        _log(f"error: cannot replay manifest {args.manifest}: {exc}")
        return 2
    _log(f"replaying: {' '.join(recorded)}")
    return main(recorded)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _add_input_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=FIXTURE_NAMES, help="named generator")
    src.add_argument("--spec", help="path to a JSON problem description")
    p.add_argument("--p", type=float, default=None, help="override fixture p")
    p.add_argument("--nu", type=int, default=None, help="override fixture nu")
    p.add_argument("--n-sup", type=int, default=DEFAULT_N_SUP, dest="n_sup",
                   help="row-scan bound for suprema")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="llnlab")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("check", help="run condition checkers")
    _add_input_args(pc)
    pc.add_argument("--conditions", required=True,
                    help="comma list: cesaro-domination, weighted-domination, "
                         "chandra-ghosal, series, b-regularity-wlln, "
                         "b-regularity-l2, kG, kG-hat, ui, bounded-moment")
    pc.add_argument("--n", type=int, default=100_000, help="series/ratio budget")
    pc.add_argument("--out", default="llnlab-check")
    pc.add_argument("--format", choices=["json"], default="json")
    pc.set_defaults(fn=cmd_check)

    ps = sub.add_parser("simulate", help="run Monte Carlo estimates")
    _add_input_args(ps)
    ps.add_argument("--mode", choices=["wlln", "slln-series", "slln-path"],
                    default="wlln")
    ps.add_argument("--rows", default="2^6..2^16",
                    help="'a..b' doubling range (2^j syntax ok) or comma list")
    ps.add_argument("--reps", type=int, default=2000)
    ps.add_argument("--eps", default="0.1,0.5,1.0")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--threads", type=int, default=1)
    ps.add_argument("--out", default="llnlab-sim")
    ps.add_argument("--format", choices=["csv", "json", "both"], default="both")
    ps.set_defaults(fn=cmd_simulate)

    pv = sub.add_parser("verify-fixtures", help="run the conformance suite")
    pv.add_argument("--only", choices=FIXTURE_NAMES, default=None)
    pv.add_argument("--n-sup", type=int, default=DEFAULT_N_SUP, dest="n_sup")
    pv.add_argument("--n", type=int, default=100_000)
    pv.set_defaults(fn=cmd_verify_fixtures)

    pr = sub.add_parser("replay", help="re-run a recorded manifest")
    pr.add_argument("manifest")
    pr.set_defaults(fn=cmd_replay)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    return args.fn(args, argv)


if __name__ == "__main__":
    sys.exit(main())
