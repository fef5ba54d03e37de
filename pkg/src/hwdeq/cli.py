"""Command-line front end.

Subcommands: fss, diagnose, classify, construct, sweep, reproduce.  Problems
come either from a JSON spec file (keys r, q, sigma as sequence encodings,
n0, horizon, tolerances) or from a named benchmark family with parameters.

Exit codes: 0 success/definite, 2 validation failure, 3 spec parse error,
4 indeterminate classification, 5 construction precondition refused.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import construct as cons
from . import families
from .diagnostics import compute_diagnostics, tables_to_csv
from .fss import ProblemSpec, Tolerances, ValidationError, build_fss, validate_fss
from .sequences import PositivityError, spec_from_json
from .solvability import INDETERMINATE, SOLVABLE_STATUSES, classify

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARSE = 3
EXIT_INDETERMINATE = 4
EXIT_REFUSED = 5

log = logging.getLogger("hw")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _setup_logging() -> None:
    level = os.environ.get("HW_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise CliError(f"bad --param {pair!r}; expected name=value", EXIT_PARSE)
        k, v = pair.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise CliError(f"bad numeric value in --param {pair!r}", EXIT_PARSE) from None
    return out


def load_problem(args) -> ProblemSpec:
    if args.spec:
        try:
            data = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read spec file: {exc}", EXIT_PARSE) from exc
        try:
            tol_data = data.get("tolerances", {})
            tol = Tolerances(
                wronskian_tol=tol_data.get("wronskian_tol", 1e-10),
                tail_tol=tol_data.get("tail_tol", 1e-9),
                convergence_window=int(tol_data.get("convergence_window", 64)),
                growth_bound=tol_data.get("growth_bound", 1e6),
                solver_tol=tol_data.get("solver_tol", 1e-11),
            )
            problem = ProblemSpec(
                r=spec_from_json(data["r"]),
                q=spec_from_json(data["q"]),
                sigma=spec_from_json(data["sigma"]),
                n0=int(data.get("n0", 1)),
                horizon=int(data.get("horizon", 5000)),
                tolerances=tol,
            )
        except (KeyError, ValueError, PositivityError) as exc:
            raise CliError(f"bad problem spec: {exc}", EXIT_PARSE) from exc
    elif args.family:
        try:
            problem = families.make_problem(
                args.family, horizon=args.horizon, **_parse_params(args.param)
            )
        except (KeyError, ValueError, PositivityError) as exc:
            raise CliError(f"bad family parameters: {exc}", EXIT_PARSE) from exc
    else:
        raise CliError("need --spec FILE or --family NAME", EXIT_PARSE)

    if args.horizon is not None and problem.horizon != args.horizon:
        problem = replace(problem, horizon=args.horizon)
    if args.tol is not None:
        problem = replace(problem, tolerances=replace(problem.tolerances, tail_tol=args.tol))
    return problem


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def _echo(args, payload: dict, csv_text: str | None = None) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, default=str))
    elif args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)


# --- subcommands -------------------------------------------------------------


def cmd_fss(args) -> int:
    problem = load_problem(args)
    try:
        fss = build_fss(problem)
    except (PositivityError, ValidationError) as exc:
        print(f"fss: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    report = validate_fss(fss, tail_tol=problem.tolerances.tail_tol)
    out = _out_dir(args)

    rows = ["n,u,v,log_u,log_v"]
    with np.errstate(over="ignore"):
        for n in range(fss.n0, problem.horizon + 1):
            lu, lv = fss.u.log_at(n), fss.v.log_at(n)
            rows.append(f"{n},{np.exp(lu)!r},{np.exp(lv)!r},{lu!r},{lv!r}")
    csv_text = "\n".join(rows) + "\n"
    _emit(args, out / "fss_table.csv", csv_text)
    payload = report.to_json()
    _emit(args, out / "fss_validation.json", json.dumps(payload, indent=2))
    _echo(args, payload, csv_text)
    if not args.format:
        print(
            f"fss: window [{report.window[0]}, {report.window[1]}], "
            f"casoratian residual {report.wronskian_residual:.3e}, ok={report.ok}"
        )
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_diagnose(args) -> int:
    problem = load_problem(args)
    try:
        bundle = compute_diagnostics(problem)
    except (PositivityError, ValidationError) as exc:
        print(f"diagnose: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = _out_dir(args)
    payload = bundle.to_json()
    csv_text = tables_to_csv(bundle)
    _emit(args, out / "diagnostics.json", json.dumps(payload, indent=2))
    _emit(args, out / "diagnostics_tables.csv", csv_text)
    _echo(args, payload, csv_text)
    if not args.format:
        for name in ("sigma_series", "J", "G", "L", "P", "B", "I"):
            print(f"{name:12s} {payload[name]['verdict']}")
        print(f"C -> 0: {payload['C_limit_zero']} ({payload['C_limit_evidence']})")
    return EXIT_OK


def cmd_classify(args) -> int:
    problem = load_problem(args)
    try:
        bundle = compute_diagnostics(problem)
    except (PositivityError, ValidationError) as exc:
        print(f"classify: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    verdict = classify(bundle)
    out = _out_dir(args)
    payload = verdict.to_json()
    _emit(args, out / "verdict.json", json.dumps(payload, indent=2))
    _echo(args, payload)
    if not args.format:
        reason = f" ({verdict.reason})" if verdict.reason else ""
        print(f"verdict: {verdict.status}{reason}; criteria={verdict.criteria}")
    return EXIT_INDETERMINATE if verdict.status == INDETERMINATE else EXIT_OK


def cmd_construct(args) -> int:
    problem = load_problem(args)
    try:
        bundle = compute_diagnostics(problem)
    except (PositivityError, ValidationError) as exc:
        print(f"construct: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    verdict = classify(bundle)
    if verdict.status not in ("narrow_solvable", "solvable_and_equivalent"):
        print(
            f"construct: refusing, classification is {verdict.status}"
            f" (needs a solvable narrow problem with G finite)",
            file=sys.stderr,
        )
        return EXIT_REFUSED
    try:
        window = cons.choose_n0(bundle)
        sol = cons.solve_beta(bundle, window)
        pfss = cons.build_perturbed_fss(bundle, sol)
    except cons.ConstructionError as exc:
        print(f"construct: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    report = cons.verify_asymptotics(bundle, sol, pfss)
    oracle_dev = cons.oracle_deviation(bundle, sol)

    out = _out_dir(args)
    csv_text = _beta_csv(sol, pfss)
    _emit(args, out / "beta.csv", csv_text)
    payload = {
        "beta": sol.to_json(),
        "asymptotics": report.to_json(),
        "oracle_relative_deviation": oracle_dev,
        "perturbed_wronskian_residual": pfss.wronskian_residual,
    }
    _emit(args, out / "construction.json", json.dumps(payload, indent=2))
    _echo(args, payload, csv_text)
    if not args.format:
        print(
            f"construct: window n0={sol.window.n0}, {sol.iterations} iterations, "
            f"ratio tail {report.ratio_u_tail_max:.2e}, oracle dev {oracle_dev:.2e}, "
            f"ok={report.ok}"
        )
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _beta_csv(sol: cons.BetaSolution, pfss: cons.PerturbedFSS) -> str:
    rows = [
        "n,beta_re,beta_im,mu_re,mu_im,u_tilde,v_tilde,ratio_u_err,ratio_v_err,narrow_partial"
    ]
    with np.errstate(over="ignore", invalid="ignore"):
        u_t = np.exp(pfss.u_tilde_log.real)
        v_t = np.exp(pfss.v_tilde_log.real)
    for i, n in enumerate(sol.ns):
        mu = sol.mu[i] if i < sol.mu.size else 0.0
        narrow = pfss.narrow_partial[i - 1] if 0 < i <= pfss.narrow_partial.size else 0.0
        rv = pfss.ratio_v[i]
        rv_err = abs(rv - 1.0) if np.isfinite(rv) else float("nan")
        rows.append(
            f"{n},{sol.beta[i].real!r},{sol.beta[i].imag!r},{mu.real!r},{mu.imag!r},"
            f"{u_t[i]!r},{v_t[i]!r},{abs(sol.beta[i]-1.0)!r},{rv_err!r},{narrow!r}"
        )
    return "\n".join(rows) + "\n"


# --- sweep ---------------------------------------------------------------------


def _parse_grid(pairs: list[str]) -> dict[str, np.ndarray]:
    grids = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise CliError(f"bad --grid {pair!r}; expected name=a:b:step", EXIT_PARSE)
        name, rng = pair.split("=", 1)
        bits = rng.split(":")
        if len(bits) != 3:
            raise CliError(f"bad --grid range {rng!r}; expected a:b:step", EXIT_PARSE)
        a, b, step = (float(x) for x in bits)
        if step <= 0 or b < a:
            raise CliError("grid needs a <= b and step > 0", EXIT_PARSE)
        count = int(round((b - a) / step)) + 1
        grids[name.strip()] = np.round(a + step * np.arange(count), 12)
    return grids


def _sweep_cell(task) -> dict:
    family, params, horizon, band = task
    problem = families.make_problem(family, horizon=horizon, **params)
    bundle = compute_diagnostics(problem)
    verdict = classify(bundle)
    expected = families.expected_status(family, **params)
    dist = families.boundary_distance(family, **params)
    scored = dist > band
    match = families.status_matches(expected, verdict.status) if scored else None
    return {
        "params": params,
        "status": verdict.status,
        "expected": expected,
        "J": bundle.J_report.verdict,
        "G": bundle.G_report.verdict,
        "match": match,
        "scored": scored,
    }


def cmd_sweep(args) -> int:
    family = args.family
    if not family:
        raise CliError("sweep needs --family", EXIT_PARSE)
    names = families.family_parameters(family)
    grids = _parse_grid(args.grid)
    missing = [n for n in names if n not in grids]
    if missing:
        raise CliError(f"sweep needs --grid for {missing}", EXIT_PARSE)
    horizon = args.horizon

    tasks = []
    if len(names) == 1:
        for a in grids[names[0]]:
            tasks.append((family, {names[0]: float(a)}, horizon, args.band))
    else:
        for a in grids[names[0]]:
            for b in grids[names[1]]:
                tasks.append(
                    (family, {names[0]: float(a), names[1]: float(b)}, horizon, args.band)
                )

    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]

    out = _out_dir(args)
    import io

    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["param1", "param2", "verdict", "expected", "J_verdict", "G_verdict", "match"])
    mismatches = 0
    for res in results:
        vals = [res["params"].get(n) for n in names]
        p1 = vals[0]
        p2 = vals[1] if len(vals) > 1 else ""
        match_txt = "" if res["match"] is None else str(res["match"]).lower()
        if res["match"] is False:
            mismatches += 1
        w.writerow([p1, p2, res["status"], res["expected"], res["J"], res["G"], match_txt])
    csv_text = buf.getvalue()
    _emit(args, out / "sweep.csv", csv_text)
    if args.format == "csv" or not args.format:
        sys.stdout.write(csv_text)
    scored = sum(1 for r in results if r["scored"])
    print(
        f"# sweep: {len(results)} cells, {scored} scored outside band {args.band}, "
        f"{mismatches} mismatches",
        file=sys.stderr,
    )
    return EXIT_OK if mismatches == 0 else EXIT_VALIDATION


# --- reproduce -------------------------------------------------------------------


def cmd_reproduce(args) -> int:
    try:
        family = families.resolve_family(args.example)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PARSE) from exc
    horizon = args.horizon
    checks: list[tuple[str, bool, str]] = []

    if family == families.EXP_WEIGHT:
        grid = [-2.0, -1.5, -1.0, -0.75, -0.4, -0.1, 0.0, 1.0]
        for g in grid:
            res = _sweep_cell((family, {"gamma": g}, horizon, 0.0))
            want = families.expected_status(family, gamma=g)
            ok = families.status_matches(want, res["status"])
            checks.append((f"gamma={g:g}: {res['status']} (expected {want})", ok, ""))
    else:
        if family == families.POWER:
            alphas = [0.0, 0.5, 1.0, 1.5, 2.0]
            betas = [0.25 * k for k in range(1, 13)]
        else:
            alphas = [0.0, 0.25, 0.5, 0.75]
            betas = [0.2 * k for k in range(1, 11)]
        band = args.band
        for a in alphas:
            for b in betas:
                res = _sweep_cell((family, {"alpha": a, "beta": b}, horizon, band))
                if not res["scored"]:
                    checks.append(
                        (f"alpha={a:g} beta={b:g}: {res['status']} (inside band)", True, "skip")
                    )
                    continue
                want = res["expected"]
                checks.append(
                    (f"alpha={a:g} beta={b:g}: {res['status']} (expected {want})",
                     bool(res["match"]), "")
                )

    if family == families.ALT_POWER:
        checks.extend(_alt_power_extra_checks(horizon))

    passed = 0
    for label, ok, note in checks:
        flag = "PASS" if ok else "FAIL"
        if note == "skip":
            flag = "SKIP"
        else:
            passed += int(ok)
        print(f"[{flag}] {label}")
    scored = sum(1 for _, _, note in checks if note != "skip")
    print(f"reproduce {args.example}: {passed}/{scored} checks passed")
    out = _out_dir(args)
    payload = {
        "example": args.example,
        "passed": passed,
        "scored": scored,
        "checks": [{"label": l, "ok": bool(o), "note": n} for l, o, n in checks],
    }
    _emit(args, out / f"reproduce_{family}.json", json.dumps(payload, indent=2))
    return EXIT_OK if passed == scored else EXIT_VALIDATION


def _alt_power_extra_checks(horizon: int | None) -> list[tuple[str, bool, str]]:
    """The oscillating family's extras: the band of the alternating tail
    R_n(beta) * n^beta, and solvable-with-divergent-B points."""
    checks = []
    for beta in (0.5, 1.0, 1.5):
        ratio = families.alternating_tail_band(beta, 50, 5000)
        checks.append(
            (f"alternating tail band beta={beta:g}: spread ratio {ratio:.3f}",
             ratio <= 10.0, "")
        )
    for a, b in ((0.25, 1.0), (0.5, 1.0), (0.0, 1.4)):
        res = _sweep_cell((families.ALT_POWER, {"alpha": a, "beta": b}, horizon, 0.0))
        problem = families.make_problem(families.ALT_POWER, horizon=horizon, alpha=a, beta=b)
        bundle = compute_diagnostics(problem)
        ok = (
            res["status"] in SOLVABLE_STATUSES
            and bundle.B_report.diverged
            and bundle.P_report.diverged
        )
        checks.append(
            (
                f"alpha={a:g} beta={b:g}: solvable with B,P divergent "
                f"(B {bundle.B_report.verdict}, P {bundle.P_report.verdict})",
                ok,
                "",
            )
        )
    return checks


# --- entry point -----------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hw",
        description="Solvability analysis and construction for perturbed "
        "second-order linear difference equations.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_problem=True):
        if needs_problem:
            p.add_argument("--spec", help="problem spec JSON file")
            p.add_argument("--family", help="benchmark family (exp-weight|power|alt-power)")
            p.add_argument("--param", action="append", metavar="NAME=VALUE",
                           help="family parameter (repeatable)")
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--tol", type=float, default=None, help="tail tolerance")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=["json", "csv"], default=None,
                       help="echo machine-readable output to stdout")
        return p

    common(sub.add_parser("fss", help="build and validate the unperturbed pair"))
    common(sub.add_parser("diagnose", help="evaluate the diagnostic series"))
    common(sub.add_parser("classify", help="solvability verdict"))
    common(sub.add_parser("construct", help="build the perturbed pair"))

    sp = common(sub.add_parser("sweep", help="phase-diagram sweep"), needs_problem=False)
    sp.add_argument("--family", required=True)
    sp.add_argument("--grid", action="append", metavar="NAME=A:B:STEP")
    sp.add_argument("--band", type=float, default=0.1,
                    help="exclusion band around analytic boundaries")
    sp.add_argument("--jobs", type=int, default=1)

    rp = common(sub.add_parser("reproduce", help="run a canonical benchmark grid"),
                needs_problem=False)
    rp.add_argument("example", help="benchmark id (exp-weight|power|alt-power or 9.1|9.2|9.3)")
    rp.add_argument("--band", type=float, default=0.1)
    return ap


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = make_parser().parse_args(argv)
    handlers = {
        "fss": cmd_fss,
        "diagnose": cmd_diagnose,
        "classify": cmd_classify,
        "construct": cmd_construct,
        "sweep": cmd_sweep,
        "reproduce": cmd_reproduce,
    }
    try:
        return handlers[args.command](args)
    except CliError as exc:
        print(f"hw {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
