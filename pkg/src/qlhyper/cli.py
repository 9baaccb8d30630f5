"""Command-line entry points: analyze, predict, simulate, sweep, verify.

Exit codes: 0 success, 1 operational error, 2 check failure, 64 usage error.
Reports are JSON documents with sorted keys, written to stdout or to
``report.json`` in the output directory; tables are CSV sidecars.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .catalog import BUILTIN_SYSTEMS, EXTRA_SYSTEMS, builtin_system, power_law_system
from .decomposition import identity_residuals, matching_expansion_check
from .dsl import parse_system_definition
from .errors import DefinitionError, QLHyperError
from .geometry import analyze_wld, check_matching, check_normalized
from .lifespan import (BUILTIN_SHAPES, builtin_family, check_smallness, compute_M0,
                       load_initial_data, predict_lifespan)
from .riccati import lemma_property_suite
from .solver import (GridConfig, SweepResult, epsilon_sweep, run_single, write_frame_trace_csv,
                     write_sweep_csv)
from .spectral import (ball_sample, biorthogonality_residual, check_strict_hyperbolicity,
                       eigendecompose, origin_frame, reconstruction_residual)

EXIT_OK, EXIT_ERROR, EXIT_CHECK, EXIT_USAGE = 0, 1, 2, 64
SUITES = ("identities", "riccati", "wld", "spectral")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ----------------------------------------------------------------------------
# report serialization
# ----------------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_report(report) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


# ----------------------------------------------------------------------------
# input loading
# ----------------------------------------------------------------------------

def load_system(ref, base=None):
    """A built-in name or a path to a system document."""
    if ref in BUILTIN_SYSTEMS or ref in EXTRA_SYSTEMS:
        return builtin_system(ref)
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    try:
        text = path.read_text()
    except OSError as exc:
        raise DefinitionError(f"cannot read system file {ref!r}: {exc.strerror}") from None
    return parse_system_definition(text)


def load_init(ref, n, base=None):
    """A built-in shape name (placed in component 1) or an initial-data document."""
    if ref in BUILTIN_SHAPES:
        return builtin_family(ref, n), []
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = Path(base) / path
    try:
        text = path.read_text()
    except OSError as exc:
        raise DefinitionError(f"cannot read initial-data file {ref!r}: {exc.strerror}") from None
    return load_initial_data(text, n)


# ----------------------------------------------------------------------------
# analysis sections
# ----------------------------------------------------------------------------

def analysis_sections(system, radius=None):
    """Spectral, WLD, matching and normalization checks; returns (report, ok, wld).

    The gap is sampled on the data ball |u| <= delta/2 unless ``radius`` is given;
    on the full validity ball adjacent families may touch at the boundary.
    """
    zero = origin_frame(system)
    gap = check_strict_hyperbolicity(system, system.delta / 2 if radius is None else radius)
    wld = analyze_wld(system)
    match = check_matching(system)
    norm = check_normalized(system)
    report = {
        "system": {"name": system.name, "n": system.n, "delta": system.delta,
                   "eigenvalues_at_0": zero.lambdas, "definition": system.to_document()},
        "spectral_gap": {"delta0": gap.delta0, "delta1": gap.delta1, "radius": gap.radius,
                         "samples": gap.samples, "estimate_kind": gap.estimate_kind,
                         "gap_floor": 1e-9},
        "wld": {
            "alpha": "none" if wld.alpha is None else wld.alpha,
            "J": [i + 1 for i in wld.J],
            "J1": [i + 1 for i in wld.J1],
            "l_max": wld.l_max,
            "families": [{"family": e.family + 1, "alpha": e.alpha_label(),
                          "leading": e.leading, "derivatives": e.derivatives,
                          "threshold": e.threshold} for e in wld.entries],
        },
        "matching": {"passed": match.passed, "residuals": match.residuals,
                     "worst_family": match.worst_family + 1, "worst_s": match.worst_s,
                     "tolerance": match.tol},
        "normalized": {"passed": norm.passed, "residuals": norm.residuals,
                       "origin_residual": norm.extra.get("origin_residual"),
                       "worst_family": norm.worst_family + 1, "tolerance": norm.tol},
    }
    if match.passed and norm.passed and system.n > 1 and not system.homogeneous:
        exp = matching_expansion_check(system)
        report["matching_expansion"] = {"passed": exp.passed, "C": exp.C,
                                        "worst_ratio": exp.worst_ratio,
                                        "ratios": {repr(k): v for k, v in exp.ratios.items()}}
    ok = gap.certified and match.passed and norm.passed
    if "matching_expansion" in report:
        ok = ok and report["matching_expansion"]["passed"]
    return report, ok, wld


def _prediction_section(pred, eps_list):
    sec = {
        "alpha": "none" if pred.alpha is None else pred.alpha,
        "M0": pred.M0,
        "family": None if pred.family is None else pred.family + 1,
        "x_star": pred.x_star,
        "sup_value": pred.sup_value,
        "blowup_predicted": pred.blowup_predicted,
        "guaranteed_scaling_exponent": pred.guaranteed_scaling_exponent,
        "sup_refinement": "4001-point grid plus golden-section search, tol 1e-12",
    }
    sec["estimates"] = []
    for e in eps_list:
        est = predict_lifespan(pred, e)
        sec["estimates"].append({"eps": e, "T_pred": est.T_pred, "notes": list(est.notes)})
    return sec


def _base_report(command, config):
    return {"tool": "qlhyper", "version": __version__, "command": command, "config": config}


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def cmd_analyze(args, out):
    system = load_system(args.system)
    report = _base_report("analyze", {"system": args.system, "radius": args.radius})
    sections, ok, _ = analysis_sections(system, args.radius)
    report.update(sections)
    report["status"] = "pass" if ok else "check-failure"
    out.write(dump_report(report))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_predict(args, out):
    system = load_system(args.system)
    family, _ = load_init(args.init, system.n)
    report = _base_report("predict", {"system": args.system, "init": args.init,
                                      "epsilon": args.epsilon})
    sections, ok, wld = analysis_sections(system)
    report.update(sections)
    if not ok:
        report["status"] = "check-failure"
        report["prediction"] = None
        out.write(dump_report(report))
        return EXIT_CHECK
    pred = compute_M0(system, wld, family)
    report["prediction"] = _prediction_section(pred, [args.epsilon])
    sm = check_smallness(family, args.epsilon)
    report["smallness"] = {"eps": sm.eps, "tv": sm.tv, "l1": sm.l1, "M": sm.M, "K1": sm.K1,
                           "K2": sm.K2, "quadrature": "trapezoid, 4001 points on support"}
    report["status"] = "pass" if pred.blowup_predicted else "no-blowup-predicted"
    out.write(dump_report(report))
    return EXIT_OK


_GRID_KEYS = {"cells", "window", "cfl", "dissipation", "t_end", "t_end_factor", "periodic",
              "max_frames"}
_CONFIG_KEYS = {"system", "init", "epsilon", "launch_points", "families"} | _GRID_KEYS


def _grid_from(doc):
    kw = {k: doc[k] for k in _GRID_KEYS if k in doc}
    if "window" in kw:
        kw["window"] = tuple(float(v) for v in kw["window"])
    for k in ("cfl", "dissipation", "t_end", "t_end_factor"):
        if k in kw:
            kw[k] = float(kw[k])
    return GridConfig(**kw)


def _load_config(path):
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise DefinitionError(f"cannot read config {path!r}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise DefinitionError(f"cannot parse config: {exc}") from None
    if not isinstance(doc, dict):
        raise DefinitionError("config must be a mapping")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise DefinitionError(f"unknown config keys: {sorted(unknown)}")
    for k in ("system", "init"):
        if k not in doc:
            raise DefinitionError(f"config needs '{k}'")
    return doc


def _setup_run(doc, base):
    system = load_system(str(doc["system"]), base)
    family, init_eps = load_init(str(doc["init"]), system.n, base)
    eps = doc.get("epsilon", init_eps)
    eps = [float(e) for e in (eps if isinstance(eps, list) else [eps])]
    if not eps:
        raise DefinitionError("empty epsilon list")
    sections, ok, wld = analysis_sections(system)
    fams = doc.get("families")
    fams = None if fams is None else [int(f) - 1 for f in fams]
    pred = compute_M0(system, wld, family, families=fams)
    launch = doc.get("launch_points")
    if launch is None and pred.blowup_predicted:
        launch = [pred.x_star]
    launch = None if launch is None else (pred.family if pred.family is not None else 0,
                                          [float(y) for y in launch])
    return system, family, eps, sections, ok, pred, launch


def _row_dict(row):
    return {k: getattr(row, k) for k in row.__dataclass_fields__}


def cmd_sweep(args, out):
    doc = _load_config(args.config)
    base = Path(args.config).resolve().parent
    system, family, eps, sections, ok, pred, launch = _setup_run(doc, base)
    grid = _grid_from(doc)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    report = _base_report("sweep", {"config": doc, "grid": grid.__dict__})
    report.update(sections)
    report["prediction"] = _prediction_section(pred, eps)
    result: SweepResult = epsilon_sweep(system, family, eps, grid, pred.alpha, pred.M0, launch)
    write_sweep_csv(outdir / "sweep.csv", result)
    for k, (e, trace) in enumerate(zip(eps, result.traces)):
        if trace is not None:
            write_frame_trace_csv(outdir / f"frames_{k:02d}.csv", trace)
    rows = [_row_dict(r) for r in result.rows]
    report["sweep"] = {"rows": rows, "csv": "sweep.csv"}
    if len(eps) > 1:
        report["sweep"]["extrapolated_limit"] = result.extrapolated_limit
    good = [r for r in result.rows if r.error is None]
    if good:
        final = result.rows[-1]
        report["sweep"]["final_ratio"] = final.ratio
    report["approximations"] = [
        "tilde-V1 and tilde-W1 use the tracked launch set only: lower-bound estimates",
        "delta0 is a sampled estimate, not a certificate",
    ]
    (outdir / "report.json").write_text(dump_report(report))
    out.write(dump_report({"status": "ok" if good else "all-runs-failed",
                           "rows": len(rows), "failed": len(rows) - len(good),
                           "out": str(outdir)}))
    return EXIT_OK if good else EXIT_ERROR


def cmd_simulate(args, out):
    system = load_system(args.system)
    family, _ = load_init(args.init, system.n)
    grid = GridConfig(cells=args.cells) if args.t_end is None else \
        GridConfig(cells=args.cells, t_end=args.t_end)
    sections, ok, wld = analysis_sections(system)
    pred = compute_M0(system, wld, family)
    launch = (pred.family, [pred.x_star]) if pred.blowup_predicted else None
    row, sol, trace, _ = run_single(system, family, args.epsilon, grid, pred.alpha, pred.M0,
                                    launch, keep_solution=True)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_frame_trace_csv(outdir / "frames.csv", trace)
    report = _base_report("simulate", {"system": args.system, "init": args.init,
                                       "epsilon": args.epsilon, "grid": grid.__dict__})
    report.update(sections)
    report["prediction"] = _prediction_section(pred, [args.epsilon])
    report["run"] = _row_dict(row)
    report["run"]["window"] = sol.meta["window"]
    report["run"]["frames"] = len(sol.t)
    (outdir / "report.json").write_text(dump_report(report))
    out.write(dump_report({"status": "ok", "T_num": row.T_num, "out": str(outdir)}))
    return EXIT_OK


# ----------------------------------------------------------------------------
# verification suites
# ----------------------------------------------------------------------------

def _suite_identities(seed, cases):
    rng = np.random.default_rng(seed)
    for name in sorted(BUILTIN_SYSTEMS):
        system = builtin_system(name)
        radius = 0.4 * system.delta
        for k in range(cases):
            d = rng.normal(size=system.n)
            u = radius * rng.uniform() ** (1 / system.n) * d / np.linalg.norm(d)
            res = identity_residuals(system, u)
            worst = max(res.values())
            if worst > 1e-8:
                return {"system": name, "case": k, "u": u, "residuals": res}
    return None


def _suite_wld(seed, cases):
    rng = np.random.default_rng(seed)
    for k in range(cases):
        alpha = int(rng.integers(0, 4))
        c = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0))
        system = power_law_system(alpha, c, lam0=float(rng.uniform(-1, 1)))
        e = analyze_wld(system).entry(0)
        want = c * math.factorial(alpha + 1)
        if e.alpha != alpha or abs(e.leading - want) > 1e-3 * abs(want):
            return {"case": k, "alpha": alpha, "c": c, "got_alpha": e.alpha_label(),
                    "got_leading": e.leading, "want_leading": want}
    return None


def _suite_spectral(seed, cases):
    rng = np.random.default_rng(seed)
    for k in range(cases):
        n = int(rng.integers(1, 5))
        lam = np.sort(rng.uniform(-2, 2, n))
        if n > 1 and np.min(np.diff(lam)) < 1e-2:
            lam = lam + 0.1 * np.arange(n)
        S = rng.normal(size=(n, n)) + 2 * np.eye(n)
        m = S @ np.diag(lam) @ np.linalg.inv(S)
        sd = eigendecompose(m)
        bi = biorthogonality_residual(sd)
        unit = float(np.max(np.abs(np.linalg.norm(sd.right, axis=0) - 1)))
        rec = reconstruction_residual(sd, m)
        srt = bool(np.all(np.diff(sd.lambdas) > 0))
        if bi > 1e-10 or unit > 1e-12 or rec > 1e-9 or not srt:
            return {"case": k, "matrix": m, "biorthogonality": bi, "unit_norm": unit,
                    "reconstruction": rec, "sorted": srt}
    # ball sampling stays admissible for every built-in
    for name in sorted(BUILTIN_SYSTEMS):
        system = builtin_system(name)
        for p in ball_sample(system.n, system.delta, 64):
            sd = eigendecompose(system.matrix(p), u=p)
            if biorthogonality_residual(sd) > 1e-10:
                return {"system": name, "u": p}
    return None


def cmd_verify(args, out):
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    seed = args.seed
    report = _base_report("verify", {"suite": args.suite, "seed": seed, "cases": args.cases})
    if args.suite == "riccati":
        cases = 1000 if args.cases is None else args.cases
        res = lemma_property_suite(cases, seed, nonnegative_a0=args.a0 == "nonnegative",
                                   stop_on_first=True)
        counter = res.counterexamples[0] if res.counterexamples else None
        report["result"] = {"cases_checked": res.cases, "passed": res.passed,
                            "rejected_no_global_solution": res.rejected,
                            "a0": args.a0}
    else:
        cases = {"identities": 200, "wld": 40, "spectral": 200}[args.suite] \
            if args.cases is None else args.cases
        fn = {"identities": _suite_identities, "wld": _suite_wld,
              "spectral": _suite_spectral}[args.suite]
        counter = fn(seed, cases)
        report["result"] = {"cases": cases}
    report["status"] = "pass" if counter is None else "counterexample"
    report["counterexample"] = counter
    out.write(dump_report(report))
    return EXIT_OK if counter is None else EXIT_CHECK


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="qlhyper", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qlhyper {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("analyze", help="spectral, WLD, matching and normalization checks")
    a.add_argument("--system", required=True, help="system file or built-in name")
    a.add_argument("--radius", type=float, default=None)

    pr = sub.add_parser("predict", help="sharp lifespan constant and T_pred")
    pr.add_argument("--system", required=True)
    pr.add_argument("--init", required=True, help="initial-data file or built-in shape")
    pr.add_argument("--epsilon", required=True, type=float)

    sm = sub.add_parser("simulate", help="one Cauchy-problem run with frame trace")
    sm.add_argument("--system", required=True)
    sm.add_argument("--init", required=True)
    sm.add_argument("--epsilon", required=True, type=float)
    sm.add_argument("--cells", type=int, default=2048)
    sm.add_argument("--t-end", type=float, default=None)
    sm.add_argument("--out", required=True)

    sw = sub.add_parser("sweep", help="epsilon sweep from a config document")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="property suites")
    v.add_argument("--suite", required=True)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int, default=None)
    v.add_argument("--a0", choices=("any", "nonnegative"), default="any",
                   help="sign class of a0 in the riccati suite")
    return p


COMMANDS = {"analyze": cmd_analyze, "predict": cmd_predict, "simulate": cmd_simulate,
            "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command")
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (QLHyperError, ValueError) as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
