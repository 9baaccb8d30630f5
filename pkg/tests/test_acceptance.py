"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting the criterion at its stated tolerance.
"""

import io
import math
import time

import numpy as np
import pytest
import yaml

from conftest import BURGERS_EPS
from qlhyper.catalog import BUILTIN_SYSTEMS, EXTRA_SYSTEMS, builtin_system, power_law_system
from qlhyper.cli import main
from qlhyper.decomposition import identity_residuals
from qlhyper.geometry import analyze_wld, check_normalized, normalize_2x2
from qlhyper.lifespan import builtin_family, compute_M0
from qlhyper.riccati import (RiccatiCoefficients, integrate_riccati, leading_term_fit,
                             lemma_property_suite)
from qlhyper.solver import GridConfig, compression_time, solve_cauchy, trace_characteristics


def _implicit_breaking_time(eps):
    """First t at which y -> y + t eps psi(y) stops being injective.

    u(t, x) = eps psi(y) with x = y + t eps psi(y) is the implicit Burgers
    solution; it stays classical while that map is strictly increasing.
    """
    y = np.linspace(-6, 6, 240001)
    psi = -y * np.exp(-y * y)

    def folded(t):
        return bool(np.any(np.diff(y + t * eps * psi) <= 0))

    lo, hi = 0.0, 1.0
    while not folded(hi):
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if folded(mid) else (mid, hi)
    return hi


def test_criterion_01_burgers_lifespan(acceptance, timed_burgers_sweep):
    sweep, elapsed = timed_burgers_sweep
    rows = {r.eps: r for r in sweep.rows}
    details, ok = [], elapsed <= 120
    for eps, tol in ((0.1, 0.10), (0.025, 0.05)):
        oracle = eps * _implicit_breaking_time(eps)
        got = rows[eps].scaled
        good = got is not None and abs(got - 1.0) <= tol and abs(got - oracle) <= tol * oracle
        ok = ok and good
        details.append(f"eps={eps}: eps*T_num={got:.4f} oracle={oracle:.6f} tol={tol:.0%}")
    details.append(f"sweep {elapsed:.1f}s")
    acceptance(1, ok, "; ".join(details))
    assert ok


def test_criterion_02_wld_index_recovery(acceptance):
    start = time.perf_counter()
    worst, exact = 0.0, True
    for alpha in range(4):
        for c in (1.0, -0.5, 2.0):
            e = analyze_wld(power_law_system(alpha, c, lam0=0.3)).entry(0)
            want = c * math.factorial(alpha + 1)
            exact = exact and e.alpha == alpha
            worst = max(worst, abs(e.leading - want) / abs(want))
    elapsed = time.perf_counter() - start
    ok = exact and worst <= 1e-3 and elapsed <= 5
    acceptance(2, ok, f"alpha exact={exact}, worst relative leading error {worst:.2e}, "
                      f"{elapsed:.2f}s")
    assert ok


def test_criterion_03_structural_identities(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = {}
    # The non-diagonal examples exercise the frame derivatives too. They are not
    # in normalized coordinates, so only the general-state identities apply.
    for name in sorted(BUILTIN_SYSTEMS) + sorted(EXTRA_SYSTEMS):
        system = builtin_system(name)
        radius = 0.4 * system.delta
        w = 0.0
        for _ in range(200):
            d = rng.normal(size=system.n)
            u = radius * rng.uniform() ** (1 / system.n) * d / np.linalg.norm(d)
            res = identity_residuals(system, u)
            if name in EXTRA_SYSTEMS:
                res = {k: v for k, v in res.items() if not k.endswith("_axis")}
            w = max(w, max(res.values()))
        worst[name] = w
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-8 and elapsed <= 30
    acceptance(3, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.1f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="the inequality fails for sign-changing a0; "
                                       "a0 = -2, z0 = 2 is an explicit counterexample")
def test_criterion_04_riccati_lemma_suite(acceptance):
    start = time.perf_counter()
    res = lemma_property_suite(1000, seed=0)
    elapsed = time.perf_counter() - start
    ok = res.passed == 1000 and res.cases == 1000 and elapsed <= 60
    first = res.counterexamples[0] if res.counterexamples else None
    note = "" if first is None else (
        f"; first counterexample attempt {first['attempt']}: z0={first['z0']:.4g}, "
        f"K={first['K']:.4g}, weighted int|a0|={first['weighted_a0_integral']:.4g} "
        f">= 1/(z0-K)={first['bound']:.4g}")
    acceptance(4, ok, f"{res.passed}/{res.cases} hold, {res.rejected} rejected "
                      f"(no global solution), {elapsed:.1f}s{note}")
    assert ok


def test_criterion_05_riccati_closed_form(acceptance):
    traj = integrate_riccati(RiccatiCoefficients.constant(1.0, T=2.0), 1.0)
    ok = traj.blew_up and abs(traj.blowup_time - 1.0) <= 1e-4
    acceptance(5, ok, f"blow-up time {traj.blowup_time!r}, tol 1e-4")
    assert ok


FLOOR = 1e-8


def _leading_deviation(name, eps, cells, window, families):
    system = builtin_system(name)
    wld = analyze_wld(system)
    family = builtin_family("gaussian-derivative", n=system.n)
    pred = compute_M0(system, wld, family, families=families)
    T = pred.M0 * eps ** -(pred.alpha + 1)
    e = wld.entry(pred.family)
    sol = solve_cauchy(system, family, eps, GridConfig(cells=cells, window=window),
                       t_end=0.8 * T)
    fit = leading_term_fit(sol, pred.family, pred.x_star, e.alpha, e.leading, t_stop=0.8 * T)
    return fit.max_deviation


@pytest.mark.parametrize("name, eps, window, families", [
    ("burgers", 0.1, None, None),
    ("wld-pair", 0.4, (-5.5, 5.5), [0]),
])
def test_criterion_06_leading_term(acceptance, name, eps, window, families):
    coarse, fine = (_leading_deviation(name, eps, m, window, families) for m in (1024, 2048))
    at_floor = max(coarse, fine) <= FLOOR
    ratio = fine / coarse if coarse > 0 else 0.0
    ok = at_floor or ratio <= 0.6
    how = f"both at round-off floor (<= {FLOOR:g})" if at_floor else f"ratio {ratio:.3f}"
    acceptance(6, ok, f"{name}: max deviation {coarse:.3e} (1024) -> {fine:.3e} (2048), {how}")
    assert ok


@pytest.mark.parametrize("name", ["constant-symmetric", "p-system"])
def test_criterion_07_normalized_coordinates(acceptance, name):
    normalized, _ = normalize_2x2(builtin_system(name))
    res = check_normalized(normalized, s_max=0.8 * normalized.delta, tol=1e-6)
    worst = max(res.residuals)
    acceptance(7, res.passed, f"{name}: worst residual {worst:.2e}, tol 1e-6")
    assert res.passed


def test_criterion_08_scaled_estimates(acceptance, burgers_sweep):
    W = [r.W1_over_eps for r in burgers_sweep.rows]
    U = [r.U_inf_over_eps for r in burgers_sweep.rows]
    spread_W, spread_U = max(W) / min(W), max(U) / min(U)
    ok = spread_W <= 2 and spread_U <= 2
    acceptance(8, ok, f"W1/eps spread {spread_W:.3f}, U_inf/eps spread {spread_U:.3f}, "
                      f"over eps {BURGERS_EPS}")
    assert ok


def test_criterion_09_compression(acceptance, burgers_sweep):
    worst = max(abs(r.compression_time - r.T_num) / r.T_num for r in burgers_sweep.rows)
    ok = worst <= 0.10
    detail = ", ".join(f"eps={r.eps}: {r.compression_time:.3f} vs {r.T_num:.3f}"
                       for r in burgers_sweep.rows)
    acceptance(9, ok, f"{detail}; worst relative gap {worst:.3f}")
    assert ok


def test_criterion_09_independent_trace(burgers, burgers_prediction):
    # the sweep's compression time agrees with a direct trace of the same run
    family, pred = burgers_prediction
    sol = solve_cauchy(burgers, family, 0.1, GridConfig(cells=2048), t_pred=10.0)
    t, _ = compression_time(trace_characteristics(sol, [0], [pred.x_star]))
    assert t == pytest.approx(9.5, abs=0.5)


def _cli(argv):
    out = io.StringIO()
    code = main(argv, out, io.StringIO())
    return code, out.getvalue()


def test_criterion_10_determinism(acceptance, tmp_path):
    cfg = tmp_path / "burgers.yaml"
    cfg.write_text(yaml.safe_dump({"system": "burgers", "init": "gaussian-derivative",
                                   "epsilon": [0.1, 0.05], "cells": 1024}))
    commands = {
        "analyze": ["analyze", "--system", "wld-pair"],
        "predict": ["predict", "--system", "burgers", "--init", "gaussian-derivative",
                    "--epsilon", "0.05"],
        "verify": ["verify", "--suite", "riccati", "--seed", "3", "--cases", "200"],
    }
    mismatched = []
    for name, argv in commands.items():
        if _cli(argv) != _cli(argv):
            mismatched.append(name)
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        _cli(["sweep", "--config", str(cfg), "--out", str(out)])
        sim = tmp_path / f"sim{k}"
        _cli(["simulate", "--system", "burgers", "--init", "bump", "--epsilon", "0.1",
              "--cells", "512", "--out", str(sim)])
        files = sorted(out.iterdir()) + sorted(sim.iterdir())
        outputs.append({f"{f.parent.name[:3]}/{f.name}": f.read_bytes() for f in files})
    a, b = outputs
    if a.keys() != b.keys():
        mismatched.append("file sets")
    mismatched += [k for k in a if k in b and a[k] != b[k]]
    ok = not mismatched
    acceptance(10, ok, f"{len(commands)} reports and {len(a)} files compared; "
                       f"mismatches: {mismatched or 'none'}")
    assert ok
