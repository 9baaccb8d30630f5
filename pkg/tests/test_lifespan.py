import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from qlhyper.catalog import builtin_system
from qlhyper.errors import DefinitionError
from qlhyper.geometry import analyze_wld
from qlhyper.lifespan import (builtin_family, check_smallness, compute_M0, expression_family,
                              load_initial_data, predict_lifespan, psi_from_family)

GAUSS = "eps * (-x) * exp(-(x^2))"  # unary minus binds tighter than ^


def _oracle_sup_minus_dpsi():
    # sup_x (1 - 2x^2) exp(-x^2), by dense grid plus bounded scalar search
    g = lambda x: (1 - 2 * x * x) * math.exp(-x * x)
    xs = np.linspace(-4, 4, 80001)
    k = int(np.argmax([g(x) for x in xs[::100]])) * 100
    res = minimize_scalar(lambda x: -g(x), bounds=(xs[k] - 0.01, xs[k] + 0.01),
                          method="bounded", options={"xatol": 1e-12})
    return -res.fun, res.x


def test_psi_of_linear_family_is_exact():
    fam = builtin_family("gaussian-derivative")
    x = np.linspace(-3, 3, 61)
    psi, dpsi = psi_from_family(fam, x)
    assert np.array_equal(psi[0], -x * np.exp(-x * x))
    assert np.allclose(dpsi[0], (2 * x * x - 1) * np.exp(-x * x), atol=1e-15)


def test_numeric_psi_suppresses_higher_order():
    x = np.linspace(-3, 3, 61)
    fam = expression_family([GAUSS + " + eps^2 * cos(x)"], (-5, 5))
    psi, dpsi = psi_from_family(fam, x)
    assert np.allclose(psi[0], -x * np.exp(-x * x), atol=1e-8)
    assert np.allclose(dpsi[0], (2 * x * x - 1) * np.exp(-x * x), atol=1e-6)
    zero = expression_family(["0 * x"], (-1, 1))
    psi, dpsi = psi_from_family(zero, x)
    assert not np.any(psi) and not np.any(dpsi)


def test_psi_prime_matches_central_difference():
    for name in ("gaussian-derivative", "bump", "windowed-sine"):
        fam = builtin_family(name)
        lo, hi = fam.support
        x = np.linspace(lo, hi, 301)
        h = 1e-5
        fd = (fam.psi(x + h)[0] - fam.psi(x - h)[0]) / (2 * h)
        assert np.allclose(fam.psi_prime(x)[0], fd, atol=1e-8), name
        assert not np.any(fam(0.0, x))


def test_smallness_gaussian():
    rep = check_smallness(builtin_family("gaussian-derivative"), 0.1)
    # int |x| exp(-x^2) dx = 1
    assert rep.l1 == pytest.approx(0.1, rel=1e-5)  # trapezoid across the kink of abs at 0
    assert rep.M == pytest.approx(1.0, rel=1e-9)
    assert rep.K2 == pytest.approx(rep.M + 1, rel=1e-5)
    zero = check_smallness(expression_family(["0 * x"], (-1, 1)), 0.1)
    assert (zero.tv, zero.l1, zero.M) == (0.0, 0.0, 0.0)


def test_M0_burgers_matches_oracle():
    sys_ = builtin_system("burgers")
    sup, x0 = _oracle_sup_minus_dpsi()
    pred = compute_M0(sys_, analyze_wld(sys_), builtin_family("gaussian-derivative"))
    assert pred.blowup_predicted and pred.family == 0 and pred.alpha == 0
    assert pred.M0 == pytest.approx(1 / sup, rel=1e-9)
    assert abs(pred.x_star - x0) < 1e-5
    assert pred.guaranteed_scaling_exponent == 1


def test_M0_no_blowup_for_increasing_psi():
    sys_ = builtin_system("burgers")
    fam = expression_family(["eps * tanh(x)"], (-3, 3))
    pred = compute_M0(sys_, analyze_wld(sys_), fam)
    assert not pred.blowup_predicted and pred.M0 is None
    est = predict_lifespan(pred, 0.1)
    assert est.T_pred is None and "no blow-up" in est.notes[0]


def test_M0_decoupled_uses_family_one():
    sys_ = builtin_system("decoupled-pair")
    fam = builtin_family("gaussian-derivative", n=2)
    pred = compute_M0(sys_, analyze_wld(sys_), fam)
    assert pred.family == 0 and pred.M0 == pytest.approx(1.0, rel=1e-9)


def test_M0_grid_refinement():
    sys_ = builtin_system("burgers")
    wld = analyze_wld(sys_)
    for name in ("gaussian-derivative", "bump", "windowed-sine"):
        fam = builtin_family(name)
        lo, hi = fam.support
        a = compute_M0(sys_, wld, fam, grid=np.linspace(lo, hi, 1001)).M0
        b = compute_M0(sys_, wld, fam, grid=np.linspace(lo, hi, 2001)).M0
        assert abs(a - b) <= 5e-3 * b, name


@pytest.mark.parametrize("c", [0.5, 2.0, 3.7])
def test_scaling_law(c):
    for name, fams in (("burgers", None), ("wld-pair", [0])):
        sys_ = builtin_system(name)
        wld = analyze_wld(sys_)
        fam = builtin_family("gaussian-derivative", n=sys_.n)
        base = compute_M0(sys_, wld, fam, families=fams)
        scaled = compute_M0(sys_, wld, fam.with_psi_scaled(c), families=fams)
        assert base.M0 / scaled.M0 == pytest.approx(c ** (base.alpha + 1), rel=1e-10)


def test_predictions():
    sys_ = builtin_system("burgers")
    pred = compute_M0(sys_, analyze_wld(sys_), builtin_family("gaussian-derivative"))
    assert predict_lifespan(pred, 0.05).T_pred == pytest.approx(20.0, rel=1e-12)
    wld = analyze_wld(builtin_system("wld-pair"))
    pred = compute_M0(builtin_system("wld-pair"), wld,
                      builtin_family("gaussian-derivative", n=2), families=[0])
    from dataclasses import replace
    est = predict_lifespan(replace(pred, M0=1.0), 0.1)
    assert est.T_pred == pytest.approx(100.0, rel=1e-12)
    assert any("K6" in note for note in est.notes)


def test_sentinel_prediction():
    from qlhyper.dsl import build_system

    flat = build_system("flat", 1, [["1"]], ["0"])
    pred = compute_M0(flat, analyze_wld(flat), builtin_family("bump"))
    assert pred.alpha is None
    est = predict_lifespan(pred, 0.1)
    assert est.T_pred is None and "C_N" in est.notes[0]


def test_initial_data_document():
    fam, eps = load_initial_data("kind: bump\nepsilon: [0.1, 0.05]\nn: 2\ncomponent: 2\n")
    assert eps == [0.1, 0.05] and fam.n == 2
    assert fam(0.1, [0.0])[:, 0].tolist() == [0.0, 0.1]
    fam, _ = load_initial_data(f"kind: ['{GAUSS}']\nsupport: [-5, 5]\n", 1)
    assert fam(0.2, [1.0])[0, 0] == pytest.approx(-0.2 * math.exp(-1))
    with pytest.raises(DefinitionError):
        load_initial_data("kind: ['x']\n")
    with pytest.raises(DefinitionError):
        load_initial_data("kind: bump\nholder_r: 2\n")
    with pytest.raises(DefinitionError):
        builtin_family("square")
