import math

import numpy as np
import pytest

from qlhyper.catalog import builtin_system
from qlhyper.lifespan import builtin_family
from qlhyper.riccati import (RiccatiCoefficients, blows_up_before, check_blowup_lemma,
                             check_negative_branch_bound, extract_characteristic_riccati,
                             hormander_quantities, integrate_riccati, lemma_property_suite,
                             negative_branch_suite, random_polynomial_coefficients)
from qlhyper.solver import GridConfig, solve_cauchy


def test_closed_form_blowup():
    tr = integrate_riccati(RiccatiCoefficients.constant(1.0), 1.0, 2.0)
    assert tr.blew_up and abs(tr.blowup_time - 1.0) <= 1e-4


@pytest.mark.parametrize("c,z0", [(0.5, 1.0), (2.0, 0.3), (3.0, 4.0)])
def test_blowup_sharpness(c, z0):
    tr = integrate_riccati(RiccatiCoefficients.constant(c), z0, 2.0 / (c * z0))
    assert tr.blowup_time == pytest.approx(1 / (c * z0), rel=1e-3)


def test_linear_and_decaying_branches():
    tr = integrate_riccati(RiccatiCoefficients.constant(0.0, -1.0), 1.0, 1.0)
    assert tr.exists_globally
    assert np.allclose(tr.z, np.exp(-tr.t), rtol=1e-8)
    tr = integrate_riccati(RiccatiCoefficients.constant(-1.0), 1.0, 5.0)
    assert tr.exists_globally
    assert np.allclose(tr.z, 1 / (1 + tr.t), rtol=1e-8)


def test_angle_screen_agrees_with_integrator():
    rng = np.random.default_rng(4)
    for _ in range(60):
        c = random_polynomial_coefficients(rng)
        z0 = float(rng.uniform(-2, 3))
        assert blows_up_before(c, z0, 1.0) == integrate_riccati(c, z0, 1.0).blew_up


def test_K_examples():
    c = RiccatiCoefficients.polynomial([0.3], [1.0, -2.0], [0.0], T=1.0)
    assert hormander_quantities(c, 1.0, 1.0).K == 0.0
    c = RiccatiCoefficients.constant(0.0, 0.0, -0.7, T=2.0)
    assert hormander_quantities(c, 2.0, 5.0).K == pytest.approx(1.4, rel=1e-12)


def test_lemma_holds_before_closed_form_blowup():
    c = RiccatiCoefficients.constant(1.0, T=0.9)
    cert = hormander_quantities(c, 0.9, 1.0)
    assert cert.weighted_a0_integral == pytest.approx(0.9, rel=1e-12)
    assert cert.bound == 1.0 and cert.verdict == "lemma-inequality-holds"
    res = check_blowup_lemma(c, 1.0, 0.9)
    assert res.passed and res.trajectory.exists_globally


def test_not_applicable_when_z0_below_K():
    c = RiccatiCoefficients.constant(1.0, 0.0, 1.0)
    res = check_blowup_lemma(RiccatiCoefficients.constant(-1.0, 0.0, 1.0), 0.5, 1.0)
    assert res.verdict == "not-applicable" and res.passed
    assert check_blowup_lemma(c, 5.0, 1.0).verdict == "no-global-solution"


def test_signed_a0_counterexample_closed_form():
    # a0 = -2, z0 = 2: z = 2 / (1 + 4t) exists on [0, 1], yet the integral is 2 > 1/2
    c = RiccatiCoefficients.constant(-2.0)
    res = check_blowup_lemma(c, 2.0, 1.0)
    assert res.trajectory.exists_globally
    assert res.trajectory.z[-1] == pytest.approx(2 / 5, rel=1e-8)
    assert res.verdict == "lemma-inequality-fails" and not res.passed


def test_lemma_suite_nonnegative_a0():
    res = lemma_property_suite(cases=250, seed=1, nonnegative_a0=True)
    assert res.cases == 250 and res.all_passed


def test_lemma_suite_signed_a0_finds_counterexamples():
    res = lemma_property_suite(cases=200, seed=0, max_counterexamples=3)
    assert res.failed > 0 and len(res.counterexamples) == 3
    bad = res.counterexamples[0]
    c = RiccatiCoefficients.polynomial(bad["p0"], bad["p1"], bad["p2"])
    replay = check_blowup_lemma(c, bad["z0"], 1.0)
    assert replay.verdict == "lemma-inequality-fails"
    assert min(np.polynomial.polynomial.polyval(np.linspace(0, 1, 101), bad["p0"])) < 0


def test_suite_determinism():
    a = lemma_property_suite(cases=50, seed=9)
    b = lemma_property_suite(cases=50, seed=9)
    assert (a.passed, a.failed, a.rejected) == (b.passed, b.failed, b.rejected)
    assert a.counterexamples == b.counterexamples


def test_negative_branch_bound():
    res = negative_branch_suite(cases=300, seed=2)
    assert res.cases == 300 and res.all_passed
    # z0 = 0, a2 = -1: z(1) < 0 and 1/|z(1)| >= 1/K - int|a0| e^{int|a1|}
    c = RiccatiCoefficients.constant(0.1, 0.0, -1.0)
    chk = check_negative_branch_bound(c, 0.0, 1.0)
    assert chk.applicable and chk.passed and chk.z_T < 0


def test_from_samples_validation():
    with pytest.raises(ValueError):
        RiccatiCoefficients.from_samples([0, 0], [1, 1], [0, 0], [0, 0])
    with pytest.raises(ValueError):
        RiccatiCoefficients.from_samples([0, 1], [1, np.nan], [0, 0], [0, 0])
    c = RiccatiCoefficients.from_samples([1, 2, 3], [1, 2, 3], [0, 0, 0], [0, 0, 0])
    assert c.T == 2.0 and c.a0(1.5) == 2.5


@pytest.fixture(scope="module")
def burgers_run():
    sys_ = builtin_system("burgers")
    fam = builtin_family("gaussian-derivative")
    return solve_cauchy(sys_, fam, 0.1, GridConfig(cells=512), t_pred=10.0)


def test_extraction_burgers(burgers_run):
    c = extract_characteristic_riccati(burgers_run, 0, 0.3, t_stop=8.0, max_samples=40)
    s = c.samples
    assert np.allclose(s["a0"], -1.0, atol=1e-8)
    assert np.max(np.abs(s["a1"])) == 0 and np.max(np.abs(s["a2"])) == 0
    assert c.provenance.startswith("extracted-from-solution")


def test_extraction_decoupled_family_one():
    sys_ = builtin_system("decoupled-pair")
    fam = builtin_family("gaussian-derivative", n=2)
    sol = solve_cauchy(sys_, fam, 0.1, GridConfig(cells=512), t_pred=10.0)
    c = extract_characteristic_riccati(sol, 0, 0.0, t_stop=8.0, max_samples=30)
    assert np.allclose(c.samples["a0"], -1.0, atol=1e-8)
    assert np.max(np.abs(c.samples["a2"])) <= 1e-12
