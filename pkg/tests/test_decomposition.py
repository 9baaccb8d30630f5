import math

import numpy as np
import pytest

from qlhyper.catalog import BUILTIN_SYSTEMS, builtin_system
from qlhyper.decomposition import (decomposition_coefficients, evaluate_sources,
                                   identity_residuals, matching_expansion_check, project)
from qlhyper.dsl import build_system
from qlhyper.errors import DomainError


def test_project_examples():
    p = project(builtin_system("decoupled-pair"), [0.1, 0.2], [1.0, -1.0])
    assert np.allclose(p.v, [0.1, 0.2]) and np.allclose(p.w, [1, -1])
    p = project(builtin_system("matched-source"), [0, 0], [0, 0])
    assert not np.any(p.v) and not np.any(p.w) and not np.any(p.b)
    p = project(builtin_system("constant-symmetric"), [0.1, 0.0], [0, 0])
    assert np.allclose(p.v, [0.1 / math.sqrt(2)] * 2, atol=1e-15)


def test_reconstruction():
    rng = np.random.default_rng(2)
    system = builtin_system("p-system")
    for _ in range(20):
        u = rng.uniform(-0.15, 0.15, 2)
        ux = rng.normal(size=2)
        c = decomposition_coefficients(system, u)
        p = project(system, u, ux)
        assert np.allclose(c.right @ p.v, u, atol=1e-9)
        assert np.allclose(c.right @ p.w, ux, atol=1e-9)
        assert np.allclose(c.right @ p.b, system.source(u), atol=1e-9)


def test_burgers_coefficients():
    c = decomposition_coefficients(builtin_system("burgers"), [0.1])
    assert c.beta[0, 0, 0] == 0 and c.nu[0, 0, 0] == 0
    assert c.gamma[0, 0, 0] == pytest.approx(-1, abs=1e-10)
    assert c.gamma_tilde[0, 0, 0] == pytest.approx(0, abs=1e-10)
    c = decomposition_coefficients(builtin_system("decoupled-pair"), [0.0, 0.0])
    assert c.gamma[0, 0, 0] == pytest.approx(-1, abs=1e-10)


def test_tilde_consistency():
    system = builtin_system("p-system")
    c = decomposition_coefficients(system, [0.05, -0.08])
    Lr = c.grad_lambda @ c.right
    n = 2
    for i in range(n):
        for j in range(n):
            for k in range(n):
                want = c.beta[i, j, k] + Lr[i, k] * (i == j)
                assert abs(c.beta_tilde[i, j, k] - want) <= 1e-9
                want = c.gamma[i, j, k] + 0.5 * (Lr[j, k] * (i == j) + Lr[k, j] * (i == k))
                assert abs(c.gamma_tilde[i, j, k] - want) <= 1e-9


def test_sources_examples():
    s = evaluate_sources(builtin_system("p-system"), [0.05, 0.02], [0.0, 0.0])
    assert np.array_equal(s.G, [0.0, 0.0])
    s = evaluate_sources(builtin_system("decoupled-pair"), [0.0, 0.0], [0.3, -0.2])
    assert np.array_equal(s.F, [0.0, 0.0])
    w = 0.7
    s = evaluate_sources(builtin_system("burgers"), [0.1], [w])
    assert s.G[0] == pytest.approx(-w * w, rel=1e-6)


def test_identity_residual_examples():
    res = identity_residuals(builtin_system("decoupled-pair"), [0.01, 0.02])
    assert max(res.values()) <= 1e-8
    res = identity_residuals(builtin_system("burgers"), [0.05])
    assert res["gamma_iii_axis"] <= 1e-8
    res = identity_residuals(builtin_system("wld-pair"), [0.1, -0.05])
    assert res["b_tilde_axis"] == 0.0


@pytest.mark.parametrize("name", sorted(BUILTIN_SYSTEMS) + ["p-system"])
def test_general_state_identities(name):
    # beta_iji, gamma_tilde_ijj, gamma_ijj, beta_tilde_iji hold at any state
    system = builtin_system(name)
    rng = np.random.default_rng(7)
    general = ("beta_iji", "gamma_tilde_ijj", "gamma_ijj", "beta_tilde_iji")
    for _ in range(10):
        d = rng.normal(size=system.n)
        u = 0.3 * system.delta * d / np.linalg.norm(d) * rng.uniform()
        res = identity_residuals(system, u)
        assert max(res[k] for k in general) <= 1e-8, res


def test_boundary_margin():
    with pytest.raises(DomainError):
        decomposition_coefficients(builtin_system("burgers"), [0.5])


def test_expansion_examples():
    rep = matching_expansion_check(builtin_system("matched-source"))
    assert rep.passed and rep.C == pytest.approx(1.0, rel=0.2)
    hom = matching_expansion_check(builtin_system("decoupled-pair"))
    assert hom.passed and hom.worst_ratio == 0.0
    bad = build_system("bad", 2, [["u1", "0"], ["0", "1 + u2"]], ["u1", "0"])
    assert not matching_expansion_check(bad).passed


def test_gamma_derivative_matches_leading_coefficient():
    # (1/alpha!) d^alpha gamma_iii / du_i^alpha (0) = -(1/alpha!) d^(alpha+1) lambda_i (0)
    system = builtin_system("wld-pair")
    h = 1e-3
    g = [decomposition_coefficients(system, [s, 0.0]).gamma[0, 0, 0] for s in (-h, h)]
    assert (g[1] - g[0]) / (2 * h) == pytest.approx(-2.0, rel=1e-2)
