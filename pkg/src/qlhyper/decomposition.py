"""John's decomposition of waves: projected variables and interaction coefficients.

Index convention for the coefficient tensors: ``beta[i, j, k]`` etc., all
0-based. With ``P[i, j, k] = l_i (grad r_j) r_k`` and
``Lr[j, k] = (grad lambda_j) r_k``:

* beta_ijk        = (lambda_k - lambda_i) P_ijk
* nu_ijk          = -P_ijk
* gamma_ijk       = (lambda_k - lambda_j) P_ijk - Lr_jk delta_ij
* sigma_ijk       = P_ikj - P_ijk
* beta~_ijk       = beta_ijk + Lr_ik delta_ij
* gamma~_ijk      = gamma_ijk + (Lr_jk delta_ij + Lr_kj delta_ik) / 2
* b~_ik           = (grad b_i) r_k
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, QLHyperError
from .numdiff import gradient
from .spectral import spectral_data


@dataclass(frozen=True)
class ProjectedState:
    v: np.ndarray
    w: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class CoefficientTensors:
    u: np.ndarray
    lambdas: np.ndarray
    right: np.ndarray
    left: np.ndarray
    b: np.ndarray
    grad_lambda: np.ndarray  # [j, m] = d lambda_j / d u_m
    P: np.ndarray  # [i, j, k] = l_i (grad r_j) r_k
    beta: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    beta_tilde: np.ndarray
    gamma_tilde: np.ndarray
    b_tilde: np.ndarray
    h: float


def project(system, u, u_x) -> ProjectedState:
    """v = L u, w = L u_x, b = L B(u) with the frame at ``u``."""
    u = np.asarray(u, dtype=float)
    sd = spectral_data(system, u)
    return ProjectedState(sd.left @ u, sd.left @ np.asarray(u_x, dtype=float),
                          sd.left @ system.source(u))


class _FrameFlip(QLHyperError):
    pass


def _stencil_function(system, center):
    n = system.n

    def func(x):
        sd = spectral_data(system, x, anchor=center)
        overlap = np.einsum("ki,ki->i", sd.right, center.right)
        if np.any(overlap < 0.9):
            raise _FrameFlip()
        return np.concatenate([sd.right.ravel(), sd.lambdas, sd.left @ system.source(x)])

    return func, n


def decomposition_coefficients(system, u, h=None) -> CoefficientTensors:
    """Assemble all interaction coefficients at ``u``.

    Gradients of r_j, lambda_j and b_i come from central differences with
    step ``h`` (default ``1e-5 * max(1, |u|)``) and one Richardson step,
    on frames anchored to the frame at ``u``.
    """
    u = np.asarray(u, dtype=float)
    n = system.n
    if h is None:
        h = 1e-5 * max(1.0, float(np.linalg.norm(u)))
    if np.linalg.norm(u) + n * h > system.delta:
        raise DomainError(f"state {u.tolist()} too close to the validity boundary")
    center = spectral_data(system, u)
    func, _ = _stencil_function(system, center)
    step = h
    for attempt in range(2):
        try:
            jac = gradient(func, u, step)
            break
        except _FrameFlip:
            step = step / 4
    else:
        raise QLHyperError(f"eigenvector frame flips inside the stencil at u={u.tolist()}")

    R, L, lam = center.right, center.left, center.lambdas
    grad_R = jac[: n * n].reshape(n, n, n)  # [a, j, m]
    grad_lambda = jac[n * n: n * n + n]  # [j, m]
    grad_b = jac[n * n + n:]  # [i, m]
    b = L @ system.source(u)

    D = np.einsum("ajm,mk->ajk", grad_R, R)  # (grad r_j) r_k, component a
    P = np.einsum("ia,ajk->ijk", L, D)
    Lr = grad_lambda @ R  # [j, k]
    eye = np.eye(n)
    beta = (lam[None, None, :] - lam[:, None, None]) * P
    nu = -P
    gamma = (lam[None, None, :] - lam[None, :, None]) * P - np.einsum("jk,ij->ijk", Lr, eye)
    sigma = np.transpose(P, (0, 2, 1)) - P
    beta_tilde = beta + np.einsum("ik,ij->ijk", Lr, eye)
    gamma_tilde = gamma + 0.5 * (np.einsum("jk,ij->ijk", Lr, eye)
                                 + np.einsum("kj,ik->ijk", Lr, eye))
    b_tilde = grad_b @ R
    return CoefficientTensors(u, lam, R, L, b, grad_lambda, P, beta, nu, gamma, sigma,
                              beta_tilde, gamma_tilde, b_tilde, step)


@dataclass(frozen=True)
class Sources:
    F: np.ndarray
    G: np.ndarray
    F_tilde: np.ndarray
    G_tilde: np.ndarray


def evaluate_sources(system, u, u_x, coefficients=None) -> Sources:
    """Right-hand sides of the transport equations for v and w."""
    c = decomposition_coefficients(system, u) if coefficients is None else coefficients
    v = c.left @ np.asarray(u, dtype=float)
    w = c.left @ np.asarray(u_x, dtype=float)
    b = c.b
    bx = c.b_tilde @ w
    nub = np.einsum("ijk,j,k->i", c.nu, v, b)
    sigb = np.einsum("ijk,j,k->i", c.sigma, w, b)
    F = np.einsum("ijk,j,k->i", c.beta, v, w) + nub + b
    G = np.einsum("ijk,j,k->i", c.gamma, w, w) + sigb + bx
    Ft = np.einsum("ijk,j,k->i", c.beta_tilde, v, w) + nub + b
    Gt = np.einsum("ijk,j,k->i", c.gamma_tilde, w, w) + sigb + bx
    return Sources(F, G, Ft, Gt)


def identity_residuals(system, u, h=None) -> dict:
    """Largest violation of each structural identity at ``u`` and its axis points."""
    u = np.asarray(u, dtype=float)
    n = system.n
    c = decomposition_coefficients(system, u, h)
    off = ~np.eye(n, dtype=bool)
    ii = np.arange(n)
    out = {
        "beta_iji": float(np.max(np.abs(c.beta[ii[:, None], ii[None, :], ii[:, None]]))),
        "gamma_tilde_ijj": float(np.max(np.abs(c.gamma_tilde[ii[:, None], ii[None, :], ii[None, :]]))),
    }
    g_ijj = np.abs(c.gamma[ii[:, None], ii[None, :], ii[None, :]])
    bt_iji = np.abs(c.beta_tilde[ii[:, None], ii[None, :], ii[:, None]])
    out["gamma_ijj"] = float(np.max(g_ijj[off])) if n > 1 else 0.0
    out["beta_tilde_iji"] = float(np.max(bt_iji[off])) if n > 1 else 0.0

    axis = {"beta_ijj_axis": 0.0, "nu_ijj_axis": 0.0, "sigma_ijj_axis": 0.0,
            "beta_tilde_ijj_axis": 0.0, "b_tilde_axis": 0.0, "gamma_iii_axis": 0.0}
    for j in range(n):
        a = np.zeros(n)
        a[j] = u[j]
        ca = decomposition_coefficients(system, a, h)
        axis["beta_ijj_axis"] = max(axis["beta_ijj_axis"], float(np.max(np.abs(ca.beta[:, j, j]))))
        axis["nu_ijj_axis"] = max(axis["nu_ijj_axis"], float(np.max(np.abs(ca.nu[:, j, j]))))
        axis["sigma_ijj_axis"] = max(axis["sigma_ijj_axis"], float(np.max(np.abs(ca.sigma[:, j, j]))))
        others = [i for i in range(n) if i != j]
        if others:
            axis["beta_tilde_ijj_axis"] = max(axis["beta_tilde_ijj_axis"],
                                              float(np.max(np.abs(ca.beta_tilde[others, j, j]))))
        axis["b_tilde_axis"] = max(axis["b_tilde_axis"], float(np.max(np.abs(ca.b_tilde[:, j]))))
        axis["gamma_iii_axis"] = max(axis["gamma_iii_axis"],
                                     abs(float(ca.gamma[j, j, j] + ca.grad_lambda[j, j])))
    out.update(axis)
    return out


@dataclass(frozen=True)
class ExpansionReport:
    """Quadratic vanishing of b_i(u) off the axes.

    ``ratios`` maps the distance-to-axis scale t to the largest
    |b(u)| / sum_{j<k} |u_j||u_k| among states at that scale.
    """

    passed: bool
    C: float
    worst_ratio: float
    ratios: dict


def matching_expansion_check(system, samples=64, radius=None, seed=0,
                             growth_limit=10.0) -> ExpansionReport:
    """Test |b_i(u)| <= C sum_{j<k} |u_j||u_k| on sampled states.

    Bulk states come from a seeded uniform sample of the ball; further states
    approach each coordinate axis at distances 1e-1, 1e-2, 1e-3 (relative to
    ``radius``). The check fails when the ratio grows by more than
    ``growth_limit`` between the farthest and nearest approach.
    """
    n = system.n
    radius = 0.5 * system.delta if radius is None else float(radius)
    if n == 1:
        return ExpansionReport(True, 0.0, 0.0, {})
    rng = np.random.default_rng(seed)

    def b_and_pairs(u):
        sd = spectral_data(system, u)
        b = np.linalg.norm(sd.left @ system.source(u))
        a = np.abs(u)
        pairs = (a.sum() ** 2 - (a ** 2).sum()) / 2
        return b, pairs

    bulk = []
    while len(bulk) < samples:
        p = rng.uniform(-radius, radius, n)
        if np.linalg.norm(p) <= radius:
            bulk.append(p)
    bs, ds = zip(*(b_and_pairs(p) for p in bulk))
    bs, ds = np.array(bs), np.array(ds)
    C = float(np.dot(bs, ds) / np.dot(ds, ds)) if np.any(ds > 0) else 0.0
    worst = float(np.max(bs / np.maximum(ds, 1e-300)))

    ratios = {}
    directions = rng.normal(size=(8, n))
    for t in (1e-1, 1e-2, 1e-3):
        level = 0.0
        for k in range(n):
            for d in directions:
                pos = 0.5 * radius * np.sign(d[k] or 1.0)
                u = t * radius * d / np.linalg.norm(d)
                u[k] = pos
                b, pairs = b_and_pairs(u)
                level = max(level, b / pairs if pairs > 0 else (0.0 if b == 0 else np.inf))
        ratios[t] = float(level)
        worst = max(worst, float(level))
    far, near = ratios[1e-1], ratios[1e-3]
    passed = bool(np.isfinite(near) and near <= growth_limit * max(far, 1e-300) or near == 0.0)
    return ExpansionReport(passed, C, worst, ratios)
