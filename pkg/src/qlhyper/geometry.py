"""Characteristic trajectories through u = 0 and the structure built on them.

Family indices are 0-based here; reports print them 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ClassificationError, DefinitionError, DomainError
from .numdiff import central_offsets, fd_weights, richardson
from .spectral import assemble_matrix, eigendecompose, origin_frame, spectral_data

TRAJECTORY_TOL = 1e-10
L_MAX_DEFAULT = 4


@dataclass(frozen=True)
class Trajectory:
    """Integral curve du/ds = r_i(u), u(0) = 0, sampled at ``s``."""

    family: int
    s: np.ndarray
    states: np.ndarray  # shape (len(s), n)
    lambdas: np.ndarray  # lambda_i along the curve


def _flow(system, i, start, t, tol, anchor):
    """Integrate du/ds = r_i(u) from ``start`` for parameter time ``t``."""
    start = np.asarray(start, dtype=float)
    if t == 0:
        return start.copy()

    def rhs(_s, u):
        return spectral_data(system, u, anchor).right[:, i]

    def leave(_s, u):
        return system.delta - np.linalg.norm(u)

    leave.terminal = True
    sol = solve_ivp(rhs, (0.0, t), start, method="DOP853", rtol=tol, atol=tol,
                    events=leave)
    if sol.status == 1:
        raise DomainError(f"family {i + 1} flow left the validity ball |u| <= {system.delta}")
    if sol.status != 0:
        raise DomainError(f"family {i + 1} flow failed: {sol.message}")
    return sol.y[:, -1]


def integrate_rarefaction_trajectory(system, i, s_max, tol=TRAJECTORY_TOL, s=None):
    """Integrate the i-th characteristic trajectory in both directions from 0.

    ``s`` gives the sample parameters (default 41 points on [-s_max, s_max]).
    """
    if not 0 <= i < system.n:
        raise ValueError(f"family index {i} out of range for n={system.n}")
    if s_max > 0.5 * system.delta + 1e-15:
        raise DomainError(f"s_max={s_max} exceeds 0.5*delta={0.5 * system.delta}")
    s = np.linspace(-s_max, s_max, 41) if s is None else np.asarray(s, dtype=float)
    anchor = origin_frame(system)

    def rhs(_s, u):
        r = spectral_data(system, u, anchor).right[:, i]
        return r

    def leave(_s, u):
        return system.delta - np.linalg.norm(u)

    leave.terminal = True
    states = np.zeros((len(s), system.n))
    for sign in (1.0, -1.0):
        mask = (s * sign) > 0
        if not np.any(mask):
            continue
        targets = s[mask]
        order = np.argsort(np.abs(targets))
        sol = solve_ivp(rhs, (0.0, sign * s_max), np.zeros(system.n), method="DOP853",
                        rtol=tol, atol=tol, t_eval=targets[order], events=leave)
        if sol.status == 1:
            raise DomainError(f"trajectory {i + 1} left the validity ball")
        if sol.status != 0:
            raise DomainError(f"trajectory {i + 1} integration failed: {sol.message}")
        block = np.empty((len(targets), system.n))
        block[order] = sol.y.T
        states[mask] = block
    lambdas = np.array([spectral_data(system, u, anchor).lambdas[i] for u in states])
    return Trajectory(i, s, states, lambdas)


# ----------------------------------------------------------------------------
# weak linear degeneracy
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class WldEntry:
    """Index of one family. ``alpha is None`` is the ">= l_max" sentinel."""

    family: int
    alpha: int | None
    leading: float | None  # d^(alpha+1) lambda_i(u^(i)(s)) / ds^(alpha+1) at 0
    derivatives: tuple  # orders 1 .. l_max+1
    threshold: float
    l_max: int

    @property
    def degenerate(self) -> bool:
        return self.alpha is None

    def alpha_label(self) -> str:
        return f">={self.l_max}" if self.alpha is None else str(self.alpha)


@dataclass(frozen=True)
class WldReport:
    entries: tuple
    l_max: int = L_MAX_DEFAULT

    @property
    def J(self) -> tuple:
        return tuple(e.family for e in self.entries if e.alpha is not None)

    @property
    def alpha(self) -> int | None:
        finite = [e.alpha for e in self.entries if e.alpha is not None]
        return min(finite) if finite else None

    @property
    def J1(self) -> tuple:
        a = self.alpha
        return tuple(e.family for e in self.entries if a is not None and e.alpha == a)

    def entry(self, i) -> WldEntry:
        return self.entries[i]

    def restricted(self, families) -> "WldReport":
        """Copy in which families outside ``families`` are treated as degenerate."""
        keep = set(families)
        entries = tuple(e if e.family in keep else replace(e, alpha=None, leading=None)
                        for e in self.entries)
        return WldReport(entries, self.l_max)


def compute_wld_index(system, i, l_max=L_MAX_DEFAULT, s_max=None, h=None,
                      tol=1e-12) -> WldEntry:
    """Order of the first non-vanishing derivative of lambda_i along u^(i)(s).

    Derivatives of orders 1 .. l_max+1 come from second-order central
    differences at steps h and h/2 combined by one Richardson step. A
    derivative counts as zero when
    ``|d| <= max(1e-6, 1e-4 * max_m |d_m|)``.
    """
    if not 0 <= l_max <= 6:
        raise ValueError("l_max must lie in 0..6")
    top = l_max + 1
    p_max = (top + 1) // 2
    s_max = 0.25 * system.delta if s_max is None else float(s_max)
    h = s_max / p_max if h is None else float(h)
    half = h / 2
    ks = np.arange(-2 * p_max, 2 * p_max + 1)
    traj = integrate_rarefaction_trajectory(system, i, p_max * h, tol=tol, s=ks * half)
    lam = dict(zip(ks.tolist(), traj.lambdas))

    coarse, fine = [], []
    for order in range(1, top + 1):
        offs = central_offsets(order)
        w = fd_weights(offs, order)
        coarse.append(sum(wk * lam[2 * k] for wk, k in zip(w, offs)) / h ** order)
        fine.append(sum(wk * lam[k] for wk, k in zip(w, offs)) / half ** order)
    coarse = np.array(coarse)
    fine = np.array(fine)
    best = richardson(coarse, fine)
    threshold = max(1e-6, 1e-4 * float(np.max(np.abs(best))))

    alpha = None
    leading = None
    for order in range(1, top + 1):
        k = order - 1
        if abs(fine[k] - coarse[k]) > 10 * threshold and abs(fine[k] - coarse[k]) > 1e-3 * abs(best[k]):
            raise ClassificationError(
                f"family {i + 1}: order-{order} derivative unstable "
                f"(h: {coarse[k]:.6g}, h/2: {fine[k]:.6g})")
        if abs(best[k]) > threshold:
            alpha = order - 1
            leading = float(best[k])
            break
    return WldEntry(i, alpha, leading, tuple(float(b) for b in best), threshold, l_max)


def analyze_wld(system, l_max=L_MAX_DEFAULT, **kwargs) -> WldReport:
    return WldReport(tuple(compute_wld_index(system, i, l_max, **kwargs)
                           for i in range(system.n)), l_max)


# ----------------------------------------------------------------------------
# matching condition and normalized coordinates
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    passed: bool
    residuals: tuple  # per family
    worst_family: int
    worst_s: float
    tol: float
    extra: dict = field(default_factory=dict)


def check_matching(system, s_max=None, tol=1e-10, samples=41) -> CheckResult:
    """Largest |B| along each characteristic trajectory through 0."""
    s_max = 0.25 * system.delta if s_max is None else float(s_max)
    s = np.linspace(-s_max, s_max, samples)
    residuals, worst_s = [], []
    for i in range(system.n):
        traj = integrate_rarefaction_trajectory(system, i, s_max, s=s)
        mag = np.linalg.norm(system.source(traj.states.T), axis=0)
        k = int(np.argmax(mag))
        residuals.append(float(mag[k]))
        worst_s.append(float(s[k]))
    worst = int(np.argmax(residuals))
    return CheckResult(max(residuals) <= tol, tuple(residuals), worst, worst_s[worst], tol)


def check_normalized(system, s_max=None, tol=1e-8, samples=21) -> CheckResult:
    """Largest |r_i(x e_i) - e_i| for |x| <= s_max; also checks r_i(0), l_i(0)."""
    s_max = 0.25 * system.delta if s_max is None else float(s_max)
    n = system.n
    eye = np.eye(n)
    anchor = origin_frame(system)
    origin_res = max(float(np.max(np.abs(anchor.right - eye))),
                     float(np.max(np.abs(anchor.left - eye))))
    xs = np.linspace(-s_max, s_max, samples)
    residuals, worst_s = [], []
    for i in range(n):
        res = []
        for x in xs:
            u = x * eye[i]
            r = spectral_data(system, u, anchor).right[:, i]
            res.append(float(np.linalg.norm(r - eye[i])))
        k = int(np.argmax(res))
        residuals.append(res[k])
        worst_s.append(float(xs[k]))
    worst = int(np.argmax(residuals))
    passed = max(residuals) <= tol and origin_res <= tol
    return CheckResult(passed, tuple(residuals), worst, worst_s[worst], tol,
                       {"origin_residual": origin_res})


# ----------------------------------------------------------------------------
# 2x2 normalization by flow composition
# ----------------------------------------------------------------------------

class NormalizingMap:
    """u = Phi(w): flow along r_1 for time w_1 from 0, then along r_2 for w_2.

    Both characteristic trajectories through 0 become coordinate axes in the
    ``w`` variables. The inverse is computed by Newton's method seeded from a
    precomputed grid.
    """

    def __init__(self, system, s_max, grid_points=9, tol=1e-12, fd_step=1e-6):
        if system.n != 2:
            raise DefinitionError(f"normalize_2x2 needs n = 2, got n = {system.n}")
        self.system = system
        self.s_max = float(s_max)
        self.tol = tol
        self.fd_step = fd_step
        self.anchor = origin_frame(system)
        g = np.linspace(-self.s_max, self.s_max, grid_points)
        self.grid = np.array([(a, b) for a in g for b in g])
        self.grid_images = np.array([self.forward(p) for p in self.grid])
        dets = np.array([np.linalg.det(self.jacobian(p)) for p in self.grid])
        if np.any(dets <= 0) or dets.min() < 1e-6 * dets.max():
            raise DomainError("flow-composition map is not invertible on the requested ball")
        self.min_det = float(dets.min())

    def _r(self, u, i):
        return spectral_data(self.system, u, self.anchor).right[:, i]

    def _forward_with_tangent(self, w):
        w = np.asarray(w, dtype=float)
        p = _flow(self.system, 0, np.zeros(2), w[0], self.tol, self.anchor)
        v0 = self._r(p, 0)
        if w[1] == 0:
            return p, v0, self._r(p, 1)
        h = self.fd_step

        def rhs(_s, y):
            x, v = y[:2], y[2:]
            nv = np.linalg.norm(v)
            vh = v / nv
            dr = (self._r(x + h * vh, 1) - self._r(x - h * vh, 1)) / (2 * h)
            return np.concatenate([self._r(x, 1), nv * dr])

        sol = solve_ivp(rhs, (0.0, w[1]), np.concatenate([p, v0]), method="DOP853",
                        rtol=self.tol, atol=self.tol)
        if sol.status != 0:
            raise DomainError(f"flow along r_2 failed: {sol.message}")
        x, v = sol.y[:2, -1], sol.y[2:, -1]
        if np.linalg.norm(x) > self.system.delta:
            raise DomainError("normalizing map left the validity ball")
        return x, v, self._r(x, 1)

    def forward(self, w) -> np.ndarray:
        return self._forward_with_tangent(w)[0]

    def jacobian(self, w) -> np.ndarray:
        _, c1, c2 = self._forward_with_tangent(w)
        return np.column_stack([c1, c2])

    def inverse(self, u, iterations=30) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        k = int(np.argmin(np.linalg.norm(self.grid_images - u, axis=1)))
        w = self.grid[k].copy()
        for _ in range(iterations):
            x, c1, c2 = self._forward_with_tangent(w)
            step = np.linalg.solve(np.column_stack([c1, c2]), u - x)
            w = w + step
            if np.linalg.norm(step) < 1e-13:
                break
        else:
            raise DomainError(f"Newton inversion did not converge at u={u.tolist()}")
        return w


@dataclass(frozen=True)
class NormalizedSystem:
    """System expressed in normalized variables of a :class:`NormalizingMap`."""

    name: str
    mapping: NormalizingMap
    delta: float
    n: int = 2

    @property
    def homogeneous(self) -> bool:
        return self.mapping.system.homogeneous

    def matrix(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.ndim > 1:
            flat = w.reshape(2, -1).T
            out = np.array([self.matrix(p) for p in flat])
            return out.reshape(w.shape[1:] + (2, 2))
        x, c1, c2 = self.mapping._forward_with_tangent(w)
        J = np.column_stack([c1, c2])
        return np.linalg.solve(J, self.mapping.system.matrix(x) @ J)

    def source(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.ndim > 1:
            flat = w.reshape(2, -1).T
            out = np.array([self.source(p) for p in flat]).T
            return out.reshape((2,) + w.shape[1:])
        x, c1, c2 = self.mapping._forward_with_tangent(w)
        J = np.column_stack([c1, c2])
        return np.linalg.solve(J, self.mapping.system.source(x))


def normalize_2x2(system, s_max=None, grid_points=9):
    """Build normalized coordinates for a strictly hyperbolic 2x2 system.

    Returns ``(normalized_system, mapping)``; the normalized system is valid
    on the ball of radius ``s_max`` in the new variables.
    """
    if system.n != 2:
        raise DefinitionError(f"normalize_2x2 needs n = 2, got n = {system.n}")
    s_max = 0.25 * system.delta if s_max is None else float(s_max)
    eigendecompose(assemble_matrix(system, np.zeros(2)))
    mapping = NormalizingMap(system, s_max, grid_points=grid_points)
    return NormalizedSystem(f"{system.name}-normalized", mapping, s_max), mapping


def axis_partial(system, i, order, h=None, s_max=None):
    """d^order lambda_i / du_i^order at 0 by central differences along the u_i axis."""
    s_max = 0.25 * system.delta if s_max is None else s_max
    p = (order + 1) // 2
    h = s_max / p if h is None else h
    anchor = origin_frame(system)
    e = np.eye(system.n)[i]

    def lam(x):
        return spectral_data(system, x * e, anchor).lambdas[i]

    offs = central_offsets(order)
    w = fd_weights(offs, order)
    coarse = sum(wk * lam(k * h) for wk, k in zip(w, offs)) / h ** order
    fine = sum(wk * lam(k * h / 2) for wk, k in zip(w, offs)) / (h / 2) ** order
    return float(richardson(coarse, fine))

