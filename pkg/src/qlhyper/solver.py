"""Finite-difference solution of the Cauchy problem up to gradient blow-up.

The semi-discrete operator is

    L(u) = -A(u) D0 u + B(u) - (kappa / dx) R diag(a) L delta4 u

with D0 the centered first difference, delta4 the undivided fourth
difference and a_i = max_x |lambda_i| frozen per step, so each field is
damped at its own speed; Heun's predictor-corrector advances it in time.
For n = 1 the damping reduces to kappa (max|lambda| / dx) delta4 u.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .errors import CharacteristicError, DomainError, QLHyperError, SolverError
from .spectral import batch_eigen, origin_frame

THREADS_ENV = "QLHYPER_THREADS"


@dataclass(frozen=True)
class GridConfig:
    """Discretization and stopping controls.

    ``window=None`` uses the data support, padded by max|lambda| * t_end
    (capped at ``pad_cap`` support widths) unless the run is periodic. The
    speed is taken over families whose projected data is nonzero.
    ``t_end=None`` means ``t_end_factor`` times the predicted lifespan.
    """

    cells: int = 2048
    window: tuple | None = None
    periodic: bool | None = None
    cfl: float = 0.4
    dissipation: float = 0.01
    t_end: float | None = None
    t_end_factor: float = 3.0
    threshold_factor: float = 50.0  # blow-up threshold max|w| >= factor / dx
    resolution_limit: float = 1.0 / 3.0  # max neighbour jump of w relative to max|w|
    rate_cap: float = 0.05  # dt * max|d lambda / dx| bound
    max_frames: int = 2000
    pad_cap: float = 2.0


@dataclass
class SolutionField:
    system: object
    eps: float
    config: GridConfig
    x: np.ndarray
    dx: float
    periodic: bool
    t: np.ndarray  # stored frame times
    u: np.ndarray  # (frames, n, cells)
    v: np.ndarray
    w: np.ndarray
    step_t: np.ndarray  # per accepted step, including t = 0
    step_dt: np.ndarray
    step_max_w: np.ndarray
    stop_reason: str
    family_name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.u.shape[1]

    @property
    def t_final(self):
        return float(self.t[-1])


def _ghost(u, periodic, g=2):
    if periodic:
        return np.concatenate([u[:, -g:], u, u[:, :g]], axis=1)
    return np.concatenate([np.repeat(u[:, :1], g, axis=1), u, np.repeat(u[:, -1:], g, axis=1)],
                          axis=1)


def _d0(ug, dx):
    return (ug[:, 3:-1] - ug[:, 1:-3]) / (2 * dx)


def _delta4(ug):
    return ug[:, :-4] - 4 * ug[:, 1:-3] + 6 * ug[:, 2:-2] - 4 * ug[:, 3:-1] + ug[:, 4:]


def _operator(system, u, dx, periodic, damp, mats=None):
    ug = _ghost(u, periodic)
    ux = _d0(ug, dx)
    mats = system.matrix(u) if mats is None else mats
    out = -np.einsum("mij,jm->im", mats, ux) - np.einsum("mij,jm->im", damp, _delta4(ug))
    if not system.homogeneous:
        out = out + system.source(u)
    return out


def _frame_quantities(system, u, dx, periodic, anchor):
    mats = system.matrix(u)
    lam, R, L = batch_eigen(mats, anchor)
    ux = _d0(_ghost(u, periodic), dx)
    v = np.einsum("mij,jm->im", L, u)
    w = np.einsum("mij,jm->im", L, ux)
    return lam, v, w, mats, R, L


def _resolve_window(system, family, eps, cfg, t_end, periodic):
    if cfg.window is not None:
        lo, hi = map(float, cfg.window)
    else:
        lo, hi = map(float, family.support)
        if not periodic:
            probe = np.linspace(lo, hi, 513)
            u0 = family(eps, probe)
            lam, _, L = batch_eigen(system.matrix(u0))
            # only families that carry data leave the support at leading order
            amp = np.max(np.abs(np.einsum("mij,jm->im", L, u0)), axis=1)
            active = amp > 1e-12 * max(float(amp.max()), 1e-300)
            if not np.any(active):
                active[:] = True
            speed = float(np.max(np.abs(lam[:, active])))
            pad = min(speed * t_end, cfg.pad_cap * (hi - lo))
            lo, hi = lo - pad, hi + pad
    if not hi > lo:
        raise SolverError(f"empty window [{lo}, {hi}]")
    return lo, hi


def solve_cauchy(system, family, eps, config: GridConfig = GridConfig(), t_end=None,
                 t_pred=None) -> SolutionField:
    """Evolve u(0, x) = f(eps, x) until blow-up, under-resolution or ``t_end``.

    Stop reasons: ``"horizon"``, ``"blowup-threshold"`` (max|w| >= factor/dx),
    ``"under-resolved"`` (neighbouring w values differ by more than
    ``resolution_limit`` * max|w|) and ``"step-collapse"`` (dt < 1e-12 t_end).
    """
    cfg = config
    if family.n != system.n:
        raise SolverError(f"initial data has {family.n} components, system has n={system.n}")
    t_end = t_end if t_end is not None else cfg.t_end
    if t_end is None:
        if t_pred is None or not math.isfinite(t_pred):
            raise SolverError("need t_end or a finite predicted lifespan")
        t_end = cfg.t_end_factor * t_pred
    t_end = float(t_end)
    periodic = family.periodic if cfg.periodic is None else bool(cfg.periodic)
    lo, hi = _resolve_window(system, family, eps, cfg, t_end, periodic)
    M = int(cfg.cells)
    if M < 8:
        raise SolverError("need at least 8 cells")
    dx = (hi - lo) / M
    x = lo + (np.arange(M) + 0.5) * dx

    u = np.asarray(family(eps, x), dtype=float).reshape(system.n, M)
    half = system.delta / 2
    if np.max(np.linalg.norm(u, axis=0)) > half:
        raise DomainError(f"eps={eps:g}: |u(0, x)| exceeds delta/2 = {half:g}")
    anchor = origin_frame(system).right
    threshold = cfg.threshold_factor / dx
    dt_min = 1e-12 * t_end
    frame_gap = t_end / max(cfg.max_frames - 1, 1)

    frames_t, frames_u, frames_v, frames_w = [], [], [], []
    step_t, step_dt, step_w = [], [], []
    t = 0.0
    last_stored_t, last_stored_w = -np.inf, 0.0
    reason = "horizon"
    step = 0
    while True:
        lam, v, w, mats, R, L = _frame_quantities(system, u, dx, periodic, anchor)
        wn = np.linalg.norm(w, axis=0)
        max_w = float(wn.max())
        jump = float(np.max(np.abs(np.diff(w, axis=1)))) if M > 1 else 0.0
        if periodic:
            jump = max(jump, float(np.max(np.abs(w[:, 0] - w[:, -1]))))
        under = max_w > 0 and jump > cfg.resolution_limit * max_w
        if under and step == 0:
            raise SolverError(f"initial data under-resolved on {M} cells (grid too coarse)")
        if max_w >= threshold:
            reason = "blowup-threshold"
        elif under:
            reason = "under-resolved"
        stop = reason != "horizon" or t >= t_end * (1 - 1e-14)

        step_t.append(t)
        step_w.append(max_w)
        grow = max_w > 1.1 * last_stored_w
        if stop or t >= last_stored_t + frame_gap or grow or step == 0:
            frames_t.append(t)
            frames_u.append(u.copy())
            frames_v.append(v)
            frames_w.append(w)
            last_stored_t, last_stored_w = t, max_w
        if stop:
            break

        a = float(np.max(np.abs(lam)))
        dlam = np.abs(_d0(_ghost(lam.T, periodic), dx))
        rate = float(dlam.max()) if dlam.size else 0.0
        dt = cfg.cfl * dx / a if a > 0 else t_end
        if rate > 0:
            dt = min(dt, cfg.rate_cap / rate)
        if dt < dt_min:
            reason = "step-collapse"
            if frames_t[-1] != t:
                frames_t.append(t)
                frames_u.append(u.copy())
                frames_v.append(v)
                frames_w.append(w)
            break
        dt = min(dt, t_end - t)
        speeds = np.max(np.abs(lam), axis=0)
        damp = (cfg.dissipation / dx) * ((R * speeds) @ L)
        k1 = _operator(system, u, dx, periodic, damp, mats)
        up = u + dt * k1
        k2 = _operator(system, up, dx, periodic, damp)
        u = u + 0.5 * dt * (k1 + k2)
        if not np.all(np.isfinite(u)):
            raise SolverError(f"non-finite state at t={t + dt:.6g}")
        if np.max(np.linalg.norm(u, axis=0)) > system.delta:
            raise DomainError(f"state left the validity ball at t={t + dt:.6g}")
        t += dt
        step += 1
        step_dt.append(dt)

    step_dt.append(0.0)
    return SolutionField(
        system=system, eps=float(eps), config=cfg, x=x, dx=dx, periodic=periodic,
        t=np.array(frames_t), u=np.array(frames_u), v=np.array(frames_v),
        w=np.array(frames_w), step_t=np.array(step_t), step_dt=np.array(step_dt),
        step_max_w=np.array(step_w), stop_reason=reason,
        family_name=getattr(family, "name", ""),
        meta={"window": (lo, hi), "t_end": t_end, "threshold": threshold, "steps": step},
    )


# ----------------------------------------------------------------------------
# blow-up time
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupEstimate:
    observed: bool
    T_num: float | None
    uncertainty: float | None
    growth: float
    points: int


def detect_blowup(t, max_w, min_growth=10.0) -> BlowupEstimate:
    """Root of a least-squares line through 1/max|w| over the final decade.

    The uncertainty propagates the fit's residual covariance to the root
    (0 when only two points are used).
    """
    t = np.asarray(t, dtype=float)
    mw = np.asarray(max_w, dtype=float)
    if len(t) < 2 or not np.all(np.isfinite(mw)) or mw[-1] <= 0:
        return BlowupEstimate(False, None, None, 1.0, 0)
    start = mw[0] if mw[0] > 0 else mw[mw > 0][0]
    growth = float(mw[-1] / start)
    if growth < min_growth:
        return BlowupEstimate(False, None, None, growth, 0)
    sel = mw >= mw[-1] / 10
    ts, ys = t[sel], 1.0 / mw[sel]
    if len(ts) < 2:
        sel = np.zeros_like(sel)
        sel[-2:] = True
        ts, ys = t[sel], 1.0 / mw[sel]
    X = np.column_stack([ts, np.ones_like(ts)])
    coef, *_ = np.linalg.lstsq(X, ys, rcond=None)
    slope, icpt = coef
    if not slope < 0:
        return BlowupEstimate(False, None, None, growth, int(len(ts)))
    T = float(-icpt / slope)
    unc = 0.0
    if len(ts) > 2:
        resid = ys - X @ coef
        s2 = float(resid @ resid) / (len(ts) - 2)
        cov = s2 * np.linalg.inv(X.T @ X)
        grad = np.array([icpt / slope ** 2, -1.0 / slope])
        unc = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    return BlowupEstimate(True, T, unc, growth, int(len(ts)))


def solution_blowup(solution: SolutionField, min_growth=10.0) -> BlowupEstimate:
    return detect_blowup(solution.step_t, solution.step_max_w, min_growth)


# ----------------------------------------------------------------------------
# interpolation and characteristics
# ----------------------------------------------------------------------------

def _cubic_weights(s):
    # Lagrange weights for nodes -1, 0, 1, 2 at offset s in [0, 1)
    return np.stack([
        -s * (s - 1) * (s - 2) / 6,
        (s + 1) * (s - 1) * (s - 2) / 2,
        -(s + 1) * s * (s - 2) / 2,
        (s + 1) * s * (s - 1) / 6,
    ])


def interpolate_x(solution, field_values, xq):
    """Cubic interpolation of ``field_values`` (n, cells) at points ``xq``."""
    xq = np.asarray(xq, dtype=float)
    M = len(solution.x)
    x0, dx = solution.x[0], solution.dx
    if solution.periodic:
        period = M * dx
        xq = (xq - x0) % period + x0
    elif np.any(xq < solution.x[0] - 1e-12) or np.any(xq > solution.x[-1] + 1e-12):
        raise CharacteristicError("characteristic left the computational window")
    pos = (xq - x0) / dx
    m = np.floor(pos).astype(int)
    s = pos - m
    idx = m[None, :] + np.arange(-1, 3)[:, None]
    idx = idx % M if solution.periodic else np.clip(idx, 0, M - 1)
    wts = _cubic_weights(s)
    return np.einsum("kp,nkp->np", wts, field_values[:, idx])


def _frame_bracket(solution, t):
    k = int(np.searchsorted(solution.t, t, side="right") - 1)
    k = min(max(k, 0), len(solution.t) - 2)
    t0, t1 = solution.t[k], solution.t[k + 1]
    theta = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
    return k, min(max(theta, 0.0), 1.0)


def interpolate_tx(solution, stack, t, xq):
    """Linear in t between stored frames of ``stack`` (frames, n, cells), cubic in x."""
    if len(solution.t) == 1:
        return interpolate_x(solution, stack[0], xq)
    k, th = _frame_bracket(solution, t)
    a = interpolate_x(solution, stack[k], xq)
    if th == 0.0:
        return a
    b = interpolate_x(solution, stack[k + 1], xq)
    return (1 - th) * a + th * b


def _gradient_frames(solution):
    cache = solution.meta.get("_ux")
    if cache is None:
        cache = np.array([_d0(_ghost(u, solution.periodic), solution.dx) for u in solution.u])
        solution.meta["_ux"] = cache
    return cache


def sample_along(solution, t, x):
    """States u and gradients u_x at the space-time points (t_p, x_p)."""
    ux_frames = _gradient_frames(solution)
    states, grads = [], []
    for tp, xp in zip(np.atleast_1d(t), np.atleast_1d(x)):
        states.append(interpolate_tx(solution, solution.u, tp, [xp])[:, 0])
        grads.append(interpolate_tx(solution, ux_frames, tp, [xp])[:, 0])
    return np.array(states), np.array(grads)


@dataclass(frozen=True)
class CharacteristicCurve:
    family: int
    y: float
    t: np.ndarray
    x: np.ndarray
    states: np.ndarray  # (len(t), n)
    v: np.ndarray
    w: np.ndarray
    k: np.ndarray  # d x / d y by differencing neighbouring curves


def _speeds(solution, i, t, xs, anchor):
    u = interpolate_tx(solution, solution.u, t, xs)
    lam, _, _ = batch_eigen(solution.system.matrix(u), anchor)
    return lam[:, i]


def trace_characteristics(solution, families, launch_points, dy=None, t_stop=None):
    """Curves dx/dt = lambda_i(u(t, x)) from (0, y) through the stored field.

    Classical RK4 between stored frames; the Jacobian k uses curves launched
    at y -+ dy (default dx / 4).
    """
    if len(solution.t) < 4:
        raise CharacteristicError("need at least 4 stored frames to trace characteristics")
    dy = solution.dx / 4 if dy is None else float(dy)
    t_stop = solution.t_final if t_stop is None else min(float(t_stop), solution.t_final)
    times = solution.t[solution.t <= t_stop]
    if times[-1] < t_stop:
        times = np.append(times, t_stop)
    anchor = origin_frame(solution.system).right
    curves = []
    for i in families:
        ys = np.asarray(launch_points, dtype=float)
        xs = np.concatenate([ys, ys - dy, ys + dy])
        path = [xs.copy()]
        for t0, t1 in zip(times[:-1], times[1:]):
            h_total = t1 - t0
            speed = np.max(np.abs(_speeds(solution, i, t0, xs, anchor)))
            sub = max(1, int(math.ceil(speed * h_total / (0.5 * solution.dx))))
            h = h_total / sub
            tt = t0
            for _ in range(sub):
                k1 = _speeds(solution, i, tt, xs, anchor)
                k2 = _speeds(solution, i, tt + h / 2, xs + h / 2 * k1, anchor)
                k3 = _speeds(solution, i, tt + h / 2, xs + h / 2 * k2, anchor)
                k4 = _speeds(solution, i, tt + h, xs + h * k3, anchor)
                xs = xs + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                tt += h
            path.append(xs.copy())
        path = np.array(path)
        P = len(ys)
        for p, y in enumerate(ys):
            xc = path[:, p]
            k = (path[:, 2 * P + p] - path[:, P + p]) / (2 * dy)
            u = np.array([interpolate_tx(solution, solution.u, tk, [xk])[:, 0]
                          for tk, xk in zip(times, xc)])
            v = np.array([interpolate_tx(solution, solution.v, tk, [xk])[:, 0]
                          for tk, xk in zip(times, xc)])
            w = np.array([interpolate_tx(solution, solution.w, tk, [xk])[:, 0]
                          for tk, xk in zip(times, xc)])
            curves.append(CharacteristicCurve(int(i), float(y), times.copy(), xc, u, v, w, k))
    return curves


def compression_time(curve_or_curves, level=0.05, tail=8):
    """First time min k reaches ``level``.

    When the stored trace ends above ``level`` the last ``tail`` samples of
    min k are extrapolated linearly; returns ``(time, extrapolated)``.
    """
    curves = curve_or_curves if isinstance(curve_or_curves, (list, tuple)) else [curve_or_curves]
    t = curves[0].t
    kmin = np.min(np.array([c.k for c in curves]), axis=0)
    below = np.nonzero(kmin <= level)[0]
    if len(below):
        j = int(below[0])
        if j == 0:
            return float(t[0]), False
        t0, t1, k0, k1 = t[j - 1], t[j], kmin[j - 1], kmin[j]
        return float(t0 + (level - k0) * (t1 - t0) / (k1 - k0)), False
    m = min(tail, len(t))
    slope, icpt = np.polyfit(t[-m:], kmin[-m:], 1)
    if not slope < 0:
        return None, True
    return float((level - icpt) / slope), True


# ----------------------------------------------------------------------------
# functionals
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalTrace:
    """Per-frame monitors; sup-type entries are running sups over [0, t]."""

    t: np.ndarray
    U_inf: np.ndarray
    V_inf: np.ndarray
    W_inf: np.ndarray
    V1: np.ndarray
    W1: np.ndarray
    Q_V: np.ndarray
    Q_W: np.ndarray
    Q_VW: np.ndarray
    min_k: np.ndarray
    max_w: np.ndarray
    V1_tilde: float | None = None  # lower-bound estimates from tracked curves only
    W1_tilde: float | None = None

    COLUMNS = ("t", "U_inf", "V_inf", "W_inf", "V1", "W1", "Q_V", "Q_W", "Q_VW",
               "min_k", "max_w")

    def at(self, name, time):
        """Value of a column at the last frame not after ``time``."""
        k = int(np.searchsorted(self.t, time, side="right") - 1)
        return float(getattr(self, name)[max(k, 0)])


def _cross(a, b):
    # sum_{j != k} |a_j| |b_k| per grid point
    aa, bb = np.abs(a), np.abs(b)
    return aa.sum(axis=0) * bb.sum(axis=0) - (aa * bb).sum(axis=0)


def monitor_functionals(solution: SolutionField, curves=None) -> FunctionalTrace:
    dx = solution.dx
    U = np.linalg.norm(solution.u, axis=1).max(axis=1)
    V = np.linalg.norm(solution.v, axis=1).max(axis=1)
    W = np.linalg.norm(solution.w, axis=1).max(axis=1)
    V1 = np.linalg.norm(solution.v, axis=1).sum(axis=1) * dx
    W1 = np.linalg.norm(solution.w, axis=1).sum(axis=1) * dx
    qv = np.array([_cross(v, v).sum() * dx for v in solution.v])
    qw = np.array([_cross(w, w).sum() * dx for w in solution.w])
    qvw = np.array([_cross(v, w).sum() * dx for v, w in zip(solution.v, solution.w)])

    def accumulate(q):
        dt = np.diff(solution.t)
        return np.concatenate([[0.0], np.cumsum(0.5 * dt * (q[1:] + q[:-1]))])

    min_k = np.full(len(solution.t), np.nan)
    vt = wt = None
    if curves:
        kk = np.min(np.array([c.k for c in curves]), axis=0)
        ct = curves[0].t
        for m, tm in enumerate(solution.t):
            if tm <= ct[-1] + 1e-15:
                min_k[m] = float(np.interp(tm, ct, kk))
        n = solution.n
        if n > 1:
            vals_v, vals_w = [], []
            for c in curves:
                for i in range(n):
                    if i == c.family:
                        continue
                    vals_v.append(float(trapezoid(np.abs(c.v[:, i]), c.t)))
                    vals_w.append(float(trapezoid(np.abs(c.w[:, i]), c.t)))
            vt, wt = (max(vals_v), max(vals_w)) if vals_v else (None, None)
    run = np.maximum.accumulate
    return FunctionalTrace(solution.t.copy(), run(U), run(V), run(W), run(V1), run(W1),
                           accumulate(qv), accumulate(qw), accumulate(qvw), min_k, W, vt, wt)


# ----------------------------------------------------------------------------
# epsilon sweeps
# ----------------------------------------------------------------------------

@dataclass
class SweepRow:
    eps: float
    T_num: float | None = None
    uncertainty: float | None = None
    scaled: float | None = None  # eps^(alpha+1) * T_num
    T_pred: float | None = None
    ratio: float | None = None  # T_num / T_pred
    W1_over_eps: float | None = None
    U_inf_over_eps: float | None = None
    compression_time: float | None = None
    compression_extrapolated: bool | None = None
    stop_reason: str | None = None
    steps: int | None = None
    error: str | None = None


@dataclass
class SweepResult:
    rows: list
    alpha: int | None
    M0: float | None
    extrapolated_limit: float | None
    traces: list = field(default_factory=list)  # FunctionalTrace per row, None on error


def thread_count():
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise QLHyperError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_single(system, family, eps, config, alpha=None, M0=None, launch=None,
               keep_solution=False):
    """One sweep row: solve, estimate T_num, sample the diagnostics."""
    row = SweepRow(float(eps))
    a = 0 if alpha is None else alpha
    T_pred = M0 * eps ** -(a + 1) if M0 is not None else None
    row.T_pred = T_pred
    sol = solve_cauchy(system, family, eps, config, t_pred=T_pred)
    est = solution_blowup(sol)
    row.stop_reason = sol.stop_reason
    row.steps = sol.meta["steps"]
    curves = None
    if launch is not None and len(sol.t) >= 4:
        fam_idx, ys = launch
        curves = trace_characteristics(sol, [fam_idx], ys)
    trace = monitor_functionals(sol, curves)
    if est.observed:
        row.T_num = est.T_num
        row.uncertainty = est.uncertainty
        row.scaled = eps ** (a + 1) * est.T_num
        if T_pred:
            row.ratio = est.T_num / T_pred
        T_diag = min(0.9 * est.T_num, sol.t_final)
    else:
        T_diag = sol.t_final
    row.W1_over_eps = trace.at("W1", T_diag) / eps
    row.U_inf_over_eps = trace.at("U_inf", T_diag) / eps
    if curves:
        ct, extrap = compression_time(curves)
        row.compression_time = ct
        row.compression_extrapolated = extrap
    if keep_solution:
        return row, sol, trace, curves
    return row, None, trace, curves


def epsilon_sweep(system, family, eps_list, config: GridConfig = GridConfig(), alpha=None,
                  M0=None, launch=None, workers=None) -> SweepResult:
    """Independent runs per eps; a failing eps records its error and the sweep continues."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("empty epsilon list")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon list must be strictly descending")
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilon values must be positive")

    def one(e):
        try:
            row, _, trace, _ = run_single(system, family, e, config, alpha, M0, launch)
            return row, trace
        except QLHyperError as exc:
            row = SweepRow(e)
            row.error = f"{type(exc).__name__}: {exc}"
            return row, None

    workers = thread_count() if workers is None else int(workers)
    if workers > 1 and len(eps_list) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(eps_list))) as pool:
            results = list(pool.map(one, eps_list))
    else:
        results = [one(e) for e in eps_list]
    rows = [r for r, _ in results]
    traces = [t for _, t in results]
    good = [r for r in rows if r.scaled is not None]
    limit = None
    if len(good) >= 2:
        e = np.array([r.eps for r in good])
        s = np.array([r.scaled for r in good])
        slope, icpt = np.polyfit(e, s, 1)
        limit = float(icpt)
    return SweepResult(rows, alpha, M0, limit, traces)


# ----------------------------------------------------------------------------
# CSV output
# ----------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_frame_trace_csv(path, trace: FunctionalTrace):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(trace.COLUMNS)
        for m in range(len(trace.t)):
            wr.writerow([_fmt(getattr(trace, c)[m]) for c in trace.COLUMNS])


SWEEP_COLUMNS = ("eps", "T_num", "uncertainty", "scaled", "T_pred", "ratio", "W1_over_eps",
                 "U_inf_over_eps", "compression_time", "stop_reason", "error")


def write_sweep_csv(path, result: SweepResult):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SWEEP_COLUMNS)
        for r in result.rows:
            wr.writerow([_fmt(getattr(r, c)) for c in SWEEP_COLUMNS])
