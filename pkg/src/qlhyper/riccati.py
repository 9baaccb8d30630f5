"""Riccati equations along characteristics and blow-up certification.

dz/dt = a0(t) z^2 + a1(t) z + a2(t)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import CharacteristicError, DomainError, StiffnessError

BLOWUP_LEVEL = 1e8
QUAD_TOL = 1e-10


def _horner(coeffs):
    c = tuple(float(v) for v in coeffs)[::-1]

    def p(t):
        acc = c[0]
        for v in c[1:]:
            acc = acc * t + v
        return acc

    return p


def _real_roots(coeffs, lo, hi):
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if len(c) < 2:
        return []
    r = np.polynomial.polynomial.polyroots(c)
    r = r[np.abs(r.imag) < 1e-12].real
    return sorted(float(x) for x in r if lo < x < hi)


@dataclass(frozen=True)
class RiccatiCoefficients:
    """Coefficient functions on [0, T] and where they came from.

    ``breakpoints`` lists interior points where |a_k| may have kinks (sign
    changes, sample nodes); quadrature splits there.
    """

    a0: Callable
    a1: Callable
    a2: Callable
    T: float
    provenance: str = "synthetic"
    breakpoints: tuple = ((), (), ())
    samples: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def constant(cls, c0, c1=0.0, c2=0.0, T=1.0):
        c0, c1, c2 = float(c0), float(c1), float(c2)
        return cls(lambda t: c0, lambda t: c1, lambda t: c2, float(T))

    @classmethod
    def polynomial(cls, p0, p1, p2, T=1.0, nonnegative_a0=False):
        """Coefficients as power-series coefficient lists (lowest degree first)."""
        fs = [_horner(p) for p in (p0, p1, p2)]
        if nonnegative_a0:
            f0 = fs[0]
            fs[0] = lambda t: abs(f0(t))
        bps = tuple(tuple(_real_roots(p, 0.0, T)) for p in (p0, p1, p2))
        return cls(fs[0], fs[1], fs[2], float(T), "synthetic", bps,
                   {"p0": list(map(float, p0)), "p1": list(map(float, p1)),
                    "p2": list(map(float, p2)), "nonnegative_a0": bool(nonnegative_a0)})

    @classmethod
    def from_samples(cls, t, a0, a1, a2, provenance="sampled"):
        """Piecewise-linear interpolation of sampled coefficients."""
        t = np.asarray(t, dtype=float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing, at least two")
        arrs = [np.asarray(a, dtype=float) for a in (a0, a1, a2)]
        if any(a.shape != t.shape for a in arrs):
            raise ValueError("coefficient samples must match the time samples")
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise ValueError("coefficient samples must be finite")
        fs = [lambda s, a=a: float(np.interp(s, t - t[0], a)) for a in arrs]
        nodes = tuple(float(s) for s in (t[1:-1] - t[0]))
        return cls(fs[0], fs[1], fs[2], float(t[-1] - t[0]), provenance,
                   (nodes, nodes, nodes),
                   {"t": t, "a0": arrs[0], "a1": arrs[1], "a2": arrs[2]})


@dataclass(frozen=True)
class RiccatiTrajectory:
    t: np.ndarray
    z: np.ndarray
    blowup_time: float | None
    t_max: float

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None

    @property
    def exists_globally(self) -> bool:
        return self.blowup_time is None


def _fit_root(t, z):
    inv = 1.0 / np.abs(z)
    slope, icpt = np.polyfit(t, inv, 1)
    if slope >= 0:
        return float(t[-1])
    return float(-icpt / slope)


def integrate_riccati(c: RiccatiCoefficients, z0, t_max=None, tol=1e-10) -> RiccatiTrajectory:
    """Adaptive integration with blow-up detection at |z| = 1e8.

    The blow-up time is refined by a linear fit of 1/|z| over the last decade
    of growth (1e7 <= |z| <= 1e8), extrapolated to 0.
    """
    t_max = c.T if t_max is None else float(t_max)
    a0, a1, a2 = c.a0, c.a1, c.a2

    def rhs(t, y):
        z = y[0]
        return [a0(t) * z * z + a1(t) * z + a2(t)]

    def hit(_t, y):
        return abs(y[0]) - BLOWUP_LEVEL

    hit.terminal = True

    def decade(_t, y):
        return abs(y[0]) - BLOWUP_LEVEL / 10

    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(rhs, (0.0, t_max), [float(z0)], method="DOP853", rtol=tol,
                        atol=tol * 1e-2, events=[hit, decade], dense_output=True)
    t, z = sol.t, sol.y[0]
    if sol.status == 1:
        tb = float(sol.t_events[0][0])
        starts = [s for s in sol.t_events[1] if s < tb]
        ta = float(starts[-1]) if starts else float(t[max(len(t) - 5, 0)])
        ts = np.linspace(ta, tb, 33)
        zs = sol.sol(ts)[0]
        return RiccatiTrajectory(t, z, _fit_root(ts, zs), t_max)
    if sol.status == -1:
        tail = np.abs(z[-min(len(z), 8):])
        if len(tail) >= 3 and tail[-1] > 1e4 and np.all(np.diff(tail) > 0):
            return RiccatiTrajectory(t, z, _fit_root(t[-len(tail):], z[-len(tail):]), t_max)
        raise StiffnessError(f"Riccati integration failed at t={t[-1]:.6g} "
                             f"without blow-up growth: {sol.message}")
    return RiccatiTrajectory(t, z, None, t_max)


def blows_up_before(c: RiccatiCoefficients, z0, T=None, tol=1e-10) -> bool:
    """Existence test in the angle variable theta = arctan z.

    theta' = a0 sin^2 + a1 sin cos + a2 cos^2 is bounded, so the flow never
    stiffens; z blows up exactly when theta reaches +-pi/2.
    """
    T = c.T if T is None else float(T)
    a0, a1, a2 = c.a0, c.a1, c.a2

    def rhs(t, y):
        s, co = math.sin(y[0]), math.cos(y[0])
        return [a0(t) * s * s + a1(t) * s * co + a2(t) * co * co]

    def edge(_t, y):
        return abs(y[0]) - 0.5 * math.pi

    edge.terminal = True
    sol = solve_ivp(rhs, (0.0, T), [math.atan(float(z0))], method="DOP853", rtol=tol,
                    atol=tol * 1e-2, events=edge)
    return sol.status == 1


def _abs_integral(f, T, points):
    pts = [p for p in points if 0 < p < T] or None
    val, _ = quad(lambda s: abs(f(s)), 0.0, T, epsabs=QUAD_TOL, epsrel=QUAD_TOL,
                  limit=400, points=pts)
    return float(val)


@dataclass(frozen=True)
class BlowupCertificate:
    """K, the weighted a0 integral and the lemma verdict on [0, T]."""

    T: float
    z0: float
    K: float
    int_a0: float
    int_a1: float
    int_a2: float
    weighted_a0_integral: float
    verdict: str  # "lemma-inequality-holds" | "lemma-inequality-fails" | "not-applicable"

    @property
    def bound(self) -> float:
        """(z0 - K)^-1, or inf when not applicable."""
        return 1.0 / (self.z0 - self.K) if self.z0 > self.K else math.inf


def hormander_quantities(c: RiccatiCoefficients, T=None, z0=0.0) -> BlowupCertificate:
    T = c.T if T is None else float(T)
    I0 = _abs_integral(c.a0, T, c.breakpoints[0])
    I1 = _abs_integral(c.a1, T, c.breakpoints[1])
    I2 = _abs_integral(c.a2, T, c.breakpoints[2])
    K = I2 * math.exp(I1)
    weighted = I0 * math.exp(-I1)
    z0 = float(z0)
    if z0 <= K:
        verdict = "not-applicable"
    elif weighted < 1.0 / (z0 - K):
        verdict = "lemma-inequality-holds"
    else:
        verdict = "lemma-inequality-fails"
    return BlowupCertificate(T, z0, K, I0, I1, I2, weighted, verdict)


@dataclass(frozen=True)
class LemmaCheck:
    passed: bool
    verdict: str  # certificate verdict, or "no-global-solution"
    certificate: BlowupCertificate | None
    trajectory: RiccatiTrajectory | None  # None when the angle screen saw blow-up


def check_blowup_lemma(c: RiccatiCoefficients, z0, T=None) -> LemmaCheck:
    """Decide existence first; when the solution exists on [0, T] and z0 > K test the lemma."""
    T = c.T if T is None else float(T)
    if blows_up_before(c, z0, T):
        return LemmaCheck(True, "no-global-solution", None, None)
    traj = integrate_riccati(c, z0, T)
    if traj.blew_up:
        return LemmaCheck(True, "no-global-solution", None, traj)
    cert = hormander_quantities(c, T, z0)
    return LemmaCheck(cert.verdict != "lemma-inequality-fails", cert.verdict, cert, traj)


@dataclass(frozen=True)
class DuhamelCheck:
    applicable: bool
    passed: bool
    z_T: float
    lower_bound: float  # K^-1 - int|a0| exp(int|a1|)


def check_negative_branch_bound(c: RiccatiCoefficients, z0, T=None) -> DuhamelCheck:
    """|z(T)|^-1 >= K^-1 - int|a0| exp(int|a1|) when z(T) < 0 and the right side is positive.

    Only meaningful for z0 >= 0: the negative value at T must then have been
    produced by the forcing a2, which is what K measures.
    """
    T = c.T if T is None else float(T)
    if z0 < 0 or blows_up_before(c, z0, T):
        return DuhamelCheck(False, True, float("nan"), float("nan"))
    traj = integrate_riccati(c, z0, T)
    if traj.blew_up:
        return DuhamelCheck(False, True, float("nan"), float("nan"))
    cert = hormander_quantities(c, T, z0)
    zT = float(traj.z[-1])
    rhs = (1.0 / cert.K if cert.K > 0 else math.inf) - cert.int_a0 * math.exp(cert.int_a1)
    if not (zT < 0 and rhs > 0):
        return DuhamelCheck(False, True, zT, rhs)
    return DuhamelCheck(True, bool(1.0 / abs(zT) >= rhs * (1 - 1e-9)), zT, rhs)


# ----------------------------------------------------------------------------
# randomized property suite
# ----------------------------------------------------------------------------

def random_polynomial_coefficients(rng, degree=3, bound=2.0, nonnegative_a0=False,
                                   T=1.0) -> RiccatiCoefficients:
    """Degree-<=3 polynomials with coefficients uniform in [-bound, bound]."""
    p = rng.uniform(-bound, bound, size=(3, degree + 1))
    return RiccatiCoefficients.polynomial(p[0], p[1], p[2], T, nonnegative_a0)


@dataclass(frozen=True)
class PropertySuiteResult:
    cases: int
    passed: int
    failed: int
    rejected: int
    counterexamples: list

    @property
    def all_passed(self) -> bool:
        return self.failed == 0


def lemma_property_suite(cases=1000, seed=0, nonnegative_a0=False, z0_spread=3.0,
                         max_counterexamples=20, stop_on_first=False) -> PropertySuiteResult:
    """Randomized check of the lemma inequality.

    Each attempt draws coefficients and ``z0 = K + U(0, z0_spread)`` from its
    own stream ``SeedSequence(seed, attempt)``; attempts whose solution blows
    up on [0, 1] are rejected and do not count.
    """
    passed = failed = rejected = 0
    bad = []
    attempt = 0
    while passed + failed < cases:
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        attempt += 1
        c = random_polynomial_coefficients(rng, nonnegative_a0=nonnegative_a0)
        cert0 = hormander_quantities(c, 1.0, 0.0)
        z0 = cert0.K + rng.uniform(0.0, z0_spread)
        if z0 <= cert0.K:
            rejected += 1
            continue
        try:
            res = check_blowup_lemma(c, z0, 1.0)
        except StiffnessError:
            rejected += 1
            continue
        if res.verdict == "no-global-solution":
            rejected += 1
            continue
        if res.passed:
            passed += 1
        else:
            failed += 1
            if len(bad) < max_counterexamples:
                cert = res.certificate
                bad.append({"attempt": attempt - 1, "seed": seed, **c.samples, "z0": z0,
                            "K": cert.K, "weighted_a0_integral": cert.weighted_a0_integral,
                            "bound": cert.bound})
            if stop_on_first:
                break
    return PropertySuiteResult(passed + failed, passed, failed, rejected, bad)


def negative_branch_suite(cases=500, seed=0, z0_max=0.25, bound=0.5) -> PropertySuiteResult:
    """Randomized check of the negative-branch lower bound (z0 in [0, z0_max]).

    The bound is only informative when K^-1 > int|a0| exp(int|a1|), which
    needs small coefficients; draws where the right side is not positive are
    rejected before integrating.
    """
    passed = failed = rejected = 0
    bad = []
    attempt = 0
    while passed + failed < cases:
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        attempt += 1
        c = random_polynomial_coefficients(rng, bound=bound)
        z0 = rng.uniform(0.0, z0_max)
        cert = hormander_quantities(c, 1.0, z0)
        if cert.K > 0 and 1.0 / cert.K <= cert.int_a0 * math.exp(cert.int_a1):
            rejected += 1
            continue
        try:
            res = check_negative_branch_bound(c, z0, 1.0)
        except StiffnessError:
            rejected += 1
            continue
        if not res.applicable:
            rejected += 1
            continue
        if res.passed:
            passed += 1
        else:
            failed += 1
            if len(bad) < 20:
                bad.append({"attempt": attempt - 1, "seed": seed, **c.samples, "z0": z0,
                            "z_T": res.z_T, "lower_bound": res.lower_bound})
    return PropertySuiteResult(passed + failed, passed, failed, rejected, bad)


# ----------------------------------------------------------------------------
# coefficients along a computed characteristic
# ----------------------------------------------------------------------------

def _terms(i, c, c_axis, w):
    """(a0, a1, a2) for family i from tensors at u and at the axis point u_i e_i."""
    n = len(w)
    g, s, bt, b = c.gamma, c.sigma, c.b_tilde, c.b
    a0 = g[i, i, i]
    others = [j for j in range(n) if j != i]
    a1 = sum((g[i, i, j] + g[i, j, i]) * w[j] for j in others)
    a1 += float(np.dot(s[i, :, i], b))
    a1 += bt[i, i] - c_axis.b_tilde[i, i]
    a2 = 0.0
    for j in others:
        for k in others:
            if j != k:
                a2 += g[i, j, k] * w[j] * w[k]
    for k in others:
        a2 += float(np.dot(s[i, :, k], b)) * w[k] + bt[i, k] * w[k]
    return float(a0), float(a1), float(a2)



def characteristic_coefficients(system, i, states, gradients):
    """Sampled (a0, a1, a2) for family ``i`` at the given states and u_x values."""
    from .decomposition import decomposition_coefficients

    out = np.empty((len(states), 3))
    for m, (u, ux) in enumerate(zip(states, gradients)):
        c = decomposition_coefficients(system, u)
        axis = np.zeros_like(u)
        axis[i] = u[i]
        c_axis = decomposition_coefficients(system, axis)
        w = c.left @ ux
        out[m] = _terms(i, c, c_axis, w)
    return out


def extract_characteristic_riccati(solution, i, y, launch_dy=None, t_stop=None,
                                   max_samples=400) -> RiccatiCoefficients:
    """Riccati coefficients sampled along the i-th characteristic from (0, y).

    States and gradients come from cubic-in-x, linear-in-t interpolation of
    the stored frames. Raises :class:`CharacteristicError` when the curve
    leaves the window.
    """
    from .solver import sample_along, trace_characteristics

    curves = trace_characteristics(solution, [i], [y], t_stop=t_stop)
    curve = curves[0]
    if len(curve.t) > max_samples:
        idx = np.unique(np.linspace(0, len(curve.t) - 1, max_samples).round().astype(int))
    else:
        idx = np.arange(len(curve.t))
    t = curve.t[idx]
    states, grads = sample_along(solution, t, curve.x[idx])
    try:
        vals = characteristic_coefficients(solution.system, i, states, grads)
    except DomainError as exc:
        raise CharacteristicError(f"state along the characteristic left the ball: {exc}") from None
    c = RiccatiCoefficients.from_samples(t, vals[:, 0], vals[:, 1], vals[:, 2],
                                         provenance=f"extracted-from-solution(i={i + 1}, y={y:g})")
    c.samples.update({"x": curve.x[idx], "states": states, "gradients": grads})
    return c


@dataclass(frozen=True)
class LeadingTermFit:
    """Fit of |a0 + (1/alpha!) d^(alpha+1)lambda_i(0) u_i(0, y)^alpha| along a curve.

    ``C`` is the smallest constant with deviation <= C (eps^(1+alpha) +
    sum_{j != i} |u_j|) on the samples.
    """

    C: float
    max_deviation: float
    t: np.ndarray
    deviation: np.ndarray


def leading_term_fit(solution, i, y, alpha, leading, t_stop=None, max_samples=100):
    """Compare a0 along the i-th characteristic with its leading-order value.

    The reference uses the launch value u_i(0, y) = f_i(eps, y): along a
    characteristic u_i differs from it by O(eps^2), so the fitted deviation
    measures truncation of the expansion plus discretization error.
    """
    c = extract_characteristic_riccati(solution, i, y, t_stop=t_stop, max_samples=max_samples)
    states = c.samples["states"]
    a0 = c.samples["a0"]
    u_launch = states[0, i]
    target = -leading / math.factorial(alpha) * u_launch ** alpha
    dev = np.abs(a0 - target)
    others = np.delete(np.abs(states), i, axis=1).sum(axis=1)
    denom = solution.eps ** (1 + alpha) + others
    return LeadingTermFit(float(np.max(dev / denom)), float(dev.max()), c.samples["t"], dev)
