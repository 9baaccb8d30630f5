"""Initial-data families, smallness norms and the sharp lifespan constant M0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import yaml
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .dsl import parse_expression
from .errors import ClassificationError, DefinitionError

EPS_STEP = 1e-4
TAIL_CUTOFF = 1e-12


@dataclass(frozen=True)
class InitialDataFamily:
    """u(0, x) = f(eps, x) with f(0, x) = 0.

    ``f(eps, x)`` returns an array of shape ``(n, len(x))``. ``psi`` and
    ``psi_prime`` are optional closed forms of d f / d eps (0, x) and its
    x-derivative; when absent they are estimated numerically.
    """

    name: str
    n: int
    f: Callable
    support: tuple
    psi: Optional[Callable] = None
    psi_prime: Optional[Callable] = None
    holder_r: float = 1.0
    periodic: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, eps, x):
        return np.asarray(self.f(eps, np.asarray(x, dtype=float)), dtype=float)

    def with_psi_scaled(self, c):
        """The family with psi replaced by c*psi (f replaced by f(c*eps, x))."""
        psi = None if self.psi is None else (lambda x: c * self.psi(x))
        dpsi = None if self.psi_prime is None else (lambda x: c * self.psi_prime(x))
        return InitialDataFamily(f"{self.name}*{c:g}", self.n, lambda e, x: self.f(c * e, x),
                                 self.support, psi, dpsi, self.holder_r, self.periodic,
                                 dict(self.meta))


# ----------------------------------------------------------------------------
# built-in shapes
# ----------------------------------------------------------------------------

def _gauss_deriv(x):
    return -x * np.exp(-x * x)


def _gauss_deriv_prime(x):
    return (2 * x * x - 1) * np.exp(-x * x)


def _bump(x):
    inside = np.abs(x) < 1
    return np.where(inside, (1 - np.minimum(x * x, 1)) ** 4, 0.0)


def _bump_prime(x):
    inside = np.abs(x) < 1
    return np.where(inside, -8 * x * (1 - np.minimum(x * x, 1)) ** 3, 0.0)


def _smoothstep(t):
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1), with its derivative."""
    t = np.asarray(t, dtype=float)
    inner = (t > 0) & (t < 1)
    tc = np.where(inner, t, 0.5)
    a = np.exp(-1 / tc)
    b = np.exp(-1 / (1 - tc))
    s = np.where(inner, a / (a + b), (t >= 1).astype(float))
    ds = np.where(inner, a * b * (1 / tc ** 2 + 1 / (1 - tc) ** 2) / (a + b) ** 2, 0.0)
    return s, ds


_SINE_FLAT = 2 * np.pi
_SINE_RAMP = np.pi


def _window(x):
    s, ds = _smoothstep((np.abs(x) - _SINE_FLAT) / _SINE_RAMP)
    return 1 - s, -ds * np.sign(x) / _SINE_RAMP


def _windowed_sine(x):
    chi, _ = _window(x)
    return -np.sin(x) * chi


def _windowed_sine_prime(x):
    chi, dchi = _window(x)
    return -np.cos(x) * chi - np.sin(x) * dchi


def _gauss_cut():
    return brentq(lambda x: x * math.exp(-x * x) - TAIL_CUTOFF, 1.0, 10.0)


BUILTIN_SHAPES = {
    # name: (psi, psi', support)
    "gaussian-derivative": (_gauss_deriv, _gauss_deriv_prime, None),
    "bump": (_bump, _bump_prime, (-1.0, 1.0)),
    "windowed-sine": (_windowed_sine, _windowed_sine_prime,
                      (-_SINE_FLAT - _SINE_RAMP, _SINE_FLAT + _SINE_RAMP)),
}


def builtin_family(name, n=1, component=0, support=None, holder_r=1.0,
                   periodic=False) -> InitialDataFamily:
    """f(eps, x) = eps * psi(x) e_component for a built-in shape."""
    if name not in BUILTIN_SHAPES:
        raise DefinitionError(f"unknown initial-data shape {name!r}; "
                              f"choose from {sorted(BUILTIN_SHAPES)}")
    if not 0 <= component < n:
        raise DefinitionError(f"component {component + 1} out of range for n={n}")
    shape, dshape, supp = BUILTIN_SHAPES[name]
    if supp is None:
        cut = _gauss_cut()
        supp = (-cut, cut)
    supp = tuple(map(float, support if support is not None else supp))

    def embed(fn):
        def vec(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros((n,) + x.shape)
            out[component] = fn(x)
            return out
        return vec

    psi = embed(shape)
    dpsi = embed(dshape)
    return InitialDataFamily(name, n, lambda eps, x: eps * psi(x), supp, psi, dpsi,
                             float(holder_r), periodic,
                             {"kind": name, "component": component})


def expression_family(expressions, support, holder_r=1.0, name="expression",
                      periodic=False) -> InitialDataFamily:
    """Family from one DSL expression per component in the variables x and eps."""
    variables = {"x": 0, "eps": 1}
    exprs = [parse_expression(str(e), variables) for e in expressions]
    n = len(exprs)

    def f(eps, x):
        x = np.asarray(x, dtype=float)
        env = np.stack([x, np.full_like(x, float(eps))])
        return np.stack([e.evaluate(env) for e in exprs])

    return InitialDataFamily(name, n, f, tuple(map(float, support)), None, None,
                             float(holder_r), periodic,
                             {"kind": "expression", "expressions": [str(e) for e in expressions]})


def load_initial_data(text, n=None) -> tuple:
    """Parse an initial-data document; returns ``(family, epsilon_list)``."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DefinitionError(f"cannot read initial-data document: {exc}") from None
    if not isinstance(doc, dict) or "kind" not in doc:
        raise DefinitionError("initial-data document needs a 'kind' key")
    unknown = set(doc) - {"kind", "epsilon", "support", "holder_r", "component", "n",
                          "periodic"}
    if unknown:
        raise DefinitionError(f"unknown keys: {sorted(unknown)}")
    kind = doc["kind"]
    holder_r = float(doc.get("holder_r", 1.0))
    if not 0 < holder_r <= 1:
        raise DefinitionError("holder_r must lie in (0, 1]")
    periodic = bool(doc.get("periodic", False))
    eps = doc.get("epsilon", [])
    eps = [float(e) for e in (eps if isinstance(eps, list) else [eps])]
    support = doc.get("support")
    if isinstance(kind, list):
        if support is None:
            raise DefinitionError("expression families need a 'support' interval")
        fam = expression_family(kind, support, holder_r, periodic=periodic)
        if n is not None and fam.n != n:
            raise DefinitionError(f"initial data has {fam.n} components, system has n={n}")
    else:
        dim = int(doc.get("n", n if n is not None else 1))
        comp = int(doc.get("component", 1)) - 1
        fam = builtin_family(str(kind), dim, comp, support, holder_r, periodic)
    return fam, eps


# ----------------------------------------------------------------------------
# psi and smallness
# ----------------------------------------------------------------------------

def _numeric_psi(family, x):
    def d(e):
        return (family(e, x) - family(-e, x)) / (2 * e)

    coarse, fine = d(EPS_STEP), d(EPS_STEP / 2)
    best = (4 * fine - coarse) / 3
    scale = 1.0 + np.max(np.abs(best))
    if np.max(np.abs(fine - coarse)) > 1e-4 * scale:
        raise ClassificationError("eps-differencing of f is unstable")
    return best


def psi_values(family, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return family.psi(x) if family.psi is not None else _numeric_psi(family, x)


def psi_prime_values(family, x, h=1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if family.psi_prime is not None:
        return family.psi_prime(x)
    d1 = (psi_values(family, x + h) - psi_values(family, x - h)) / (2 * h)
    d2 = (psi_values(family, x + h / 2) - psi_values(family, x - h / 2)) / h
    return (4 * d2 - d1) / 3


def psi_from_family(family, grid):
    """Sampled psi(x) = d f/d eps (0, x) and its x-derivative on ``grid``."""
    return psi_values(family, grid), psi_prime_values(family, grid)


@dataclass(frozen=True)
class SmallnessReport:
    eps: float
    tv: float  # integral of |d f / dx|
    l1: float  # integral of |f|
    M: float  # sup |psi'|
    K1: float
    K2: float


def check_smallness(family, eps, grid=None) -> SmallnessReport:
    """BV and L1 norms of f(eps, .) and the constants they imply."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, hi = family.support
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("support must be finite")
    x = np.linspace(lo, hi, 4001) if grid is None else np.asarray(grid, dtype=float)
    f = family(eps, x)
    if family.psi_prime is not None and family.meta.get("kind") != "expression":
        fx = eps * family.psi_prime(x)
    else:
        h = 1e-5 * max(1.0, float(np.max(np.abs(x))))
        fx = (family(eps, x + h) - family(eps, x - h)) / (2 * h)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(fx))):
        raise ValueError("initial data not finite on the grid")
    tv = float(trapezoid(np.linalg.norm(fx, axis=0), x))
    l1 = float(trapezoid(np.linalg.norm(f, axis=0), x))
    M = float(np.max(np.linalg.norm(psi_prime_values(family, x), axis=0)))
    return SmallnessReport(eps, tv, l1, M, tv / eps, l1 * (M + 1) / eps)


# ----------------------------------------------------------------------------
# M0 and predictions
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LifespanPrediction:
    """Sharp constant M0 with the maximizing family and location.

    ``blowup_predicted`` is False when the sign condition fails everywhere;
    ``alpha is None`` stands for the weakly-linearly-degenerate sentinel.
    """

    alpha: int | None
    M0: float | None
    family: int | None
    x_star: float | None
    sup_value: float | None
    blowup_predicted: bool

    @property
    def guaranteed_scaling_exponent(self):
        return None if self.alpha is None else self.alpha + 1


def _golden_max(g, a, b, tol=1e-12, iters=200):
    inv_phi = (math.sqrt(5) - 1) / 2
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(iters):
        if abs(b - a) < tol * max(1.0, abs(a) + abs(b)):
            break
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - inv_phi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + inv_phi * (b - a)
            gd = g(d)
    x = (a + b) / 2
    return x, g(x)


def blowup_integrand(leading, alpha, psi_i, dpsi_i):
    """-(1/alpha!) * d^(alpha+1) lambda * psi^alpha * psi'."""
    return -leading / math.factorial(alpha) * np.power(psi_i, alpha) * dpsi_i


def compute_M0(system, wld, family, grid=None, families=None) -> LifespanPrediction:
    """Sharp lifespan constant for a system in normalized coordinates.

    The supremum over x is taken on ``grid`` (default 4001 points on the
    support) and refined by golden-section search around the best point.
    ``families`` restricts J to a subset (0-based), e.g. to study one
    family's index when another family dominates.
    """
    if family.n != system.n:
        raise DefinitionError("initial data and system dimensions differ")
    if families is not None:
        wld = wld.restricted(families)
    alpha = wld.alpha
    if alpha is None:
        return LifespanPrediction(None, None, None, None, None, False)
    lo, hi = family.support
    x = np.linspace(lo, hi, 4001) if grid is None else np.asarray(grid, dtype=float)
    psi, dpsi = psi_from_family(family, x)
    best = (-np.inf, None, None)
    for i in wld.J1:
        lead = wld.entry(i).leading
        g = blowup_integrand(lead, alpha, psi[i], dpsi[i])
        k = int(np.argmax(g))
        if g[k] > best[0]:
            best = (float(g[k]), i, k)
    value, i, k = best
    if i is None or not value > 0:
        return LifespanPrediction(alpha, None, None, None, value if i is not None else None, False)
    lead = wld.entry(i).leading

    def g_at(xx):
        xs = np.array([xx])
        return float(blowup_integrand(lead, alpha, psi_values(family, xs)[i],
                                      psi_prime_values(family, xs)[i])[0])

    a = x[max(k - 1, 0)]
    b = x[min(k + 1, len(x) - 1)]
    xr, vr = _golden_max(g_at, a, b)
    if vr < value:
        xr, vr = float(x[k]), value
    return LifespanPrediction(alpha, 1.0 / vr, i, float(xr), float(vr), True)


@dataclass(frozen=True)
class LifespanEstimate:
    eps: float
    T_pred: float | None
    notes: tuple


def predict_lifespan(pred: LifespanPrediction, eps) -> LifespanEstimate:
    """T_pred = M0 * eps^-(alpha+1) plus the accompanying lower-bound notes."""
    eps = float(eps)
    if pred.alpha is None:
        return LifespanEstimate(eps, None, (
            "all tested derivatives vanish (weakly linearly degenerate up to the tested "
            "order): lifespan >= C_N * eps^-N for every N >= 1; no numeric claim",))
    lower = (f"classical lifespan >= K6 * eps^-{pred.alpha + 1} "
             "(K6 exists but is not computable here)")
    if not pred.blowup_predicted:
        return LifespanEstimate(eps, None, (
            "sign condition fails for every family in J1 and every x: no blow-up predicted",
            lower))
    return LifespanEstimate(eps, pred.M0 * eps ** -(pred.alpha + 1), (lower,))
