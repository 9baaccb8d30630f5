"""Finite-difference weights and Richardson extrapolation."""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def fd_weights(offsets, order):
    """Weights w_k with f^(order)(0) ~ sum_k w_k f(offsets[k] h) / h^order.

    Fornberg's recursion in exact rational arithmetic, so symmetric stencils
    come out exactly symmetric.
    """
    x = [Fraction(o) for o in offsets]
    m = len(x)
    if order >= m:
        raise ValueError(f"need more than {order} points for derivative order {order}")
    c = [[Fraction(0)] * (order + 1) for _ in range(m)]
    c[0][0] = Fraction(1)
    c1 = Fraction(1)
    c4 = x[0]
    for i in range(1, m):
        mn = min(i, order)
        c2 = Fraction(1)
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2
            for k in range(mn, 0, -1):
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3
            c[j][0] = c4 * c[j][0] / c3
        c1 = c2
    return np.array([float(c[k][order]) for k in range(m)])


def central_offsets(order):
    """Smallest symmetric stencil giving second-order accuracy."""
    p = (order + 1) // 2
    return list(range(-p, p + 1))


def central_derivative(sample, order, h):
    """Second-order central estimate of the ``order``-th derivative at 0.

    ``sample(k)`` returns f(k h) for integer k.
    """
    offsets = central_offsets(order)
    w = fd_weights(offsets, order)
    vals = [sample(k) for k in offsets]
    return sum(wk * np.asarray(v) for wk, v in zip(w, vals)) / h ** order


def richardson(coarse, fine, p=2, ratio=2.0):
    """One Richardson step for an O(h^p) method with step ratio ``ratio``."""
    f = ratio ** p
    return (f * np.asarray(fine) - np.asarray(coarse)) / (f - 1.0)


def gradient(func, u, h, richardson_step=True):
    """Jacobian of ``func`` (R^n -> array) by central differences.

    Returns an array of shape ``func(u).shape + (n,)``. ``func`` receives
    perturbed states one at a time, so it may anchor eigenvector signs to a
    reference frame.
    """
    u = np.asarray(u, dtype=float)
    cols = []
    for m in range(u.size):
        e = np.zeros_like(u)
        e[m] = 1.0
        d1 = (np.asarray(func(u + h * e)) - np.asarray(func(u - h * e))) / (2 * h)
        if richardson_step:
            hh = h / 2
            d2 = (np.asarray(func(u + hh * e)) - np.asarray(func(u - hh * e))) / (2 * hh)
            d1 = richardson(d1, d2)
        cols.append(d1)
    return np.stack(cols, axis=-1)
