"""Quadrature rules on the reference triangle ``(0,0), (1,0), (0,1)``.

Weights sum to the reference area 1/2.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["collapsed_gauss_rule", "triangle_rule"]


def _orbit3(a, w):
    """Barycentric points (1-2a, a, a) and permutations."""
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)], [w] * 3


def _orbit6(a, b, w):
    c = 1.0 - a - b
    pts = [(a, b, c), (b, c, a), (c, a, b), (b, a, c), (a, c, b), (c, b, a)]
    return pts, [w] * 6


# Symmetric Gauss rules (Strang-Fix / Dunavant), weights normalized to sum 1.
def _rule_data(degree):
    if degree <= 1:
        return [(1 / 3, 1 / 3, 1 / 3)], [1.0]
    if degree == 2:
        return _orbit3(1.0 / 6.0, 1.0 / 3.0)
    if degree <= 4:
        p1, w1 = _orbit3(0.091576213509770743459571463402202, 0.10995174365532186763832632490021)
        p2, w2 = _orbit3(0.44594849091596488631832925388305, 0.22338158967801146569500700843312)
        return p1 + p2, w1 + w2
    if degree <= 6:
        p1, w1 = _orbit3(0.063089014491502228340331602870819, 0.050844906370206816920936809106869)
        p2, w2 = _orbit3(0.24928674517091042129163855310702, 0.11678627572637936602528961138558)
        p3, w3 = _orbit6(0.053145049844816947353249671631398, 0.31035245103378440541660773395655,
                         0.082851075618373575193553456420442)
        return p1 + p2 + p3, w1 + w2 + w3
    raise ValueError(f"no symmetric rule of degree {degree}; use collapsed_gauss_rule")


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric rule exact for polynomials of total degree ``degree`` (<= 6).

    Returns reference points of shape ``(nq, 2)`` and weights of shape ``(nq,)``.
    """
    bary, w = _rule_data(degree)
    bary = np.asarray(bary)
    pts = bary[:, 1:3].copy()
    weights = 0.5 * np.asarray(w)
    pts.setflags(write=False)
    weights.setflags(write=False)
    return pts, weights


@lru_cache(maxsize=None)
def collapsed_gauss_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) Gauss-Legendre product rule exact to ``degree``.

    Not symmetric, but available for any degree; used for integrals of
    non-polynomial functions.
    """
    n = degree // 2 + 1
    s, ws = np.polynomial.legendre.leggauss(n)
    # The Jacobian (1 - t) raises the degree in t by one.
    m = degree // 2 + 2
    t, wt = np.polynomial.legendre.leggauss(m)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    WS, WT = np.meshgrid(ws, wt, indexing="ij")
    x = S * (1.0 - T)
    y = T
    w = WS * WT * (1.0 - T)
    pts = np.column_stack([x.ravel(), y.ravel()])
    weights = w.ravel()
    pts.setflags(write=False)
    weights.setflags(write=False)
    return pts, weights
