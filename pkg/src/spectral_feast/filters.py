"""Rational filters for filtered subspace iteration.

A rational filter is the function

    r(xi) = w_const + sum_k w_k / (z_k - xi)

with complex nodes ``z_k`` and weights ``w_k``.  Applied to a selfadjoint
operator it maps eigenvalues inside a search interval to values near one and
eigenvalues far outside to values near zero.  The Butterworth filter places the
nodes on the circle of radius ``gamma`` around the interval center ``y``; on the
real line it equals ``1 / (1 + ((x - y) / gamma)**N)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FilterError",
    "FilterStats",
    "AssumptionReport",
    "RationalFilter",
    "SearchInterval",
    "build_butterworth",
    "butterworth_magnitude",
    "check_assumption",
    "eval_filter",
    "filter_stats",
    "mapped_eigenvalues",
    "resolvent_bounds",
]


class FilterError(ValueError):
    """Invalid filter parameters, pole collisions and degenerate filters."""


@dataclass(frozen=True)
class SearchInterval:
    """Cluster location ``[y - gamma, y + gamma]`` and relative gap ``delta``.

    The guarded outer region is ``|x - y| >= (1 + delta) * gamma``.
    """

    y: float
    gamma: float
    delta: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.y):
            raise FilterError("interval center must be finite")
        if not self.gamma > 0:
            raise FilterError(f"gamma must be positive, got {self.gamma}")
        if not self.delta >= 0:
            raise FilterError(f"delta must be nonnegative, got {self.delta}")

    @classmethod
    def from_endpoints(cls, a: float, b: float, delta: float = 1.0) -> "SearchInterval":
        if not a < b:
            raise FilterError(f"need a < b, got ({a}, {b})")
        return cls(y=0.5 * (a + b), gamma=0.5 * (b - a), delta=delta)

    @property
    def lower(self) -> float:
        return self.y - self.gamma

    @property
    def upper(self) -> float:
        return self.y + self.gamma

    @property
    def outer_radius(self) -> float:
        return (1.0 + self.delta) * self.gamma

    def contains(self, x, margin: float = 0.0):
        """True where ``|x - y| <= (1 + margin) * gamma``."""
        return np.abs(np.asarray(x) - self.y) <= (1.0 + margin) * self.gamma


@dataclass(frozen=True)
class RationalFilter:
    nodes: np.ndarray
    weights: np.ndarray
    w_const: float
    interval: SearchInterval
    kind: str = "generic"
    order: int = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=complex).ravel()
        weights = np.asarray(self.weights, dtype=complex).ravel()
        if nodes.shape != weights.shape or nodes.size == 0:
            raise FilterError("nodes and weights must be nonempty and of equal length")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "order", nodes.size)

    @property
    def n(self) -> int:
        return self.order

    @property
    def w_sum(self) -> float:
        """``|w_const| + sum |w_k|``."""
        return float(abs(self.w_const) + np.sum(np.abs(self.weights)))

    def upper_indices(self) -> list[int]:
        """Indices of nodes in the open upper half plane."""
        return [k for k, z in enumerate(self.nodes) if z.imag > 0]

    def conjugate_partner(self, k: int) -> int | None:
        """Index ``j`` with ``z_j = conj(z_k)`` and ``w_j = conj(w_k)``, if any."""
        zc, wc = np.conj(self.nodes[k]), np.conj(self.weights[k])
        scale = max(1.0, abs(zc))
        for j, (z, w) in enumerate(zip(self.nodes, self.weights)):
            if abs(z - zc) <= 1e-14 * scale and abs(w - wc) <= 1e-14 * max(1.0, abs(wc)):
                return j
        return None

    def is_conjugate_closed(self) -> bool:
        if abs(np.imag(self.w_const)) > 0:
            return False
        return all(self.conjugate_partner(k) is not None for k in range(self.n))


def build_butterworth(interval: SearchInterval, n: int = 8, phi_sign: int = 1) -> RationalFilter:
    """Butterworth filter with ``n`` nodes on the circle ``|z - y| = gamma``.

    Nodes are ``gamma * exp(i(theta_k + phi)) + y`` with ``theta_k = 2 pi k / n``
    and ``phi = phi_sign * pi / n``; weights are ``(z_k - y) / n``.
    """
    if int(n) != n or n < 2 or n % 2:
        raise FilterError(f"Butterworth order must be an even integer >= 2, got {n}")
    if phi_sign not in (1, -1):
        raise FilterError("phi_sign must be +1 or -1")
    n = int(n)
    angles = 2.0 * np.pi * np.arange(n) / n + phi_sign * np.pi / n
    unit = np.exp(1j * angles)
    # Make conjugate pairs exact: angle_k reflects onto angle_{n-1-k} for
    # phi > 0 and onto angle_{1-k} for phi < 0.
    for k in range(n):
        j = (n - 1 - k) if phi_sign == 1 else (1 - k) % n
        if j > k:
            unit[j] = np.conj(unit[k])
    nodes = interval.gamma * unit + interval.y
    weights = interval.gamma * unit / n
    return RationalFilter(nodes=nodes, weights=weights, w_const=0.0,
                          interval=interval, kind="butterworth")


def butterworth_magnitude(x, interval: SearchInterval, n: int):
    """Closed form ``1 / (1 + ((x - y) / gamma)**n)`` of the Butterworth filter."""
    t = (np.asarray(x, dtype=float) - interval.y) / interval.gamma
    return 1.0 / (1.0 + t ** n)


def eval_filter(filt: RationalFilter, xi):
    """Evaluate the filter at ``xi`` (scalar or array) by direct summation."""
    xi_arr = np.asarray(xi, dtype=complex)
    diff = filt.nodes[:, None] - xi_arr.ravel()[None, :]
    if np.any(diff == 0):
        raise FilterError("evaluation point coincides with a filter node")
    vals = filt.w_const + np.sum(filt.weights[:, None] / diff, axis=0)
    if xi_arr.ndim == 0:
        return complex(vals[0])
    return vals.reshape(xi_arr.shape)


def mapped_eigenvalues(filt: RationalFilter, lambdas) -> np.ndarray:
    """Images ``r(lambda_i)`` of eigenvalues under the filter, in input order."""
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size == 0:
        return np.zeros(0, dtype=complex)
    return np.atleast_1d(eval_filter(filt, lam))


@dataclass(frozen=True)
class FilterStats:
    w_sum: float
    kappa_hat: float
    inner_min: float
    outer_sup: float
    sampled_kappa_hat: float
    summed_w_sum: float


def _sampled_extrema(filt: RationalFilter, n_samples: int) -> tuple[float, float]:
    iv = filt.interval
    inner = np.linspace(iv.lower, iv.upper, n_samples)
    r0 = iv.outer_radius
    tail = np.linspace(r0, 10.0 * max(r0, iv.gamma), n_samples)
    outer = np.concatenate([iv.y - tail, iv.y + tail])
    inner_min = float(np.min(np.abs(eval_filter(filt, inner))))
    outer_sup = float(np.max(np.abs(eval_filter(filt, outer))))
    return inner_min, outer_sup


def filter_stats(filt: RationalFilter, n_samples: int = 100_000) -> FilterStats:
    """Filter sum ``W`` and contraction factor ``kappa_hat``.

    ``kappa_hat`` is the ratio of ``sup |r|`` over the outer region to
    ``inf |r|`` over the search interval.  Both are sampled densely; the outer
    region is truncated at ten times its inner radius, which is exact for
    filters whose modulus decays away from the center (Butterworth) and an
    approximation otherwise.  For Butterworth filters the closed forms
    ``W = gamma`` and ``kappa_hat = 2 / (1 + (1 + delta)**N)`` are reported;
    the floating point sum of ``|w_k|`` and the sampled ratio are kept in
    ``summed_w_sum`` and ``sampled_kappa_hat``.
    """
    if n_samples < 1000:
        raise FilterError("n_samples must be at least 1000")
    inner_min, outer_sup = _sampled_extrema(filt, n_samples)
    if inner_min == 0.0:
        raise FilterError("filter vanishes on the search interval")
    sampled = outer_sup / inner_min
    w_sum = filt.w_sum
    if filt.kind == "butterworth" and filt.w_const == 0:
        iv = filt.interval
        inner_min = float(butterworth_magnitude(iv.upper, iv, filt.n))
        outer_sup = float(butterworth_magnitude(iv.y + iv.outer_radius, iv, filt.n))
        w_sum = float(iv.gamma)  # n weights of modulus gamma / n
    return FilterStats(w_sum=w_sum, kappa_hat=outer_sup / inner_min,
                       inner_min=inner_min, outer_sup=outer_sup,
                       sampled_kappa_hat=sampled, summed_w_sum=filt.w_sum)


@dataclass(frozen=True)
class AssumptionReport:
    ok: bool
    failed: tuple[str, ...]
    kappa_hat: float | None

    def __bool__(self):
        return self.ok


def check_assumption(filt: RationalFilter, n_samples: int = 100_000) -> AssumptionReport:
    """Check that no node is real, ``W`` is finite and ``kappa_hat < 1``."""
    failed = []
    if np.any(filt.nodes.imag == 0):
        failed.append("node in closure of spectrum")
    if not np.isfinite(filt.w_sum):
        failed.append("filter sum not finite")
    kappa = None
    if not failed:
        try:
            kappa = filter_stats(filt, n_samples).kappa_hat
        except FilterError:
            failed.append("degenerate filter")
        else:
            if not kappa < 1.0:
                failed.append("contraction factor not below one")
    return AssumptionReport(ok=not failed, failed=tuple(failed), kappa_hat=kappa)


def resolvent_bounds(z: complex, spectrum_sample) -> tuple[float, float]:
    """Sampled bounds ``alpha = sup |lam - z| / |lam|`` and ``beta = sup |lam| / |lam - z|``.

    The suprema over the spectrum are replaced by maxima over
    ``spectrum_sample``, which must be nonempty, nonzero and avoid ``z``.
    """
    lam = np.asarray(spectrum_sample, dtype=float).ravel()
    if lam.size == 0:
        raise FilterError("spectrum sample is empty")
    if np.any(lam == 0):
        raise FilterError("spectrum sample must not contain zero")
    dist = np.abs(lam - z)
    if np.any(dist == 0):
        raise FilterError("z lies in the spectrum sample")
    alpha = float(np.max(dist / np.abs(lam)))
    beta = float(np.max(np.abs(lam) / dist))
    return alpha, beta
