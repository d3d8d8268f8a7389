"""Error measures for computed eigenvalue clusters and eigenspaces.

Eigenvalue errors use the Hausdorff distance between finite sets.  Subspace
errors use the gap, the larger of the two directed distances between unit
balls, measured either in ``L2`` (the ``H`` norm) or in the energy seminorm
``|u|_{H^1}`` (the ``V`` norm).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fem import FeSpace, _geometry, evaluate
from .filters import SearchInterval
from .linalg import DegenerateBasisError, dense_sym_gevp, principal_gap
from .quadrature import collapsed_gauss_rule

__all__ = [
    "ConvergenceRecord",
    "EigenvalueReference",
    "MetricsError",
    "dumbbell_reference",
    "exact_square_cluster",
    "gap_to_exact_square",
    "hausdorff",
    "lambda_h_max",
    "lshape_reference",
    "match_errors",
    "observed_rates",
    "rates",
    "reference_for",
    "subspace_gap",
]

PI2 = math.pi ** 2


class MetricsError(ValueError):
    pass


def hausdorff(a, b) -> float:
    """Hausdorff distance between two nonempty finite sets of reals."""
    a = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
    b = np.atleast_1d(np.asarray(b, dtype=float)).ravel()
    if a.size == 0 or b.size == 0:
        raise MetricsError("Hausdorff distance needs two nonempty sets")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise MetricsError("sets must contain finite values")
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# -- subspace gaps ----------------------------------------------------------

def _orthonormalize(basis, gram):
    x = np.asarray(basis, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    g = x.T @ (gram @ x)
    g = 0.5 * (g + g.T)
    if not np.any(x):
        raise DegenerateBasisError("basis is zero")
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as err:
        raise DegenerateBasisError("basis columns are linearly dependent") from err
    if np.min(np.diag(low)) <= 1e-12 * np.max(np.diag(low)):
        raise DegenerateBasisError("basis columns are numerically dependent")
    return np.linalg.solve(low, x.T).T


def _directed(res_gram):
    w = np.linalg.eigvalsh(0.5 * (res_gram + res_gram.T))
    return math.sqrt(min(max(float(w[-1]), 0.0), 1.0))


def subspace_gap(basis_a, basis_b, gram) -> float:
    """Gap between ``span(basis_a)`` and ``span(basis_b)`` in the ``gram`` inner product.

    Both bases are ``gram``-orthonormalized.  For equal dimensions each
    directed gap is the square root of the largest eigenvalue of the Gram
    matrix of residuals ``q_a - Q_b (Q_b^T G q_a)``, which stays accurate when
    the gap is far below ``sqrt(eps)``.  Unequal dimensions give 1.
    """
    qa = _orthonormalize(basis_a, gram)
    qb = _orthonormalize(basis_b, gram)
    gqb = gram @ qb
    cross = qa.T @ gqb
    coarse = principal_gap(cross)
    if qa.shape[1] != qb.shape[1]:
        return coarse
    ra = qa - qb @ cross.T
    rb = qb - qa @ cross
    return max(_directed(ra.T @ (gram @ ra)), _directed(rb.T @ (gram @ rb)))


def lambda_h_max(k_y, m_y) -> float:
    """Square root of the largest eigenvalue of the pencil ``(K_Y, M_Y)``."""
    values, _ = dense_sym_gevp(np.atleast_2d(k_y), np.atleast_2d(m_y))
    return math.sqrt(max(float(values[-1]), 0.0))


def _square_modes_fields(modes, x, y, lam_norm):
    """Values and gradients of ``2 sin(m pi x) sin(n pi y)``, optionally scaled by ``lam**-1/2``."""
    vals, grads = [], []
    for m, n in modes:
        sx, sy = np.sin(m * np.pi * x), np.sin(n * np.pi * y)
        cx, cy = np.cos(m * np.pi * x), np.cos(n * np.pi * y)
        scale = 2.0 / math.sqrt((m * m + n * n) * PI2) if lam_norm else 2.0
        vals.append(scale * sx * sy)
        grads.append(np.stack([scale * m * np.pi * cx * sy, scale * n * np.pi * sx * cy], axis=-1))
    return np.stack(vals, axis=-1), np.stack(grads, axis=-2)


def gap_to_exact_square(basis, space: FeSpace, modes, gram="H", quad_degree=None) -> float:
    """Gap between a computed eigenspace on the unit square and the exact one.

    The exact space is spanned by ``sin(m pi x) sin(n pi y)`` for ``(m, n)`` in
    ``modes``.

    Parameters
    ----------
    basis : (n_free, m) coefficients of the computed basis.
    space : finite element space on the unit square.
    modes : list of ``(m, n)`` pairs.
    gram : ``"H"`` or ``"V"`` measures the gap to the exact eigenfunctions
        by quadrature of residuals, with no interpolation error.  A sparse
        matrix instead interpolates the exact eigenfunctions into ``space``
        and returns :func:`subspace_gap` in that inner product, a proxy
        whose interpolation error is of the same order as the gap for low
        degrees.
    quad_degree : exactness degree of the collapsed Gauss rule
        (default ``2 p + 8``).
    """
    verts = space.mesh.vertices
    if not (np.allclose(verts.min(axis=0), 0.0) and np.allclose(verts.max(axis=0), 1.0)
            and math.isclose(space.mesh.area(), 1.0, rel_tol=1e-12)):
        raise MetricsError("exact eigenfunctions are only known on the unit square")
    modes = [tuple(int(v) for v in mn) for mn in modes]
    if not modes:
        raise MetricsError("no modes given")
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]

    if not isinstance(gram, str):
        x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
        ref, _ = _square_modes_fields(modes, x, y, False)
        return subspace_gap(ref[space.free_dofs], basis, gram)
    if gram not in ("H", "V"):
        raise MetricsError(f"gram must be 'H', 'V' or a matrix, got {gram!r}")

    deg = quad_degree if quad_degree is not None else 2 * space.degree + 8
    pts, w = collapsed_gauss_rule(deg)
    _, _, det, _ = _geometry(space.mesh)
    wq = np.abs(det)[:, None] * w[None, :]  # (nt, nq)
    xq, u, gu = evaluate(space, basis, pts)
    ev, ge = _square_modes_fields(modes, xq[..., 0], xq[..., 1], gram == "V")
    if gram == "H":
        fa, fb = ev[..., None], u[..., None]  # trailing component axis
    else:
        fa, fb = ge, gu

    def inner(f, g):
        return np.einsum("kq,kqic,kqjc->ij", wq, f, g)

    # Orthonormalize both families in the quadrature inner product.
    la = np.linalg.cholesky(inner(fa, fa))
    lb = np.linalg.cholesky(inner(fb, fb))
    fa = np.einsum("kqjc,ij->kqic", fa, np.linalg.inv(la))
    fb = np.einsum("kqjc,ij->kqic", fb, np.linalg.inv(lb))
    if fa.shape[2] != fb.shape[2]:
        return 1.0
    cross = inner(fa, fb)
    ra = fa - np.einsum("kqjc,ij->kqic", fb, cross)
    rb = fb - np.einsum("kqjc,ji->kqic", fa, cross)
    return max(_directed(inner(ra, ra)), _directed(inner(rb, rb)))


# -- references -------------------------------------------------------------

@dataclass(frozen=True)
class EigenvalueReference:
    """Reference eigenvalues of a domain within some interval.

    ``known[i]`` is False for values only known approximately; errors and
    Hausdorff distances skip or refuse them.  ``sources`` records where each
    value comes from.
    """

    domain: str
    values: np.ndarray
    multiplicities: np.ndarray
    sources: tuple
    known: np.ndarray
    modes: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        mult = np.asarray(self.multiplicities, dtype=int)
        known = np.asarray(self.known, dtype=bool)
        if not (v.shape == mult.shape == known.shape and len(self.sources) == v.size):
            raise MetricsError("reference fields must have equal length")
        if np.any(np.diff(v) <= 0):
            raise MetricsError("reference values must be strictly ascending")
        if np.any(mult < 1):
            raise MetricsError("multiplicities must be at least 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "multiplicities", mult)
        object.__setattr__(self, "known", known)

    def expanded(self) -> np.ndarray:
        """Values repeated by multiplicity, ascending."""
        return np.repeat(self.values, self.multiplicities)

    def expanded_known(self) -> np.ndarray:
        return np.repeat(self.known, self.multiplicities)

    @property
    def all_known(self) -> bool:
        return bool(np.all(self.known))

    def __len__(self):
        return int(self.multiplicities.sum())


def _square_modes(upper, cutoff):
    return [(m, n) for m in range(1, cutoff + 1) for n in range(1, cutoff + 1)
            if (m * m + n * n) * PI2 <= upper]


def exact_square_cluster(interval: SearchInterval, index_cutoff: int = 64) -> EigenvalueReference:
    """All ``(m^2 + n^2) pi^2`` in ``[y - gamma, y + gamma]``, with multiplicities.

    ``modes`` lists the ``(m, n)`` pairs, grouped by eigenvalue.
    """
    lo, hi = interval.lower, interval.upper
    if (index_cutoff ** 2 + 1) * PI2 <= hi:
        raise MetricsError(f"index cutoff {index_cutoff} too small for interval top {hi}")
    groups: dict[int, list] = {}
    for m in range(1, index_cutoff + 1):
        for n in range(1, index_cutoff + 1):
            s = m * m + n * n
            if lo <= s * PI2 <= hi:
                groups.setdefault(s, []).append((m, n))
    keys = sorted(groups)
    return EigenvalueReference(
        domain="square",
        values=np.array([s * PI2 for s in keys]),
        multiplicities=np.array([len(groups[s]) for s in keys], dtype=int),
        sources=tuple("closed form" for _ in keys),
        known=np.ones(len(keys), dtype=bool),
        modes=tuple(mn for s in keys for mn in groups[s]),
    )


_LSHAPE = [
    (9.6397238, "literature, 8 digits"),
    (15.197252, "literature, 8 digits"),
    (2 * PI2, "closed form"),
]

# Dumbbell: the second value is exact (a unit-square mode vanishing on the
# bridge); the first is only known to about two decimals.
_DUMBBELL = [
    (1262.41, "approximate, about 2 decimals", False),
    (128 * PI2, "closed form", True),
]


def lshape_reference(interval: SearchInterval) -> EigenvalueReference:
    rows = [(v, s) for v, s in _LSHAPE if interval.lower <= v <= interval.upper]
    return EigenvalueReference("lshape", np.array([v for v, _ in rows]),
                               np.ones(len(rows), dtype=int), tuple(s for _, s in rows),
                               np.ones(len(rows), dtype=bool))


def dumbbell_reference(interval: SearchInterval) -> EigenvalueReference:
    rows = [r for r in _DUMBBELL if interval.lower <= r[0] <= interval.upper]
    return EigenvalueReference("dumbbell", np.array([r[0] for r in rows]),
                               np.ones(len(rows), dtype=int), tuple(r[1] for r in rows),
                               np.array([r[2] for r in rows], dtype=bool))


def reference_for(domain: str, interval: SearchInterval) -> EigenvalueReference:
    if domain == "square":
        return exact_square_cluster(interval)
    if domain == "lshape":
        if interval.upper >= 29.5:
            raise MetricsError("L-shape reference values only cover (0, 29.5)")
        return lshape_reference(interval)
    if domain == "dumbbell":
        if interval.lower < 1262.0 or interval.upper > 1264.0:
            raise MetricsError("dumbbell reference values only cover (1262, 1264)")
        return dumbbell_reference(interval)
    raise MetricsError(f"unknown domain {domain!r}")


def match_errors(ritz_values, reference: EigenvalueReference):
    """Pair computed and reference values by sorted order.

    Returns ``(ref_values, abs_errors)`` aligned with ``sorted(ritz_values)``;
    entries without a known counterpart are NaN.
    """
    ritz = np.sort(np.asarray(ritz_values, dtype=float))
    ref = reference.expanded()
    known = reference.expanded_known()
    out_ref = np.full(ritz.shape, np.nan)
    out_err = np.full(ritz.shape, np.nan)
    n = min(len(ritz), len(ref))
    out_ref[:n] = ref[:n]
    sel = np.arange(n)[known[:n]]
    out_err[sel] = np.abs(ritz[sel] - ref[sel])
    out_ref[:n][~known[:n]] = np.nan
    return out_ref, out_err


# -- convergence records ----------------------------------------------------

@dataclass
class ConvergenceRecord:
    """One refinement level of a convergence study.

    ``r`` and ``r_E`` are the expected regularity exponents ``min(s, p)`` and
    ``min(s_E, p)``; eigenvalue errors are expected to decay like
    ``h**(2 r_E)``.
    """

    h: float
    h_max: float
    p: int
    iterations: int
    ritz_values: np.ndarray
    errors: np.ndarray
    hausdorff: float | None = None
    gap_H: float | None = None
    gap_V: float | None = None
    r: float | None = None
    r_E: float | None = None
    extra: dict = field(default_factory=dict)


def rates(errors) -> np.ndarray:
    """``log2(e_i / e_{i+1})``; zero, negative or missing errors give NaN."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise MetricsError("need at least two errors")
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (e[:-1] > 0) & (e[1:] > 0) & np.isfinite(e[:-1]) & np.isfinite(e[1:])
        out = np.where(ok, np.log2(np.where(ok, e[:-1], 1.0) / np.where(ok, e[1:], 1.0)), np.nan)
    return out


def observed_rates(records, quantities=None) -> dict[str, np.ndarray]:
    """Successive rates per tracked quantity over records with halving spacing.

    Quantities are ``"hausdorff"``, ``"gap_H"``, ``"gap_V"`` and
    ``"error[i]"`` for the ``i``-th sorted eigenvalue error.  Quantities that
    are missing at every level are omitted.
    """
    records = list(records)
    if len(records) < 2:
        raise MetricsError("need at least two records")
    for a, b in zip(records, records[1:]):
        if not math.isclose(b.h, 0.5 * a.h, rel_tol=1e-12):
            raise MetricsError(f"spacing does not halve: {a.h} -> {b.h}")
    series: dict[str, list] = {}
    for name in ("hausdorff", "gap_H", "gap_V"):
        vals = [getattr(r, name) for r in records]
        if any(v is not None for v in vals):
            series[name] = [np.nan if v is None else v for v in vals]
    n_err = max(len(np.atleast_1d(r.errors)) for r in records)
    for i in range(n_err):
        vals = [np.atleast_1d(r.errors)[i] if i < len(np.atleast_1d(r.errors)) else np.nan
                for r in records]
        series[f"error[{i}]"] = vals
    if quantities is not None:
        missing = [q for q in quantities if q not in series]
        if missing:
            raise MetricsError(f"unknown or untracked quantities: {missing}")
        series = {q: series[q] for q in quantities}
    return {name: rates(vals) for name, vals in series.items()}
