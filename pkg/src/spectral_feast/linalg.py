"""Small dense kernels for Rayleigh-Ritz and the brute-force oracle."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "DefinitenessError",
    "DegenerateBasisError",
    "NotOrthonormalError",
    "OracleCapError",
    "cyclic_jacobi",
    "dense_pencil_bruteforce",
    "dense_sym_gevp",
    "m_orthonormalize",
    "principal_gap",
]


class DefinitenessError(np.linalg.LinAlgError):
    pass


class DegenerateBasisError(np.linalg.LinAlgError):
    pass


class NotOrthonormalError(ValueError):
    pass


class OracleCapError(ValueError):
    pass


def _check_symmetric(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def cyclic_jacobi(a, tol=1e-15, max_sweeps=60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and orthonormal eigenvectors (columns).
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    for _ in range(max_sweeps):
        # Direct off-diagonal norm; sum(a*a) - sum(diag**2) cancels to zero
        # long before the off-diagonal part is negligible.
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * norm or norm == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = 100.0 * abs(apq)
                if abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def dense_sym_gevp(a, b):
    """Solve ``a v = lam b v`` for symmetric ``a`` and SPD ``b``.

    Cholesky ``b = L L^T`` reduces the pencil to ``L^-1 a L^-T``, which is
    diagonalized by :func:`cyclic_jacobi`.  Eigenvectors are ``b``-orthonormal.
    """
    a = _check_symmetric(a, "a")
    b = _check_symmetric(b, "b")
    if a.shape != b.shape:
        raise ValueError("a and b must have the same shape")
    try:
        low = np.linalg.cholesky(b)
    except np.linalg.LinAlgError as err:
        raise DefinitenessError("b is not positive definite") from err
    tmp = scipy.linalg.solve_triangular(low, a, lower=True)
    c = scipy.linalg.solve_triangular(low, tmp.T, lower=True)
    values, z = cyclic_jacobi(0.5 * (c + c.T))
    vectors = scipy.linalg.solve_triangular(low.T, z, lower=False)
    return values, vectors


def dense_pencil_bruteforce(k, m, cap: int = 2000) -> np.ndarray:
    """All generalized eigenvalues of a (small) sparse pencil, ascending.

    Densifies and calls LAPACK's symmetric-definite solver; this is the
    independent reference for the filtered iteration.
    """
    n = k.shape[0]
    if n > cap:
        raise OracleCapError(f"pencil dimension {n} exceeds oracle cap {cap}")
    kd = k.toarray() if sp.issparse(k) else np.asarray(k, dtype=float)
    md = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
    try:
        return scipy.linalg.eigh(kd, md, eigvals_only=True)
    except np.linalg.LinAlgError as err:
        raise DefinitenessError("mass matrix is not positive definite") from err


def m_orthonormalize(basis, m_mat, drop_tol: float = 1e-12):
    """M-orthonormalize columns by modified Gram-Schmidt, two passes.

    Columns whose M-norm after projection falls below ``drop_tol`` times the
    largest input column M-norm are dropped.

    Returns
    -------
    q : (n, m') array with ``q.T @ M @ q = I``
    kept : indices of the input columns that survived
    """
    x = np.array(basis, dtype=float, copy=True)
    if x.ndim == 1:
        x = x[:, None]
    n, m = x.shape
    if m < 1:
        raise ValueError("basis must have at least one column")
    mx = m_mat @ x
    norms = np.sqrt(np.maximum(np.einsum("ij,ij->j", x, mx), 0.0))
    ref = norms.max(initial=0.0)
    if ref == 0.0 or not np.isfinite(ref):
        raise DegenerateBasisError("all basis columns are zero")
    q_cols, mq_cols, kept = [], [], []
    for j in range(m):
        v = x[:, j].copy()
        for _ in range(2):
            for q, mq in zip(q_cols, mq_cols):
                v -= (mq @ v) * q
        mv = m_mat @ v
        nv = np.sqrt(max(v @ mv, 0.0))
        if nv <= drop_tol * ref:
            continue
        q_cols.append(v / nv)
        mq_cols.append(mv / nv)
        kept.append(j)
    if not q_cols:
        raise DegenerateBasisError("all basis columns are numerically dependent")
    return np.column_stack(q_cols), np.array(kept, dtype=int)


def principal_gap(cross_gram, dims_equal: bool | None = None, eps: float = 1e-8) -> float:
    """Gap between two subspaces from the cross-Gram ``Y_a^T G Y_b`` of G-orthonormal bases.

    The directed gap from the smaller space is ``sqrt(1 - s_min**2)``; from a
    strictly larger space into a smaller one it is 1.  The result is the
    larger directed gap.
    """
    c = np.atleast_2d(np.asarray(cross_gram, dtype=float))
    ra, rb = c.shape
    if dims_equal is not None and dims_equal != (ra == rb):
        raise ValueError("dims_equal does not match the cross-Gram shape")
    s = np.linalg.svd(c, compute_uv=False)
    if np.any(s > 1.0 + eps):
        raise NotOrthonormalError("singular values exceed one; bases not orthonormal")
    if ra != rb:
        return 1.0
    smin = min(float(s.min()), 1.0)
    return float(np.sqrt(max(0.0, 1.0 - smin * smin)))
