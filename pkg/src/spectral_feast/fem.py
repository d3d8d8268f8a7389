"""Lagrange finite elements of degree 1-3 and the discrete resolvent.

The model operator is the Dirichlet Laplacian.  Its Galerkin matrices are the
stiffness ``K_ij = int grad(phi_i) . grad(phi_j)`` and the mass
``M_ij = int phi_i phi_j``.  Boundary degrees of freedom are eliminated, so all
vectors handled by :class:`ResolventSolver` live on the free dofs only.

The discrete resolvent applied to a finite element function with coefficient
vector ``f`` is the solution ``u`` of ``(z M - K) u = M f``.  The discrete
filter is ``w_const f + sum_k w_k u_k``; for a conjugate-closed filter only the
nodes in the upper half plane need a factorization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, splu

from .filters import RationalFilter
from .mesh import Mesh
from .quadrature import triangle_rule

__all__ = [
    "FeSpace",
    "FemError",
    "ResolventSolver",
    "ShiftOnSpectrumError",
    "SolverFailure",
    "apply_filtered_operator",
    "assemble_mass",
    "assemble_stiffness",
    "build_resolvents",
    "build_space",
    "element_matrices",
    "evaluate",
    "factor_shifted",
    "interpolate",
    "reference_basis",
    "restrict",
    "solve_resolvent",
    "write_coo",
]

SUPPORTED_DEGREES = (1, 2, 3)


class FemError(ValueError):
    pass


class ShiftOnSpectrumError(FemError):
    """The shifted matrix ``z M - K`` is (numerically) singular."""


class SolverFailure(RuntimeError):
    """A resolvent solve missed its residual tolerance."""


# -- reference element ------------------------------------------------------

def _monomial_exponents(p):
    return [(a, d - a) for d in range(p + 1) for a in range(d, -1, -1)]


def reference_nodes(p: int) -> np.ndarray:
    """Nodal points: vertices, then ``p-1`` points per edge, then interior.

    Local edge ``e`` runs from vertex ``e`` to vertex ``(e+1) % 3``.
    """
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = [verts]
    for e in range(3):
        a, b = verts[e], verts[(e + 1) % 3]
        nodes.append(np.array([a + (i / p) * (b - a) for i in range(1, p)]).reshape(-1, 2))
    if p == 3:
        nodes.append(np.array([[1.0 / 3.0, 1.0 / 3.0]]))
    return np.vstack(nodes)


@lru_cache(maxsize=None)
def _basis_coefficients(p):
    exps = _monomial_exponents(p)
    nodes = reference_nodes(p)
    vander = np.array([[x ** a * y ** b for a, b in exps] for x, y in nodes])
    return np.linalg.inv(vander)


def reference_basis(p: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(nq, nloc)`` and gradients ``(nq, nloc, 2)`` of the nodal basis."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    coef = _basis_coefficients(p)
    exps = _monomial_exponents(p)
    mono = np.column_stack([x ** a * y ** b for a, b in exps])
    dx = np.column_stack([a * x ** max(a - 1, 0) * y ** b for a, b in exps])
    dy = np.column_stack([b * x ** a * y ** max(b - 1, 0) for a, b in exps])
    vals = mono @ coef
    grads = np.stack([dx @ coef, dy @ coef], axis=-1)
    return vals, grads


@lru_cache(maxsize=None)
def _reference_matrices(p):
    # Mass needs degree 2p, stiffness 2p - 2 on affine elements.
    pts, w = triangle_rule(2 * p)
    vals, _ = reference_basis(p, pts)
    mass = np.einsum("q,qi,qj->ij", w, vals, vals)
    pts, w = triangle_rule(max(2 * p - 2, 1))
    _, grads = reference_basis(p, pts)
    s = np.einsum("q,qia,qjb->abij", w, grads, grads)
    return mass, s[0, 0], s[0, 1] + s[1, 0], s[1, 1]


# -- finite element space ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class FeSpace:
    """Degree-``p`` Lagrange space on ``mesh`` with Dirichlet dofs eliminated.

    Attributes
    ----------
    dofmap : (nt, nloc) int array
        Global dof of each local node, in the local order of
        :func:`reference_nodes`.
    dof_coords : (n_dofs, 2) array
    dof_kind : (n_dofs,) int array
        0 for vertex, 1 for edge and 2 for interior dofs.
    free_dofs : (n_free,) int array
        Ascending dofs whose nodal point is not on the boundary.
    """

    mesh: Mesh
    degree: int
    dofmap: np.ndarray
    dof_coords: np.ndarray
    dof_kind: np.ndarray
    free_dofs: np.ndarray
    n_dofs: int = field(init=False)
    n_free: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_dofs", len(self.dof_coords))
        object.__setattr__(self, "n_free", len(self.free_dofs))

    def extend(self, u_free) -> np.ndarray:
        """Embed free-dof coefficients into all dofs (zero on the boundary)."""
        u_free = np.asarray(u_free)
        full = np.zeros((self.n_dofs,) + u_free.shape[1:], dtype=u_free.dtype)
        full[self.free_dofs] = u_free
        return full


def build_space(mesh: Mesh, p: int) -> FeSpace:
    """Enumerate vertex, edge and interior dofs of the degree-``p`` space."""
    if p not in SUPPORTED_DEGREES:
        raise FemError(f"unsupported degree {p}; expected one of {SUPPORTED_DEGREES}")
    nv, ne, nt = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    t = mesh.triangles
    v = mesh.vertices
    parts = [t]
    coords = [v]
    kinds = [np.zeros(nv, dtype=np.int8)]
    free_mask = [np.ones(nv, dtype=bool)]
    free_mask[0][mesh.boundary_vertices] = False

    if p >= 2:
        npe = p - 1
        edge_dof0 = nv + npe * mesh.tri_edges  # (nt, 3)
        for e in range(3):
            a, b = t[:, e], t[:, (e + 1) % 3]
            forward = (a < b)[:, None]
            i = np.arange(npe)[None, :]
            local = np.where(forward, i, npe - 1 - i)
            parts.append(edge_dof0[:, e:e + 1] + local)
        # Edge node i sits at fraction (i+1)/p from the lower to the higher vertex.
        lo, hi = v[mesh.edges[:, 0]], v[mesh.edges[:, 1]]
        frac = (np.arange(1, p) / p)[None, :, None]
        coords.append((lo[:, None, :] + frac * (hi - lo)[:, None, :]).reshape(-1, 2))
        kinds.append(np.ones(ne * npe, dtype=np.int8))
        efree = np.ones(ne, dtype=bool)
        efree[mesh.boundary_edges] = False
        free_mask.append(np.repeat(efree, npe))
    if p == 3:
        first = nv + 2 * ne
        parts.append((first + np.arange(nt))[:, None])
        coords.append(v[t].mean(axis=1))
        kinds.append(np.full(nt, 2, dtype=np.int8))
        free_mask.append(np.ones(nt, dtype=bool))

    dofmap = np.ascontiguousarray(np.hstack(parts), dtype=np.int64)
    dof_coords = np.vstack(coords)
    free = np.flatnonzero(np.concatenate(free_mask))
    for arr in (dofmap, dof_coords, free):
        arr.setflags(write=False)
    return FeSpace(mesh, p, dofmap, dof_coords, np.concatenate(kinds), free)


def _geometry(mesh):
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # columns
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    return p[:, 0], jac, det, inv


def element_matrices(space: FeSpace, which: str) -> np.ndarray:
    """Element stiffness (``which='stiffness'``) or mass matrices ``(nt, nloc, nloc)``."""
    mass, s00, s01, s11 = _reference_matrices(space.degree)
    _, _, det, inv = _geometry(space.mesh)
    adet = np.abs(det)
    if which == "mass":
        return adet[:, None, None] * mass[None]
    if which != "stiffness":
        raise FemError(f"unknown element matrix {which!r}")
    c = np.einsum("kai,kbi->kab", inv, inv)  # J^{-1} J^{-T}
    return adet[:, None, None] * (c[:, 0, 0, None, None] * s00
                                  + c[:, 0, 1, None, None] * s01
                                  + c[:, 1, 1, None, None] * s11)


def _assemble(space, local):
    dm = space.dofmap
    nloc = dm.shape[1]
    rows = np.repeat(dm, nloc, axis=1).ravel()
    cols = np.tile(dm, (1, nloc)).ravel()
    a = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(space.n_dofs,) * 2).tocsr()
    a = ((a + a.T) * 0.5).tocsr()
    a.sum_duplicates()
    a.sort_indices()
    return a


def assemble_stiffness(space: FeSpace) -> sp.csr_matrix:
    """Global stiffness matrix over all dofs, before Dirichlet elimination."""
    return _assemble(space, element_matrices(space, "stiffness"))


def assemble_mass(space: FeSpace) -> sp.csr_matrix:
    """Global mass matrix over all dofs, before Dirichlet elimination."""
    return _assemble(space, element_matrices(space, "mass"))


def restrict(a: sp.spmatrix, space: FeSpace) -> sp.csr_matrix:
    """Rows and columns of ``a`` belonging to free dofs."""
    if a.shape[0] == space.n_free:
        return sp.csr_matrix(a)
    free = space.free_dofs
    out = sp.csr_matrix(a)[free][:, free].tocsr()
    out.sort_indices()
    return out


def interpolate(space: FeSpace, func) -> np.ndarray:
    """Nodal interpolant coefficients ``func(x, y)`` at every dof."""
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    return np.asarray(func(x, y), dtype=float)


def evaluate(space: FeSpace, coeffs, ref_points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate finite element functions at reference points of every element.

    ``coeffs`` has shape ``(n_dofs, m)`` or ``(n_free, m)``.  Returns physical
    points ``(nt, nq, 2)``, values ``(nt, nq, m)`` and gradients
    ``(nt, nq, m, 2)``.
    """
    c = np.asarray(coeffs)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[0] == space.n_free and space.n_free != space.n_dofs:
        c = space.extend(c)
    vals, grads = reference_basis(space.degree, ref_points)
    origin, jac, _, inv = _geometry(space.mesh)
    xq = origin[:, None, :] + np.einsum("kab,qb->kqa", jac, np.asarray(ref_points))
    local = c[space.dofmap]  # (nt, nloc, m)
    u = np.einsum("qi,kim->kqm", vals, local)
    # Physical gradient: J^{-T} times reference gradient.
    gref = np.einsum("qib,kim->kqmb", grads, local)
    gu = np.einsum("kba,kqmb->kqma", inv, gref)
    return xq, u, gu


# -- shifted solves ---------------------------------------------------------

class ResolventSolver:
    """Factorization of ``z M - K`` on the free dofs, realizing ``R_h(z)``.

    Parameters
    ----------
    k, m : sparse matrices on the free dofs (see :func:`restrict`).
    z : complex shift.
    rtol : residual tolerance enforced on every solve.
    keep_factor : if False the LU factors are recomputed for every call to
        :meth:`solve` and released afterwards, trading time for memory.

    Solves apply up to three steps of iterative refinement when the first
    residual misses ``rtol``; threshold pivoting on the indefinite shifted
    matrix occasionally leaves a residual slightly above it.
    """

    def __init__(self, k, m, z, rtol=1e-10, keep_factor=True):
        self.k = sp.csr_matrix(k)
        self.m = sp.csr_matrix(m)
        self.z = complex(z)
        self.rtol = rtol
        self.keep_factor = keep_factor
        self.max_refine = 3
        self.n_factorizations = 0
        self.factor_nnz = None
        if self.k.shape != self.m.shape or self.k.shape[0] != self.k.shape[1]:
            raise FemError("K and M must be square and of equal size")
        if self.z.imag != 0:
            a = self.z * self.m - self.k
        else:
            a = self.z.real * self.m - self.k
        self.matrix = sp.csc_matrix(a)
        self._lu = self._factor() if keep_factor else None

    def _factor(self):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", MatrixRankWarning)
                lu = splu(self.matrix, permc_spec="MMD_AT_PLUS_A",
                          options={"SymmetricMode": True}, diag_pivot_thresh=0.1)
        except (RuntimeError, MatrixRankWarning) as err:
            raise ShiftOnSpectrumError(f"z = {self.z} gives a singular shifted matrix") from err
        if self.n_factorizations == 0:
            self._probe_singular(lu)
        self.n_factorizations += 1
        self.factor_nnz = lu.nnz
        return lu

    def _probe_singular(self, lu):
        # Recover a known vector; near-singular factors amplify rounding by
        # the condition number and lose it entirely.
        x = np.cos(np.arange(self.n) * 0.7 + 0.3)
        with np.errstate(all="ignore"):
            xr = lu.solve((self.matrix @ x).astype(self.matrix.dtype))
        err = np.linalg.norm(xr - x) / np.linalg.norm(x)
        if not err < 1e-3:
            raise ShiftOnSpectrumError(f"z = {self.z} is numerically on the discrete spectrum")

    @property
    def n(self) -> int:
        return self.k.shape[0]

    def factor_bytes(self) -> int:
        """Approximate storage of the LU factors (after the first factorization)."""
        itemsize = 16 if np.iscomplexobj(self.matrix.data) else 8
        return 0 if self.factor_nnz is None else self.factor_nnz * (itemsize + 4)

    def release(self) -> None:
        """Drop the factors; later solves refactor on demand."""
        self.keep_factor = False
        self._lu = None

    def solve(self, f) -> np.ndarray:
        """Solve ``(z M - K) u = M f`` for one vector or the columns of a matrix."""
        f = np.asarray(f)
        if f.shape[0] != self.n:
            raise FemError(f"right-hand side has {f.shape[0]} rows, expected {self.n}")
        lu = self._lu if self._lu is not None else self._factor()
        b = self.m @ f
        bn = np.maximum(np.linalg.norm(b, axis=0), np.finfo(float).tiny)
        u = self._lu_solve(lu, b)
        for _ in range(self.max_refine + 1):
            res = b - self.matrix @ u
            rn = np.linalg.norm(res, axis=0)
            if np.all(rn <= self.rtol * bn):
                return u
            u = u + self._lu_solve(lu, res)
        raise SolverFailure(f"resolvent solve relative residual {np.max(rn / bn):.3e} "
                            f"exceeds {self.rtol:g} at z = {self.z}")

    def _lu_solve(self, lu, b):
        if np.iscomplexobj(self.matrix.data):
            return lu.solve(np.ascontiguousarray(b, dtype=complex))
        if np.iscomplexobj(b):
            return lu.solve(np.ascontiguousarray(b.real)) + 1j * lu.solve(np.ascontiguousarray(b.imag))
        return lu.solve(np.ascontiguousarray(b, dtype=float))


def factor_shifted(space: FeSpace | None, k, m, z, rtol=1e-10) -> ResolventSolver:
    """Factor ``z M - K`` on the free dofs of ``space``.

    ``k`` and ``m`` may be given over all dofs or already restricted; with
    ``space=None`` they are used as given.
    """
    if space is not None:
        k, m = restrict(k, space), restrict(m, space)
    return ResolventSolver(k, m, z, rtol=rtol)


def solve_resolvent(solver: ResolventSolver, f) -> np.ndarray:
    return solver.solve(f)


def build_resolvents(filt: RationalFilter, k, m, rtol=1e-10,
                     memory_budget: float | None = 1.5 * 2**30) -> dict[int, ResolventSolver]:
    """One solver per upper-half-plane node, keyed by node index.

    ``k`` and ``m`` are the free-dof matrices.  As many factorizations as fit
    in ``memory_budget`` bytes (estimated from the first one) are kept
    resident; the remaining solvers refactor on every use.  ``None`` keeps
    all of them.
    """
    if not filt.is_conjugate_closed():
        raise FemError("filter is not conjugate closed")
    upper = filt.upper_indices()
    solvers = {}
    n_keep = len(upper)
    for count, i in enumerate(upper):
        solver = ResolventSolver(k, m, filt.nodes[i], rtol=rtol, keep_factor=count < n_keep)
        if count == 0 and memory_budget is not None:
            n_keep = int(memory_budget // max(solver.factor_bytes(), 1))
            if n_keep < 1:
                solver.release()
        solvers[i] = solver
    return solvers


def apply_filtered_operator(filt: RationalFilter, solvers: dict[int, ResolventSolver], f) -> np.ndarray:
    """Apply the discrete filter to the real columns of ``f``.

    Each conjugate pair of nodes contributes ``2 Re(w_k u_k)`` with ``u_k``
    solved at the upper node, so the result is real.  Contributions are summed
    in node order.
    """
    f = np.asarray(f, dtype=float)
    if np.imag(filt.w_const) != 0:
        raise FemError("filter constant must be real")
    out = float(np.real(filt.w_const)) * f
    for i, z in enumerate(filt.nodes):
        if z.imag > 0:
            if i not in solvers:
                raise FemError(f"missing resolvent for node {i} ({z})")
            if filt.conjugate_partner(i) is None:
                raise FemError("filter is not conjugate closed")
            out = out + 2.0 * np.real(filt.weights[i] * solvers[i].solve(f))
        elif z.imag == 0:
            raise FemError("real filter node")
    return out


def write_coo(a: sp.spmatrix, path) -> None:
    """Dump a sparse matrix as ``i j re [im]`` lines."""
    coo = sp.coo_matrix(a)
    complex_vals = np.iscomplexobj(coo.data)
    with Path(path).open("w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            if complex_vals:
                fh.write(f"{i} {j} {v.real:.17g} {v.imag:.17g}\n")
            else:
                fh.write(f"{i} {j} {v:.17g}\n")
