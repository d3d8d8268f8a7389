"""Structured triangulations of the unit square, L-shape and dumbbell.

All three domains are unions of axis-aligned grid cells of width ``1/n``.
Each cell is split along its lower-left to upper-right diagonal, so that
uniform red refinement of a mesh reproduces the mesh built at ``2n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "MeshReport",
    "make_dumbbell_mesh",
    "make_lshape_mesh",
    "make_mesh",
    "make_square_mesh",
    "read_mesh",
    "refine_uniform",
    "validate_mesh",
    "write_mesh",
]


class MeshError(ValueError):
    pass


def _edges(triangles: np.ndarray):
    """Unique undirected edges and, per triangle, the index of each local edge.

    Local edge ``e`` joins local vertices ``e`` and ``(e + 1) % 3``.
    """
    t = np.asarray(triangles)
    pairs = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True,
                                       return_counts=True)
    return edges, inverse.reshape(-1, 3), counts


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray = field(init=False)
    h_max: float = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2 or t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("vertices must be (nv, 2) and triangles (nt, 3)")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        edges, tri_edges, counts = _edges(t)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "tri_edges", tri_edges)
        object.__setattr__(self, "edge_counts", counts)
        object.__setattr__(self, "boundary_vertices", np.unique(edges[counts == 1]))
        lengths = np.linalg.norm(v[edges[:, 1]] - v[edges[:, 0]], axis=1)
        object.__setattr__(self, "edge_lengths", lengths)
        object.__setattr__(self, "h_max", float(lengths.max()) if lengths.size else 0.0)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_counts == 1)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())


def _cell_union_mesh(cells: np.ndarray, spacing: float) -> Mesh:
    """Triangulate the union of active grid cells ``cells[i, j]`` (x-index i)."""
    ni, nj = cells.shape
    corner = np.zeros((ni + 1, nj + 1), dtype=bool)
    corner[:-1, :-1] |= cells
    corner[1:, :-1] |= cells
    corner[:-1, 1:] |= cells
    corner[1:, 1:] |= cells
    # Number vertices row by row (y outer, x inner).
    order = corner.T.ravel()
    index = np.full(order.shape, -1, dtype=np.int64)
    index[order] = np.arange(order.sum())
    index = index.reshape(nj + 1, ni + 1).T
    jj, ii = np.nonzero(corner.T)
    vertices = np.column_stack([ii * spacing, jj * spacing])

    cj, ci = np.nonzero(cells.T)
    v00 = index[ci, cj]
    v10 = index[ci + 1, cj]
    v01 = index[ci, cj + 1]
    v11 = index[ci + 1, cj + 1]
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(vertices, triangles)


def make_square_mesh(n: int) -> Mesh:
    """Unit square with ``n x n`` cells, ``2 n**2`` triangles."""
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n}")
    n = int(n)
    return _cell_union_mesh(np.ones((n, n), dtype=bool), 1.0 / n)


def make_lshape_mesh(n: int) -> Mesh:
    """``(0,2)^2`` minus ``[1,2]^2``, three unit squares of ``n x n`` cells each."""
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n}")
    n = int(n)
    cells = np.ones((2 * n, 2 * n), dtype=bool)
    cells[n:, n:] = False
    return _cell_union_mesh(cells, 1.0 / n)


def make_dumbbell_mesh(n: int) -> Mesh:
    """Two unit squares joined by the bridge ``[1, 1.25] x [0.375, 0.625]``.

    ``n`` cells per unit length; it must be a multiple of 8 so the bridge
    edges fall on grid lines.
    """
    if int(n) != n or n < 8 or n % 8:
        raise MeshError(f"dumbbell needs n to be a positive multiple of 8, got {n}")
    n = int(n)
    b = n // 4  # cells across the bridge width (1/4)
    cells = np.zeros((2 * n + b, n), dtype=bool)
    cells[:n, :] = True
    cells[n + b:, :] = True
    lo = (3 * n) // 8
    cells[n:n + b, lo:lo + b] = True
    return _cell_union_mesh(cells, 1.0 / n)


_BUILDERS = {
    "square": make_square_mesh,
    "lshape": make_lshape_mesh,
    "dumbbell": make_dumbbell_mesh,
}

DOMAINS = tuple(_BUILDERS)


def make_mesh(domain: str, n: int) -> Mesh:
    try:
        builder = _BUILDERS[domain]
    except KeyError:
        raise MeshError(f"unknown domain {domain!r}; expected one of {DOMAINS}") from None
    return builder(n)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: split every triangle into four through edge midpoints."""
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    t = mesh.triangles
    m = nv + mesh.tri_edges  # midpoint of local edges (0,1), (1,2), (2,0)
    m01, m12, m20 = m[:, 0], m[:, 1], m[:, 2]
    children = np.stack([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ], axis=1).reshape(-1, 3)
    return Mesh(vertices, children)


@dataclass(frozen=True)
class MeshReport:
    orientation: bool
    conformity: bool
    boundary: bool
    h_max: bool

    @property
    def ok(self) -> bool:
        return self.orientation and self.conformity and self.boundary and self.h_max

    def failures(self) -> list[str]:
        return [name for name in ("orientation", "conformity", "boundary", "h_max")
                if not getattr(self, name)]


def validate_mesh(mesh: Mesh) -> MeshReport:
    """Check orientation, conformity, boundary set and ``h_max`` of a mesh.

    Conformity requires every edge to be shared by one or two triangles, no
    two vertices to coincide, and no vertex to lie in the interior of an edge
    it does not belong to (hanging node).  The boundary check recomputes the
    endpoints of edges with a single neighbour.
    """
    orientation = bool(np.all(mesh.signed_areas() > 0))

    v = mesh.vertices
    conform = bool(np.all((mesh.edge_counts == 1) | (mesh.edge_counts == 2)))
    if conform:
        rounded = np.round(v / max(mesh.h_max, 1e-300) * 1e9).astype(np.int64)
        conform = len(np.unique(rounded, axis=0)) == len(v)
    if conform:
        conform = not _has_hanging_nodes(mesh)

    edges, _, counts = _edges(mesh.triangles)
    bnd = np.unique(edges[counts == 1])
    boundary = np.array_equal(bnd, mesh.boundary_vertices)

    lengths = np.linalg.norm(v[edges[:, 1]] - v[edges[:, 0]], axis=1)
    h_ok = bool(np.isclose(lengths.max(), mesh.h_max, rtol=1e-14, atol=0.0))
    return MeshReport(orientation, conform, boundary, h_ok)


def _has_hanging_nodes(mesh: Mesh) -> bool:
    bedges = mesh.edges[mesh.edge_counts == 1]
    if len(bedges) == 0:
        return False
    v = mesh.vertices
    a, b = v[bedges[:, 0]], v[bedges[:, 1]]
    cand = mesh.boundary_vertices
    tol = 1e-12 * mesh.h_max
    d = b - a
    L2 = np.einsum("ij,ij->i", d, d)
    for c in np.array_split(cand, max(1, len(cand) // 256)):
        p = v[c]
        rel = p[:, None, :] - a[None, :, :]
        s = np.einsum("kij,ij->ki", rel, d) / L2
        perp = np.abs(rel[..., 0] * d[:, 1] - rel[..., 1] * d[:, 0]) / np.sqrt(L2)
        inside = (s > 1e-12) & (s < 1 - 1e-12) & (perp < tol)
        if inside.any():
            return True
    return False


def write_mesh(mesh: Mesh, path) -> None:
    """Write ``NV NT``, then ``x y b`` per vertex, then ``i j k`` per triangle."""
    flag = np.zeros(mesh.n_vertices, dtype=int)
    flag[mesh.boundary_vertices] = 1
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g} {b}" for (x, y), b in zip(mesh.vertices, flag)]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    rows = Path(path).read_text().split("\n")
    nv, nt = (int(s) for s in rows[0].split())
    vdata = np.array([r.split() for r in rows[1:1 + nv]], dtype=float).reshape(nv, 3)
    tdata = np.array([r.split() for r in rows[1 + nv:1 + nv + nt]], dtype=np.int64).reshape(nt, 3)
    mesh = Mesh(vdata[:, :2], tdata)
    flagged = np.flatnonzero(vdata[:, 2] != 0)
    if not np.array_equal(flagged, mesh.boundary_vertices):
        raise MeshError("boundary flags disagree with mesh topology")
    return mesh
