"""Filtered subspace iteration for eigenvalue clusters of the Dirichlet Laplacian.

The package discretizes the Laplacian with Lagrange finite elements of degree
1 to 3 on structured triangulations, approximates the spectral projector of a
search interval with a Butterworth rational filter and extracts the cluster
by subspace iteration with Rayleigh-Ritz.

Modules
-------
filters      rational filters, contraction factor, separation check
mesh         square, L-shape and dumbbell triangulations
quadrature   triangle quadrature rules
fem          spaces, Galerkin matrices, shifted factorizations
linalg       dense symmetric eigensolvers and orthonormalization
feast        the filtered subspace iteration
metrics      Hausdorff distance, subspace gaps, rates, reference spectra
experiments  solve, study and oracle drivers
cli          the ``spectral-feast`` command
"""

from .feast import FeastConfig, FeastResult, Status, iterate
from .fem import assemble_mass, assemble_stiffness, build_resolvents, build_space, restrict
from .filters import SearchInterval, build_butterworth, eval_filter, filter_stats
from .mesh import make_mesh
from .metrics import exact_square_cluster, hausdorff, subspace_gap

__version__ = "0.1.0"

__all__ = [
    "FeastConfig",
    "FeastResult",
    "SearchInterval",
    "Status",
    "assemble_mass",
    "assemble_stiffness",
    "build_butterworth",
    "build_resolvents",
    "build_space",
    "eval_filter",
    "exact_square_cluster",
    "filter_stats",
    "hausdorff",
    "iterate",
    "make_mesh",
    "restrict",
    "subspace_gap",
]
