"""Filtered subspace iteration with Rayleigh-Ritz and truncation.

One iteration applies the discrete filter to the current basis,
M-orthonormalizes the result, rotates it to Ritz vectors of the pencil
``(K, M)`` and drops Ritz pairs that lie too far outside the search interval.
Iteration stops once successive Ritz values agree to ``tol``.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .fem import ResolventSolver, apply_filtered_operator
from .filters import FilterError, RationalFilter, SearchInterval, check_assumption
from .linalg import dense_sym_gevp, m_orthonormalize

__all__ = [
    "FeastConfig",
    "FeastResult",
    "Status",
    "SubspaceState",
    "init_subspace",
    "iterate",
    "projected_pencil",
    "rayleigh_ritz",
    "truncate",
]


class Status(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIterReached"
    NO_EIGENVALUES = "NoEigenvalues"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class FeastConfig:
    filter: RationalFilter
    m0: int = 6
    tol: float = 1e-9
    max_iter: int = 50
    keep_margin: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.m0 < 1:
            raise ValueError("m0 must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.keep_margin < 0:
            raise ValueError("keep_margin must be nonnegative")

    @property
    def interval(self) -> SearchInterval:
        return self.filter.interval


@dataclass(frozen=True)
class SubspaceState:
    basis: np.ndarray
    ritz_values: np.ndarray
    iteration: int = 0
    last_change: float = float("inf")

    @property
    def m(self) -> int:
        return self.basis.shape[1]


@dataclass
class FeastResult:
    state: SubspaceState
    status: Status
    history: list = field(default_factory=list)
    raw_history: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def ritz_values(self) -> np.ndarray:
        return self.state.ritz_values

    @property
    def basis(self) -> np.ndarray:
        return self.state.basis

    @property
    def iterations(self) -> int:
        return self.state.iteration

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _random_block(rng, n, m):
    return rng.uniform(-1.0, 1.0, size=(n, m))


def init_subspace(n_free: int, m_mat, m0: int, seed: int = 0, rng=None) -> np.ndarray:
    """Random M-orthonormal ``(n_free, m0)`` starting basis.

    Entries are uniform on ``(-1, 1)`` from ``numpy.random.default_rng(seed)``
    unless a generator is passed.
    """
    if hasattr(n_free, "n_free"):
        n_free = n_free.n_free
    if m0 > n_free:
        raise ValueError(f"m0 = {m0} exceeds the number of free dofs {n_free}")
    if rng is None:
        rng = np.random.default_rng(seed)
    basis, kept = m_orthonormalize(_random_block(rng, n_free, m0), m_mat)
    while basis.shape[1] < m0:
        extra = _random_block(rng, n_free, m0 - basis.shape[1])
        basis, _ = m_orthonormalize(np.hstack([basis, extra]), m_mat)
    return basis


def projected_pencil(k, m, basis) -> tuple[np.ndarray, np.ndarray]:
    """``(Y^T K Y, Y^T M Y)``, symmetrized."""
    ky = basis.T @ (k @ basis)
    my = basis.T @ (m @ basis)
    return 0.5 * (ky + ky.T), 0.5 * (my + my.T)


def rayleigh_ritz(k, m, basis) -> tuple[np.ndarray, np.ndarray]:
    """Ritz values (ascending) and M-orthonormal Ritz vectors of ``(K, M)`` on ``span(basis)``."""
    ky, my = projected_pencil(k, m, basis)
    values, q = dense_sym_gevp(ky, my)
    return values, basis @ q


def truncate(state: SubspaceState, interval: SearchInterval, keep_margin: float) -> SubspaceState:
    """Drop Ritz pairs with ``|lam - y| > (1 + keep_margin) gamma``."""
    keep = np.abs(state.ritz_values - interval.y) <= (1.0 + keep_margin) * interval.gamma
    if keep.all():
        return state
    return replace(state, basis=state.basis[:, keep], ritz_values=state.ritz_values[keep])


def _filter_step(config, solvers, k, m, basis, rng):
    y = apply_filtered_operator(config.filter, solvers, basis)
    q, kept = m_orthonormalize(y, m)
    target = basis.shape[1]
    while q.shape[1] < target:
        # Rank collapse: continue the seeded stream for the missing directions.
        extra = _random_block(rng, q.shape[0], target - q.shape[1])
        q, kept = m_orthonormalize(np.hstack([q, extra]), m)
    return rayleigh_ritz(k, m, q)


def iterate(config: FeastConfig, k, m, solvers: dict[int, ResolventSolver],
            start: SubspaceState | None = None) -> FeastResult:
    """Run filtered subspace iteration on the free-dof pencil ``(K, M)``.

    Parameters
    ----------
    config : iteration parameters and the filter.
    k, m : stiffness and mass matrices restricted to free dofs.
    solvers : resolvent solvers for the filter's upper-half-plane nodes
        (see :func:`spectral_feast.fem.build_resolvents`).
    start : optional state to continue from; its Ritz values count as the
        previous iterate for the stopping test.
    """
    report = check_assumption(config.filter)
    if not report.ok:
        raise FilterError(f"filter violates the separation assumption: {', '.join(report.failed)}")
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    n = k.shape[0]
    if start is None:
        basis = init_subspace(n, m, min(config.m0, n), rng=rng)
        prev = None
        it0 = 0
    else:
        basis, _ = m_orthonormalize(start.basis, m)
        prev = np.asarray(start.ritz_values)
        it0 = start.iteration

    history, raw = [], []
    state = SubspaceState(basis, np.zeros(0), it0)
    status = Status.MAX_ITER
    for it in range(it0 + 1, it0 + config.max_iter + 1):
        values, rotated = _filter_step(config, solvers, k, m, state.basis, rng)
        raw.append(values.copy())
        state = truncate(SubspaceState(rotated, values, it), config.interval, config.keep_margin)
        history.append(state.ritz_values.copy())
        if state.m == 0:
            state = replace(state, last_change=float("inf"))
            status = Status.NO_EIGENVALUES
            break
        if prev is not None and len(prev) == state.m:
            change = float(np.max(np.abs(state.ritz_values - prev)))
        else:
            change = float("inf")
        state = replace(state, last_change=change)
        prev = state.ritz_values
        if change < config.tol:
            status = Status.CONVERGED
            break
    return FeastResult(state=state, status=status, history=history, raw_history=raw,
                       elapsed=time.perf_counter() - t0)
