import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_feast.feast import (
    FeastConfig,
    Status,
    SubspaceState,
    init_subspace,
    iterate,
    projected_pencil,
    rayleigh_ritz,
    truncate,
)
from spectral_feast.fem import assemble_mass, assemble_stiffness, build_resolvents, build_space, restrict
from spectral_feast.filters import FilterError, SearchInterval, build_butterworth, eval_filter
from spectral_feast.linalg import dense_pencil_bruteforce
from spectral_feast.mesh import make_mesh


def setup(domain="square", n=8, p=1, interval=(0.0, 60.0), nq=8):
    space = build_space(make_mesh(domain, n), p)
    k = restrict(assemble_stiffness(space), space)
    m = restrict(assemble_mass(space), space)
    filt = build_butterworth(SearchInterval.from_endpoints(*interval), nq)
    return space, k, m, filt, build_resolvents(filt, k, m)


@pytest.fixture(scope="module")
def square_p1():
    return setup()


def test_config_validation(square_p1):
    filt = square_p1[3]
    for bad in (dict(m0=0), dict(tol=0.0), dict(max_iter=0), dict(keep_margin=-0.1)):
        with pytest.raises(ValueError):
            FeastConfig(filt, **bad)
    cfg = FeastConfig(filt)
    assert (cfg.m0, cfg.tol, cfg.max_iter, cfg.keep_margin, cfg.seed) == (6, 1e-9, 50, 0.1, 0)


def test_init_subspace(square_p1):
    space, k, m, _, _ = square_p1
    a = init_subspace(space, m, 6, seed=3)
    b = init_subspace(space.n_free, m, 6, seed=3)
    assert np.array_equal(a, b)
    assert np.max(np.abs(a.T @ (m @ a) - np.eye(6))) <= 1e-10
    assert not np.array_equal(a, init_subspace(space, m, 6, seed=4))
    with pytest.raises(ValueError):
        init_subspace(space, m, space.n_free + 1)


def test_rayleigh_ritz_examples(square_p1, rng):
    _, k, m, _, _ = square_p1
    import scipy.linalg
    lam, vecs = scipy.linalg.eigh(k.toarray(), m.toarray())
    vals, rot = rayleigh_ritz(k, m, vecs[:, [4, 1, 2]])
    assert np.allclose(vals, lam[[1, 2, 4]], rtol=1e-10)
    assert np.allclose(rot.T @ (m @ rot), np.eye(3), atol=1e-10)
    v = rng.standard_normal(k.shape[0])
    val, _ = rayleigh_ritz(k, m, v[:, None])
    assert val[0] == pytest.approx((v @ k @ v) / (v @ m @ v), rel=1e-12)
    ky, my = projected_pencil(k, m, vecs[:, :2])
    assert np.allclose(ky, np.diag(lam[:2]), atol=1e-9) and np.allclose(my, np.eye(2), atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5))
@settings(max_examples=25)
def test_rayleigh_ritz_span_invariance(seed, m_cols):
    _, k, m, _, _ = setup(n=4)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((k.shape[0], m_cols))
    c = np.eye(m_cols) + 0.3 * rng.standard_normal((m_cols, m_cols)) / math.sqrt(m_cols)
    if np.linalg.cond(c) > 50:
        return
    v1, _ = rayleigh_ritz(k, m, y)
    v2, _ = rayleigh_ritz(k, m, y @ c)
    assert np.allclose(v1, v2, rtol=1e-9)


def test_truncate_examples():
    iv = SearchInterval.from_endpoints(1262, 1264)
    basis = np.eye(3)
    st_in = SubspaceState(basis, np.array([1262.4, 1263.3, 1263.9]))
    assert truncate(st_in, iv, 0.1) is st_in
    kept = truncate(SubspaceState(basis, np.array([1262.41, 1263.31, 1264.0206])), iv, 0.1)
    assert kept.m == 3
    cut = truncate(SubspaceState(basis, np.array([1262.4, 1263.3, 1263 + 1.2])), iv, 0.1)
    assert cut.m == 2 and np.array_equal(cut.basis, basis[:, :2])


def test_oracle_equivalence_p1(square_p1):
    _, k, m, filt, solvers = square_p1
    res = iterate(FeastConfig(filt), k, m, solvers)
    assert res.status is Status.CONVERGED and res.converged
    assert res.state.last_change < 1e-9
    dense = dense_pencil_bruteforce(k, m)
    dense = dense[(dense > 0) & (dense < 60)]
    assert np.allclose(np.sort(res.ritz_values), dense, rtol=1e-8, atol=0)
    assert np.max(np.abs(res.basis.T @ (m @ res.basis) - np.eye(res.state.m))) <= 1e-9
    assert np.all(np.diff(res.ritz_values) >= 0)
    assert len(res.history) == res.iterations
    # Spectral inclusion.
    full = dense_pencil_bruteforce(k, m)
    assert np.all((res.ritz_values >= full[0] * (1 - 1e-12)) & (res.ritz_values <= full[-1]))


def test_no_eigenvalues(square_p1):
    _, k, m, _, _ = square_p1
    filt = build_butterworth(SearchInterval.from_endpoints(1, 2), 8)
    res = iterate(FeastConfig(filt), k, m, build_resolvents(filt, k, m))
    assert res.status is Status.NO_EIGENVALUES
    assert res.state.m == 0 and res.ritz_values.size == 0


def test_max_iter(square_p1):
    _, k, m, filt, solvers = square_p1
    res = iterate(FeastConfig(filt, max_iter=1), k, m, solvers)
    assert res.status is Status.MAX_ITER and res.iterations == 1


def test_restart_from_converged(square_p1):
    _, k, m, filt, solvers = square_p1
    res = iterate(FeastConfig(filt), k, m, solvers)
    again = iterate(FeastConfig(filt), k, m, solvers, start=res.state)
    assert again.status is Status.CONVERGED
    assert again.iterations == res.iterations + 1
    assert again.state.last_change < 1e-9


def test_determinism(square_p1):
    _, k, m, filt, solvers = square_p1
    a = iterate(FeastConfig(filt, seed=11), k, m, solvers)
    b = iterate(FeastConfig(filt, seed=11), k, m, solvers)
    assert len(a.raw_history) == len(b.raw_history)
    assert all(np.array_equal(x, y) for x, y in zip(a.raw_history, b.raw_history))


@pytest.mark.parametrize("change", [dict(m0=8), dict(seed=12345)])
def test_invariance_under_m0_and_seed(square_p1, change):
    _, k, m, filt, solvers = square_p1
    base = iterate(FeastConfig(filt), k, m, solvers)
    other = iterate(FeastConfig(filt, **change), k, m, solvers)
    assert other.converged
    assert np.allclose(base.ritz_values, other.ritz_values, rtol=0, atol=1e-9)


def test_assumption_checked(square_p1):
    _, k, m, _, _ = square_p1
    filt = build_butterworth(SearchInterval(30.0, 30.0, 0.0), 8)
    with pytest.raises(FilterError):
        iterate(FeastConfig(filt), k, m, build_resolvents(filt, k, m))


def test_filter_dominance_contraction():
    # Ritz value errors contract at least as fast as the ratio of the filter
    # at the nearest excluded eigenvalue to the filter at the targets (x10).
    _, k, m, filt, solvers = setup(n=8, p=2, interval=(15.0, 55.0), nq=4)
    lam = dense_pencil_bruteforce(k, m)
    iv = filt.interval
    inside = lam[np.abs(lam - iv.y) <= iv.gamma]
    outside = lam[np.abs(lam - iv.y) > iv.gamma]
    r_in = np.abs(eval_filter(filt, inside)).min()
    r_out = np.abs(eval_filter(filt, outside)).max()
    ratio = r_out / r_in
    assert ratio < 1
    res = iterate(FeastConfig(filt, m0=4, tol=1e-12, keep_margin=10.0), k, m, solvers)
    errs = []
    for vals in res.raw_history:
        vals = np.sort(vals)
        # Match each target to the nearest Ritz value.
        errs.append(max(np.min(np.abs(vals - t)) for t in inside))
    checked = 0
    for e0, e1 in zip(errs, errs[1:]):
        if e0 > 1e-10 * inside.max():
            assert e1 <= 10 * ratio * e0
            checked += 1
    assert checked >= 1
