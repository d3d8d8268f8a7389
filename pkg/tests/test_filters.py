import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectral_feast.filters import (
    FilterError,
    RationalFilter,
    SearchInterval,
    build_butterworth,
    butterworth_magnitude,
    check_assumption,
    eval_filter,
    filter_stats,
    mapped_eigenvalues,
    resolvent_bounds,
)

centers = st.floats(-1e3, 1e3, allow_nan=False)
radii = st.floats(1e-2, 1e3, allow_nan=False)
orders = st.sampled_from([2, 4, 6, 8, 12, 16])


def test_search_interval_validation():
    with pytest.raises(FilterError):
        SearchInterval(0.0, 0.0)
    with pytest.raises(FilterError):
        SearchInterval(0.0, 1.0, -0.5)
    with pytest.raises(FilterError):
        SearchInterval.from_endpoints(2.0, 1.0)
    iv = SearchInterval.from_endpoints(1262, 1264)
    assert (iv.y, iv.gamma, iv.lower, iv.upper) == (1263, 1, 1262, 1264)


def test_butterworth_first_node_n4():
    filt = build_butterworth(SearchInterval(0.0, 1.0), 4)
    z0 = math.sqrt(2) / 2 * (1 + 1j)
    assert abs(filt.nodes[0] - z0) < 1e-15
    assert abs(filt.weights[0] - z0 / 4) < 1e-15
    assert filt.w_const == 0


def test_butterworth_nodes_on_circle():
    filt = build_butterworth(SearchInterval(30.0, 30.0), 8)
    assert filt.n == 8
    assert np.allclose(np.abs(filt.nodes - 30.0), 30.0, rtol=1e-15, atol=1e-13)
    assert np.all(filt.nodes.imag != 0)
    assert filt.is_conjugate_closed()
    assert len(filt.upper_indices()) == 4


@pytest.mark.parametrize("n", [0, 3, 7, 1, 2.5])
def test_butterworth_rejects_bad_order(n):
    with pytest.raises(FilterError):
        build_butterworth(SearchInterval(0.0, 1.0), n)


@pytest.mark.parametrize("sign", [1, -1])
def test_phi_sign_both_conjugate_closed(sign):
    filt = build_butterworth(SearchInterval(2.0, 3.0), 8, phi_sign=sign)
    assert filt.is_conjugate_closed()
    x = np.linspace(-5, 9, 101)
    assert np.allclose(eval_filter(filt, x).real, butterworth_magnitude(x, filt.interval, 8),
                       atol=1e-14)


@given(centers, radii, orders)
def test_weight_sum_is_gamma(y, gamma, n):
    filt = build_butterworth(SearchInterval(y, gamma), n)
    assert filter_stats(filt, 1000).w_sum == gamma
    assert math.isclose(filt.w_sum, gamma, rel_tol=8 * np.finfo(float).eps)


def test_eval_center_and_edge():
    filt = build_butterworth(SearchInterval(5.0, 2.0), 8)
    assert abs(eval_filter(filt, 5.0) - 1.0) < 1e-15
    assert abs(eval_filter(filt, 7.0) - 0.5) < 1e-15
    assert abs(eval_filter(filt, 1e12)) < 1e-11


def test_eval_pole_collision():
    filt = build_butterworth(SearchInterval(0.0, 1.0), 8)
    with pytest.raises(FilterError):
        eval_filter(filt, filt.nodes[3])


@given(centers, radii, orders, st.floats(-20, 20))
def test_real_axis_imaginary_part(y, gamma, n, t):
    filt = build_butterworth(SearchInterval(y, gamma), n)
    x = y + t * gamma
    val = eval_filter(filt, x)
    dist = np.min(np.abs(filt.nodes - x))
    assert abs(val.imag) <= 1e-13 * filt.w_sum / dist


def test_closed_form_within_interval_neighbourhood():
    # Absolute agreement to 1e-12 on 1e5 points around the interval.
    iv = SearchInterval(30.0, 30.0)
    filt = build_butterworth(iv, 8)
    x = np.linspace(iv.y - 10 * iv.gamma, iv.y + 10 * iv.gamma, 100_000)
    err = np.abs(eval_filter(filt, x) - butterworth_magnitude(x, iv, 8))
    assert err.max() <= 1e-12


@pytest.mark.parametrize("n", [4, 8, 16])
def test_closed_form_tail_weighted(n):
    # |r(x) - closed form| <= 1e-12 (1 + |x - y| / gamma)^-N on a dense sample.
    iv = SearchInterval(30.0, 30.0)
    filt = build_butterworth(iv, n)
    t = np.linspace(-10.0, 10.0, 20_001)
    x = iv.y + t * iv.gamma
    err = np.abs(eval_filter(filt, x) - butterworth_magnitude(x, iv, n))
    bound = 1e-12 * (1.0 + np.abs(t)) ** (-n)
    worst = np.argmax(err / bound)
    assert np.all(err <= bound), f"t={t[worst]:.3f}: error {err[worst]:.2e} > bound {bound[worst]:.2e}"


@given(centers, radii, orders)
def test_monotone_decreasing_in_distance(y, gamma, n):
    iv = SearchInterval(y, gamma)
    filt = build_butterworth(iv, n)
    t = np.linspace(0.0, 5.0, 400)
    vals = np.abs(eval_filter(filt, y + gamma * t))
    closed = butterworth_magnitude(y + gamma * t, iv, n)
    # Strict decrease where the values are resolvable above rounding.
    resolvable = closed[1:] < closed[:-1] * (1 - 1e-10)
    assert np.all(np.diff(vals)[resolvable] < 0)
    vals_left = np.abs(eval_filter(filt, y - gamma * t))
    assert np.all(np.diff(vals_left)[resolvable] < 0)


@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
def test_kappa_hat_closed_form(delta):
    filt = build_butterworth(SearchInterval(0.0, 1.0, delta), 8)
    stats = filter_stats(filt)
    expected = 2.0 / (1.0 + (1.0 + delta) ** 8)
    assert abs(stats.kappa_hat - expected) <= 1e-6
    assert abs(stats.sampled_kappa_hat - expected) <= 1e-6
    assert stats.kappa_hat == pytest.approx(stats.outer_sup / stats.inner_min, rel=1e-15)


def test_kappa_hat_n8_delta1():
    stats = filter_stats(build_butterworth(SearchInterval(30.0, 30.0, 1.0), 8))
    assert abs(stats.kappa_hat - 2 / 257) <= 1e-6


def test_delta_zero_gives_kappa_one():
    filt = build_butterworth(SearchInterval(0.0, 1.0, 0.0), 8)
    assert filter_stats(filt).kappa_hat == pytest.approx(1.0, abs=1e-12)
    rep = check_assumption(filt)
    assert not rep.ok and "contraction factor not below one" in rep.failed


def test_filter_stats_sample_floor():
    with pytest.raises(FilterError):
        filter_stats(build_butterworth(SearchInterval(0.0, 1.0), 8), 999)


def test_check_assumption_ok_and_real_node():
    filt = build_butterworth(SearchInterval(0.0, 1.0), 8)
    rep = check_assumption(filt)
    assert rep.ok and rep.kappa_hat == pytest.approx(2 / 257)
    nodes = filt.nodes.copy()
    nodes[0] = 0.25
    bad = RationalFilter(nodes, filt.weights, 0.0, filt.interval)
    rep = check_assumption(bad)
    assert not rep.ok and rep.failed == ("node in closure of spectrum",)


def test_degenerate_filter_detected():
    iv = SearchInterval(0.0, 1.0)
    zero = RationalFilter(np.array([1j, -1j]), np.zeros(2), 0.0, iv)
    with pytest.raises(FilterError):
        filter_stats(zero)
    assert "degenerate filter" in check_assumption(zero).failed


def test_mapped_eigenvalues():
    iv = SearchInterval(3.0, 2.0, 1.0)
    filt = build_butterworth(iv, 8)
    assert abs(mapped_eigenvalues(filt, [3.0])[0] - 1.0) < 1e-15
    assert abs(abs(mapped_eigenvalues(filt, [3.0 + 4.0])[0]) - 1 / 257) < 1e-15
    assert mapped_eigenvalues(filt, []).shape == (0,)


@given(centers, radii, st.sampled_from([4, 8, 16]), st.floats(0.1, 3.0),
       st.lists(st.floats(-1, 1), min_size=1, max_size=5),
       st.lists(st.floats(0, 10), min_size=1, max_size=5))
def test_dominance(y, gamma, n, delta, inner_t, outer_t):
    iv = SearchInterval(y, gamma, delta)
    filt = build_butterworth(iv, n)
    if not check_assumption(filt, 1000).ok:
        return
    inner = y + gamma * np.array(inner_t)
    r0 = iv.outer_radius
    outer = np.concatenate([y + r0 + gamma * np.array(outer_t), y - r0 - gamma * np.array(outer_t)])
    mu_in = np.abs(mapped_eigenvalues(filt, inner))
    mu_out = np.abs(mapped_eigenvalues(filt, outer))
    assert mu_in.min() > mu_out.max()


def test_resolvent_bounds():
    alpha, beta = resolvent_bounds(1j, [1.0, 2.0])
    assert alpha == pytest.approx(math.sqrt(2), rel=1e-15)
    assert beta == pytest.approx(2 / math.sqrt(5), rel=1e-15)
    lam = 7.5
    alpha, beta = resolvent_bounds(lam + 1, [lam])
    assert alpha == pytest.approx(1 / lam) and beta == pytest.approx(lam)
    with pytest.raises(FilterError):
        resolvent_bounds(1j, [])
    with pytest.raises(FilterError):
        resolvent_bounds(2.0, [1.0, 2.0])
