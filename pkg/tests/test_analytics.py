import math
import warnings

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from knnlab.analytics import (FillingParams, TrapTooLargeWarning, c_bound,
                              connectivity_upper_bound, f_log, ln_g, log_p_at_least,
                              log_p_k_filling, log_p_k_filling_product, p_k_filling,
                              r_star, recommended_k, theorem1_threshold, theorem2_threshold,
                              y_exponent)
from knnlab.errors import DomainError
from knnlab.geometry import grid_capacity, l_max


def mp_p_k_filling(N, r, a, L, k):
    mpmath.mp.dps = 50
    N, r, a = map(mpmath.mpf, (N, r, a))
    inner = N * mpmath.pi * r ** 2
    sub = N * mpmath.pi * a ** 2 * r ** 2 / 4
    outer = N * mpmath.pi * (1 + 2 * a) ** 2 * r ** 2
    return (inner ** k / mpmath.factorial(k) * (sub ** k / mpmath.factorial(k)) ** L
            * mpmath.exp(-outer))


def test_k_filling_reference_example():
    p = p_k_filling(FillingParams(50, 0.08, 0.5, 1, 1))
    assert p == pytest.approx(1.1326e-3, abs=5e-8)
    assert p == pytest.approx(float(mp_p_k_filling(50, 0.08, 0.5, 1, 1)), rel=1e-13)


def test_k_zero_is_void_probability():
    p = p_k_filling(FillingParams(100, 0.05, 1.0, 1, 0))
    assert p == pytest.approx(math.exp(-100 * math.pi * 9 * 0.05 ** 2), rel=1e-14)
    # exp(-7.068583) = 8.5144e-4
    assert p == pytest.approx(8.5144e-4, abs=1e-8)


def test_at_least_against_direct_sum():
    from scipy import stats
    params = FillingParams(200, 0.03, 1.0, 3, 2)
    inner, sub = params.inner_mean, params.subdisk_mean
    rest = params.outer_mean - inner - 3 * sub
    expected = stats.poisson.sf(1, inner) * stats.poisson.sf(1, sub) ** 3 * math.exp(-rest)
    assert math.exp(log_p_at_least(params)) == pytest.approx(expected, rel=1e-12)
    deep = FillingParams(10, 0.01, 1.0, 2, 40)
    mpmath.mp.dps = 50
    def tail(m):
        m = mpmath.mpf(m)
        return mpmath.fsum(m ** j * mpmath.exp(-m) / mpmath.factorial(j) for j in range(40, 400))
    exact = (mpmath.log(tail(deep.inner_mean)) + 2 * mpmath.log(tail(deep.subdisk_mean))
             - (deep.outer_mean - deep.inner_mean - 2 * deep.subdisk_mean))
    assert log_p_at_least(deep) == pytest.approx(float(exact), rel=1e-12)


def test_extreme_parameters_stay_finite():
    lp = log_p_k_filling(FillingParams(1e12, 1e-5, 3.6, 11, 10_000))
    assert math.isfinite(lp)
    p = p_k_filling(FillingParams(1e12, 1e-5, 3.6, 11, 10_000))
    assert p == 0.0 or p > 0


@pytest.mark.parametrize("args", [(1e3, 0.01, 3.6, 11, 2), (200, 0.02, 1.0, 5, 3),
                                  (1e5, 0.001, 2.0, 12, 4), (50, 0.05, 0.3, 20, 0)])
def test_p_k_filling_against_high_precision(args):
    expected = mp_p_k_filling(*args)
    assert log_p_k_filling(FillingParams(*args)) == pytest.approx(float(mpmath.log(expected)), rel=1e-12)


def test_trap_too_large_warns():
    with pytest.warns(TrapTooLargeWarning):
        p_k_filling(FillingParams(10, 0.3, 3.6, 11, 1))


def test_invalid_params():
    for bad in [(0, 0.1, 1, 1, 1), (10, -0.1, 1, 1, 1), (10, 0.1, 0, 1, 1), (10, 0.1, 1, -1, 1),
                (10, 0.1, 1, 1, -1), (10, 0.1, 1, 1, 1.5)]:
        with pytest.raises(DomainError):
            FillingParams(*bad)


draws = st.tuples(st.floats(10, 1e9), st.floats(1e-5, 0.05), st.floats(0.1, 10),
                  st.integers(0, 25), st.integers(0, 200))


@settings(max_examples=100, deadline=None)
@given(draws)
def test_property_two_forms_agree(d):
    params = FillingParams(*d)
    lp, lq = log_p_k_filling(params), log_p_k_filling_product(params)
    assert abs(lp - lq) <= 1e-12 * max(1.0, abs(lp), abs(lq))


@settings(max_examples=60, deadline=None)
@given(draws)
def test_property_at_least_dominates_exact(d):
    params = FillingParams(*d)
    assert log_p_at_least(params) >= log_p_k_filling(params) - 1e-9


def test_ln_g_against_high_precision():
    mpmath.mp.dps = 40
    for a, L in [(3.6, 11), (1.0, 15), (0.3, 2), (7.5, 9)]:
        aa = mpmath.mpf(a)
        expected = mpmath.log((L + 1) ** (L + 1) * aa ** (2 * L) / (4 ** L * (1 + 2 * aa) ** (2 * (L + 1))))
        assert ln_g(a, L) == pytest.approx(float(expected), rel=1e-13)


def test_c_bound_reference_value():
    ev = c_bound(3.6, 11)
    assert ev.c == pytest.approx(0.12905, abs=1e-4)
    assert ev.feasible and ev.l_max == 11 and ev.l_min_upper == 6
    assert ev.y() == pytest.approx(-1.0, abs=1e-15)
    assert y_exponent(0.0645, 3.6, 11) == pytest.approx(-0.499813, abs=1e-6)


def test_c_bound_infeasible():
    assert not c_bound(3.6, 12).feasible
    assert not c_bound(3.6, 5).feasible
    with pytest.raises(DomainError):
        c_bound(3.6, 0)


@pytest.mark.parametrize("a", [0.05, 0.1, 0.5, 1, 2, 3.6, 5, 10, 20, 50])
def test_ln_g_negative_at_l_max(a):
    assert ln_g(a, l_max(a)) < 0


def test_r_star():
    r = r_star(1e4, 2, 3.6, 11)
    assert r == pytest.approx(math.sqrt(24 / (1e4 * math.pi * 8.2 ** 2)), rel=1e-14)
    assert r_star(1e4, 2, 3.6, 11, "stationary") == pytest.approx(
        math.sqrt(23 / (1e4 * math.pi * 8.2 ** 2)), rel=1e-14)
    with pytest.raises(DomainError):
        r_star(1e4, 1, 3.6, 0, "stationary")


@settings(max_examples=100, deadline=None)
@given(st.floats(1e3, 1e9), st.integers(1, 40), st.floats(0.5, 8), st.integers(1, 15))
def test_property_f_log_stationary(N, k, a, L):
    r = r_star(N, k, a, L, "stationary")
    h = 1e-5
    # derivative with respect to log r by central differences
    d = (f_log(N, k, a, L, r * math.exp(h)) - f_log(N, k, a, L, r * math.exp(-h))) / (2 * h)
    scale = k * (L + 1)
    assert abs(d) <= 1e-4 * scale
    # and it is a maximum
    assert f_log(N, k, a, L, r) >= f_log(N, k, a, L, r * 1.01)
    assert f_log(N, k, a, L, r) >= f_log(N, k, a, L, r * 0.99)


def test_f_log_matches_trap_count_times_probability():
    N, k, a, L = 1e5, 2, 3.6, 11
    r = r_star(N, k, a, L)
    S_real = 1.0 / (2 * (1 + 2 * a) * r) ** 2
    p = math.exp(log_p_k_filling(FillingParams(N, r, a, L, k)))
    assert f_log(N, k, a, L, r) == pytest.approx(math.log(S_real * p), rel=1e-12)


def test_connectivity_upper_bound():
    b = connectivity_upper_bound(1e6, 1, 3.6, 11)
    S, _ = grid_capacity(3.6, b.r)
    assert b.S == S > 0
    assert b.finite <= b.asymptotic
    mpmath.mp.dps = 40
    exact = (1 - mpmath.mpf(b.p_k_filling)) ** b.S
    assert b.finite == pytest.approx(float(exact), rel=1e-14)
    assert not b.vacuous


def test_connectivity_upper_bound_vacuous():
    b = connectivity_upper_bound(20, 5, 3.6, 11)
    assert b.S == 0 and b.vacuous and b.finite == 1.0


def test_connectivity_upper_bound_nondecreasing_in_k():
    vals = [connectivity_upper_bound(1e6, k, 3.6, 11).finite for k in range(1, 21)]
    assert all(x <= y + 1e-15 for x, y in zip(vals, vals[1:]))


def test_theorem_thresholds():
    assert theorem2_threshold(1e6, 0.129) == pytest.approx(1.78204, abs=1e-4)
    assert theorem1_threshold(1e6) == pytest.approx(0.129 * math.log(1e6))
    ratios = [theorem2_threshold(N) / theorem1_threshold(N) for N in (1e6, 1e9, 1e12)]
    assert ratios[0] < ratios[1] < ratios[2] < 1
    assert ratios[2] >= 0.999
    assert theorem2_threshold(1.0) < 0
    with pytest.raises(DomainError):
        theorem1_threshold(1.0)
    with pytest.raises(DomainError):
        theorem2_threshold(0.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(2, 1e15))
def test_property_theorem2_below_theorem1(N):
    assert theorem2_threshold(N) < theorem1_threshold(N)


def test_thresholds_increasing():
    Ns = [10 ** e for e in range(1, 16)]
    t1 = [theorem1_threshold(N) for N in Ns]
    t2 = [theorem2_threshold(N) for N in Ns]
    assert all(x < y for x, y in zip(t1, t1[1:]))
    assert all(x < y for x, y in zip(t2, t2[1:]))


def test_recommended_k():
    assert recommended_k(1.78204) == 1
    assert recommended_k(2.0) == 1
    assert recommended_k(-0.5) == 0
