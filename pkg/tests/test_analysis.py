import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sci_integrate
from scipy import stats

from msaircomp.analysis import (
    avg_channel_gain,
    avg_tx_power,
    beta_for_power,
    count_distribution,
    misalignment_stats,
    mse_curve,
    mse_optsel,
    mse_selfirst,
    optimize_params,
    rx_scale_optsel,
    rx_scale_selfirst,
    solve_g_th,
    success_prob,
)
from msaircomp.channel import RayleighFading
from msaircomp.policies import PolicyParams

G10 = RayleighFading(10.0)
EQUAL = [G10] * 100
MIXED = [RayleighFading(10.0)] * 30 + [RayleighFading(3.0)] * 50 + [RayleighFading(25.0)] * 20


def quad(f, a, b):
    return sci_integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=500)[0]


# independent single-node references, written directly from the policy rules


def ref_selfirst(mean, p):
    pdf = lambda g: math.exp(-g / mean) / mean
    f_th = 1 - math.exp(-p.g_th / mean)
    ps = 1 - f_th**p.n_slots
    err = lambda g: (p.rx_scale * min(p.alpha_th, math.sqrt(p.p_max * g)) - 1) ** 2
    below = quad(lambda g: err(g) * pdf(g), 0, p.g_0) + quad(lambda g: err(g) * pdf(g), p.g_0, p.g_th)
    return ps * (p.rx_scale * p.alpha_th - 1) ** 2 + (1 - ps) * below / f_th


def ref_optsel(mean, p):
    n = p.n_slots
    dens = lambda g: n * math.exp(-g / mean) / mean * (1 - math.exp(-g / mean)) ** (n - 1)
    err = lambda g: (p.rx_scale * min(p.alpha_th, math.sqrt(p.p_max * g)) - 1) ** 2
    return quad(lambda g: err(g) * dens(g), 0, p.g_0) + quad(lambda g: err(g) * dens(g), p.g_0, np.inf)


# -- thresholds --------------------------------------------------------------------


@pytest.mark.parametrize("n, p_th, expected", [(2, 0.90, 3.80), (5, 0.99, 5.08), (4, 0.98, 4.72)])
def test_solve_g_th_reference_values(n, p_th, expected):
    assert solve_g_th(EQUAL, n, p_th) == pytest.approx(expected, abs=0.01)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.floats(0.5, 0.999))
def test_threshold_residual(n, p_th):
    for profiles in (EQUAL, MIXED):
        g = solve_g_th(profiles, n, p_th)
        avg = np.mean([success_prob(m, g, n) for m in profiles])
        assert abs(avg - p_th) < 1e-9


def test_solve_g_th_monotone():
    gs = [solve_g_th(EQUAL, n, 0.98) for n in range(1, 9)]
    assert all(b > a for a, b in zip(gs, gs[1:]))
    assert solve_g_th(EQUAL, 4, 0.90) > solve_g_th(EQUAL, 4, 0.99)


def test_solve_g_th_validation():
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            solve_g_th(EQUAL, 3, bad)
    with pytest.raises(ValueError):
        solve_g_th(EQUAL, 0, 0.9)
    with pytest.raises(ValueError):
        solve_g_th([], 2, 0.9)


def test_success_prob():
    assert success_prob(G10, 10.0, 1) == pytest.approx(math.exp(-1))
    assert success_prob(G10, 10.0, 3) == pytest.approx(1 - (1 - math.exp(-1)) ** 3)
    with pytest.raises(ValueError):
        success_prob(G10, 0.0, 2)


# -- MSE and receive scaling ---------------------------------------------------------


def params_for(n, frac, a=0.2, p_th=0.98, profiles=EQUAL):
    g_th = solve_g_th(profiles, n, p_th)
    return PolicyParams(n, g_th, frac * math.sqrt(10.0 * g_th), a)


@pytest.mark.parametrize("n, frac, a", [(1, 0.5, 0.3), (3, 0.7, 0.25), (4, 1.0, 0.2), (6, 0.3, 0.9)])
def test_mse_matches_direct_integration(n, frac, a):
    p = params_for(n, frac, a, profiles=[G10])
    m = mse_selfirst([G10], p)
    assert m.mse1 + m.mse2 == pytest.approx(ref_selfirst(10.0, p), rel=1e-7)
    assert m.noise == pytest.approx(n * a * a)
    o = mse_optsel([G10], p)
    assert o.mse1 + o.mse2 == pytest.approx(ref_optsel(10.0, p), rel=1e-7)


def test_mse_additive_over_node_groups():
    p = params_for(3, 0.8, 0.01, profiles=MIXED)
    total = mse_selfirst(MIXED, p)
    parts = [n * (mse_selfirst([RayleighFading(g)], p).mse1 + mse_selfirst([RayleighFading(g)], p).mse2)
             for g, n in ((10.0, 30), (3.0, 50), (25.0, 20))]
    assert total.mse1 + total.mse2 == pytest.approx(sum(parts), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.floats(0.05, 1.0), st.sampled_from(["selfirst", "optsel"]))
def test_rx_scale_is_quadratic_minimum(n, frac, policy):
    p = params_for(n, frac)
    rx = (rx_scale_selfirst if policy == "selfirst" else rx_scale_optsel)(EQUAL, p)
    mse = mse_selfirst if policy == "selfirst" else mse_optsel
    at = lambda a: mse(EQUAL, PolicyParams(p.n_slots, p.g_th, p.alpha_th, a)).total
    best = at(rx)
    assert best <= at(rx * (1 + 1e-3)) + 1e-12
    assert best <= at(rx * (1 - 1e-3)) + 1e-12


def test_rx_scale_optsel_oracle():
    # frozen from a dense scan of the directly integrated objective
    p = PolicyParams(3, 5.0, 3.5, 1.0)
    assert rx_scale_optsel([G10], p) == pytest.approx(0.229529125, rel=1e-4)
    assert rx_scale_optsel(EQUAL, p) == pytest.approx(0.28506425, rel=1e-4)


def test_rx_scale_ignores_given_scale_and_honors_beta():
    p = params_for(4, 0.9)
    q = PolicyParams(p.n_slots, p.g_th, p.alpha_th, 7.0)
    assert rx_scale_selfirst(EQUAL, p) == rx_scale_selfirst(EQUAL, q)
    capped = PolicyParams(p.n_slots, p.g_th, p.alpha_th, 1.0, beta=5.0)
    # a noise floor removes the noise penalty below it, pulling a up toward the
    # signal-only optimum
    assert rx_scale_selfirst(EQUAL, capped) > rx_scale_selfirst(EQUAL, p)


def test_alpha_ordering_enforced():
    p = params_for(2, 0.5)
    with pytest.raises(ValueError):
        PolicyParams(p.n_slots, p.g_th, p.alpha_0 * 1.01, 1.0)


def test_optsel_misalignment_and_mse2_shrink_with_slots():
    mse2, counts = [], []
    for n in range(1, 8):
        p = PolicyParams(n, 5.0, 3.5, 0.28)
        mse2.append(mse_optsel(EQUAL, p).mse2)
        counts.append(misalignment_stats(EQUAL, p, "optsel").expected_count)
    assert all(b <= a for a, b in zip(mse2, mse2[1:]))
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_mse_curve_matches_pointwise():
    g_th = solve_g_th(EQUAL, 4, 0.98)
    alphas = np.array([1.0, 2.5, 4.0, 4.71])
    a, mse = mse_curve(EQUAL, "selfirst", 4, g_th, 10.0, 1.0, alphas)
    for al, ai, m in zip(alphas, a, mse):
        p = PolicyParams(4, g_th, al, ai)
        assert rx_scale_selfirst(EQUAL, p) == pytest.approx(ai, rel=1e-12)
        assert mse_selfirst(EQUAL, p).total == pytest.approx(m, rel=1e-9)


# -- optimizer ----------------------------------------------------------------------


def test_optimizer_reference_point():
    o = optimize_params(EQUAL, range(1, 9), 0.98)
    assert o.params.n_slots == 4
    assert o.params.alpha_th == pytest.approx(4.71, abs=0.005)
    assert o.params.rx_scale * o.params.alpha_th == pytest.approx(1.0, abs=0.01)
    assert o.mse.total == pytest.approx(o.objective, rel=1e-12)


def test_optimizer_beats_neighbours():
    o = optimize_params(EQUAL, [3], 0.95)
    p = o.params
    for d in (-0.005, 0.005):
        al = p.alpha_th + d
        if 0 < al <= p.alpha_0:
            q = PolicyParams(3, p.g_th, al, 1.0)
            q = PolicyParams(3, p.g_th, al, rx_scale_selfirst(EQUAL, q))
            assert o.mse.total <= mse_selfirst(EQUAL, q).total + 1e-12


def test_optimizer_small_beta_is_inert():
    plain = optimize_params(EQUAL, range(1, 9), 0.98)
    floor = 0.5 * plain.params.n_slots * plain.params.rx_scale**2
    capped = optimize_params(EQUAL, range(1, 9), 0.98, beta=floor)
    assert capped.params.alpha_th == plain.params.alpha_th
    assert capped.mse.total == pytest.approx(plain.mse.total, rel=1e-12)


def test_optimizer_beta_reduces_power():
    powers = []
    for beta in (0.0, 0.2, 0.4, 0.8, 1.5):
        o = optimize_params(EQUAL, range(1, 9), 0.98, beta=beta)
        powers.append(avg_tx_power(EQUAL, o.params, "selfirst").avg)
        # reported MSE carries the true noise term
        assert o.mse.noise == pytest.approx(o.params.n_slots * o.params.rx_scale**2)
    assert all(b <= a for a, b in zip(powers, powers[1:]))


def test_optimizer_validation():
    with pytest.raises(ValueError):
        optimize_params(EQUAL, [], 0.9)
    with pytest.raises(ValueError):
        optimize_params(EQUAL, [2], 0.9, policy="aircomp")


def test_beta_for_power_hits_target():
    beta = beta_for_power(EQUAL, 1.2, range(1, 9), 0.98)
    o = optimize_params(EQUAL, range(1, 9), 0.98, beta=beta)
    assert avg_tx_power(EQUAL, o.params, "selfirst").avg <= 1.2
    assert beta_for_power(EQUAL, 100.0, [4], 0.98) == 0.0


# -- gain, misalignment and power -----------------------------------------------------


def test_avg_gain_reference_values():
    p1 = params_for(1, 1.0)
    assert avg_channel_gain(EQUAL, p1, "optsel") == pytest.approx(10.0, rel=1e-12)
    assert avg_channel_gain(EQUAL, p1, "selfirst") == pytest.approx(10.0, rel=1e-12)
    assert avg_channel_gain(EQUAL, params_for(2, 1.0), "optsel") == pytest.approx(15.0, abs=1e-6)
    assert avg_channel_gain(EQUAL, params_for(4, 1.0), "optsel") == pytest.approx(10 * (1 + 1/2 + 1/3 + 1/4))
    assert avg_channel_gain(MIXED, p1, "aircomp") == pytest.approx(0.3 * 10 + 0.5 * 3 + 0.2 * 25)


def test_count_distribution():
    pmf = count_distribution([0.1] * 20)
    np.testing.assert_allclose(pmf, stats.binom.pmf(np.arange(21), 20, 0.1))
    dp = count_distribution([0.1] * 19 + [0.1 + 1e-15])
    np.testing.assert_allclose(dp, pmf, atol=1e-12)
    het = count_distribution([0.2, 0.5, 0.9])
    assert het.sum() == pytest.approx(1.0)
    assert het[0] == pytest.approx(0.8 * 0.5 * 0.1)
    assert het[3] == pytest.approx(0.2 * 0.5 * 0.9)


def test_misalignment_counts():
    p = params_for(4, 1.0)
    s = misalignment_stats(EQUAL, p, "selfirst")
    assert s.count_pmf.sum() == pytest.approx(1.0)
    assert s.expected_count == pytest.approx(np.dot(np.arange(101), s.count_pmf))
    # alpha_th = alpha_0 means only the threshold-crossers align
    assert s.aligned_prob[0] == pytest.approx(0.98)


def test_power_matches_direct_integration():
    p = params_for(3, 0.8, profiles=[G10])
    pdf = lambda g: math.exp(-g / 10) / 10
    f_th = 1 - math.exp(-p.g_th / 10)
    ps = 1 - f_th**3
    inv = lambda g: min(p.alpha_th**2 / g, 10.0) * pdf(g)
    above = quad(inv, p.g_th, np.inf) / (1 - f_th)
    below = (quad(inv, 0, p.g_0) + quad(inv, p.g_0, p.g_th)) / f_th
    got = avg_tx_power([G10], p, "selfirst")
    assert got.avg == pytest.approx(ps * above + (1 - ps) * below, rel=1e-7)
    dens = lambda g: 3 * pdf(g) * (1 - math.exp(-g / 10)) ** 2
    inv3 = lambda g: min(p.alpha_th**2 / g, 10.0) * dens(g)
    ref = quad(inv3, 0, p.g_0) + quad(inv3, p.g_0, np.inf)
    assert avg_tx_power([G10], p, "optsel").avg == pytest.approx(ref, rel=1e-7)


def test_power_limits():
    g_th = solve_g_th(EQUAL, 3, 0.95)
    tiny = PolicyParams(3, g_th, 1e-3, 1.0)
    assert avg_tx_power(EQUAL, tiny, "selfirst").avg < 1e-3
    full = PolicyParams(3, g_th, math.sqrt(10 * g_th), 1.0)
    for policy in ("selfirst", "optsel"):
        assert avg_tx_power(EQUAL, full, policy).avg <= 10.0
