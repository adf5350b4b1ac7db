import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_extremes import evl, grid
from noisy_extremes.dynamics import doubling
from noisy_extremes.noise import NoiseSpec
from noisy_extremes.stats import chi2_gof
from noisy_extremes.stream import trial_stream_ids


@pytest.fixture(scope="module")
def uniform_obs(doubling_setup):
    _, _, K, dens = doubling_setup
    return evl.build_observable(K, dens, 0.5)


@pytest.fixture(scope="module")
def iid_setup():
    # full-support noise on the circle: the chain is i.i.d. uniform
    spec, noise = doubling(2), NoiseSpec(0.5)
    K = grid.discretize(spec, noise, 64)
    return spec, noise, K, grid.stationary(K)


def test_observable_infinite_at_centre(uniform_obs):
    assert uniform_obs(0.5) == math.inf


def test_observable_uniform_closed_form(uniform_obs):
    x = np.array([0.1, 0.3, 0.49, 0.5004, 0.95])
    d = np.minimum(abs(x - 0.5), 1 - abs(x - 0.5))
    assert np.allclose(uniform_obs(x), -np.log(2 * d), rtol=1e-9)


@given(a=st.floats(0.0, 0.5), b=st.floats(0.0, 0.5))
@settings(max_examples=60, deadline=None)
def test_observable_monotone_in_distance(quadratic_setup, a, b):
    _, _, K, dens = quadratic_setup
    obs = evl.build_observable(K, dens, 0.3)
    lo, hi = sorted((a, b))
    assert obs(0.3 + lo) >= obs(0.3 + hi)


def test_observable_rejects_outside(doubling_setup):
    _, _, K, dens = doubling_setup
    with pytest.raises(ValueError):
        evl.build_observable(K, dens, 1.5)


def test_calibrate_closed_form(uniform_obs):
    e = evl.calibrate_levels(uniform_obs, 1000, 1.0)
    assert e.radius == pytest.approx(5e-4, rel=1e-9)
    assert e.u_n == pytest.approx(math.log(1000))
    assert e.mass == pytest.approx(1e-3, rel=1e-9)


@pytest.mark.parametrize("tau", [0.25, 1.0, 3.0])
def test_calibrate_linear_in_tau(quadratic_setup, tau):
    _, _, K, dens = quadratic_setup
    obs = evl.build_observable(K, dens, 0.3)
    a = evl.calibrate_levels(obs, 2000, tau)
    b = evl.calibrate_levels(obs, 2000, 2 * tau)
    assert b.mass / a.mass == pytest.approx(2.0, rel=0.01)


@pytest.mark.parametrize("n", [50, 500, 5000])
def test_calibrate_matches_cell_sum(quadratic_setup, n):
    _, _, K, dens = quadratic_setup
    obs = evl.build_observable(K, dens, 0.3)
    e = evl.calibrate_levels(obs, n, 1.0)
    cells = K.cells_within(e.zeta, e.radius)
    assert abs(dens.pi[cells].sum() - 1.0 / n) <= dens.pi.max() + 1e-15
    assert abs(n * e.mass - 1.0) <= 0.01


def test_calibrate_nested_levels(quadratic_setup):
    _, _, K, dens = quadratic_setup
    obs = evl.build_observable(K, dens, 0.3)
    sched = evl.level_schedule(obs, [100, 1000, 10000], [1.0])
    radii = [e.radius for e in sched]
    levels = [e.u_n for e in sched]
    assert radii == sorted(radii, reverse=True) and levels == sorted(levels)


def test_exceedance_cells_match_ball(quadratic_setup):
    _, _, K, dens = quadratic_setup
    obs = evl.build_observable(K, dens, 0.3)
    e = evl.calibrate_levels(obs, 100, 1.0)
    a = set(evl.exceedance_cells(K, obs, e))
    b = set(K.cells_within(e.zeta, e.radius))
    assert len(a ^ b) <= 2


def test_calibrate_errors(uniform_obs):
    with pytest.raises(ValueError):
        evl.calibrate_levels(uniform_obs, 5, 1.0)
    with pytest.raises(ValueError):
        evl.calibrate_levels(uniform_obs, 100, 0.0)
    with pytest.raises(ValueError):
        evl.calibrate_levels(uniform_obs, 10, 20.0)


def test_sample_initial_follows_pi(quadratic_setup):
    _, _, K, dens = quadratic_setup
    x = evl.sample_initial(K, dens, 3, trial_stream_ids(99, 40000))
    coarse = np.add.reduceat(dens.pi, np.arange(0, K.m, 16))
    counts = np.histogram(x, bins=K.edges[::16])[0]
    assert chi2_gof(counts, coarse).pvalue > 1e-3


def test_sample_initial_in_ball_stays_inside(doubling_setup):
    _, _, K, dens = doubling_setup
    x = evl.sample_initial_in_ball(K, dens, 0.001, 0.01, 5, trial_stream_ids(7, 5000))
    assert np.all(K.domain.distance(x, 0.001) <= 0.01)
    assert np.any(x > 0.9) and np.any(x < 0.1)


def test_tiny_tau_almost_always_survives(doubling_setup, uniform_obs):
    spec, noise, K, dens = doubling_setup
    e = evl.calibrate_levels(uniform_obs, 1000, 1e-3)
    est = evl.evl_estimate(spec, noise, K, dens, e, 2000, 11)
    assert est.p_hat >= 0.99


def test_iid_chain_matches_binomial_law(iid_setup):
    spec, noise, K, dens = iid_setup
    obs = evl.build_observable(K, dens, 0.5)
    e = evl.calibrate_levels(obs, 200, 1.0)
    est = evl.evl_estimate(spec, noise, K, dens, e, 20000, 5, target=(1 - e.mass) ** e.n)
    assert abs(est.p_hat - est.target) <= 3 * est.sigma
    assert est.ci_lo <= est.p_hat <= est.ci_hi


def test_small_grid_oracle(doubling_small):
    spec, noise, K, dens = doubling_small
    obs = evl.build_observable(K, dens, 0.5)
    e = evl.calibrate_levels(obs, 64, 1.0)
    oracle = evl.grid_survival(K, dens, e)
    est = evl.evl_estimate(spec, noise, K, dens, e, 8000, 17, target=oracle)
    assert abs(est.p_hat - oracle) <= 3 * est.sigma


def test_estimate_thread_invariant(doubling_setup, uniform_obs):
    spec, noise, K, dens = doubling_setup
    e = evl.calibrate_levels(uniform_obs, 300, 1.0)
    a = evl.evl_estimate(spec, noise, K, dens, e, 5000, 9, threads=1)
    b = evl.evl_estimate(spec, noise, K, dens, e, 5000, 9, threads=3)
    assert a == b


def test_estimate_decreasing_in_tau(doubling_setup, uniform_obs):
    spec, noise, K, dens = doubling_setup
    p = [evl.evl_estimate(spec, noise, K, dens, evl.calibrate_levels(uniform_obs, 500, t),
                          4000, 21).p_hat for t in (0.5, 1.0, 2.0)]
    assert p[0] > p[1] > p[2]


def test_burn_in_start(doubling_setup, uniform_obs):
    spec, noise, K, dens = doubling_setup
    e = evl.calibrate_levels(uniform_obs, 500, 1.0)
    est = evl.evl_estimate(spec, noise, K, dens, e, 4000, 4, start="burn-in")
    assert abs(est.p_hat - math.exp(-1)) <= 4 * est.sigma
    with pytest.raises(ValueError):
        evl.evl_estimate(spec, noise, K, dens, e, 4000, 4, start="cold")
    with pytest.raises(ValueError):
        evl.evl_estimate(spec, noise, K, dens, e, 50, 4)


def test_block_maxima_probability():
    v = np.array([[0.1, 0.2], [0.5, 0.05], [0.3, 0.3]])
    assert evl.block_maxima_probability(v, 0.3) == pytest.approx(2 / 3)


def test_rules():
    assert evl.k_rule(1000) == 32 and evl.k_rule(10000) == 100
    assert evl.t_rule(1000) == 7


def test_pair_statistic_independent_exceedances():
    n, tau, chains, length = 1000, 1.0, 400, 50000
    rng = np.random.default_rng(4)
    hit = rng.random((chains, length)) < tau / n
    chain, times = np.nonzero(hit)
    window = n // evl.k_rule(n)
    s, se, pairs = evl.pair_statistic(chain, times, length, chains, n, window)
    expected = n * window * (tau / n) ** 2
    assert abs(s - expected) <= 4 * se
    assert expected == pytest.approx(tau ** 2 / evl.k_rule(n), rel=0.01)


def test_pair_statistic_counts_pairs_exactly():
    chain = np.array([0, 0, 0, 1])
    times = np.array([2, 4, 20, 3])
    s, _, pairs = evl.pair_statistic(chain, times, 30, 2, 10, 5)
    assert pairs == 1 and s == pytest.approx(10 * 1 / (2 * 25))
    with pytest.raises(ValueError):
        evl.pair_statistic(chain, times, 5, 2, 10, 5)


def test_d2_gap_empty_window(doubling_setup, uniform_obs):
    _, _, K, dens = doubling_setup
    e = evl.calibrate_levels(uniform_obs, 100, 1.0)
    assert evl.d2_gap(K, dens.pi, e, 3, 0) == 0.0
    with pytest.raises(ValueError):
        evl.d2_gap(K, dens.pi, e, 0, 5)


def test_d2_gap_vanishes_past_mixing(doubling_setup, quadratic_setup):
    for _, _, K, dens in (doubling_setup, quadratic_setup):
        U = K.cells_within(K.midpoints[K.m // 3], 4 * K.cell_measure)
        assert evl.d2_gap(K, dens.pi, U, 200, 20) < 1e-8


def test_d2_gap_decays_with_rate(quadratic_setup):
    _, _, K, dens = quadratic_setup
    U = K.cells_within(0.3, 6 * K.cell_measure)
    gaps = np.array([evl.d2_gap(K, dens.pi, U, t, 10) for t in range(1, 31)])
    assert gaps[-1] < gaps[0]
    fit = grid.fit_geometric_rate(grid.tv_profile(K, dens.pi, 40))
    # the gap is dominated by the mixing profile: joint mass times 2 d(t)
    d = grid.tv_profile(K, dens.pi, 30)
    assert np.all(gaps <= 2 * dens.pi[U].sum() * d + 1e-15)
    assert fit.lam > 1


def test_d2_gap_brute_force():
    # enumerate two-step paths of a small chain to check the taboo products
    spec = doubling()
    P16 = np.full((16, 16), 1 / 32)
    P16[np.arange(16), (np.arange(16) * 3) % 16] += 0.5
    K = grid.from_matrix(spec, P16)
    pi = grid.stationary(K).pi
    U = [0, 5]
    t, ell = 2, 2
    Pt = np.linalg.matrix_power(P16, t)
    joint = 0.0
    for i in U:
        for a, b in product(range(16), repeat=2):
            if a in U or b in U:
                continue
            joint += pi[i] * Pt[i, a] * P16[a, b]
    marg = sum(pi[a] * P16[a, b] for a, b in product(range(16), repeat=2)
               if a not in U and b not in U)
    expected = abs(joint - pi[U].sum() * marg)
    assert evl.d2_gap(K, pi, U, t, ell) == pytest.approx(expected, abs=1e-15)
