import dataclasses
import math

import numpy as np
import pytest

from mqr.bandit import BanditInstance, ExperimentConfig, Trajectory, replay_states, run_experiment
from mqr.errors import DegenerateLikelihoodError, EmptyDatasetError, MalformedTrajectoryError, NonPositiveAlphaError
from mqr.estimation import (
    build_choice_data,
    choice_prob_2,
    choice_prob_n,
    estimate_alpha,
    log_likelihood,
    reconstruct_states,
)
from mqr.policies import MQRPolicy
from mqr.stats_dist import RngStream, gaussian_cdf


def _traj(arms, rewards, means=(0.5, 0.5)):
    return Trajectory(BanditInstance(means), "test", arms, rewards)


def _mqr_data(alpha, T, K=1000, seed=0, n_arms=2):
    res = run_experiment(
        MQRPolicy(alpha), ExperimentConfig(n_arms=n_arms, horizon=T, replications=K, seed=seed, keep_trajectories=True)
    )
    return list(res.trajectories())


@pytest.fixture(scope="module")
def data_05_100():
    return _mqr_data(0.5, 100)


# ---- state reconstruction ---------------------------------------------------


def test_reconstruct_examples():
    mu, k = reconstruct_states(_traj([0], [1]))
    assert mu.shape == (1, 2) and not mu.any() and not k.any()
    mu, k = reconstruct_states(_traj([0, 1], [1, 0]))
    assert np.allclose(mu[1], [0.5, 0.0]) and np.array_equal(k[1], [1, 0])


def test_reconstruct_matches_replay():
    rng = np.random.default_rng(3)
    arms = rng.integers(0, 3, 100)
    rewards = rng.integers(0, 2, 100)
    mu, k = reconstruct_states(_traj(arms, rewards, (0.1, 0.2, 0.3)))
    for t in (0, 1, 50, 99):
        ref = replay_states(3, arms[:t], rewards[:t])
        assert np.array_equal(k[t], [s.k for s in ref])
        assert np.allclose(mu[t], [s.mu_hat for s in ref], atol=1e-14, rtol=0)


def test_reconstruct_rejects_bad_input():
    with pytest.raises(MalformedTrajectoryError):
        reconstruct_states(_traj([0, 2], [1, 0]))
    with pytest.raises(MalformedTrajectoryError):
        reconstruct_states(_traj([0, 1], [1, 2]))


# ---- choice probabilities ---------------------------------------------------


def test_choice_prob_2_examples():
    assert choice_prob_2([0.3, 0.3], [1, 9], 0.7) == 0.5
    p = choice_prob_2([0.5, 0.3], [3, 7], 0.5)
    assert p == pytest.approx(gaussian_cdf(0.2 / math.sqrt(0.375)), abs=1e-15)
    assert p == pytest.approx(0.6280, abs=1e-4)
    ps = [choice_prob_2([0.6, 0.5], [50, 50], a) for a in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(ps) >= 0) and ps[1] > ps[0] and ps[-1] > 1 - 1e-12
    with pytest.raises(NonPositiveAlphaError):
        choice_prob_2([0.1, 0.2], [0, 0], 0.0)


def test_choice_prob_2_against_monte_carlo():
    # oracle: frequency of the argmax over 10^6 noise draws
    rng = np.random.default_rng(5)
    for mu, k, alpha in [((0.5, 0.3), (3, 7), 0.5), ((0.2, 0.25), (0, 4), 1.3), ((0.7, 0.1), (20, 2), 0.3)]:
        beta = (np.asarray(k) + 1.0) ** -alpha
        eps = rng.standard_normal((10**6, 2))
        f = np.mean(np.argmax(np.asarray(mu) + eps * beta, axis=1) == 0)
        p = choice_prob_2(mu, k, alpha)
        assert abs(f - p) < 4 * math.sqrt(p * (1 - p) / 10**6)


def test_choice_prob_n_matches_closed_form():
    rng = np.random.default_rng(7)
    mu = rng.uniform(0, 1, (100, 2))
    k = rng.integers(0, 200, (100, 2))
    for alpha in (0.2, 1.0, 3.0):
        p = choice_prob_n(mu, k, alpha)
        assert np.max(np.abs(p[:, 0] - choice_prob_2(mu, k, alpha))) < 1e-8


def test_choice_prob_n_normalization():
    rng = np.random.default_rng(8)
    for n in (2, 3, 5):
        mu = rng.uniform(0, 1, (200, n))
        k = rng.integers(0, 1000, (200, n))
        for alpha in (0.05, 0.5, 2.0, 3.0):
            p = choice_prob_n(mu, k, alpha)
            assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-8
            assert p.min() >= 0


def test_choice_prob_n_symmetric_states():
    for n in (2, 3, 4, 7):
        p = choice_prob_n(np.full(n, 0.4), np.full(n, 5), 0.8)
        assert np.max(np.abs(p - 1.0 / n)) < 1e-8


def test_choice_prob_n_dominant_arm_and_monte_carlo():
    p = choice_prob_n([0.99, 0.0, 0.0], [100, 100, 100], 1.0)
    rng = np.random.default_rng(9)
    theta = np.array([0.99, 0.0, 0.0]) + rng.standard_normal((10**6, 3)) * 101.0**-1
    assert np.mean(np.argmax(theta, axis=1) == 0) > 0.999
    assert p[0] > 0.999
    # a less lopsided three-arm state against the same kind of oracle
    mu, k, alpha = np.array([0.4, 0.35, 0.2]), np.array([2, 5, 0]), 0.6
    theta = mu + rng.standard_normal((10**6, 3)) * (k + 1.0) ** -alpha
    f = np.bincount(np.argmax(theta, axis=1), minlength=3) / 10**6
    p = choice_prob_n(mu, k, alpha)
    assert np.all(np.abs(f - p) < 4 * np.sqrt(p * (1 - p) / 10**6))


# ---- likelihood -------------------------------------------------------------


def test_log_likelihood_trivial_cases():
    one = _traj([1], [0])
    assert log_likelihood([one], 0.7) == pytest.approx(math.log(0.5), abs=1e-15)
    assert log_likelihood([one] * 25, 2.0) == pytest.approx(25 * math.log(0.5), abs=1e-12)
    three = Trajectory(BanditInstance((0.1, 0.2, 0.3)), "t", [2], [1])
    assert log_likelihood([three], 1.0) == pytest.approx(math.log(1 / 3), abs=1e-8)


def test_log_likelihood_peaks_near_truth(data_05_100):
    cd = build_choice_data(data_05_100)
    ll = log_likelihood(cd, 0.5)
    assert ll > log_likelihood(cd, 0.1)
    assert ll > log_likelihood(cd, 1.5)


def test_log_likelihood_clamps():
    # a deterministic-looking choice against a huge gap drives p below the clamp
    t = _traj([0, 1, 0, 1], [1, 0, 1, 0], (0.9, 0.1))
    ll, clamped = log_likelihood([t], 50.0, return_clamped=True)
    assert clamped >= 1 and math.isfinite(ll)


def test_empty_and_degenerate():
    with pytest.raises(EmptyDatasetError):
        build_choice_data([])
    with pytest.raises(DegenerateLikelihoodError):
        estimate_alpha([_traj([0], [1])] * 10)


def test_mixed_arm_counts_rejected():
    a = _traj([0], [1])
    b = Trajectory(BanditInstance((0.1, 0.2, 0.3)), "t", [0], [1])
    with pytest.raises(MalformedTrajectoryError):
        build_choice_data([a, b])


# ---- MLE recovery -----------------------------------------------------------


@pytest.mark.parametrize(
    "alpha,T,band",
    [(0.5, 1000, (0.47, 0.53)), (0.2, 1000, (0.17, 0.23)), (1.0, 100, (0.85, 1.05))],
    ids=["a0.5-T1000", "a0.2-T1000", "a1.0-T100"],
)
def test_estimate_alpha_recovers_truth(alpha, T, band):
    fit = estimate_alpha(_mqr_data(alpha, T))
    assert band[0] <= fit.alpha_hat <= band[1]
    assert fit.unimodal and not fit.at_lower_bound and not fit.at_upper_bound
    assert fit.n_trajectories == 1000 and fit.n_decisions == 1000 * T


def test_estimate_alpha_three_arms():
    fit = estimate_alpha(_mqr_data(0.8, 40, K=100, n_arms=3))
    assert abs(fit.alpha_hat - 0.8) < 0.2


def test_estimate_ignores_stored_means(data_05_100):
    fit = estimate_alpha(data_05_100)
    rng = np.random.default_rng(0)
    corrupted = [dataclasses.replace(t, instance=BanditInstance(tuple(rng.uniform(0, 1, 2)))) for t in data_05_100]
    assert estimate_alpha(corrupted).alpha_hat == fit.alpha_hat


def test_estimate_bracket_validation(data_05_100):
    with pytest.raises(ValueError):
        estimate_alpha(data_05_100, bracket=(1.0, 0.5))
    fit = estimate_alpha(data_05_100, bracket=(1.5, 3.0))
    assert fit.at_lower_bound
