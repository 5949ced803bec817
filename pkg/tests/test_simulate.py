import numpy as np
import pytest

from oracles import random_stage_model
from phrec.counts import count_distribution
from phrec.errors import NegativeTime, ValidationError
from phrec.simulate import binomial_se, simulate_counts, simulate_sojourn
from phrec.stages import StageModel


def no_death_toy():
    # one stage, two states cycling; the exit is too slow to ever fire
    T = np.array([[-1.0, 1.0], [2.0, -2.0 - 1e-9]])
    return StageModel.from_arrays(1, 2, T, np.array([1.0, 0.0]))


def test_no_death_never_counts():
    s = simulate_counts(no_death_toy(), 0, [1.0, 5.0], paths=2000, seed=1, lmax=2)
    assert np.all(s.count_freq[:, 0] == 1.0)
    assert np.all(s.stage_hit_freq[:, 0] == 1.0)


def test_single_state_sojourn():
    m = StageModel.from_arrays(1, 1, np.array([[-1.0]]), np.array([1.0]))
    mean, se, used = simulate_sojourn(m, 0, 0.0, 1.0, paths=200_000, seed=3)
    assert used == 200_000
    assert abs(mean - (1 - np.exp(-1))) < 4 * se


def test_thread_invariance():
    m = random_stage_model(np.random.default_rng(5), 2, 2)
    a = simulate_counts(m, 0, [0.5, 2.0], paths=150_000, seed=9, threads=1)
    b = simulate_counts(m, 0, [0.5, 2.0], paths=150_000, seed=9, threads=3)
    assert np.array_equal(a.count_freq, b.count_freq)
    assert np.array_equal(a.sojourn_mean, b.sojourn_mean)


def test_absorption_matches_survival():
    m = random_stage_model(np.random.default_rng(8), 2, 2)
    t = 1.3
    s = simulate_counts(m, 0, [t], paths=100_000, seed=4)
    ph = m.phase_type()
    dead = 1 - float(ph.survival(t))
    assert abs(s.stage_hit_freq[0, -1] - dead) < 4 * binomial_se(dead, s.paths)


def test_counts_match_analytic():
    m = random_stage_model(np.random.default_rng(21), 3, 2, start=1)
    H = [0.4, 1.5]
    s = simulate_counts(m, 1, H, paths=100_000, seed=2, lmax=3)
    d = count_distribution(m, 1, H, 3)
    se = binomial_se(d.probs, s.paths)
    assert np.all(np.abs(s.count_freq[:, :4] - d.probs) < 4.5 * se + 1e-12)


def test_sojourn_matches_analytic():
    m = random_stage_model(np.random.default_rng(13), 2, 2)
    mean, se, used = simulate_sojourn(m, 0, 0.5, 1.0, paths=200_000, seed=6)
    assert used > 0
    assert abs(mean - m.expected_sojourn(0, 0.5, 1.0)) < 4 * se


def test_input_checks():
    m = no_death_toy()
    with pytest.raises(NegativeTime):
        simulate_counts(m, 0, [-1.0])
    with pytest.raises(ValidationError):
        simulate_counts(m, 0, [2.0, 1.0])
    with pytest.raises(ValidationError):
        simulate_counts(m, 0, [1.0], paths=0)
