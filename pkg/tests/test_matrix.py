import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_subintensity, series_expm
from phrec.errors import AllRowsConservative, NotSquare, Overflow, RowSumPositive, SignViolation, Singular
from phrec.matrix import expm, solve, validate_subintensity


def test_validate_exponential():
    sub = validate_subintensity([[-1.0]])
    assert sub.dim == 1
    assert np.array_equal(sub.t0, [1.0])


def test_validate_coxian():
    sub = validate_subintensity([[-2.0, 1.0], [0.0, -1.0]])
    assert np.allclose(sub.t0, [1.0, 1.0])


def test_row_sum_positive():
    with pytest.raises(RowSumPositive) as e:
        validate_subintensity([[-1.0, 2.0], [0.0, -1.0]])
    assert e.value.row == 0


@pytest.mark.parametrize("T, exc", [
    ([[1.0, 0.0], [0.0, -1.0]], SignViolation),
    ([[-1.0, -0.5], [0.0, -1.0]], SignViolation),
    ([[-1.0, 1.0], [1.0, -1.0]], AllRowsConservative),
    ([[-1.0, 0.0]], NotSquare),
])
def test_validate_rejects(T, exc):
    with pytest.raises(exc):
        validate_subintensity(T)


def test_rows_of_generator_sum_to_zero(rng):
    for m in (1, 3, 7):
        sub = validate_subintensity(random_subintensity(rng, m))
        G = sub.generator()
        assert np.abs(G.sum(axis=1)).max() < 1e-12


def test_expm_zero_is_identity():
    assert np.array_equal(expm(np.zeros((3, 3)), 4.2), np.eye(3))


def test_expm_diagonal():
    E = expm(np.diag([-1.0, -2.0]), 1.0)
    assert np.allclose(E, np.diag([np.exp(-1), np.exp(-2)]), atol=1e-15)


def test_expm_series_oracle():
    A = np.array([[-2.0, 1.0], [0.0, -1.0]])
    assert np.abs(expm(A, 1.0) - series_expm(A, 1.0)).max() < 1e-12


def test_expm_semigroup(rng):
    for _ in range(20):
        m = int(rng.integers(1, 31))
        A = random_subintensity(rng, m, max_rate=1.0)
        A *= 10 / max(np.abs(A).sum(axis=1).max(), 1e-12)
        s, t = rng.uniform(0, 2, 2)
        assert np.abs(expm(A, s + t) - expm(A, s) @ expm(A, t)).max() < 1e-9


def test_expm_subintensity_is_substochastic(rng):
    for _ in range(20):
        A = random_subintensity(rng, int(rng.integers(1, 12)), max_rate=5.0)
        E = expm(A, rng.uniform(0, 20))
        assert E.min() > -1e-12
        assert E.sum(axis=1).max() <= 1 + 1e-10


def test_expm_batched_matches_loop(rng):
    A = np.stack([random_subintensity(rng, 4) for _ in range(5)])
    t = rng.uniform(0, 50, 5)
    batched = expm(A, t)
    for j in range(5):
        assert np.allclose(batched[j], expm(A[j], t[j]), atol=1e-14, rtol=1e-12)


def test_expm_large_norm_against_series(rng):
    A = random_subintensity(rng, 5, max_rate=3.0)
    assert np.abs(expm(A, 400.0) - series_expm(A, 400.0)).max() < 1e-12


def test_expm_overflow():
    with pytest.raises(Overflow):
        expm(np.array([[800.0]]), 1.0)


def test_expm_not_square():
    with pytest.raises(NotSquare):
        expm(np.zeros((2, 3)))


def test_solve_identity_and_scalar(rng):
    B = rng.normal(size=(4, 3))
    assert np.allclose(solve(np.eye(4), B), B)
    assert np.allclose(solve(np.array([[-1.0]]), np.array([[1.0]])), [[-1.0]])


def test_solve_residual(rng):
    for _ in range(10):
        A = rng.normal(size=(5, 5)) + 5 * np.eye(5)
        B = rng.normal(size=(5, 2))
        X = solve(A, B)
        assert np.abs(A @ X - B).max() <= 1e-10 * np.abs(B).max()


def test_solve_singular():
    with pytest.raises(Singular):
        solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.eye(2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 5),
       s=st.floats(0.0, 3.0), t=st.floats(0.0, 3.0))
def test_expm_semigroup(seed, m, s, t):
    T = random_subintensity(np.random.default_rng(seed), m)
    lhs = expm(T, s + t)
    assert np.abs(lhs - expm(T, s) @ expm(T, t)).max() < 1e-12
    # a sub-intensity gives a sub-stochastic matrix
    assert np.all(lhs >= -1e-15) and np.all(lhs.sum(axis=1) <= 1 + 1e-12)
