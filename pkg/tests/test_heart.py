import numpy as np
import pytest

from oracles import adaptive_simpson
from phrec.counts import count_distribution, count_prob_between, count_prob_zero
from phrec.errors import BadInterval, NonFiniteRate, NonPositiveLikelihood, ValidationError
from phrec.heart import (REFERENCE_THETA, TOTAL_EXIT, Covariates, HeartParams, PatientArrays,
                         PatientRecord, build_generator, contribution, f1, f10, f12, f20,
                         log_contributions, log_likelihood, lrt)
from phrec.matrix import expm, validate_subintensity

COV0 = Covariates(0.0, 0.0, 0)


def scalar_theta(**kw):
    base = dict(a=0.01, b=0.02, q=0.03, p=1.0, lambda0=0.0, lambda1=0.05, n=1)
    base.update(kw)
    return HeartParams(**base)


def test_params_validation():
    with pytest.raises(ValidationError):
        HeartParams(a=-1, b=0, q=0, p=0, lambda0=0, lambda1=0)
    with pytest.raises(ValidationError):
        scalar_theta(n=0)
    with pytest.raises(ValidationError):
        Covariates(0, 0, 2)


def test_n1_generator():
    th = scalar_theta()
    m = build_generator(th, COV0)
    a, b, q, l1 = th.a, th.b, th.q, th.lambda1
    assert np.allclose(m.T, [[-(a + b + q + l1), l1], [0.0, -(a + q)]], rtol=0, atol=1e-15)
    assert np.array_equal(m.alpha, [1.0, 0.0])


def test_reference_generator_is_valid():
    for age in (30, 50):
        m = build_generator(REFERENCE_THETA, Covariates.from_age_years(age, 3, 1))
        validate_subintensity(m.T)
        assert np.all(np.diff(m.exit_to_death(0)) > 0)
        assert np.all(np.diff(m.exit_to_death(1)) > 0)


def test_generator_deterministic():
    c = Covariates(1.5, 2.0, 1)
    assert np.array_equal(build_generator(REFERENCE_THETA, c).T, build_generator(REFERENCE_THETA, c).T)


def test_nonfinite_rate():
    with pytest.raises(NonFiniteRate):
        build_generator(REFERENCE_THETA.with_(p=1000.0), COV0)


def test_f1():
    m = build_generator(REFERENCE_THETA, Covariates(-5.0, 3.0, 0))
    assert f1(m, 0.0) == pytest.approx(1.0)
    ts = np.linspace(0, 500, 26)
    vals = [f1(m, t) for t in ts]
    assert np.all(np.diff(vals) <= 0)
    for t in (10.0, 200.0):
        assert f1(m, t) == pytest.approx(count_prob_zero(m, 0, t), abs=1e-12)


def test_scalar_formulas():
    th = scalar_theta()
    m = build_generator(th, COV0)
    q1, q2, l1 = th.a + th.b + th.q, th.a + th.q, th.lambda1
    s, t = 3.0, 11.0
    assert f12(m, s, t) == pytest.approx(np.exp(-(q1 + l1) * s) * l1 * np.exp(-q2 * (t - s)), rel=1e-12)
    assert f10(m, t) == pytest.approx(np.exp(-(q1 + l1) * t) * q1, rel=1e-12)
    assert f20(m, s, t) == pytest.approx(np.exp(-(q1 + l1) * s) * l1 * np.exp(-q2 * (t - s)) * q2,
                                         rel=1e-12)
    assert f10(m, 0.0) == pytest.approx(q1)


def test_no_transplant_channel():
    m = build_generator(scalar_theta(lambda1=0.0), COV0)
    assert f12(m, 1.0, 4.0) == 0.0
    assert f20(m, 1.0, 4.0) == 0.0


def test_bad_interval():
    m = build_generator(scalar_theta(), COV0)
    with pytest.raises(BadInterval):
        f12(m, 5.0, 2.0)


def test_total_death_probability():
    m = build_generator(scalar_theta(n=2, lambda0=0.1), Covariates(0.0, 0.0, 1))
    die1 = adaptive_simpson(lambda t: f10(m, t), 0.0, 2000.0, tol=1e-10)
    a = m.stage_alpha(0)
    T1, T12, T2 = m.block(0, 0), m.block(0, 1), m.block(1, 1)
    t20 = m.exit_to_death(1)

    def inner(s):
        return adaptive_simpson(lambda t: a @ expm(T1, s) @ T12 @ expm(T2, t - s) @ t20, s, s + 2000.0,
                                tol=1e-9)
    die2 = adaptive_simpson(inner, 0.0, 2000.0, tol=1e-8)
    assert die1 <= 1.0
    assert die1 + die2 == pytest.approx(1.0, abs=1e-6)


def test_partition_of_outcomes():
    m = build_generator(REFERENCE_THETA, Covariates(-10.0, 3.0, 0))
    for t in (30.0, 365.0, 1000.0):
        died_first = adaptive_simpson(lambda u: f10(m, u), 0.0, t, tol=1e-11)
        assert died_first == pytest.approx(count_prob_between(m, 0, "D", t), abs=1e-7)
        d = count_distribution(m, 0, [t], 2)
        assert f1(m, t) + d.probs[0, 1:].sum() == pytest.approx(1.0, abs=1e-6)


def _patients():
    return [
        PatientRecord("a", None, 100.0, False, Covariates(-5, 1, 0)),
        PatientRecord("b", 10.0, 400.0, False, Covariates(3, 2, 1)),
        PatientRecord("c", None, 50.0, True, Covariates(10, 0.5, 0)),
        PatientRecord("d", 30.0, 90.0, True, Covariates(-2, 4, 0)),
    ]


def test_batched_matches_scalar():
    pts = _patients()
    terms = log_contributions(REFERENCE_THETA, pts)
    for p, v in zip(pts, terms):
        m = build_generator(REFERENCE_THETA, p.covariates)
        assert v == pytest.approx(np.log(contribution(m, p)), abs=1e-10)


def test_additivity():
    pts = _patients()
    full = log_likelihood(REFERENCE_THETA, pts)
    term = log_contributions(REFERENCE_THETA, pts[1:2])[0]
    assert full - log_likelihood(REFERENCE_THETA, pts[:1] + pts[2:]) == pytest.approx(term, abs=1e-10)


def test_censored_at_start_contributes_zero():
    p = PatientRecord("z", None, 1e-12, False, COV0)
    assert log_likelihood(REFERENCE_THETA, [p]) == pytest.approx(0.0, abs=1e-12)


def test_record_invariants():
    with pytest.raises(ValidationError):
        PatientRecord("x", 5.0, 5.0, False, COV0)
    with pytest.raises(ValidationError):
        PatientRecord("x", None, 0.0, False, COV0)


def test_nonpositive_likelihood_reports_patient():
    pts = _patients()
    with pytest.raises(NonPositiveLikelihood) as e:
        log_likelihood(REFERENCE_THETA.with_(lambda1=0.0), pts)
    assert e.value.id == "b"


def test_far_tail_stays_finite():
    p = PatientRecord("t", None, 20000.0, False, Covariates(0, 0, 0))
    assert np.isfinite(log_likelihood(REFERENCE_THETA, [p]))


def test_reference_loglik(stanford):
    assert log_likelihood(REFERENCE_THETA, stanford) == pytest.approx(-885.17, abs=0.5)


def test_total_exit_reading_differs(stanford):
    death = log_likelihood(REFERENCE_THETA, stanford)
    total = log_likelihood(REFERENCE_THETA, stanford, TOTAL_EXIT)
    assert abs(total - death) > 10


def test_patient_arrays_take(stanford):
    pa = PatientArrays.from_records(stanford)
    sub = pa.take([0, 0, 5])
    assert len(sub) == 3
    assert log_likelihood(REFERENCE_THETA, sub) == pytest.approx(
        2 * log_likelihood(REFERENCE_THETA, [stanford[0]]) + log_likelihood(REFERENCE_THETA, [stanford[5]]))


def test_lrt():
    assert lrt(-10.0, -10.0) == 0.0
    assert lrt(-885.17, -896.48) == pytest.approx(22.62)
