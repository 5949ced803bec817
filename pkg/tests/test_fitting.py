import json

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from phrec.errors import ValidationError
from phrec.fitting import (DEFAULT_BOUNDS, BoxMap, FitConfig, FitResult, bootstrap,
                           bootstrap_replicate, fit_restricted, to_json)
from phrec.heart import PARAM_NAMES, REFERENCE_THETA, PatientArrays, log_likelihood

QUICK = FitConfig(starts=2, screen=2, max_evals=300, polish=1, polish_rounds=3)


def ref_values(skip=()):
    return {k: getattr(REFERENCE_THETA, k) for k in PARAM_NAMES if k not in skip}


def test_boxmap_round_trip(rng):
    bm = BoxMap(DEFAULT_BOUNDS, PARAM_NAMES)
    x = REFERENCE_THETA.as_array()
    assert np.allclose(bm.from_z(bm.to_z(x)), x, rtol=1e-9)
    z = rng.normal(size=len(PARAM_NAMES)) * 3
    y = bm.from_z(z)
    for k, v in zip(PARAM_NAMES, y):
        lo, hi = DEFAULT_BOUNDS[k]
        assert lo <= v <= hi


def test_config_validation():
    with pytest.raises(ValidationError):
        FitConfig(starts=0)
    with pytest.raises(ValidationError):
        FitConfig(bounds={**DEFAULT_BOUNDS, "a": (0.0, 1.0)})
    with pytest.raises(ValidationError):
        fit_restricted([], QUICK)


def test_unknown_frozen_name(stanford):
    with pytest.raises(ValidationError):
        fit_restricted(stanford, QUICK, {"nope"})


def test_one_parameter_profile(stanford):
    # every parameter but lambda1 held at the reference; compare with a golden-section search
    pa = PatientArrays.from_records(stanford)
    frozen = ref_values(skip=("lambda1",))
    res = fit_restricted(pa, QUICK, frozen)

    def nll(log_l1):
        return -log_likelihood(REFERENCE_THETA.with_(lambda1=float(np.exp(log_l1))), pa)
    gs = minimize_scalar(nll, bracket=(np.log(1e-3), np.log(0.1)), method="golden", tol=1e-10)
    assert np.log(res.theta_hat.lambda1) == pytest.approx(gs.x, abs=1e-3)
    assert res.loglik == pytest.approx(-gs.fun, abs=1e-6)
    assert res.frozen == frozen
    for k, v in frozen.items():
        assert getattr(res.theta_hat, k) == v


def test_frozen_set_means_zero(stanford):
    frozen = {**ref_values(skip=("lambda1", "gamma1", "gamma2", "gamma3")),
              "gamma1": 0.0, "gamma2": 0.0, "gamma3": 0.0}
    res = fit_restricted(stanford[:40], QUICK, frozen)
    assert (res.theta_hat.gamma1, res.theta_hat.gamma2, res.theta_hat.gamma3) == (0, 0, 0)
    res2 = fit_restricted(stanford[:40], QUICK,
                          {**ref_values(skip=("lambda1", "gamma1", "gamma2", "gamma3")),
                           **dict.fromkeys(("gamma1", "gamma2", "gamma3"), 0.0)})
    assert res2.loglik == res.loglik


def test_fit_result_json_round_trip():
    r = FitResult(REFERENCE_THETA, -885.2, True, 10, {"b": 0.0})
    back = FitResult.from_dict(json.loads(json.dumps(r.to_dict())))
    assert back == r
    assert set(r.to_dict()) == {"theta", "n", "loglik", "convergence", "evals", "frozen"}


def test_bootstrap_identical_resamples(stanford):
    pts = stanford[:30]
    same = [np.arange(30)] * 3
    b = bootstrap(pts, QUICK, 3, seed=1, theta0=REFERENCE_THETA, indices=same, light=False)
    for k in PARAM_NAMES:
        assert b.std[k] == pytest.approx(0.0, abs=1e-12)
    assert b.index == [0, 1, 2]


def test_bootstrap_replicate_reproducible(stanford):
    pts = stanford[:30]
    r1 = bootstrap_replicate(pts, QUICK, REFERENCE_THETA, seed=5, index=2, light=False)
    r2 = bootstrap_replicate(pts, QUICK, REFERENCE_THETA, seed=5, index=2, light=False)
    assert r1.theta_hat.as_array().tobytes() == r2.theta_hat.as_array().tobytes()
    b = bootstrap(pts, QUICK, 3, seed=5, theta0=REFERENCE_THETA, light=False)
    d = json.loads(to_json(b))
    assert {"std", "ci95", "failed", "seed", "index", "replicates"} <= set(d)
    j = b.index.index(2)
    assert b.replicates[j].theta_hat == r1.theta_hat


def test_bootstrap_needs_two(stanford):
    with pytest.raises(ValidationError):
        bootstrap(stanford, QUICK, 1, theta0=REFERENCE_THETA)
