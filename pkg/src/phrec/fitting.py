"""Maximum-likelihood fitting of the heart model, with bootstrap.

The search runs Nelder-Mead in unbounded coordinates. Each bounded parameter
is mapped through a logit of its position in the box; rate parameters use
the position of their logarithm, so that 1e-12..1 is searched evenly in
magnitude.
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit
from scipy.stats import qmc

from .errors import AllStartsFailed, BootstrapFailure, PhrecError, ValidationError
from .heart import NONNEGATIVE, PARAM_NAMES, HeartParams, PatientArrays, log_likelihood

DEFAULT_BOUNDS = {
    "a": (1e-12, 1.0), "b": (1e-12, 1.0), "q": (1e-12, 1.0), "p": (0.0, 20.0),
    "lambda0": (1e-12, 5.0), "lambda1": (1e-12, 5.0),
    "gamma1": (-5.0, 5.0), "gamma2": (-5.0, 5.0), "gamma3": (-5.0, 5.0),
}
# region the quasi-random start points are drawn from (must lie inside the bounds)
DEFAULT_START_BOX = {
    "a": (1e-5, 1e-2), "b": (1e-5, 1e-2), "q": (1e-10, 1e-4), "p": (1.0, 12.0),
    "lambda0": (0.01, 2.0), "lambda1": (1e-3, 0.1),
    "gamma1": (-0.3, 0.3), "gamma2": (-0.3, 0.3), "gamma3": (-2.0, 2.0),
}
EDGE = 1e-9      # keeps mapped coordinates strictly inside the box
MAX_FAIL_FRACTION = 0.10


@dataclass(frozen=True)
class FitConfig:
    n_states: int = 3
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    starts: int = 32
    max_evals: int = 1500
    screen: int = 16
    polish: int = 3
    polish_rounds: int = 6
    polish_tol: float = 1e-6
    seed: int = 0
    start_box: dict = field(default_factory=lambda: dict(DEFAULT_START_BOX))
    workers: int = 1

    def __post_init__(self):
        if self.starts < 1 or self.screen < 1 or self.polish < 1:
            raise ValidationError("starts, screen and polish must be at least 1")
        if self.n_states < 1:
            raise ValidationError("n_states must be at least 1")
        for name in PARAM_NAMES:
            lo, hi = self.bounds[name]
            if not lo <= hi:
                raise ValidationError(f"bounds for {name}: lo > hi")
            if name in NONNEGATIVE and lo <= 0:
                raise ValidationError(f"lower bound for rate {name} must be positive")
            slo, shi = self.start_box[name]
            if not lo <= slo <= shi <= hi:
                raise ValidationError(f"start box for {name} is not inside the bounds")

    def for_bootstrap(self):
        """Lighter settings for replicate refits, which start from a good point."""
        return replace(self, max_evals=1000, polish=1, polish_rounds=12, polish_tol=1e-4)


@dataclass(frozen=True)
class FitResult:
    theta_hat: HeartParams
    loglik: float
    convergence: bool
    evals: int
    frozen: dict = field(default_factory=dict)

    def to_dict(self):
        return {"theta": {k: getattr(self.theta_hat, k) for k in PARAM_NAMES},
                "n": self.theta_hat.n, "loglik": self.loglik,
                "convergence": self.convergence, "evals": self.evals, "frozen": self.frozen}

    @classmethod
    def from_dict(cls, d):
        theta = HeartParams(**d["theta"], n=d.get("n", 3))
        return cls(theta, d["loglik"], d.get("convergence", True), d.get("evals", 0),
                   d.get("frozen", {}))


@dataclass(frozen=True)
class BootstrapResult:
    replicates: list
    std: dict
    ci95: dict
    failed: int = 0
    seed: int = 0
    index: list = field(default_factory=list)   # replicate index of each entry in replicates

    @property
    def converged_fraction(self):
        total = len(self.replicates) + self.failed
        return sum(r.convergence for r in self.replicates) / total if total else 0.0

    def to_dict(self):
        return {"std": self.std, "ci95": self.ci95, "failed": self.failed, "seed": self.seed,
                "index": self.index, "replicates": [r.to_dict() for r in self.replicates]}


def save_json(obj, path):
    Path(path).write_text(json.dumps(obj.to_dict(), indent=2))


# -- coordinate transform ------------------------------------------------------

class BoxMap:
    """Bijection between the free parameters in a box and R^d."""

    def __init__(self, bounds, free):
        self.free = tuple(free)
        self.log = np.array([k in NONNEGATIVE for k in self.free])
        lo = np.array([bounds[k][0] for k in self.free], dtype=float)
        hi = np.array([bounds[k][1] for k in self.free], dtype=float)
        self.lo = np.where(self.log, np.log(np.where(self.log, lo, 1.0)), lo)
        self.hi = np.where(self.log, np.log(np.where(self.log, hi, 1.0)), hi)
        self.span = self.hi - self.lo

    def to_unit(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            y = np.where(self.log, np.log(np.maximum(x, 1e-300)), x)
        u = np.divide(y - self.lo, self.span, out=np.full_like(y, 0.5), where=self.span > 0)
        return np.clip(u, EDGE, 1 - EDGE)

    def from_unit(self, u):
        y = self.lo + np.clip(u, 0.0, 1.0) * self.span
        return np.where(self.log, np.exp(y), y)

    def to_z(self, x):
        return logit(self.to_unit(x))

    def from_z(self, z):
        return self.from_unit(expit(z))


def _assemble(x_free, free, frozen, n):
    values = dict(frozen)
    values.update(zip(free, map(float, x_free)))
    return HeartParams(**{k: values[k] for k in PARAM_NAMES}, n=n)


def _objective(pa, free, frozen, n, bmap):
    def f(z):
        try:
            return -log_likelihood(_assemble(bmap.from_z(z), free, frozen, n), pa)
        except PhrecError:
            return np.inf
    return f


def _start_points(config, free, count, rng_seed):
    box = BoxMap(config.start_box, free)
    sob = qmc.Sobol(len(free), scramble=True, seed=rng_seed)
    m = int(np.ceil(np.log2(max(count, 1))))
    u = sob.random_base2(m)[:count] if len(free) else np.zeros((count, 0))
    return [box.from_unit(row) for row in u]


def _normalize_frozen(frozen):
    if frozen is None:
        return {}
    if isinstance(frozen, dict):
        out = {k: float(v) for k, v in frozen.items()}
    else:
        out = {k: 0.0 for k in frozen}
    unknown = set(out) - set(PARAM_NAMES)
    if unknown:
        raise ValidationError(f"unknown parameters {sorted(unknown)}")
    return out


def _nm(f, z0, maxfev):
    return minimize(f, z0, method="Nelder-Mead",
                    options={"maxfev": maxfev, "adaptive": True, "xatol": 1e-7, "fatol": 1e-8})


def _screen(f, bmap, candidates, keep):
    """Best ``keep`` candidates by objective value (finite ones only)."""
    zs = [bmap.to_z(x) for x in candidates]
    vals = np.array([f(z) for z in zs])
    order = [j for j in np.argsort(vals, kind="stable") if np.isfinite(vals[j])]
    return [zs[j] for j in order[:keep]], len(zs)


def _run(pa, config, frozen, starts_x, screen=True):
    free = [k for k in PARAM_NAMES if k not in frozen]
    bmap = BoxMap(config.bounds, free)
    f = _objective(pa, free, frozen, config.n_states, bmap)
    if screen:
        zs, evals = _screen(f, bmap, starts_x, config.starts)
    else:
        zs, evals = [bmap.to_z(x) for x in starts_x], 0
    runs = []
    for z0 in zs:
        res = _nm(f, z0, config.max_evals)
        evals += res.nfev
        if np.isfinite(res.fun):
            runs.append(res)
    if not runs:
        raise AllStartsFailed(f"all {len(starts_x)} starts failed")
    runs.sort(key=lambda r: r.fun)
    best, converged = runs[0], False
    # polish the leading runs with fresh simplices until the gain stalls
    for res in runs[:config.polish]:
        gain = np.inf
        for _ in range(config.polish_rounds):
            nxt = _nm(f, res.x, config.max_evals)
            evals += nxt.nfev
            gain = res.fun - nxt.fun
            if nxt.fun <= res.fun:
                res = nxt
            if gain < config.polish_tol:
                break
        if res.fun <= best.fun:
            # converged: a fresh simplex at the end point no longer improves it
            best, converged = res, bool(gain < config.polish_tol)
    theta = _assemble(bmap.from_z(best.x), free, frozen, config.n_states)
    ll = float(log_likelihood(theta, pa))
    return FitResult(theta, ll, converged, evals, dict(frozen))


def _arrays(patients):
    if isinstance(patients, PatientArrays):
        pa = patients
    else:
        pa = PatientArrays.from_records(patients)
    if len(pa) == 0:
        raise ValidationError("no patients to fit")
    return pa


def fit(patients, config=FitConfig()):
    return fit_restricted(patients, config, None)


def fit_restricted(patients, config=FitConfig(), frozen=None):
    """Fit with the parameters in ``frozen`` held fixed.

    ``frozen`` is a set of names (held at 0) or a mapping name -> value.
    """
    pa = _arrays(patients)
    frozen = _normalize_frozen(frozen)
    free = [k for k in PARAM_NAMES if k not in frozen]
    candidates = _start_points(config, free, config.starts * config.screen, config.seed)
    return _run(pa, config, frozen, candidates)


# -- bootstrap -----------------------------------------------------------------

def _replicate_seed(seed, index):
    return np.random.SeedSequence([seed, index])


def bootstrap_replicate(patients, config, theta0, seed, index, indices=None, light=True):
    """Refit one bootstrap replicate; the result depends only on ``(seed, index)``."""
    cfg = config.for_bootstrap() if light else config
    return _refit(_arrays(patients), cfg, theta0, seed, index, indices)


def _refit(pa, config, theta0, seed, index, indices=None):
    ss = _replicate_seed(seed, index)
    rng = np.random.default_rng(ss)
    idx = rng.integers(0, len(pa), len(pa)) if indices is None else np.asarray(indices[index])
    sample = pa.take(idx)
    free = list(PARAM_NAMES)
    warm = np.array([getattr(theta0, k) for k in free])
    rand = _start_points(config, free, 1, int(ss.generate_state(1)[0]))[0]
    return _run(sample, config, {}, [warm, rand], screen=False)


def bootstrap(patients, config=FitConfig(), replicates=1000, seed=0, theta0=None,
              indices=None, workers=None, light=True):
    """Nonparametric bootstrap over patients.

    Each replicate resamples patients with replacement using a seed derived
    from ``(seed, replicate index)`` and refits from ``theta0`` plus one random
    start. ``indices`` (one index array per replicate) overrides resampling.
    With ``light`` the refits use ``config.for_bootstrap()``.
    """
    if replicates < 2:
        raise ValidationError("need at least 2 replicates")
    pa = _arrays(patients)
    if theta0 is None:
        theta0 = fit(pa, config).theta_hat
    if indices is not None and len(indices) < replicates:
        raise ValidationError("indices must cover every replicate")
    workers = config.workers if workers is None else workers
    rcfg = config.for_bootstrap() if light else config

    def task(r):
        try:
            return _refit(pa, rcfg, theta0, seed, r, indices)
        except PhrecError:
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(task, range(replicates)))
    else:
        results = [task(r) for r in range(replicates)]
    index = [r for r, res in enumerate(results) if res is not None]
    ok = [results[r] for r in index]
    failed = replicates - len(ok)
    if failed > MAX_FAIL_FRACTION * replicates:
        raise BootstrapFailure(f"{failed} of {replicates} bootstrap replicates failed")
    X = np.array([[getattr(r.theta_hat, k) for k in PARAM_NAMES] for r in ok])
    std = dict(zip(PARAM_NAMES, map(float, X.std(axis=0, ddof=1))))
    lo, hi = np.percentile(X, [2.5, 97.5], axis=0)
    ci = {k: [float(a), float(b)] for k, a, b in zip(PARAM_NAMES, lo, hi)}
    return BootstrapResult(ok, std, ci, failed, seed, index)


def to_json(result):
    return json.dumps(result.to_dict(), indent=2)


__all__ = ["DEFAULT_BOUNDS", "DEFAULT_START_BOX", "FitConfig", "FitResult", "BootstrapResult",
           "BoxMap", "fit", "fit_restricted", "bootstrap", "bootstrap_replicate", "save_json", "to_json"]
