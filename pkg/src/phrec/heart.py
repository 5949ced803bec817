"""Two-stage illness/transplant model for the Stanford heart transplant data.

Both stages are n-state Coxian chains advancing at rate ``lambda0``; from
disease state i the patient is transplanted (into transplant state i) at rate
``lambda1``. Death rates grow with the state index:

    disease:    a + b + q * i ** (p + g1*age + g2*year + g3*surgery)
    transplant: a     + q * i ** (same exponent)

Rates are per day. ``age`` is on the data file's scale (years minus 48).
"""
from dataclasses import astuple, dataclass, fields, replace

import numpy as np

from .errors import BadInterval, NegativeTime, NonFiniteRate, NonPositiveLikelihood, ValidationError
from .matrix import expm
from .stages import StageModel

PARAM_NAMES = ("a", "b", "q", "p", "lambda0", "lambda1", "gamma1", "gamma2", "gamma3")
NONNEGATIVE = ("a", "b", "q", "lambda0", "lambda1")
AGE_CENTER = 48.0
DISEASE, TRANSPLANT = 0, 1
STAGE_LABELS = ("disease", "transplant")
SCENARIOS = ("censored_disease", "censored_transplant", "died_disease", "died_transplant")

# death-rate vector used for deaths out of the disease stage
DEATH_EXIT = "death"        # stage death rates only
TOTAL_EXIT = "total"        # -T_1 1, i.e. deaths plus transplants


@dataclass(frozen=True)
class HeartParams:
    a: float
    b: float
    q: float
    p: float
    lambda0: float
    lambda1: float
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    n: int = 3

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be at least 1")
        for name in NONNEGATIVE:
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    def as_array(self):
        return np.array(astuple(self)[:len(PARAM_NAMES)], dtype=float)

    @classmethod
    def from_array(cls, x, n=3):
        return cls(*map(float, x), n=n)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_(self, **kw):
        return replace(self, **kw)


# reference fit (n = 3) on the 103-patient Stanford data, as printed (rounded)
REFERENCE_THETA = HeartParams(a=4.9e-4, b=0.0034, q=6.4e-8, p=9.3, lambda0=0.50,
                              lambda1=0.0115, gamma1=0.098, gamma2=-0.02, gamma3=-0.92, n=3)
REFERENCE_LOGLIK = -885.17


@dataclass(frozen=True)
class Covariates:
    age: float
    year: float
    surgery: int

    def __post_init__(self):
        if self.surgery not in (0, 1):
            raise ValidationError("surgery must be 0 or 1")

    @classmethod
    def from_age_years(cls, age_years, year, surgery):
        return cls(age_years - AGE_CENTER, year, surgery)


@dataclass(frozen=True)
class PatientRecord:
    id: str
    transplant_time: float | None
    end_time: float
    died: bool
    covariates: Covariates

    def __post_init__(self):
        if not self.end_time > 0:
            raise ValidationError(f"patient {self.id}: end_time must be positive")
        tt = self.transplant_time
        if tt is not None and not 0 <= tt < self.end_time:
            raise ValidationError(f"patient {self.id}: need 0 <= transplant_time < end_time")

    @property
    def scenario(self):
        if self.transplant_time is None:
            return "died_disease" if self.died else "censored_disease"
        return "died_transplant" if self.died else "censored_transplant"


def _exponent(theta, age, year, surgery):
    return theta.p + theta.gamma1 * age + theta.gamma2 * year + theta.gamma3 * surgery


def death_rates(theta, cov):
    """(disease, transplant) death-rate vectors for one covariate profile."""
    i = np.arange(1, theta.n + 1, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        shape = theta.q * i ** _exponent(theta, cov.age, cov.year, cov.surgery)
    q1 = theta.a + theta.b + shape
    q2 = theta.a + shape
    if not (np.all(np.isfinite(q1)) and np.all(np.isfinite(q2))):
        raise NonFiniteRate("death rate is not finite")
    return q1, q2


def build_generator(theta, cov):
    n = theta.n
    q1, q2 = death_rates(theta, cov)
    T = np.zeros((2 * n, 2 * n))
    for j in range(n):
        if j < n - 1:
            T[j, j + 1] = theta.lambda0
            T[n + j, n + j + 1] = theta.lambda0
        T[j, n + j] = theta.lambda1
    rows = T.sum(axis=1)
    T[np.arange(n), np.arange(n)] = -(rows[:n] + q1)
    T[np.arange(n, 2 * n), np.arange(n, 2 * n)] = -(rows[n:] + q2)
    alpha = np.zeros(2 * n)
    alpha[0] = 1.0
    return StageModel.from_arrays(2, n, T, alpha, STAGE_LABELS, "days")


# -- likelihood pieces on a built model ---------------------------------------

def _disease_exit(model, reading):
    if reading == DEATH_EXIT:
        return model.exit_to_death(DISEASE)
    if reading == TOTAL_EXIT:
        return -model.block(DISEASE, DISEASE).sum(axis=1)
    raise ValidationError(f"unknown exit reading {reading!r}")


def _check_times(s, t):
    if s < 0 or t < 0:
        raise NegativeTime("times must be non-negative")
    if s > t:
        raise BadInterval(f"transplant time {s} after end time {t}")


def f1(model, t):
    """Probability of remaining in the disease stage throughout [0, t]."""
    _check_times(0, t)
    a = model.stage_alpha(DISEASE)
    return float(a @ expm(model.block(DISEASE, DISEASE), t) @ np.ones(model.n))


def _through_transplant(model, s, t):
    a = model.stage_alpha(DISEASE)
    T1 = model.block(DISEASE, DISEASE)
    T12 = model.block(DISEASE, TRANSPLANT)
    T2 = model.block(TRANSPLANT, TRANSPLANT)
    return a @ expm(T1, s) @ T12 @ expm(T2, t - s)


def f12(model, s, t):
    """Density of transplant at s, then alive in the transplant stage at t."""
    _check_times(s, t)
    return float(_through_transplant(model, s, t).sum())


def f10(model, t, reading=DEATH_EXIT):
    """Density of death at t without having left the disease stage."""
    _check_times(0, t)
    a = model.stage_alpha(DISEASE)
    return float(a @ expm(model.block(DISEASE, DISEASE), t) @ _disease_exit(model, reading))


def f20(model, s, t):
    """Density of transplant at s followed by death at t."""
    _check_times(s, t)
    return float(_through_transplant(model, s, t) @ model.exit_to_death(TRANSPLANT))


def contribution(model, patient, reading=DEATH_EXIT):
    tt, end = patient.transplant_time, patient.end_time
    if tt is None:
        return f10(model, end, reading) if patient.died else f1(model, end)
    return f20(model, tt, end) if patient.died else f12(model, tt, end)


# -- batched log-likelihood ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class PatientArrays:
    """Column view of a patient list for vectorized likelihood evaluation."""
    ids: tuple
    age: np.ndarray
    year: np.ndarray
    surgery: np.ndarray
    transplant: np.ndarray    # NaN when never transplanted
    end: np.ndarray
    died: np.ndarray

    @classmethod
    def from_records(cls, patients):
        patients = list(patients)
        tt = [np.nan if p.transplant_time is None else p.transplant_time for p in patients]
        return cls(tuple(p.id for p in patients),
                   np.array([p.covariates.age for p in patients], dtype=float),
                   np.array([p.covariates.year for p in patients], dtype=float),
                   np.array([p.covariates.surgery for p in patients], dtype=float),
                   np.array(tt, dtype=float),
                   np.array([p.end_time for p in patients], dtype=float),
                   np.array([p.died for p in patients], dtype=bool))

    def __len__(self):
        return len(self.ids)

    def take(self, idx):
        idx = np.asarray(idx)
        return PatientArrays(tuple(self.ids[i] for i in idx), self.age[idx], self.year[idx],
                             self.surgery[idx], self.transplant[idx], self.end[idx], self.died[idx])


def _coxian_stack(diag, lam0):
    """Batch of upper-bidiagonal matrices with the given diagonals and superdiagonal lam0."""
    P, n = diag.shape
    M = np.zeros((P, n, n))
    M[:, np.arange(n), np.arange(n)] = diag
    if n > 1:
        M[:, np.arange(n - 1), np.arange(1, n)] = lam0
    return M


def _shifted_expm(M, t):
    """Batch exp(M t) as (log scale, matrix), shifted so the matrix stays O(1).

    exp(M t) = exp(-c t) exp((M + c I) t) with c the smallest diagonal magnitude.
    """
    n = M.shape[-1]
    c = (-M[:, np.arange(n), np.arange(n)]).min(axis=1)
    return -c * t, expm(M + c[:, None, None] * np.eye(n), t)


def log_contributions(theta, patients, reading=DEATH_EXIT):
    """Per-patient log-likelihood terms (array aligned with ``patients``)."""
    pa = patients if isinstance(patients, PatientArrays) else PatientArrays.from_records(patients)
    n = theta.n
    i = np.arange(1, n + 1, dtype=float)
    expo = _exponent(theta, pa.age, pa.year, pa.surgery)
    with np.errstate(over="ignore", invalid="ignore"):
        shape = theta.q * i[None, :] ** expo[:, None]
    q1 = theta.a + theta.b + shape
    q2 = theta.a + shape
    if not (np.all(np.isfinite(q1)) and np.all(np.isfinite(q2))):
        raise NonFiniteRate("death rate is not finite")
    adv = np.full(n, theta.lambda0)
    adv[-1] = 0.0
    T1 = _coxian_stack(-(q1 + adv + theta.lambda1), theta.lambda0)
    T2 = _coxian_stack(-(q2 + adv), theta.lambda0)
    if reading not in (DEATH_EXIT, TOTAL_EXIT):
        raise ValidationError(f"unknown exit reading {reading!r}")
    exit1 = q1 if reading == DEATH_EXIT else q1 + theta.lambda1

    out = np.empty(len(pa))
    tx = ~np.isnan(pa.transplant)
    stay = ~tx
    with np.errstate(divide="ignore"):
        if stay.any():
            logc, E1 = _shifted_expm(T1[stay], pa.end[stay])
            row = E1[:, 0, :]
            w = np.where(pa.died[stay][:, None], exit1[stay], 1.0)
            out[stay] = logc + np.log((row * w).sum(axis=1))
        if tx.any():
            s, e = pa.transplant[tx], pa.end[tx]
            logc1, E1 = _shifted_expm(T1[tx], s)
            logc2, E2 = _shifted_expm(T2[tx], e - s)
            v = np.einsum("pi,pij->pj", E1[:, 0, :] * theta.lambda1, E2)
            w = np.where(pa.died[tx][:, None], q2[tx], 1.0)
            out[tx] = logc1 + logc2 + np.log((v * w).sum(axis=1))
    bad = ~np.isfinite(out)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise NonPositiveLikelihood(pa.ids[j], out[j])
    return out


def log_likelihood(theta, patients, reading=DEATH_EXIT):
    return float(log_contributions(theta, patients, reading).sum())


def lrt(full_loglik, restricted_loglik):
    """Likelihood-ratio statistic -2 (l_restricted - l_full)."""
    return -2.0 * (restricted_loglik - full_loglik)
