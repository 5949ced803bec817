"""Continuous phase-type distributions with representation (alpha, T)."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeTime, ValidationError
from .matrix import SubIntensity, expm, solve, validate_subintensity

PROB_TOL = 1e-12


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _times(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise NegativeTime(f"time must be non-negative, got {y.min()!r}")
    return y


@dataclass(frozen=True, eq=False)
class PhaseType:
    """Absorption time of a CTMC started from ``alpha`` on the transient states.

    No mass starts in the absorbing state, so ``alpha`` sums to one.
    """

    alpha: np.ndarray
    sub: SubIntensity

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).ravel()
        if a.shape[0] != self.sub.dim:
            raise ValidationError(f"alpha has length {a.shape[0]}, T is {self.sub.dim}x{self.sub.dim}")
        if np.any(a < 0) or abs(a.sum() - 1.0) > PROB_TOL:
            raise ValidationError("alpha must be a probability vector")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def from_arrays(cls, alpha, T):
        return cls(alpha, validate_subintensity(T))

    @property
    def T(self):
        return self.sub.T

    @property
    def t0(self):
        return self.sub.t0

    def survival(self, y):
        E = expm(self.T, _times(y))
        return _scalar(np.clip(np.einsum("i,...ij,j->...", self.alpha, E, np.ones(self.sub.dim)), 0.0, 1.0))

    def cdf(self, y):
        return 1.0 - self.survival(y)

    def density(self, y):
        y = _times(y)
        E = expm(self.T, y)
        return _scalar(np.maximum(np.einsum("i,...ij,j->...", self.alpha, E, self.t0), 0.0))

    def laplace(self, s):
        """``alpha (sI - T)^-1 t0`` for real ``s >= 0``."""
        if s < 0:
            raise ValidationError("Laplace argument must be non-negative")
        m = self.sub.dim
        return float(self.alpha @ solve(s * np.eye(m) - self.T, self.t0))

    def moment(self, k):
        """``k! alpha (-T^-1)^k 1`` via repeated solves."""
        if k < 0 or int(k) != k:
            raise ValidationError("moment order must be a non-negative integer")
        v = np.ones(self.sub.dim)
        for _ in range(int(k)):
            v = solve(-self.T, v)
        return math.factorial(int(k)) * float(self.alpha @ v)

    def mean(self):
        return self.moment(1)

    def sample(self, rng_seed):
        """Simulate one path of the underlying chain.

        Returns ``(absorption_time, states)`` where ``states`` lists the
        visited transient states (0-based) in order.
        """
        rng = np.random.default_rng(rng_seed)
        m = self.sub.dim
        T, t0 = self.T, self.t0
        state = int(rng.choice(m, p=self.alpha))
        t = 0.0
        path = [state]
        while True:
            rate = -T[state, state]
            t += rng.exponential(1.0 / rate)
            jumps = np.append(T[state].copy(), t0[state])
            jumps[state] = 0.0
            nxt = int(rng.choice(m + 1, p=jumps / jumps.sum()))
            if nxt == m:
                return t, path
            state = nxt
            path.append(state)
