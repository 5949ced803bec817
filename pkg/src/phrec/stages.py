"""Block structure of a k-stage, n-states-per-stage chain with one death state.

Stages are indexed from 0. Wherever a destination stage is accepted, the
death state may be given as ``model.death`` (== ``k``) or the string ``"D"``.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (IndexOutOfRange, NegativeTime, Singular, ValidationError,
                     ZeroProbabilityStage)
from .matrix import SubIntensity, expm, solve, validate_subintensity
from .phasetype import PROB_TOL, PhaseType

DENOM_FLOOR = 1e-300
DEATH = "D"


@dataclass(frozen=True, eq=False)
class StageModel:
    k: int
    n: int
    sub: SubIntensity
    alpha: np.ndarray
    stage_labels: tuple = None
    time_unit: str = "days"

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise ValidationError("k and n must be positive")
        if self.sub.dim != self.k * self.n:
            raise ValidationError(f"T is {self.sub.dim}x{self.sub.dim}, expected k*n = {self.k * self.n}")
        a = np.asarray(self.alpha, dtype=float).ravel()
        if a.shape[0] != self.k * self.n or np.any(a < 0) or abs(a.sum() - 1.0) > PROB_TOL:
            raise ValidationError("alpha must be a probability vector of length k*n")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        labels = self.stage_labels
        if labels is None:
            labels = tuple(str(i) for i in range(self.k))
        labels = tuple(str(x) for x in labels)
        if len(labels) != self.k:
            raise ValidationError(f"expected {self.k} stage labels, got {len(labels)}")
        object.__setattr__(self, "stage_labels", labels)
        T = self.sub.T
        for i in range(self.k):
            for j in range(self.k):
                if i != j and np.any(self._slice(T, i, j) < 0):
                    raise ValidationError(f"off-diagonal block ({i}, {j}) has negative entries")

    @classmethod
    def from_arrays(cls, k, n, T, alpha, stage_labels=None, time_unit="days"):
        return cls(k, n, validate_subintensity(T), alpha, stage_labels, time_unit)

    # -- layout ---------------------------------------------------------------

    @property
    def T(self):
        return self.sub.T

    @property
    def t0(self):
        return self.sub.t0

    @property
    def death(self):
        return self.k

    @property
    def dim(self):
        return self.k * self.n

    def _slice(self, M, i, j):
        n = self.n
        return M[i * n:(i + 1) * n, j * n:(j + 1) * n]

    def stage_index(self, i, allow_death=False):
        if isinstance(i, str):
            if allow_death and i == DEATH:
                return self.k
            if i in self.stage_labels:
                return self.stage_labels.index(i)
            try:
                i = int(i)
            except ValueError:
                raise IndexOutOfRange(f"unknown stage {i!r}") from None
        i = int(i)
        hi = self.k if allow_death else self.k - 1
        if not 0 <= i <= hi:
            raise IndexOutOfRange(f"stage {i} outside 0..{hi}")
        return i

    def label(self, i):
        return DEATH if i == self.k else self.stage_labels[i]

    def block(self, i, j):
        i, j = self.stage_index(i), self.stage_index(j)
        return self._slice(self.T, i, j).copy()

    def exit_to_death(self, i):
        i = self.stage_index(i)
        return self.t0[i * self.n:(i + 1) * self.n].copy()

    def embed(self, i):
        """The (k*n) x n 0/1 matrix placing stage i's states in the full space."""
        i = self.stage_index(i)
        E = np.zeros((self.dim, self.n))
        E[i * self.n:(i + 1) * self.n] = np.eye(self.n)
        return E

    def ones(self, i):
        i = self.stage_index(i)
        v = np.zeros(self.dim)
        v[i * self.n:(i + 1) * self.n] = 1.0
        return v

    def stage_of_state(self):
        return np.repeat(np.arange(self.k), self.n)

    def stage_alpha(self, i):
        """Normalized stage-i slice of the initial vector."""
        i = self.stage_index(i)
        a = self.alpha[i * self.n:(i + 1) * self.n]
        tot = a.sum()
        if tot < DENOM_FLOOR:
            raise ZeroProbabilityStage(f"initial vector puts no mass on stage {self.label(i)}")
        return a / tot

    def phase_type(self):
        return PhaseType(self.alpha, self.sub)

    # -- conditioned quantities -----------------------------------------------

    def _state_at(self, u):
        if u < 0:
            raise NegativeTime("u must be non-negative")
        return self.alpha @ expm(self.T, u)

    def _conditioned_full(self, i, u):
        """Row vector over all states: alpha e^{Tu} restricted to stage i, normalized."""
        i = self.stage_index(i)
        w = self._state_at(u)
        v = np.zeros(self.dim)
        sl = slice(i * self.n, (i + 1) * self.n)
        v[sl] = w[sl]
        denom = w[sl].sum()
        if denom < DENOM_FLOOR:
            raise ZeroProbabilityStage(
                f"P[J_u in stage {self.label(i)}] = {denom:g} at u = {u:g}")
        return v / denom

    def conditioned_alpha(self, i, u=0.0):
        i = self.stage_index(i)
        v = self._conditioned_full(i, u)
        return v[i * self.n:(i + 1) * self.n]

    def expected_sojourn(self, i, u, t):
        """Expected time spent continuously in stage i during [u, u+t], given J_u in stage i."""
        if t < 0:
            raise NegativeTime("t must be non-negative")
        i = self.stage_index(i)
        a = self.conditioned_alpha(i, u)
        Ti = self.block(i, i)
        one = np.ones(self.n)
        try:
            val = a @ solve(Ti, (expm(Ti, t) - np.eye(self.n)) @ one)
        except Singular:
            # stage without exits somewhere: integrate e^{T_i w} over [0, t] via the block trick
            n = self.n
            A = np.zeros((2 * n, 2 * n))
            A[:n, :n] = Ti
            A[:n, n:] = np.eye(n)
            val = a @ expm(A, t)[:n, n:] @ one
        return float(min(max(val, 0.0), t))

    def stage_transition_prob(self, i, j, u, t):
        """P[J_{u+t} in stage j | J_u in stage i]; ``j`` may be the death state."""
        if t < 0:
            raise NegativeTime("t must be non-negative")
        j = self.stage_index(j, allow_death=True)
        v = self._conditioned_full(i, u)
        E = expm(self.T, t)
        if j == self.k:
            return float(v @ (1.0 - E.sum(axis=1)))
        return float(v @ E @ self.ones(j))

    def death_by_stage(self, i, u, t):
        """Probability of dying from each stage during [u, u+t] given J_u in stage i.

        Splits ``stage_transition_prob(i, D, u, t)`` by the stage the death
        occurred from. Returns an array of length k.
        """
        if t < 0:
            raise NegativeTime("t must be non-negative")
        v = self._conditioned_full(i, u)
        m, k = self.dim, self.k
        A = np.zeros((m + k, m + k))
        A[:m, :m] = self.T
        A[np.arange(m), m + self.stage_of_state()] = self.t0
        return (np.append(v, np.zeros(k)) @ expm(A, t))[m:]

    # -- serialization --------------------------------------------------------

    def to_dict(self):
        return {
            "k": self.k,
            "n": self.n,
            "alpha": self.alpha.tolist(),
            "T": self.T.tolist(),
            "stage_labels": list(self.stage_labels),
            "time_unit": self.time_unit,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls.from_arrays(int(d["k"]), int(d["n"]), d["T"], d["alpha"],
                                   d.get("stage_labels"), d.get("time_unit", "days"))
        except KeyError as e:
            raise ValidationError(f"model document missing field {e.args[0]!r}") from None


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def load_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON ({e})") from None
    return StageModel.from_dict(d)
