"""Six-stage cancer model: recovery plus cancer stages 0-4, five states each.

States are numbered 1..30 in the rate formulas below (stage R holds 1-5,
cancer stage c holds 5(c+1)+1 .. 5(c+2)); time is in months.
"""
from dataclasses import dataclass

import numpy as np

from .counts import count_distribution, count_prob_between
from .stages import StageModel

K, N = 6, 5
LABELS = ("R", "0", "1", "2", "3", "4")
INPUT_STAGES = ("0", "1", "2", "3", "4")
COUNT_HORIZONS = (6.0, 12.0, 24.0, 36.0)
BETWEEN_HORIZONS = (6.0, 12.0)
# levels l of the stage-to-next-stage family t_{i+5l, i+5(l+1)}
FORWARD_LEVELS = (1, 2, 3, 4)
ALT_FORWARD_LEVELS = (0, 1, 2, 3)


@dataclass(frozen=True)
class CancerParams:
    lam: float = 0.2      # within-stage advance
    gamma: float = 0.1    # recovery coefficient
    beta: float = 0.2     # back-transition coefficient
    a: float = 1e-3
    q: float = 1e-6
    p: float = 4.5

    def __post_init__(self):
        for name in ("lam", "gamma", "beta", "a", "q", "p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def cancer_rates(params=CancerParams(), forward_levels=FORWARD_LEVELS):
    """Off-diagonal rates and death rates, 1-based as in the state numbering.

    Returns ``(R, d)``: ``R[i, j]`` for i, j in 1..30 (row/col 0 unused) and
    death rates ``d[i]``.
    """
    lam, gam, beta, a, q, p = (params.lam, params.gamma, params.beta,
                               params.a, params.q, params.p)
    R = np.zeros((31, 31))
    d = np.zeros(31)
    for i in range(1, 30):
        if i % 5:
            R[i, i + 1] = lam
    for i in range(6, 11):
        for l in range(5):
            R[i + 5 * l, i - 5] = gam * 0.1 ** l
    for i in range(11, 16):
        for l in range(4):
            R[i + 5 * l, i + 5 * (l - 1)] = beta * 0.1 ** l
    for i in range(1, 6):
        mort = a + q * i ** p
        for l in forward_levels:
            R[i + 5 * l, i + 5 * (l + 1)] = (l + 1) * mort
        for l in range(5):
            R[i, i + 5 * (l + 1)] = 0.1 ** l * mort
        d[i] = 0.1 ** 5 + mort
        for l in range(5):
            d[i + 5 * (l + 1)] = 0.1 ** (4 - l) + mort
    return R, d


def build_cancer_generator(params=CancerParams(), input_stage="0",
                           forward_levels=FORWARD_LEVELS):
    R, d = cancer_rates(params, forward_levels)
    T = R[1:, 1:].copy()
    np.fill_diagonal(T, 0.0)
    np.fill_diagonal(T, -(T.sum(axis=1) + d[1:]))
    stage = LABELS.index(str(input_stage))
    alpha = np.zeros(K * N)
    alpha[stage * N] = 1.0
    return StageModel.from_arrays(K, N, T, alpha, LABELS, "months")


@dataclass(frozen=True, eq=False)
class CancerTables:
    counts: np.ndarray      # (input stage, l in 0..2, horizon)
    sojourn: np.ndarray     # (input stage, horizon)
    between: np.ndarray     # (input stage, horizon in BETWEEN_HORIZONS, destination R,0..4,D)
    forward_levels: tuple = FORWARD_LEVELS

    def count_rows(self):
        for s, st in enumerate(INPUT_STAGES):
            for l in range(self.counts.shape[1]):
                for h, t in enumerate(COUNT_HORIZONS):
                    yield st, l, t, float(self.counts[s, l, h])

    def sojourn_rows(self):
        for s, st in enumerate(INPUT_STAGES):
            for h, t in enumerate(COUNT_HORIZONS):
                yield st, t, float(self.sojourn[s, h])

    def between_rows(self):
        dests = LABELS + ("D",)
        for s, st in enumerate(INPUT_STAGES):
            for h, t in enumerate(BETWEEN_HORIZONS):
                for j, dest in enumerate(dests):
                    yield st, t, dest, float(self.between[s, h, j])


def cancer_tables(params=CancerParams(), forward_levels=FORWARD_LEVELS, lmax=2):
    nS, nH = len(INPUT_STAGES), len(COUNT_HORIZONS)
    counts = np.zeros((nS, lmax + 1, nH))
    sojourn = np.zeros((nS, nH))
    between = np.zeros((nS, len(BETWEEN_HORIZONS), K + 1))
    for s, st in enumerate(INPUT_STAGES):
        model = build_cancer_generator(params, st, forward_levels)
        i = model.stage_index(st)
        dist = count_distribution(model, i, COUNT_HORIZONS, lmax)
        counts[s] = dist.probs.T
        sojourn[s] = [model.expected_sojourn(i, 0.0, t) for t in COUNT_HORIZONS]
        for j in range(K + 1):
            between[s, :, j] = count_prob_between(model, i, j, np.array(BETWEEN_HORIZONS))
    return CancerTables(counts, sojourn, between, tuple(forward_levels))
