"""Monte Carlo path simulation of a StageModel (Gillespie, vectorized over paths).

A transition is counted on every jump that changes stage or ends in death,
the same rule the analytic count distribution uses. Paths are processed in
fixed-size chunks, each with its own RNG stream derived from
``(seed, chunk index)``, so results do not depend on the thread count.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NegativeTime, ValidationError

CHUNK = 1 << 16
MAX_JUMPS = 100_000


@dataclass(frozen=True, eq=False)
class SimSummary:
    paths: int
    start_stage: int
    horizons: np.ndarray
    lmax: int
    count_freq: np.ndarray       # (H, lmax + 2); last column is N > lmax
    stage_hit_freq: np.ndarray   # (H, k + 1): occupancy of each stage / death at each horizon
    first_move_freq: np.ndarray  # (H, k + 1): exactly one transition by t, into that stage
    sojourn_mean: np.ndarray     # (H,): mean of min(first exit time, t)
    sojourn_se: np.ndarray

    @property
    def count_se(self):
        return binomial_se(self.count_freq, self.paths)

    def to_dict(self):
        return {
            "paths": self.paths,
            "start_stage": self.start_stage,
            "horizons": self.horizons.tolist(),
            "lmax": self.lmax,
            "count_freq": self.count_freq.tolist(),
            "count_se": self.count_se.tolist(),
            "stage_hit_freq": self.stage_hit_freq.tolist(),
            "first_move_freq": self.first_move_freq.tolist(),
            "sojourn_mean": self.sojourn_mean.tolist(),
            "sojourn_se": self.sojourn_se.tolist(),
        }


def binomial_se(p, paths):
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1 - p) / paths)


class _Jumps:
    """Holding rates and embedded-chain cumulative jump table; index m is death."""

    def __init__(self, model):
        T = model.T
        m = model.dim
        rate = -np.diag(T).copy()
        P = np.zeros((m, m + 1))
        P[:, :m] = T
        P[np.arange(m), np.arange(m)] = 0.0
        P[:, m] = model.t0
        live = rate > 0
        P[live] /= rate[live, None]
        cum = np.cumsum(P, axis=1)
        cum[live, -1] = 1.0
        self.m = m
        self.rate = rate
        self.cum = cum
        self.stage = np.append(model.stage_of_state(), model.k)

    def hold(self, rng, states):
        r = self.rate[states]
        with np.errstate(divide="ignore"):
            return np.where(r > 0, rng.standard_exponential(states.size) / r, np.inf)

    def step(self, rng, states):
        u = rng.random(states.size)
        return (self.cum[states] < u[:, None]).sum(axis=1)


def _initial(rng, weights, size):
    return rng.choice(weights.size, size=size, p=weights)


def _chunks(paths):
    return [(c, min(CHUNK, paths - c * CHUNK)) for c in range((paths + CHUNK - 1) // CHUNK)]


def _map_chunks(fn, paths, seed, threads):
    jobs = _chunks(paths)
    args = [(np.random.default_rng(np.random.SeedSequence([seed, c])), size) for c, size in jobs]
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda a: fn(*a), args))
    return [fn(*a) for a in args]


def _counts_chunk(J, start_weights, i, H, lmax, k, rng, size):
    m = J.m
    state = _initial(rng, start_weights, size)
    t = np.zeros(size)
    nH = H.size
    N = np.zeros((size, nH), dtype=np.int64)
    occ = np.full((size, nH), k)
    first_time = np.full(size, np.inf)
    first_dest = np.full(size, -1)
    second_time = np.full(size, np.inf)
    idx = np.arange(size)
    tmax = H[-1]
    for _ in range(MAX_JUMPS):
        if idx.size == 0:
            break
        s = state[idx]
        t0 = t[idx]
        tn = t0 + J.hold(rng, s)
        covers = (t0[:, None] <= H) & (H < tn[:, None])
        if covers.any():
            rows, cols = np.nonzero(covers)
            occ[idx[rows], cols] = J.stage[s[rows]]
        go = tn <= tmax
        idx, s, tn = idx[go], s[go], tn[go]
        new = J.step(rng, s)
        counted = (J.stage[new] != J.stage[s]) | (new == m)
        N[idx] += counted[:, None] & (tn[:, None] <= H)
        is_first = counted & np.isinf(first_time[idx])
        is_second = counted & ~is_first & np.isinf(second_time[idx])
        first_time[idx[is_first]] = tn[is_first]
        first_dest[idx[is_first]] = J.stage[new[is_first]]
        second_time[idx[is_second]] = tn[is_second]
        state[idx] = new
        t[idx] = tn
        idx = idx[new != m]
    else:
        raise ValidationError(f"paths did not finish within {MAX_JUMPS} jumps")

    hist = np.zeros((nH, lmax + 2))
    for h in range(nH):
        hist[h] = np.bincount(np.minimum(N[:, h], lmax + 1), minlength=lmax + 2)
    stage_hits = np.stack([np.bincount(occ[:, h], minlength=k + 1) for h in range(nH)])
    one = (first_time[:, None] <= H) & (second_time[:, None] > H)
    first = np.zeros((nH, k + 1))
    for h in range(nH):
        first[h] = np.bincount(first_dest[one[:, h]], minlength=k + 1)
    soj = np.minimum(first_time[:, None], H[None, :])
    return hist, stage_hits, first, soj.sum(axis=0), np.square(soj).sum(axis=0)


def simulate_counts(model, i, horizons, paths=100_000, seed=0, lmax=5, threads=1):
    """Empirical transition-count distribution from stage ``i`` (start drawn from its alpha slice)."""
    if paths < 1:
        raise ValidationError("paths must be at least 1")
    i = model.stage_index(i)
    H = np.atleast_1d(np.asarray(horizons, dtype=float))
    if np.any(H < 0):
        raise NegativeTime("horizons must be non-negative")
    if np.any(np.diff(H) < 0):
        raise ValidationError("horizons must be sorted ascending")
    J = _Jumps(model)
    w = np.zeros(model.dim)
    w[i * model.n:(i + 1) * model.n] = model.stage_alpha(i)
    k = model.k

    def run(rng, size):
        return _counts_chunk(J, w, i, H, lmax, k, rng, size)

    parts = _map_chunks(run, paths, seed, threads)
    hist = sum(p[0] for p in parts)
    hits = sum(p[1] for p in parts)
    first = sum(p[2] for p in parts)
    s1 = sum(p[3] for p in parts)
    s2 = sum(p[4] for p in parts)
    mean = s1 / paths
    var = np.maximum(s2 / paths - mean ** 2, 0.0) * paths / max(paths - 1, 1)
    return SimSummary(paths, i, H, lmax, hist / paths, hits / paths, first / paths,
                      mean, np.sqrt(var / paths))


def _sojourn_chunk(J, alpha, i, u, t, rng, size):
    m = J.m
    state = _initial(rng, alpha, size)
    clock = np.zeros(size)
    in_i = np.zeros(size, dtype=bool)
    exit_time = np.full(size, np.inf)
    idx = np.arange(size)
    end = u + t
    for _ in range(MAX_JUMPS):
        if idx.size == 0:
            break
        s = state[idx]
        t0 = clock[idx]
        tn = t0 + J.hold(rng, s)
        at_u = (t0 <= u) & (u < tn)
        in_i[idx[at_u]] = J.stage[s[at_u]] == i
        go = tn <= end
        idx, s, tn = idx[go], s[go], tn[go]
        new = J.step(rng, s)
        leaves = (tn > u) & in_i[idx] & (J.stage[new] != i) & np.isinf(exit_time[idx])
        exit_time[idx[leaves]] = tn[leaves]
        state[idx] = new
        clock[idx] = tn
        # paths that left stage i after u, or were elsewhere at u, are done
        done = (new == m) | (tn > u) & ~in_i[idx] | np.isfinite(exit_time[idx])
        idx = idx[~done]
    else:
        raise ValidationError(f"paths did not finish within {MAX_JUMPS} jumps")
    stay = np.minimum(exit_time[in_i] - u, t)
    return in_i.sum(), stay.sum(), np.square(stay).sum()


def simulate_sojourn(model, i, u, t, paths=100_000, seed=0, threads=1):
    """Mean continuous stay in stage ``i`` over [u, u+t] among paths in stage ``i`` at u.

    Paths start from the model's full initial vector. Returns ``(mean, se, used)``
    where ``used`` is the number of paths that were in stage ``i`` at time u.
    """
    if paths < 1:
        raise ValidationError("paths must be at least 1")
    if u < 0 or t < 0:
        raise NegativeTime("u and t must be non-negative")
    i = model.stage_index(i)
    J = _Jumps(model)
    alpha = np.asarray(model.alpha, dtype=float)

    def run(rng, size):
        return _sojourn_chunk(J, alpha, i, u, t, rng, size)

    parts = _map_chunks(run, paths, seed, threads)
    used = int(sum(p[0] for p in parts))
    if used == 0:
        return float("nan"), float("nan"), 0
    s1 = sum(p[1] for p in parts)
    s2 = sum(p[2] for p in parts)
    mean = s1 / used
    var = max(s2 / used - mean ** 2, 0.0) * used / max(used - 1, 1)
    return float(mean), float(np.sqrt(var / used)), used
