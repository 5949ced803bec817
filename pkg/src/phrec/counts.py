"""Distribution of the number of stage transitions N(t).

A transition is any jump between different stages or from a stage into the
death state. For a start stage ``i``, every admissible stage sequence
``(i1, ..., il)`` (consecutive entries differ, death only last) owns a matrix
function

    x_{i1..il}(t) = int_0^t x_{i1..i(l-1)}(z) T_{i(l-1), il} e^{T_il (t - z)} dz,

with ``x_{}(t) = e^{T_i t}``. Equivalently each obeys the linear ODE

    x'_{..., il} = x_{..., i(l-1)} T_{i(l-1), il} + x_{..., il} T_il,   x(0) = 0,

and ``P[N(t) = l] = sum over length-l sequences of alpha_i x(t) 1``. All
sequences up to ``lmax`` are integrated together as one stacked system, each
prefix feeding its extensions.

Death is a terminal pseudo-stage with a zero diagonal block; the block into it
carries the stage's death-rate vector in its first column, so a death-ending
``x`` is effectively ``n x 1``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, NegativeTime, SequenceExplosion, ValidationError
from .matrix import expm
from .ode import dopri5

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
DEFAULT_CAP = 100_000


@dataclass(frozen=True)
class StageSequence:
    start: int
    path: tuple
    death: int

    def __post_init__(self):
        prev = self.start
        for pos, s in enumerate(self.path):
            if s == prev:
                raise ValidationError(f"sequence {self.path} repeats stage {s}")
            if s == self.death and pos != len(self.path) - 1:
                raise ValidationError("death may only end a sequence")
            prev = s

    def __len__(self):
        return len(self.path)

    @property
    def last(self):
        return self.path[-1] if self.path else self.start

    @property
    def parent(self):
        return StageSequence(self.start, self.path[:-1], self.death)


def augmented_blocks(model):
    """``(k+1, k+1, n, n)`` array of stage blocks with death appended as index k."""
    k, n = model.k, model.n
    B = np.zeros((k + 1, k + 1, n, n))
    T = model.T
    for a in range(k):
        for b in range(k):
            B[a, b] = T[a * n:(a + 1) * n, b * n:(b + 1) * n]
        B[a, k, :, 0] = model.exit_to_death(a)
    return B


def enumerate_sequences(blocks, start, lmax, cap=DEFAULT_CAP):
    """All admissible sequences of length 1..lmax, shortest first.

    Sequences entering through an all-zero block are dropped; they and all
    their extensions are identically zero.
    """
    k = blocks.shape[0] - 1
    nonzero = np.abs(blocks).sum(axis=(2, 3)) > 0
    seqs = []
    frontier = [StageSequence(start, (), k)]
    for _ in range(lmax):
        nxt = []
        for seq in frontier:
            a = seq.last
            for b in range(k + 1):
                if b == a or not nonzero[a, b]:
                    continue
                s = StageSequence(start, seq.path + (b,), k)
                nxt.append(s)
                if len(seqs) + len(nxt) > cap:
                    raise SequenceExplosion(f"more than {cap} stage sequences up to length {lmax}")
        seqs.extend(nxt)
        frontier = [s for s in nxt if s.last != k]
    return seqs


def integrate_x_system(blocks, start, sequences, t_grid, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Solve the stacked x-system and return ``{path: array (len(t_grid), n, n)}``.

    The root ``x_{}`` (= e^{T_start t}) is integrated alongside and returned
    under the empty path.
    """
    k = blocks.shape[0] - 1
    n = blocks.shape[2]
    nodes = [()] + [s.path for s in sequences]
    index = {p: q for q, p in enumerate(nodes)}
    if len(index) != len(nodes):
        raise ValidationError("duplicate sequences")
    N = len(nodes)
    parent = np.zeros(N, dtype=int)
    T_self = np.zeros((N, n, n))
    B_in = np.zeros((N, n, n))
    T_self[0] = blocks[start, start]
    for q, p in enumerate(nodes[1:], start=1):
        par = p[:-1]
        if par not in index:
            raise ValidationError(f"sequence {p} present without its prefix {par}")
        a = par[-1] if par else start
        b = p[-1]
        parent[q] = index[par]
        T_self[q] = blocks[b, b]
        B_in[q] = blocks[a, b]

    def rhs(t, Y):
        return Y @ T_self + Y[parent] @ B_in

    Y0 = np.zeros((N, n, n))
    Y0[0] = np.eye(n)
    t_grid = np.asarray(t_grid, dtype=float)
    vals, _ = dopri5(rhs, Y0, t_grid, rtol=rtol, atol=atol)
    return {p: vals[:, q] for q, p in enumerate(nodes)}


def _horizons(horizons):
    h = np.atleast_1d(np.asarray(horizons, dtype=float))
    if np.any(h < 0):
        raise NegativeTime("horizons must be non-negative")
    if np.any(np.diff(h) < 0):
        raise ValidationError("horizons must be sorted ascending")
    return h


def count_prob_zero(model, i, t):
    """P[N(t) = 0 | J_0 in stage i] = alpha_i e^{t T_i} 1."""
    i = model.stage_index(i)
    a = model.stage_alpha(i)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise NegativeTime("t must be non-negative")
    val = np.einsum("i,...ij->...", a, expm(model.block(i, i), t))
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True, eq=False)
class CountDistribution:
    start_stage: int
    horizons: np.ndarray
    lmax: int
    probs: np.ndarray                     # (len(horizons), lmax + 1)
    sequence_probs: dict = field(repr=False, default_factory=dict)
    death: int = -1

    def at(self, t):
        hit = np.flatnonzero(np.isclose(self.horizons, t, rtol=0, atol=1e-12))
        if not hit.size:
            raise IndexOutOfRange(f"horizon {t} was not computed")
        return self.probs[hit[0]]

    def total(self):
        return self.probs.sum(axis=1)


def count_distribution(model, i, horizons, lmax, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                       cap=DEFAULT_CAP):
    i = model.stage_index(i)
    if lmax < 0:
        raise ValidationError("lmax must be non-negative")
    h = _horizons(horizons)
    a = model.stage_alpha(i)
    probs = np.zeros((h.size, lmax + 1))
    probs[:, 0] = count_prob_zero(model, i, h)
    seq_probs = {}
    if lmax > 0:
        blocks = augmented_blocks(model)
        seqs = enumerate_sequences(blocks, i, lmax, cap)
        xs = integrate_x_system(blocks, i, seqs, h, rtol, atol)
        for s in seqs:
            p = np.einsum("j,hjc->h", a, xs[s.path])
            seq_probs[s.path] = p
            probs[:, len(s)] += p
    probs = np.clip(probs, 0.0, 1.0)
    return CountDistribution(i, h, lmax, probs, seq_probs, model.death)


def count_prob_between(model, i, j, t, l=1, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Probability of exactly ``l`` transitions by ``t``, the last one into ``j``.

    With ``l = 1`` this is the single-sequence term: one transition, from the
    start stage straight to ``j`` (a stage or death), and nothing after it.
    """
    i = model.stage_index(i)
    j = model.stage_index(j, allow_death=True)
    if l < 1:
        raise ValidationError("l must be at least 1")
    if i == j:
        return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
    dist = count_distribution(model, i, np.atleast_1d(t), l, rtol, atol)
    total = sum((p for path, p in dist.sequence_probs.items() if len(path) == l and path[-1] == j),
                np.zeros(dist.horizons.size))
    return float(total[0]) if np.ndim(t) == 0 else total
