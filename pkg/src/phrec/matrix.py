"""Dense matrix primitives: validation of sub-intensity matrices, the matrix
exponential and guarded linear solves.

``expm`` works on stacks of matrices (shape ``(..., m, m)``) so the likelihood
can exponentiate one block per patient in a single call.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import (AllRowsConservative, NotSquare, Overflow, RowSumPositive,
                     SignViolation, Singular, ValidationError)

STRUCT_TOL = 1e-12
PIVOT_TOL = 1e-13

# degree-13 Pade numerator coefficients (Higham 2005)
_B13 = (64764752532480000., 32382376266240000., 7771770303897600.,
        1187353796428800., 129060195264000., 10559470521600.,
        670442572800., 33522128640., 1323241920., 40840800., 960960.,
        16380., 182., 1.)
_THETA13 = 5.371920351148152


def as_matrix(a, name="matrix"):
    a = np.array(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def _check_square(a):
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise NotSquare(f"expected square matrix, got shape {a.shape}")


@dataclass(frozen=True, eq=False)
class SubIntensity:
    """Transient block ``T`` of a CTMC generator plus its exit vector ``t0``."""

    T: np.ndarray
    t0: np.ndarray

    @property
    def dim(self):
        return self.T.shape[0]

    def generator(self):
        """Full generator with the absorbing state first (row/column 0)."""
        m = self.dim
        Q = np.zeros((m + 1, m + 1))
        Q[1:, 0] = self.t0
        Q[1:, 1:] = self.T
        return Q


def validate_subintensity(T):
    T = as_matrix(T, "T")
    _check_square(T)
    m = T.shape[0]
    scale = max(1.0, float(np.abs(T).max()))
    tol = STRUCT_TOL * scale
    for r in range(m):
        for c in range(m):
            v = T[r, c]
            if (r == c and v > 0) or (r != c and v < 0):
                raise SignViolation(r, c, v)
    sums = T.sum(axis=1)
    for r, s in enumerate(sums):
        if s > tol:
            raise RowSumPositive(r, float(s))
    if not np.any(sums < -tol):
        raise AllRowsConservative("no row has a strictly negative sum; nothing is absorbed")
    t0 = -sums
    t0[t0 < 0] = 0.0
    T = T.copy()
    T.setflags(write=False)
    t0.setflags(write=False)
    return SubIntensity(T, t0)


def expm(A, t=1.0):
    """``exp(t*A)`` by scaling and squaring with a [13/13] Pade approximant.

    ``A`` may be a single square matrix or a stack ``(..., m, m)``; ``t`` is a
    scalar or an array broadcasting against the stack's leading dimensions.
    """
    A = np.asarray(A, dtype=float)
    _check_square(A)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValidationError("t must be finite")
    X = A * t[..., None, None]
    batch = X.shape[:-2]
    m = X.shape[-1]
    X = X.reshape((-1, m, m))

    norms = np.abs(X).sum(axis=1).max(axis=1)
    if not np.all(np.isfinite(norms)):
        raise Overflow("non-finite entries in t*A")
    with np.errstate(divide="ignore"):
        s = np.where(norms > _THETA13, np.ceil(np.log2(norms / _THETA13)), 0).astype(int)
    X = X / (2.0 ** s)[:, None, None]

    b = _B13
    ident = np.broadcast_to(np.eye(m), X.shape)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    U = X @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
             + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * ident)
    V = (X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
         + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)

    with np.errstate(over="ignore", invalid="ignore"):
        for r in range(int(s.max(initial=0))):
            sel = s > r
            if sel.all():
                R = R @ R
            else:
                R[sel] = R[sel] @ R[sel]
    R[norms == 0] = np.eye(m)
    if not np.all(np.isfinite(R)):
        raise Overflow("matrix exponential overflowed")
    return R.reshape(batch + (m, m))


def solve(A, B):
    """Solve ``A X = B`` by partial-pivot LU; refuses near-singular ``A``."""
    A = as_matrix(A, "A")
    _check_square(A)
    B = np.asarray(B, dtype=float)
    scale = float(np.abs(A).max())
    if scale == 0.0:
        raise Singular("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    if np.abs(np.diag(lu)).min() < PIVOT_TOL * scale:
        raise Singular(f"pivot below {PIVOT_TOL:g} of matrix scale")
    return sla.lu_solve((lu, piv), B)
