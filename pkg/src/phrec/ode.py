"""Dormand-Prince 5(4) integrator with continuous (dense) output.

Explicit, adaptive, with the 4th-order continuous extension, so solution
values at arbitrary output times come out of one pass over [t0, max(t_eval)].
"""
import numpy as np

from .errors import StepSizeUnderflow, ValidationError

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# 5th minus embedded 4th order weights
E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension: y(t + x h) = y + h * sum_s K_s * (P[s] . [x, x^2, x^3, x^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def _initial_step(f, t0, y0, f0, rtol, atol, t_end):
    scale = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_end - t0)


def dopri5(f, y0, t_eval, t0=0.0, rtol=1e-8, atol=1e-10, max_steps=1_000_000):
    """Integrate ``y' = f(t, y)`` from ``t0`` and return ``y`` at each ``t_eval``.

    ``y0`` may have any shape; ``f`` must return an array of the same shape.
    Returns ``(values, stats)`` with ``values.shape == (len(t_eval),) + y0.shape``.
    """
    t_eval = np.asarray(t_eval, dtype=float).ravel()
    if t_eval.size and (np.any(np.diff(t_eval) < 0) or t_eval[0] < t0):
        raise ValidationError("t_eval must be sorted and not precede t0")
    y = np.array(y0, dtype=float)
    shape = y.shape
    y = y.ravel()
    out = np.empty((t_eval.size, y.size))
    stats = {"steps": 0, "rejected": 0, "nfev": 0}

    def rhs(t, v):
        stats["nfev"] += 1
        return np.asarray(f(t, v.reshape(shape)), dtype=float).ravel()

    idx = 0
    while idx < t_eval.size and t_eval[idx] == t0:
        out[idx] = y
        idx += 1
    if idx == t_eval.size:
        return out.reshape((t_eval.size,) + shape), stats

    t_end = t_eval[-1]
    t = t0
    fy = rhs(t, y)
    h = _initial_step(rhs, t, y, fy, rtol, atol, t_end)
    K = np.empty((7, y.size))
    while t < t_end:
        if stats["steps"] + stats["rejected"] >= max_steps:
            raise StepSizeUnderflow(f"step budget of {max_steps} exhausted at t = {t:g}")
        h_min = 10 * np.spacing(t)
        if h < h_min:
            raise StepSizeUnderflow(f"step size {h:g} below minimum at t = {t:g}")
        h = min(h, t_end - t)
        K[0] = fy
        for s in range(1, 6):
            K[s] = rhs(t + C[s] * h, y + h * np.dot(A[s], K[:s]))
        y_new = y + h * np.dot(B[:6], K[:6])
        # FSAL: the last stage doubles as f at the accepted point
        fy_new = K[6] = rhs(t + h, y_new)
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        err = _rms(h * (E @ K) / scale)
        if err <= 1.0:
            t_new = t + h
            Q = K.T @ P
            while idx < t_eval.size and t_eval[idx] <= t_new:
                x = (t_eval[idx] - t) / h
                out[idx] = y + h * (Q @ np.array([x, x * x, x ** 3, x ** 4]))
                idx += 1
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
            t, y, fy = t_new, y_new, fy_new
            stats["steps"] += 1
            h *= factor
        else:
            stats["rejected"] += 1
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
    # any outputs at exactly t_end not yet written (float round-off)
    while idx < t_eval.size:
        out[idx] = y
        idx += 1
    return out.reshape((t_eval.size,) + shape), stats
