"""Smooth building blocks: the periodic time bump and the plateau cutoff.

Every function here is a scalar ``numba`` kernel with a matching numpy ufunc,
so the compiled integrators and the vectorised evaluators share one source.
"""

import math

import numpy as np
from numba import njit, vectorize

# int_0^1 exp(1 - 1/(1 - (2t-1)^2)) dt, 30-digit quadrature
BUMP_INTEGRAL = 0.603450161218938087668118998165
BUMP_MAX = 1.0 / BUMP_INTEGRAL


@njit(cache=True)
def bump_scalar(t):
    u = 2.0 * (t - math.floor(t)) - 1.0
    w = 1.0 - u * u
    # exp(1 - 1/w) underflows to zero well before w reaches 1e-3
    if w <= 1e-3:
        return 0.0
    return math.exp(1.0 - 1.0 / w) / BUMP_INTEGRAL


@njit(cache=True)
def bump_dt_scalar(t):
    u = 2.0 * (t - math.floor(t)) - 1.0
    w = 1.0 - u * u
    if w <= 1e-3:
        return 0.0
    b = math.exp(1.0 - 1.0 / w) / BUMP_INTEGRAL
    # chain rule through u = 2t - 1
    return b * (-2.0 * u / (w * w)) * 2.0


@njit(cache=True)
def step_scalar(s, order):
    """Derivative ``order`` (0..3) of the C-infinity step S(s).

    S(s) = e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)}), written as a logistic
    function of q(s) = 1/(1-s) - 1/s so that no term overflows.
    """
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0 if order == 0 else 0.0
    q = 1.0 / (1.0 - s) - 1.0 / s
    e = math.exp(-abs(q))
    if q >= 0.0:
        sig = 1.0 / (1.0 + e)
    else:
        sig = e / (1.0 + e)
    if order == 0:
        return sig
    d1 = e / ((1.0 + e) * (1.0 + e))
    q1 = 1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s)
    if order == 1:
        return d1 * q1
    d2 = d1 * (1.0 - 2.0 * sig)
    q2 = 2.0 / (1.0 - s) ** 3 - 2.0 / s**3
    if order == 2:
        return d2 * q1 * q1 + d1 * q2
    d3 = d1 * (1.0 - 6.0 * sig + 6.0 * sig * sig)
    q3 = 6.0 / (1.0 - s) ** 4 + 6.0 / s**4
    return d3 * q1**3 + 3.0 * d2 * q1 * q2 + d1 * q3


@njit(cache=True)
def cutoff_scalar(y, plateau, width, order):
    """Derivative ``order`` (0..3) in y of the even plateau cutoff.

    Equal to 1 on |y| <= plateau and 0 on |y| >= plateau + width.
    """
    a = abs(y)
    if a <= plateau:
        return 1.0 if order == 0 else 0.0
    if a >= plateau + width:
        return 0.0
    s = (a - plateau) / width
    val = -step_scalar(s, order) / width**order
    if order == 0:
        return 1.0 + val
    if order % 2 == 1 and y < 0.0:
        return -val
    return val


@vectorize(["float64(float64)"], cache=True)
def _bump_u(t):
    return bump_scalar(t)


@vectorize(["float64(float64)"], cache=True)
def _bump_dt_u(t):
    return bump_dt_scalar(t)


@vectorize(["float64(float64, int64)"], cache=True)
def _step_u(s, order):
    return step_scalar(s, order)


@vectorize(["float64(float64, float64, float64, int64)"], cache=True)
def _cutoff_u(y, plateau, width, order):
    return cutoff_scalar(y, plateau, width, order)


# SIMD loops evaluate both branches, so the guarded divisions can raise
# spurious floating point flags; the results are unaffected.
def bump(t):
    """Unit-mass periodic bump b(t), vanishing to all orders at integer t."""
    with np.errstate(all="ignore"):
        return _bump_u(t)


def bump_dt(t):
    with np.errstate(all="ignore"):
        return _bump_dt_u(t)


def smooth_step(s, order):
    with np.errstate(all="ignore"):
        return _step_u(s, order)


def cutoff(y, plateau, width, order):
    """Vectorised ``cutoff_scalar``."""
    with np.errstate(all="ignore"):
        return _cutoff_u(y, plateau, width, order)


def max_step_curvature(n=200001):
    """Grid maximum of |S''| on (0, 1); about 9.84."""
    s = np.linspace(0.0, 1.0, n)[1:-1]
    return float(np.abs(smooth_step(s, 2)).max())
