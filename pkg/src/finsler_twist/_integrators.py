"""Compiled time-1 integrator for H = y^2/2 + E + eps b(t) cos(2 pi x) c(y).

Each step of size h picks one of three fourth-order symplectic schemes:

* |y| >= band: the perturbation vanishes identically, so the rest of the
  period is an exact drift;
* y stays inside the plateau (c == 1) for the whole step: H is separable
  and the Forest-Ruth splitting is explicit;
* otherwise: triple-jump composition of the implicit midpoint rule, solved
  by Newton iteration.

Tangent maps are propagated alongside, so the returned Jacobian is the
exact derivative of the discrete map.
"""

import math

import numpy as np
from numba import njit

from .smooth import bump

TWO_PI = 2.0 * math.pi
FR_THETA = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
DRIFT_COEF = np.array([FR_THETA / 2, (1 - FR_THETA) / 2, (1 - FR_THETA) / 2, FR_THETA / 2])
KICK_COEF = np.array([FR_THETA, 1 - 2 * FR_THETA, FR_THETA])
JUMP_COEF = np.array([FR_THETA, 1 - 2 * FR_THETA, FR_THETA])

NEWTON_MAXIT = 60


def step_tables(epsilon, n_steps):
    """Per-step perturbation strengths.

    Returns ``(kick, mid)``, both (n_steps, 3): ``kick[k, i]`` is the signed
    Forest-Ruth kick amplitude 2 pi eps b(t) d_i h, ``mid[k, i]`` is eps b(t)
    at the i-th implicit-midpoint stage time.
    """
    h = 1.0 / n_steps
    t0 = np.arange(n_steps) * h
    kick_off = np.cumsum(DRIFT_COEF)[:3]
    kick_t = t0[:, None] + h * kick_off[None, :]
    kick = TWO_PI * epsilon * bump(kick_t) * KICK_COEF[None, :] * h
    jump_start = np.concatenate([[0.0], np.cumsum(JUMP_COEF)[:2]])
    mid_t = t0[:, None] + h * (jump_start + 0.5 * JUMP_COEF)[None, :]
    mid = epsilon * bump(mid_t)
    return np.ascontiguousarray(kick), np.ascontiguousarray(mid)


@njit(cache=True, nogil=True)
def _cut3(y, plateau, width):
    a = abs(y)
    if a <= plateau:
        return 1.0, 0.0, 0.0
    if a >= plateau + width:
        return 0.0, 0.0, 0.0
    s = (a - plateau) / width
    q = 1.0 / (1.0 - s) - 1.0 / s
    e = math.exp(-abs(q))
    sig = 1.0 / (1.0 + e) if q >= 0.0 else e / (1.0 + e)
    d1 = e / ((1.0 + e) * (1.0 + e))
    q1 = 1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s)
    d2 = d1 * (1.0 - 2.0 * sig)
    q2 = 2.0 / (1.0 - s) ** 3 - 2.0 / s**3
    sg = 1.0 if y > 0.0 else -1.0
    c0 = 1.0 - sig
    c1 = -d1 * q1 * sg / width
    c2 = -(d2 * q1 * q1 + d1 * q2) / (width * width)
    return c0, c1, c2


@njit(cache=True, nogil=True)
def _field(kb, x, y, plateau, width):
    sn = math.sin(TWO_PI * x)
    cs = math.cos(TWO_PI * x)
    c0, c1, c2 = _cut3(y, plateau, width)
    fx = y + kb * cs * c1
    fy = TWO_PI * kb * sn * c0
    j11 = -TWO_PI * kb * sn * c1
    j12 = 1.0 + kb * cs * c2
    j21 = TWO_PI * TWO_PI * kb * cs * c0
    j22 = TWO_PI * kb * sn * c1
    return fx, fy, j11, j12, j21, j22


@njit(cache=True, nogil=True)
def _flow_one(x, y, kick, mid, plateau, width, want_jac):
    n = kick.shape[0]
    h = 1.0 / n
    band = plateau + width
    m11, m12, m21, m22 = 1.0, 0.0, 0.0, 1.0
    status = 0
    for k in range(n):
        if abs(y) >= band:
            rest = 1.0 - k * h
            x += rest * y
            if want_jac:
                m11 += rest * m21
                m12 += rest * m22
            break
        budget = abs(kick[k, 0]) + abs(kick[k, 1]) + abs(kick[k, 2])
        if abs(y) + budget <= plateau:
            for i in range(3):
                a = DRIFT_COEF[i] * h
                x += a * y
                if want_jac:
                    m11 += a * m21
                    m12 += a * m22
                kk = kick[k, i]
                y += kk * math.sin(TWO_PI * x)
                if want_jac:
                    g = kk * TWO_PI * math.cos(TWO_PI * x)
                    m21 += g * m11
                    m22 += g * m12
            a = DRIFT_COEF[3] * h
            x += a * y
            if want_jac:
                m11 += a * m21
                m12 += a * m22
            continue
        for i in range(3):
            tau = JUMP_COEF[i] * h
            kb = mid[k, i]
            ht = 0.5 * tau
            fx, fy, j11, j12, j21, j22 = _field(kb, x, y, plateau, width)
            mx = x + ht * fx
            my = y + ht * fy
            converged = False
            for _ in range(NEWTON_MAXIT):
                fx, fy, j11, j12, j21, j22 = _field(kb, mx, my, plateau, width)
                rx = mx - x - ht * fx
                ry = my - y - ht * fy
                a11 = 1.0 - ht * j11
                a12 = -ht * j12
                a21 = -ht * j21
                a22 = 1.0 - ht * j22
                det = a11 * a22 - a12 * a21
                dx = -(a22 * rx - a12 * ry) / det
                dy = -(-a21 * rx + a11 * ry) / det
                mx += dx
                my += dy
                if abs(dx) + abs(dy) <= 1e-15 * (1.0 + abs(mx) + abs(my)):
                    converged = True
                    break
            if not converged:
                status = 1
            x = 2.0 * mx - x
            y = 2.0 * my - y
            if want_jac:
                # Cayley factor (I - ht J)^{-1} (I + ht J)
                a11 = 1.0 - ht * j11
                a12 = -ht * j12
                a21 = -ht * j21
                a22 = 1.0 - ht * j22
                det = a11 * a22 - a12 * a21
                b11 = 1.0 + ht * j11
                b12 = ht * j12
                b21 = ht * j21
                b22 = 1.0 + ht * j22
                t11 = (a22 * b11 - a12 * b21) / det
                t12 = (a22 * b12 - a12 * b22) / det
                t21 = (-a21 * b11 + a11 * b21) / det
                t22 = (-a21 * b12 + a11 * b22) / det
                n11 = t11 * m11 + t12 * m21
                n12 = t11 * m12 + t12 * m22
                n21 = t21 * m11 + t22 * m21
                n22 = t21 * m12 + t22 * m22
                m11, m12, m21, m22 = n11, n12, n21, n22
    return x, y, m11, m12, m21, m22, status


@njit(cache=True, nogil=True)
def flow_batch(xs, ys, kick, mid, plateau, width, want_jac):
    """Time-1 map of a batch of points; x is returned as an unreduced lift."""
    n = xs.shape[0]
    xo = np.empty(n)
    yo = np.empty(n)
    jac = np.empty((n, 2, 2))
    status = np.zeros(n, dtype=np.int64)
    for j in range(n):
        x, y, m11, m12, m21, m22, st = _flow_one(
            xs[j], ys[j], kick, mid, plateau, width, want_jac
        )
        xo[j] = x
        yo[j] = y
        jac[j, 0, 0] = m11
        jac[j, 0, 1] = m12
        jac[j, 1, 0] = m21
        jac[j, 1, 1] = m22
        status[j] = st
    return xo, yo, jac, status


@njit(cache=True, nogil=True)
def orbit_checked(x0, y0, kick1, mid1, kick2, mid2, plateau, width, n_iter):
    """Orbit of one point with a step-doubling check at every iterate.

    The coarse (``kick1``) and fine (``kick2``) tables must describe N and
    2N steps.  Returns the unreduced x-lifts, the y values (both of length
    n_iter + 1, fine solution) and the largest residual |z_N - z_2N|/15.
    """
    xs = np.empty(n_iter + 1)
    ys = np.empty(n_iter + 1)
    xs[0] = x0
    ys[0] = y0
    lift = x0
    x = x0 - math.floor(x0)
    y = y0
    worst = 0.0
    status = 0
    for k in range(n_iter):
        xa, ya, _, _, _, _, s1 = _flow_one(x, y, kick1, mid1, plateau, width, False)
        xb, yb, _, _, _, _, s2 = _flow_one(x, y, kick2, mid2, plateau, width, False)
        status |= s1 | s2
        r = max(abs(xa - xb), abs(ya - yb)) / 15.0
        if r > worst:
            worst = r
        lift += xb - x
        x = xb - math.floor(xb)
        y = yb
        xs[k + 1] = lift
        ys[k + 1] = y
    return xs, ys, worst, status


@njit(cache=True, nogil=True)
def _spectral_norm(a, b, c, d):
    # largest singular value of [[a, b], [c, d]]
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = max(s * s - 4.0 * det * det, 0.0)
    return math.sqrt(0.5 * (s + math.sqrt(disc)))


@njit(cache=True, nogil=True)
def ftle_batch(xs, ys, kick, mid, plateau, width, n_iter):
    """Finite-time exponents (1/n) log ||Df^n|| for a batch of seeds.

    The Jacobian product is rescaled by its largest entry after every
    iterate and the logarithms of the scale factors are summed.
    """
    n = xs.shape[0]
    out = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    for j in range(n):
        x = xs[j]
        y = ys[j]
        p11, p12, p21, p22 = 1.0, 0.0, 0.0, 1.0
        logsum = 0.0
        for _ in range(n_iter):
            x, y, m11, m12, m21, m22, st = _flow_one(x, y, kick, mid, plateau, width, True)
            status[j] |= st
            x -= math.floor(x)
            q11 = m11 * p11 + m12 * p21
            q12 = m11 * p12 + m12 * p22
            q21 = m21 * p11 + m22 * p21
            q22 = m21 * p12 + m22 * p22
            sc = max(abs(q11), abs(q12), abs(q21), abs(q22))
            logsum += math.log(sc)
            p11, p12, p21, p22 = q11 / sc, q12 / sc, q21 / sc, q22 / sc
        out[j] = (logsum + math.log(_spectral_norm(p11, p12, p21, p22))) / n_iter
    return out, status
