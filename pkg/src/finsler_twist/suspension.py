"""Time-periodic convex Hamiltonian whose time-1 map is the perturbed twist map.

The family is

    H(t, x, y) = y^2/2 + E + eps * b(t) * cos(2 pi x) * c(y)

with ``b`` the unit-mass periodic bump (vanishing near integer times) and
``c`` an even plateau cutoff that is 1 on |y| <= band_K - ramp_width and 0 on
|y| >= band_K.  E is the asymptotic constant (D_plus = D_minus = E); it does not
affect the dynamics but fixes the additive constant of the Lagrangian.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp

from . import _integrators
from .errors import NumericalError, SpecError
from .phase import CylinderPoint
from .smooth import BUMP_MAX, bump, bump_dt, cutoff, max_step_curvature

MIN_HESSIAN = 0.5
_STEP_CURV = max_step_curvature()


@dataclass(frozen=True)
class SuspensionSpec:
    """Parameters of the Hamiltonian family.

    The default band (K = 10, ramp 6.5) keeps d^2H/dy^2 >= 0.5 up to
    eps ~ 1.3 while the plateau |y| <= 3.5 holds the chaotic zone of the
    strongly perturbed maps.
    """

    epsilon: float = 0.0
    band_K: float = 10.0
    ramp_width: float = 6.5
    energy_offset: float = 0.0
    D: float = None
    min_hessian: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.D is None:
            object.__setattr__(self, "D", float(self.band_K))
        if not self.epsilon >= 0:
            raise SpecError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.band_K > 0:
            raise SpecError(f"band_K must be > 0, got {self.band_K}")
        if not 0 < self.ramp_width <= self.band_K:
            raise SpecError("ramp_width must lie in (0, band_K]")
        if self.D < self.band_K:
            raise SpecError(f"D={self.D} must be >= band_K={self.band_K}")
        m = convexity_margin(self.epsilon, self.band_K, self.ramp_width)
        object.__setattr__(self, "min_hessian", m)
        if not m > MIN_HESSIAN:
            raise SpecError(
                f"min d2H/dy2 = {m:.4f} <= {MIN_HESSIAN} for epsilon={self.epsilon}; "
                f"widen ramp_width (currently {self.ramp_width})"
            )

    @property
    def plateau(self):
        return self.band_K - self.ramp_width

    @property
    def D_plus(self):
        return self.energy_offset

    @property
    def D_minus(self):
        return self.energy_offset

    def replace(self, **changes):
        kw = dict(
            epsilon=self.epsilon,
            band_K=self.band_K,
            ramp_width=self.ramp_width,
            energy_offset=self.energy_offset,
            D=self.D,
        )
        kw.update(changes)
        return SuspensionSpec(**kw)

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "band_K": self.band_K,
            "ramp_width": self.ramp_width,
            "energy_offset": self.energy_offset,
            "D": self.D,
        }


def convexity_margin(epsilon, band_K, ramp_width, n_grid=4097):
    """Minimum of d^2H/dy^2 over a (t, x, y) grid.

    The grid holds t = 1/2 (bump maximum) and x in {0, 1/2}, so the minimum
    of the separable product b(t) cos(2 pi x) c''(y) is attained on it.
    """
    plateau = band_K - ramp_width
    t = np.linspace(0.0, 1.0, 65)
    x = np.linspace(0.0, 1.0, 65)
    y = np.linspace(plateau, band_K, n_grid)
    p = np.outer(bump(t), np.cos(2 * math.pi * x)).ravel()
    c2 = cutoff(y, plateau, ramp_width, 2)
    # exact analytic bound on top of the grid
    bound = BUMP_MAX * _STEP_CURV / ramp_width**2
    lo = min(p.min() * c2.max(), p.max() * c2.min(), p.min() * c2.min(), p.max() * c2.max())
    return float(min(1.0 + epsilon * lo, 1.0 - epsilon * bound))


def _vpot(x, order):
    w = 2.0 * math.pi
    return w**order * np.cos(w * x + order * math.pi / 2)


def _bpart(t, order):
    if order == 0:
        return bump(t)
    if order == 1:
        return bump_dt(t)
    raise ValueError("time derivatives above first order are not provided")


def hamiltonian_partial(spec, t, x, p, nt=0, nx=0, np_=0):
    """Partial derivative d^nt_t d^nx_x d^np_p H at (t, x, p); vectorised."""
    t, x, p = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, p)))
    out = np.zeros(t.shape)
    if spec.epsilon != 0.0:
        out = spec.epsilon * _bpart(t, nt) * _vpot(x, nx) * cutoff(
            p, spec.plateau, spec.ramp_width, np_
        )
    if nt == 0 and nx == 0:
        if np_ == 0:
            out = out + 0.5 * p * p + spec.energy_offset
        elif np_ == 1:
            out = out + p
        elif np_ == 2:
            out = out + 1.0
    return out if out.ndim else float(out)


def hamiltonian_eval(spec, t, x, y):
    """H(t, x, y)."""
    return hamiltonian_partial(spec, t, x, y)


def hamiltonian_vector_field(spec, t, x, p):
    """(dx/dt, dp/dt) = (H_p, -H_x)."""
    return hamiltonian_partial(spec, t, x, p, np_=1), -hamiltonian_partial(spec, t, x, p, nx=1)


def _perturbation_slope_bound(spec):
    from .smooth import smooth_step

    s = np.linspace(0.0, 1.0, 4097)
    return spec.epsilon * BUMP_MAX * float(np.abs(smooth_step(s, 1)).max()) / spec.ramp_width


def legendre_momentum(spec, t, x, v, tol=1e-15, maxiter=100):
    """Momentum p with H_p(t, x, p) = v, by bracketed Newton iteration.

    H_p is strictly increasing in p (H_pp > 0.5), so the root is unique and
    lies in [v - M, v + M] with M the sup of |eps b V c'|.  A Newton step that
    leaves the current bracket is replaced by bisection.
    """
    t, x, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, v)))
    shape = v.shape
    if spec.epsilon == 0.0:
        return v.copy() if shape else float(v)
    t, x, v = (a.ravel() for a in (t, x, v))
    p = v.copy()
    outside = np.abs(v) >= spec.band_K
    M = _perturbation_slope_bound(spec) * (1 + 1e-12) + 1e-300
    lo = v - M
    hi = v + M
    active = ~outside
    for _ in range(maxiter):
        if not active.any():
            break
        ta, xa, pa = t[active], x[active], p[active]
        g = hamiltonian_partial(spec, ta, xa, pa, np_=1) - v[active]
        gp = hamiltonian_partial(spec, ta, xa, pa, np_=2)
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(g < 0, pa, lo_a)
        hi_a = np.where(g > 0, pa, hi_a)
        newton = pa - g / gp
        bad = ~((newton > lo_a) & (newton < hi_a))
        new = np.where(bad, 0.5 * (lo_a + hi_a), newton)
        step = np.abs(new - pa)
        p[active] = new
        lo[active] = lo_a
        hi[active] = hi_a
        done = (step <= tol * (1.0 + np.abs(new))) | (g == 0)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    else:
        if active.any():
            j = np.flatnonzero(active)[0]
            res = float(abs(hamiltonian_partial(spec, t[j], x[j], p[j], np_=1) - v[j]))
            raise NumericalError(
                "Legendre Newton iteration did not converge",
                residual=res,
                context={"t": float(t[j]), "x": float(x[j]), "v": float(v[j])},
            )
    return p.reshape(shape) if shape else float(p[0])


def legendre_transform(spec, t, x, v):
    """Return (p, L_hat) with H_p(t,x,p) = v and L_hat = p v - H(t,x,p)."""
    p = legendre_momentum(spec, t, x, v)
    lag = np.asarray(p) * np.asarray(v, dtype=float) - hamiltonian_partial(spec, t, x, p)
    if np.ndim(lag) == 0:
        lag = float(lag)
    return p, lag


def lagrangian_hat_eval(spec, t, x, v):
    """L_hat(t, x, v), the Legendre dual of H."""
    return legendre_transform(spec, t, x, v)[1]


def lagrangian_hat_partials(spec, t, x, v):
    """Partials of L_hat from convex duality.

    Returns a dict with keys ``L, p, L_x, L_t, L_v, L_vv, L_xv, L_tv``:
    L_v = p, L_x = -H_x, L_t = -H_t, L_vv = 1/H_pp, L_xv = -H_px/H_pp,
    L_tv = -H_pt/H_pp, all evaluated at the dual momentum p.
    """
    p, lag = legendre_transform(spec, t, x, v)
    hpp = hamiltonian_partial(spec, t, x, p, np_=2)
    return {
        "L": lag,
        "p": p,
        "L_x": -hamiltonian_partial(spec, t, x, p, nx=1),
        "L_t": -hamiltonian_partial(spec, t, x, p, nt=1),
        "L_v": p,
        "L_vv": 1.0 / hpp,
        "L_xv": -hamiltonian_partial(spec, t, x, p, nx=1, np_=1) / hpp,
        "L_tv": -hamiltonian_partial(spec, t, x, p, nt=1, np_=1) / hpp,
    }


_TABLE_CACHE = {}


def _tables(epsilon, n_steps):
    key = (float(epsilon), int(n_steps))
    tab = _TABLE_CACHE.get(key)
    if tab is None:
        if len(_TABLE_CACHE) > 64:
            _TABLE_CACHE.clear()
        tab = _integrators.step_tables(epsilon, n_steps)
        _TABLE_CACHE[key] = tab
    return tab


def time1_flow(spec, x, y, n_steps=1000, jacobian=False):
    """Raw time-1 map of a batch; returns (x_lift, y, J or None).

    ``x_lift`` is not reduced mod 1.  No Richardson check.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    if spec.epsilon == 0.0:
        J = None
        if jacobian:
            J = np.broadcast_to(np.array([[1.0, 1.0], [0.0, 1.0]]), (x.size, 2, 2)).copy()
        return x + y, y.copy(), J
    kick, mid = _tables(spec.epsilon, n_steps)
    xo, yo, J, status = _integrators.flow_batch(
        np.ascontiguousarray(x), np.ascontiguousarray(y), kick, mid,
        spec.plateau, spec.ramp_width, jacobian,
    )
    if status.any():
        j = int(np.flatnonzero(status)[0])
        raise NumericalError(
            "implicit midpoint Newton iteration failed",
            context={"x": float(x[j]), "y": float(y[j]), "n_steps": n_steps},
        )
    return xo, yo, (J if jacobian else None)


def richardson_residual(spec, x, y, n_steps):
    """Error estimate |z_N - z_2N| * 16/15 of the fourth-order time-1 map."""
    x1, y1, _ = time1_flow(spec, x, y, n_steps)
    x2, y2, _ = time1_flow(spec, x, y, 2 * n_steps)
    return np.maximum(np.abs(x1 - x2), np.abs(y1 - y2)) * 16.0 / 15.0


def time1_map_checked(spec, x, y, n_steps=1000, tol=1e-10, jacobian=False,
                      jac_tol=1e-7, max_steps=64000):
    """Step-doubling time-1 map of a batch.

    Starting from ``n_steps`` the step count is doubled until the
    Richardson estimate |z_N - z_2N|/15 of the 2N solution is below ``tol``
    (and the Jacobian change below ``jac_tol`` when requested).  Returns
    ``(x_lift, y, J or None, n_used)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    if spec.epsilon == 0.0:
        xo, yo, J = time1_flow(spec, x, y, n_steps, jacobian)
        return xo, yo, J, n_steps
    x1, y1, J1 = time1_flow(spec, x, y, n_steps, jacobian)
    n = n_steps
    while True:
        x2, y2, J2 = time1_flow(spec, x, y, 2 * n, jacobian)
        res = np.maximum(np.abs(x1 - x2), np.abs(y1 - y2)) / 15.0
        jres = np.abs(J1 - J2).max(axis=(1, 2)) / 15.0 if jacobian else np.zeros_like(res)
        x1, y1, J1, n = x2, y2, J2, 2 * n
        if res.max() <= tol and jres.max() <= jac_tol:
            return x1, y1, J1, n
        if 2 * n > max_steps:
            bad = res.max() > tol
            j = int(res.argmax() if bad else jres.argmax())
            raise NumericalError(
                "time-1 map missed integrator tolerance",
                residual=float(res[j] if bad else jres[j]),
                context={
                    "quantity": "orbit" if bad else "jacobian",
                    "x": float(x[j]), "y": float(y[j]), "n_steps": n,
                },
            )


def hamiltonian_time1_map(spec, p, n_steps=1000, tol=1e-10, verify=True, max_steps=64000):
    """Time-1 map of H applied to a CylinderPoint (scalar or batch).

    The symplectic integrator starts at step 1/``n_steps`` (at most 1e-3);
    with ``verify`` the step is halved until the step-doubling residual is
    below ``tol``, else a NumericalError carrying the residual is raised.
    """
    if n_steps < 1000:
        raise ValueError("hamiltonian_time1_map requires step <= 1e-3")
    shape = np.shape(p.x)
    if verify:
        x1, y1, _, _ = time1_map_checked(spec, p.x, p.y, n_steps, tol, max_steps=max_steps)
    else:
        x1, y1, _ = time1_flow(spec, p.x, p.y, n_steps)
    return CylinderPoint(x1.reshape(shape), y1.reshape(shape))


def hamiltonian_flow(spec, x0, p0, t_eval=None, t_span=(0.0, 1.0), rtol=1e-12, atol=1e-13):
    """Adaptive (non-symplectic) DOP853 solution of Hamilton's equations.

    Vectorised over a batch of initial conditions; returns the scipy
    ``OdeResult`` with ``y`` of shape (2n, len(t)) stacked as [x..., p...].
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    n = x0.size

    def rhs(t, z):
        xd, pd = hamiltonian_vector_field(spec, t, z[:n], z[n:])
        return np.concatenate([np.atleast_1d(xd), np.atleast_1d(pd)])

    sol = solve_ivp(
        rhs, t_span, np.concatenate([x0, p0]), method="DOP853",
        t_eval=t_eval, rtol=rtol, atol=atol, dense_output=t_eval is None,
    )
    if not sol.success:
        raise NumericalError(f"Hamiltonian flow integration failed: {sol.message}")
    return sol
