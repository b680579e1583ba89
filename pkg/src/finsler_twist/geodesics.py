"""Geodesics of the Finsler metric in graph form and the return map to the
section V0 = {x1 = 0, v1 > 0} of the unit tangent bundle.

A geodesic with v1 > 0 is (after reparametrisation) a graph t -> (t, theta(t))
where theta solves the Euler-Lagrange equation of L.  The section is hit
again at t = 1, so the return map is a fixed-time map.
"""

from dataclasses import dataclass, field
import io

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError
from .finsler import finsler_eval, lagrangian_derivs
from .phase import CylinderPoint
from .suspension import hamiltonian_flow, hamiltonian_partial, legendre_momentum

GRAPH_RTOL = 1e-12
GRAPH_ATOL = 1e-12
# tightest relative tolerance DOP853 accepts
REF_RTOL = 2.5e-14


@dataclass(frozen=True)
class SectionState:
    """Point (0, h, v) of V0; fields may be floats or equally shaped arrays."""

    h: object
    v1: object
    v2: object

    def __post_init__(self):
        h = np.mod(np.asarray(self.h, dtype=float), 1.0)
        h = np.where(h >= 1.0, 0.0, h)
        v1 = np.asarray(self.v1, dtype=float)
        v2 = np.asarray(self.v2, dtype=float)
        if np.any(v1 <= 0):
            raise DomainError("section states need v1 > 0")
        if h.ndim == 0:
            h, v1, v2 = float(h), float(v1), float(v2)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)

    @property
    def slope(self):
        return np.asarray(self.v2) / np.asarray(self.v1)

    def speed(self, model):
        return finsler_eval(model, 0.0, self.h, self.v1, self.v2)

    def validate(self, model, tol=1e-10):
        err = np.max(np.abs(np.asarray(self.speed(model)) - 1.0))
        if err > tol:
            raise DomainError(f"section state is not unit speed: |F - 1| = {err:.3e}")
        return self


@dataclass
class GraphTrajectory:
    """Samples (t, theta, thetadot) of one graph geodesic plus metadata.

    ``sol`` keeps the dense output of the integrator when available.
    """

    t: np.ndarray
    theta: np.ndarray
    thetadot: np.ndarray
    meta: dict = field(default_factory=dict)
    sol: object = field(default=None, repr=False)

    def to_csv(self, fh=None, extra_meta=None):
        """CSV rows t,theta,thetadot after '# key: value' metadata lines."""
        buf = io.StringIO()
        meta = dict(self.meta)
        meta.update(extra_meta or {})
        for k in sorted(meta):
            buf.write(f"# {k}: {meta[k]}\n")
        buf.write("t,theta,thetadot\n")
        for row in zip(self.t, self.theta, self.thetadot):
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _band_terms(model, t, x, v, jac):
    """theta'' and optionally its partials in (theta, theta') inside |v| <= D.

    Through the Legendre correspondence theta'' = G(t, x, p) with
    G = H_pt + H_px H_p - H_pp H_x and p the dual momentum of v.
    """
    spec = model.suspension
    p = legendre_momentum(spec, t, x, v)

    def H(nt=0, nx=0, np_=0):
        return hamiltonian_partial(spec, t, x, p, nt, nx, np_)

    Hp, Hx, Hpp, Hpx, Hpt = H(np_=1), H(nx=1), H(np_=2), H(nx=1, np_=1), H(nt=1, np_=1)
    acc = Hpt + Hpx * Hp - Hpp * Hx
    if not jac:
        return acc, None, None
    Gx = H(nt=1, nx=1, np_=1) + H(nx=2, np_=1) * Hp + Hpx * Hpx - H(nx=1, np_=2) * Hx - Hpp * H(nx=2)
    Gp = H(nt=1, np_=2) + H(nx=1, np_=2) * Hp - H(np_=3) * Hx
    d_theta = Gx - Gp * Hpx / Hpp
    d_v = Gp / Hpp
    return acc, d_theta, d_v


def el_terms(model, t, theta, thetadot, jac=False):
    """Vectorised theta'' (and d theta''/d theta, d theta''/d theta')."""
    t, x, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, theta, thetadot)))
    acc = np.zeros(v.shape)
    dth = np.zeros(v.shape) if jac else None
    dv = np.zeros(v.shape) if jac else None
    band = np.abs(v) <= model.D
    if model.epsilon != 0.0 and band.any():
        a, b, c = _band_terms(model, t[band], x[band], v[band], jac)
        acc[band] = a
        if jac:
            dth[band] = b
            dv[band] = c
    return acc, dth, dv


def el_rhs(model, t, theta, thetadot):
    """theta'' = (L_x - L_tv - L_xv theta') / L_vv at (t, theta, theta')."""
    d = lagrangian_derivs(model, t, theta, thetadot)
    out = (d["L_x"] - d["L_tv"] - d["L_xv"] * np.asarray(thetadot)) / d["L_vv"]
    return out if np.ndim(out) else float(out)


def _solve(model, h, slope, variational, t_eval, rtol, atol, dense):
    h = np.atleast_1d(np.asarray(h, dtype=float)).ravel()
    s = np.atleast_1d(np.asarray(slope, dtype=float)).ravel()
    n = h.size
    z0 = [h, s]
    if variational:
        # tangent columns for d/dh and d/dslope
        z0 += [np.ones(n), np.zeros(n), np.zeros(n), np.ones(n)]

    def rhs(t, z):
        th, v = z[:n], z[n:2 * n]
        acc, dth, dv = el_terms(model, t, th, v, variational)
        out = [v, acc]
        if variational:
            for k in range(2):
                a, b = z[(2 + 2 * k) * n:(3 + 2 * k) * n], z[(3 + 2 * k) * n:(4 + 2 * k) * n]
                out += [b, dth * a + dv * b]
        return np.concatenate(out)

    sol = solve_ivp(
        rhs, (0.0, 1.0), np.concatenate(z0), method="DOP853",
        t_eval=t_eval, rtol=rtol, atol=atol, dense_output=dense,
    )
    if not sol.success:
        raise NumericalError(f"graph geodesic integration failed: {sol.message}")
    return sol, n


def integrate_graphs(model, h, slope, t_eval=None, rtol=GRAPH_RTOL, atol=GRAPH_ATOL,
                     variational=False, dense=False):
    """Batch integration of theta'' = el_rhs on [0, 1].

    Returns ``(theta_1, thetadot_1, J, sol)``: end values (unreduced lift),
    the variational matrices d(theta, theta')(1)/d(h, slope) when requested
    (else None) and the raw scipy solution.
    """
    sol, n = _solve(model, h, slope, variational, t_eval, rtol, atol, dense)
    zf = sol.sol(1.0) if dense and t_eval is None else sol.y[:, -1]
    th1, v1 = zf[:n], zf[n:2 * n]
    J = None
    if variational:
        J = np.empty((n, 2, 2))
        J[:, 0, 0], J[:, 1, 0] = zf[2 * n:3 * n], zf[3 * n:4 * n]
        J[:, 0, 1], J[:, 1, 1] = zf[4 * n:5 * n], zf[5 * n:6 * n]
    return th1, v1, J, sol


def integrate_graph(model, h, slope0, n_samples=101, tol=1e-10, verify=True):
    """One graph geodesic theta(0) = h, theta'(0) = slope0 on [0, 1].

    With ``verify`` the end point is compared with a solve at the tightest
    DOP853 tolerance; the working rtol is lowered tenfold until the two agree
    within ``tol``, and a NumericalError is raised if none does.
    """
    t = np.linspace(0.0, 1.0, n_samples)
    rtol = min(GRAPH_RTOL, tol * 1e-2)
    sol, _ = _solve(model, h, slope0, False, None, rtol, rtol, True)
    z = sol.sol(t)
    residual = float("nan")
    if verify:
        ref, _ = _solve(model, h, slope0, False, None, REF_RTOL, REF_RTOL, False)
        residual = float(np.abs(ref.y[:, -1] - z[:, -1]).max())
        while residual > tol and rtol > 10 * REF_RTOL:
            rtol = max(rtol / 10, 10 * REF_RTOL)
            sol, _ = _solve(model, h, slope0, False, None, rtol, rtol, True)
            z = sol.sol(t)
            residual = float(np.abs(ref.y[:, -1] - z[:, -1]).max())
        if residual > tol:
            raise NumericalError(
                "graph geodesic missed tolerance",
                residual=residual, context={"h": h, "slope0": slope0},
            )
    meta = {
        "method": "DOP853", "order": 8, "rtol": rtol, "atol": rtol,
        "n_steps": int(sol.t.size - 1), "endpoint_residual": residual,
        "h": float(h), "slope0": float(slope0), "epsilon": model.epsilon,
    }
    return GraphTrajectory(t, z[0], z[1], meta, sol)


def el_residual(model, traj, dt=1e-4):
    """max |d/dt L_v - L_x| along a trajectory with dense output.

    d/dt is a fourth-order central difference of L_v(t, theta, theta')
    evaluated on the dense interpolant.
    """
    t = np.clip(traj.t, 2 * dt, 1 - 2 * dt)

    def Lv(s):
        z = traj.sol.sol(s)
        return lagrangian_derivs(model, s, z[0], z[1])["L_v"]

    dLv = (-Lv(t + 2 * dt) + 8 * Lv(t + dt) - 8 * Lv(t - dt) + Lv(t - 2 * dt)) / (12 * dt)
    z = traj.sol.sol(t)
    Lx = lagrangian_derivs(model, t, z[0], z[1])["L_x"]
    return float(np.abs(dLv - Lx).max())


def conjugacy_g(s):
    """g(0, h, v) = (h, v2 / v1)."""
    if np.any(np.asarray(s.v1) <= 0):
        raise DomainError("conjugacy g needs v1 > 0")
    return CylinderPoint(s.h, s.slope)


def conjugacy_g_inverse(model, p):
    """g^-1(x, y) = (0, x, (1, y) / F(0, x, 1, y))."""
    f = finsler_eval(model, 0.0, p.x, 1.0, p.y)
    return SectionState(p.x, 1.0 / f, np.asarray(p.y) / f)


def return_map(model, s, rtol=GRAPH_RTOL):
    """First return R: V0 -> V0 of the geodesic flow (batch capable)."""
    th1, v1, _, _ = integrate_graphs(model, s.h, s.slope, rtol=rtol, atol=rtol)
    h1 = np.mod(th1, 1.0)
    f = finsler_eval(model, 0.0, h1, 1.0, v1)
    shape = np.shape(s.h)
    return SectionState(h1.reshape(shape), (1.0 / f).reshape(shape), (v1 / f).reshape(shape))


def conjugated_return_map(model, p, rtol=GRAPH_RTOL):
    """g o R o g^-1 applied to a CylinderPoint."""
    return conjugacy_g(return_map(model, conjugacy_g_inverse(model, p), rtol))


def return_map_jacobian(model, s, rtol=GRAPH_RTOL):
    """Derivative of g o R o g^-1 at g(s) from the variational equations."""
    _, _, J, _ = integrate_graphs(model, s.h, s.slope, rtol=rtol, atol=rtol, variational=True)
    shape = np.shape(s.h)
    return J.reshape(shape + (2, 2)) if shape else J[0]


class ReturnMap:
    """g o R o g^-1 in the callable form used by the chaos diagnostics."""

    def __init__(self, model, rtol=GRAPH_RTOL):
        self.model = model
        self.rtol = rtol

    def step(self, x, y):
        th1, v1, J, _ = integrate_graphs(
            self.model, x, y, rtol=self.rtol, atol=self.rtol, variational=True
        )
        return th1, v1, J

    def __call__(self, x, y):
        th1, v1, _, _ = integrate_graphs(self.model, x, y, rtol=self.rtol, atol=self.rtol)
        return np.mod(th1, 1.0), v1


def hamiltonian_cross_check(model, h, slope, t_eval):
    """Largest gap between graph geodesics and Hamiltonian orbits.

    Both start from (h, slope); since b(0) = 0 the initial momentum equals
    the slope.  The geodesic's (theta, theta') is compared with
    (x(t), H_p(t, x, p)) at the times ``t_eval``.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    n = h.size
    t_eval = np.asarray(t_eval, dtype=float)
    _, _, _, sol = integrate_graphs(model, h, slope, t_eval=t_eval)
    p0 = legendre_momentum(model.suspension, 0.0, h, slope)
    ham = hamiltonian_flow(model.suspension, h, p0, t_eval=t_eval, rtol=1e-13, atol=1e-13)
    xs, ps = ham.y[:n], ham.y[n:]
    vel = hamiltonian_partial(model.suspension, t_eval[None, :], xs, ps, np_=1)
    gap_x = np.abs(sol.y[:n] - xs).max()
    gap_v = np.abs(sol.y[n:2 * n] - vel).max()
    return float(max(gap_x, gap_v))


def free_flat_geodesic(x0, v, t):
    """Straight line x0 + t v, the geodesic of the flat sector (v1 <= 0)."""
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(v, dtype=float)
    return x0[None, :] + np.asarray(t, dtype=float)[:, None] * v[None, :]


__all__ = [
    "SectionState", "GraphTrajectory", "el_rhs", "el_terms", "integrate_graph",
    "integrate_graphs", "el_residual", "conjugacy_g", "conjugacy_g_inverse",
    "return_map", "conjugated_return_map", "return_map_jacobian", "ReturnMap",
    "hamiltonian_cross_check", "free_flat_geodesic",
]
