"""Finsler metric on T^2 built from the suspension Lagrangian.

The Lagrangian L(t, x, y) equals the Legendre dual L_hat of the suspension
Hamiltonian for |y| <= D and a convex profile h_+ (y > D) or h_- (y < -D)
outside.  Each profile is y^2/2 - D_pm up to |y| = D + 1, sqrt(A + B y^2)
beyond |y| = D + 2 and a convex blend in between.  The metric is

    F(t, x, v) = v1 L(t, x, v2 / v1)      for v1 > 0,
    F(t, x, v) = sqrt(A v1^2 + B v2^2)    for v1 <= 0.
"""

from dataclasses import dataclass, field
import itertools
import json
import math

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.optimize import brentq

from .errors import DomainError, InadmissibleProfileError
from .smooth import bump, smooth_step
from .suspension import SuspensionSpec, hamiltonian_partial, legendre_transform

PROFILE_GRID = 10_001
_CHEB_DEGREES = (128, 192, 256, 384, 512)


def _outer(A, B, y, order):
    g = np.sqrt(A + B * y * y)
    if order == 0:
        return g
    if order == 1:
        return B * y / g
    if order == 2:
        return A * B / g**3
    return -3.0 * A * B * B * y / g**5


def _blend_base(s, y1, A, B):
    """(1 - S) + S g'' on the unit blend interval."""
    S0 = smooth_step(s, 0)
    return (1.0 - S0) + S0 * _outer(A, B, y1 + s, 2)


def _psi(s):
    # unit-mass bump on (0, 1)
    return bump(np.clip(s, 0.0, 1.0))


def _interpolate(fn):
    for deg in _CHEB_DEGREES:
        c = Chebyshev.interpolate(fn, deg, domain=[0.0, 1.0])
        if np.abs(c.coef[-8:]).max() < 1e-15 * max(1.0, np.abs(c.coef).max()):
            return c
    return c


@dataclass(frozen=True)
class ConvexProfile:
    """Convex profile h_+ (``side='plus'``) or its mirror h_- (``side='minus'``).

    For side plus and s = y - (D + 1) in [0, 1]:

        h''(y) = (1 - S(s)) + S(s) g''(y) + alpha psi(s),   g = sqrt(A + B y^2)

    with S the smooth step and psi the unit-mass bump.  ``alpha`` matches the
    slope g'(D + 2) and ``D_pm`` the value g(D + 2).  h and h' on the blend are
    Chebyshev antiderivatives of h''.
    """

    D: float
    A: float
    B: float
    side: str
    D_pm: float
    alpha: float
    _h1: Chebyshev = field(repr=False, compare=False)
    _h0: Chebyshev = field(repr=False, compare=False)

    @property
    def y1(self):
        return self.D + 1.0

    @property
    def y2(self):
        return self.D + 2.0

    @property
    def sign(self):
        return 1.0 if self.side == "plus" else -1.0

    def derivative(self, y, order=0):
        """d^order h / dy^order at y (order 0..2); vectorised."""
        y = np.asarray(y, dtype=float)
        u = self.sign * y  # mirrored coordinate, profile increases in u
        out = np.empty(np.shape(u))
        inner = u <= self.y1
        outer = u >= self.y2
        mid = ~(inner | outer)
        if order == 0:
            out[inner] = 0.5 * u[inner] ** 2 - self.D_pm
        elif order == 1:
            out[inner] = u[inner]
        else:
            out[inner] = 1.0
        out[outer] = _outer(self.A, self.B, u[outer], order)
        s = u[mid] - self.y1
        if order == 0:
            out[mid] = 0.5 * self.y1**2 - self.D_pm + self.y1 * s + self._h0(s)
        elif order == 1:
            out[mid] = self.y1 + self._h1(s)
        else:
            out[mid] = _blend_base(s, self.y1, self.A, self.B) + self.alpha * _psi(s)
        if order == 1:
            out = self.sign * out
        return out if out.ndim else float(out)

    def __call__(self, y):
        return self.derivative(y, 0)

    def min_curvature(self, n=PROFILE_GRID):
        """Minimum of h'' on an n-point grid of the blend interval."""
        s = np.linspace(0.0, 1.0, n)
        return float((_blend_base(s, self.y1, self.A, self.B) + self.alpha * _psi(s)).min())

    def to_dict(self):
        return {
            "side": self.side, "D": self.D, "A": self.A, "B": self.B,
            "D_pm": self.D_pm, "alpha": self.alpha,
        }


def _assemble(D, A, B):
    y1, y2 = D + 1.0, D + 2.0
    base = _interpolate(lambda s: _blend_base(s, y1, A, B))
    psi = _interpolate(_psi)
    alpha = float(_outer(A, B, y2, 1) - y1 - base.integ(lbnd=0)(1.0))
    h2 = base + alpha * psi
    h1 = h2.integ(lbnd=0)
    h0 = h1.integ(lbnd=0)
    # D_pm such that h(D + 2) = g(D + 2)
    D_pm = float(0.5 * y1**2 + y1 + h0(1.0) - _outer(A, B, y2, 0))
    return alpha, D_pm, h1, h0


def build_profile(D, A, B, side="plus", D_pm=None):
    """Construct a convex profile or raise InadmissibleProfileError.

    With ``D_pm=None`` the constants (D, A, B) are fixed and D_pm follows
    from value matching.  With ``D_pm`` given and ``A=None``, A is found by
    value matching instead.
    """
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    if not D > 0:
        raise InadmissibleProfileError(f"D > 0 violated (D={D})")
    if B is None or not B > 0:
        raise InadmissibleProfileError(f"B > 0 violated (B={B})")
    y1, y2 = D + 1.0, D + 2.0
    if A is None:
        if D_pm is None:
            raise ValueError("give A or D_pm")
        A = _solve_A(D, B, D_pm)
    if not A > 0:
        raise InadmissibleProfileError(f"A > 0 violated (A={A})")
    slope = _outer(A, B, y2, 1)
    if not slope > y1:
        raise InadmissibleProfileError(
            f"slope ordering g'(D+2) > D+1 violated: "
            f"B (D+2)/sqrt(A + B (D+2)^2) = {slope:.6g} <= {y1:.6g}"
        )
    alpha, dpm, h1, h0 = _assemble(D, A, B)
    if D_pm is not None and abs(dpm - D_pm) > 1e-9 * max(1.0, abs(D_pm)):
        raise InadmissibleProfileError(
            f"value matching h(D+2) = sqrt(A + B (D+2)^2) needs D_pm = {dpm:.12g}, "
            f"got {D_pm}"
        )
    prof = ConvexProfile(float(D), float(A), float(B), side, dpm, alpha, h1, h0)
    m = prof.min_curvature()
    if not m > 0:
        raise InadmissibleProfileError(
            f"h'' > 0 on [D+1, D+2] violated: min h'' = {m:.6g} (alpha = {alpha:.6g})"
        )
    return prof


def _solve_A(D, B, D_pm):
    y2 = D + 2.0

    def mismatch(A):
        return _assemble(D, A, B)[1] - D_pm

    lo = 1e-9 * B
    # slope ordering caps A from above
    hi = B * y2 * y2 * ((B / (D + 1.0) ** 2) - 1.0) if B > (D + 1.0) ** 2 else 0.0
    if not hi > lo:
        raise InadmissibleProfileError(
            f"slope ordering g'(D+2) > D+1 leaves no A > 0 (B={B}, D={D})"
        )
    hi *= 1.0 - 1e-9
    f_lo, f_hi = mismatch(lo), mismatch(hi)
    if f_lo * f_hi > 0:
        raise InadmissibleProfileError(
            "value matching h(D+2) = sqrt(A + B (D+2)^2) has no root A > 0: "
            f"required D_pm ranges over [{min(f_lo, f_hi) + D_pm:.6g}, "
            f"{max(f_lo, f_hi) + D_pm:.6g}] but D_pm = {D_pm}"
        )
    return brentq(mismatch, lo, hi, xtol=1e-14, rtol=1e-15)


def default_constants(D):
    """Default (A, B) = ((D+2)^2, (D+2)^2): F0 = (D+2) |v|."""
    B = (D + 2.0) ** 2
    return B, B


@dataclass(frozen=True)
class FinslerModel:
    """Finsler metric data: suspension, profiles and the constants A, B, D.

    The suspension carries the energy offset E = D_plus = D_minus, so that
    L_hat = y^2/2 - D_pm holds exactly for band_K <= |y|.
    """

    suspension: SuspensionSpec
    plus: ConvexProfile
    minus: ConvexProfile
    A: float
    B: float
    D: float

    @classmethod
    def build(cls, suspension, D=None, A=None, B=None):
        D = float(suspension.D if D is None else D)
        if D < suspension.band_K:
            raise InadmissibleProfileError(f"D >= band_K violated (D={D})")
        A0, B0 = default_constants(D)
        B = B0 if B is None else float(B)
        A = A0 if A is None else float(A)
        plus = build_profile(D, A, B, "plus")
        minus = build_profile(D, A, B, "minus")
        susp = suspension.replace(energy_offset=plus.D_pm, D=D)
        model = cls(susp, plus, minus, A, B, D)
        lmin = model.lagrangian_floor()
        if not lmin > 0:
            raise InadmissibleProfileError(f"L > 0 violated: inf L <= {lmin:.6g}")
        return model

    @property
    def epsilon(self):
        return self.suspension.epsilon

    @property
    def D_plus(self):
        return self.plus.D_pm

    @property
    def D_minus(self):
        return self.minus.D_pm

    def lagrangian_floor(self):
        """Lower bound of L: L_hat >= -H(t, x, 0) >= -E - eps max b."""
        from .smooth import BUMP_MAX

        return -self.D_plus - self.epsilon * BUMP_MAX

    def flat(self):
        """The epsilon = 0 twin (same constants and profiles)."""
        return FinslerModel(
            self.suspension.replace(epsilon=0.0), self.plus, self.minus, self.A, self.B, self.D
        )

    def to_dict(self):
        return {
            "suspension": self.suspension.to_dict(),
            "A": self.A, "B": self.B, "D": self.D,
            "D_plus": self.D_plus, "D_minus": self.D_minus,
            "profiles": {"plus": self.plus.to_dict(), "minus": self.minus.to_dict()},
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d):
        s = dict(d["suspension"])
        s.pop("energy_offset", None)
        model = cls.build(SuspensionSpec(**s), D=d["D"], A=d["A"], B=d["B"])
        if abs(model.D_plus - d["D_plus"]) > 1e-9 * max(1.0, abs(d["D_plus"])):
            raise InadmissibleProfileError("stored D_plus does not match rebuilt profile")
        return model

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def lagrangian_derivs(model, t, x, y):
    """L and its partials at (t, x, y); vectorised.

    Returns a dict with ``L, L_v, L_vv`` everywhere and ``L_x, L_t, L_xv,
    L_tv`` (zero on the profile pieces).
    """
    shape, (t, x, y) = _flat_args(t, x, y)
    out = {k: np.zeros(y.shape) for k in ("L", "L_v", "L_vv", "L_x", "L_t", "L_xv", "L_tv")}
    band = np.abs(y) <= model.D
    for prof, m in ((model.plus, y > model.D), (model.minus, y < -model.D)):
        if m.any():
            out["L"][m] = prof.derivative(y[m], 0)
            out["L_v"][m] = prof.derivative(y[m], 1)
            out["L_vv"][m] = prof.derivative(y[m], 2)
    if band.any():
        spec = model.suspension
        tb, xb, vb = t[band], x[band], y[band]
        p, lag = legendre_transform(spec, tb, xb, vb)
        hpp = hamiltonian_partial(spec, tb, xb, p, np_=2)
        out["L"][band] = lag
        out["L_v"][band] = p
        out["L_vv"][band] = 1.0 / hpp
        out["L_x"][band] = -hamiltonian_partial(spec, tb, xb, p, nx=1)
        out["L_t"][band] = -hamiltonian_partial(spec, tb, xb, p, nt=1)
        out["L_xv"][band] = -hamiltonian_partial(spec, tb, xb, p, nx=1, np_=1) / hpp
        out["L_tv"][band] = -hamiltonian_partial(spec, tb, xb, p, nt=1, np_=1) / hpp
    if shape:
        return {k: v.reshape(shape) for k, v in out.items()}
    return {k: float(v[0]) for k, v in out.items()}


def lagrangian_full_eval(model, t, x, y):
    """The three-piece Lagrangian L(t, x, y)."""
    return lagrangian_derivs(model, t, x, y)["L"]


def _flat_args(*args):
    """Broadcast, then flatten to 1-d; returns (shape, arrays)."""
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in args))
    return arrs[0].shape, [a.ravel() for a in arrs]


def _check_nonzero(v1, v2):
    if np.any((np.asarray(v1) == 0) & (np.asarray(v2) == 0)):
        raise DomainError("Finsler metric is undefined at the zero vector")


def finsler_eval(model, t, x, v1, v2):
    """F(t, x, v1, v2); v1 = 0 belongs to the flat sector."""
    _check_nonzero(v1, v2)
    shape, (t, x, v1, v2) = _flat_args(t, x, v1, v2)
    out = np.sqrt(model.A * v1 * v1 + model.B * v2 * v2)
    pos = v1 > 0
    if pos.any():
        a = v1[pos]
        out[pos] = a * lagrangian_full_eval(model, t[pos], x[pos], v2[pos] / a)
    return out.reshape(shape) if shape else float(out[0])


def flat_reference_eval(model, t, x, v1, v2):
    """F_bar: the metric of the epsilon = 0 twin model."""
    return finsler_eval(model.flat(), t, x, v1, v2)


def fundamental_tensor(model, t, x, v1, v2):
    """Hessian of F^2/2 in (v1, v2); shape (2, 2) or (..., 2, 2).

    For v1 > 0 with f = v1 l(y), y = v2/v1:

        g = Df (x) Df + f Hess f,  Df = (l - y l', l'),
        Hess f = l''/v1 [[y^2, -y], [-y, 1]];

    for v1 <= 0 it is diag(A, B).
    """
    _check_nonzero(v1, v2)
    shape, (t, x, v1, v2) = _flat_args(t, x, v1, v2)
    G = np.zeros(v1.shape + (2, 2))
    G[..., 0, 0] = model.A
    G[..., 1, 1] = model.B
    pos = v1 > 0
    if pos.any():
        a = v1[pos]
        y = v2[pos] / a
        d = lagrangian_derivs(model, t[pos], x[pos], y)
        l, l1, l2 = d["L"], d["L_v"], d["L_vv"]
        f = a * l
        d1 = l - y * l1
        d2 = l1
        c = f * l2 / a
        G[pos, 0, 0] = d1 * d1 + c * y * y
        G[pos, 0, 1] = d1 * d2 - c * y
        G[pos, 1, 0] = G[pos, 0, 1]
        G[pos, 1, 1] = d2 * d2 + c
    return G.reshape(shape + (2, 2))


def finsler_gradient(model, t, x, v1, v2):
    """Df in (v1, v2): (l - y l', l') for v1 > 0, (A v1, B v2)/F0 otherwise."""
    _check_nonzero(v1, v2)
    shape, (t, x, v1, v2) = _flat_args(t, x, v1, v2)
    f0 = np.sqrt(model.A * v1 * v1 + model.B * v2 * v2)
    g = np.stack([model.A * v1 / f0, model.B * v2 / f0], axis=-1)
    pos = v1 > 0
    if pos.any():
        y = v2[pos] / v1[pos]
        d = lagrangian_derivs(model, t[pos], x[pos], y)
        g[pos, 0] = d["L"] - y * d["L_v"]
        g[pos, 1] = d["L_v"]
    return g.reshape(shape + (2,))


def fd_fundamental_tensor(model, t, x, v1, v2, h=1e-4):
    """Second-order central differences of F^2/2 in (v1, v2) at step h."""

    def E(a, b):
        return 0.5 * finsler_eval(model, t, x, a, b) ** 2

    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    e0 = E(v1, v2)
    h11 = (E(v1 + h, v2) - 2 * e0 + E(v1 - h, v2)) / h**2
    h22 = (E(v1, v2 + h) - 2 * e0 + E(v1, v2 - h)) / h**2
    h12 = (E(v1 + h, v2 + h) - E(v1 + h, v2 - h) - E(v1 - h, v2 + h) + E(v1 - h, v2 - h)) / (
        4 * h * h
    )
    return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)


@dataclass(frozen=True)
class CrRegion:
    """Sample set for C^r distances: a (t, x) grid times unit vectors.

    Unit vectors (cos a, sin a) are kept when |cos a| >= ``min_v1``, so the
    set lies in {v1 >= min_v1} or in the flat sector {v1 <= -min_v1}.
    """

    n_t: int = 6
    n_x: int = 6
    n_angle: int = 24
    min_v1: float = 0.2

    def points(self):
        t = (np.arange(self.n_t) + 0.5) / self.n_t
        x = (np.arange(self.n_x) + 0.5) / self.n_x
        a = 2 * math.pi * (np.arange(self.n_angle) + 0.5) / self.n_angle
        a = a[np.abs(np.cos(a)) >= self.min_v1]
        T, X, Aa = np.meshgrid(t, x, a, indexing="ij")
        return np.stack([T.ravel(), X.ravel(), np.cos(Aa.ravel()), np.sin(Aa.ravel())], -1)


def cr_distance(model, r=1, region=None, h=1e-3):
    """max over the region and |alpha| <= r of |d^alpha (F - F_bar)|.

    Derivatives in (t, x, v1, v2) are nested central differences with step
    ``h`` per order.
    """
    if not 0 <= r <= 4:
        raise ValueError("derivative order r must be in 0..4")
    pts = (region or CrRegion()).points()
    flat = model.flat()

    def diff(z):
        args = (z[:, 0], z[:, 1], z[:, 2], z[:, 3])
        return finsler_eval(model, *args) - finsler_eval(flat, *args)

    best = float(np.abs(diff(pts)).max())
    for order in range(1, r + 1):
        for idx in itertools.combinations_with_replacement(range(4), order):
            acc = np.zeros(len(pts))
            for signs in itertools.product((-1.0, 1.0), repeat=order):
                z = pts.copy()
                for s, i in zip(signs, idx):
                    z[:, i] += s * h
                acc += np.prod(signs) * diff(z)
            best = max(best, float(np.abs(acc / (2 * h) ** order).max()))
    return best
