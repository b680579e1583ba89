"""Finite-time Lyapunov exponents, island area, entropy estimate and KAM scan.

A *map* here is any object acting on batches with ``step(x, y) -> (x_lift,
y, J)`` and ``__call__(x, y) -> (x mod 1, y)`` (``TwistMap``, ``ReturnMap``,
``ShearMap``, ``StandardMap``); a plain ``(map, jacobian)`` function pair
is accepted too.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import struct

import numpy as np

from . import _integrators
from .errors import NumericalError
from .phase import CylinderPoint, GridSpec

FIELD_MAGIC = b"FTLEFLD1"
GOLDEN_OFFSET = (np.sqrt(5.0) - 1.0) / 2.0
_HEADER = struct.Struct("<4d3qd")


class ShearMap:
    """The integrable shear (x, y) -> (x + y, y)."""

    def step(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        J = np.broadcast_to(np.array([[1.0, 1.0], [0.0, 1.0]]), x.shape + (2, 2))
        return x + y, y.copy(), J

    def __call__(self, x, y):
        x1, y1, _ = self.step(x, y)
        return np.mod(x1, 1.0), y1


class StandardMap:
    """Chirikov standard map y' = y + k/(2 pi) sin(2 pi x), x' = x + y'."""

    def __init__(self, k):
        self.k = float(k)

    def step(self, x, y):
        x = np.asarray(x, dtype=float)
        y1 = np.asarray(y, dtype=float) + self.k / (2 * np.pi) * np.sin(2 * np.pi * x)
        c = self.k * np.cos(2 * np.pi * x)
        J = np.empty(x.shape + (2, 2))
        J[..., 0, 0] = 1.0 + c
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = c
        J[..., 1, 1] = 1.0
        return x + y1, y1, J

    def __call__(self, x, y):
        x1, y1, _ = self.step(x, y)
        return np.mod(x1, 1.0), y1


class _PairMap:
    def __init__(self, fmap, jacobian):
        self.fmap = fmap
        self.jac = jacobian

    def step(self, x, y):
        J = np.asarray(self.jac(x, y))
        x1, y1 = self.fmap(x, y)
        return x1, y1, J

    def __call__(self, x, y):
        x1, y1 = self.fmap(x, y)
        return np.mod(x1, 1.0), y1


def _as_map(fmap, jacobian=None):
    if jacobian is not None:
        return _PairMap(fmap, jacobian)
    return fmap


def _spectral_norm(P):
    return np.linalg.norm(P, ord=2, axis=(-2, -1))


def ftle(fmap, jacobian, p, n_iter):
    """(1/n) log ||Df^n(p)|| with the product renormalised every iterate.

    ``p`` may hold a batch; the result then has the same shape.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    m = _as_map(fmap, jacobian)
    x = np.atleast_1d(np.asarray(p.x, dtype=float)).ravel().copy()
    y = np.atleast_1d(np.asarray(p.y, dtype=float)).ravel().copy()
    P = np.broadcast_to(np.eye(2), (x.size, 2, 2)).copy()
    logsum = np.zeros(x.size)
    for _ in range(n_iter):
        x1, y1, J = m.step(x, y)
        P = np.einsum("nij,njk->nik", np.asarray(J), P)
        sc = np.abs(P).max(axis=(1, 2))
        logsum += np.log(sc)
        P /= sc[:, None, None]
        x, y = np.mod(x1, 1.0), np.asarray(y1, dtype=float)
    out = (logsum + np.log(_spectral_norm(P))) / n_iter
    return out.reshape(np.shape(p.x)) if np.ndim(p.x) else float(out[0])


def divergence_exponent(fmap, p, n_iter, d0=1e-8, direction=(1.0, 1.0)):
    """Two-orbit (Benettin) estimate of the maximal Lyapunov exponent.

    A companion orbit is started at distance ``d0`` and pulled back to that
    distance after every iterate; x differences are wrapped to (-1/2, 1/2].
    Only ``fmap`` itself is used, no Jacobians.
    """
    m = _as_map(fmap)
    x = np.atleast_1d(np.asarray(p.x, dtype=float)).ravel().copy()
    y = np.atleast_1d(np.asarray(p.y, dtype=float)).ravel().copy()
    u = np.asarray(direction, dtype=float)
    u = u / np.hypot(*u)
    xb = x + d0 * u[0]
    yb = y + d0 * u[1]
    logsum = np.zeros(x.size)
    for _ in range(n_iter):
        both_x = np.concatenate([x, xb])
        both_y = np.concatenate([y, yb])
        x2, y2 = m(both_x, both_y)
        n = x.size
        x, y, xb, yb = x2[:n], y2[:n], x2[n:], y2[n:]
        dx = (xb - x + 0.5) % 1.0 - 0.5
        dy = yb - y
        d = np.hypot(dx, dy)
        logsum += np.log(d / d0)
        xb = x + dx * (d0 / d)
        yb = y + dy * (d0 / d)
    out = logsum / n_iter
    return out.reshape(np.shape(p.x)) if np.ndim(p.x) else float(out[0])


@dataclass
class FTLEField:
    """Per-cell finite-time exponents on a GridSpec (values indexed [iy, ix])."""

    grid: GridSpec
    n_iter: int
    values: np.ndarray
    threshold: float = 0.05
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.ny, self.grid.nx):
            raise ValueError("values must have shape (ny, nx)")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("FTLE field holds non-finite values")

    def to_csv(self, path):
        X, Y = self.grid.centers()
        with open(path, "w") as fh:
            fh.write("x,y,ftle\n")
            for a, b, c in zip(X.ravel().tolist(), Y.ravel().tolist(), self.values.ravel().tolist()):
                fh.write(f"{a!r},{b!r},{c!r}\n")

    def to_bytes(self):
        g = self.grid
        head = _HEADER.pack(
            g.x_min, g.x_max, g.y_min, g.y_max, g.nx, g.ny, self.n_iter, self.threshold
        )
        return FIELD_MAGIC + head + self.values.astype("<f8").tobytes(order="C")

    def to_bin(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        if data[:8] != FIELD_MAGIC:
            raise ValueError("not an FTLE field file")
        x0, x1, y0, y1, nx, ny, n_iter, thr = _HEADER.unpack_from(data, 8)
        vals = np.frombuffer(data, dtype="<f8", offset=8 + _HEADER.size)
        grid = GridSpec(x0, x1, y0, y1, int(nx), int(ny))
        return cls(grid, int(n_iter), vals.reshape(ny, nx).copy(), thr)

    @classmethod
    def from_bin(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def ftle_field(fmap, jacobian, grid, n_iter, threshold=0.05, chunk=4096):
    """FTLE at every cell centre of ``grid`` for a generic map."""
    X, Y = grid.centers()
    xs, ys = X.ravel(), Y.ravel()
    out = np.empty(xs.size)
    for a in range(0, xs.size, chunk):
        p = CylinderPoint(xs[a:a + chunk], ys[a:a + chunk])
        out[a:a + chunk] = ftle(fmap, jacobian, p, n_iter)
    return FTLEField(grid, n_iter, out.reshape(grid.ny, grid.nx), threshold)


def twist_ftle_field(spec, grid, n_iter, threshold=0.05, n_steps=32, workers=1, rows_per_task=8):
    """FTLE field of a twist map with the compiled fixed-step integrator.

    Rows are split into tasks that may run on ``workers`` threads; each task
    writes its own slice, so the field does not depend on completion order.
    """
    from .suspension import _tables

    susp = spec.suspension
    X, Y = grid.centers()
    vals = np.empty((grid.ny, grid.nx))
    if susp.epsilon == 0.0:
        vals[:] = np.log(_spectral_norm(np.array([[1.0, float(n_iter)], [0.0, 1.0]]))) / n_iter
        return FTLEField(grid, n_iter, vals, threshold, {"n_steps": n_steps})
    kick, mid = _tables(susp.epsilon, n_steps)

    def task(r0):
        r1 = min(r0 + rows_per_task, grid.ny)
        xs = np.ascontiguousarray(X[r0:r1].ravel())
        ys = np.ascontiguousarray(Y[r0:r1].ravel())
        out, status = _integrators.ftle_batch(
            xs, ys, kick, mid, susp.plateau, susp.ramp_width, int(n_iter)
        )
        if status.any():
            raise NumericalError("implicit stage failed during FTLE sweep", context={"row": r0})
        vals[r0:r1] = out.reshape(r1 - r0, grid.nx)

    starts = range(0, grid.ny, rows_per_task)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(task, starts))
    else:
        for r0 in starts:
            task(r0)
    return FTLEField(grid, n_iter, vals, threshold, {"n_steps": n_steps})


def island_area(fld, threshold=None):
    """Area of {FTLE > threshold}: cell area times the number of cells."""
    thr = fld.threshold if threshold is None else threshold
    return float(np.count_nonzero(fld.values > thr) * fld.grid.cell_area)


def chaotic_fraction(fld, threshold=None):
    return island_area(fld, threshold) / fld.grid.area


def metric_entropy_estimate(fld):
    """Riemann sum of max(FTLE, 0) times the cell area."""
    return float(np.clip(fld.values, 0.0, None).sum() * fld.grid.cell_area)


@dataclass
class KamReport:
    y0: np.ndarray
    oscillation: np.ndarray
    max_gap: np.ndarray
    circle_like: np.ndarray
    n_iter: int
    osc_tol: float = 0.05
    gap_tol: float = 0.05

    @property
    def fraction(self):
        return float(np.mean(self.circle_like))

    def to_dict(self):
        return {
            "n_iter": self.n_iter,
            "fraction": self.fraction,
            "osc_tol": self.osc_tol,
            "gap_tol": self.gap_tol,
            "samples": [
                {"y0": float(a), "oscillation": float(b), "max_gap": float(c), "circle_like": bool(d)}
                for a, b, c, d in zip(self.y0, self.oscillation, self.max_gap, self.circle_like)
            ],
        }


def _max_circular_gap(xs):
    s = np.sort(np.mod(xs, 1.0), axis=-1)
    gaps = np.diff(s, axis=-1)
    wrap = s[..., :1] + 1.0 - s[..., -1:]
    return np.maximum(gaps.max(axis=-1), wrap[..., 0])


def kam_circles(fmap, y_band=(-1.0, 1.0), n_samples=50, n_iter=1000, osc_tol=0.05, gap_tol=0.05):
    """Classify orbits of (0, y0) as circle-like.

    An orbit is circle-like when max |y_n - y0| < ``osc_tol`` and its x values
    leave no gap of ``gap_tol`` or more on the circle.  The y0 sit at
    golden-ratio offsets inside ``n_samples`` equal bins, which keeps them away
    from rationals of small denominator (whose orbits are periodic even on an
    invariant circle).
    """
    if n_iter < 1000:
        raise ValueError("kam_circles needs n_iter >= 1000")
    m = _as_map(fmap)
    a, b = y_band
    y0 = a + (b - a) * (np.arange(n_samples) + GOLDEN_OFFSET) / n_samples
    x = np.zeros(n_samples)
    y = y0.copy()
    xs = np.empty((n_samples, n_iter + 1))
    osc = np.zeros(n_samples)
    xs[:, 0] = x
    for k in range(n_iter):
        x, y = m(x, y)
        xs[:, k + 1] = x
        osc = np.maximum(osc, np.abs(y - y0))
    gap = _max_circular_gap(xs)
    return KamReport(y0, osc, gap, (osc < osc_tol) & (gap < gap_tol), n_iter, osc_tol, gap_tol)
