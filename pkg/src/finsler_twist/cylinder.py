"""Maps of the cylinder Z = S^1 x R: the shear, the perturbed twist map and
diagnostics (rotation number, flux, twist bound)."""

from dataclasses import dataclass, field

import numpy as np

from . import _integrators
from .errors import NumericalError
from .phase import CylinderPoint, GridSpec
from .suspension import SuspensionSpec, _tables, time1_flow, time1_map_checked

SHEAR_JACOBIAN = np.array([[1.0, 1.0], [0.0, 1.0]])


@dataclass(frozen=True)
class TwistMapSpec:
    """Perturbed twist map f = time-1 map of the suspension Hamiltonian.

    Parameters
    ----------
    epsilon : float
        Perturbation amplitude (>= 0); ``epsilon = 0`` is the shear.
    band_K : float
        Outside |y| > band_K the map is the shear.
    integrator_tol : float
        Step-doubling tolerance of every time-1 evaluation.
    ramp_width : float
        Width of the cutoff ramp inside the band.
    n_steps : int
        Initial number of integrator steps per period (>= 1000).
    """

    epsilon: float = 0.0
    band_K: float = 10.0
    integrator_tol: float = 1e-10
    ramp_width: float = 6.5
    n_steps: int = 1000
    suspension: SuspensionSpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.integrator_tol > 0:
            raise ValueError("integrator_tol must be positive")
        if self.n_steps < 1000:
            raise ValueError("n_steps must be >= 1000 (step <= 1e-3)")
        susp = SuspensionSpec(self.epsilon, band_K=self.band_K, ramp_width=self.ramp_width)
        object.__setattr__(self, "suspension", susp)

    @classmethod
    def from_suspension(cls, susp, integrator_tol=1e-10, n_steps=1000):
        return cls(susp.epsilon, susp.band_K, integrator_tol, susp.ramp_width, n_steps)


def shear_apply(p):
    """The integrable shear (x, y) -> (x + y mod 1, y)."""
    return CylinderPoint(np.asarray(p.x) + np.asarray(p.y), p.y)


def twist_apply(spec, p):
    """Apply the twist map to a CylinderPoint (scalar or batch)."""
    x1, y1, _, _ = time1_map_checked(
        spec.suspension, p.x, p.y, spec.n_steps, spec.integrator_tol
    )
    shape = np.shape(p.x)
    return CylinderPoint(x1.reshape(shape), y1.reshape(shape))


def twist_jacobian(spec, p, jac_tol=1e-7):
    """Derivative of the twist map; shape (2, 2), or (..., 2, 2) for batches.

    The tangent map of the discrete symplectic integrator is propagated
    exactly, so det J = 1 up to rounding.
    """
    _, _, J, _ = time1_map_checked(
        spec.suspension, p.x, p.y, spec.n_steps, spec.integrator_tol,
        jacobian=True, jac_tol=jac_tol,
    )
    shape = np.shape(p.x)
    return J.reshape(shape + (2, 2)) if shape else J[0]


class TwistMap:
    """Callable form of a twist map for the chaos diagnostics.

    ``precise=False`` uses a fixed ``n_steps`` without the step-doubling
    check, which is what long grid sweeps need.
    """

    def __init__(self, spec, precise=True, n_steps=None):
        self.spec = spec
        self.precise = precise
        self.n_steps = int(n_steps or spec.n_steps)

    def step(self, x, y):
        """One iterate of a batch: returns (x_lift, y, J) with J of shape (n, 2, 2)."""
        if self.precise:
            xo, yo, J, _ = time1_map_checked(
                self.spec.suspension, x, y, self.n_steps, self.spec.integrator_tol,
                jacobian=True,
            )
            return xo, yo, J
        return time1_flow(self.spec.suspension, x, y, self.n_steps, jacobian=True)

    def __call__(self, x, y):
        if self.precise:
            xo, yo, _, _ = time1_map_checked(
                self.spec.suspension, x, y, self.n_steps, self.spec.integrator_tol
            )
        else:
            xo, yo, _ = time1_flow(self.spec.suspension, x, y, self.n_steps)
        return np.mod(xo, 1.0), yo

    def jacobian(self, x, y):
        return self.step(x, y)[2]


def orbit(spec, p, n_iter, n_steps=None, max_steps=16000):
    """Orbit of a single point with a per-iterate step-doubling check.

    The step count is doubled (up to ``max_steps``) until every iterate
    passes the check.  Returns ``(x_lift, y)`` arrays of length
    ``n_iter + 1``; ``x_lift mod 1`` is the reduced orbit.
    """
    n = int(n_steps or spec.n_steps)
    x0, y0 = float(p.x), float(p.y)
    if spec.epsilon == 0.0:
        k = np.arange(n_iter + 1)
        return x0 + k * y0, np.full(n_iter + 1, y0)
    s = spec.suspension
    while True:
        k1, m1 = _tables(spec.epsilon, n)
        k2, m2 = _tables(spec.epsilon, 2 * n)
        xs, ys, worst, status = _integrators.orbit_checked(
            x0, y0, k1, m1, k2, m2, s.plateau, s.ramp_width, int(n_iter)
        )
        if not status and worst <= spec.integrator_tol:
            return xs, ys
        if 2 * n >= max_steps:
            raise NumericalError(
                "orbit missed integrator tolerance",
                residual=worst,
                context={"x0": x0, "y0": y0, "n_steps": n, "n_iter": n_iter},
            )
        n *= 2


def rotation_number(spec, p, n_iter):
    """(lift of x after n_iter iterates - x0) / n_iter."""
    if n_iter < 100:
        raise ValueError("rotation_number needs n_iter >= 100")
    xs, _ = orbit(spec, p, n_iter)
    return float((xs[-1] - xs[0]) / n_iter)


def _flux_sum(spec, y0, n):
    x = np.arange(n) / n
    y = np.full(n, float(y0))
    _, y1, J, _ = time1_map_checked(
        spec.suspension, x, y, spec.n_steps, spec.integrator_tol, jacobian=True
    )
    return float(np.mean((y1 - y0) * J[:, 0, 0]))


def circle_flux(spec, y0, n_samples=256, tol=1e-12, max_samples=16384):
    """Signed area between the circle {y = y0} and its image.

    Computed as the periodic trapezoid sum of (y' - y0) dx'/dx over x in
    [0, 1), which converges spectrally for smooth maps.  The number of
    samples is doubled from ``n_samples`` until two successive sums agree
    to ``tol``; strongly folded image curves need thousands of samples.
    """
    if n_samples < 64:
        raise ValueError("flux needs n_samples >= 64")
    if spec.epsilon == 0.0:
        return 0.0
    n = int(n_samples)
    prev = _flux_sum(spec, y0, n)
    while 2 * n <= max_samples:
        n *= 2
        cur = _flux_sum(spec, y0, n)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise NumericalError(
        "flux quadrature did not converge", residual=abs(cur - prev),
        context={"y0": y0, "n_samples": n},
    )


def flux(spec, n_samples=256, y0=None, n_circles=9):
    """Flux of the twist map.

    With ``y0`` given, the flux through that circle; otherwise the mean over
    ``n_circles`` circles evenly spread over [-band_K, band_K].
    """
    if y0 is not None:
        return circle_flux(spec, y0, n_samples)
    ys = np.linspace(-spec.band_K, spec.band_K, n_circles)
    return float(np.mean([circle_flux(spec, y, n_samples) for y in ys]))


def default_twist_grid(spec, n=64):
    K = spec.band_K
    return GridSpec(0.0, 1.0, -K - 1.0, K + 1.0, n, n)


def twist_lower_bound(spec, grid=None):
    """Minimum of dx'/dy over the nodes of ``grid``."""
    grid = grid or default_twist_grid(spec)
    X, Y = grid.nodes()
    J = twist_jacobian(spec, CylinderPoint(X.ravel(), Y.ravel()))
    return float(J[:, 0, 1].min())
