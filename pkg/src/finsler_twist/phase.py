"""Points of the cylinder Z = S^1 x R and rectangular sampling grids."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CylinderPoint:
    """A point (x mod 1, y) of the cylinder.

    ``x`` and ``y`` may be floats or equally shaped arrays (a batch of points);
    ``x`` is reduced into [0, 1) on construction.
    """

    x: object
    y: object

    def __post_init__(self):
        x = np.mod(np.asarray(self.x, dtype=float), 1.0)
        y = np.asarray(self.y, dtype=float)
        # np.mod can return exactly 1.0 for tiny negative inputs
        x = np.where(x >= 1.0, 0.0, x)
        if x.ndim == 0:
            x, y = float(x), float(y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def as_array(self):
        return np.stack([np.asarray(self.x), np.asarray(self.y)], axis=-1)


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred nx-by-ny grid on [x_min, x_max] x [y_min, y_max].

    Arrays produced from a grid are indexed ``[iy, ix]`` (row-major, rows are y).
    """

    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = -0.5
    y_max: float = 0.5
    nx: int = 256
    ny: int = 256

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid resolutions must be >= 2")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid ranges must be non-empty")

    @property
    def cell_area(self):
        return (self.x_max - self.x_min) * (self.y_max - self.y_min) / (self.nx * self.ny)

    @property
    def area(self):
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def centers(self):
        """Return (X, Y) arrays of shape (ny, nx) holding cell centres."""
        dx = (self.x_max - self.x_min) / self.nx
        dy = (self.y_max - self.y_min) / self.ny
        xs = self.x_min + dx * (np.arange(self.nx) + 0.5)
        ys = self.y_min + dy * (np.arange(self.ny) + 0.5)
        return np.meshgrid(xs, ys)

    def nodes(self):
        """Return (X, Y) arrays of shape (ny, nx) on the closed node lattice."""
        xs = np.linspace(self.x_min, self.x_max, self.nx)
        ys = np.linspace(self.y_min, self.y_max, self.ny)
        return np.meshgrid(xs, ys)
