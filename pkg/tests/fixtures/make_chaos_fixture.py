"""Regenerate chaos_field.json (epsilon=1.2, 256x256, n=1000).

Run from the repository root: python3 tests/fixtures/make_chaos_fixture.py
"""

import json
import os
import time

import numpy as np

from finsler_twist.acceptance import CHAOS_GRID, chaos_field
from finsler_twist.chaos import chaotic_fraction, metric_entropy_estimate

t0 = time.perf_counter()
fld = chaos_field()
dt = time.perf_counter() - t0
rng = np.random.default_rng(7)
cells = rng.choice(CHAOS_GRID.nx * CHAOS_GRID.ny, 20, replace=False)
rows, cols = np.divmod(cells, CHAOS_GRID.nx)
data = {
    "epsilon": 1.2,
    "n_iter": 1000,
    "n_steps": 32,
    "grid": [CHAOS_GRID.x_min, CHAOS_GRID.x_max, CHAOS_GRID.y_min, CHAOS_GRID.y_max,
             CHAOS_GRID.nx, CHAOS_GRID.ny],
    "chaotic_fraction": chaotic_fraction(fld),
    "metric_entropy_estimate": metric_entropy_estimate(fld),
    "ftle_mean": float(fld.values.mean()),
    "cells": [[int(r), int(c), float(fld.values[r, c])] for r, c in zip(rows, cols)],
    "seconds": round(dt, 1),
}
path = os.path.join(os.path.dirname(__file__), "chaos_field.json")
with open(path, "w") as fh:
    json.dump(data, fh, indent=2)
    fh.write("\n")
print(json.dumps(data, indent=2))
