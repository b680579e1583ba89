"""Acceptance criteria of the package, each returning a CriterionResult."""

from dataclasses import dataclass, field
import functools
import time

import numpy as np

from .chaos import chaotic_fraction, kam_circles, metric_entropy_estimate, twist_ftle_field
from .cylinder import TwistMap, TwistMapSpec, twist_apply
from .experiments import cylinder_gap
from .finsler import (
    FinslerModel, cr_distance, fd_fundamental_tensor, finsler_eval, fundamental_tensor,
)
from .geodesics import (
    conjugacy_g_inverse, conjugated_return_map, hamiltonian_cross_check, return_map_jacobian,
)
from .phase import CylinderPoint, GridSpec
from .suspension import SuspensionSpec, hamiltonian_partial, legendre_transform

SEED = 20240611
K = 10.0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.name}: {self.summary} ({self.seconds:.1f} s)"


def _timed(number, name):
    def deco(fn):
        @functools.wraps(fn)
        def run():
            t0 = time.perf_counter()
            passed, summary, details = fn()
            dt = time.perf_counter() - t0
            limit = details.get("time_limit_s")
            if limit is not None and dt >= limit:
                passed = False
                summary += f"; runtime {dt:.1f} s exceeds {limit} s"
            return CriterionResult(number, name, bool(passed), summary, dt, details)

        run.number = number
        return run

    return deco


@functools.lru_cache(maxsize=None)
def model(epsilon):
    return FinslerModel.build(SuspensionSpec(epsilon))


def _band_grid(n, lo, hi):
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, lo + (hi - lo) * c)
    return CylinderPoint(X.ravel(), Y.ravel())


@_timed(1, "flat limit")
def criterion_1():
    rng = np.random.default_rng(SEED + 1)
    n = 100
    p = CylinderPoint(rng.random(n), rng.uniform(-K - 2, K + 2, n))
    q = conjugated_return_map(model(0.0), p)
    res = cylinder_gap(q, CylinderPoint(p.x + p.y, p.y))
    return res <= 1e-8, f"sup |gRg^-1 - f1| = {res:.2e} <= 1e-8", {
        "residual": res, "time_limit_s": 10}


@_timed(2, "conjugacy")
def criterion_2():
    p = _band_grid(32, -K, K)
    res = {}
    for eps in (0.1, 0.3, 0.5):
        q = conjugated_return_map(model(eps), p)
        f = twist_apply(TwistMapSpec(eps), p)
        res[eps] = cylinder_gap(q, f)
    worst = max(res.values())
    parts = ", ".join(f"eps={e}: {r:.2e}" for e, r in res.items())
    return worst <= 1e-6, f"{parts} (all <= 1e-6)", {"residuals": res, "time_limit_s": 300}


@_timed(3, "shear region")
def criterion_3():
    rng = np.random.default_rng(SEED + 3)
    n = 100
    y = rng.uniform(K, K + 2, n) * rng.choice([-1.0, 1.0], n)
    # keep |y| strictly inside (K, K + 2)
    y = np.where(np.abs(y) <= K, np.sign(y) * (K + 1e-9), y)
    p = CylinderPoint(rng.random(n), y)
    res = cylinder_gap(conjugated_return_map(model(0.5), p), CylinderPoint(p.x + p.y, p.y))
    return res <= 1e-8, f"sup |gRg^-1 - f1| = {res:.2e} <= 1e-8 at epsilon=0.5", {"residual": res}


def finsler_samples(n=10_000, n_near=1_000, seed=SEED + 4):
    """(t, x, v1, v2) with Euclidean unit v; n_near of them have v1 = +-1e-3."""
    rng = np.random.default_rng(seed)
    t = rng.random(n)
    x = rng.random(n)
    a = rng.uniform(-np.pi, np.pi, n)
    v1, v2 = np.cos(a), np.sin(a)
    v1[:n_near] = 1e-3 * rng.choice([-1.0, 1.0], n_near)
    v2[:n_near] = np.sqrt(1 - 1e-6) * rng.choice([-1.0, 1.0], n_near)
    return t, x, v1, v2


def sample_region(m, v1, v2):
    y = np.where(v1 > 0, v2 / np.where(v1 > 0, v1, 1.0), np.inf)
    return np.select(
        [v1 <= 0, np.abs(y) <= m.D + 1, np.abs(y) < m.D + 2], ["flat", "band", "blend"], "outer"
    )


@_timed(4, "Finsler certification")
def criterion_4():
    m = model(0.3)
    t, x, v1, v2 = finsler_samples()
    G = fundamental_tensor(m, t, x, v1, v2)
    eig = np.linalg.eigvalsh(G).min()
    err = np.abs(G - fd_fundamental_tensor(m, t, x, v1, v2, h=1e-4)).max(axis=(1, 2))
    reg = sample_region(m, v1, v2)
    by_region = {r: float(err[reg == r].max()) for r in ("flat", "band", "blend", "outer")
                 if np.any(reg == r)}
    ok = eig > 0 and err.max() <= 1e-5
    br = ", ".join(f"{k} {v:.1e}" for k, v in by_region.items())
    return ok, (f"min eigenvalue {eig:.3e} > 0; max |closed form - FD| = {err.max():.2e} "
                f"<= 1e-5 [{br}]"), {"min_eig": float(eig), "fd_error": float(err.max()),
                                     "fd_error_by_region": by_region}


@_timed(5, "homogeneity")
def criterion_5():
    m = model(0.3)
    rng = np.random.default_rng(SEED + 5)
    n = 1000
    t, x = rng.random(n), rng.random(n)
    a = rng.uniform(-np.pi, np.pi, n)
    r = rng.uniform(0.1, 3.0, n)
    v1, v2 = r * np.cos(a), r * np.sin(a)
    f = finsler_eval(m, t, x, v1, v2)
    worst = 0.0
    for lam in (0.5, 2.0, 10.0):
        fl = finsler_eval(m, t, x, lam * v1, lam * v2)
        worst = max(worst, float(np.max(np.abs(fl - lam * f) / (lam * f))))
    return worst <= 1e-12, f"max relative error {worst:.2e} <= 1e-12", {"rel_error": worst}


@_timed(6, "area preservation")
def criterion_6():
    m = model(0.3)
    p = _band_grid(16, -K, K)
    J = return_map_jacobian(m, conjugacy_g_inverse(m, p))
    res = float(np.abs(np.linalg.det(J) - 1.0).max())
    return res <= 1e-6, f"max |det - 1| = {res:.2e} <= 1e-6", {"residual": res}


CHAOS_GRID = GridSpec(0.0, 1.0, -0.5, 0.5, 256, 256)


@functools.lru_cache(maxsize=1)
def chaos_field():
    return twist_ftle_field(TwistMapSpec(1.2), CHAOS_GRID, 1000, threshold=0.05, n_steps=32)


@_timed(7, "chaos")
def criterion_7():
    fld = chaos_field()
    frac = chaotic_fraction(fld)
    ent = metric_entropy_estimate(fld)
    ok = frac >= 0.05 and ent > 0
    return ok, f"fraction FTLE > 0.05 = {frac:.4f} >= 0.05; entropy estimate {ent:.4f} > 0", {
        "fraction": frac, "entropy": ent, "time_limit_s": 600}


@_timed(8, "near-integrability")
def criterion_8():
    rep = kam_circles(TwistMap(TwistMapSpec(0.05)), (-1.0, 1.0), 50, 1000)
    return rep.fraction >= 0.9, (
        f"circle-like fraction {rep.fraction:.2f} >= 0.9 "
        f"(median oscillation {np.median(rep.oscillation):.3f})"), {"fraction": rep.fraction}


@_timed(9, "Legendre duality")
def criterion_9():
    spec = SuspensionSpec(0.3)
    rng = np.random.default_rng(SEED + 9)
    n = 1000
    t, x, v = rng.random(n), rng.random(n), rng.uniform(-K - 2, K + 2, n)
    p, lag = legendre_transform(spec, t, x, v)
    rt = float(np.abs(hamiltonian_partial(spec, t, x, p, np_=1) - v).max())
    dual = float(np.abs(lag + hamiltonian_partial(spec, t, x, p) - p * v).max())
    ok = rt <= 1e-10 and dual <= 1e-12
    return ok, f"round trip {rt:.2e} <= 1e-10; duality {dual:.2e} <= 1e-12", {
        "round_trip": rt, "duality": dual}


@_timed(10, "EL vs Hamiltonian")
def criterion_10():
    rng = np.random.default_rng(SEED + 10)
    n = 100
    gap = hamiltonian_cross_check(
        model(0.3), rng.random(n), rng.uniform(-K, K, n), np.linspace(0.0, 1.0, 41)
    )
    return gap <= 1e-8, f"max gap {gap:.2e} <= 1e-8", {"gap": gap}


@_timed(11, "C^r flat-closeness trend")
def criterion_11():
    d1 = cr_distance(model(0.1), 1)
    d05 = cr_distance(model(0.05), 1)
    ratio = d05 / d1
    return ratio <= 0.6, f"d1(0.05)/d1(0.1) = {d05:.4f}/{d1:.4f} = {ratio:.3f} <= 0.6", {
        "d_0.1": d1, "d_0.05": d05, "ratio": ratio}


CRITERIA = (
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
    criterion_7, criterion_8, criterion_9, criterion_10, criterion_11,
)


def run_all(select=None, echo=print):
    results = []
    for crit in CRITERIA:
        if select and crit.number not in select:
            continue
        res = crit()
        if echo:
            echo(res.line())
        results.append(res)
    return results
