"""Named experiment pipelines with deterministic reports."""

import json
import logging
import os

import numpy as np

from . import __version__
from .chaos import (
    chaotic_fraction, island_area, kam_circles, metric_entropy_estimate, twist_ftle_field,
)
from .config import ExperimentConfig
from .cylinder import TwistMap, TwistMapSpec, orbit, twist_apply
from .errors import ConfigError
from .finsler import CrRegion, FinslerModel, cr_distance
from .geodesics import (
    conjugacy_g_inverse, conjugated_return_map, integrate_graph, return_map_jacobian,
)
from .phase import CylinderPoint, GridSpec
from .suspension import SuspensionSpec

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "flat-check", "conjugacy", "ftle-field", "island-area", "kam-scan", "portrait", "cr-distance",
)


def build_suspension(cfg, epsilon=None):
    eps = cfg.epsilon if epsilon is None else epsilon
    return SuspensionSpec(eps, band_K=cfg.band_K, ramp_width=cfg.ramp_width, D=cfg.D)


def build_model(cfg, epsilon=None):
    return FinslerModel.build(build_suspension(cfg, epsilon), D=cfg.D, A=cfg.A, B=cfg.B)


def twist_spec(cfg, epsilon=None):
    eps = cfg.epsilon if epsilon is None else epsilon
    return TwistMapSpec(
        eps, band_K=cfg.band_K, ramp_width=cfg.ramp_width,
        integrator_tol=cfg.tolerances.integrator_tol,
    )


def wrap(dx):
    """Signed distance on the circle, in [-1/2, 1/2)."""
    return (np.asarray(dx) + 0.5) % 1.0 - 0.5


def cylinder_gap(p, q):
    return float(max(np.abs(wrap(p.x - q.x)).max(), np.abs(np.asarray(p.y) - q.y).max()))


def _grid(cfg):
    g = cfg.grid
    return GridSpec(g.x_min, g.x_max, g.y_min, g.y_max, g.nx, g.ny)


def _band_grid(K, n):
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, -K + 2 * K * c)
    return CylinderPoint(X.ravel(), Y.ravel())


def _write_trajectories(path, model, seeds, rtol):
    trajs = [integrate_graph(model, h, s, tol=max(rtol * 100, 1e-10)) for h, s in seeds]
    with open(path, "w") as fh:
        fh.write(f"# epsilon: {model.epsilon!r}\n# method: DOP853\n# order: 8\n")
        fh.write(f"# rtol: {trajs[0].meta['rtol']!r}\n# n_trajectories: {len(trajs)}\n")
        fh.write("trajectory,t,theta,thetadot\n")
        for k, tr in enumerate(trajs):
            for row in zip(tr.t, tr.theta, tr.thetadot):
                fh.write(f"{k}," + ",".join(repr(float(v)) for v in row) + "\n")


def _flat_check(cfg, out):
    model = build_model(cfg)
    rng = np.random.default_rng(cfg.seed)
    K = cfg.band_K
    n = cfg.n_samples
    p = CylinderPoint(rng.random(n), rng.uniform(-K - 2, K + 2, n))
    q = conjugated_return_map(model, p, cfg.tolerances.graph_rtol)
    shear = CylinderPoint(p.x + p.y, p.y)
    res = cylinder_gap(q, shear)
    tol = cfg.tolerances.flat
    _write_trajectories(os.path.join(out, "trajectories.csv"), model,
                        [(float(a), float(b)) for a, b in zip(p.x[:4], p.y[:4])],
                        cfg.tolerances.graph_rtol)
    return {"max_residual_vs_shear": res, "n_samples": n}, {"flat": tol}, res <= tol, [
        "trajectories.csv"]


def _conjugacy(cfg, out):
    model = build_model(cfg)
    spec = twist_spec(cfg)
    K = cfg.band_K
    tol = cfg.tolerances
    p = _band_grid(K, cfg.conj_n)
    res = cylinder_gap(conjugated_return_map(model, p, tol.graph_rtol), twist_apply(spec, p))
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_samples
    ys = rng.uniform(K, K + 2, n) * rng.choice([-1.0, 1.0], n)
    ps = CylinderPoint(rng.random(n), ys)
    shear_res = cylinder_gap(conjugated_return_map(model, ps, tol.graph_rtol),
                             CylinderPoint(ps.x + ps.y, ps.y))
    pa = _band_grid(K, 16)
    J = return_map_jacobian(model, conjugacy_g_inverse(model, pa), tol.graph_rtol)
    det_res = float(np.abs(np.linalg.det(J) - 1.0).max())
    _write_trajectories(os.path.join(out, "trajectories.csv"), model,
                        [(0.0, 0.5), (0.25, -1.0), (0.5, 2.0), (0.75, K + 1.0)], tol.graph_rtol)
    metrics = {
        "conjugacy_residual": res, "conjugacy_points": int(np.size(p.x)),
        "shear_region_residual": shear_res, "area_det_residual": det_res,
    }
    ok = res <= tol.conjugacy and shear_res <= tol.shear and det_res <= tol.area
    return metrics, {"conjugacy": tol.conjugacy, "shear": tol.shear, "area": tol.area}, ok, [
        "trajectories.csv"]


def _field(cfg):
    return twist_ftle_field(
        twist_spec(cfg), _grid(cfg), cfg.n_iter, cfg.threshold, cfg.field_steps, cfg.workers
    )


def _field_metrics(fld):
    return {
        "island_area": island_area(fld),
        "chaotic_fraction": chaotic_fraction(fld),
        "metric_entropy_estimate": metric_entropy_estimate(fld),
        "ftle_min": float(fld.values.min()),
        "ftle_max": float(fld.values.max()),
        "ftle_mean": float(fld.values.mean()),
        "field_steps": fld.meta.get("n_steps"),
    }


def _ftle_field(cfg, out):
    fld = _field(cfg)
    fld.to_csv(os.path.join(out, "field.csv"))
    fld.to_bin(os.path.join(out, "field.bin"))
    ok = bool(np.all(np.isfinite(fld.values)))
    return _field_metrics(fld), {"threshold": cfg.threshold}, ok, ["field.csv", "field.bin"]


def _island_area(cfg, out):
    fld = _field(cfg)
    fld.to_csv(os.path.join(out, "field.csv"))
    fld.to_bin(os.path.join(out, "field.bin"))
    m = _field_metrics(fld)
    ok = m["chaotic_fraction"] >= cfg.min_island_fraction and m["metric_entropy_estimate"] > 0
    return m, {"threshold": cfg.threshold, "min_island_fraction": cfg.min_island_fraction}, ok, [
        "field.csv", "field.bin"]


def _kam_scan(cfg, out):
    k = cfg.kam
    rep = kam_circles(TwistMap(twist_spec(cfg)), (k.y_min, k.y_max), k.n_samples, k.n_iter)
    with open(os.path.join(out, "kam.csv"), "w") as fh:
        fh.write("y0,oscillation,max_gap,circle_like\n")
        for a, b, c, d in zip(rep.y0.tolist(), rep.oscillation.tolist(), rep.max_gap.tolist(),
                              rep.circle_like.tolist()):
            fh.write(f"{a!r},{b!r},{c!r},{int(d)}\n")
    metrics = {"circle_like_fraction": rep.fraction, "max_oscillation": float(rep.oscillation.max())}
    return metrics, {"min_fraction": k.min_fraction, "osc_tol": rep.osc_tol,
                     "gap_tol": rep.gap_tol}, rep.fraction >= k.min_fraction, ["kam.csv"]


def _portrait(cfg, out):
    spec = twist_spec(cfg)
    g = cfg.grid
    P = cfg.portrait
    ys = g.y_min + (g.y_max - g.y_min) * (np.arange(P.n_seeds) + 0.5) / P.n_seeds
    with open(os.path.join(out, "portrait.csv"), "w") as fh:
        fh.write("seed,n,x,y\n")
        for k, y0 in enumerate(ys):
            xs, yv = orbit(spec, CylinderPoint(0.5 * (g.x_min + g.x_max), y0), P.n_iter)
            for i, (a, b) in enumerate(zip(np.mod(xs, 1.0).tolist(), np.asarray(yv).tolist())):
                fh.write(f"{k},{i},{a!r},{b!r}\n")
    return {"n_seeds": P.n_seeds, "n_iter": P.n_iter}, {}, True, ["portrait.csv"]


def _cr_distance(cfg, out):
    c = cfg.cr
    region = CrRegion(c.n_t, c.n_x, c.n_angle, c.min_v1)
    d_full = cr_distance(build_model(cfg), c.r, region)
    d_half = cr_distance(build_model(cfg, cfg.epsilon / 2), c.r, region)
    ratio = d_half / d_full if d_full > 0 else 0.0
    metrics = {"d_epsilon": d_full, "d_half_epsilon": d_half, "ratio": ratio, "r": c.r}
    ok = d_full == 0.0 or ratio <= c.max_ratio
    return metrics, {"max_ratio": c.max_ratio}, ok, []


_PIPELINES = {
    "flat-check": _flat_check,
    "conjugacy": _conjugacy,
    "ftle-field": _ftle_field,
    "island-area": _island_area,
    "kam-scan": _kam_scan,
    "portrait": _portrait,
    "cr-distance": _cr_distance,
}


def run_experiment(name, cfg, out=None):
    """Run one pipeline, write report.json and data files; return the report."""
    if name not in _PIPELINES:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    if not isinstance(cfg, ExperimentConfig):
        raise ConfigError("cfg must be an ExperimentConfig")
    cfg.validate()
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    log.info("running %s (epsilon=%s) into %s", name, cfg.epsilon, out)
    metrics, tolerances, passed, files = _PIPELINES[name](cfg, out)
    report = {
        "experiment": name,
        "version": __version__,
        # the output location is not part of the experiment
        "config": {k: v for k, v in cfg.to_dict().items() if k != "out"},
        "metrics": metrics,
        "tolerances": tolerances,
        "passed": bool(passed),
        "files": sorted(files + ["report.json"]),
    }
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
