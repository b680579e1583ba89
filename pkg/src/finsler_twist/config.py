"""Experiment configuration: a JSON document with dotted-path overrides."""

from dataclasses import asdict, dataclass, field, fields, is_dataclass
import json

from .errors import ConfigError


@dataclass
class GridConfig:
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = -0.5
    y_max: float = 0.5
    nx: int = 256
    ny: int = 256


@dataclass
class Tolerances:
    integrator_tol: float = 1e-10
    graph_rtol: float = 1e-12
    flat: float = 1e-8
    conjugacy: float = 1e-6
    shear: float = 1e-8
    area: float = 1e-6


@dataclass
class KamConfig:
    y_min: float = -1.0
    y_max: float = 1.0
    n_samples: int = 50
    n_iter: int = 1000
    min_fraction: float = 0.9


@dataclass
class PortraitConfig:
    n_seeds: int = 24
    n_iter: int = 500


@dataclass
class CrConfig:
    r: int = 1
    n_t: int = 6
    n_x: int = 6
    n_angle: int = 24
    min_v1: float = 0.2
    max_ratio: float = 0.6


@dataclass
class ExperimentConfig:
    """All knobs of an experiment run.

    ``D``, ``A`` and ``B`` default to ``None`` (derived: D = band_K,
    A = B = (D + 2)^2).  ``field_steps`` is the fixed integrator step count
    per period used by FTLE grid sweeps.
    """

    epsilon: float = 0.3
    band_K: float = 10.0
    ramp_width: float = 6.5
    D: float = None
    A: float = None
    B: float = None
    grid: GridConfig = field(default_factory=GridConfig)
    n_iter: int = 1000
    threshold: float = 0.05
    min_island_fraction: float = 0.05
    field_steps: int = 32
    conj_n: int = 32
    n_samples: int = 100
    tolerances: Tolerances = field(default_factory=Tolerances)
    kam: KamConfig = field(default_factory=KamConfig)
    portrait: PortraitConfig = field(default_factory=PortraitConfig)
    cr: CrConfig = field(default_factory=CrConfig)
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return _build(cls, data, "")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(self, items):
        """Apply ``key=value`` strings; keys are dotted field paths."""
        data = self.to_dict()
        for item in items:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, raw = item.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = data
            parts = key.strip().split(".")
            for part in parts[:-1]:
                if not isinstance(node.get(part), dict):
                    raise ConfigError(f"unknown config section {part!r} in {key!r}")
                node = node[part]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config field {key!r}")
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(data)

    def validate(self):
        t = self.tolerances
        for f in fields(t):
            if not getattr(t, f.name) > 0:
                raise ConfigError(f"tolerances.{f.name} must be positive")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be >= 0")
        if self.n_iter < 1 or self.field_steps < 1:
            raise ConfigError("n_iter and field_steps must be >= 1")
        if self.grid.nx < 2 or self.grid.ny < 2:
            raise ConfigError("grid resolutions must be >= 2")
        if self.threshold < 0:
            raise ConfigError("threshold must be >= 0")
        # admissibility of the derived constants
        from .experiments import build_model

        try:
            build_model(self)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"section {prefix or 'root'} must be an object")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config field {prefix + key!r}")
        default = known[key].default_factory() if callable(known[key].default_factory) else None
        if default is not None and is_dataclass(default):
            kwargs[key] = _build(type(default), value, prefix + key + ".")
        else:
            kwargs[key] = _coerce(known[key], value, prefix + key)
    return cls(**kwargs)


def _coerce(f, value, name):
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    if value is None:
        return None
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "str":
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config field {name!r} has invalid value {value!r}") from None
    return value
