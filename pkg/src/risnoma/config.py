"""Scenario configuration: defaults, unit conversions and file loading.

Powers are given in dBm (``p_max``, ``noise_power``) and the path loss at one
meter in dB; everything downstream works in watts and linear gains through
the properties defined here.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, InvalidArgument
from .geometry import ChannelParams, SystemGeometry


def dbm_to_watt(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def watt_to_dbm(watt):
    import math
    return 10.0 * math.log10(watt * 1e3)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SensingConfig:
    target_angles: tuple = (-45.0, 0.0, 45.0)
    beam_width: float = 6.0
    grid_step: float = 1.8
    # illumination map resolution (angles in deg, radii in m)
    map_angle_step: float = 1.8
    map_radii: tuple = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0)


@dataclass(frozen=True)
class AlgorithmConfig:
    solver: str = "clarabel"
    solver_tol: float = 1e-8
    solver_max_iter: int = 200
    tol_inner: float = 1e-4
    max_inner: int = 50
    tol_outer: float = 1e-3
    max_outer: int = 20
    delta_tol: float = 1e-6
    max_feasibility: int = 50
    rho0: float = 0.1
    rho_min: float = 1e-8
    tol_rank: float = 1e-6
    tol_srcr: float = 1e-4
    max_srcr: int = 400
    srcr_warm: bool = True
    margin: float = 1e-6
    # added to every rate floor inside the programs so that rank-one
    # extraction error cannot push a rate below the reported floor
    qos_guard: float = 1e-5
    iao_rfu_share: float = 0.8


@dataclass(frozen=True)
class ScenarioConfig:
    n_antennas: int = 6
    m_elements: int = 16
    k_clusters: int = 3
    p_max: float = 35.0          # dBm
    noise_power: float = -90.0   # dBm
    qos_rnu: float = 0.5         # bits/s/Hz
    qos_rfu: float = 0.1
    pathloss_1m_db: float = 30.0
    geometry: SystemGeometry = field(default_factory=SystemGeometry)
    channel_exponents: tuple = (2.2, 2.2)
    rician: tuple = (3.0, 3.0)
    spacing_ratio: float = 0.5
    sensing: SensingConfig = field(default_factory=SensingConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    seeds: tuple = tuple(range(10))

    def __post_init__(self):
        for name in ("n_antennas", "m_elements", "k_clusters"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(name, f"must be a positive integer, got {value!r}")
        if self.k_clusters > len(self.geometry.cluster_angle_ranges):
            raise ConfigError("k_clusters", "exceeds the number of cluster angle ranges")
        if self.qos_rnu < 0 or self.qos_rfu < 0:
            raise ConfigError("qos_rnu" if self.qos_rnu < 0 else "qos_rfu", "must be >= 0")
        if self.sensing.beam_width <= 0:
            raise ConfigError("sensing.beam_width", "must be positive")

    @property
    def p_max_w(self):
        return dbm_to_watt(self.p_max)

    @property
    def noise_w(self):
        return dbm_to_watt(self.noise_power)

    @property
    def channel(self):
        return ChannelParams(
            pathloss_ref=1.0 / db_to_linear(self.pathloss_1m_db),
            pathloss_exponent_br=self.channel_exponents[0],
            pathloss_exponent_ru=self.channel_exponents[1],
            rician_br=self.rician[0],
            rician_ru=self.rician[1],
            element_spacing_ratio=self.spacing_ratio,
        )

    def replace(self, **changes):
        """Copy with top-level or dotted (``algorithm.max_outer``) overrides."""
        nested = {}
        flat = {}
        for key, value in changes.items():
            head, _, tail = key.partition(".")
            if tail:
                nested.setdefault(head, {})[tail] = value
            else:
                flat[key] = value
        for head, sub in nested.items():
            flat[head] = dataclasses.replace(getattr(self, head), **sub)
        return dataclasses.replace(self, **flat)

    def to_dict(self):
        return _jsonable(dataclasses.asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


_SECTIONS = {"geometry": SystemGeometry, "sensing": SensingConfig, "algorithm": AlgorithmConfig}


def _coerce(path, default, value):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, str):
            # YAML 1.1 reads exponent literals without a dot (1e-8) as strings
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(path, f"expected a number, got {value!r}") from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {value!r}")
        if default and isinstance(default[0], tuple):
            return tuple(tuple(_coerce(f"{path}[{i}]", default[0][0], x) for x in item)
                         for i, item in enumerate(value))
        proto = default[0] if default else 0.0
        return tuple(_coerce(f"{path}[{i}]", proto, x) for i, x in enumerate(value))
    return value


def _build(cls, data, prefix=""):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", f"expected a mapping, got {type(data).__name__}")
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in names:
            raise ConfigError(path, "unknown field")
        if key in _SECTIONS and cls is ScenarioConfig:
            kwargs[key] = _build(_SECTIONS[key], value, prefix=f"{key}.")
        else:
            kwargs[key] = _coerce(path, getattr(defaults, key), value)
    try:
        return cls(**kwargs)
    except InvalidArgument as exc:
        raise ConfigError(prefix.rstrip(".") or "<root>", str(exc)) from exc


def config_from_dict(data):
    return _build(ScenarioConfig, data or {})


def load_config(path):
    """Read a YAML (or JSON) scenario file; missing fields keep their defaults."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from exc
    return config_from_dict(data)
