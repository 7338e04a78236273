import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Mapping, Optional

import dotenv

from config.pipeline_defaults import (
    BUFFER_METERS, CELL_METRICS, CELL_SIZE_METERS, D_MAX_METERS, DESTINATION_METHODS,
    DIAM_MAX_METERS, DIAMETER_MIN_METERS, EPS_METERS, F_MIN, J_MIN, LABEL_STRATEGIES,
    MIN_PTS, STAY_METHODS, T_MIN_SECONDS,
)
from src.errors import ConfigError

TOOL_NAME = "goi-partition"
TOOL_VERSION = "1.0.0"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class PipelineConfig:
    t_min: int = T_MIN_SECONDS
    d_max: float = D_MAX_METERS
    diam_max: float = DIAM_MAX_METERS
    buffer: float = BUFFER_METERS
    j_min: float = J_MIN
    f_min: int = F_MIN
    eps: float = EPS_METERS
    min_pts: int = MIN_PTS
    diameter_min: float = DIAMETER_MIN_METERS
    cell_size: float = CELL_SIZE_METERS
    metric: str = "GS"
    stay_method: str = "twc"
    destination_method: str = "geometric"
    label_strategy: str = "intersection"
    collapse: bool = False

    def __post_init__(self):
        _check_choice("metric", self.metric, CELL_METRICS)
        _check_choice("stay_method", self.stay_method, STAY_METHODS)
        _check_choice("destination_method", self.destination_method, DESTINATION_METHODS)
        _check_choice("label_strategy", self.label_strategy, LABEL_STRATEGIES)
        for name in ("t_min", "d_max", "diam_max", "buffer", "eps", "diameter_min", "cell_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", key=name)
        if not 0.0 <= self.j_min <= 1.0:
            raise ConfigError("j_min must lie in [0, 1]", key="j_min")
        if self.f_min < 1:
            raise ConfigError("f_min must be at least 1", key="f_min")
        if self.min_pts < 2:
            raise ConfigError("min_pts must be at least 2", key="min_pts")

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def updated(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        """Copy with ``overrides`` applied; ``None`` values are ignored."""
        given = {k: v for k, v in overrides.items() if v is not None}
        if not given:
            return self
        return replace(self, **_coerce(given))


def _check_choice(name: str, value: str, choices) -> None:
    if value not in choices:
        raise ConfigError(f"{name} must be one of {', '.join(choices)}; got {value!r}", key=name)


def _coerce(raw: Mapping[str, Any]) -> Dict[str, Any]:
    types = {f.name: f.type for f in fields(PipelineConfig)}
    out: Dict[str, Any] = {}
    for key, value in raw.items():
        name = key.strip().lower().replace("-", "_")
        if name not in types:
            raise ConfigError(f"unknown configuration key {key!r}", key=key)
        kind = types[name]
        try:
            if kind in (bool, "bool"):
                if isinstance(value, bool):
                    out[name] = value
                elif str(value).strip().lower() in _TRUE:
                    out[name] = True
                elif str(value).strip().lower() in _FALSE:
                    out[name] = False
                else:
                    raise ValueError(value)
            elif kind in (int, "int"):
                out[name] = int(value)
            elif kind in (float, "float"):
                out[name] = float(value)
            else:
                out[name] = str(value).strip()
        except (TypeError, ValueError):
            raise ConfigError(f"bad value {value!r} for {name}", key=name) from None
    return out


def read_flat_config(path: str) -> Dict[str, str]:
    """Parse a flat ``key=value`` file (``#`` comments allowed)."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}", path=path)
    values = dotenv.dotenv_values(path)
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise ConfigError(f"keys without a value in {path}: {', '.join(missing)}", path=path)
    return dict(values)


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """Defaults, then the config file, then explicit overrides."""
    config = PipelineConfig()
    if path:
        config = config.updated(read_flat_config(path))
    if overrides:
        config = config.updated(overrides)
    return config
