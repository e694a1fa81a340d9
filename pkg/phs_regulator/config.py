"""Settings: schema defaults, environment overrides, explicit overrides"""

import json
import os
from pathlib import Path
from typing import Any, Optional

import numpy as np
from dotenv import load_dotenv

from .errors import ConfigError
from .logger import logger

SCHEMA_FILE = Path(__file__).parent / "_conf_schema.json"
ENV_PREFIX = "PHS_REGULATOR_"
SCHEME_CHOICES = ("auto", "mixed", "upwind")


def load_schema(schema_file: Path = SCHEMA_FILE) -> dict[str, dict[str, Any]]:
    """Load the configuration schema"""
    with open(schema_file, encoding="utf-8") as f:
        return json.load(f)


def _cast(key: str, kind: str, value: Any) -> Any:
    """Cast a raw value to the schema type of ``key``"""
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if kind == "list":
            if isinstance(value, str):
                return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
            return [float(v) for v in value]
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: cannot interpret {value!r} as {kind}") from e


class Settings:
    """Resolved configuration values

    Resolution order: schema default < ``PHS_REGULATOR_<KEY>`` environment
    variable (a ``.env`` file is honoured) < explicit overrides.
    """

    def __init__(self, overrides: Optional[dict[str, Any]] = None, env_file: Optional[str] = None):
        self.schema = load_schema()
        self.config: dict[str, Any] = {
            key: _cast(key, spec["type"], spec["default"]) for key, spec in self.schema.items()
        }

        load_dotenv(env_file)
        for key, spec in self.schema.items():
            raw = os.environ.get(f"{ENV_PREFIX}{key.upper()}")
            if raw is not None and raw != "":
                self.config[key] = _cast(key, spec["type"], raw)
                logger.debug(f"配置项 {key} 已由环境变量覆盖: {self.config[key]}")

        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key not in self.schema:
                raise ConfigError(f"unknown configuration key: {key}")
            self.config[key] = _cast(key, self.schema[key]["type"], value)

        self._validate()

    def _validate(self):
        for key in ("tolerance", "kyp_relative_tolerance", "regulation_tolerance", "horizon", "dt",
                    "eps_grid_min", "eps_grid_max", "tracking_threshold", "max_settling_horizon"):
            if not self.config[key] > 0:
                raise ConfigError(f"{key} must be positive, got {self.config[key]}")
        if self.config["nf"] < 2:
            raise ConfigError(f"nf must be at least 2, got {self.config['nf']}")
        if not 0 < self.config["final_window_fraction"] <= 1:
            raise ConfigError("final_window_fraction must lie in (0, 1]")
        if not 0 <= self.config["decay_window_start"] < 1:
            raise ConfigError("decay_window_start must lie in [0, 1)")
        grid = self.config["delta_grid"]
        if not grid or any(d <= 0 for d in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("delta_grid must be positive and strictly increasing")
        if self.config["scheme"] not in SCHEME_CHOICES:
            raise ConfigError(f"scheme must be one of {', '.join(SCHEME_CHOICES)}, got {self.config['scheme']!r}")

    def get_config_value(self, key: str, default: Any = None) -> Any:
        """Get configuration value with default fallback"""
        return self.config.get(key, default)

    def eps_grid(self) -> list[float]:
        """Logarithmic εc grid for the Lyapunov certificate line search"""
        return list(
            np.logspace(
                np.log10(self.config["eps_grid_min"]),
                np.log10(self.config["eps_grid_max"]),
                int(self.config["eps_grid_points"]),
            )
        )
