"""Experiment configuration: one dataclass, a JSON file, flag overrides.

Every pipeline command takes the same configuration shape; a config file
sets the campaign and individual flags override single fields.  The
resolved configuration is embedded verbatim in every output file, so a
run can always be reproduced from any of its artifacts.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .counting import SUPPORTED_DIMENSIONS

# the plane's connective constant is roughly e^0.97; at or below that
# inverse temperature the weighted series diverge and calibration is
# meaningless, so nearby values deserve a loud warning
PLANE_SUPERCRITICAL_BETA = 0.98

DEFAULT_GRID = tuple(round(0.1 * k, 10) for k in range(1, 10))


class ConfigError(ValueError):
    """The configuration cannot describe a runnable experiment."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs shared by the whole pipeline.

    spans lists the pinning distances n to sample; box_radius of None
    lets the sampler choose its default transverse box.
    """

    d: int = 2
    beta: float = 1.2
    cutoff: int = 13
    spans: tuple[int, ...] = (64, 128, 256, 512)
    replicas: int = 20000
    seed: int = 0
    grid: tuple[float, ...] = DEFAULT_GRID
    box_radius: int | None = None
    out: str = "runs"
    threads: int = 1

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["spans"] = list(self.spans)
        payload["grid"] = list(self.grid)
        return payload


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    if config.d not in SUPPORTED_DIMENSIONS:
        raise ConfigError(f"dimension {config.d} not in {SUPPORTED_DIMENSIONS}")
    if not config.beta > 0.0:
        raise ConfigError(f"beta must be positive, got {config.beta}")
    if config.d == 2 and config.beta <= PLANE_SUPERCRITICAL_BETA:
        warnings.warn(
            f"beta = {config.beta} is at or below the plane's critical "
            "region; weighted sums may diverge",
            stacklevel=2,
        )
    if config.cutoff < 0:
        raise ConfigError(f"cutoff must be nonnegative, got {config.cutoff}")
    if not config.spans:
        raise ConfigError("at least one span is required")
    if any(n < 1 for n in config.spans):
        raise ConfigError(f"spans must be positive, got {config.spans}")
    if config.replicas < 1:
        raise ConfigError(f"replicas must be positive, got {config.replicas}")
    if config.threads < 1:
        raise ConfigError(f"threads must be positive, got {config.threads}")
    if config.box_radius is not None and config.box_radius < 1:
        raise ConfigError(f"box radius must be positive, got {config.box_radius}")
    if not config.grid:
        raise ConfigError("time grid must be nonempty")
    if any(not 0.0 < t < 1.0 for t in config.grid):
        raise ConfigError("grid times must lie strictly inside (0, 1)")
    if any(b <= a for a, b in zip(config.grid, config.grid[1:])):
        raise ConfigError("grid times must be strictly increasing")
    return config


def config_from_dict(payload: dict) -> ExperimentConfig:
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    coerced = dict(payload)
    if "spans" in coerced:
        coerced["spans"] = tuple(int(n) for n in coerced["spans"])
    if "grid" in coerced:
        coerced["grid"] = tuple(float(t) for t in coerced["grid"])
    return ExperimentConfig(**coerced)


def load_config_file(path: str | Path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}") from None
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")
    return payload


def resolve_config(
    file_payload: dict | None, overrides: dict
) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    config = config_from_dict(file_payload or {})
    supplied = {k: v for k, v in overrides.items() if v is not None}
    if "spans" in supplied:
        supplied["spans"] = tuple(int(n) for n in supplied["spans"])
    if "grid" in supplied:
        supplied["grid"] = tuple(float(t) for t in supplied["grid"])
    return validate_config(replace(config, **supplied))
