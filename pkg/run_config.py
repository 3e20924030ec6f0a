"""Validated run configuration, persisted as JSON between invocations."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

import settings
from data_files import InputFileError, atomic_write_text
from errors import InputError
from moments import Basis

THREADS_ENV = "OVERLAP_BOUNDS_THREADS"

WindowPolicy = Literal["gershgorin", "lanczos", "explicit"]
TargetMode = Literal["exact", "intervals", "threshold"]


class RunConfig(BaseModel):
    matrix: Path | None = None
    state: Path | None = None
    spectrum: Path | None = None
    moments: Path | None = None
    normalize_state: bool = False

    targets: list[int] = Field(default_factory=lambda: [0])
    weights: list[float] | None = None
    target_mode: TargetMode = "exact"
    threshold_energy: float | None = None
    delta: float | None = Field(None, ge=0.0)

    degrees: list[int] = Field(default_factory=lambda: [1, 2])
    directions: list[Literal["lower", "upper"]] = Field(default_factory=lambda: ["lower", "upper"])
    basis: Basis = Basis.CHEBYSHEV
    window_policy: WindowPolicy = "gershgorin"
    window: tuple[float, float] | None = None
    lanczos_steps: int | None = Field(None, ge=1)

    target_points: int = Field(settings.TARGET_REGION_POINTS, ge=2)
    complement_points: int = Field(settings.COMPLEMENT_REGION_POINTS, ge=2)
    threshold_points: int = Field(settings.THRESHOLD_GRID_POINTS, ge=2)
    gamma_minus: float = Field(settings.GAMMA_MINUS, gt=0.0, le=0.5)
    gamma_plus: float = Field(settings.GAMMA_PLUS, gt=0.0, le=0.5)

    certify_factor: int = Field(settings.CERTIFY_FACTOR, ge=2)
    certify_retries: int = Field(settings.CERTIFY_RETRIES, ge=0)
    certify_tolerance: float = Field(settings.CERTIFY_TOL, gt=0.0)

    output: Path | None = None
    json_output: Path | None = None
    seed: int = 0
    threads: int = Field(1, ge=1)

    @field_validator("degrees")
    @classmethod
    def _degrees_positive(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("at least one degree is required")
        if any(degree < 1 for degree in value):
            raise ValueError("degrees must all be >= 1")
        return value

    @field_validator("weights")
    @classmethod
    def _weights_non_negative(cls, value: list[float] | None) -> list[float] | None:
        if value is not None and any(weight < 0.0 for weight in value):
            raise ValueError("weights must be non-negative")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> RunConfig:
        if self.weights is not None and len(self.weights) != len(self.targets):
            raise ValueError(f"{len(self.targets)} targets but {len(self.weights)} weights")
        if self.window_policy == "explicit":
            if self.window is None:
                raise ValueError("window policy 'explicit' needs a window E_L E_U")
            if not self.window[0] < self.window[1]:
                raise ValueError("explicit window needs E_L < E_U")
        if self.target_mode == "threshold" and self.threshold_energy is None:
            raise ValueError("threshold targets need a threshold energy")
        return self

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    def resolved(self) -> dict[str, object]:
        """JSON-ready dump embedded in every output file."""
        return self.model_dump(mode="json")


def _validation_message(exc: ValidationError) -> str:
    problems = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "config"
        problems.append(f"{location}: {error['msg']}")
    return "invalid configuration: " + "; ".join(problems)


def build_config(values: dict[str, object]) -> RunConfig:
    try:
        return RunConfig.model_validate(values)
    except ValidationError as exc:
        raise InputError(_validation_message(exc)) from exc


def with_overrides(config: RunConfig, overrides: dict[str, object]) -> RunConfig:
    """Re-validate with flag values layered over the file values; ``None`` means unset."""
    merged = config.model_dump()
    merged.update({key: value for key, value in overrides.items() if value is not None})
    return build_config(merged)


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputFileError(f"cannot read config ({exc.strerror or exc})", path) from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc
    if not isinstance(data, dict):
        raise InputFileError("config must be a JSON object", path)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise InputFileError(_validation_message(exc), path) from exc


def save_config(config: RunConfig, path: Path) -> None:
    atomic_write_text(Path(path), json.dumps(config.resolved(), indent=2, sort_keys=True) + "\n")


def threads_from_env(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise InputError(f"{THREADS_ENV} must be >= 1, got {value}")
    return value
