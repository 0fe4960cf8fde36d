"""Run configuration: strict JSON schema, unknown keys rejected."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class ScheduleConfig(_Strict):
    periods: list[int] = Field(min_length=1)
    rates: list[int] = Field(min_length=1)
    start_index: int = Field(default=2, ge=1)

    @model_validator(mode="after")
    def _shape(self):
        if len(self.periods) != len(self.rates):
            raise ValueError("periods and rates must have the same length")
        if min(self.periods) < 1 or min(self.rates) < 1:
            raise ValueError("periods and rates must be positive")
        return self


class TruncationConfig(_Strict):
    eps: float = Field(default=1e-15, gt=0)
    max_terms: int = Field(default=512, ge=8)


class GrowthConfig(_Strict):
    radii: list[float] = Field(default_factory=lambda: [2.0**k for k in range(1, 11)], min_length=6)
    density: list[int] = Field(default_factory=lambda: [64, 64, 16], min_length=3, max_length=3)
    envelope_constant: float = 40.0
    stability_check: bool = True


class DbarSection(_Strict):
    grid_n: int = Field(default=512, ge=16)
    box_half_width: float = Field(default=32.0, gt=0)
    box_center: float = 8.0
    k_min: int = Field(default=2, ge=2)
    k_max: int = Field(default=5, ge=2)
    weight_cap: float = Field(default=1e12, gt=0)
    cg_tol: float = Field(default=1e-8, gt=0)
    cg_max_iter: int = Field(default=20000, ge=1)
    potential_C: float = Field(default=1.0, gt=0)
    J: list[int] = Field(default_factory=lambda: [3])
    M: float = 9.0
    interpolation_tol: float = Field(default=1e-3, gt=0)  # relative to M


class PPPConfig(_Strict):
    newton: bool = True
    newton_tol: float = Field(default=1e-12, gt=0)
    orbit_tol: float = Field(default=1e-10, gt=0)


class PunctureConfig(_Strict):
    C: Optional[float] = Field(default=None, gt=0)  # None: 2^9 / estimated c
    k_min: int = Field(default=2, ge=2)
    k_max: int = Field(default=6, ge=2)
    global_h: float = Field(default=0.5, gt=0)
    disk_cells: int = Field(default=32, ge=4)
    heightfield_h: float = Field(default=0.5, gt=0)


class RunConfig(_Strict):
    schedule: ScheduleConfig
    precision_bits: Optional[int] = Field(default=None, ge=53)
    truncation: TruncationConfig = TruncationConfig()
    growth: GrowthConfig = GrowthConfig()
    dbar: DbarSection = DbarSection()
    ppp: PPPConfig = PPPConfig()
    puncture: PunctureConfig = PunctureConfig()
    output_dir: str = "out"


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(loc, err["msg"]) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(str(path), "file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return parse_config(data)
