"""Run configuration (JSON, schema version 1)."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .datagen import IC_KINDS, ICRecipe
from .integrator import StepPolicy
from .rhs import SystemParams
from .spectral import GridSpec, SobolevIndex

SCHEMA_VERSION = 1

LEDGER_AUDITS = {
    "l2_balance_velocity": 1e-5,
    "l2_balance_angular": 1e-5,
    "fractional_balance_velocity": 1e-5,
    "fractional_balance_angular": 1e-5,
    "divergence_free": 1e-10,
    "gronwall": None,
    "uniform_bound": None,
    "existence_time": None,
    "viscosity_absorption": None,
}
FIELD_AUDITS = {
    "duality_pairing": 1e-12,
    "interpolation": 1e-12,
    "product_law": None,
}
AUDIT_DEFAULTS = {**LEDGER_AUDITS, **FIELD_AUDITS}


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    n: int = Field(ge=4)
    box_length: float = Field(default=2 * math.pi, gt=0)
    dealias_fraction: float = Field(default=2.0 / 3.0, gt=0, le=1)

    def spec(self) -> GridSpec:
        return GridSpec(self.n, self.box_length, self.dealias_fraction)


class ParamsConfig(_Strict):
    nu: float = Field(default=1.0, gt=0)
    mu: float = Field(default=1.0, gt=0)
    eps: float = Field(default=0.0, ge=0)
    tau: float = 1.0
    sigma: float = 0.2

    def spec(self) -> SystemParams:
        return SystemParams(self.nu, self.mu, self.eps, self.tau, self.sigma)


class StepConfig(_Strict):
    t_end: float = Field(gt=0)
    dt: Union[float, Literal["auto"]] = "auto"
    cfl_safety: float = Field(default=0.5, gt=0, le=1)
    ledger_stride: int = Field(default=1, ge=1)
    snapshot_stride: int = Field(default=0, ge=0)
    dt_max: float = Field(default=1e-2, gt=0)

    @field_validator("dt")
    @classmethod
    def _positive_dt(cls, v):
        if v != "auto" and not v > 0:
            raise ValueError("dt must be positive or 'auto'")
        return v

    def spec(self, t_end: float | None = None) -> StepPolicy:
        return StepPolicy(
            t_end=self.t_end if t_end is None else t_end,
            dt=self.dt,
            cfl_safety=self.cfl_safety,
            ledger_stride=self.ledger_stride,
            snapshot_stride=self.snapshot_stride,
            dt_max=self.dt_max,
        )


class RecipeConfig(_Strict):
    kind: Literal["zero", "single-mode", "beltrami", "taylor-green", "random-spectrum"]
    s: float = 0.0
    index_kind: Literal["homogeneous", "inhomogeneous"] = "inhomogeneous"
    amplitude: float = Field(default=1.0, gt=0)
    spectral_slope_delta: float = Field(default=0.01, gt=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    mode: tuple[int, int, int] = (1, 0, 0)

    def recipe(self) -> ICRecipe | None:
        if self.kind == "zero":
            return None
        assert self.kind in IC_KINDS
        return ICRecipe(
            kind=self.kind,
            target_index=SobolevIndex(self.s, self.index_kind),
            amplitude=self.amplitude,
            spectral_slope_delta=self.spectral_slope_delta,
            seed=self.seed,
            mode=self.mode,
        )


class SnapshotSource(_Strict):
    snapshot: str
    field: int = Field(default=0, ge=0)


class AuditConfig(_Strict):
    name: str
    tolerance: Optional[float] = None
    options: dict[str, float] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _known(cls, v):
        if v not in AUDIT_DEFAULTS:
            raise ValueError(f"unknown audit {v!r}; known: {sorted(AUDIT_DEFAULTS)}")
        return v

    def tol(self) -> float | None:
        return AUDIT_DEFAULTS[self.name] if self.tolerance is None else self.tolerance


class RunConfig(_Strict):
    schema_version: Literal[1] = 1
    grid: GridConfig
    params: ParamsConfig = ParamsConfig()
    step: StepConfig
    ic_u: Union[RecipeConfig, SnapshotSource]
    ic_w: Union[RecipeConfig, SnapshotSource]
    audits: list[AuditConfig] = Field(default_factory=list)
    output_dir: str = "out"
    C1: float = Field(default=1.0, gt=0)
    eps0: float = Field(default=1.0, gt=0)
    te_small_data: Optional[float] = Field(default=None, gt=0)
    clip_to_existence_time: bool = False

    @model_validator(mode="after")
    def _unique_audits(self):
        names = [a.name for a in self.audits]
        if len(names) != len(set(names)):
            raise ValueError("each audit may be configured once")
        if self.grid.n % 2:
            raise ValueError("grid.n must be even")
        return self

    def with_updates(self, **changes) -> "RunConfig":
        """Copy with nested updates, e.g. with_updates(params={'eps': 0.1})."""
        data = self.model_dump()
        for key, val in changes.items():
            if isinstance(val, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **val}
            else:
                data[key] = val
        return RunConfig.model_validate(data)


def parse_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as err:
        raise ConfigError(str(err)) from None


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2) + "\n"
