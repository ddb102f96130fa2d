"""JSON run configurations for the command-line harness.

Every model forbids unknown keys.  ``validate`` collects all problems at
once and reports them with dotted field paths.
"""
from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fraclap import default_quad_points

Alpha = Field(gt=0.0, le=1.0)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _even(N: int) -> int:
    if N % 2:
        raise ValueError(f"N={N} must be even (the dual grid needs a symmetric Nyquist pair)")
    return N


class LatticeFields(Strict):
    n: int = Field(ge=1, le=3)
    N: int = Field(ge=2)
    hbar: float = Field(gt=0.0, allow_inf_nan=False)
    alpha: float = Alpha

    _check_N = field_validator("N")(classmethod(lambda cls, v: _even(v)))


class FieldSource(Strict):
    """Grid data: a CSV file or a builtin generator."""

    file: Optional[str] = None
    builtin: Optional[Literal["zero", "gaussian", "planewave", "random"]] = None
    center: Optional[list[float]] = None
    width: Optional[float] = Field(default=None, gt=0.0)
    amplitude: float = 1.0
    mode: Optional[list[int]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.file is None) == (self.builtin is None):
            raise ValueError("give exactly one of 'file' or 'builtin'")
        if self.builtin == "gaussian" and self.width is None:
            raise ValueError("gaussian needs 'width'")
        if self.builtin == "planewave" and self.mode is None:
            raise ValueError("planewave needs 'mode'")
        return self


class MassSource(Strict):
    const: Optional[float] = Field(default=None, ge=0.0, allow_inf_nan=False)
    file: Optional[str] = None
    bump: Optional[list[float]] = Field(
        default=None, description="[base, height, width]: base + height*exp(-|x|^2/width^2)"
    )

    @model_validator(mode="after")
    def _one_source(self):
        given = [k for k in ("const", "file", "bump") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of 'const', 'file' or 'bump'")
        if self.bump is not None:
            if len(self.bump) != 3 or self.bump[0] < 0 or self.bump[1] < 0 or self.bump[2] <= 0:
                raise ValueError("bump must be [base>=0, height>=0, width>0]")
        return self


class ForcingSource(Strict):
    file: str


class CoeffsConfig(Strict):
    alpha: float = Alpha
    dim: int = Field(default=1, ge=1, le=3)
    radius: int = Field(default=3, ge=1)
    quad_points: Optional[int] = None
    richardson: int = Field(default=2, ge=0, le=4)

    @model_validator(mode="after")
    def _defaults(self):
        if self.quad_points is None:
            self.quad_points = default_quad_points(self.dim)
        M = self.quad_points
        if M < 64 or M & (M - 1):
            raise ValueError(f"quad_points must be a power of two >= 64, got {M}")
        return self


class SolveConfig(LatticeFields):
    T: float = Field(gt=0.0, allow_inf_nan=False)
    dt: Optional[float] = Field(default=None, gt=0.0)
    record_every: int = Field(default=16, ge=1)
    mass: MassSource
    forcing: Union[Literal["zero"], ForcingSource] = "zero"
    u0: FieldSource
    u1: FieldSource

    @model_validator(mode="after")
    def _defaults(self):
        if self.dt is None:
            self.dt = self.T / 1024
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")
        return self


class EnergyConfig(LatticeFields):
    mass: MassSource
    u0: FieldSource
    u1: FieldSource


class SymbolGapConfig(LatticeFields):
    pass


class GaussianProfileConfig(Strict):
    kind: Literal["gaussian"]
    cutoff: float = Field(gt=0.0)
    width: float = Field(gt=0.0)
    center: Union[float, list[float]] = 0.0
    amplitude: float = 1.0
    velocity_amplitude: float = 0.0
    points: int = Field(default=256, ge=2)

    _check_points = field_validator("points")(classmethod(lambda cls, v: _even(v)))


class PointProfileConfig(Strict):
    kind: Literal["point"]
    cutoff: float = Field(gt=0.0)
    value: float = 1.0
    points: int = Field(default=16, ge=2)

    _check_points = field_validator("points")(classmethod(lambda cls, v: _even(v)))


class ConvergeConfig(Strict):
    alpha: float = Alpha
    n: int = Field(default=1, ge=1, le=3)
    mass: MassSource = MassSource(const=1.0)
    T: float = Field(default=1.0, gt=0.0)
    hbar_list: list[float] = Field(min_length=3)
    box: float = Field(gt=0.0)
    profile: Union[GaussianProfileConfig, PointProfileConfig] = Field(discriminator="kind")
    dt: Optional[float] = Field(default=None, gt=0.0)
    reference: Literal["continuum", "self"] = "continuum"
    reference_refinements: int = Field(default=0, ge=0, le=4)

    @model_validator(mode="after")
    def _checks(self):
        hs = self.hbar_list
        if any(h <= 0 for h in hs) or any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("hbar_list must be positive and strictly decreasing")
        for h in hs:
            ratio = self.box / h
            if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) % 2:
                raise ValueError(f"box/hbar must be an even integer (N even), fails for hbar={h}")
            if self.profile.cutoff > 1 / (2 * h) * (1 + 1e-12):
                raise ValueError(
                    f"profile cutoff {self.profile.cutoff} exceeds the Nyquist limit 1/(2*{h})"
                )
        if self.mass.file is not None:
            raise ValueError("converge takes mass as 'const' or 'bump'")
        if self.reference == "continuum" and self.mass.const is None:
            raise ValueError("a continuum reference needs constant mass; use reference='self'")
        return self


SCHEMAS = {
    "coeffs": CoeffsConfig,
    "solve": SolveConfig,
    "energy": EnergyConfig,
    "symbol-gap": SymbolGapConfig,
    "converge": ConvergeConfig,
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _path(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def validate(subcommand: str, raw: dict) -> BaseModel:
    """Normalize ``raw`` into the subcommand's config model or raise ConfigError
    listing every problem as ``field.path: message``."""
    if subcommand not in SCHEMAS:
        raise ConfigError([f"<root>: unknown subcommand {subcommand!r}"])
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: configuration must be a JSON object"])
    try:
        return SCHEMAS[subcommand].model_validate(raw)
    except ValidationError as exc:
        errors = []
        for err in exc.errors():
            msg = err["msg"].removeprefix("Value error, ")
            errors.append(f"{_path(err['loc'])}: {msg}")
        raise ConfigError(errors) from None


def normalized_dict(cfg: BaseModel) -> dict:
    return cfg.model_dump(mode="json", exclude_none=True)
