"""Run configuration: YAML file -> validated :class:`RunConfig`.

The file is a single YAML mapping. Every key is optional; omitted suites and
parameters fall back to the defaults below, so an empty file is a valid
"run everything" configuration. Validation errors are reported as
:class:`ConfigError` carrying the dotted field path and, when the field is
present in the file, its line number.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .geometry import Space
from .quadrature import Ball, Domain, Ellipsoid, FourierProfile

SUITES = ("symfun", "geometry", "radial", "minkowski", "pohozaev", "boundary",
          "pfunction", "calculus")


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` is the user-facing diagnostic."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _check_nk(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n = {n}, k = {k}")


def _check_resolution(res, dim: int) -> None:
    if res is not None and len(res) != dim:
        raise ValueError(f"resolution needs {dim} entries for dimension {dim}, got {list(res)}")


class SolutionCase(_Model):
    """An exact radial solution: ``(space, n, k)`` plus either ``c0`` or ``R``."""

    space: Space
    n: int = Field(ge=1)
    k: int = Field(ge=1)
    c0: Optional[float] = None
    R: Optional[float] = None
    resolution: Optional[tuple[int, ...]] = None

    @model_validator(mode="after")
    def _validate(self):
        _check_nk(self.n, self.k)
        if (self.c0 is None) == (self.R is None):
            raise ValueError("give exactly one of c0 and R")
        if self.R is not None and not (self.R > 0 and math.isfinite(self.R)):
            raise ValueError(f"R must be positive and finite, got {self.R}")
        if self.c0 is not None:
            if self.space is Space.HYPERBOLIC and not 0.0 < self.c0 < 1.0:
                raise ValueError(
                    f"hyperbolic c0 must lie in (0, 1) because tanh R = c0; got c0 = {self.c0}")
            if not (self.c0 > 0 and math.isfinite(self.c0)):
                raise ValueError(f"c0 must be positive and finite, got {self.c0}")
        _check_resolution(self.resolution, self.n)
        return self

    @property
    def neumann(self) -> float:
        if self.c0 is not None:
            return self.c0
        return math.tanh(self.R) if self.space is Space.HYPERBOLIC else self.R

    def label(self) -> dict:
        return {"space": self.space.value, "n": self.n, "k": self.k, "c0": self.neumann}


class ProfileSpec(_Model):
    kind: Literal["ball", "fourier", "ellipsoid"] = "ball"
    radius: Optional[float] = None
    coefficients: tuple[tuple[int, float, float], ...] = ()
    axes: Optional[tuple[float, ...]] = None

    @model_validator(mode="after")
    def _validate(self):
        if self.kind == "ellipsoid":
            if self.axes is None:
                raise ValueError("ellipsoid profile needs 'axes'")
        elif self.radius is None:
            raise ValueError(f"{self.kind} profile needs 'radius'")
        return self

    def build(self):
        if self.kind == "ball":
            return Ball(self.radius)
        if self.kind == "fourier":
            return FourierProfile(self.radius, tuple(tuple(c) for c in self.coefficients))
        return Ellipsoid(tuple(self.axes))


class DomainSpec(_Model):
    space: Space
    dim: int
    profile: ProfileSpec
    k: Optional[tuple[int, ...]] = None
    resolution: Optional[tuple[int, ...]] = None

    @model_validator(mode="after")
    def _validate(self):
        _check_resolution(self.resolution, self.dim)
        for k in self.k or ():
            _check_nk(self.dim, k)
        self.build()  # surfaces profile/space incompatibilities as validation errors
        return self

    def build(self) -> Domain:
        return Domain(self.dim, self.space, self.profile.build())


class SymfunSuite(_Model):
    samples: int = Field(500, ge=1)
    max_dim: int = Field(6, ge=1, le=8)
    oracle_tol: float = 1e-10
    gradient_tol: float = 1e-6
    trace_tol: float = 1e-9
    slack_tol: float = 1e-9


class GeometrySuite(_Model):
    points: int = Field(100, ge=1)
    dims: tuple[int, ...] = (2, 3)
    tolerance: float = 1e-10
    fd_tolerance: float = 1e-6

    @field_validator("dims")
    @classmethod
    def _dims(cls, v):
        if any(d < 1 for d in v):
            raise ValueError("dimensions must be >= 1")
        return v


def _default_cases(*rows):
    return tuple(SolutionCase(**r) for r in rows)


# Exact solutions integrate to rounding level already on coarse 3-D meshes,
# so the shipped cases use a lighter grid there to keep full runs short.
_SOLUTION_GRID_3D = (24, 48, 96)

_EXACT_CASES = _default_cases(
    dict(space="euclidean", n=2, k=1, c0=1.0),
    dict(space="euclidean", n=3, k=2, c0=1.0, resolution=_SOLUTION_GRID_3D),
    dict(space="euclidean", n=3, k=3, c0=0.9, resolution=_SOLUTION_GRID_3D),
    dict(space="hyperbolic", n=2, k=1, c0=0.5),
    dict(space="hyperbolic", n=3, k=1, R=0.8, resolution=_SOLUTION_GRID_3D),
    dict(space="hyperbolic", n=3, k=2, R=0.8, resolution=_SOLUTION_GRID_3D),
    dict(space="hyperbolic", n=3, k=3, R=0.8, resolution=_SOLUTION_GRID_3D),
)


class ShootingCase(_Model):
    n: int
    k: int

    @model_validator(mode="after")
    def _validate(self):
        _check_nk(self.n, self.k)
        return self


class RadialSuite(_Model):
    cases: tuple[SolutionCase, ...] = _EXACT_CASES
    shooting: tuple[ShootingCase, ...] = tuple(
        ShootingCase(n=n, k=k) for n, k in ((2, 1), (3, 1), (3, 2), (3, 3), (4, 2)))
    shooting_radius: float = Field(0.8, gt=0)
    points: int = Field(100, ge=1)
    tolerance: float = 1e-8
    boundary_tol: float = 1e-12


class MinkowskiSuite(_Model):
    domains: tuple[DomainSpec, ...] = (
        DomainSpec(space="euclidean", dim=2, profile=ProfileSpec(kind="ball", radius=1.0)),
        DomainSpec(space="euclidean", dim=2, profile=ProfileSpec(kind="ellipsoid", axes=(1.3, 0.8))),
        DomainSpec(space="euclidean", dim=3, profile=ProfileSpec(kind="ellipsoid", axes=(1.2, 1.0, 0.8))),
        DomainSpec(space="hyperbolic", dim=2, profile=ProfileSpec(kind="ball", radius=0.8)),
        DomainSpec(space="hyperbolic", dim=2,
                   profile=ProfileSpec(kind="fourier", radius=0.8, coefficients=((3, 0.1, 0.0),))),
        DomainSpec(space="hyperbolic", dim=3, profile=ProfileSpec(kind="ball", radius=0.8)),
    )
    tolerance: Optional[float] = None


class PohozaevSuite(_Model):
    cases: tuple[SolutionCase, ...] = _EXACT_CASES
    negative_control: bool = True
    tolerance: Optional[float] = None


class BoundarySuite(_Model):
    cases: tuple[SolutionCase, ...] = _EXACT_CASES
    tolerance: Optional[float] = None


class PFunctionSuite(_Model):
    cases: tuple[SolutionCase, ...] = _EXACT_CASES
    points: int = Field(50, ge=1)
    spread_tol: float = 1e-9
    pairing_tol: float = 1e-5
    tolerance: Optional[float] = None


class CalculusSuite(_Model):
    fields: int = Field(20, ge=1)
    amplitude: float = Field(0.1, ge=0)
    domains: tuple[DomainSpec, ...] = (
        DomainSpec(space="euclidean", dim=2, profile=ProfileSpec(kind="ball", radius=1.0)),
        DomainSpec(space="hyperbolic", dim=2, profile=ProfileSpec(kind="ball", radius=0.7)),
        DomainSpec(space="euclidean", dim=3, profile=ProfileSpec(kind="ball", radius=0.9),
                   resolution=(12, 16, 32)),
        DomainSpec(space="hyperbolic", dim=3, profile=ProfileSpec(kind="ball", radius=0.7),
                   resolution=(12, 16, 32)),
    )
    tolerance: float = 1e-6


class RunConfig(_Model):
    seed: int = 0
    suites: tuple[Literal[SUITES], ...] = SUITES  # type: ignore[valid-type]
    output: Optional[str] = None
    format: Literal["json", "csv"] = "json"
    symfun: SymfunSuite = SymfunSuite()
    geometry: GeometrySuite = GeometrySuite()
    radial: RadialSuite = RadialSuite()
    minkowski: MinkowskiSuite = MinkowskiSuite()
    pohozaev: PohozaevSuite = PohozaevSuite()
    boundary: BoundarySuite = BoundarySuite()
    pfunction: PFunctionSuite = PFunctionSuite()
    calculus: CalculusSuite = CalculusSuite()

    @field_validator("suites")
    @classmethod
    def _unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("suite listed twice")
        return v


# ------------------------------------------------------------------ loading


def _line_map(node, path=(), out=None) -> dict:
    """Map field paths (tuples of keys / indices) to 1-based line numbers."""
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            sub = path + (key.value,)
            out[sub] = key.start_mark.line + 1
            _line_map(value, sub, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, value in enumerate(node.value):
            _line_map(value, path + (i,), out)
    return out


def _locate(loc: tuple, lines: dict) -> Optional[int]:
    loc = tuple(str(p) if not isinstance(p, int) else p for p in loc)
    for cut in range(len(loc), -1, -1):
        if loc[:cut] in lines:
            return lines[loc[:cut]]
    return None


def _format_errors(err: ValidationError, lines: dict, source: str) -> str:
    msgs = []
    for e in err.errors():
        loc = tuple(p for p in e["loc"] if not (isinstance(p, str) and p.startswith("function-")))
        field = ".".join(str(p) for p in loc) or "<root>"
        line = _locate(loc, lines)
        where = f"{source}:{line}" if line is not None else source
        msg = e["msg"].removeprefix("Value error, ")
        msgs.append(f"{where}: {field}: {msg}")
    return "\n".join(msgs)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate YAML text."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: malformed YAML: {exc}") from None
    if data is None:
        data, node = {}, None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    lines = _line_map(node) if node is not None else {}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, lines, source)) from None
    except ValueError as exc:  # raised while building domains
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


def config_echo(cfg: RunConfig) -> dict:
    """JSON-compatible dump of the effective configuration."""
    return cfg.model_dump(mode="json")
