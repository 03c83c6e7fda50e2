"""Request/response models for the job runner.

Only the named model families are expressible in JSON configs; a custom
characteristic exponent is a Python callable and stays a library-level
feature.
"""
from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from ._paths import MCConfig
from .harmonic import AvoidSet
from .levy_model import LevyModel
from .quadrature import QuadratureConfig


def _finite(name: str, v: float) -> float:
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite")
    return v


class ModelSpec(BaseModel):
    kind: Literal["brownian", "symmetric_stable", "asymmetric_stable"]
    sigma: float = 1.0
    alpha: float = 1.5
    beta: float = 0.0

    @model_validator(mode="after")
    def _check(self) -> "ModelSpec":
        if self.kind == "brownian":
            if not self.sigma > 0 or not math.isfinite(self.sigma):
                raise ValueError("sigma must be a positive finite number")
        else:
            if not 1.0 < self.alpha < 2.0:
                raise ValueError("alpha must lie strictly inside (1, 2)")
            if not -1.0 <= self.beta <= 1.0:
                raise ValueError("beta must lie in [-1, 1]")
            if self.kind == "symmetric_stable" and self.beta != 0.0:
                raise ValueError("symmetric_stable forces beta = 0")
        return self

    def build(self) -> LevyModel:
        if self.kind == "brownian":
            return LevyModel.brownian(self.sigma)
        if self.kind == "symmetric_stable":
            return LevyModel.symmetric_stable(self.alpha)
        return LevyModel.asymmetric_stable(self.alpha, self.beta)

    def label(self) -> str:
        if self.kind == "brownian":
            return f"brownian sigma={self.sigma!r}"
        return f"{self.kind} alpha={self.alpha!r} beta={self.beta!r}"


class SetSpec(BaseModel):
    kind: Literal["points", "intervals", "lattice"]
    points: Optional[list[float]] = None
    intervals: Optional[list[tuple[float, float]]] = None
    spacing: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "SetSpec":
        if self.kind == "points":
            if not self.points:
                raise ValueError("points must be a nonempty list")
            for p in self.points:
                _finite("points", p)
        elif self.kind == "intervals":
            if not self.intervals:
                raise ValueError("intervals must be a nonempty list")
            for lo, hi in self.intervals:
                _finite("intervals", lo)
                _finite("intervals", hi)
        else:
            if self.spacing is None or not self.spacing > 0:
                raise ValueError("spacing must be a positive number")
            _finite("spacing", self.spacing)
        return self

    def build(self) -> AvoidSet:
        if self.kind == "points":
            return AvoidSet.from_points(self.points)
        if self.kind == "intervals":
            return AvoidSet.from_intervals(self.intervals)
        return AvoidSet.from_lattice(self.spacing)


class GridSpec(BaseModel):
    """Evaluation abscissae: either an explicit list or a uniform range."""

    points: Optional[list[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = None

    @model_validator(mode="after")
    def _check(self) -> "GridSpec":
        explicit = self.points is not None
        ranged = (
            self.start is not None or self.stop is not None or self.num is not None
        )
        if explicit == ranged:
            raise ValueError("give either points or start/stop/num, not both")
        if explicit:
            if not self.points:
                raise ValueError("points must be nonempty")
            for p in self.points:
                _finite("points", p)
        else:
            if self.start is None or self.stop is None or self.num is None:
                raise ValueError("start, stop and num are all required")
            _finite("start", self.start)
            _finite("stop", self.stop)
            if self.num < 2 or self.num > 100_000:
                raise ValueError("num must lie in [2, 100000]")
            if not self.stop > self.start:
                raise ValueError("stop must exceed start")
        return self

    def values(self) -> list[float]:
        if self.points is not None:
            return [float(p) for p in self.points]
        step = (self.stop - self.start) / (self.num - 1)
        return [self.start + i * step for i in range(self.num)]


class MCSpec(BaseModel):
    n_paths: int = Field(default=100_000, ge=1, le=10_000_000)
    delta: float = Field(default=1e-3, gt=0)
    t_max: float = Field(default=50.0, gt=0)
    root_seed: int = Field(default=1, ge=0)

    def build(self) -> MCConfig:
        return MCConfig(
            n_paths=self.n_paths, delta=self.delta,
            t_max=self.t_max, root_seed=self.root_seed,
        )


class QuadSpec(BaseModel):
    abs_tol: float = Field(default=1e-9, gt=0)
    rel_tol: float = Field(default=1e-7, gt=0)

    def build(self) -> QuadratureConfig:
        return QuadratureConfig(abs_tol=self.abs_tol, rel_tol=self.rel_tol)


class ClockBlock(BaseModel):
    kind: Literal["exponential", "one_point", "two_point", "inverse_local_time"]
    grid: list[float]
    u: float = Field(default=0.0, ge=0)

    @field_validator("grid")
    @classmethod
    def _grid_finite(cls, v: list[float]) -> list[float]:
        if len(v) < 2:
            raise ValueError("grid needs at least two values")
        for g in v:
            _finite("grid", g)
        return v


_JOBS = ("TabulateH", "TabulatePhi", "VerifyClocks",
         "Simulate", "Diagnose", "CheckModel")


class JobConfig(BaseModel):
    job: Literal[_JOBS]  # type: ignore[valid-type]
    model: ModelSpec
    set: Optional[SetSpec] = None
    gamma: float = 0.0
    grid: Optional[GridSpec] = None
    x0: Optional[float] = None
    times: Optional[list[float]] = None
    clock: Optional[ClockBlock] = None
    mc: MCSpec = MCSpec()
    quad: QuadSpec = QuadSpec()
    rejection_q: float = Field(default=1e-3, gt=0)

    @field_validator("gamma")
    @classmethod
    def _gamma_range(cls, v: float) -> float:
        if not -1.0 <= v <= 1.0:
            raise ValueError("gamma must lie in [-1, 1]")
        return v

    @field_validator("times")
    @classmethod
    def _times_ok(cls, v):
        if v is not None:
            if not v:
                raise ValueError("times must be nonempty")
            for t in v:
                _finite("times", t)
                if t < 0:
                    raise ValueError("times must be nonnegative")
        return v

    @model_validator(mode="after")
    def _per_job(self) -> "JobConfig":
        need = {
            "TabulateH": ("grid",),
            "TabulatePhi": ("set", "grid"),
            "VerifyClocks": ("set", "x0", "clock"),
            "Simulate": ("set", "x0", "times"),
            "Diagnose": ("set", "x0"),
            "CheckModel": (),
        }[self.job]
        for field in need:
            if getattr(self, field) is None:
                raise ValueError(f"{field} is required for job {self.job}")
        if self.job == "VerifyClocks" and self.set.kind != "points":
            raise ValueError("VerifyClocks requires a points set")
        if self.job in ("Simulate", "Diagnose"):
            if self.set.kind == "intervals":
                raise ValueError(
                    "set: snapshot jobs need a pointwise-evaluable phi; "
                    "interval sets are estimator-only (use TabulatePhi)"
                )
            if self.set.kind == "lattice" and self.model.kind != "brownian":
                raise ValueError(
                    "set: lattice snapshot weights are closed-form only "
                    "for brownian"
                )
        return self


class RunRequest(BaseModel):
    config: JobConfig
    seed_override: Optional[int] = Field(default=None, ge=0)
    threads: Optional[int] = Field(default=None, ge=1, le=256)


class OutputFile(BaseModel):
    name: str
    kind: Literal["csv", "json"]
    content: str


class RunResponse(BaseModel):
    job: str
    ok: bool
    exit_code: int
    outputs: list[OutputFile] = []
    warnings: list[str] = []
    error: Optional[str] = None
