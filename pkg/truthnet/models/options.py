"""Solver options and run configuration."""
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from truthnet.errors import CliUsageError

Method = Literal["visit", "svisit", "majority"]


class LaplaceOptions(BaseModel):
    """Backtracking gradient ascent used for every Laplace mode search."""
    max_steps: int = Field(default=50, ge=0)
    grad_tol: float = Field(default=1e-6, gt=0)
    initial_step: float = Field(default=1.0, gt=0)
    shrink: float = Field(default=0.5, gt=0, lt=1)
    armijo: float = Field(default=1e-4, gt=0, lt=1)
    max_backtracks: int = Field(default=60, ge=1)


class VisitOptions(BaseModel):
    """Batch solver settings.

    ``warmup_sweeps`` sweeps run before the first iteration with the event
    beliefs held at their vote-count start; ``mu_rounds`` is the number of
    community confusion refits per iteration, each after the first preceded
    by a refresh of every agent confusion.
    """
    max_iters: int = Field(default=200, ge=1)
    tol: float = Field(default=1e-4, gt=0)
    warmup_sweeps: int = Field(default=10, ge=0)
    mu_rounds: int = Field(default=3, ge=1)
    laplace: LaplaceOptions = Field(default_factory=LaplaceOptions)
    parallel_sweep: bool = False
    workers: int = Field(default=4, ge=1)
    seed: int = Field(default=0, ge=0)


class StepSchedule(BaseModel):
    """Robbins-Monro power schedule rho(i) = (i + tau)^(-kappa)."""
    tau: float = Field(default=1.0, ge=0)
    kappa: float = Field(default=0.7, gt=0.5, le=1.0)


class SvisitOptions(BaseModel):
    """Stochastic solver settings; the first ``warmup_iters`` iterations leave the event beliefs alone."""
    agent_batch: Optional[int] = Field(default=None, ge=1)
    pair_batch: Optional[int] = Field(default=None, ge=1)
    schedule: StepSchedule = Field(default_factory=StepSchedule)
    max_iters: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-4, gt=0)
    smoothing: float = Field(default=0.9, ge=0, lt=1)
    inner_mu_steps: int = Field(default=10, ge=0)
    warmup_iters: int = Field(default=50, ge=0)
    unbiased_pair_scaling: bool = False
    laplace: LaplaceOptions = Field(default_factory=LaplaceOptions)
    seed: int = Field(default=0, ge=0)


class RunConfig(BaseModel):
    """One ``infer`` invocation: a method plus exactly one data source."""
    method: Method
    preset: Optional[str] = None
    observations: Optional[str] = None
    network: Optional[str] = None
    seed: int = Field(default=0, ge=0)
    output_dir: str

    @model_validator(mode="after")
    def check_single_source(self):
        from_files = self.observations is not None
        if from_files == (self.preset is not None):
            raise CliUsageError("give exactly one data source: --preset or --observations/--network")
        if from_files and self.network is None:
            raise CliUsageError("--observations requires --network")
        return self


class SweepSpec(BaseModel):
    """``name=v1,v2,...`` over one numeric generator field."""
    field: str
    values: List[float]

    @field_validator("values")
    @classmethod
    def non_empty(cls, v):
        if not v:
            raise ValueError("sweep needs at least one value")
        return v

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        name, sep, raw = text.partition("=")
        if not sep:
            raise CliUsageError(f"sweep must look like name=v1,v2: {text!r}")
        try:
            values = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError as exc:
            raise CliUsageError(f"bad sweep values in {text!r}") from exc
        return cls(field=name.strip(), values=values)
