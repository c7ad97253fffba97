"""Run configuration: a YAML document validated by pydantic models.

Every key is optional; omitted keys take the defaults below, which encode
the standard training settings (GAN: 2500 steps, lr 2e-4, batch 64, log
measure; RBBR: 1000 steps, lr 1e-3, batch 128, 1e-5-bounded log). Unknown
keys are rejected. Grammar, with defaults::

    mode: pnm                  # pnm | gan | solve-matrix | pnm-matrix | eval
    seed: 0
    out_dir: run
    data:   {kind: grid, k: 9, spacing: 2.0, sigma: 0.05}
    gang:
      noise:      {dim: 2, kind: standard_normal, half_width: 1.0}
      generator:  {hidden: [64, 64], activation: relu}
      classifier: {hidden: [64, 64], activation: relu}
      phi:        {kind: bounded_log, delta: 1.0e-5}
    pnm:
      max_iterations: 15
      cell_samples: 10000
      ignore_non_positive: true
      rbbr: {optimizer: adam, iterations: 1000, learning_rate: 0.001, batch_size: 128,
             clf_subsample_count: 5, uniform_fakes: true, uniform_ratio: 1.0,
             uniform_box: batch, uniform_pad: 0.0, gen_learning_rate: null,
             warm_start: false, gen_grad_through_clamp: true}
    gan: {optimizer: adam, iterations: 2500, learning_rate: 0.0002, batch_size: 64,
          phi: log, clamp: 1.0e-7, clf_steps_per_gen_step: 1}
    matrix: null               # payoff CSV for solve-matrix / pnm-matrix
    eval: {checkpoint: null, kind: pnm, n_samples: 2500, k_sigma: 3.0, resolution: 60}
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .baseline_gan import GanConfig
from .gang_model import GangSpec, MeasuringFn
from .neural import MlpSpec, OptimizerConfig
from .pnm import PnmConfig
from .rbbr import RbbrConfig
from .synth_data import NoiseDist, mixture_from_config

MODES = ("pnm", "gan", "solve-matrix", "pnm-matrix", "eval")


class ConfigError(ValueError):
    """Raised for unreadable, malformed or invalid configuration."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataSection(_Section):
    kind: Literal["grid", "annulus", "random"] = "grid"
    k: int = Field(9, ge=1)
    spacing: float = Field(2.0, gt=0)
    radius: float = Field(2.0, gt=0)
    sigma: float = Field(0.05, gt=0)
    seed: int = 0
    location_scale: float = Field(2.0, gt=0)
    cov_scale: float = Field(0.05, gt=0)

    def build(self):
        return mixture_from_config(self.model_dump())


class NoiseSection(_Section):
    dim: int = Field(2, ge=1)
    kind: Literal["standard_normal", "uniform_cube"] = "standard_normal"
    half_width: float = Field(1.0, gt=0)


class NetSection(_Section):
    hidden: list[int] = Field(default_factory=lambda: [64, 64])
    activation: Literal["relu", "tanh", "sigmoid", "linear"] = "relu"

    def mlp(self, n_in: int, n_out: int, out_activation: str) -> MlpSpec:
        sizes = (n_in, *self.hidden, n_out)
        return MlpSpec(sizes, (self.activation,) * len(self.hidden) + (out_activation,))


class PhiSection(_Section):
    kind: Literal["log", "bounded_log", "identity"] = "bounded_log"
    delta: float = Field(1e-5, gt=0, lt=0.5)


class GangSection(_Section):
    noise: NoiseSection = Field(default_factory=NoiseSection)
    generator: NetSection = Field(default_factory=NetSection)
    classifier: NetSection = Field(default_factory=NetSection)
    phi: PhiSection = Field(default_factory=PhiSection)


class RbbrSection(_Section):
    optimizer: Literal["adam", "sgd"] = "adam"
    iterations: int = Field(1000, ge=0)
    learning_rate: float = Field(1e-3, gt=0)
    batch_size: int = Field(128, ge=1)
    clf_subsample_count: int = Field(5, ge=1)
    uniform_fakes: bool = True
    uniform_ratio: float = Field(1.0, ge=0)
    uniform_box: Literal["batch", "iteration"] = "batch"
    uniform_pad: float = Field(0.0, ge=0)
    gen_learning_rate: Optional[float] = Field(None, gt=0)
    warm_start: bool = False
    gen_grad_through_clamp: bool = True

    def build(self) -> RbbrConfig:
        opt = OptimizerConfig(kind=self.optimizer, learning_rate=self.learning_rate,
                              batch_size=self.batch_size, iterations=self.iterations)
        return RbbrConfig(opt=opt, clf_subsample_count=self.clf_subsample_count,
                          uniform_fakes=self.uniform_fakes, uniform_ratio=self.uniform_ratio,
                          uniform_box=self.uniform_box, uniform_pad=self.uniform_pad,
                          gen_learning_rate=self.gen_learning_rate, warm_start=self.warm_start,
                          gen_grad_through_clamp=self.gen_grad_through_clamp)


class PnmSection(_Section):
    max_iterations: int = Field(15, ge=1)
    cell_samples: int = Field(10_000, ge=1)
    ignore_non_positive: bool = True
    rbbr: RbbrSection = Field(default_factory=RbbrSection)


class GanSection(_Section):
    optimizer: Literal["adam", "sgd"] = "adam"
    iterations: int = Field(2500, ge=0)
    learning_rate: float = Field(2e-4, gt=0)
    batch_size: int = Field(64, ge=1)
    phi: Literal["log", "bounded_log", "identity"] = "log"
    clamp: float = Field(1e-7, gt=0, lt=0.5)
    clf_steps_per_gen_step: int = Field(1, ge=1)

    def build(self) -> GanConfig:
        opt = OptimizerConfig(kind=self.optimizer, learning_rate=self.learning_rate,
                              batch_size=self.batch_size, iterations=self.iterations)
        return GanConfig(gen_opt=opt, clf_opt=opt, phi=MeasuringFn(self.phi, self.clamp),
                         clamp=self.clamp, clf_steps_per_gen_step=self.clf_steps_per_gen_step)


class EvalSection(_Section):
    checkpoint: Optional[str] = None
    kind: Literal["pnm", "gan"] = "pnm"
    n_samples: int = Field(2500, ge=1)
    k_sigma: float = Field(3.0, gt=0)
    resolution: int = Field(60, ge=2)


class RunConfig(_Section):
    mode: Literal["pnm", "gan", "solve-matrix", "pnm-matrix", "eval"] = "pnm"
    seed: int = Field(0, ge=0)
    out_dir: str = "run"
    data: DataSection = Field(default_factory=DataSection)
    gang: GangSection = Field(default_factory=GangSection)
    pnm: PnmSection = Field(default_factory=PnmSection)
    gan: GanSection = Field(default_factory=GanSection)
    matrix: Optional[str] = None
    eval: EvalSection = Field(default_factory=EvalSection)

    @model_validator(mode="after")
    def _mode_inputs(self):
        if self.mode in ("solve-matrix", "pnm-matrix") and self.matrix is None:
            raise ValueError(f"mode {self.mode} needs 'matrix' (path to a payoff CSV)")
        if self.mode == "eval" and self.eval.checkpoint is None:
            raise ValueError("mode eval needs 'eval.checkpoint'")
        return self

    def gang_spec(self) -> GangSpec:
        mix = self.data.build()
        g = self.gang
        noise = NoiseDist(g.noise.dim, g.noise.kind, g.noise.half_width)
        return GangSpec(
            data=mix,
            noise=noise,
            gen_spec=g.generator.mlp(noise.dim, mix.dim, "linear"),
            clf_spec=g.classifier.mlp(mix.dim, 1, "sigmoid"),
            phi=MeasuringFn(g.phi.kind, g.phi.delta),
        )

    def pnm_config(self, oracle: str = "neural") -> PnmConfig:
        p = self.pnm
        return PnmConfig(max_iterations=p.max_iterations, oracle=oracle, rbbr=p.rbbr.build(),
                         cell_samples=p.cell_samples, master_seed=self.seed,
                         ignore_non_positive=p.ignore_non_positive)

    def gan_config(self) -> GanConfig:
        return self.gan.build()


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def from_dict(raw) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from None


def parse_text(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{source}: parse error at {where}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from None
    try:
        return from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_text(text, str(path))


def serialize(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)
