"""A plain single-network GAN, trained by alternating gradient steps.

This is the control for the PNM experiments. The classifier ascends

    E_x[phi(C(x))] + E_z[phi(1 - C(G(z)))]

and the generator ascends ``E_z[phi(C(G(z)))]`` (the non-saturating form).
Classifier outputs are clamped to ``[clamp, 1]`` before ``phi`` so the plain
log never sees an exact zero. Gradients are taken with respect to the
classifier logit, which keeps them finite even where the sigmoid saturates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import neural
from .gang_model import GangSpec, MeasuringFn
from .neural import NetworkParams, OptimizerConfig, TrainingError
from .synth_data import sample


def default_gan_opt() -> OptimizerConfig:
    return OptimizerConfig(kind="adam", learning_rate=2e-4, batch_size=64, iterations=2500)


@dataclass(frozen=True)
class GanConfig:
    gen_opt: OptimizerConfig = field(default_factory=default_gan_opt)
    clf_opt: OptimizerConfig = field(default_factory=default_gan_opt)
    phi: MeasuringFn = field(default_factory=lambda: MeasuringFn("log"))
    clamp: float = 1e-7
    # classifier steps taken before each generator step
    clf_steps_per_gen_step: int = 1

    def __post_init__(self):
        if not 0 < self.clamp < 0.5:
            raise ValueError("clamp must lie in (0, 0.5)")
        if self.clf_steps_per_gen_step < 1:
            raise ValueError("clf_steps_per_gen_step must be >= 1")


@dataclass
class GanHistory:
    """Per generator step: the classifier loss of its last step and the generator loss."""
    clf_loss: list[float] = field(default_factory=list)
    gen_loss: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.gen_loss)


def measured(cfg: GanConfig, v) -> np.ndarray:
    return cfg.phi(np.clip(np.asarray(v, dtype=float), cfg.clamp, 1.0))


def generator_value(cfg: GanConfig, clf: NetworkParams, fakes) -> float:
    """E[phi(C(G(z)))] over a batch of generated points."""
    return float(measured(cfg, neural.forward(clf, fakes)[:, 0]).mean())


def _logit_slope(phi: MeasuringFn, v: np.ndarray) -> np.ndarray:
    # d phi(sigmoid(l)) / dl, ignoring the clamp
    return phi.logit_derivative(v, through_clamp=True)


def classifier_step_objective(spec: GangSpec, gen: NetworkParams, cfg: GanConfig):
    batch = cfg.clf_opt.batch_size

    def objective(clf: NetworkParams, rng: np.random.Generator):
        reals = sample(spec.data, batch, rng)
        fakes = neural.forward(gen, spec.noise.sample(batch, rng))
        cache = neural.forward_cache(clf, np.vstack([reals, fakes]))
        c = cache.outputs[:, 0]
        c_real, c_fake = c[:batch], c[batch:]
        value = measured(cfg, c_real).mean() + measured(cfg, 1.0 - c_fake).mean()
        # phi(1 - sigmoid(l)) = phi(sigmoid(-l)), hence the sign flip
        d_logit = np.concatenate([-_logit_slope(cfg.phi, c_real),
                                  _logit_slope(cfg.phi, 1.0 - c_fake)]) / batch
        grad, _ = neural.backward(clf, cache, d_logit[:, None], wrt_pre_activation=True)
        return -float(value), grad

    return objective


def generator_step_objective(spec: GangSpec, clf: NetworkParams, cfg: GanConfig):
    batch = cfg.gen_opt.batch_size

    def objective(gen: NetworkParams, rng: np.random.Generator):
        g_cache = neural.forward_cache(gen, spec.noise.sample(batch, rng))
        c_cache = neural.forward_cache(clf, g_cache.outputs)
        c = c_cache.outputs[:, 0]
        d_logit = -_logit_slope(cfg.phi, c)[:, None] / batch
        _, d_x = neural.backward(clf, c_cache, d_logit, need_input_grad=True, wrt_pre_activation=True)
        grad, _ = neural.backward(gen, g_cache, d_x)
        return -float(measured(cfg, c).mean()), grad

    return objective


def train_gan(spec: GangSpec, cfg: GanConfig, rng: np.random.Generator,
              gen: NetworkParams | None = None, clf: NetworkParams | None = None):
    """Alternate classifier and generator steps; return ``(gen, clf, history)``.

    The loop runs ``gen_opt.iterations`` generator steps, each preceded by
    ``clf_steps_per_gen_step`` classifier steps until ``clf_opt.iterations``
    classifier steps have been spent.
    """
    gen = gen if gen is not None else neural.init(spec.gen_spec, rng)
    clf = clf if clf is not None else neural.init(spec.clf_spec, rng)
    g_opt = neural.Optimizer(cfg.gen_opt, spec.gen_spec.n_params)
    c_opt = neural.Optimizer(cfg.clf_opt, spec.clf_spec.n_params)
    history = GanHistory()
    clf_steps = 0
    clf_loss = float("nan")
    for step in range(cfg.gen_opt.iterations):
        try:
            for _ in range(cfg.clf_steps_per_gen_step):
                if clf_steps >= cfg.clf_opt.iterations:
                    break
                clf_loss, grad = classifier_step_objective(spec, gen, cfg)(clf, rng)
                _check(clf_loss, grad, step, "classifier")
                clf = clf.with_values(c_opt.step(clf.values, grad))
                clf_steps += 1
            gen_loss, grad = generator_step_objective(spec, clf, cfg)(gen, rng)
            _check(gen_loss, grad, step, "generator")
        except neural.NonFiniteError as exc:
            raise TrainingError(str(exc), step) from exc
        gen = gen.with_values(g_opt.step(gen.values, grad))
        history.clf_loss.append(clf_loss)
        history.gen_loss.append(gen_loss)
    return gen, clf, history


def _check(loss: float, grad: np.ndarray, step: int, who: str) -> None:
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise TrainingError(f"{who} loss or gradient became non-finite", step)


def save_gan(gen: NetworkParams, clf: NetworkParams, history: GanHistory, directory) -> None:
    """Write the two networks and the loss history in the PNM checkpoint layout."""
    d = Path(directory)
    (d / "generators").mkdir(parents=True, exist_ok=True)
    (d / "classifiers").mkdir(parents=True, exist_ok=True)
    neural.save_params(gen, d / "generators" / "gen_0000.txt")
    neural.save_params(clf, d / "classifiers" / "clf_0000.txt")
    lines = [json.dumps({"step": i, "clf_loss": c, "gen_loss": g})
             for i, (c, g) in enumerate(zip(history.clf_loss, history.gen_loss))]
    (d / "history.jsonl").write_text("".join(line + "\n" for line in lines))


def load_gan(directory) -> tuple[NetworkParams, NetworkParams, GanHistory]:
    d = Path(directory)
    gen = neural.load_params(d / "generators" / "gen_0000.txt")
    clf = neural.load_params(d / "classifiers" / "clf_0000.txt")
    history = GanHistory()
    for line in (d / "history.jsonl").read_text().splitlines():
        if line:
            rec = json.loads(line)
            history.clf_loss.append(rec["clf_loss"])
            history.gen_loss.append(rec["gen_loss"])
    return gen, clf, history
