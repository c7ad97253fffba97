"""Resource-bounded best responses: train one network against a mixture.

Each oracle starts from a fresh random network and runs a fixed budget of
Adam steps on a Monte Carlo estimate of its own payoff. Whatever that budget
reaches is, by definition, the best response the player can compute.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import neural
from .gang_model import (GangSpec, MixedNetStrategy, cell_rng, classifier_output,
                         sample_fakes, simulate_cell)
from .neural import NetworkParams, OptimizerConfig
from .synth_data import sample


def default_rbbr_opt() -> OptimizerConfig:
    return OptimizerConfig(kind="adam", learning_rate=1e-3, batch_size=128, iterations=1000)


@dataclass(frozen=True)
class RbbrConfig:
    opt: OptimizerConfig = field(default_factory=default_rbbr_opt)
    clf_subsample_count: int = 5
    uniform_fakes: bool = True
    # number of uniform fakes per batch, as a multiple of the generated fakes
    uniform_ratio: float = 1.0
    # "batch": box from each minibatch; "iteration": one box per oracle call
    uniform_box: str = "batch"
    # margin added around the box on each side, as a fraction of its span
    uniform_pad: float = 0.0
    gen_learning_rate: float | None = None
    warm_start: bool = False
    # generator follows the classifier logit even where the bounded log is flat
    gen_grad_through_clamp: bool = True

    def __post_init__(self):
        if self.clf_subsample_count < 1:
            raise ValueError("clf_subsample_count must be >= 1")
        if self.uniform_box not in ("batch", "iteration"):
            raise ValueError("uniform_box must be 'batch' or 'iteration'")
        if self.uniform_ratio < 0:
            raise ValueError("uniform_ratio must be non-negative")
        if self.gen_learning_rate is not None and self.gen_learning_rate < 0:
            raise ValueError("gen_learning_rate must be non-negative")

    @property
    def gen_opt(self) -> OptimizerConfig:
        if self.gen_learning_rate is None:
            return self.opt
        return replace(self.opt, learning_rate=self.gen_learning_rate)


@dataclass(frozen=True)
class BoundingBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if np.any(lo > hi):
            raise ValueError("bounding box min exceeds max")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def padded(self, fraction: float) -> "BoundingBox":
        span = self.hi - self.lo
        return BoundingBox(self.lo - fraction * span, self.hi + fraction * span)

    def contains(self, other: "BoundingBox") -> bool:
        return bool(np.all(self.lo <= other.lo) and np.all(self.hi >= other.hi))


def bounding_box(real_points, fake_points) -> BoundingBox:
    parts = [np.asarray(p, dtype=float).reshape(-1, 2) for p in (real_points, fake_points)]
    union = np.vstack(parts)
    if len(union) == 0:
        raise ValueError("cannot bound an empty point set")
    return BoundingBox(union.min(axis=0), union.max(axis=0))


def sample_uniform_fakes(box: BoundingBox, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    return box.lo + (box.hi - box.lo) * rng.random((n, box.lo.shape[0]))


def classifier_objective(spec: GangSpec, gen_mix: MixedNetStrategy, cfg: RbbrConfig,
                         fixed_box: BoundingBox | None = None):
    """Minibatch loss ``-u_C`` and its gradient for classifier training."""
    batch = cfg.opt.batch_size
    n_uniform = int(round(cfg.uniform_ratio * batch)) if cfg.uniform_fakes else 0
    phi = spec.phi

    def objective(params: NetworkParams, rng: np.random.Generator):
        reals = sample(spec.data, batch, rng)
        fakes = sample_fakes(gen_mix, spec.noise, batch, rng)
        if cfg.uniform_fakes:
            box = fixed_box if fixed_box is not None else bounding_box(reals, fakes).padded(cfg.uniform_pad)
            fakes = np.vstack([fakes, sample_uniform_fakes(box, n_uniform, rng)])
        n_fake = len(fakes)
        cache = neural.forward_cache(params, np.vstack([reals, fakes]))
        c = cache.outputs[:, 0]
        c_real, c_fake = c[:batch], c[batch:]
        payoff = phi(c_real).mean() - phi(c_fake).mean()
        d_out = np.concatenate([-phi.derivative(c_real) / batch,
                                phi.derivative(c_fake) / n_fake])[:, None]
        grad, _ = neural.backward(params, cache, d_out)
        return -float(payoff), grad

    return objective


def train_classifier_rbbr(spec: GangSpec, gen_mix: MixedNetStrategy, cfg: RbbrConfig,
                          rng: np.random.Generator, start: NetworkParams | None = None) -> NetworkParams:
    params = start if (cfg.warm_start and start is not None) else neural.init(spec.clf_spec, rng)
    fixed_box = None
    if cfg.uniform_fakes and cfg.uniform_box == "iteration":
        n = 10 * cfg.opt.batch_size
        fixed_box = bounding_box(sample(spec.data, n, rng),
                                 sample_fakes(gen_mix, spec.noise, n, rng)).padded(cfg.uniform_pad)
    objective = classifier_objective(spec, gen_mix, cfg, fixed_box)
    return neural.train(params, objective, cfg.opt, rng)


def generator_objective(spec: GangSpec, clf_mix: MixedNetStrategy, cfg: RbbrConfig):
    """Minibatch loss ``-mean_k E_z[phi(C_k(G(z)))]`` over subsampled classifiers."""
    batch = cfg.gen_opt.batch_size
    n_sub = cfg.clf_subsample_count
    phi = spec.phi

    def objective(params: NetworkParams, rng: np.random.Generator):
        picks = rng.choice(len(clf_mix), size=n_sub, p=clf_mix.weights)
        counts = np.bincount(picks, minlength=len(clf_mix))
        z = spec.noise.sample(batch, rng)
        g_cache = neural.forward_cache(params, z)
        x = g_cache.outputs
        d_x = np.zeros_like(x)
        value = 0.0
        for k in np.flatnonzero(counts):
            share = counts[k] / n_sub
            clf = clf_mix.members[k]
            c_cache = neural.forward_cache(clf, x)
            c = c_cache.outputs[:, 0]
            value += share * phi(c).mean()
            d_logit = (-share / batch) * phi.logit_derivative(c, cfg.gen_grad_through_clamp)[:, None]
            _, d_in = neural.backward(clf, c_cache, d_logit, need_input_grad=True, wrt_pre_activation=True)
            d_x += d_in
        grad, _ = neural.backward(params, g_cache, d_x)
        return -float(value), grad

    return objective


def train_generator_rbbr(spec: GangSpec, clf_mix: MixedNetStrategy, cfg: RbbrConfig,
                         rng: np.random.Generator, start: NetworkParams | None = None) -> NetworkParams:
    params = start if (cfg.warm_start and start is not None) else neural.init(spec.gen_spec, rng)
    return neural.train(params, generator_objective(spec, clf_mix, cfg), cfg.gen_opt, rng)


def response_payoffs(spec: GangSpec, gens: list[NetworkParams], clfs: list[NetworkParams],
                     new_gen: NetworkParams, new_clf: NetworkParams, n_samples: int,
                     master_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulated u_C of the new generator against every classifier (a new row)
    and of every generator against the new classifier (a new column).

    Cell seeds use the coordinates the cells would occupy after augmentation.
    """
    new_row = len(gens)
    new_col = len(clfs)
    row = np.array([simulate_cell(spec, new_gen, c, n_samples, cell_rng(master_seed, new_row, j))
                    for j, c in enumerate(clfs)])
    col = np.array([simulate_cell(spec, g, new_clf, n_samples, cell_rng(master_seed, i, new_col))
                    for i, g in enumerate(gens)])
    return row, col


def u_brs_from_payoffs(row: np.ndarray, col: np.ndarray, gen_weights, clf_weights) -> tuple[float, float, float]:
    """Return ``(u_BRs, u_G(new_gen, mu_C), u_C(mu_G, new_clf))``."""
    gen_br = -float(row @ np.asarray(clf_weights))
    clf_br = float(np.asarray(gen_weights) @ col)
    return gen_br + clf_br, gen_br, clf_br


def u_brs(spec: GangSpec, gen_mix: MixedNetStrategy, clf_mix: MixedNetStrategy,
          new_gen: NetworkParams, new_clf: NetworkParams, n_samples: int,
          rng: np.random.Generator) -> float:
    """Payoff for tests: both oracles' payoffs against the maintained mixtures, summed."""
    seed = int(rng.integers(2 ** 63))
    row, col = response_payoffs(spec, list(gen_mix.members), list(clf_mix.members),
                                new_gen, new_clf, n_samples, seed)
    return u_brs_from_payoffs(row, col, gen_mix.weights, clf_mix.weights)[0]
