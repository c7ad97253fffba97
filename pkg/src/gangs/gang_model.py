"""The generator/classifier game: measuring functions and simulated payoffs.

The classifier's payoff for a generator/classifier pair is

    u_C = E_{x ~ data}[phi(C(x))] - E_{z ~ noise}[phi(C(G(z)))]

and the generator receives exactly ``-u_C``. Payoffs are estimated by Monte
Carlo; cells of the payoff matrix get their own seed derived from the master
seed and the cell coordinates, so a matrix is reproducible in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neural
from .neural import MlpSpec, NetworkParams
from .synth_data import GaussianMixture, NoiseDist, sample

DEFAULT_CELL_SAMPLES = 10_000


@dataclass(frozen=True)
class MeasuringFn:
    kind: str = "bounded_log"
    delta: float = 1e-5

    def __post_init__(self):
        if self.kind not in ("log", "bounded_log", "identity"):
            raise ValueError(f"unknown measuring function {self.kind!r}")
        if self.kind == "bounded_log" and not 0 < self.delta < 0.5:
            raise ValueError("bounded_log delta must lie in (0, 0.5)")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "identity":
            return v
        if self.kind == "log":
            if np.any(v <= 0):
                raise ValueError("log measure is undefined at 0; use bounded_log")
            return np.log(v)
        return np.log(np.clip(v, self.delta, 1.0))

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "identity":
            return np.ones_like(v)
        if self.kind == "log":
            return 1.0 / v
        # the clamp is flat below delta
        return np.where(v > self.delta, 1.0 / np.maximum(v, self.delta), 0.0)

    def logit_derivative(self, v, through_clamp: bool = False):
        """d phi(sigmoid(l)) / d l expressed through v = sigmoid(l).

        ``through_clamp`` ignores the flat region of the bounded log and
        returns the plain log's slope ``1 - v`` everywhere.
        """
        v = np.asarray(v, dtype=float)
        if self.kind == "identity":
            return v * (1.0 - v)
        if self.kind == "log" or through_clamp:
            return 1.0 - v
        return np.where(v > self.delta, 1.0 - v, 0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "delta": self.delta}


def measure(phi: MeasuringFn, v) -> float | np.ndarray:
    out = phi(v)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GangSpec:
    data: GaussianMixture
    noise: NoiseDist = field(default_factory=NoiseDist)
    gen_spec: MlpSpec = field(default_factory=neural.generator_spec)
    clf_spec: MlpSpec = field(default_factory=neural.classifier_spec)
    phi: MeasuringFn = field(default_factory=MeasuringFn)

    def __post_init__(self):
        if self.gen_spec.n_outputs != self.data.dim:
            raise ValueError("generator output width must equal the data dimension")
        if self.gen_spec.n_inputs != self.noise.dim:
            raise ValueError("generator input width must equal the noise dimension")
        if self.gen_spec.activations[-1] != "linear":
            raise ValueError("generator output layer must be linear")
        if self.clf_spec.n_inputs != self.data.dim:
            raise ValueError("classifier input width must equal the data dimension")
        if self.clf_spec.n_outputs != 1 or self.clf_spec.activations[-1] != "sigmoid":
            raise ValueError("classifier must end in a single sigmoid unit")


@dataclass(frozen=True, eq=False)
class MixedNetStrategy:
    members: tuple[NetworkParams, ...]
    weights: np.ndarray

    def __post_init__(self):
        members = tuple(self.members)
        w = np.asarray(self.weights, dtype=float).ravel()
        if not members or len(members) != len(w):
            raise ValueError("mixture needs matching, non-empty member and weight lists")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must form a probability vector")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", w / w.sum())

    @classmethod
    def pure(cls, params: NetworkParams) -> "MixedNetStrategy":
        return cls((params,), np.ones(1))

    def __len__(self) -> int:
        return len(self.members)

    def support(self, threshold: float = 0.0) -> list[int]:
        return [i for i, w in enumerate(self.weights) if w > threshold]


def classifier_output(clf: NetworkParams, points) -> np.ndarray:
    out = neural.forward(clf, points)[:, 0]
    if not np.all(np.isfinite(out)):
        raise neural.NonFiniteError("classifier produced non-finite output")
    return out


def sample_fakes(gen_mix: MixedNetStrategy, noise: NoiseDist, n: int,
                 rng: np.random.Generator, return_members: bool = False):
    """Draw ``n`` points: pick a member per draw by weight, then push noise through it."""
    who = rng.choice(len(gen_mix), size=n, p=gen_mix.weights)
    z = noise.sample(n, rng)
    out = np.empty((n, gen_mix.members[0].spec.n_outputs))
    for k in np.unique(who):
        sel = who == k
        out[sel] = neural.forward(gen_mix.members[k], z[sel])
    if not np.all(np.isfinite(out)):
        raise neural.NonFiniteError("generator produced non-finite output")
    if return_members:
        return out, who
    return out


def payoff_classifier_mc(spec: GangSpec, gen_mix: MixedNetStrategy, clf: NetworkParams,
                         n_samples: int, rng: np.random.Generator,
                         return_stderr: bool = False):
    """Monte Carlo estimate of u_C(gen_mix, clf)."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    reals = sample(spec.data, n_samples, rng)
    fakes = sample_fakes(gen_mix, spec.noise, n_samples, rng)
    real_terms = spec.phi(classifier_output(clf, reals))
    fake_terms = spec.phi(classifier_output(clf, fakes))
    value = float(real_terms.mean() - fake_terms.mean())
    if return_stderr:
        se = float(np.sqrt(real_terms.var(ddof=1) / n_samples + fake_terms.var(ddof=1) / n_samples)) \
            if n_samples > 1 else float("inf")
        return value, se
    return value


def payoff_generator_mc(spec: GangSpec, gen_mix: MixedNetStrategy, clf: NetworkParams,
                        n_samples: int, rng: np.random.Generator) -> float:
    return -payoff_classifier_mc(spec, gen_mix, clf, n_samples, rng)


def simulate_cell(spec: GangSpec, gen: NetworkParams, clf: NetworkParams, n_samples: int,
                  rng: np.random.Generator) -> float:
    return payoff_classifier_mc(spec, MixedNetStrategy.pure(gen), clf, n_samples, rng)


def cell_rng(master_seed: int, row: int, col: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), 0xCE11, int(row), int(col)]))


def classifier_payoff_crn(spec: GangSpec, gen_mix: MixedNetStrategy, clf: NetworkParams,
                          reals: np.ndarray, noise: np.ndarray) -> float:
    """u_C with common random numbers: every member sees the same noise batch.

    The fake term is the weight-averaged per-member mean, so the estimate is
    exactly linear in the mixture weights.
    """
    real_term = spec.phi(classifier_output(clf, reals)).mean()
    fake_terms = np.array([spec.phi(classifier_output(clf, neural.forward(g, noise))).mean()
                           for g in gen_mix.members])
    return float(real_term - gen_mix.weights @ fake_terms)


def mixture_classifier_output(clf_mix: MixedNetStrategy, points) -> np.ndarray:
    outs = np.stack([classifier_output(c, points) for c in clf_mix.members])
    return clf_mix.weights @ outs


def fake_term(spec: GangSpec, clf: NetworkParams, fakes) -> float:
    """E[phi(C(G(z)))] over a batch of generated points."""
    return float(spec.phi(classifier_output(clf, fakes)).mean())

