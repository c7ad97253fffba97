"""Toy 2-D Gaussian mixtures (grids, rings, random blobs) and noise priors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float).reshape(len(w), -1)
        cov = np.asarray(self.covs, dtype=float).reshape(len(w), mu.shape[1], mu.shape[1])
        if len(w) < 1:
            raise ValueError("mixture needs at least one component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be a probability vector")
        if not np.allclose(cov, np.swapaxes(cov, 1, 2)):
            raise ValueError("covariances must be symmetric")
        chol = np.linalg.cholesky(cov)  # raises LinAlgError if not SPD
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_chol_inv", np.linalg.inv(chol))

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        mu = self.mean()
        centred = self.means - mu
        return np.einsum("k,kij->ij", self.weights, self.covs) + (self.weights[:, None] * centred).T @ centred


def _equal_weights(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def make_grid(k: int = 9, spacing: float = 2.0, sigma: float = 0.05) -> GaussianMixture:
    side = math.isqrt(k)
    if side * side != k:
        raise ValueError(f"grid size must be a perfect square, got {k}")
    if spacing <= 0 or sigma <= 0:
        raise ValueError("spacing and sigma must be positive")
    ticks = (np.arange(side) - (side - 1) / 2.0) * spacing
    means = np.array([(x, y) for x in ticks for y in ticks])
    covs = np.repeat((sigma ** 2 * np.eye(2))[None], k, axis=0)
    return GaussianMixture(_equal_weights(k), means, covs)


def make_annulus(k: int = 9, radius: float = 2.0, sigma: float = 0.05) -> GaussianMixture:
    if k < 1 or radius <= 0 or sigma <= 0:
        raise ValueError("need k >= 1 and positive radius/sigma")
    angles = 2 * np.pi * np.arange(k) / k
    means = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    covs = np.repeat((sigma ** 2 * np.eye(2))[None], k, axis=0)
    return GaussianMixture(_equal_weights(k), means, covs)


def make_random(k: int, rng: np.random.Generator, location_scale: float = 2.0,
                cov_scale: float = 0.05) -> GaussianMixture:
    """Uniformly placed modes, each with covariance ``A A^T + 0.01 * cov_scale * I``."""
    if location_scale <= 0 or cov_scale <= 0:
        raise ValueError("scales must be positive")
    means = rng.uniform(-location_scale, location_scale, size=(k, 2))
    a = rng.normal(0.0, cov_scale, size=(k, 2, 2))
    covs = a @ np.swapaxes(a, 1, 2) + 0.01 * cov_scale * np.eye(2)
    return GaussianMixture(_equal_weights(k), means, covs)


def sample(mix: GaussianMixture, n: int, rng: np.random.Generator,
           return_labels: bool = False):
    if n < 0:
        raise ValueError("n must be non-negative")
    comps = rng.choice(mix.k, size=n, p=mix.weights)
    xi = rng.standard_normal((n, mix.dim))
    points = mix.means[comps] + np.einsum("nij,nj->ni", mix.cholesky[comps], xi)
    if return_labels:
        return points, comps
    return points


def mahalanobis(points, mix: GaussianMixture) -> np.ndarray:
    """Distances of shape (n, k) from each point to each component."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    diff = p[:, None, :] - mix.means[None, :, :]
    white = np.einsum("kij,nkj->nki", mix._chol_inv, diff)
    return np.sqrt(np.sum(white ** 2, axis=-1))


def assign_modes(points, mix: GaussianMixture, k_sigma: float = 3.0) -> np.ndarray:
    """Vectorised ``mode_assignment``; unassigned points get -1."""
    if k_sigma <= 0:
        raise ValueError("k_sigma must be positive")
    p = np.asarray(points, dtype=float).reshape(-1, mix.dim)
    if len(p) == 0:
        return np.zeros(0, dtype=int)
    d = mahalanobis(p, mix)
    best = np.argmin(d, axis=1)
    ok = d[np.arange(len(p)), best] <= k_sigma
    return np.where(ok, best, -1)


def mode_assignment(point, mix: GaussianMixture, k_sigma: float = 3.0) -> int | None:
    idx = int(assign_modes(np.asarray(point, dtype=float).reshape(1, -1), mix, k_sigma)[0])
    return None if idx < 0 else idx


@dataclass(frozen=True)
class NoiseDist:
    dim: int = 2
    kind: str = "standard_normal"
    half_width: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("noise dimension must be positive")
        if self.kind not in ("standard_normal", "uniform_cube"):
            raise ValueError(f"unknown noise kind {self.kind!r}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "standard_normal":
            return rng.standard_normal((n, self.dim))
        return rng.uniform(-self.half_width, self.half_width, size=(n, self.dim))


def mixture_from_config(cfg: dict) -> GaussianMixture:
    """Build a mixture from a config section such as ``{"kind": "grid", "k": 9}``."""
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind == "grid":
        return make_grid(cfg.get("k", 9), cfg.get("spacing", 2.0), cfg.get("sigma", 0.05))
    if kind == "annulus":
        return make_annulus(cfg.get("k", 9), cfg.get("radius", 2.0), cfg.get("sigma", 0.05))
    if kind == "random":
        rng = np.random.default_rng(cfg.get("seed", 0))
        return make_random(cfg.get("k", 9), rng, cfg.get("location_scale", 2.0), cfg.get("cov_scale", 0.05))
    raise ValueError(f"unknown mixture kind {kind!r}")


def write_dataset_csv(points, labels, path) -> None:
    lines = ["x,y,component"]
    for (x, y), c in zip(np.asarray(points), np.asarray(labels)):
        lines.append(f"{float(x)!r},{float(y)!r},{int(c)}")
    Path(path).write_text("\n".join(lines) + "\n")
