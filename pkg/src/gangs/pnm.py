"""Parallel Nash Memory.

PNM keeps a growing restricted game (the subgame) over every strategy found
so far, together with an equilibrium of that subgame. Each iteration asks both
players' oracles for a response to the opponent's equilibrium mixture, scores
the two responses ("tests") against the maintained mixtures, and, when the
tests find a positive total gain, adds them as a new row and column and
re-solves.

Two oracle families are supported:

* ``MatrixOracle`` plays on an explicit payoff matrix with exact best
  responses (this is the classic double oracle).
* ``NeuralOracle`` trains generator/classifier networks with the
  resource-bounded oracles from :mod:`gangs.rbbr`.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import matrix_game, neural
from .gang_model import GangSpec, MixedNetStrategy, cell_rng, simulate_cell
from .rbbr import (RbbrConfig, response_payoffs, train_classifier_rbbr,
                   train_generator_rbbr, u_brs_from_payoffs)

log = logging.getLogger(__name__)


def thread_cap(default: int = 2) -> int:
    try:
        return max(1, int(os.environ.get("GANGS_THREADS", default)))
    except ValueError:
        return default


@dataclass(frozen=True)
class PnmConfig:
    max_iterations: int = 15
    oracle: str = "neural"
    rbbr: RbbrConfig = field(default_factory=RbbrConfig)
    cell_samples: int = 10_000
    master_seed: int = 0
    ignore_non_positive: bool = True
    solver_tol: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.oracle not in ("neural", "matrix"):
            raise ValueError("oracle must be 'neural' or 'matrix'")
        if self.cell_samples < 1:
            raise ValueError("cell_samples must be positive")

    @property
    def test_threshold(self) -> float:
        """Tests at or below this total gain count as "no improvement".

        Exact oracles are compared against the solver tolerance so that
        rounding at an exact equilibrium is not mistaken for a gain.
        """
        return self.tol if self.oracle == "matrix" else 0.0

    @property
    def tol(self) -> float:
        if self.solver_tol is not None:
            return self.solver_tol
        return matrix_game.DEFAULT_TOL if self.oracle == "matrix" else matrix_game.MC_TOL


@dataclass
class IterationRecord:
    iteration: int
    u_brs: float
    gen_test_payoff: float  # u_G(new generator, mu_C)
    clf_test_payoff: float  # u_C(mu_G, new classifier)
    security_gen: float  # u_G(mu_G, new classifier)
    security_clf: float  # u_C(new generator, mu_C)
    subgame_value: float  # u_C at the subgame NE after this iteration
    accepted: bool
    n_gen: int
    n_clf: int
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class PnmState:
    gens: list[Any]
    clfs: list[Any]
    subgame: np.ndarray
    gen_weights: np.ndarray
    clf_weights: np.ndarray
    value: float
    history: list[IterationRecord] = field(default_factory=list)
    terminated: bool = False
    test_threshold: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.subgame.shape

    @property
    def certified(self) -> bool:
        """True when the last test found no positive gain (an RB-NE)."""
        return bool(self.history) and self.history[-1].u_brs <= self.test_threshold

    def gen_mixture(self) -> MixedNetStrategy:
        return MixedNetStrategy(tuple(self.gens), self.gen_weights)

    def clf_mixture(self) -> MixedNetStrategy:
        return MixedNetStrategy(tuple(self.clfs), self.clf_weights)


class MatrixOracle:
    """Exact best responses on a full payoff matrix; strategies are indices."""

    def __init__(self, full_game):
        self.full = matrix_game.as_payoff_matrix(full_game)

    def initial(self, cfg: PnmConfig) -> tuple[int, int, float]:
        return 0, 0, float(self.full[0, 0])

    def responses(self, state: PnmState, cfg: PnmConfig, iteration: int) -> tuple[int, int]:
        n_rows, n_cols = self.full.shape
        y = np.zeros(n_cols)
        np.add.at(y, state.clfs, state.clf_weights)
        x = np.zeros(n_rows)
        np.add.at(x, state.gens, state.gen_weights)
        gen, _ = matrix_game.best_response(self.full, _renorm(y), matrix_game.ROW)
        clf, _ = matrix_game.best_response(self.full, _renorm(x), matrix_game.COLUMN)
        return gen, clf

    def test_payoffs(self, state, new_gen, new_clf, cfg):
        return self.full[new_gen, state.clfs], self.full[state.gens, new_clf]

    def corner(self, state, new_gen, new_clf, cfg) -> float:
        return float(self.full[new_gen, new_clf])

    @staticmethod
    def is_new(strategies, candidate) -> bool:
        return candidate not in strategies


class NeuralOracle:
    """Network strategies trained by the resource-bounded oracles."""

    def __init__(self, spec: GangSpec, threads: int | None = None):
        self.spec = spec
        self.threads = threads if threads is not None else thread_cap()

    def _rngs(self, cfg: PnmConfig, iteration: int):
        seq = np.random.SeedSequence([int(cfg.master_seed), 0x9A3, int(iteration) + 1])
        gen_seq, clf_seq = seq.spawn(2)
        return np.random.default_rng(gen_seq), np.random.default_rng(clf_seq)

    def _both(self, gen_job, clf_job):
        if self.threads >= 2:
            with ThreadPoolExecutor(max_workers=2) as pool:
                g = pool.submit(gen_job)
                c = pool.submit(clf_job)
                return g.result(), c.result()
        return gen_job(), clf_job()

    def initial(self, cfg: PnmConfig):
        """One generator trained against a random classifier and vice versa."""
        gen_rng, clf_rng = self._rngs(cfg, -1)
        rand_clf = neural.init(self.spec.clf_spec, clf_rng)
        rand_gen = neural.init(self.spec.gen_spec, gen_rng)
        gen, clf = self._both(
            lambda: train_generator_rbbr(self.spec, MixedNetStrategy.pure(rand_clf), cfg.rbbr, gen_rng),
            lambda: train_classifier_rbbr(self.spec, MixedNetStrategy.pure(rand_gen), cfg.rbbr, clf_rng),
        )
        value = simulate_cell(self.spec, gen, clf, cfg.cell_samples, cell_rng(cfg.master_seed, 0, 0))
        return gen, clf, value

    def responses(self, state: PnmState, cfg: PnmConfig, iteration: int):
        gen_rng, clf_rng = self._rngs(cfg, iteration)
        gen_mix, clf_mix = state.gen_mixture(), state.clf_mixture()
        start_gen = _heaviest(state.gens, state.gen_weights)
        start_clf = _heaviest(state.clfs, state.clf_weights)
        return self._both(
            lambda: train_generator_rbbr(self.spec, clf_mix, cfg.rbbr, gen_rng, start_gen),
            lambda: train_classifier_rbbr(self.spec, gen_mix, cfg.rbbr, clf_rng, start_clf),
        )

    def test_payoffs(self, state, new_gen, new_clf, cfg):
        return response_payoffs(self.spec, state.gens, state.clfs, new_gen, new_clf,
                                cfg.cell_samples, cfg.master_seed)

    def corner(self, state, new_gen, new_clf, cfg) -> float:
        n_gen, n_clf = state.shape
        return simulate_cell(self.spec, new_gen, new_clf, cfg.cell_samples,
                             cell_rng(cfg.master_seed, n_gen, n_clf))

    @staticmethod
    def is_new(strategies, candidate) -> bool:
        return True


def _renorm(p: np.ndarray) -> np.ndarray:
    return p / p.sum()


def _heaviest(strategies, weights):
    return strategies[int(np.argmax(weights))]


def initialize(cfg: PnmConfig, oracle) -> PnmState:
    gen, clf, value = oracle.initial(cfg)
    return PnmState([gen], [clf], np.array([[value]]), np.ones(1), np.ones(1), value,
                    test_threshold=cfg.test_threshold)


def iterate(state: PnmState, cfg: PnmConfig, oracle, iteration: int | None = None) -> PnmState:
    """One PNM step; mutates and returns ``state``."""
    t0 = time.perf_counter()
    it = len(state.history) if iteration is None else iteration
    new_gen, new_clf = oracle.responses(state, cfg, it)
    row, col = oracle.test_payoffs(state, new_gen, new_clf, cfg)
    total, gen_test, clf_test = u_brs_from_payoffs(row, col, state.gen_weights, state.clf_weights)

    add_gen = oracle.is_new(state.gens, new_gen)
    add_clf = oracle.is_new(state.clfs, new_clf)
    accepted = (add_gen or add_clf) and not (cfg.ignore_non_positive and total <= cfg.test_threshold)
    if accepted:
        n_gen, n_clf = state.shape
        grown = np.empty((n_gen + add_gen, n_clf + add_clf))
        grown[:n_gen, :n_clf] = state.subgame
        if add_gen and add_clf:
            grown[n_gen, n_clf] = oracle.corner(state, new_gen, new_clf, cfg)
        if add_gen:
            grown[n_gen, :n_clf] = row
            state.gens.append(new_gen)
        if add_clf:
            grown[:n_gen, n_clf] = col
            state.clfs.append(new_clf)
        sol = matrix_game.solve_zero_sum(grown, tol=cfg.tol)
        state.subgame = grown
        state.gen_weights = sol.row_mix
        state.clf_weights = sol.col_mix
        state.value = sol.value
    elif cfg.oracle == "matrix":
        state.terminated = True

    state.history.append(IterationRecord(
        iteration=it,
        u_brs=float(total),
        gen_test_payoff=float(gen_test),
        clf_test_payoff=float(clf_test),
        security_gen=-float(clf_test),
        security_clf=-float(gen_test),
        subgame_value=float(state.value),
        accepted=bool(accepted),
        n_gen=state.shape[0],
        n_clf=state.shape[1],
        wall_time=time.perf_counter() - t0,
    ))
    log.info("PNM iteration %d: u_BRs=%.4g accepted=%s subgame=%s value=%.4g",
             it, total, accepted, state.shape, state.value)
    return state


def run(cfg: PnmConfig, oracle, checkpoint_dir=None, state: PnmState | None = None) -> PnmState:
    """Run PNM from scratch (or resume ``state``).

    The matrix oracle stops as soon as a test finds no positive gain. The
    neural oracle always runs ``max_iterations`` iterations, ignoring tests
    without positive gain.
    """
    if state is None:
        state = initialize(cfg, oracle)
        if checkpoint_dir is not None:
            save_checkpoint(state, checkpoint_dir)
    while len(state.history) < cfg.max_iterations and not state.terminated:
        iterate(state, cfg, oracle)
        if checkpoint_dir is not None:
            save_checkpoint(state, checkpoint_dir)
    return state


def run_matrix(full_game, max_iterations: int | None = None, tol: float = matrix_game.DEFAULT_TOL) -> PnmState:
    oracle = MatrixOracle(full_game)
    limit = max_iterations if max_iterations is not None else sum(oracle.full.shape) + 1
    cfg = PnmConfig(max_iterations=limit, oracle="matrix", solver_tol=tol)
    return run(cfg, oracle)


def full_game_mixtures(state: PnmState, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Lift matrix-mode subgame mixtures to the full strategy sets."""
    x = np.zeros(shape[0])
    y = np.zeros(shape[1])
    np.add.at(x, state.gens, state.gen_weights)
    np.add.at(y, state.clfs, state.clf_weights)
    return x, y


def history_record_line(rec: IterationRecord) -> str:
    return json.dumps(asdict(rec), sort_keys=True)


def save_checkpoint(state: PnmState, directory) -> None:
    """Strategy files, subgame CSV, equilibrium weights and JSON-lines history."""
    d = Path(directory)
    (d / "generators").mkdir(parents=True, exist_ok=True)
    (d / "classifiers").mkdir(parents=True, exist_ok=True)
    for i, g in enumerate(state.gens):
        path = d / "generators" / f"gen_{i:04d}.txt"
        if isinstance(g, neural.NetworkParams) and not path.exists():
            neural.save_params(g, path)
    for j, c in enumerate(state.clfs):
        path = d / "classifiers" / f"clf_{j:04d}.txt"
        if isinstance(c, neural.NetworkParams) and not path.exists():
            neural.save_params(c, path)
    matrix_game.write_matrix_csv(state.subgame, d / "subgame.csv")
    meta = {
        "gen_weights": [float(w) for w in state.gen_weights],
        "clf_weights": [float(w) for w in state.clf_weights],
        "value": float(state.value),
        "terminated": state.terminated,
        "test_threshold": state.test_threshold,
    }
    if not isinstance(state.gens[0], neural.NetworkParams):
        meta["gens"] = [int(g) for g in state.gens]
        meta["clfs"] = [int(c) for c in state.clfs]
    (d / "state.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    (d / "history.jsonl").write_text("".join(history_record_line(r) + "\n" for r in state.history))


def load_checkpoint(directory) -> PnmState:
    d = Path(directory)
    meta = json.loads((d / "state.json").read_text())
    subgame = matrix_game.read_matrix_csv(d / "subgame.csv")
    if "gens" in meta:
        gens, clfs = list(meta["gens"]), list(meta["clfs"])
    else:
        gens = [neural.load_params(p) for p in sorted((d / "generators").glob("gen_*.txt"))]
        clfs = [neural.load_params(p) for p in sorted((d / "classifiers").glob("clf_*.txt"))]
    history = []
    hist_path = d / "history.jsonl"
    if hist_path.exists():
        history = [IterationRecord(**json.loads(line)) for line in hist_path.read_text().splitlines() if line]
    state = PnmState(gens, clfs, subgame, np.array(meta["gen_weights"]), np.array(meta["clf_weights"]),
                     meta["value"], history, meta["terminated"], meta.get("test_threshold", 0.0))
    if state.shape != (len(gens), len(clfs)):
        raise ValueError(f"{d}: subgame shape {state.shape} does not match stored strategies")
    return state
