"""Command-line entry point.

Usage::

    gangs MODE [INPUT] [--config FILE] [--seed N] [--out DIR] [--max-iters N]
                       [--uniform-fakes on|off] [--gen-lr LR]

MODE is one of ``pnm``, ``gan``, ``solve-matrix``, ``pnm-matrix``, ``eval``.
INPUT is the payoff CSV for the matrix modes or the checkpoint directory for
``eval``; it overrides the corresponding config key.

Exit codes: 0 success, 2 bad arguments or configuration, 3 runtime failure.
The environment variable ``GANGS_THREADS`` caps the number of worker threads.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import baseline_gan, evaluation, matrix_game, pnm
from .config import MODES, ConfigError, RunConfig, from_dict, parse_config, serialize
from .gang_model import MixedNetStrategy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

RESOLVED_CONFIG = "resolved-config.yaml"
REPORT_SALT = 0xE7A1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gangs", description="Solve GAN games with Parallel Nash Memory.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("input", nargs="?", help="payoff CSV (matrix modes) or checkpoint directory (eval)")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--max-iters", type=int, help="override pnm.max_iterations")
    p.add_argument("--uniform-fakes", choices=("on", "off"), help="uniform fake augmentation")
    p.add_argument("--gen-lr", type=float, help="generator learning rate for RBBR training")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge the config file, the positional input and the flag overrides."""
    if args.config:
        raw = parse_config(args.config).model_dump(mode="json")
    else:
        raw = RunConfig().model_dump(mode="json")
    raw["mode"] = args.mode
    if args.input is not None:
        if args.mode in ("solve-matrix", "pnm-matrix"):
            raw["matrix"] = args.input
        elif args.mode == "eval":
            raw["eval"]["checkpoint"] = args.input
        else:
            raise ConfigError(f"mode {args.mode} takes no positional input")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = args.out
    if args.max_iters is not None:
        raw["pnm"]["max_iterations"] = args.max_iters
    if args.uniform_fakes is not None:
        raw["pnm"]["rbbr"]["uniform_fakes"] = args.uniform_fakes == "on"
    if args.gen_lr is not None:
        raw["pnm"]["rbbr"]["gen_learning_rate"] = args.gen_lr
    return from_dict(raw)


def report_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, REPORT_SALT]))


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in v)


def run_solve_matrix(cfg: RunConfig, out) -> int:
    m = matrix_game.read_matrix_csv(cfg.matrix)
    res = matrix_game.solve_zero_sum(m)
    print(f"value {res.value!r}", file=out)
    print(f"row {_fmt_vec(res.row_mix)}", file=out)
    print(f"col {_fmt_vec(res.col_mix)}", file=out)
    print(f"exploitability {res.exploitability!r}", file=out)
    return EXIT_OK


def run_pnm_matrix(cfg: RunConfig, out, max_iters: int | None = None) -> int:
    """Double oracle with exact best responses.

    Runs until a test finds no gain. The cap is ``rows + cols + 1`` (enough
    for any game) unless ``--max-iters`` sets one.
    """
    full = matrix_game.read_matrix_csv(cfg.matrix)
    limit = max_iters if max_iters is not None else sum(full.shape) + 1
    pcfg = replace(cfg.pnm_config(oracle="matrix"), max_iterations=limit)
    state = pnm.run(pcfg, pnm.MatrixOracle(full), checkpoint_dir=Path(cfg.out_dir) / "checkpoint")
    x, y = pnm.full_game_mixtures(state, full.shape)
    print(f"iterations {len(state.history)}", file=out)
    print(f"certified {str(state.certified).lower()}", file=out)
    print(f"value {state.value!r}", file=out)
    print(f"row {_fmt_vec(x)}", file=out)
    print(f"col {_fmt_vec(y)}", file=out)
    print(f"exploitability {matrix_game.exploitability(full, x, y)!r}", file=out)
    return EXIT_OK


def _emit(cfg: RunConfig, report: evaluation.Report, out) -> None:
    evaluation.emit(report, cfg.out_dir)
    cov = report.coverage
    print(f"modes_hit {cov.modes_hit}/{cov.total_modes}", file=out)
    print(f"high_quality_fraction {cov.high_quality_fraction!r}", file=out)


def run_pnm(cfg: RunConfig, out) -> int:
    spec = cfg.gang_spec()
    state = pnm.run(cfg.pnm_config(), pnm.NeuralOracle(spec), checkpoint_dir=Path(cfg.out_dir) / "checkpoint")
    e = cfg.eval
    report = evaluation.build_report(spec, state.gen_mixture(), state.clf_mixture(), report_rng(cfg.seed),
                                     state.history, e.n_samples, e.k_sigma, e.resolution)
    _emit(cfg, report, out)
    print(f"certified {str(state.certified).lower()}", file=out)
    return EXIT_OK


def run_gan(cfg: RunConfig, out) -> int:
    spec = cfg.gang_spec()
    gen, clf, history = baseline_gan.train_gan(spec, cfg.gan_config(), np.random.default_rng(cfg.seed))
    baseline_gan.save_gan(gen, clf, history, Path(cfg.out_dir) / "checkpoint")
    e = cfg.eval
    report = evaluation.build_report(spec, MixedNetStrategy.pure(gen), MixedNetStrategy.pure(clf),
                                     report_rng(cfg.seed), (), e.n_samples, e.k_sigma, e.resolution)
    _emit(cfg, report, out)
    return EXIT_OK


def run_eval(cfg: RunConfig, out) -> int:
    spec = cfg.gang_spec()
    e = cfg.eval
    if e.kind == "gan":
        gen, clf, _ = baseline_gan.load_gan(e.checkpoint)
        gen_mix, clf_mix, history = MixedNetStrategy.pure(gen), MixedNetStrategy.pure(clf), ()
    else:
        state = pnm.load_checkpoint(e.checkpoint)
        gen_mix, clf_mix, history = state.gen_mixture(), state.clf_mixture(), state.history
    report = evaluation.build_report(spec, gen_mix, clf_mix, report_rng(cfg.seed), history,
                                     e.n_samples, e.k_sigma, e.resolution)
    _emit(cfg, report, out)
    return EXIT_OK


RUNNERS = {
    "pnm": run_pnm,
    "gan": run_gan,
    "solve-matrix": run_solve_matrix,
    "pnm-matrix": run_pnm_matrix,
    "eval": run_eval,
}


def write_resolved(cfg: RunConfig) -> Path:
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    path = d / RESOLVED_CONFIG
    path.write_text(serialize(cfg))
    return path


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        write_resolved(cfg)
        if cfg.mode == "pnm-matrix":
            return run_pnm_matrix(cfg, out, args.max_iters)
        return RUNNERS[cfg.mode](cfg, out)
    except (ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
