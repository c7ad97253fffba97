"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Criteria 6 to 10 share full-size neural runs (grid of 9 modes, default
settings, 15 PNM iterations, seeds 0 to 4) made through the CLI. These take
roughly a quarter of an hour on one core. Two further tests check the statistical
examples of the baseline_gan and evaluation contracts on the same runs.
"""

import io
import time

import numpy as np
import pytest

from gangs import cli, evaluation
from gangs import gang_model as gm
from gangs import matrix_game as mg
from gangs import neural
from gangs import pnm
from gangs import synth_data as sd
from gangs.neural import MlpSpec, NetworkParams

SEEDS = (0, 1, 2, 3, 4)
REPORT_CSVS = ("coverage.csv", "series.csv", "surface.csv", "samples.csv")
VARIANTS = {
    "pnm": ["pnm"],
    "pnm-no-uniform": ["pnm", "--uniform-fakes", "off"],
    "pnm-slow-gen": ["pnm", "--gen-lr", "1e-5"],
    "gan": ["gan"],
}


class Runs:
    """Lazily made CLI runs, shared by every criterion in the session."""

    def __init__(self, root):
        self.root = root
        self.cache = {}

    def dir(self, variant, seed, tag=""):
        key = (variant, seed, tag)
        if key not in self.cache:
            out = self.root / f"{variant}-{seed}{tag}"
            code = cli.main([*VARIANTS[variant], "--seed", str(seed), "--out", str(out)], out=io.StringIO())
            assert code == 0, f"{variant} seed {seed} exited with {code}"
            self.cache[key] = out
        return self.cache[key]

    def report(self, variant, seed):
        return evaluation.read_report(self.dir(variant, seed))


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    return Runs(tmp_path_factory.mktemp("acceptance"))


def test_criterion_1_matrix_exactness(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(200):
        n = 2 + (k * 48) // 199
        m = rng.uniform(-1, 1, size=(n, n))
        res = mg.solve_zero_sum(m)
        worst = max(worst, mg.exploitability(m, res.row_mix, res.col_mix))
    pennies = mg.solve_zero_sum([[1, -1], [-1, 1]])
    rps = mg.solve_zero_sum([[0, -1, 1], [1, 0, -1], [-1, 1, 0]])
    analytic = max(abs(pennies.value), np.abs(pennies.row_mix - 0.5).max(), np.abs(pennies.col_mix - 0.5).max(),
                   abs(rps.value), np.abs(rps.row_mix - 1 / 3).max(), np.abs(rps.col_mix - 1 / 3).max())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and analytic <= 1e-12 and elapsed < 5.0
    record_criterion(1, ok, f"max exploitability {worst:.2e}, analytic error {analytic:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_double_oracle_soundness(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst, most_iters = 0.0, 0
    for _ in range(50):
        game = rng.uniform(-1, 1, size=(20, 20))
        state = pnm.run_matrix(game, max_iterations=40)
        full = mg.solve_zero_sum(game)
        x, y = pnm.full_game_mixtures(state, game.shape)
        worst = max(worst, mg.exploitability(game, x, y), abs(state.value - full.value))
        most_iters = max(most_iters, len(state.history) if state.terminated else 10**6)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and most_iters <= 40 and elapsed < 10.0
    record_criterion(2, ok, f"max exploitability {worst:.2e}, max iterations {most_iters}, {elapsed:.2f}s")
    assert ok


def _central_difference(params, loss_fn, x, h=1e-6):
    grad = np.empty(params.values.size)
    for i in range(grad.size):
        up, down = params.values.copy(), params.values.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (loss_fn(neural.forward(params.with_values(up), x))[0]
                   - loss_fn(neural.forward(params.with_values(down), x))[0]) / (2 * h)
    return grad


def test_criterion_3_gradient_fidelity(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        depth = int(rng.integers(1, 4))
        acts = tuple(rng.choice(["tanh", "sigmoid", "linear"], size=depth - 1)) + ("sigmoid",)
        sizes = (int(rng.integers(1, 5)),) + tuple(int(rng.integers(2, 7)) for _ in range(depth - 1)) + (1,)
        spec = MlpSpec(sizes, acts)
        params = NetworkParams(rng.normal(size=spec.n_params), spec)
        x = rng.normal(size=(8, sizes[0]))
        target = rng.uniform(size=(8, 1))

        def loss(out):
            diff = out - target
            return float(np.mean(diff ** 2)), 2.0 * diff / diff.size

        analytic = neural.gradient(params, loss, x)
        numeric = _central_difference(params, loss, x)
        scale = np.maximum(np.abs(numeric), 1e-3)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 10.0
    record_criterion(3, ok, f"max relative error {worst:.2e} over 50 networks, {elapsed:.2f}s")
    assert ok


def test_criterion_4_strategic_equivalence(record_criterion):
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(1000):
        rows, cols = (int(v) for v in rng.integers(2, 8, size=2))
        m = rng.uniform(-1, 1, size=(rows, cols))
        col = int(rng.integers(cols))
        shifted = mg.column_constant_shift(m, col, float(rng.uniform(-10, 10)))
        y = rng.dirichlet(np.ones(cols))
        before = -(m @ y)
        after = -(shifted @ y)
        if not np.array_equal(np.flatnonzero(before >= before.max() - 1e-12),
                              np.flatnonzero(after >= after.max() - 1e-12)):
            violations += 1
    ok = violations == 0
    record_criterion(4, ok, f"{violations} argmax violations in 1000 trials")
    assert ok


def test_criterion_5_zero_sum_identities(record_criterion):
    spec = gm.GangSpec(sd.make_grid())
    rng = np.random.default_rng(5)
    gens = [neural.init(spec.gen_spec, rng) for _ in range(3)]
    clf = neural.init(spec.clf_spec, rng)
    mix = gm.MixedNetStrategy(gens, rng.dirichlet(np.ones(3)))
    u_c = gm.payoff_classifier_mc(spec, mix, clf, 2000, np.random.default_rng(1))
    u_g = gm.payoff_generator_mc(spec, mix, clf, 2000, np.random.default_rng(1))
    reals = sd.sample(spec.data, 2000, rng)
    noise = spec.noise.sample(2000, rng)
    mixed = gm.classifier_payoff_crn(spec, mix, clf, reals, noise)
    parts = np.array([gm.classifier_payoff_crn(spec, gm.MixedNetStrategy.pure(g), clf, reals, noise) for g in gens])
    linearity = abs(mixed - mix.weights @ parts)
    floor = gm.measure(gm.MeasuringFn("bounded_log", 1e-5), 0.0)
    ok = u_g + u_c == 0.0 and linearity <= 1e-9 and floor == np.log(1e-5)
    record_criterion(5, ok, f"u_G + u_C = {u_g + u_c!r}, linearity gap {linearity:.1e}, bounded log(0) = {floor!r}")
    assert ok


def test_criterion_6_desk_scale_pnm(runs, record_criterion):
    reports = [runs.report("pnm", s) for s in SEEDS]
    modes = [r.coverage.modes_hit for r in reports]
    hq = [r.coverage.high_quality_fraction for r in reports]
    ok = np.median(modes) >= 8 and np.median(hq) >= 0.75
    record_criterion(6, ok, f"modes per seed {modes} (median {np.median(modes):g}), "
                            f"high-quality {[round(v, 3) for v in hq]} (median {np.median(hq):.3f})")
    assert ok


def _final_abs_u_brs(report):
    return float(np.mean(np.abs(report.u_brs_series[-5:])))


def test_criterion_7_uniform_fake_ablation(runs, record_criterion):
    on = [_final_abs_u_brs(runs.report("pnm", s)) for s in SEEDS]
    off = [_final_abs_u_brs(runs.report("pnm-no-uniform", s)) for s in SEEDS]
    wins = sum(a < b for a, b in zip(on, off))
    ok = wins >= 4
    record_criterion(7, ok, f"uniform ON lower in {wins}/5 pairs; ON {[round(v, 3) for v in on]}, "
                            f"OFF {[round(v, 3) for v in off]}")
    assert ok


def test_criterion_8_slow_generator(runs, record_criterion):
    base = [runs.report("pnm", s).coverage for s in SEEDS]
    slow = [runs.report("pnm-slow-gen", s).coverage for s in SEEDS]
    wins = sum(b.dispersion > a.dispersion for a, b in zip(base, slow))
    ok = wins >= 4
    hq_change = [round(b.high_quality_fraction - a.high_quality_fraction, 3) for a, b in zip(base, slow)]
    record_criterion(8, ok, f"dispersion up in {wins}/5 pairs; default {[round(c.dispersion, 4) for c in base]}, "
                            f"slow {[round(c.dispersion, 4) for c in slow]}; high-quality change {hq_change}")
    assert ok


def test_criterion_9_baseline_comparison(runs, record_criterion):
    pnm_hq = [runs.report("pnm", s).coverage.high_quality_fraction for s in SEEDS]
    gan_hq = [runs.report("gan", s).coverage.high_quality_fraction for s in SEEDS]
    wins = sum(p >= g for p, g in zip(pnm_hq, gan_hq))
    ok = wins >= 4
    record_criterion(9, ok, f"PNM >= GAN in {wins}/5 pairs; PNM {[round(v, 3) for v in pnm_hq]}, "
                            f"GAN {[round(v, 3) for v in gan_hq]}")
    assert ok


def test_criterion_10_determinism(runs, record_criterion, tmp_path):
    mismatched = []
    for variant in ("pnm", "gan"):
        first, second = runs.dir(variant, 0), runs.dir(variant, 0, tag="-repeat")
        mismatched += [f"{variant}/{name}" for name in REPORT_CSVS
                       if (first / name).read_bytes() != (second / name).read_bytes()]
    # the matrix modes print their results; compare those too
    game = tmp_path / "game.csv"
    mg.write_matrix_csv(np.random.default_rng(10).uniform(-1, 1, size=(15, 12)), game)
    outputs = []
    for _ in range(2):
        buf = io.StringIO()
        cli.main(["pnm-matrix", str(game), "--out", str(tmp_path / "pm")], out=buf)
        outputs.append(buf.getvalue())
    if outputs[0] != outputs[1]:
        mismatched.append("pnm-matrix stdout")
    ok = not mismatched
    record_criterion(10, ok, "repeated seed-0 runs byte-identical" if ok else f"differences in {mismatched}")
    assert ok


# Statistical examples from the module contracts. They are not numbered
# criteria but use the same shared runs.

def test_gan_covers_no_more_modes_than_pnm(runs):
    seeds = range(10)
    pairs = [(runs.report("gan", s).coverage.modes_hit, runs.report("pnm", s).coverage.modes_hit) for s in seeds]
    wins = sum(g <= p for g, p in pairs)
    print(f"GAN modes <= PNM modes in {wins}/10 seeds; (GAN, PNM) = {pairs}")
    assert wins > 5, f"GAN modes <= PNM modes in only {wins}/10 seeds: {pairs}"


def test_pnm_surface_flatter_than_gan(runs):
    pairs = [(runs.report("gan", s).surface.std(), runs.report("pnm", s).surface.std()) for s in SEEDS]
    wins = sum(p < g for g, p in pairs)
    print(f"PNM surface flatter in {wins}/5 seeds; (GAN std, PNM std) = {[(round(g, 3), round(p, 3)) for g, p in pairs]}")
    assert wins > 2, f"PNM surface flatter in only {wins}/5 seeds: {pairs}"
