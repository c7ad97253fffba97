import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gangs import neural
from gangs.neural import MlpSpec, NetworkParams, OptimizerConfig


def linear_1x1(w, b):
    return NetworkParams(np.array([w, b], dtype=float), MlpSpec((1, 1), ("linear",)))


def random_net(rng, acts=("tanh", "sigmoid")):
    sizes = [int(rng.integers(1, 5))] + [int(rng.integers(1, 6)) for _ in range(len(acts))]
    spec = MlpSpec(tuple(sizes), acts)
    return NetworkParams(rng.normal(size=spec.n_params), spec)


def mse(targets):
    def loss(out):
        diff = out - targets
        return float(np.mean(diff ** 2)), 2.0 * diff / diff.size
    return loss


def finite_difference(params, loss_fn, inputs, h=1e-5):
    grad = np.zeros_like(params.values)
    for i in range(len(grad)):
        up = params.values.copy()
        down = params.values.copy()
        up[i] += h
        down[i] -= h
        f_up = loss_fn(neural.forward(params.with_values(up), inputs))[0]
        f_down = loss_fn(neural.forward(params.with_values(down), inputs))[0]
        grad[i] = (f_up - f_down) / (2 * h)
    return grad


def assert_gradients_close(analytic, numeric):
    small = np.abs(numeric) < 1e-4
    assert np.all(np.abs(analytic - numeric)[small] <= 1e-7)
    rel = np.abs(analytic - numeric)[~small] / np.abs(numeric)[~small]
    assert rel.size == 0 or rel.max() <= 1e-4


class TestSpec:
    def test_param_count(self):
        spec = MlpSpec((2, 64, 64, 2), ("relu", "relu", "linear"))
        assert spec.n_params == 3 * 64 + 65 * 64 + 65 * 2

    def test_defaults(self):
        assert neural.generator_spec() == MlpSpec((2, 64, 64, 2), ("relu", "relu", "linear"))
        assert neural.classifier_spec() == MlpSpec((2, 64, 64, 1), ("relu", "relu", "sigmoid"))

    @pytest.mark.parametrize("sizes,acts", [((2,), ()), ((2, 0), ("linear",)), ((2, 2), ("swish",)),
                                            ((2, 2, 2), ("relu",))])
    def test_rejects_bad_specs(self, sizes, acts):
        with pytest.raises(ValueError):
            MlpSpec(sizes, acts)

    def test_dict_round_trip(self):
        spec = neural.classifier_spec()
        assert MlpSpec.from_dict(spec.to_dict()) == spec

    def test_params_length_checked(self):
        with pytest.raises(ValueError):
            NetworkParams(np.zeros(3), MlpSpec((1, 1), ("linear",)))

    def test_params_must_be_finite(self):
        with pytest.raises(neural.NonFiniteError):
            NetworkParams(np.array([np.inf, 0.0]), MlpSpec((1, 1), ("linear",)))


class TestForward:
    def test_zero_linear_net(self):
        params = NetworkParams(np.zeros(3), MlpSpec((2, 1), ("linear",)))
        np.testing.assert_array_equal(neural.forward(params, [[3.0, -4.0], [1.0, 2.0]]), [[0.0], [0.0]])

    def test_affine_by_hand(self):
        assert neural.forward(linear_1x1(2.0, 1.0), [[3.0]])[0, 0] == 7.0

    def test_sigmoid_at_zero(self):
        params = NetworkParams(np.zeros(3), MlpSpec((2, 1), ("sigmoid",)))
        assert neural.forward(params, [[0.0, 0.0]])[0, 0] == 0.5

    def test_sigmoid_strictly_inside_unit_interval(self):
        params = NetworkParams(np.array([30.0, 0.0]), MlpSpec((1, 1), ("sigmoid",)))
        out = neural.forward(params, [[-1.0], [1.0]])[:, 0]
        assert 0.0 < out[0] < 1e-12 and 1.0 - 1e-12 < out[1] < 1.0

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            neural.forward(linear_1x1(1.0, 0.0), [[1.0, 2.0]])

    def test_non_finite_input(self):
        with pytest.raises(neural.NonFiniteError):
            neural.forward(linear_1x1(1.0, 0.0), [[np.nan]])

    def test_overflow_names_layer(self):
        spec = MlpSpec((1, 1, 1), ("linear", "linear"))
        params = NetworkParams(np.array([1e200, 0.0, 1e200, 0.0]), spec)
        with pytest.raises(neural.NonFiniteError, match="layer 1"):
            neural.forward(params, [[1e10]])

    def test_deterministic_and_pure(self):
        rng = np.random.default_rng(0)
        params = neural.init(neural.classifier_spec(), rng)
        before = params.values.copy()
        x = rng.normal(size=(10, 2))
        np.testing.assert_array_equal(neural.forward(params, x), neural.forward(params, x))
        np.testing.assert_array_equal(params.values, before)


class TestGradient:
    def test_affine_by_hand(self):
        grad = neural.gradient(linear_1x1(1.5, -0.5), lambda out: (float(out.sum()), np.ones_like(out)), [[2.5]])
        np.testing.assert_array_equal(grad, [2.5, 1.0])

    def test_constant_loss(self):
        params = neural.init(neural.classifier_spec(), np.random.default_rng(0))
        grad = neural.gradient(params, lambda out: (1.0, np.zeros_like(out)), np.ones((4, 2)))
        np.testing.assert_array_equal(grad, np.zeros(params.spec.n_params))

    def test_tanh_sigmoid_net_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        spec = MlpSpec((2, 4, 1), ("tanh", "sigmoid"))
        params = NetworkParams(rng.normal(size=spec.n_params), spec)
        x = rng.normal(size=(6, 2))
        loss = mse(rng.uniform(size=(6, 1)))
        assert_gradients_close(neural.gradient(params, loss, x), finite_difference(params, loss, x))

    def test_non_finite_loss(self):
        with pytest.raises(neural.NonFiniteError):
            neural.gradient(linear_1x1(1.0, 0.0), lambda out: (np.inf, out), [[1.0]])

    def test_input_gradient(self):
        rng = np.random.default_rng(2)
        params = random_net(rng)
        x = rng.normal(size=(1, params.spec.n_inputs))
        cache = neural.forward_cache(params, x)
        _, d_in = neural.backward(params, cache, np.ones((1, params.spec.n_outputs)), need_input_grad=True)
        h = 1e-6
        for i in range(x.shape[1]):
            e = np.zeros_like(x)
            e[0, i] = h
            fd = (neural.forward(params, x + e).sum() - neural.forward(params, x - e).sum()) / (2 * h)
            assert d_in[0, i] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_pre_activation_gradient(self):
        # feeding d/dlogit = sigma'(z) reproduces feeding d/doutput = 1
        rng = np.random.default_rng(3)
        params = random_net(rng, ("tanh", "sigmoid"))
        x = rng.normal(size=(5, params.spec.n_inputs))
        cache = neural.forward_cache(params, x)
        out = cache.outputs
        g_out, _ = neural.backward(params, cache, np.ones_like(out))
        g_pre, _ = neural.backward(params, cache, out * (1 - out), wrt_pre_activation=True)
        np.testing.assert_allclose(g_pre, g_out, rtol=1e-12, atol=1e-15)


class TestInit:
    def test_same_seed_same_params(self):
        spec = neural.generator_spec()
        a = neural.init(spec, np.random.default_rng(7))
        b = neural.init(spec, np.random.default_rng(7))
        np.testing.assert_array_equal(a.values, b.values)

    def test_biases_zero_and_weights_bounded(self):
        spec = MlpSpec((2, 30, 1), ("relu", "sigmoid"))
        for seed in range(1000 // 60 + 1):
            params = neural.init(spec, np.random.default_rng(seed))
            for (w, b), (fan_in, fan_out) in zip(params.layers(), zip(spec.layer_sizes, spec.layer_sizes[1:])):
                a = np.sqrt(6.0 / (fan_in + fan_out))
                assert np.all(b == 0)
                assert np.all(np.abs(w) <= a)

    def test_weight_range_is_used(self):
        spec = MlpSpec((10, 10), ("linear",))
        w = neural.init(spec, np.random.default_rng(0)).layers()[0][0]
        a = np.sqrt(6.0 / 20)
        assert w.max() > 0.9 * a and w.min() < -0.9 * a


class TestTrain:
    def test_zero_gradient_leaves_params(self):
        params = neural.init(neural.classifier_spec(), np.random.default_rng(0))
        out = neural.train(params, lambda p, rng: (0.0, np.zeros(p.spec.n_params)),
                           OptimizerConfig(kind="adam", iterations=50), np.random.default_rng(1))
        np.testing.assert_array_equal(out.values, params.values)

    def test_quadratic_sgd_converges(self):
        spec = MlpSpec((1, 1), ("linear",))
        start = NetworkParams(np.zeros(2), spec)

        def objective(p, rng):
            w = p.values[0]
            return (w - 3.0) ** 2, np.array([2.0 * (w - 3.0), 0.0])

        out = neural.train(start, objective, OptimizerConfig(kind="sgd", learning_rate=0.1, iterations=200),
                           np.random.default_rng(0))
        assert abs(out.values[0] - 3.0) <= 1e-6

    def test_zero_learning_rate(self):
        rng = np.random.default_rng(0)
        params = neural.init(neural.generator_spec(), rng)
        x = rng.normal(size=(8, 2))
        objective = lambda p, r: (0.0, neural.gradient(p, mse(np.zeros((8, 2))), x))  # noqa: E731
        for kind in ("sgd", "adam"):
            out = neural.train(params, objective, OptimizerConfig(kind=kind, learning_rate=0.0, iterations=5), rng)
            np.testing.assert_array_equal(out.values, params.values)

    def test_seeded_runs_identical(self):
        spec = MlpSpec((2, 8, 1), ("tanh", "sigmoid"))

        def objective(p, rng):
            x = rng.normal(size=(16, 2))
            loss = mse((x[:, :1] > 0).astype(float))
            return loss(neural.forward(p, x))[0], neural.gradient(p, loss, x)

        runs = []
        for _ in range(2):
            rng = np.random.default_rng(42)
            start = neural.init(spec, rng)
            runs.append(neural.train(start, objective, OptimizerConfig(iterations=30), rng).values)
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_non_finite_loss_reports_iteration(self):
        calls = []

        def objective(p, rng):
            calls.append(1)
            return (np.nan if len(calls) == 4 else 1.0), np.zeros(p.spec.n_params)

        with pytest.raises(neural.TrainingError) as info:
            neural.train(linear_1x1(0.0, 0.0), objective, OptimizerConfig(iterations=10), np.random.default_rng(0))
        assert info.value.iteration == 3

    def test_adam_defaults(self):
        cfg = OptimizerConfig()
        assert (cfg.kind, cfg.beta1, cfg.beta2, cfg.epsilon) == ("adam", 0.5, 0.999, 1e-8)

    def test_bad_optimizer(self):
        with pytest.raises(ValueError):
            OptimizerConfig(kind="rmsprop")


class TestPersistence:
    def test_round_trip_exact(self, tmp_path):
        params = neural.init(neural.classifier_spec(), np.random.default_rng(5))
        neural.save_params(params, tmp_path / "c.txt")
        loaded = neural.load_params(tmp_path / "c.txt")
        assert loaded.spec == params.spec
        np.testing.assert_array_equal(loaded.values, params.values)

    def test_missing_header(self, tmp_path):
        (tmp_path / "bad.txt").write_text("1.0\n2.0\n")
        with pytest.raises(ValueError):
            neural.load_params(tmp_path / "bad.txt")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([("tanh", "sigmoid"), ("tanh", "tanh", "linear"),
                                                   ("sigmoid", "linear"), ("tanh", "sigmoid", "sigmoid")]))
def test_gradient_matches_finite_differences(seed, acts):
    rng = np.random.default_rng(seed)
    params = random_net(rng, acts)
    x = rng.normal(size=(4, params.spec.n_inputs))
    loss = mse(rng.normal(size=(4, params.spec.n_outputs)))
    assert_gradients_close(neural.gradient(params, loss, x), finite_difference(params, loss, x))
