"""Optimizers, training loops, multi-run aggregation, sweep drivers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nish_lab import data as data_mod
from nish_lab.activations import ActivationKind, STANDARD_KINDS
from nish_lab.errors import ConfigError, ExperimentError, TrainingError, UsageError
from nish_lab.harness import (
    ExperimentConfig,
    OptimizerConfig,
    adam_step,
    build_cnn5,
    build_cnn10,
    build_mlp,
    depth_sweep,
    evaluate,
    init_adam_state,
    init_sgd_state,
    metrics_rows,
    multi_run,
    noise_sweep,
    prepare_data,
    sgd_step,
    summarize,
    train_model,
)
from nish_lab.tensor_nn import Conv2D, Dense, init_params, network_forward
from nish_lab.activations import Mode


class TestSGD:
    def test_direct_substitution(self):
        params = {"p": np.array([1.0])}
        vel = init_sgd_state(params)
        sgd_step(params, {"p": np.array([2.0])}, vel, lr=0.1)
        assert params["p"][0] == pytest.approx(0.8)

    def test_zero_gradient_no_change(self):
        params = {"p": np.array([3.0, -1.0])}
        vel = init_sgd_state(params)
        sgd_step(params, {"p": np.zeros(2)}, vel, lr=0.5)
        np.testing.assert_array_equal(params["p"], [3.0, -1.0])

    def test_quadratic_bowl_contraction(self):
        # L = p^2, gradient 2p, lr 0.4: p <- 0.2 p each step
        params = {"p": np.array([1.0])}
        vel = init_sgd_state(params)
        for _ in range(50):
            sgd_step(params, {"p": 2.0 * params["p"]}, vel, lr=0.4)
        assert abs(params["p"][0]) <= 1e-5

    def test_non_finite_gradient_raises(self):
        params = {"layer.w": np.array([1.0])}
        with pytest.raises(TrainingError, match="layer.w"):
            sgd_step(params, {"layer.w": np.array([np.nan])},
                     init_sgd_state(params), lr=0.1)


class TestAdam:
    def test_first_step_magnitude_is_lr(self):
        cfg = OptimizerConfig(kind="adam", learning_rate=1e-3)
        params = {"p": np.array([0.0])}
        m, v = init_adam_state(params)
        adam_step(params, {"p": np.array([0.37])}, m, v, 1, cfg)
        # bias-corrected m_hat / sqrt(v_hat) = sign(g) at t = 1
        assert abs(params["p"][0]) == pytest.approx(1e-3, rel=1e-4)

    def test_zero_gradient_zero_state_no_change(self):
        cfg = OptimizerConfig(kind="adam", learning_rate=1e-3)
        params = {"p": np.array([2.0])}
        m, v = init_adam_state(params)
        adam_step(params, {"p": np.zeros(1)}, m, v, 1, cfg)
        assert params["p"][0] == 2.0

    def test_quadratic_bowl_convergence(self):
        cfg = OptimizerConfig(kind="adam", learning_rate=1e-3)
        params = {"p": np.array([1.0])}
        m, v = init_adam_state(params)
        for t in range(1, 5001):
            adam_step(params, {"p": 2.0 * params["p"]}, m, v, t, cfg)
        # near the optimum the step size saturates at roughly lr
        assert abs(params["p"][0]) <= 5e-3

    def test_t_must_be_positive(self):
        cfg = OptimizerConfig(kind="adam")
        params = {"p": np.zeros(1)}
        m, v = init_adam_state(params)
        with pytest.raises(UsageError):
            adam_step(params, {"p": np.zeros(1)}, m, v, 0, cfg)


class TestOptimizerProperties:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_both_optimizers_decrease_random_quadratics(self, seed):
        rng = np.random.default_rng(seed)
        scale = rng.uniform(0.5, 4.0, size=3)   # L = sum(scale * p^2)
        p0 = rng.uniform(-2.0, 2.0, size=3)

        def loss(p):
            return float((scale * p * p).sum())

        for kind in ("sgd", "adam"):
            params = {"p": p0.copy()}
            if kind == "sgd":
                vel = init_sgd_state(params)
            else:
                m, v = init_adam_state(params)
            before = loss(params["p"])
            for t in range(1, 6):
                grads = {"p": 2.0 * scale * params["p"]}
                if kind == "sgd":
                    sgd_step(params, grads, vel, lr=1e-3)
                else:
                    adam_step(params, grads, m, v, t,
                              OptimizerConfig(kind="adam", learning_rate=1e-3))
            assert loss(params["p"]) < before or before == 0.0


class TestConfigs:
    def test_optimizer_validation(self):
        with pytest.raises(ConfigError):
            OptimizerConfig(kind="rmsprop")
        with pytest.raises(ConfigError):
            OptimizerConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            OptimizerConfig(momentum=1.0)

    def test_experiment_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(architecture="transformer")
        with pytest.raises(ConfigError):
            ExperimentConfig(n_runs=0)

    def test_architectures_have_expected_weighted_layers(self):
        def weighted(spec):
            return sum(isinstance(l, (Dense, Conv2D)) for l in spec)
        assert weighted(build_cnn5(STANDARD_KINDS["nish"])) == 5
        assert weighted(build_cnn10(STANDARD_KINDS["nish"])) == 10
        assert weighted(build_mlp(3, STANDARD_KINDS["nish"])) == 4


class TestSummarize:
    def test_hand_arithmetic(self):
        s = summarize([0.90, 0.91, 0.92], [0.5, 0.6, 0.7])
        assert s.mu_acc == pytest.approx(0.91, abs=1e-15)
        assert s.mu_loss == pytest.approx(0.6, abs=1e-15)
        assert s.sigma_acc == pytest.approx(0.01, abs=1e-12)

    def test_single_run_has_no_sigma(self):
        s = summarize([0.9], [0.5])
        assert s.sigma_acc is None
        assert s.n_runs == 1

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=20),
           st.integers(0, 2 ** 31))
    def test_matches_two_pass_oracle(self, accs, seed):
        losses = list(np.random.default_rng(seed).uniform(0, 3, len(accs)))
        s = summarize(accs, losses)
        mean = sum(accs) / len(accs)
        var = sum((a - mean) ** 2 for a in accs) / (len(accs) - 1)
        assert abs(s.mu_acc - mean) <= 1e-12
        assert abs(s.mu_loss - sum(losses) / len(losses)) <= 1e-12
        assert abs(s.sigma_acc - var ** 0.5) <= 1e-12

    def test_empty_rejected(self):
        with pytest.raises(UsageError):
            summarize([], [])


@pytest.fixture
def small_config(data_dir):
    return ExperimentConfig(data_dir=str(data_dir), subset=800, epochs=2,
                            depth=2, base_seed=0)


class TestEvaluate:
    def test_uniform_network(self, data_dir):
        # zero-weight single dense layer emits uniform logits
        from nish_lab.tensor_nn import Flatten, NetworkSpec
        spec = NetworkSpec((Flatten(), Dense(784, 10)))
        params, state = init_params(spec, np.random.default_rng(0))
        params["1.weight"][:] = 0.0
        full = data_mod.load_corpus(data_dir)
        loss, acc = evaluate(spec, params, state, full)
        assert loss == pytest.approx(np.log(10.0), abs=1e-5)
        prior = np.bincount(full.labels, minlength=10).max() / len(full)
        assert acc <= prior + 1e-9

    def test_accuracy_matches_manual_recount(self, data_dir):
        from nish_lab.tensor_nn import Flatten, NetworkSpec
        spec = NetworkSpec((Flatten(), Dense(784, 10)))
        params, state = init_params(spec, np.random.default_rng(8))
        test = data_mod.load_corpus(data_dir).take(200)
        _, acc = evaluate(spec, params, state, test)
        correct = 0
        for i in range(len(test)):  # one sample at a time, by hand
            logits, _ = network_forward(spec, params, state,
                                        test.images[i:i + 1], Mode.EVAL)
            correct += int(np.argmax(logits[0])) == int(test.labels[i])
        assert acc == pytest.approx(correct / len(test), abs=1e-12)

    def test_empty_test_set_rejected(self):
        from nish_lab.tensor_nn import Flatten, NetworkSpec
        spec = NetworkSpec((Flatten(), Dense(784, 10)))
        params, state = init_params(spec, np.random.default_rng(0))
        empty = data_mod.Dataset(np.zeros((0, 1, 28, 28), np.float32),
                                 np.zeros(0, np.int64))
        with pytest.raises(UsageError):
            evaluate(spec, params, state, empty)


class TestTrainModel:
    def test_zero_epochs(self, small_config, data_dir):
        cfg = ExperimentConfig(data_dir=str(data_dir), subset=500, epochs=0)
        train, test = prepare_data(cfg)
        m = train_model(cfg, 0, train, test)
        assert m.test_acc == [] and not m.diverged

    def test_determinism(self, small_config):
        train, test = prepare_data(small_config)
        a = train_model(small_config, 3, train, test)
        b = train_model(small_config, 3, train, test)
        assert a.train_loss == b.train_loss
        assert a.test_loss == b.test_loss
        assert a.test_acc == b.test_acc

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_marked_not_raised(self, data_dir):
        cfg = ExperimentConfig(data_dir=str(data_dir), subset=500, epochs=2,
                               optimizer=OptimizerConfig(learning_rate=1e30))
        train, test = prepare_data(cfg)
        m = train_model(cfg, 0, train, test)
        assert m.diverged

    @pytest.mark.parametrize("tag", sorted(STANDARD_KINDS))
    def test_every_activation_trains_one_epoch(self, tag, data_dir):
        kind = STANDARD_KINDS[tag]
        cfg = ExperimentConfig(data_dir=str(data_dir), subset=400, epochs=1,
                               depth=1, activation=kind,
                               optimizer=OptimizerConfig(learning_rate=0.01))
        train, test = prepare_data(cfg)
        m = train_model(cfg, 0, train, test)
        assert not m.diverged
        assert len(m.test_acc) == 1


class TestMultiRun:
    def test_two_runs_aggregate(self, small_config):
        cfg = ExperimentConfig(data_dir=small_config.data_dir, subset=600,
                               epochs=1, depth=1, n_runs=2)
        summary, all_metrics = multi_run(cfg)
        assert summary.n_runs == 2
        assert summary.sigma_acc is not None
        assert len(all_metrics) == 2
        assert all_metrics[0].seed == cfg.base_seed
        assert all_metrics[1].seed == cfg.base_seed + 1

    def test_determinism(self, small_config):
        cfg = ExperimentConfig(data_dir=small_config.data_dir, subset=600,
                               epochs=1, depth=1, n_runs=2)
        s1, _ = multi_run(cfg)
        s2, _ = multi_run(cfg)
        assert s1 == s2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_all_diverged_raises(self, data_dir):
        cfg = ExperimentConfig(data_dir=str(data_dir), subset=500, epochs=1,
                               optimizer=OptimizerConfig(learning_rate=1e30))
        with pytest.raises(ExperimentError):
            with pytest.warns(UserWarning):
                multi_run(cfg)


class TestSweeps:
    def test_depth_sweep_row_count(self, data_dir):
        cfg = ExperimentConfig(data_dir=str(data_dir), subset=400, epochs=1)
        kinds = [STANDARD_KINDS["relu"], STANDARD_KINDS["nish"]]
        rows = depth_sweep(cfg, [1, 2], kinds)
        # one row per (depth, activation, run, epoch)
        assert len(rows) == 2 * 2 * 1 * 1
        assert {r["depth"] for r in rows} == {1, 2}
        assert {r["activation"] for r in rows} == {"relu", "nish"}

    def test_depth_sweep_requires_depths(self, data_dir):
        cfg = ExperimentConfig(data_dir=str(data_dir))
        with pytest.raises(ConfigError):
            depth_sweep(cfg, [], [STANDARD_KINDS["relu"]])

    def test_noise_sweep_rows_and_zero_sigma(self, data_dir):
        cfg = ExperimentConfig(data_dir=str(data_dir), subset=300, epochs=1,
                               batch_size=64,
                               optimizer=OptimizerConfig(learning_rate=0.02))
        rows = noise_sweep(cfg, [0.0, 0.5], "cnn5", [STANDARD_KINDS["nish"]])
        assert len(rows) == 2
        # sigma 0 equals an uncorrupted run with the same seed
        from dataclasses import replace
        cnn_cfg = replace(cfg, architecture="cnn5")
        baseline = train_model(cnn_cfg, cfg.base_seed, *prepare_data(cnn_cfg))
        assert rows[0]["test_acc"] == baseline.test_acc[-1]

    def test_noise_sweep_validation(self, data_dir):
        cfg = ExperimentConfig(data_dir=str(data_dir))
        with pytest.raises(ConfigError):
            noise_sweep(cfg, [0.5, 0.0], "cnn5", [STANDARD_KINDS["nish"]])
        with pytest.raises(ConfigError):
            noise_sweep(cfg, [0.0], "mlp", [STANDARD_KINDS["nish"]])


class TestMetricsRows:
    def test_diverged_run_gets_nan_row(self):
        from nish_lab.harness import RunMetrics
        m = RunMetrics(seed=5, diverged=True)
        rows = metrics_rows("exp", "nish", 3, 0.0, 0, m)
        assert len(rows) == 1
        assert np.isnan(rows[0]["test_acc"])
