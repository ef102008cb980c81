"""Training harness: optimizers, architecture builders, single runs,
multi-run statistics, and the depth / noise sweep drivers."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from .activations import ActivationKind, Mode, STANDARD_KINDS
from .errors import (
    ConfigError,
    DomainError,
    ExperimentError,
    TrainingError,
    UsageError,
)
from .tensor_nn import (
    Activation,
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    NetworkSpec,
    init_params,
    network_backward,
    network_forward,
    softmax_cross_entropy,
)

CSV_FIELDS = (
    "experiment", "activation", "depth", "sigma", "run", "epoch",
    "train_loss", "test_loss", "test_acc", "seed",
)


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd"
    learning_rate: float = 0.1
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("adam betas must be in [0, 1)")
        if not self.epsilon > 0:
            raise ConfigError("adam epsilon must be > 0")


ADAM_DEFAULTS = OptimizerConfig(kind="adam", learning_rate=1e-3)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully determines a run: run i uses seed = base_seed + i."""

    name: str = "train"
    architecture: str = "mlp"          # mlp | cnn5 | cnn10
    depth: int = 3                     # hidden blocks (mlp only)
    activation: ActivationKind = STANDARD_KINDS["nish"]
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch_size: int = 128
    epochs: int = 5
    n_runs: int = 1
    base_seed: int = 0
    data_dir: str = "data"
    subset: int | None = 10000         # training subset size, None = all
    train_fraction: float = 0.85
    noise_sigma: float = 0.0
    noise_seed: int | None = None      # None = derived from base_seed

    def __post_init__(self):
        if self.architecture not in ("mlp", "cnn5", "cnn10"):
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if self.batch_size < 1 or self.epochs < 0 or self.n_runs < 1:
            raise ConfigError("batch_size/epochs/n_runs out of range")
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")


@dataclass
class RunMetrics:
    seed: int
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    diverged: bool = False


@dataclass(frozen=True)
class StatSummary:
    mu_acc: float
    mu_loss: float
    sigma_acc: float | None
    n_runs: int


# ---------------------------------------------------------------------------
# Architectures


def build_mlp(depth: int, kind: ActivationKind, width: int = 128,
              dropout_rate: float = 0.25, in_pixels: int = 784,
              n_classes: int = 10) -> NetworkSpec:
    """flatten -> depth x [dense(width), batchnorm, activation, dropout]
    -> dense(n_classes)."""
    layers: list = [Flatten()]
    prev = in_pixels
    for _ in range(depth):
        layers += [Dense(prev, width), BatchNorm(width), Activation(kind),
                   Dropout(dropout_rate)]
        prev = width
    layers.append(Dense(prev, n_classes))
    return NetworkSpec(tuple(layers))


def build_cnn5(kind: ActivationKind, n_classes: int = 10) -> NetworkSpec:
    """Five weighted layers: three 3x3 conv blocks then a two-layer head."""
    return NetworkSpec((
        Conv2D(1, 16, 3), BatchNorm(16), Activation(kind),
        Conv2D(16, 16, 3), BatchNorm(16), Activation(kind),
        Conv2D(16, 16, 3), BatchNorm(16), Activation(kind),
        Flatten(),
        Dense(16 * 22 * 22, 128), Activation(kind),
        Dense(128, n_classes),
    ))


def build_cnn10(kind: ActivationKind, n_classes: int = 10) -> NetworkSpec:
    """Ten weighted layers: four conv blocks (16,16,32,32) and a
    dense 256-128-64-32-16 chain before the classifier."""
    return NetworkSpec((
        Conv2D(1, 16, 3, stride=1, padding=1), BatchNorm(16), Activation(kind),
        Conv2D(16, 16, 4, stride=2, padding=1), BatchNorm(16), Activation(kind),
        Conv2D(16, 32, 3, stride=1, padding=1), BatchNorm(32), Activation(kind),
        Conv2D(32, 32, 4, stride=2, padding=1), BatchNorm(32), Activation(kind),
        Flatten(),
        Dense(32 * 7 * 7, 256), Activation(kind),
        Dense(256, 128), Activation(kind),
        Dense(128, 64), Activation(kind),
        Dense(64, 32), Activation(kind),
        Dense(32, 16), Activation(kind),
        Dense(16, n_classes),
    ))


def build_architecture(config: ExperimentConfig) -> NetworkSpec:
    if config.architecture == "mlp":
        return build_mlp(config.depth, config.activation)
    if config.architecture == "cnn5":
        return build_cnn5(config.activation)
    return build_cnn10(config.activation)


# ---------------------------------------------------------------------------
# Optimizers


def _check_grads_finite(grads):
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter {key}")


def init_sgd_state(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def sgd_step(params, grads, velocity, lr, momentum=0.0):
    """v <- momentum*v + g;  p <- p - lr*v. In-place."""
    _check_grads_finite(grads)
    for k, p in params.items():
        v = velocity[k]
        v *= momentum
        v += grads[k]
        p -= lr * v


def init_adam_state(params):
    return (
        {k: np.zeros_like(v) for k, v in params.items()},
        {k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(params, grads, m_state, v_state, t, config: OptimizerConfig):
    """Standard Adam with bias correction. In-place; t starts at 1."""
    if t < 1:
        raise UsageError("adam step count t must be >= 1")
    _check_grads_finite(grads)
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for k, p in params.items():
        g = grads[k]
        m = m_state[k]
        v = v_state[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.epsilon)


# ---------------------------------------------------------------------------
# Training and evaluation


def evaluate(spec, params, state, test: data_mod.Dataset, batch_size: int = 512):
    """Eval-mode loss and argmax accuracy over the whole test set."""
    if len(test) == 0:
        raise UsageError("empty test set")
    total_loss = 0.0
    correct = 0
    for images, labels in data_mod.batches(test, batch_size):
        logits, _ = network_forward(spec, params, state, images, Mode.EVAL)
        loss, _ = softmax_cross_entropy(logits, labels)
        total_loss += loss * len(labels)
        correct += int((logits.argmax(axis=1) == labels).sum())
    n = len(test)
    return total_loss / n, correct / n


def train_model(config: ExperimentConfig, seed: int,
                train: data_mod.Dataset, test: data_mod.Dataset) -> RunMetrics:
    """One run: per-epoch train loop then full test evaluation.

    Divergence (non-finite loss or gradients) aborts the run and marks
    the metrics as diverged instead of raising.
    """
    rng = np.random.default_rng(seed)
    spec = build_architecture(config)
    params, state = init_params(spec, rng)
    opt = config.optimizer
    if opt.kind == "sgd":
        velocity = init_sgd_state(params)
    else:
        m_state, v_state = init_adam_state(params)
    t = 0
    metrics = RunMetrics(seed=seed)
    for _epoch in range(config.epochs):
        started = time.perf_counter()
        epoch_loss = 0.0
        n_seen = 0
        shuffle_seed = int(rng.integers(2 ** 63))
        try:
            for images, labels in data_mod.batches(train, config.batch_size,
                                                   shuffle_seed):
                logits, cache = network_forward(
                    spec, params, state, images, Mode.TRAIN, rng
                )
                loss, dlogits = softmax_cross_entropy(logits, labels)
                if not math.isfinite(loss):
                    raise TrainingError("non-finite training loss")
                grads = network_backward(spec, params, cache, dlogits)
                t += 1
                if opt.kind == "sgd":
                    sgd_step(params, grads, velocity, opt.learning_rate,
                             opt.momentum)
                else:
                    adam_step(params, grads, m_state, v_state, t, opt)
                epoch_loss += loss * len(labels)
                n_seen += len(labels)
        except (TrainingError, DomainError):
            # non-finite loss, gradients, or layer inputs: the run blew up
            metrics.diverged = True
            break
        test_loss, test_acc = evaluate(spec, params, state, test)
        if not math.isfinite(test_loss):
            metrics.diverged = True
            break
        metrics.train_loss.append(epoch_loss / max(n_seen, 1))
        metrics.test_loss.append(test_loss)
        metrics.test_acc.append(test_acc)
        metrics.epoch_seconds.append(time.perf_counter() - started)
    return metrics


def _derived_noise_seed(base_seed: int, sigma_index: int) -> int:
    return int(np.random.SeedSequence([base_seed, sigma_index]).generate_state(1)[0])


def prepare_data(config: ExperimentConfig, sigma_index: int = 0):
    """Load, split 85/15, subset, and (optionally) corrupt both sides."""
    full = data_mod.load_corpus(config.data_dir)
    train, test = data_mod.merge_and_split(full, config.train_fraction,
                                           config.base_seed)
    if config.subset is not None:
        train = train.take(config.subset)
    if config.noise_sigma > 0:
        seed = (config.noise_seed if config.noise_seed is not None
                else _derived_noise_seed(config.base_seed, sigma_index))
        spec_tr = data_mod.NoiseSpec(config.noise_sigma, seed)
        spec_te = data_mod.NoiseSpec(config.noise_sigma, seed + 1)
        train = data_mod.Dataset(
            data_mod.add_gaussian_noise(train.images, spec_tr), train.labels
        )
        test = data_mod.Dataset(
            data_mod.add_gaussian_noise(test.images, spec_te), test.labels
        )
    return train, test


def summarize(final_accs, final_losses) -> StatSummary:
    """Mean / sample-std aggregation of per-run final-epoch metrics."""
    if len(final_accs) == 0:
        raise UsageError("nothing to summarize")
    accs = np.asarray(final_accs, dtype=np.float64)
    losses = np.asarray(final_losses, dtype=np.float64)
    sigma = float(accs.std(ddof=1)) if len(accs) >= 2 else None
    return StatSummary(
        mu_acc=float(accs.mean()),
        mu_loss=float(losses.mean()),
        sigma_acc=sigma,
        n_runs=len(accs),
    )


def multi_run(config: ExperimentConfig,
              datasets=None) -> tuple[StatSummary, list[RunMetrics]]:
    """n_runs runs with seeds base_seed..base_seed+n-1; aggregates the
    final-epoch test metrics. Diverged runs are excluded with a warning."""
    if datasets is None:
        datasets = prepare_data(config)
    train, test = datasets
    all_metrics = []
    for i in range(config.n_runs):
        all_metrics.append(train_model(config, config.base_seed + i, train, test))
    converged = [m for m in all_metrics if not m.diverged and m.test_acc]
    diverged = len(all_metrics) - len(converged)
    if diverged:
        warnings.warn(f"{diverged} of {config.n_runs} runs diverged and were "
                      "excluded from aggregation")
    if not converged:
        raise ExperimentError("all runs diverged")
    summary = summarize(
        [m.test_acc[-1] for m in converged],
        [m.test_loss[-1] for m in converged],
    )
    return summary, all_metrics


# ---------------------------------------------------------------------------
# Sweeps


def metrics_rows(experiment, activation_tag, depth, sigma, run_idx, metrics):
    rows = []
    for epoch in range(len(metrics.test_acc)):
        rows.append({
            "experiment": experiment,
            "activation": activation_tag,
            "depth": depth,
            "sigma": sigma,
            "run": run_idx,
            "epoch": epoch,
            "train_loss": metrics.train_loss[epoch],
            "test_loss": metrics.test_loss[epoch],
            "test_acc": metrics.test_acc[epoch],
            "seed": metrics.seed,
        })
    if metrics.diverged:
        rows.append({
            "experiment": experiment,
            "activation": activation_tag,
            "depth": depth,
            "sigma": sigma,
            "run": run_idx,
            "epoch": len(metrics.test_acc),
            "train_loss": float("nan"),
            "test_loss": float("nan"),
            "test_acc": float("nan"),
            "seed": metrics.seed,
        })
    return rows


def depth_sweep(base_config: ExperimentConfig, depths, activations):
    """Train an MLP per (depth, activation) cell; one group of rows per
    cell per run. Diverged cells are recorded, not raised."""
    if not depths:
        raise ConfigError("depths must be non-empty")
    rows = []
    full = prepare_data(replace(base_config, architecture="mlp"))
    for depth in depths:
        for kind in activations:
            cfg = replace(base_config, architecture="mlp", depth=depth,
                          activation=kind)
            for i in range(cfg.n_runs):
                m = train_model(cfg, cfg.base_seed + i, *full)
                rows += metrics_rows("depth_sweep", kind.tag, depth, 0.0, i, m)
    return rows


def noise_sweep(base_config: ExperimentConfig, sigmas, arch, activations):
    """Train ``arch`` per (sigma, activation) cell on data corrupted at
    that sigma (both train and test sides)."""
    if list(sigmas) != sorted(sigmas):
        raise ConfigError("sigmas must be non-decreasing")
    if arch not in ("cnn5", "cnn10"):
        raise ConfigError("noise sweep arch must be cnn5 or cnn10")
    rows = []
    for si, sigma in enumerate(sigmas):
        cfg_data = replace(base_config, architecture=arch,
                           noise_sigma=float(sigma))
        datasets = prepare_data(cfg_data, sigma_index=si)
        for kind in activations:
            cfg = replace(cfg_data, activation=kind)
            for i in range(cfg.n_runs):
                m = train_model(cfg, cfg.base_seed + i, *datasets)
                rows += metrics_rows(f"noise_sweep_{arch}", kind.tag,
                                     0, float(sigma), i, m)
    return rows
