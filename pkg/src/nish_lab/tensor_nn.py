"""Minimal tensor network: dense / conv / batchnorm / dropout / activation
layers with exact reverse-mode gradients, softmax cross-entropy, and a
finite-difference gradient checker.

Tensors are plain numpy arrays (row-major, float32 by default; the
gradient checker promotes everything to float64). A network is a
``NetworkSpec`` (ordered layer descriptions) plus a flat dict of
parameter arrays keyed ``"<layer_index>.<name>"``; batchnorm running
statistics live in a separate state dict because they are state, not
learnables.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .activations import (
    ActivationKind,
    Mode,
    activation_derivative,
    activation_forward,
    activation_param_gradient,
)
from .errors import ConfigError, DataError, ShapeError, UsageError

DEFAULT_DTYPE = np.float32


# ---------------------------------------------------------------------------
# Layer specs


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class Conv2D:
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class BatchNorm:
    num_features: int
    epsilon: float = 1e-5
    momentum: float = 0.1


@dataclass(frozen=True)
class Dropout:
    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError("dropout rate must be in [0, 1)")


@dataclass(frozen=True)
class Activation:
    kind: ActivationKind


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple

    def __iter__(self):
        return iter(self.layers)


# ---------------------------------------------------------------------------
# Parameter initialization


def init_params(spec: NetworkSpec, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
    """Returns (params, state) dicts matching ``spec``.

    Dense/conv weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    """
    params: dict[str, np.ndarray] = {}
    state: dict[str, np.ndarray] = {}
    for i, layer in enumerate(spec):
        if isinstance(layer, Dense):
            bound = 1.0 / np.sqrt(layer.in_features)
            params[f"{i}.weight"] = rng.uniform(
                -bound, bound, (layer.in_features, layer.out_features)
            ).astype(dtype)
            params[f"{i}.bias"] = np.zeros(layer.out_features, dtype=dtype)
        elif isinstance(layer, Conv2D):
            fan_in = layer.in_channels * layer.kernel_size ** 2
            bound = 1.0 / np.sqrt(fan_in)
            params[f"{i}.weight"] = rng.uniform(
                -bound, bound,
                (layer.out_channels, layer.in_channels,
                 layer.kernel_size, layer.kernel_size),
            ).astype(dtype)
            params[f"{i}.bias"] = np.zeros(layer.out_channels, dtype=dtype)
        elif isinstance(layer, BatchNorm):
            params[f"{i}.gamma"] = np.ones(layer.num_features, dtype=dtype)
            params[f"{i}.beta"] = np.zeros(layer.num_features, dtype=dtype)
            state[f"{i}.running_mean"] = np.zeros(layer.num_features, dtype=dtype)
            state[f"{i}.running_var"] = np.ones(layer.num_features, dtype=dtype)
        elif isinstance(layer, Activation):
            name = layer.kind.trainable_param
            if name == "rho":
                params[f"{i}.rho"] = np.array(layer.kind.rho, dtype=dtype)
            elif name == "beta":
                params[f"{i}.beta"] = np.array(layer.kind.beta, dtype=dtype)
    return params, state


# ---------------------------------------------------------------------------
# Individual layer math


def dense_forward(x, W, b):
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeError(f"dense shapes do not conform: x{x.shape} W{W.shape} b{b.shape}")
    return x @ W + b


def dense_backward(dy, x, W):
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def _conv_out_size(size, K, stride, padding):
    span = size + 2 * padding - K
    if span < 0 or span % stride != 0:
        raise ShapeError(
            f"conv output size is not an integer: input {size}, kernel {K}, "
            f"stride {stride}, padding {padding}"
        )
    return span // stride + 1


def _im2col(x, K, stride, padding):
    B, C, H, W = x.shape
    Ho = _conv_out_size(H, K, stride, padding)
    Wo = _conv_out_size(W, K, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    s0, s1, s2, s3 = xp.strides
    view = as_strided(
        xp, (B, C, K, K, Ho, Wo), (s0, s1, s2, s3, s2 * stride, s3 * stride)
    )
    return np.ascontiguousarray(view).reshape(B, C * K * K, Ho * Wo), (Ho, Wo)


def _col2im(dcols, x_shape, K, stride, padding):
    B, C, H, W = x_shape
    Ho = _conv_out_size(H, K, stride, padding)
    Wo = _conv_out_size(W, K, stride, padding)
    dview = dcols.reshape(B, C, K, K, Ho, Wo)
    dxp = np.zeros((B, C, H + 2 * padding, W + 2 * padding), dtype=dcols.dtype)
    for i in range(K):
        for j in range(K):
            dxp[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += \
                dview[:, :, i, j]
    if padding:
        return dxp[:, :, padding:padding + H, padding:padding + W]
    return dxp


def conv2d_forward(x, kernels, bias, stride=1, padding=0):
    """Direct cross-correlation (no kernel flip) with zero padding."""
    if x.ndim != 4 or kernels.ndim != 4 or x.shape[1] != kernels.shape[1]:
        raise ShapeError(f"conv shapes do not conform: x{x.shape} k{kernels.shape}")
    F, C, K, K2 = kernels.shape
    if K != K2:
        raise ShapeError("only square kernels are supported")
    cols, (Ho, Wo) = _im2col(x, K, stride, padding)
    y = kernels.reshape(F, -1) @ cols  # (B, F, Ho*Wo) by broadcasting
    y += bias[:, None]
    return y.reshape(x.shape[0], F, Ho, Wo)


def conv2d_backward(dy, x, kernels, stride=1, padding=0):
    F, C, K, _ = kernels.shape
    B = x.shape[0]
    cols, (Ho, Wo) = _im2col(x, K, stride, padding)
    dyf = dy.reshape(B, F, Ho * Wo)
    dW = np.einsum("bfp,bcp->fc", dyf, cols).reshape(kernels.shape)
    db = dyf.sum(axis=(0, 2))
    dcols = kernels.reshape(F, -1).T @ dyf  # (B, C*K*K, Ho*Wo)
    dx = _col2im(dcols, x.shape, K, stride, padding)
    return dx, dW, db


def _feature_shape(ndim, num_features):
    shape = [1] * ndim
    shape[1] = num_features
    return tuple(shape)


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode,
                      epsilon=1e-5, momentum=0.1):
    """Normalize over the batch (and spatial dims for 4-D inputs).

    Training mode uses batch statistics and updates the running stats in
    place (running <- (1-momentum)*running + momentum*batch). Eval mode
    uses the running stats. Returns (y, cache_for_backward).
    """
    if x.ndim not in (2, 4):
        raise ShapeError("batchnorm expects a 2-D or 4-D tensor")
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    fs = _feature_shape(x.ndim, gamma.shape[0])
    if mode is Mode.TRAIN:
        if x.shape[0] < 2:
            raise ConfigError("batchnorm training needs batch size >= 2")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var
    inv_std = 1.0 / np.sqrt(var + epsilon)
    xhat = (x - mean.reshape(fs)) * inv_std.reshape(fs)
    y = gamma.reshape(fs) * xhat + beta.reshape(fs)
    cache = (xhat, inv_std, axes, fs, mode)
    return y, cache


def batchnorm_backward(dy, gamma, cache):
    xhat, inv_std, axes, fs, mode = cache
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    if mode is Mode.TRAIN:
        m = np.prod([xhat.shape[a] for a in axes])
        dx = (gamma.reshape(fs) * inv_std.reshape(fs) / m) * (
            m * dy - dbeta.reshape(fs) - xhat * dgamma.reshape(fs)
        )
    else:
        dx = dy * gamma.reshape(fs) * inv_std.reshape(fs)
    return dx, dgamma, dbeta


def dropout_forward(x, rate, mode, rng=None):
    """Inverted dropout: survivors scaled by 1/(1-rate) at train time."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError("dropout rate must be in [0, 1)")
    if mode is not Mode.TRAIN or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("dropout in training mode needs an rng")
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    labels = np.asarray(labels)
    B, C = logits.shape
    if labels.shape != (B,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {B}")
    if labels.min() < 0 or labels.max() >= C:
        raise DataError(f"labels out of range [0, {C})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - logsumexp
    loss = -float(log_probs[np.arange(B), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(B), labels] -= 1.0
    grad /= B
    return loss, grad.astype(logits.dtype)


# ---------------------------------------------------------------------------
# Whole-network forward / backward


def _effective_kind(layer, params, i):
    kind = layer.kind
    name = kind.trainable_param
    if name == "rho":
        return replace(kind, rho=float(params[f"{i}.rho"]))
    if name == "beta":
        return replace(kind, beta=float(params[f"{i}.beta"]))
    return kind


def network_forward(spec, params, state, x, mode=Mode.EVAL, rng=None):
    """Run the network, returning (output, cache). The cache holds what
    backward needs (layer inputs, dropout masks, sampled RReLU slopes,
    batchnorm batch statistics)."""
    cache = []
    for i, layer in enumerate(spec):
        if isinstance(layer, Dense):
            y = dense_forward(x, params[f"{i}.weight"], params[f"{i}.bias"])
            cache.append(("dense", x))
        elif isinstance(layer, Conv2D):
            y = conv2d_forward(x, params[f"{i}.weight"], params[f"{i}.bias"],
                               layer.stride, layer.padding)
            cache.append(("conv", x))
        elif isinstance(layer, BatchNorm):
            y, bn_cache = batchnorm_forward(
                x, params[f"{i}.gamma"], params[f"{i}.beta"],
                state[f"{i}.running_mean"], state[f"{i}.running_var"],
                mode, layer.epsilon, layer.momentum,
            )
            cache.append(("bn", bn_cache))
        elif isinstance(layer, Dropout):
            y, mask = dropout_forward(x, layer.rate, mode, rng)
            cache.append(("dropout", mask))
        elif isinstance(layer, Activation):
            kind = _effective_kind(layer, params, i)
            y, slope = activation_forward(kind, x, mode, rng)
            cache.append(("act", (x, kind, slope)))
        elif isinstance(layer, Flatten):
            y = x.reshape(x.shape[0], -1)
            cache.append(("flatten", x.shape))
        else:
            raise ConfigError(f"unknown layer spec {layer!r}")
        x = y
    return x, cache


def network_backward(spec, params, cache, output_grad):
    """Exact reverse-mode gradients for every learnable tensor."""
    if len(cache) != len(spec.layers):
        raise UsageError("cache does not match the network spec")
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dy = output_grad
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        tag, saved = cache[i]
        if isinstance(layer, Dense):
            if tag != "dense":
                raise UsageError("cache does not match the network spec")
            dy, grads[f"{i}.weight"], grads[f"{i}.bias"] = dense_backward(
                dy, saved, params[f"{i}.weight"]
            )
        elif isinstance(layer, Conv2D):
            dy, grads[f"{i}.weight"], grads[f"{i}.bias"] = conv2d_backward(
                dy, saved, params[f"{i}.weight"], layer.stride, layer.padding
            )
        elif isinstance(layer, BatchNorm):
            dy, grads[f"{i}.gamma"], grads[f"{i}.beta"] = batchnorm_backward(
                dy, params[f"{i}.gamma"], saved
            )
        elif isinstance(layer, Dropout):
            if saved is not None:
                dy = dy * saved
        elif isinstance(layer, Activation):
            x, kind, slope = saved
            name = kind.trainable_param
            if name is not None:
                pg = activation_param_gradient(kind, x)
                key = f"{i}.rho" if name == "rho" else f"{i}.beta"
                grads[key] = np.asarray((dy * pg).sum(), dtype=params[key].dtype)
            dy = dy * activation_derivative(kind, x, slope)
        elif isinstance(layer, Flatten):
            dy = dy.reshape(saved)
    return grads


# ---------------------------------------------------------------------------
# Gradient checking


def gradient_check_input(n_inputs=784, batch=1, n_classes=10, seed=0):
    """Canonical input for gradient checking: entries bounded away from
    zero (random sign times U[0.5, 1.5]) so no parameter gradient is
    degenerately small, which would let finite-difference roundoff
    dominate the relative discrepancy."""
    rng = np.random.default_rng(seed)
    x = rng.choice([-1.0, 1.0], size=(batch, n_inputs)) * \
        rng.uniform(0.5, 1.5, size=(batch, n_inputs))
    labels = rng.integers(0, n_classes, size=batch)
    return x, labels


def gradient_check(spec, params, state, x, labels, h=1e-5):
    """Compare backward gradients against central finite differences.

    The whole pipeline runs in float64 and in Eval mode (batchnorm uses
    running statistics, dropout is the identity, RReLU uses its fixed
    slope), so every draw is deterministic. Returns the maximum relative
    discrepancy over all learnable scalars.
    """
    p64 = {k: v.astype(np.float64) for k, v in params.items()}
    s64 = {k: v.astype(np.float64) for k, v in state.items()}
    x64 = x.astype(np.float64)

    out, cache = network_forward(spec, p64, s64, x64, Mode.EVAL)
    _, dlogits = softmax_cross_entropy(out, labels)
    grads = network_backward(spec, p64, cache, dlogits)

    def loss_at():
        out, _ = network_forward(spec, p64, s64, x64, Mode.EVAL)
        return softmax_cross_entropy(out, labels)[0]

    worst = 0.0
    for key, arr in p64.items():
        g = grads[key]
        flat = arr.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp = loss_at()
            flat[j] = orig - h
            lm = loss_at()
            flat[j] = orig
            fd = (lp - lm) / (2.0 * h)
            a, b = fd, float(gflat[j])
            rel = abs(a - b) / max(abs(a), abs(b), 1e-8)
            if rel > worst:
                worst = rel
    return worst
