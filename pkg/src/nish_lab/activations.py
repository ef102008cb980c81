"""Scalar mathematics of the activation family.

Every function here is vectorized over numpy arrays but accepts plain
floats as well (floats in, floats out). All functions are pure: the only
source of randomness (RReLU training-mode slope sampling) is an explicit
``numpy.random.Generator`` argument.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError, UsageError

# SELU constants from the self-normalizing network literature.
SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

# sqrt(2/pi), used by the tanh form of GELU.
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class Mode(enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass(frozen=True)
class ActivationKind:
    """Tagged descriptor of one activation function and its parameters.

    Parameters irrelevant to ``tag`` are ignored. ``rho`` (PReLU) and
    ``beta`` (Swish, when ``beta_trainable``) are *initial* values; the
    network layer owns the learned copy.
    """

    tag: str
    slope: float = 0.01          # LeakyReLU a
    rho: float = 0.25            # PReLU multiplier
    lower: float = 0.125         # RReLU k
    upper: float = 1.0 / 3.0     # RReLU l
    cap: float = 6.0             # ReLU6 n
    alpha: float = 1.0           # ELU
    beta: float = 1.0            # Swish
    beta_trainable: bool = False

    def __post_init__(self):
        if self.tag not in ALL_TAGS:
            raise ConfigError(f"unknown activation tag {self.tag!r}")
        if self.tag == "leaky_relu" and not self.slope > 0:
            raise ConfigError("LeakyReLU slope must be > 0")
        if self.tag == "rrelu" and not (0 <= self.lower < self.upper < 1):
            raise ConfigError("RReLU bounds need 0 <= k < l < 1")
        if self.tag == "relu6" and not self.cap > 0:
            raise ConfigError("ReLU6 cap must be > 0")
        if self.tag == "swish" and not math.isfinite(self.beta):
            raise ConfigError("Swish beta must be finite")

    @property
    def trainable_param(self) -> str | None:
        """Name of the learnable scalar, if this kind has one."""
        if self.tag == "prelu":
            return "rho"
        if self.tag == "swish" and self.beta_trainable:
            return "beta"
        return None


ALL_TAGS = (
    "relu", "relu6", "leaky_relu", "rrelu", "prelu", "elu", "selu",
    "gelu", "silu", "swish", "mish", "nish",
    # Negative control: Nish forward with the incorrect printed derivative.
    "nish_literal",
)

# The twelve real activation kinds, with default parameters.
STANDARD_KINDS = {
    tag: ActivationKind(tag) for tag in ALL_TAGS if tag != "nish_literal"
}

# Branch joints of the piecewise families. At these points the analytic
# derivative is one-sided (or, for the C1 kinds elu/selu/nish, a higher
# derivative jumps), so central finite differences carry O(h) error there
# and the point must be excluded from FD conformance checks.
def kink_points(kind: ActivationKind) -> tuple[float, ...]:
    if kind.tag in ("relu", "leaky_relu", "rrelu", "prelu", "elu", "selu",
                    "nish", "nish_literal"):
        return (0.0,)
    if kind.tag == "relu6":
        return (0.0, kind.cap)
    return ()


def _check_finite(x):
    arr = np.asarray(x)
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite input")
    return arr


def _as_result(arr, like):
    return float(arr) if np.isscalar(like) or np.ndim(like) == 0 else arr


def sigmoid(x):
    """Logistic sigmoid, sign-branched so it never overflows."""
    arr = _check_finite(x)
    out = np.empty_like(arr, dtype=arr.dtype if arr.dtype.kind == "f" else np.float64)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _as_result(out, x)


def softplus(x):
    """ln(1 + e^x) computed as max(x, 0) + ln(1 + e^-|x|)."""
    arr = _check_finite(x)
    out = np.maximum(arr, 0) + np.log1p(np.exp(-np.abs(arr)))
    return _as_result(out, x)


def nish(x):
    """Identity for x >= 0, sigmoid(x) * (x + sin x) for x < 0."""
    arr = _check_finite(x)
    neg = np.minimum(arr, 0.0)
    out = np.where(arr >= 0, arr, sigmoid(neg) * (neg + np.sin(neg)))
    return _as_result(out, x)


def nish_prime(x):
    """Exact derivative of ``nish`` (product rule on the negative branch)."""
    arr = _check_finite(x)
    neg = np.minimum(arr, 0.0)
    s = sigmoid(neg)
    left = s * (1.0 - s) * (neg + np.sin(neg)) + s * (1.0 + np.cos(neg))
    out = np.where(arr >= 0, np.ones_like(left), left)
    return _as_result(out, x)


def nish_prime_literal(x):
    """The incorrect x*(1-x)*(1+cos x) negative branch, kept as a
    negative control for the gradient checker. Do not use for training."""
    arr = _check_finite(x)
    neg = np.minimum(arr, 0.0)
    left = neg * (1.0 - neg) * (1.0 + np.cos(neg))
    out = np.where(arr >= 0, np.ones_like(left), left)
    return _as_result(out, x)


def _gelu(x):
    u = _GELU_C * (x + _GELU_A * x ** 3)
    return 0.5 * x * (1.0 + np.tanh(u))


def _gelu_prime(x):
    u = _GELU_C * (x + _GELU_A * x ** 3)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x ** 2)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du


def rrelu_eval_slope(kind: ActivationKind) -> float:
    """Deterministic inference slope: the mean of the sampling interval."""
    return 0.5 * (kind.lower + kind.upper)


def activation_forward(kind, x, mode=Mode.EVAL, rng=None):
    """Evaluate ``kind`` at ``x``.

    Returns ``(y, sampled_slope)``. ``sampled_slope`` is only non-None for
    RReLU in training mode, where it holds the per-element slopes drawn
    from Uniform[k, l) — the backward pass needs them.
    """
    arr = _check_finite(x)
    tag = kind.tag
    slope = None
    if tag == "relu":
        y = np.maximum(arr, 0)
    elif tag == "relu6":
        y = np.clip(arr, 0, kind.cap)
    elif tag == "leaky_relu":
        y = np.where(arr >= 0, arr, kind.slope * arr)
    elif tag == "prelu":
        y = np.where(arr >= 0, arr, kind.rho * arr)
    elif tag == "rrelu":
        if mode is Mode.TRAIN:
            if rng is None:
                raise ConfigError("RReLU in training mode needs an rng")
            slope = rng.uniform(kind.lower, kind.upper, size=arr.shape)
            if arr.dtype.kind == "f":
                slope = slope.astype(arr.dtype)
            y = np.where(arr >= 0, arr, slope * arr)
        else:
            y = np.where(arr >= 0, arr, rrelu_eval_slope(kind) * arr)
    elif tag == "elu":
        neg = np.minimum(arr, 0.0)
        y = np.where(arr >= 0, arr, kind.alpha * np.expm1(neg))
    elif tag == "selu":
        neg = np.minimum(arr, 0.0)
        y = SELU_LAMBDA * np.where(arr >= 0, arr, SELU_ALPHA * np.expm1(neg))
    elif tag == "gelu":
        y = _gelu(arr)
    elif tag == "silu":
        y = arr * sigmoid(arr)
    elif tag == "swish":
        y = arr * sigmoid(kind.beta * arr)
    elif tag == "mish":
        y = arr * np.tanh(softplus(arr))
    elif tag in ("nish", "nish_literal"):
        y = nish(arr)
    else:  # pragma: no cover - guarded by ActivationKind
        raise ConfigError(f"unknown tag {tag!r}")
    return _as_result(y, x), slope


def activation_derivative(kind, x, sampled_slope=None):
    """Exact df/dx. Kinks return the right-hand (x >= 0 branch) derivative."""
    arr = _check_finite(x)
    tag = kind.tag
    if tag == "relu":
        d = np.where(arr >= 0, 1.0, 0.0)
    elif tag == "relu6":
        d = np.where((arr >= 0) & (arr < kind.cap), 1.0, 0.0)
    elif tag == "leaky_relu":
        d = np.where(arr >= 0, 1.0, kind.slope)
    elif tag == "prelu":
        d = np.where(arr >= 0, 1.0, kind.rho)
    elif tag == "rrelu":
        neg_slope = rrelu_eval_slope(kind) if sampled_slope is None else sampled_slope
        d = np.where(arr >= 0, 1.0, neg_slope * np.ones_like(arr, dtype=float))
    elif tag == "elu":
        neg = np.minimum(arr, 0.0)
        d = np.where(arr >= 0, 1.0, kind.alpha * np.exp(neg))
    elif tag == "selu":
        neg = np.minimum(arr, 0.0)
        d = SELU_LAMBDA * np.where(arr >= 0, 1.0, SELU_ALPHA * np.exp(neg))
    elif tag == "gelu":
        d = _gelu_prime(arr)
    elif tag == "silu":
        s = sigmoid(arr)
        d = s + arr * s * (1.0 - s)
    elif tag == "swish":
        s = sigmoid(kind.beta * arr)
        d = s + kind.beta * arr * s * (1.0 - s)
    elif tag == "mish":
        sp = softplus(arr)
        t = np.tanh(sp)
        d = t + arr * (1.0 - t ** 2) * sigmoid(arr)
    elif tag == "nish":
        d = nish_prime(arr)
    elif tag == "nish_literal":
        d = nish_prime_literal(arr)
    else:  # pragma: no cover
        raise ConfigError(f"unknown tag {tag!r}")
    if isinstance(d, np.ndarray) and arr.dtype.kind == "f" and d.dtype != arr.dtype:
        d = d.astype(arr.dtype)
    return _as_result(d, x)


def activation_param_gradient(kind, x):
    """df/dparam for kinds with a learnable scalar (PReLU rho, Swish beta)."""
    arr = _check_finite(x)
    if kind.tag == "prelu":
        g = np.where(arr >= 0, 0.0, arr)
    elif kind.tag == "swish" and kind.beta_trainable:
        s = sigmoid(kind.beta * arr)
        g = arr ** 2 * s * (1.0 - s)
    else:
        raise UsageError(f"{kind.tag} has no trainable parameter")
    return _as_result(g, x)


def with_param(kind: ActivationKind, value: float) -> ActivationKind:
    """Copy of ``kind`` with its trainable scalar set to ``value``."""
    name = kind.trainable_param
    if name is None:
        raise UsageError(f"{kind.tag} has no trainable parameter")
    return replace(kind, **{name: value})


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def find_minimum(kind, lo, hi, grid_step=1e-4, tol=1e-8):
    """Global minimum of the activation on [lo, hi].

    Brute force: a dense grid scan locates the best cell, then
    golden-section search refines the bracket. Independent of the
    analytic derivatives, so it can serve as their oracle.
    """
    if not lo < hi:
        raise UsageError("need lo < hi")
    n = max(int(math.ceil((hi - lo) / grid_step)) + 1, 3)
    xs = np.linspace(lo, hi, n)
    ys, _ = activation_forward(kind, xs)
    i = int(np.argmin(ys))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n - 1)]

    def f(x):
        y, _ = activation_forward(kind, float(x))
        return y

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    xm = float(0.5 * (a + b))
    return xm, f(xm)
