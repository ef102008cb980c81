"""nish-lab: activation-function laboratory with a minimal numpy network
and a reproducible experiment harness."""

__version__ = "0.1.0"

from .activations import (  # noqa: F401
    ActivationKind,
    Mode,
    STANDARD_KINDS,
    activation_derivative,
    activation_forward,
    activation_param_gradient,
    find_minimum,
    nish,
    nish_prime,
    sigmoid,
    softplus,
)
