"""Concrete stochastic-channel kernel with finite and Gaussian backends."""
from .finite import (
    LOG_ZERO,
    FiniteChannel,
    FiniteDist,
    FiniteStateFamily,
    pair_labels,
    total_variation,
)
from .gaussian import (
    GaussianChannel,
    GaussianState,
    MonteCarloEstimate,
    gaussian_entropy,
    gaussian_log_pdf,
    sample_gaussian,
)
from .io import (
    any_channel_from_json,
    any_channel_to_json,
    channel_from_json,
    channel_to_json,
    dist_from_json,
    dist_to_json,
    dumps_canonical,
    gaussian_channel_from_json,
    gaussian_channel_to_json,
    gaussian_state_from_json,
    gaussian_state_to_json,
    state_from_json,
    state_to_json,
)
from .ops import (
    KL,
    ZERO_DIVERGENCE,
    Channel,
    Divergence,
    State,
    almost_equal,
    apply_partial,
    bayes_invert,
    compose_channels,
    expectation,
    family_at,
    kl,
    log_density,
    log_mass,
    marginalize,
    pushforward,
    tensor,
    worst_deviation,
)

__all__ = [
    "LOG_ZERO",
    "FiniteChannel",
    "FiniteDist",
    "FiniteStateFamily",
    "GaussianChannel",
    "GaussianState",
    "MonteCarloEstimate",
    "KL",
    "ZERO_DIVERGENCE",
    "Channel",
    "Divergence",
    "State",
    "almost_equal",
    "apply_partial",
    "bayes_invert",
    "compose_channels",
    "expectation",
    "family_at",
    "gaussian_entropy",
    "gaussian_log_pdf",
    "kl",
    "log_density",
    "log_mass",
    "marginalize",
    "pair_labels",
    "pushforward",
    "sample_gaussian",
    "tensor",
    "total_variation",
    "worst_deviation",
    "dumps_canonical",
    "dist_to_json",
    "dist_from_json",
    "channel_to_json",
    "channel_from_json",
    "gaussian_state_to_json",
    "gaussian_state_from_json",
    "gaussian_channel_to_json",
    "gaussian_channel_from_json",
    "state_to_json",
    "state_from_json",
    "any_channel_to_json",
    "any_channel_from_json",
]
