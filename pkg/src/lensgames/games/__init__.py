"""Open games over Bayesian lenses: contexts, objectives, constructors."""
from .active import LevelModel, level_game, make_active_inference_game
from .compose import (
    compose_par,
    compose_seq,
    local_context_first,
    local_context_par,
    local_context_second,
)
from .constructors import (
    UNIT,
    discard_channel,
    exact_backward_for,
    make_inference_game,
    make_mle_game,
    make_vae_game,
    state_as_channel,
    state_lens,
    unit_dist,
)
from .core import (
    BestResponse,
    ChannelFamily,
    Context,
    OpenGame,
    RowGridFamily,
    StrategySpace,
    argmin_set,
    simplex_grid,
)
from .objectives import (
    MonteCarlo,
    autoencoder_objective,
    inference_objective,
    mle_objective,
    vae_objective,
)

__all__ = [
    "BestResponse",
    "ChannelFamily",
    "Context",
    "LevelModel",
    "MonteCarlo",
    "OpenGame",
    "RowGridFamily",
    "StrategySpace",
    "UNIT",
    "argmin_set",
    "autoencoder_objective",
    "compose_par",
    "compose_seq",
    "discard_channel",
    "exact_backward_for",
    "inference_objective",
    "level_game",
    "local_context_first",
    "local_context_par",
    "local_context_second",
    "make_active_inference_game",
    "make_inference_game",
    "make_mle_game",
    "make_vae_game",
    "mle_objective",
    "simplex_grid",
    "state_as_channel",
    "state_lens",
    "unit_dist",
    "vae_objective",
]
