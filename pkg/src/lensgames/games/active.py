"""Hierarchical active inference as composed perception/action games.

A level couples a sensory (perception) model with an action (policy)
model.  The sensory model predicts the level below's sense data from the
level's own state and the action taken there; the policy turns the
level's intention into a lower-level action.  One level is a game from
the pair interface (S_i (x) A_i) to (S_{i-1} (x) A_{i-1}) whose forward
pass is acyclic -- intention to action first, then state plus action to
sensation -- and whose backward part factorises over the state and action
legs (the usual mean-field reading).  Levels compose sequentially; the
context at the bottom is the environment, fed back through the
continuation wire.

The loss per level is the sensory autoencoder objective of the
action-averaged sense model against the data actually fed back by the
context, plus an optional divergence charge on the emitted actions.  With
a sharp prior over intended sensations, minimising that loss selects the
actions that make the environment produce those sensations.  This wiring
is one concrete desk-scale instantiation among many admissible ones.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch
from ..lens import BayesLens, StateDependentChannel, exact_lens_of
from ..prob import (
    KL,
    Divergence,
    FiniteChannel,
    FiniteDist,
    GaussianChannel,
    GaussianState,
    State,
    apply_partial,
    bayes_invert,
    marginalize,
    pair_labels,
    pushforward,
    tensor,
)
from .core import ChannelFamily, Context, OpenGame, StrategySpace, product_space
from .compose import compose_seq
from .objectives import autoencoder_objective, vae_objective


@dataclass(frozen=True)
class LevelModel:
    """Generative pieces connecting one level to the one below.

    sense   family of channels (S_up (x) A_down) -> S_down
    policy  family of channels A_up -> A_down
    action_cost / action_prior  optional divergence charged against the
        distribution of emitted lower-level actions.
    """

    sense: ChannelFamily
    policy: ChannelFamily
    action_cost: Divergence | None = None
    action_prior: State | None = None


def _with_blocks(pi: State, dims) -> State:
    """Re-declare the pair factorisation on a Gaussian prior; finite pair
    labels already carry it."""
    if isinstance(pi, GaussianState):
        return GaussianState(pi.mean, pi.cov, blocks=tuple(dims))
    return pi


def _constant_channel(data: State):
    if isinstance(data, FiniteDist):
        return FiniteChannel.constant(data.support, data)
    return GaussianChannel.constant(data.dim, data)


def _joint_forward(sense, policy, s_up, a_up):
    """Forward pass of one level: a' ~ policy(a), then s' ~ sense(s, a')."""
    if isinstance(sense, FiniteChannel):
        dom = pair_labels(tuple(s_up), tuple(a_up))
        a_lo = policy.codomain
        s_lo = sense.codomain
        cod = pair_labels(s_lo, a_lo)
        rows = np.zeros((len(dom), len(cod)))
        for i, (s, a) in enumerate(dom):
            pol_row = policy.at(a)
            for a2, pa in pol_row.items():
                if pa <= 0.0:
                    continue
                sense_row = sense.at((s, a2))
                for s2, ps in sense_row.items():
                    rows[i, cod.index((s2, a2))] += pa * ps
        return FiniteChannel(dom, cod, rows)
    # Gaussian: s' = W_s s + W_a a' + b_s + e_s with a' = A a + b_a + e_a.
    ds_up = int(s_up)
    da_up = int(a_up)
    w_s = sense.weight[:, :ds_up]
    w_a = sense.weight[:, ds_up:]
    ds_lo, da_lo = sense.cod_dim, policy.cod_dim
    weight = np.zeros((ds_lo + da_lo, ds_up + da_up))
    weight[:ds_lo, :ds_up] = w_s
    weight[:ds_lo, ds_up:] = w_a @ policy.weight
    weight[ds_lo:, ds_up:] = policy.weight
    bias = np.concatenate([w_a @ policy.bias + sense.bias, policy.bias])
    noise = np.zeros((ds_lo + da_lo, ds_lo + da_lo))
    noise[:ds_lo, :ds_lo] = sense.noise_cov + w_a @ policy.noise_cov @ w_a.T
    noise[:ds_lo, ds_lo:] = w_a @ policy.noise_cov
    noise[ds_lo:, :ds_lo] = policy.noise_cov @ w_a.T
    noise[ds_lo:, ds_lo:] = policy.noise_cov
    return GaussianChannel(weight, bias, noise)


def _mean_field_backward(sense, policy, s_up, a_up) -> StateDependentChannel:
    """Posterior with independent state and action factors.

    The sense model is averaged over the action marginal before inversion;
    undefined finite rows fall back to the respective priors.
    """

    def backward(pi: State):
        pi = _with_blocks(pi, _dims(s_up, a_up))
        s_prior = marginalize(pi, 0)
        a_prior = marginalize(pi, 1)
        alpha = pushforward(policy, a_prior)
        sense_eff = apply_partial(sense, alpha, keep=0)
        s_fam = bayes_invert(sense_eff, s_prior)
        a_fam = bayes_invert(policy, a_prior)
        s_chan = s_fam.as_channel() if hasattr(s_fam, "as_channel") else s_fam
        a_chan = a_fam.as_channel() if hasattr(a_fam, "as_channel") else a_fam
        return tensor(s_chan, a_chan)

    return StateDependentChannel(backward, label="mean-field inversion")


def _dims(s_space, a_space):
    if isinstance(s_space, int):
        return (int(s_space), int(a_space))
    return None  # finite pair labels carry their own structure


def level_game(upper: tuple, lower: tuple, model: LevelModel, *,
               bookkeeping: str = "autoencoder") -> OpenGame:
    """One level of the hierarchy as an open game on pair interfaces.

    ``upper``/``lower`` are (state space, action space) pairs; spaces are
    label tuples (finite) or dimensions (Gaussian).  ``bookkeeping``
    selects whether the sensory loss is evaluated through the generalized
    autoencoder objective with KL ("autoencoder") or the negative-ELBO
    route ("vae"); the two agree numerically.
    """
    s_up, a_up = upper
    s_lo, a_lo = lower
    gaussian = isinstance(s_up, int)

    def decode_pair(sense_param, pol_param) -> BayesLens:
        sense = model.sense(sense_param)
        policy = model.policy(pol_param)
        return BayesLens(
            _joint_forward(sense, policy, s_up, a_up),
            _mean_field_backward(sense, policy, s_up, a_up),
        )

    sense_space = StrategySpace(
        "enumeration", lambda p: None, elements=model.sense.params
    ) if model.sense.enumerable else StrategySpace(
        "vector", lambda p: None, bounds=model.sense.bounds
    )
    pol_space = StrategySpace(
        "enumeration", lambda p: None, elements=model.policy.params
    ) if model.policy.enumerable else StrategySpace(
        "vector", lambda p: None, bounds=model.policy.bounds
    )
    strategies, split = product_space(sense_space, pol_space,
                                      lambda p: decode_pair(*p))

    def fitness(sigma, ctx: Context) -> float:
        sense_param, pol_param = split(sigma)
        sense = model.sense(sense_param)
        policy = model.policy(pol_param)
        pi = _with_blocks(ctx.prior, _dims(s_up, a_up) if gaussian else None)
        s_prior = marginalize(pi, 0)
        a_prior = marginalize(pi, 1)
        alpha = pushforward(policy, a_prior)
        sense_eff = apply_partial(sense, alpha, keep=0)
        forward = _joint_forward(sense, policy, s_up, a_up)
        fed_back = pushforward(ctx.continuation, pushforward(forward, pi))
        fed_back = _with_blocks(fed_back, _dims(s_lo, a_lo) if gaussian else None)
        data_s = marginalize(fed_back, 0)
        data_a = marginalize(fed_back, 1)
        sense_ctx = Context(prior=s_prior, continuation=_constant_channel(data_s))
        exact_back = exact_lens_of(sense_eff).backward
        if bookkeeping == "vae":
            loss = vae_objective(sense_eff, exact_back, sense_ctx)
        else:
            loss = autoencoder_objective(sense_eff, exact_back, KL, sense_ctx)
        if model.action_cost is not None:
            if model.action_prior is None:
                raise DimensionMismatch("action_cost declared without a prior")
            loss += model.action_cost(data_a, model.action_prior)
        return float(loss)

    return OpenGame(
        dom=(s_up, a_up),
        cod=(s_lo, a_lo),
        strategies=strategies,
        fitness=fitness,
        label=f"active level {bookkeeping}",
    )


def make_active_inference_game(levels: Sequence[tuple], models: Sequence[LevelModel],
                               *, bookkeeping: str = "autoencoder") -> OpenGame:
    """Active inference hierarchy over ``levels`` = [(S_0, A_0), ...,
    (S_N, A_N)], with ``models[i]`` connecting level i+1 to level i.

    The composite maps the top pair interface to the environment-facing
    one; level blocks are composed sequentially from the top down, so
    equilibria are computed with each level seeing the context induced by
    the levels around it.
    """
    levels = list(levels)
    models = list(models)
    if len(models) != len(levels) - 1 or not models:
        raise DimensionMismatch("need one model per adjacent pair of levels")
    blocks = [
        level_game(levels[i + 1], levels[i], models[i], bookkeeping=bookkeeping)
        for i in range(len(models))
    ]
    game = blocks[-1]  # top block
    for block in reversed(blocks[:-1]):
        game = compose_seq(game, block)
    return game
