"""Constructors for the atomic statistical game families."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import EmptyStrategySpace
from ..lens import BayesLens, StateDependentChannel, exact_lens_of
from ..prob import (
    KL,
    Channel,
    Divergence,
    FiniteChannel,
    FiniteDist,
    State,
    bayes_invert,
    pushforward,
)
from ..tolerances import TOL
from .core import (
    BestResponse,
    ChannelFamily,
    Context,
    OpenGame,
    RowGridFamily,
    StrategySpace,
    argmin_set,
)
from .objectives import inference_objective, mle_objective, vae_objective

#: Label of the one-point space used for trivial lens legs.
UNIT = "*"


def unit_dist() -> FiniteDist:
    return FiniteDist((UNIT,), [1.0])


def state_as_channel(pi: FiniteDist) -> FiniteChannel:
    """A state packaged as a channel out of the one-point space."""
    return FiniteChannel((UNIT,), pi.support, pi.probs.reshape(1, -1))


def discard_channel(labels) -> FiniteChannel:
    """The unique channel into the one-point space."""
    labels = tuple(labels)
    return FiniteChannel(labels, (UNIT,), np.ones((len(labels), 1)))


def state_lens(pi: FiniteDist) -> BayesLens:
    """The lens fully specified by a state: forward emits the state, the
    backward part discards."""
    return BayesLens(
        state_as_channel(pi),
        StateDependentChannel.constant(discard_channel(pi.support), label="discard"),
    )


def make_mle_game(candidates: Sequence[State], *, log_score: bool = False) -> OpenGame:
    """Maximum likelihood game over an enumerated set of candidate states.

    Strategies are indices into ``candidates``; each plays the lens that
    just emits the candidate.  The best response in a context is the
    candidate set maximising the likelihood of the state obtained from the
    continuation (ties within ``TOL.tie`` all included).
    """
    candidates = tuple(candidates)
    if not candidates:
        raise EmptyStrategySpace("no candidate states")
    space = candidates[0].support if isinstance(candidates[0], FiniteDist) else None

    strategies = StrategySpace(
        "enumeration",
        decoder=lambda i: state_lens(candidates[i]),
        elements=tuple(range(len(candidates))),
    )

    def fitness(i, ctx: Context) -> float:
        return mle_objective(candidates[i], ctx, log_score=log_score)

    return OpenGame(
        dom=(UNIT,),
        cod=space,
        strategies=strategies,
        fitness=fitness,
        label="maximum likelihood",
    )


def backward_family_sdc(family: ChannelFamily, param) -> StateDependentChannel:
    """Family members are plain channels used uniformly for every prior."""
    channel = family(param)
    return StateDependentChannel.constant(channel, label=f"{family.label}[{param!r}]")


def make_inference_game(c: Channel, back_family: ChannelFamily,
                        divergence: Divergence = KL) -> OpenGame:
    """Bayesian inference game: fixed forward channel, strategies range
    over a family of backward channels.

    For :class:`RowGridFamily` strategies with a full-support data state
    the argmin separates across rows (the objective is a weighted sum of
    independent per-row terms), which keeps fine grids tractable.
    """

    def decode(param) -> BayesLens:
        return BayesLens(c, backward_family_sdc(back_family, param))

    strategies = StrategySpace(
        "grid" if isinstance(back_family, RowGridFamily) else "enumeration",
        decoder=decode,
        elements=back_family.params,
    )

    def fitness(param, ctx: Context) -> float:
        return inference_objective(c, backward_family_sdc(back_family, param),
                                   divergence, ctx)

    response_builder = None
    if isinstance(back_family, RowGridFamily):
        def response_builder(ctx: Context) -> BestResponse:
            return BestResponse(strategies=_row_separable_argmin(
                c, back_family, divergence, ctx))

    return OpenGame(
        dom=None,
        cod=None,
        strategies=strategies,
        fitness=fitness,
        response_builder=response_builder,
        label="inference",
    )


def _row_separable_argmin(c: Channel, family: RowGridFamily,
                          divergence: Divergence, ctx: Context) -> tuple:
    """Per-row argmin over a row grid; valid because each data point's loss
    depends only on that row of the backward channel."""
    from ..prob import log_density

    pi = ctx.prior
    m = pushforward(ctx.continuation, pushforward(c, pi))
    # per-candidate-row divergence and reconstruction pieces
    cand = [np.asarray(row, dtype=float) for row in family.row_candidates]
    rates = np.array([divergence(FiniteDist(pi.support, r), pi) if r.min() >= 0 else np.inf
                      for r in cand])
    best_rows: list[tuple] = []
    for x in family.domain:
        w = m.prob(x)
        nll = np.array([-log_density(c, x, z) for z in pi.support])
        # E_{z~row}[-log p(x|z)] + D(row, prior), with 0 * inf treated as 0
        scores = np.empty(len(cand))
        for j, r in enumerate(cand):
            mask = r > 0.0
            scores[j] = float(r[mask] @ nll[mask]) + rates[j]
        if w <= TOL.support:
            # zero-weight row: any candidate is optimal; keep the first for
            # a deterministic, single representative
            best_rows.append((family.row_candidates[int(np.argmin(scores))],))
        else:
            ties = argmin_set(list(w * scores), family.row_candidates)
            best_rows.append(tuple(ties))
    out = []
    def rec(i, prefix):
        if i == len(best_rows):
            out.append(tuple(prefix))
            return
        for row in best_rows[i]:
            rec(i + 1, prefix + [row])
    rec(0, [])
    return tuple(out)


def make_vae_game(forward_family: ChannelFamily, backward_family: ChannelFamily) -> OpenGame:
    """Variational autoencoder game: joint strategies over a generative
    family and a posterior family, scored by the negative ELBO."""

    def decode(param) -> BayesLens:
        f_param, b_param = param
        return BayesLens(forward_family(f_param),
                         backward_family_sdc(backward_family, b_param))

    if forward_family.enumerable and backward_family.enumerable:
        elements = tuple(
            (f, b) for f in forward_family.params for b in backward_family.params
        )
        strategies = StrategySpace("enumeration", decode, elements)
    elif forward_family.enumerable and len(forward_family.params) == 1:
        only = forward_family.params[0]
        strategies = StrategySpace(
            "vector",
            decoder=lambda theta: decode((only, tuple(theta))),
            bounds=backward_family.bounds,
        )
    else:
        raise EmptyStrategySpace(
            "vae strategies must be enumerable, or a singleton forward family "
            "with a vector backward family"
        )

    def fitness(param, ctx: Context) -> float:
        if strategies.kind == "vector":
            f_param, b_param = forward_family.params[0], tuple(np.atleast_1d(param))
        else:
            f_param, b_param = param
        return vae_objective(forward_family(f_param),
                             backward_family_sdc(backward_family, b_param), ctx)

    return OpenGame(
        dom=None,
        cod=None,
        strategies=strategies,
        fitness=fitness,
        label="variational autoencoder",
    )


def exact_backward_for(c: Channel) -> StateDependentChannel:
    """The true inversion of ``c`` as a state-dependent backward part."""
    return exact_lens_of(c).backward
