"""Sequential and parallel composition of open games.

Composites play the composite (or tensored) lens of the factor plays.
The best response to a composite is the product of the factor best
responses, each taken in its *local* context: the original context pre-
and post-composed with the co-factor's played lens.  Because local
contexts depend on what the co-factor currently plays, composite response
maps are strategy-dependent even when every factor is atomic; equilibria
are the strategy profiles that are fixed points of that map.
"""
from __future__ import annotations

import itertools

from ..lens import compose_lens, tensor_lens
from ..prob import apply_partial, compose_channels, marginalize, pushforward, tensor
from .core import BestResponse, Context, OpenGame, StrategySpace, product_space


def local_context_second(first: OpenGame, sigma_first, ctx: Context) -> Context:
    """Context seen by the downstream factor of a sequential composite."""
    lens = first.play(sigma_first)
    return Context(prior=pushforward(lens.forward, ctx.prior),
                   continuation=ctx.continuation)


def local_context_first(second: OpenGame, sigma_second, ctx: Context) -> Context:
    """Context seen by the upstream factor: the continuation is conjugated
    by the downstream play (forward in, backward out at the pushed prior)."""
    lens = second.play(sigma_second)
    # The downstream backward is indexed by the state it will actually see.
    def continuation_for(prior):
        mid = pushforward(lens.forward, prior)  # only used to index backward
        back = lens.backward(mid)
        return compose_channels(back, compose_channels(ctx.continuation, lens.forward))
    return Context(prior=ctx.prior, continuation=continuation_for(ctx.prior))


def compose_seq(first: OpenGame, second: OpenGame) -> OpenGame:
    """Sequential composite: ``first`` runs upstream of ``second``.

    Strategies are pairs; fitness is the sum of the factor losses in their
    local contexts, and the response map pairs the factor responses.
    """

    def decode(profile):
        s1, s2 = profile
        return compose_lens(second.play(s2), first.play(s1))

    strategies, split = product_space(first.strategies, second.strategies, decode)

    def fitness(profile, ctx: Context) -> float:
        s1, s2 = split(profile)
        return (first.fitness(s1, local_context_first(second, s2, ctx))
                + second.fitness(s2, local_context_second(first, s1, ctx)))

    def response_builder(ctx: Context) -> BestResponse:
        def respond(profile):
            s1, s2 = split(profile)
            r1 = first.best_response(local_context_first(second, s2, ctx))(s1)
            r2 = second.best_response(local_context_second(first, s1, ctx))(s2)
            return tuple(itertools.product(r1, r2))
        return BestResponse(fn=respond)

    return OpenGame(
        dom=first.dom,
        cod=second.cod,
        strategies=strategies,
        fitness=fitness,
        atomic=False,
        response_builder=response_builder,
        label=f"{first.label} ; {second.label}",
    )


def local_context_par(ctx: Context, co_game: OpenGame, co_sigma, factor: int) -> Context:
    """Context seen by one leg of a parallel composite.

    The prior marginalises onto the leg's factor; the continuation is the
    joint continuation with the co-factor's wire averaged under the
    pushforward of the co-factor's play.
    """
    co_prior = marginalize(ctx.prior, 1 - factor)
    co_pushed = pushforward(co_game.play(co_sigma).forward, co_prior)
    my_prior = marginalize(ctx.prior, factor)
    # average the co-factor's input wire out of the joint continuation,
    # then keep this leg's output coordinate; the continuation being an
    # endochannel, that coordinate's space equals the reduced domain
    reduced = apply_partial(ctx.continuation, co_pushed, keep=factor)
    from ..prob import FiniteChannel, FiniteDist, GaussianChannel
    if isinstance(reduced, FiniteChannel):
        keep_labels = reduced.domain
        rows = []
        for i in range(len(reduced.domain)):
            dist = FiniteDist(reduced.codomain, reduced.matrix[i])
            rows.append([sum(p for lab, p in dist.items() if lab[factor] == y)
                         for y in keep_labels])
        reduced = FiniteChannel(reduced.domain, keep_labels, rows)
    else:
        d = reduced.dom_dim
        lo = 0 if factor == 0 else reduced.cod_dim - d
        hi = lo + d
        reduced = GaussianChannel(reduced.weight[lo:hi], reduced.bias[lo:hi],
                                  reduced.noise_cov[lo:hi, lo:hi])
    return Context(prior=my_prior, continuation=reduced)


def compose_par(left: OpenGame, right: OpenGame) -> OpenGame:
    """Parallel composite on the tensor of the factor interfaces."""

    def decode(profile):
        s1, s2 = profile
        return tensor_lens(left.play(s1), right.play(s2))

    strategies, split = product_space(left.strategies, right.strategies, decode)

    def fitness(profile, ctx: Context) -> float:
        s1, s2 = split(profile)
        return (left.fitness(s1, local_context_par(ctx, right, s2, factor=0))
                + right.fitness(s2, local_context_par(ctx, left, s1, factor=1)))

    def response_builder(ctx: Context) -> BestResponse:
        def respond(profile):
            s1, s2 = split(profile)
            r1 = left.best_response(local_context_par(ctx, right, s2, factor=0))(s1)
            r2 = right.best_response(local_context_par(ctx, left, s1, factor=1))(s2)
            return tuple(itertools.product(r1, r2))
        return BestResponse(fn=respond)

    return OpenGame(
        dom=(left.dom, right.dom),
        cod=(left.cod, right.cod),
        strategies=strategies,
        fitness=fitness,
        atomic=False,
        response_builder=response_builder,
        label=f"{left.label} | {right.label}",
    )
