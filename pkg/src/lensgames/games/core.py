"""Contexts, strategy spaces, channel families and the open-game record.

A context closes an open system: a prior on the domain plus a
continuation endochannel on the codomain.  Strategies decode to Bayesian
lenses through a play function; optimization games score each strategy in
a context with a real-valued loss (lower is better) and their best
response is the argmin set.  Atomic games have constant best responses --
the argmin does not depend on the strategy currently played -- while
composite games re-derive each factor's local context from the co-factor's
played lens, so their response maps are genuinely strategy-dependent.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import DimensionMismatch, EmptyStrategySpace, InvalidChannel
from ..lens import BayesLens
from ..prob import Channel, State
from ..tolerances import TOL


@dataclass(frozen=True)
class Context:
    """A prior together with a continuation endochannel."""

    prior: State
    continuation: Channel


@dataclass(frozen=True)
class StrategySpace:
    """How strategies are indexed and decoded into lenses.

    kind "enumeration": ``elements`` lists the strategies (hashable values,
    usually indices or parameter tuples).
    kind "grid": same, but the elements came from a parameter grid.
    kind "vector": a box-bounded continuous parameter space; ``bounds`` has
    one (low, high) row per coordinate and enumeration is unavailable.
    """

    kind: str
    decoder: Callable[[Any], BayesLens]
    elements: tuple = ()
    bounds: np.ndarray | None = None

    def __post_init__(self):
        if self.kind in ("enumeration", "grid"):
            if not self.elements:
                raise EmptyStrategySpace(f"{self.kind} strategy space is empty")
        elif self.kind == "vector":
            if self.bounds is None:
                raise EmptyStrategySpace("vector strategy space needs bounds")
            object.__setattr__(
                self, "bounds", np.asarray(self.bounds, dtype=float).reshape(-1, 2)
            )
        else:
            raise EmptyStrategySpace(f"unknown strategy space kind {self.kind!r}")

    @property
    def enumerable(self) -> bool:
        return self.kind in ("enumeration", "grid")

    def enumerate(self) -> tuple:
        if not self.enumerable:
            raise EmptyStrategySpace("vector strategy spaces cannot be enumerated")
        return self.elements

    def decode(self, sigma) -> BayesLens:
        return self.decoder(sigma)


def product_space(a: StrategySpace, b: StrategySpace,
                  decoder: Callable[[Any], BayesLens]):
    """Cartesian product of two strategy spaces.

    Returns ``(space, split)`` where ``split`` maps a strategy of the
    product space to the pair of factor strategies.  When exactly one
    factor is a singleton enumeration and the other a vector space, the
    product stays a vector space (profiles are bare parameter vectors);
    two non-trivial continuous factors are not supported.
    """
    if a.enumerable and b.enumerable:
        elements = tuple(itertools.product(a.enumerate(), b.enumerate()))
        return StrategySpace("enumeration", decoder, elements), (lambda p: p)
    if a.enumerable and len(a.enumerate()) == 1 and b.kind == "vector":
        only = a.enumerate()[0]
        split = lambda theta: (only, theta)
        return StrategySpace("vector", lambda th: decoder(split(th)),
                             bounds=b.bounds), split
    if b.enumerable and len(b.enumerate()) == 1 and a.kind == "vector":
        only = b.enumerate()[0]
        split = lambda theta: (theta, only)
        return StrategySpace("vector", lambda th: decoder(split(th)),
                             bounds=a.bounds), split
    raise EmptyStrategySpace(
        "product of two non-trivial continuous strategy spaces is not supported"
    )


@dataclass(frozen=True)
class ChannelFamily:
    """A parameterized family of channels.

    ``instantiate`` must return a valid channel for every in-bounds
    parameter.  Enumerable families list their parameters in ``params``;
    continuous ones carry box ``bounds`` instead.
    """

    instantiate: Callable[[Any], Channel]
    params: tuple = ()
    bounds: np.ndarray | None = None
    label: str = "family"

    def __post_init__(self):
        if not self.params and self.bounds is None:
            raise EmptyStrategySpace(f"channel family {self.label!r} is empty")

    @property
    def enumerable(self) -> bool:
        return bool(self.params)

    def __call__(self, p) -> Channel:
        return self.instantiate(p)


def simplex_grid(n_atoms: int, step: float) -> tuple[tuple[float, ...], ...]:
    """All probability vectors on ``n_atoms`` atoms with entries on a grid
    of the given step (step must divide 1 within float dust)."""
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise InvalidChannel(f"step {step} does not divide 1")

    def rec(atoms: int, remaining: int):
        if atoms == 1:
            yield (remaining,)
            return
        for k in range(remaining + 1):
            for rest in rec(atoms - 1, remaining - k):
                yield (k, *rest)

    return tuple(tuple(k / n for k in combo) for combo in rec(n_atoms, n))


@dataclass(frozen=True)
class RowGridFamily(ChannelFamily):
    """Channels whose rows range independently over a simplex grid.

    A parameter is a tuple of rows, each a tuple of floats.  The argmin of
    any objective that is a weighted sum of per-row terms separates across
    rows, which :func:`lensgames.games.make_inference_game` exploits.
    """

    domain: tuple = ()
    codomain: tuple = ()
    row_candidates: tuple = ()

    @classmethod
    def build(cls, domain, codomain, step: float) -> "RowGridFamily":
        from ..prob import FiniteChannel

        domain, codomain = tuple(domain), tuple(codomain)
        rows = simplex_grid(len(codomain), step)

        def instantiate(param):
            return FiniteChannel(domain, codomain, np.asarray(param, dtype=float))

        # params itself would be |rows|^|domain| tuples; leave it lazy and
        # only materialise when genuinely enumerated.
        params = tuple(itertools.product(rows, repeat=len(domain))) \
            if len(rows) ** len(domain) <= 200_000 else ("<row-separable>",)
        return cls(
            instantiate=instantiate,
            params=params,
            label=f"row grid step {step}",
            domain=domain,
            codomain=codomain,
            row_candidates=rows,
        )


@dataclass(frozen=True)
class BestResponse:
    """A context's best-response map on strategies.

    For atomic games the map is constant and ``strategies`` holds the tie
    set (index-ordered).  Composite games supply ``fn`` instead.
    """

    strategies: tuple = ()
    fn: Callable[[Any], tuple] | None = None

    def __call__(self, sigma) -> tuple:
        if self.fn is not None:
            return self.fn(sigma)
        return self.strategies


def argmin_set(values: Sequence[float], candidates: Sequence, tie: float = TOL.tie) -> tuple:
    """Candidates whose value is within ``tie`` of the minimum, kept in
    index order so parallel scans reduce deterministically."""
    best = min(values)
    if math.isinf(best) and best > 0:
        return tuple(candidates)  # every strategy is equally hopeless
    return tuple(c for v, c in zip(values, candidates) if v <= best + tie)


@dataclass(frozen=True)
class OpenGame:
    """An open game over Bayesian lenses.

    ``fitness(sigma, ctx)`` is a loss (lower is better); ``play`` decodes a
    strategy to the lens it names.  ``best_response(ctx)`` returns the
    response map for a context; for atomic games it is the constant argmin
    set over the strategy space.  ``solve`` optionally computes the argmin
    in closed form for continuous strategy spaces.
    """

    dom: Any
    cod: Any
    strategies: StrategySpace
    fitness: Callable[[Any, Context], float]
    atomic: bool = True
    response_builder: Callable[[Context], BestResponse] | None = None
    solve: Callable[[Context], tuple] | None = None
    label: str = "game"

    def play(self, sigma) -> BayesLens:
        return self.strategies.decode(sigma)

    def best_response(self, ctx: Context) -> BestResponse:
        if self.response_builder is not None:
            return self.response_builder(ctx)
        if self.solve is not None and not self.strategies.enumerable:
            return BestResponse(strategies=tuple(self.solve(ctx)))
        values = [self.fitness(s, ctx) for s in self.strategies.enumerate()]
        return BestResponse(strategies=argmin_set(values, self.strategies.enumerate()))

    def equilibria(self, ctx: Context) -> tuple:
        """Fixed points of the best-response map."""
        response = self.best_response(ctx)
        if response.fn is None:
            return response.strategies
        return tuple(
            s for s in self.strategies.enumerate() if s in response.fn(s)
        )

    def objective_table(self, ctx: Context) -> list[tuple[Any, float]]:
        return [(s, self.fitness(s, ctx)) for s in self.strategies.enumerate()]


def check_endochannel(k: Channel, space) -> None:
    from ..prob import FiniteChannel, GaussianChannel

    if isinstance(k, FiniteChannel):
        if k.domain != k.codomain:
            raise DimensionMismatch("continuation is not an endochannel")
        if space is not None and k.domain != tuple(space):
            raise DimensionMismatch("continuation lives on the wrong space")
    elif isinstance(k, GaussianChannel):
        if k.dom_dim != k.cod_dim:
            raise DimensionMismatch("continuation is not an endochannel")
        if space is not None and k.dom_dim != int(space):
            raise DimensionMismatch("continuation lives on the wrong space")
