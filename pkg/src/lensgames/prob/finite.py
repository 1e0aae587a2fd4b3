"""Exact finite-support probability backend.

States are probability vectors over ordered hashable outcome labels, and
channels are row-stochastic conditional tables p(y|x) with rows indexed by
the domain.  All values are immutable after construction and every
operation is a pure function of its inputs.

Product spaces use pair labels ``(x, y)`` ordered lexicographically with
the first factor major, which makes tensoring literally a Kronecker
product.  Conditioning on an outcome of zero mass is a hard
:class:`~lensgames.errors.UnsupportedOutcome` error; nothing in this module
renormalises silently.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterator

import numpy as np

from ..errors import (
    DimensionMismatch,
    InvalidChannel,
    InvalidState,
    SupportViolation,
    UnknownFactor,
    UnsupportedOutcome,
)
from ..tolerances import TOL

Label = Any  # str | int | nested tuples thereof

#: Sentinel for the log of an exactly-zero mass.  IEEE -inf propagates
#: through sums deterministically (any finite sum containing it is -inf).
LOG_ZERO = float("-inf")


def _clean_vector(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidState(f"{what} must be a 1-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidState(f"{what} contains non-finite entries")
    if arr.min(initial=0.0) < -TOL.norm:
        raise InvalidState(f"{what} has a negative entry: {arr.min()}")
    arr = np.where(arr < 0.0, 0.0, arr)  # forgive float dust only
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def _check_labels(labels, what: str) -> tuple:
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise InvalidState(f"{what} labels are not unique")
    if not labels:
        raise InvalidState(f"{what} is empty")
    return labels


@dataclass(frozen=True, eq=False)
class FiniteDist:
    """A probability distribution with finite support.

    ``support`` is the ordered tuple of outcome labels and ``probs`` the
    matching vector of masses, which must sum to one within ``TOL.norm``.
    """

    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", _check_labels(self.support, "support"))
        probs = _clean_vector(self.probs, "probs")
        if len(probs) != len(self.support):
            raise DimensionMismatch(
                f"{len(self.support)} labels but {len(probs)} masses"
            )
        if abs(probs.sum() - 1.0) > TOL.norm:
            raise InvalidState(f"masses sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)

    # -- constructors -------------------------------------------------
    @classmethod
    def uniform(cls, labels) -> "FiniteDist":
        labels = tuple(labels)
        return cls(labels, np.full(len(labels), 1.0 / len(labels)))

    @classmethod
    def point(cls, labels, at) -> "FiniteDist":
        labels = tuple(labels)
        probs = np.zeros(len(labels))
        probs[labels.index(at)] = 1.0
        return cls(labels, probs)

    # -- access -------------------------------------------------------
    def index(self, label) -> int:
        try:
            return self.support.index(label)
        except ValueError:
            raise UnknownFactor(f"label {label!r} not in support") from None

    def prob(self, label) -> float:
        return float(self.probs[self.index(label)])

    def items(self) -> Iterator[tuple[Label, float]]:
        return zip(self.support, (float(p) for p in self.probs))

    @property
    def mass_support(self) -> tuple:
        """Labels carrying more than ``TOL.support`` mass."""
        return tuple(x for x, p in self.items() if p > TOL.support)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FiniteDist)
            and self.support == other.support
            and np.array_equal(self.probs, other.probs)
        )

    def __hash__(self) -> int:
        return hash((self.support, self.probs.tobytes()))

    def allclose(self, other: "FiniteDist", tol: float = TOL.norm) -> bool:
        return self.support == other.support and bool(
            np.all(np.abs(self.probs - other.probs) <= tol)
        )

    def __repr__(self) -> str:
        pairs = ", ".join(f"{x!r}: {p:.6g}" for x, p in self.items())
        return f"FiniteDist({pairs})"


@dataclass(frozen=True, eq=False)
class FiniteChannel:
    """A stochastic map between finite spaces as a row-stochastic table.

    ``matrix[i, j]`` is the probability of ``codomain[j]`` given
    ``domain[i]``.
    """

    domain: tuple
    codomain: tuple
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "domain", _check_labels(self.domain, "domain"))
        object.__setattr__(self, "codomain", _check_labels(self.codomain, "codomain"))
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.domain), len(self.codomain)):
            raise DimensionMismatch(
                f"table shape {m.shape} does not match "
                f"{len(self.domain)}x{len(self.codomain)} spaces"
            )
        if not np.all(np.isfinite(m)):
            raise InvalidChannel("table contains non-finite entries")
        if m.min(initial=0.0) < -TOL.norm:
            raise InvalidChannel(f"table has a negative entry: {m.min()}")
        m = np.where(m < 0.0, 0.0, m).copy()
        sums = m.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > TOL.norm):
            worst = sums[np.argmax(np.abs(sums - 1.0))]
            raise InvalidChannel(f"row sums to {worst!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    # -- constructors -------------------------------------------------
    @classmethod
    def identity(cls, labels) -> "FiniteChannel":
        labels = tuple(labels)
        return cls(labels, labels, np.eye(len(labels)))

    @classmethod
    def deterministic(cls, domain, codomain, mapping: Callable) -> "FiniteChannel":
        domain, codomain = tuple(domain), tuple(codomain)
        m = np.zeros((len(domain), len(codomain)))
        for i, x in enumerate(domain):
            m[i, codomain.index(mapping(x))] = 1.0
        return cls(domain, codomain, m)

    @classmethod
    def constant(cls, domain, dist: FiniteDist) -> "FiniteChannel":
        domain = tuple(domain)
        return cls(domain, dist.support, np.tile(dist.probs, (len(domain), 1)))

    @classmethod
    def from_rows(cls, domain, rows: dict) -> "FiniteChannel":
        """Rows given as a mapping from domain label to FiniteDist."""
        domain = tuple(domain)
        dists = [rows[x] for x in domain]
        codomain = dists[0].support
        if any(d.support != codomain for d in dists):
            raise DimensionMismatch("rows have differing codomains")
        return cls(domain, codomain, np.stack([d.probs for d in dists]))

    # -- access -------------------------------------------------------
    def at(self, x) -> FiniteDist:
        """The conditional distribution given input ``x``."""
        try:
            i = self.domain.index(x)
        except ValueError:
            raise UnknownFactor(f"input {x!r} not in domain") from None
        return FiniteDist(self.codomain, self.matrix[i])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FiniteChannel)
            and self.domain == other.domain
            and self.codomain == other.codomain
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self) -> int:
        return hash((self.domain, self.codomain, self.matrix.tobytes()))

    def __repr__(self) -> str:
        return (
            f"FiniteChannel({len(self.domain)}->{len(self.codomain)}, "
            f"rows={np.array2string(self.matrix, precision=4)})"
        )


@dataclass(frozen=True, eq=False)
class FiniteStateFamily:
    """An outcome-indexed family of states, e.g. a Bayesian inversion.

    Rows of ``table`` are states on ``outcomes`` indexed by the labels in
    ``index``; ``defined`` marks the rows backed by positive mass.  Reading
    an undefined row through :meth:`at` raises
    :class:`~lensgames.errors.UnsupportedOutcome` -- a family never
    renormalises a zero-mass condition.  :meth:`as_channel` substitutes
    ``fallback`` on undefined rows, which is harmless under almost-equality
    because those rows only ever receive zero weight.
    """

    index: tuple
    outcomes: tuple
    table: np.ndarray
    defined: np.ndarray
    fallback: FiniteDist | None = None

    def at(self, y) -> FiniteDist:
        try:
            i = self.index.index(y)
        except ValueError:
            raise UnknownFactor(f"outcome {y!r} not in index") from None
        if not self.defined[i]:
            raise UnsupportedOutcome(
                f"outcome {y!r} has zero mass; posterior undefined"
            )
        return FiniteDist(self.outcomes, self.table[i])

    def is_defined(self, y) -> bool:
        return bool(self.defined[self.index.index(y)])

    def as_channel(self, fill: FiniteDist | None = None) -> FiniteChannel:
        fill = fill if fill is not None else self.fallback
        rows = np.array(self.table, dtype=float)
        for i in range(len(self.index)):
            if not self.defined[i]:
                if fill is None:
                    raise UnsupportedOutcome(
                        "family has undefined rows and no fallback state"
                    )
                rows[i] = fill.probs
        return FiniteChannel(self.index, self.outcomes, rows)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _require_space(a: tuple, b: tuple, what: str) -> None:
    if a != b:
        raise DimensionMismatch(f"{what}: {a!r} vs {b!r}")


def pushforward_finite(c: FiniteChannel, pi: FiniteDist) -> FiniteDist:
    _require_space(pi.support, c.domain, "state not on channel domain")
    return FiniteDist(c.codomain, pi.probs @ c.matrix)


def compose_finite(d: FiniteChannel, c: FiniteChannel) -> FiniteChannel:
    """The composite d after c (c runs first)."""
    _require_space(c.codomain, d.domain, "middle space mismatch")
    return FiniteChannel(c.domain, d.codomain, c.matrix @ d.matrix)


def pair_labels(a: tuple, b: tuple) -> tuple:
    """Lexicographic product labels, first factor major."""
    return tuple((x, y) for x in a for y in b)


def tensor_dist_finite(p: FiniteDist, q: FiniteDist) -> FiniteDist:
    return FiniteDist(pair_labels(p.support, q.support), np.kron(p.probs, q.probs))


def tensor_channel_finite(c: FiniteChannel, d: FiniteChannel) -> FiniteChannel:
    return FiniteChannel(
        pair_labels(c.domain, d.domain),
        pair_labels(c.codomain, d.codomain),
        np.kron(c.matrix, d.matrix),
    )


def _split_pairs(labels: tuple) -> tuple[tuple, tuple]:
    if not all(isinstance(x, tuple) and len(x) == 2 for x in labels):
        raise UnknownFactor("state does not live on a declared product space")
    firsts, seconds = [], []
    for x, y in labels:
        if x not in firsts:
            firsts.append(x)
        if y not in seconds:
            seconds.append(y)
    if tuple(pair_labels(tuple(firsts), tuple(seconds))) != labels:
        raise UnknownFactor("product labels are not in first-major order")
    return tuple(firsts), tuple(seconds)


def marginalize_finite(pi: FiniteDist, factor: int) -> FiniteDist:
    """Sum out every factor of a pair-labelled product state except ``factor``.

    Factors are zero-based: 0 keeps the first component, 1 the second.
    """
    firsts, seconds = _split_pairs(pi.support)
    grid = pi.probs.reshape(len(firsts), len(seconds))
    if factor == 0:
        return FiniteDist(firsts, grid.sum(axis=1))
    if factor == 1:
        return FiniteDist(seconds, grid.sum(axis=0))
    raise UnknownFactor(f"factor must be 0 or 1, got {factor}")


def bayes_invert_finite(c: FiniteChannel, pi: FiniteDist) -> FiniteStateFamily:
    """Posterior family y -> P(x | y) for prior ``pi`` through ``c``.

    Rows where the pushforward mass is at most ``TOL.support`` are left
    undefined; the prior is recorded as the fallback used when the family
    is packed into a channel for lens composition.
    """
    _require_space(pi.support, c.domain, "prior not on channel domain")
    joint = pi.probs[:, None] * c.matrix  # (x, y)
    marg = joint.sum(axis=0)
    defined = marg > TOL.support
    table = np.full((len(c.codomain), len(c.domain)), np.nan)
    if defined.any():
        table[defined] = (joint[:, defined] / marg[defined]).T
    return FiniteStateFamily(
        index=c.codomain,
        outcomes=c.domain,
        table=table,
        defined=defined,
        fallback=pi,
    )


def log_density_finite(c: FiniteChannel, y, x) -> float:
    """log p(y|x); exactly-zero masses give the -inf sentinel."""
    p = c.matrix[c.domain.index(x), c.codomain.index(y)]
    return float(np.log(p)) if p > 0.0 else LOG_ZERO


def kl_finite(p: FiniteDist, q: FiniteDist) -> float:
    _require_space(p.support, q.support, "divergence between different spaces")
    total = 0.0
    for pi, qi in zip(p.probs, q.probs):
        if pi <= 0.0:
            continue  # 0 log(0/q) = 0
        if qi <= 0.0:
            raise SupportViolation("supp(p) is not contained in supp(q)")
        total += pi * np.log(pi / qi)
    return float(total)


def expectation_finite(pi: FiniteDist, f: Callable[[Label], float]) -> float:
    return float(sum(p * f(x) for x, p in pi.items()))


def total_variation(p: FiniteDist, q: FiniteDist) -> float:
    _require_space(p.support, q.support, "TV between different spaces")
    return float(0.5 * np.abs(p.probs - q.probs).sum())
