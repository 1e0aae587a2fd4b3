"""Bayesian lenses: forward channels paired with state-dependent inverses.

A lens carries a forward channel ``X -> Y`` together with a backward part
that, for every prior on ``X``, yields a channel ``B -> A`` (for simple
lenses, ``Y -> X``).  Sequential composition pushes the prior through the
first forward channel before asking the second lens for its backward
part -- this is exactly what makes exact inversions compose: the backward
of a composite of exact lenses is, up to almost-equality on supported
outcomes, the inversion of the composite forward channel.
:func:`verify_optical_bayes` checks that law on randomized finite
instances and reports the worst total-variation deviation seen.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidState
from .prob import (
    Channel,
    FiniteChannel,
    FiniteDist,
    FiniteStateFamily,
    GaussianChannel,
    State,
    almost_equal,
    bayes_invert,
    channel_to_json,
    compose_channels,
    dist_to_json,
    dumps_canonical,
    marginalize,
    pushforward,
    tensor,
    worst_deviation,
)
from .tolerances import TOL


@dataclass(frozen=True)
class StateDependentChannel:
    """A total map from states on the base space to channels.

    The function must be deterministic: equal states yield equal channels.
    ``label`` is cosmetic, for reports and debugging.
    """

    channel_of: Callable[[State], Channel]
    label: str = "state-dependent channel"

    def __call__(self, pi: State) -> Channel:
        return self.channel_of(pi)

    @classmethod
    def constant(cls, channel: Channel, label: str = "constant") -> "StateDependentChannel":
        return cls(lambda _pi: channel, label=label)


@dataclass(frozen=True)
class BayesLens:
    """A forward channel plus a prior-indexed backward channel."""

    forward: Channel
    backward: StateDependentChannel

    def backward_at(self, pi: State) -> Channel:
        return self.backward(pi)


def _as_backward_channel(value, prior: State) -> Channel:
    """Inversion families double as channels; pack them when needed."""
    if isinstance(value, FiniteStateFamily):
        return value.as_channel()
    return value


def identity_lens(space) -> BayesLens:
    """Identity lens: identity forward, constantly-identity backward.

    ``space`` is a tuple of labels (finite) or an int dimension (Gaussian).
    """
    if isinstance(space, int):
        ident = GaussianChannel.identity(space)
    else:
        ident = FiniteChannel.identity(tuple(space))
    return BayesLens(ident, StateDependentChannel.constant(ident, label="identity"))


def exact_lens_of(c: Channel) -> BayesLens:
    """The simple lens whose backward part is true Bayesian inversion."""

    def invert(pi: State) -> Channel:
        return _as_backward_channel(bayes_invert(c, pi), pi)

    return BayesLens(c, StateDependentChannel(invert, label="exact inversion"))


def compose_lens(g: BayesLens, f: BayesLens) -> BayesLens:
    """Sequential composite g after f.

    Forward parts compose in order; the composite backward at a prior
    ``pi`` runs g's backward at the pushed-forward prior, then f's
    backward at ``pi``.
    """
    forward = compose_channels(g.forward, f.forward)

    def backward(pi: State) -> Channel:
        mid = pushforward(f.forward, pi)
        return compose_channels(f.backward(pi), g.backward(mid))

    label = f"({f.backward.label}) ; ({g.backward.label})"
    return BayesLens(forward, StateDependentChannel(backward, label=label))


def tensor_lens(f: BayesLens, g: BayesLens) -> BayesLens:
    """Parallel product of lenses.

    The backward parts are evaluated at the marginals of the joint prior
    onto each factor.  For product priors this is exact; for correlated
    priors it is the mean-field approximation (the factors of the joint
    posterior are treated as independent), which is the reading used by
    the hierarchical games here.
    """
    forward = tensor(f.forward, g.forward)

    def backward(pi: State) -> Channel:
        left = f.backward(marginalize(pi, 0))
        right = g.backward(marginalize(pi, 1))
        return tensor(left, right)

    label = f"({f.backward.label}) x ({g.backward.label})"
    return BayesLens(forward, StateDependentChannel(backward, label=label))


def is_exact(lens: BayesLens, priors: Sequence[State], tol: float = TOL.almost_equal) -> bool:
    """True iff the lens's backward part is Bayesian inversion at every
    supplied prior, up to almost-equality over the pushforward support.
    An empty prior list is vacuously exact."""
    for pi in priors:
        ref = pushforward(lens.forward, pi)
        claimed = lens.backward(pi)
        truth = bayes_invert(lens.forward, pi)
        if not almost_equal(claimed, truth, ref, tol):
            return False
    return True


# ---------------------------------------------------------------------------
# randomized verification of the composition law
# ---------------------------------------------------------------------------


@dataclass
class OpticalBayesReport:
    """Outcome of a randomized composition-law campaign."""

    trials: int
    passes: int
    failures: list = field(default_factory=list)
    worst_tv: float = 0.0
    seed: int = 0
    max_dim: int = 0
    tol: float = TOL.almost_equal
    resampled: int = 0

    @property
    def all_passed(self) -> bool:
        return self.passes == self.trials

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "passes": self.passes,
            "failures": self.failures,
            "worst_tv": float(self.worst_tv),
            "seed": self.seed,
            "max_dim": self.max_dim,
            "tol": float(self.tol),
            "resampled": self.resampled,
        }

    def dumps(self) -> str:
        return dumps_canonical(self.to_json())


def _floored_simplex(rng: np.random.Generator, n: int, floor: float = 1e-3) -> np.ndarray:
    """Dirichlet draw mixed with uniform so every atom keeps >= floor mass;
    keeps law-testing priors away from the support boundary."""
    raw = rng.dirichlet(np.ones(n))
    return (1.0 - n * floor) * raw + floor


def random_full_support_dist(rng: np.random.Generator, labels) -> FiniteDist:
    labels = tuple(labels)
    return FiniteDist(labels, _floored_simplex(rng, len(labels)))


def random_channel(rng: np.random.Generator, domain, codomain) -> FiniteChannel:
    domain, codomain = tuple(domain), tuple(codomain)
    rows = np.stack([rng.dirichlet(np.ones(len(codomain))) for _ in domain])
    return FiniteChannel(domain, codomain, rows)


def _labels(prefix: str, n: int) -> tuple:
    return tuple(f"{prefix}{i}" for i in range(n))


def _one_trial(seed: int, trial: int, max_dim: int, tol: float,
               corrupt: Callable[[FiniteChannel], FiniteChannel] | None):
    """Run one randomized composition-law check.

    Returns (passed, tv, witness_or_None, resamples).  Degenerate draws
    whose pushforward has empty support are resampled and counted.
    """
    rng = np.random.default_rng([seed, trial])
    resamples = 0
    while True:
        dx, dy, dz = (int(d) for d in rng.integers(2, max_dim + 1, size=3))
        pi = random_full_support_dist(rng, _labels("x", dx))
        c = random_channel(rng, _labels("x", dx), _labels("y", dy))
        d = random_channel(rng, _labels("y", dy), _labels("z", dz))
        ref = pushforward(compose_channels(d, c), pi)
        if ref.mass_support:
            break
        resamples += 1

    composite = compose_lens(exact_lens_of(d), exact_lens_of(c))
    claimed = composite.backward(pi)
    if corrupt is not None:
        claimed = corrupt(claimed)
    truth = bayes_invert(compose_channels(d, c), pi)
    tv = worst_deviation(claimed, truth, ref)
    passed = tv <= tol
    witness = None
    if not passed:
        witness = {
            "trial": trial,
            "prior": dist_to_json(pi),
            "first": channel_to_json(c),
            "second": channel_to_json(d),
            "worst_tv": float(tv),
        }
    return passed, float(tv), witness, resamples


def verify_optical_bayes(trials: int, max_dim: int = 5, seed: int = 0,
                         tol: float = TOL.almost_equal, workers: int = 1,
                         corrupt: Callable[[FiniteChannel], FiniteChannel] | None = None,
                         ) -> OpticalBayesReport:
    """Randomized check that exact inversions compose through lenses.

    Each trial draws a full-support prior and two stochastic channels
    (dimensions up to ``max_dim``), composes their exact lenses, and
    compares the composite backward against direct inversion of the
    composite channel on all supported outcomes.  Per-trial generators are
    derived from ``(seed, trial)`` so the report is identical for any
    ``workers`` count.  ``corrupt`` is a test hook applied to the composite
    backward channel before comparison.
    """
    if trials < 1:
        raise InvalidState("trials must be >= 1")
    if not 2 <= max_dim <= 8:
        raise InvalidState("max_dim must be between 2 and 8")

    def job(i: int):
        return _one_trial(seed, i, max_dim, tol, corrupt)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(trials)))
    else:
        results = [job(i) for i in range(trials)]

    report = OpticalBayesReport(trials=trials, passes=0, seed=seed,
                                max_dim=max_dim, tol=tol)
    for passed, tv, witness, resamples in results:  # index order: deterministic
        report.resampled += resamples
        report.worst_tv = max(report.worst_tv, tv)
        if passed:
            report.passes += 1
        else:
            report.failures.append(witness)
    return report
