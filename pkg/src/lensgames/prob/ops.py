"""Backend-generic operations on states and channels.

The two backends (exact finite, linear-Gaussian) sit behind one set of
functions; mixing them raises :class:`~lensgames.errors.BackendMismatch`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..errors import BackendMismatch, DimensionMismatch
from ..tolerances import TOL
from . import finite as fin
from . import gaussian as gau
from .finite import FiniteChannel, FiniteDist, FiniteStateFamily
from .gaussian import GaussianChannel, GaussianState, MonteCarloEstimate

State = Union[FiniteDist, GaussianState]
Channel = Union[FiniteChannel, GaussianChannel]
StateFamily = Union[FiniteChannel, FiniteStateFamily, GaussianChannel]


def is_finite_backend(value) -> bool:
    return isinstance(value, (FiniteDist, FiniteChannel, FiniteStateFamily))


def is_gaussian_backend(value) -> bool:
    return isinstance(value, (GaussianState, GaussianChannel))


def _same_backend(*values) -> str:
    kinds = {"finite" if is_finite_backend(v) else "gaussian" if is_gaussian_backend(v) else "?" for v in values}
    if kinds == {"finite"}:
        return "finite"
    if kinds == {"gaussian"}:
        return "gaussian"
    raise BackendMismatch(f"mixed or unknown backends: {[type(v).__name__ for v in values]}")


def pushforward(c: Channel, pi: State) -> State:
    """The composite state c . pi: exact matrix-vector or affine moments."""
    if _same_backend(c, pi) == "finite":
        return fin.pushforward_finite(c, pi)
    return gau.pushforward_gaussian(c, pi)


def compose_channels(d: Channel, c: Channel) -> Channel:
    """The composite channel d . c (c runs first)."""
    if _same_backend(d, c) == "finite":
        return fin.compose_finite(d, c)
    return gau.compose_gaussian(d, c)


def tensor(a, b):
    """Monoidal product of two states or two channels of one backend."""
    backend = _same_backend(a, b)
    if backend == "finite":
        if isinstance(a, FiniteDist) and isinstance(b, FiniteDist):
            return fin.tensor_dist_finite(a, b)
        if isinstance(a, FiniteChannel) and isinstance(b, FiniteChannel):
            return fin.tensor_channel_finite(a, b)
    else:
        if isinstance(a, GaussianState) and isinstance(b, GaussianState):
            return gau.tensor_state_gaussian(a, b)
        if isinstance(a, GaussianChannel) and isinstance(b, GaussianChannel):
            return gau.tensor_channel_gaussian(a, b)
    raise BackendMismatch("tensor needs two states or two channels")


def bayes_invert(c: Channel, pi: State):
    """Outcome-indexed posterior family of ``pi`` through ``c``.

    Finite channels give a :class:`FiniteStateFamily` (undefined on
    zero-mass outcomes); Gaussian channels give the conjugate posterior as
    a :class:`GaussianChannel`, which is defined everywhere.
    """
    if _same_backend(c, pi) == "finite":
        return fin.bayes_invert_finite(c, pi)
    return gau.bayes_invert_gaussian(c, pi)


def log_density(c: Channel, y, x) -> float:
    """log p_c(y | x); zero finite masses give the -inf sentinel."""
    if isinstance(c, FiniteChannel):
        return fin.log_density_finite(c, y, x)
    if isinstance(c, GaussianChannel):
        return gau.log_density_gaussian(c, y, x)
    raise BackendMismatch(f"not a channel: {type(c).__name__}")


def log_mass(pi: State, x) -> float:
    """log of a state's mass/density at a point."""
    if isinstance(pi, FiniteDist):
        p = pi.prob(x)
        return float(np.log(p)) if p > 0.0 else fin.LOG_ZERO
    if isinstance(pi, GaussianState):
        return gau.gaussian_log_pdf(x, pi.mean, pi.cov)
    raise BackendMismatch(f"not a state: {type(pi).__name__}")


def kl(p: State, q: State) -> float:
    """Kullback-Leibler divergence, exact in both backends."""
    if _same_backend(p, q) == "finite":
        return fin.kl_finite(p, q)
    return gau.kl_gaussian(p, q)


def expectation(pi: State, f: Callable, *, seed: int | None = None,
                n_samples: int | None = None):
    """E_pi[f]: exact weighted sum (finite) or seeded Monte Carlo (Gaussian)."""
    if isinstance(pi, FiniteDist):
        return fin.expectation_finite(pi, f)
    if isinstance(pi, GaussianState):
        if seed is None or n_samples is None:
            raise DimensionMismatch(
                "Gaussian expectation needs explicit seed and n_samples"
            )
        return gau.expectation_gaussian(pi, f, seed=seed, n_samples=n_samples)
    raise BackendMismatch(f"not a state: {type(pi).__name__}")


def marginalize(pi: State, factor: int) -> State:
    """Project a declared product state onto one factor (zero-based)."""
    if isinstance(pi, FiniteDist):
        return fin.marginalize_finite(pi, factor)
    if isinstance(pi, GaussianState):
        return gau.marginalize_gaussian(pi, factor)
    raise BackendMismatch(f"not a state: {type(pi).__name__}")


def family_at(family: StateFamily, y) -> State:
    """Evaluate an outcome-indexed family of states at an outcome."""
    return family.at(y)


def almost_equal(f1: StateFamily, f2: StateFamily, ref: State,
                 tol: float = TOL.almost_equal) -> bool:
    """Support-restricted equality of outcome-indexed state families.

    Finite: for every outcome carrying more than ``TOL.support`` mass under
    ``ref``, the two states must be within ``tol`` in total variation;
    null outcomes are ignored.  Gaussian families are affine in the
    outcome, so they agree on a full-measure set iff their parameters
    agree; we compare weight, bias and noise covariance in sup-norm.
    """
    return worst_deviation(f1, f2, ref) <= tol


def worst_deviation(f1: StateFamily, f2: StateFamily, ref: State) -> float:
    """Largest deviation between two families over the support of ``ref``."""
    if isinstance(ref, FiniteDist):
        worst = 0.0
        for y, mass in ref.items():
            if mass <= TOL.support:
                continue
            worst = max(worst, fin.total_variation(f1.at(y), f2.at(y)))
        return worst
    if isinstance(f1, GaussianChannel) and isinstance(f2, GaussianChannel):
        if f1.weight.shape != f2.weight.shape:
            raise DimensionMismatch("families have different shapes")
        return float(
            max(
                np.abs(f1.weight - f2.weight).max(initial=0.0),
                np.abs(f1.bias - f2.bias).max(initial=0.0),
                np.abs(f1.noise_cov - f2.noise_cov).max(initial=0.0),
            )
        )
    raise BackendMismatch("reference state and families use different backends")


def apply_partial(c: Channel, side: State, keep: int) -> Channel:
    """Average a channel on a pair product over one input factor.

    ``c`` maps (X0 x X1) to Y; ``side`` is a state on the discarded factor
    and ``keep`` (0 or 1) names the factor that remains free.  The result
    maps X_keep to Y by integrating the other input out under ``side``.
    """
    if _same_backend(c, side) == "finite":
        firsts, seconds = fin._split_pairs(c.domain)
        kept, other = (firsts, seconds) if keep == 0 else (seconds, firsts)
        if side.support != other:
            raise DimensionMismatch("side state not on the averaged factor")
        rows = np.zeros((len(kept), len(c.codomain)))
        for i, xk in enumerate(kept):
            for xo, w in side.items():
                pair = (xk, xo) if keep == 0 else (xo, xk)
                rows[i] += w * c.matrix[c.domain.index(pair)]
        return FiniteChannel(kept, c.codomain, rows)
    if not isinstance(c, GaussianChannel):
        raise BackendMismatch("apply_partial needs a channel")
    # Gaussian: weight splits column-wise into the two factors.
    d_side = side.dim
    d_keep = c.dom_dim - d_side
    if keep == 0:
        w_keep, w_side = c.weight[:, :d_keep], c.weight[:, d_keep:]
    else:
        w_side, w_keep = c.weight[:, :d_side], c.weight[:, d_side:]
    return GaussianChannel(
        w_keep,
        c.bias + w_side @ side.mean,
        c.noise_cov + w_side @ side.cov @ w_side.T,
    )


@dataclass(frozen=True)
class Divergence:
    """A scorer D(p, q) between states on one space; ``kind`` is "kl" for
    the built-in Kullback-Leibler divergence, anything else for
    user-supplied scorers."""

    kind: str
    evaluator: Callable[[State, State], float]

    def __call__(self, p: State, q: State) -> float:
        return float(self.evaluator(p, q))


KL = Divergence("kl", kl)
ZERO_DIVERGENCE = Divergence("zero", lambda p, q: 0.0)
