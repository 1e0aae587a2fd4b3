"""Objective functions for the statistical game families.

All objectives are losses (lower is better).  Finite backends are
evaluated by exact enumeration, so acceptance tests carry no Monte Carlo
noise; Gaussian backends use closed forms wherever the divergence is KL
and a seeded Monte Carlo average over the data distribution otherwise.
Impossible outcomes surface as +inf through the log-of-zero sentinel and
poison the objective deterministically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BackendMismatch, DimensionMismatch
from ..lens import StateDependentChannel
from ..prob import (
    Channel,
    Divergence,
    FiniteChannel,
    FiniteDist,
    GaussianChannel,
    GaussianState,
    State,
    compose_channels,
    gaussian_entropy,
    log_density,
    pushforward,
    sample_gaussian,
)
from ..prob.gaussian import LOG_2PI
from .core import Context


@dataclass(frozen=True)
class MonteCarlo:
    """Settings for seeded Monte Carlo evaluation over the data state."""

    seed: int
    n_samples: int


def _data_state(c: Channel, ctx: Context) -> State:
    """The state observed through the continuation: k . c . prior."""
    return pushforward(ctx.continuation, pushforward(c, ctx.prior))


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------


def mle_objective(pi: State, ctx: Context, *, log_score: bool = False) -> float:
    """Negated likelihood of a candidate state under the context.

    The score of ``pi`` is the expectation of ``pi`` itself under the
    state ``k . pi`` obtained from the continuation, negated so that lower
    is better.  With ``log_score`` the integrand is ``log pi`` instead;
    the plain mass function is the default.
    """
    pushed = pushforward(ctx.continuation, pi)
    if isinstance(pi, FiniteDist):
        total = 0.0
        for x, w in pushed.items():
            if w <= 0.0:
                continue
            p = pi.prob(x)
            if log_score:
                if p <= 0.0:
                    return float("inf")
                total += w * float(np.log(p))
            else:
                total += w * p
        return -total
    if isinstance(pi, GaussianState):
        if log_score:
            return _gaussian_cross_entropy(pushed, pi)
        # E_{x ~ pushed}[density_pi(x)] has the closed form of a Gaussian
        # convolution evaluated at the mean difference.
        diff = pushed.mean - pi.mean
        cov = pushed.cov + pi.cov
        d = pi.dim
        sign, logdet = np.linalg.slogdet(cov)
        quad = float(diff @ np.linalg.solve(cov, diff))
        return -float(np.exp(-0.5 * (d * LOG_2PI + logdet + quad)))
    raise BackendMismatch(f"not a state: {type(pi).__name__}")


# ---------------------------------------------------------------------------
# Gaussian closed-form pieces
# ---------------------------------------------------------------------------


def _gaussian_cross_entropy(p: GaussianState, q: GaussianState) -> float:
    """E_{x~p}[-log q(x)] in closed form."""
    sign, logdet = np.linalg.slogdet(q.cov)
    qinv = np.linalg.inv(q.cov)
    diff = p.mean - q.mean
    return 0.5 * float(
        q.dim * LOG_2PI + logdet + np.trace(qinv @ p.cov) + diff @ qinv @ diff
    )


def _gaussian_recon(c: GaussianChannel, q: GaussianChannel, m: GaussianState) -> float:
    """E_{x~m} E_{z~q(x)}[-log p_c(x|z)] for affine-Gaussian c and q."""
    a, b, sc = c.weight, c.bias, c.noise_cov
    g, gb, sq = q.weight, q.bias, q.noise_cov
    dx = len(b)
    sign, logdet = np.linalg.slogdet(sc)
    sc_inv = np.linalg.inv(sc)
    resid_w = np.eye(dx) - a @ g          # x - A(Gx + g) - b = Rx + r
    resid_b = -a @ gb - b
    mean_resid = resid_w @ m.mean + resid_b
    quad = (
        float(np.trace(sc_inv @ a @ sq @ a.T))
        + float(np.trace(sc_inv @ resid_w @ m.cov @ resid_w.T))
        + float(mean_resid @ sc_inv @ mean_resid)
    )
    return 0.5 * (dx * LOG_2PI + logdet + quad)


def _gaussian_rate_kl(q: GaussianChannel, m: GaussianState, prior: GaussianState) -> float:
    """E_{x~m}[KL(q(x) || prior)] in closed form."""
    g, gb, sq = q.weight, q.bias, q.noise_cov
    dz = prior.dim
    sign0, logdet0 = np.linalg.slogdet(prior.cov)
    signq, logdetq = np.linalg.slogdet(sq)
    if signq <= 0:
        return float("inf")
    p_inv = np.linalg.inv(prior.cov)
    mean_diff = g @ m.mean + gb - prior.mean
    quad = (
        float(np.trace(p_inv @ sq))
        + float(np.trace(p_inv @ g @ m.cov @ g.T))
        + float(mean_diff @ p_inv @ mean_diff)
    )
    return 0.5 * (quad - dz + logdet0 - logdetq)


def _aggregate_posterior(q: GaussianChannel, m: GaussianState) -> GaussianState:
    return GaussianState(q.weight @ m.mean + q.bias,
                         q.noise_cov + q.weight @ m.cov @ q.weight.T)


# ---------------------------------------------------------------------------
# inference game objective
# ---------------------------------------------------------------------------


def inference_objective(c: Channel, c_back: StateDependentChannel,
                        divergence: Divergence, ctx: Context,
                        mc: MonteCarlo | None = None) -> float:
    """Expected reconstruction surprise plus divergence-to-prior.

    For each data point ``x`` drawn from the state observed through the
    continuation, the backward part proposes a posterior ``q(x)``; the
    loss is ``E_z[-log p_c(x|z)] + D(q(x), prior)`` averaged over ``x``.
    With D = KL this is minimised exactly by Bayesian inversion.
    """
    pi = ctx.prior
    q = c_back(pi)
    m = _data_state(c, ctx)
    if isinstance(pi, FiniteDist):
        total = 0.0
        for x, w in m.items():
            if w <= 0.0:
                continue
            post = q.at(x)
            recon = 0.0
            for z, pz in post.items():
                if pz <= 0.0:
                    continue
                recon += pz * -log_density(c, x, z)
            total += w * (recon + divergence(post, pi))
        return float(total)
    if not isinstance(pi, GaussianState):
        raise BackendMismatch(f"not a state: {type(pi).__name__}")
    if divergence.kind == "kl":
        return _gaussian_recon(c, q, m) + _gaussian_rate_kl(q, m, pi)
    if mc is None:
        raise DimensionMismatch(
            "Gaussian backend with a non-KL divergence needs MonteCarlo settings"
        )
    rng = np.random.default_rng(mc.seed)
    xs = sample_gaussian(m, rng, mc.n_samples)
    total = 0.0
    for x in xs:
        post = q.at(x)
        point = GaussianState(x, np.zeros((m.dim, m.dim)))
        recon = _gaussian_recon(c, GaussianChannel.constant(m.dim, post), point)
        total += recon + divergence(post, pi)
    return float(total / mc.n_samples)


# ---------------------------------------------------------------------------
# variational autoencoder objective
# ---------------------------------------------------------------------------


def vae_objective(c: Channel, c_back: StateDependentChannel, ctx: Context,
                  mc: MonteCarlo | None = None) -> float:
    """Negative evidence lower bound.

    The integrand is ``log q(z|x) - log p_c(x|z) - log p_prior(z)``
    averaged over data ``x`` and the proposed posterior ``z ~ q(x)``.  The
    finite backend enumerates this integrand directly, which keeps the
    evaluation an independent route from :func:`inference_objective` even
    though the two agree exactly when the divergence there is KL.
    """
    pi = ctx.prior
    q = c_back(pi)
    m = _data_state(c, ctx)
    if isinstance(pi, FiniteDist):
        total = 0.0
        for x, w in m.items():
            if w <= 0.0:
                continue
            post = q.at(x)
            for z, pz in post.items():
                if pz <= 0.0:
                    continue
                term = (
                    log_density(q, z, x)
                    - log_density(c, x, z)
                    - _finite_log_mass(pi, z)
                )
                total += w * pz * term
        return float(total)
    if not isinstance(pi, GaussianState):
        raise BackendMismatch(f"not a state: {type(pi).__name__}")
    # closed Gaussian form: -entropy(q) + reconstruction + prior cross-entropy
    neg_entropy = -gaussian_entropy(q.noise_cov)
    recon = _gaussian_recon(c, q, m)
    z_marginal = _aggregate_posterior(q, m)
    prior_ce = _gaussian_cross_entropy(z_marginal, pi)
    return float(neg_entropy + recon + prior_ce)


def _finite_log_mass(pi: FiniteDist, z) -> float:
    p = pi.prob(z)
    return float(np.log(p)) if p > 0.0 else float("-inf")


# ---------------------------------------------------------------------------
# generalized autoencoder objective
# ---------------------------------------------------------------------------


def autoencoder_objective(c: Channel, c_back: StateDependentChannel,
                          divergence: Divergence, ctx: Context, *,
                          aggregate_divergence: bool = False,
                          mc: MonteCarlo | None = None) -> float:
    """Reconstruction surprise plus a pluggable divergence penalty.

    By default the divergence is charged pointwise,
    ``E_x[D(q(x), prior)]``, which reduces to the negative ELBO at D = KL.
    With ``aggregate_divergence`` the penalty is charged once against the
    aggregate posterior ``D(q . k . c . prior, prior)`` -- that reading
    makes a lossless deterministic autoencoder score exactly zero, at the
    price of no longer matching the ELBO on stochastic instances.  The two
    charges differ by the data-posterior mutual information, so they
    coincide whenever the proposed posterior ignores the data.
    """
    pi = ctx.prior
    q = c_back(pi)
    m = _data_state(c, ctx)
    if isinstance(pi, FiniteDist):
        recon = 0.0
        rate = 0.0
        for x, w in m.items():
            if w <= 0.0:
                continue
            post = q.at(x)
            for z, pz in post.items():
                if pz <= 0.0:
                    continue
                recon += w * pz * -log_density(c, x, z)
            if not aggregate_divergence:
                rate += w * divergence(post, pi)
        if aggregate_divergence:
            rate = divergence(pushforward(q, m), pi)
        return float(recon + rate)
    if not isinstance(pi, GaussianState):
        raise BackendMismatch(f"not a state: {type(pi).__name__}")
    recon = _gaussian_recon(c, q, m)
    if aggregate_divergence:
        return float(recon + divergence(_aggregate_posterior(q, m), pi))
    if divergence.kind == "kl":
        return float(recon + _gaussian_rate_kl(q, m, pi))
    if mc is None:
        raise DimensionMismatch(
            "Gaussian backend with a non-KL pointwise divergence needs "
            "MonteCarlo settings"
        )
    rng = np.random.default_rng(mc.seed)
    xs = sample_gaussian(m, rng, mc.n_samples)
    rate = float(np.mean([divergence(q.at(x), pi) for x in xs]))
    return float(recon + rate)
