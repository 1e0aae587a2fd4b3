"""Linear-Gaussian probability backend.

States are Gaussian measures given by moments, channels are affine maps
with additive Gaussian noise ``x -> N(Ax + b, S)``.  The class of
Gaussians is closed under pushforward, composition, tensoring and
conditioning, so everything here is exact linear algebra; the only
estimator is Monte Carlo expectation, which always takes an explicit seed
and sample count and reports the count back.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DimensionMismatch, InvalidChannel, InvalidState, UnknownFactor
from ..tolerances import TOL

LOG_2PI = float(np.log(2.0 * np.pi))


def _vector(v, what: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float)).copy()
    if arr.ndim != 1:
        raise InvalidState(f"{what} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidState(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _covariance(m, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.shape != (dim, dim):
        raise DimensionMismatch(f"{what} has shape {arr.shape}, expected ({dim},{dim})")
    if not np.all(np.isfinite(arr)):
        raise InvalidState(f"{what} contains non-finite entries")
    if np.abs(arr - arr.T).max(initial=0.0) > TOL.sym:
        raise InvalidState(f"{what} is not symmetric")
    arr = 0.5 * (arr + arr.T)
    if dim and np.linalg.eigvalsh(arr).min() < -TOL.psd:
        raise InvalidState(f"{what} is not positive semi-definite")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Gaussian measure N(mean, cov).

    ``blocks`` optionally declares a product factorisation of the
    coordinates (consecutive block sizes); it is set by tensoring and is
    required by :func:`marginalize_gaussian`.
    """

    mean: np.ndarray
    cov: np.ndarray
    blocks: tuple[int, ...] | None = None

    def __post_init__(self):
        mean = _vector(self.mean, "mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _covariance(self.cov, len(mean), "cov"))
        if self.blocks is not None:
            blocks = tuple(int(b) for b in self.blocks)
            if sum(blocks) != len(mean):
                raise DimensionMismatch("declared blocks do not cover the space")
            object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GaussianState)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )

    def __hash__(self) -> int:
        return hash((self.mean.tobytes(), self.cov.tobytes()))

    def __repr__(self) -> str:
        return f"GaussianState(mean={self.mean}, cov={self.cov})"


@dataclass(frozen=True, eq=False)
class GaussianChannel:
    """Affine-Gaussian kernel x -> N(weight @ x + bias, noise_cov)."""

    weight: np.ndarray
    bias: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        if w.ndim == 0:
            w = w.reshape(1, 1)
        elif w.ndim == 1:
            w = w.reshape(1, -1)
        if w.ndim != 2 or not np.all(np.isfinite(w)):
            raise InvalidChannel(f"weight must be a finite matrix, got {self.weight!r}")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weight", w)
        bias = _vector(self.bias, "bias")
        if len(bias) != w.shape[0]:
            raise DimensionMismatch("bias length does not match weight rows")
        object.__setattr__(self, "bias", bias)
        object.__setattr__(
            self, "noise_cov", _covariance(self.noise_cov, w.shape[0], "noise_cov")
        )

    @classmethod
    def identity(cls, dim: int) -> "GaussianChannel":
        return cls(np.eye(dim), np.zeros(dim), np.zeros((dim, dim)))

    @classmethod
    def constant(cls, dom_dim: int, dist: GaussianState) -> "GaussianChannel":
        return cls(np.zeros((dist.dim, dom_dim)), dist.mean, dist.cov)

    @property
    def dom_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def cod_dim(self) -> int:
        return self.weight.shape[0]

    def at(self, x) -> GaussianState:
        """The output Gaussian for a concrete input vector."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return GaussianState(self.weight @ x + self.bias, self.noise_cov)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GaussianChannel)
            and np.array_equal(self.weight, other.weight)
            and np.array_equal(self.bias, other.bias)
            and np.array_equal(self.noise_cov, other.noise_cov)
        )

    def __hash__(self) -> int:
        return hash(
            (self.weight.tobytes(), self.bias.tobytes(), self.noise_cov.tobytes())
        )

    def __repr__(self) -> str:
        return (
            f"GaussianChannel(weight={self.weight}, bias={self.bias}, "
            f"noise_cov={self.noise_cov})"
        )


@dataclass(frozen=True)
class MonteCarloEstimate:
    """A seeded Monte Carlo mean, reported together with its sample count."""

    value: float
    n_samples: int
    seed: int

    def __float__(self) -> float:
        return self.value


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def pushforward_gaussian(c: GaussianChannel, pi: GaussianState) -> GaussianState:
    if pi.dim != c.dom_dim:
        raise DimensionMismatch(f"state dim {pi.dim} vs channel domain {c.dom_dim}")
    mean = c.weight @ pi.mean + c.bias
    cov = c.weight @ pi.cov @ c.weight.T + c.noise_cov
    return GaussianState(mean, cov)


def compose_gaussian(d: GaussianChannel, c: GaussianChannel) -> GaussianChannel:
    """d after c: x -> N(Ad Ac x + Ad bc + bd, Ad Sc Ad^T + Sd)."""
    if c.cod_dim != d.dom_dim:
        raise DimensionMismatch("middle dimension mismatch")
    return GaussianChannel(
        d.weight @ c.weight,
        d.weight @ c.bias + d.bias,
        d.weight @ c.noise_cov @ d.weight.T + d.noise_cov,
    )


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


def tensor_state_gaussian(p: GaussianState, q: GaussianState) -> GaussianState:
    return GaussianState(
        np.concatenate([p.mean, q.mean]),
        _block_diag(p.cov, q.cov),
        blocks=(p.dim, q.dim),
    )


def tensor_channel_gaussian(
    c: GaussianChannel, d: GaussianChannel
) -> GaussianChannel:
    return GaussianChannel(
        _block_diag(c.weight, d.weight),
        np.concatenate([c.bias, d.bias]),
        _block_diag(c.noise_cov, d.noise_cov),
    )


def marginalize_gaussian(pi: GaussianState, factor: int) -> GaussianState:
    if pi.blocks is None:
        raise UnknownFactor("state has no declared product structure")
    if not 0 <= factor < len(pi.blocks):
        raise UnknownFactor(f"factor {factor} out of range for {pi.blocks}")
    lo = sum(pi.blocks[:factor])
    hi = lo + pi.blocks[factor]
    return GaussianState(pi.mean[lo:hi], pi.cov[lo:hi, lo:hi])


def bayes_invert_gaussian(c: GaussianChannel, pi: GaussianState) -> GaussianChannel:
    """Conjugate posterior family as an affine-Gaussian channel.

    With prior N(mu, S) and likelihood y|x ~ N(Ax + b, R) the posterior for
    observation y is N(mu + K(y - A mu - b), S - K A S) with gain
    K = S A^T (A S A^T + R)^{-1}.  The pushforward covariance must be
    invertible, otherwise there is nothing to condition on.
    """
    if pi.dim != c.dom_dim:
        raise DimensionMismatch("prior not on channel domain")
    obs_cov = c.weight @ pi.cov @ c.weight.T + c.noise_cov
    sign, logdet = np.linalg.slogdet(obs_cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise InvalidState("pushforward covariance is singular; cannot invert")
    gain = pi.cov @ c.weight.T @ np.linalg.inv(obs_cov)
    post_cov = pi.cov - gain @ c.weight @ pi.cov
    post_cov = 0.5 * (post_cov + post_cov.T)
    # posterior mean is affine in y:  K y + (mu - K(A mu + b))
    return GaussianChannel(
        gain, pi.mean - gain @ (c.weight @ pi.mean + c.bias), post_cov
    )


def gaussian_log_pdf(y, mean: np.ndarray, cov: np.ndarray) -> float:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = len(mean)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise InvalidState("log-density of a singular Gaussian is undefined")
    resid = y - mean
    quad = float(resid @ np.linalg.solve(cov, resid))
    return -0.5 * (d * LOG_2PI + logdet + quad)


def log_density_gaussian(c: GaussianChannel, y, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return gaussian_log_pdf(y, c.weight @ x + c.bias, c.noise_cov)


def kl_gaussian(p: GaussianState, q: GaussianState) -> float:
    """Closed-form KL(p || q); +inf if p is singular while q is not."""
    if p.dim != q.dim:
        raise DimensionMismatch("KL between Gaussians of different dimension")
    sign_q, logdet_q = np.linalg.slogdet(q.cov)
    if sign_q <= 0 or not np.isfinite(logdet_q):
        raise InvalidState("second argument of KL must have invertible covariance")
    sign_p, logdet_p = np.linalg.slogdet(p.cov)
    if sign_p <= 0:
        return float("inf")
    qinv = np.linalg.inv(q.cov)
    diff = q.mean - p.mean
    return float(
        0.5
        * (
            np.trace(qinv @ p.cov)
            + diff @ qinv @ diff
            - p.dim
            + logdet_q
            - logdet_p
        )
    )


def sample_gaussian(
    pi: GaussianState, rng: np.random.Generator, n: int
) -> np.ndarray:
    """Draw n samples; uses an eigendecomposition so PSD-with-dust works."""
    w, v = np.linalg.eigh(pi.cov)
    scale = v * np.sqrt(np.clip(w, 0.0, None))
    z = rng.standard_normal((n, pi.dim))
    return pi.mean + z @ scale.T


def expectation_gaussian(
    pi: GaussianState,
    f: Callable[[np.ndarray], float],
    *,
    seed: int,
    n_samples: int,
) -> MonteCarloEstimate:
    """Seeded Monte Carlo estimate of E[f]; the estimator is the plain
    sample mean over ``n_samples`` draws from ``pi``."""
    if n_samples < 1:
        raise InvalidState("n_samples must be positive")
    rng = np.random.default_rng(seed)
    xs = sample_gaussian(pi, rng, n_samples)
    value = float(np.mean([f(x) for x in xs]))
    return MonteCarloEstimate(value=value, n_samples=n_samples, seed=seed)


def gaussian_entropy(cov: np.ndarray) -> float:
    d = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise InvalidState("entropy of a singular Gaussian is undefined")
    return 0.5 * (d * (1.0 + LOG_2PI) + logdet)
