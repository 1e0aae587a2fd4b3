"""Shipped desk-scale scenarios: builders, analytic gradients, reports.

Three parameterized objective families live here:

- the thermostat: a one- or two-level active inference hierarchy over 1-d
  Gaussians whose free energy is quadratic in the action parameter;
- the conjugate-Gaussian variational autoencoder: a singleton generative
  family with a linear-Gaussian posterior family, whose optimum is the
  closed-form conjugate posterior;
- the softmax inference game: a finite inference game whose backward rows
  are softmax-parameterized, converging to the exact inversion.

Each builder returns the game, the context, gradient dynamics with an
analytic gradient where the family has one, an initial parameter vector
and the closed-form optimum used by the consistency check.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SchemaError
from .games import (
    ChannelFamily,
    Context,
    LevelModel,
    OpenGame,
    StrategySpace,
    inference_objective,
    make_active_inference_game,
    make_vae_game,
)
from .lens import BayesLens, StateDependentChannel
from .prob import (
    KL,
    FiniteChannel,
    FiniteDist,
    GaussianChannel,
    GaussianState,
    marginalize,
    pushforward,
    tensor,
)
from .realisation import (
    CyberneticReport,
    GradientDynamics,
    Realisation,
    RealisationRun,
    cybernetic_check,
    realise_gradient,
)


# ---------------------------------------------------------------------------
# thermostat
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermostatConfig:
    """Desk-scale temperature regulation.

    The latent room temperature starts at ``x0``; the sensor reads the
    room plus the applied action with variance ``env_noise_var``.  The
    agent expects sensations near ``s_goal`` (variance ``goal_var``) and
    predicts them through a unit-gain model with ``pred_noise_var``.  With
    ``levels=2`` an identity-coupled upper level is stacked on top.
    """

    s_goal: float = 21.0
    x0: float = 15.0
    env_noise_var: float = 0.25
    goal_var: float = 1.0
    pred_noise_var: float = 0.25
    levels: int = 1
    eta: float = 0.2
    max_steps: int = 500
    eps_fix: float = 1e-9
    window: int = 10
    theta0: float = 0.0
    seed: int = 0
    grad: str = "analytic"  # 2-level runs use finite differences
    fd_step: float = 1e-5
    bookkeeping: str = "autoencoder"  # or "vae"
    bound: float = 50.0
    tol: float = 1e-3


def build_thermostat(config: ThermostatConfig):
    """Build the thermostat active-inference game and its dynamics."""
    if config.levels not in (1, 2):
        raise SchemaError("thermostat supports 1 or 2 levels")

    sense = ChannelFamily(
        instantiate=lambda _p: GaussianChannel(
            np.array([[1.0, 0.0]]), [0.0], [[config.pred_noise_var]]
        ),
        params=("unit-gain",),
        label="sense model",
    )
    policy = ChannelFamily(
        instantiate=lambda theta: GaussianChannel(
            np.array([[0.0]]), [float(np.atleast_1d(theta)[0])], [[0.0]]
        ),
        bounds=np.array([[-config.bound, config.bound]]),
        label="constant action",
    )
    bottom = LevelModel(sense=sense, policy=policy)
    levels = [(1, 1), (1, 1)]
    models = [bottom]
    if config.levels == 2:
        sense_top = ChannelFamily(
            instantiate=lambda _p: GaussianChannel(
                np.array([[1.0, 0.0]]), [0.0], [[config.pred_noise_var]]
            ),
            params=("identity-coupling",),
            label="upper sense",
        )
        policy_top = ChannelFamily(
            instantiate=lambda _p: GaussianChannel([[1.0]], [0.0], [[0.0]]),
            params=("identity",),
            label="upper policy",
        )
        levels.append((1, 1))
        models.append(LevelModel(sense=sense_top, policy=policy_top))

    game = make_active_inference_game(levels, models,
                                      bookkeeping=config.bookkeeping)

    goal_prior = GaussianState([config.s_goal], [[config.goal_var]])
    intent_prior = GaussianState([0.0], [[0.0]])
    prior = tensor(goal_prior, intent_prior)
    continuation = GaussianChannel(
        np.array([[0.0, 1.0], [0.0, 1.0]]),
        [config.x0, 0.0],
        [[config.env_noise_var, 0.0], [0.0, 0.0]],
    )
    ctx = Context(prior=prior, continuation=continuation)

    theta_opt = float(np.clip(config.s_goal - config.x0,
                              -config.bound, config.bound))
    game = dataclasses.replace(game, solve=lambda _ctx: (np.array([theta_opt]),))

    objective = lambda th: game.fitness(np.atleast_1d(th), ctx)
    sigma_tot = config.goal_var + config.pred_noise_var
    gradient = None
    if config.grad == "analytic" and config.levels == 1:
        def gradient(th):
            t = float(np.atleast_1d(th)[0])
            return np.array([(config.x0 + t - config.s_goal) / sigma_tot])
    dyn = GradientDynamics(
        objective=objective,
        learning_rate=config.eta,
        gradient=gradient,
        fd_step=config.fd_step,
        bounds=np.array([[-config.bound, config.bound]]),
    )
    return game, ctx, dyn, np.array([config.theta0])


@dataclass
class ThermostatReport:
    """Thermostat run outcome, including the sensed mean at the fixed
    point and the consistency check."""

    status: str
    sensed_mean: float | None
    goal: float
    theta_star: float | None
    check: CyberneticReport
    run: RealisationRun | None

    def to_json(self) -> dict:
        out = self.check.to_json()
        out.update({
            "scenario": "thermostat",
            "sensed_mean": self.sensed_mean,
            "goal": self.goal,
        })
        return out


def run_thermostat(config: ThermostatConfig) -> ThermostatReport:
    """Realise the thermostat and check its fixed point."""
    game, ctx, dyn, theta0 = build_thermostat(config)
    realisation = Realisation(static_game=game, dynamics=dyn,
                              label="thermostat")
    check = cybernetic_check(
        realisation, ctx, theta0, config.max_steps, tol=config.tol,
        eps_fix=config.eps_fix, window=config.window, seed=config.seed,
    )
    sensed = None
    theta = None
    if check.theta_star is not None:
        theta = float(check.theta_star[0])
        sensed = config.x0 + theta  # environment mean response
    return ThermostatReport(
        status=check.status,
        sensed_mean=sensed,
        goal=config.s_goal,
        theta_star=theta,
        check=check,
        run=None,
    )


def realise_fep(config: ThermostatConfig) -> ThermostatReport:
    """Free-energy bookkeeping: per-level autoencoder objectives with KL."""
    return run_thermostat(dataclasses.replace(config, bookkeeping="autoencoder"))


def realise_deep_ai(config: ThermostatConfig) -> ThermostatReport:
    """Negative-ELBO bookkeeping over the same hierarchy and scenario."""
    return run_thermostat(dataclasses.replace(config, bookkeeping="vae"))


# ---------------------------------------------------------------------------
# conjugate-Gaussian variational autoencoder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConjugateVaeConfig:
    """1-d conjugate model: prior N(m0, v0), likelihood z -> N(a z + b, r).

    The posterior family is x -> N(G x + g, exp(s)); parameters are
    theta = (G, g, s).  The closed-form optimum is the conjugate posterior.
    """

    prior_mean: float = 0.0
    prior_var: float = 1.0
    weight: float = 1.0
    bias: float = 0.0
    noise_var: float = 1.0
    eta: float = 0.25
    line_search: bool = True
    max_steps: int = 5000
    eps_fix: float = 1e-12
    window: int = 10
    theta0: tuple = (0.0, 0.0, 0.0)
    seed: int = 0
    grad: str = "analytic"
    fd_step: float = 1e-5
    tol: float = 1e-3


def conjugate_posterior(config: ConjugateVaeConfig) -> tuple[float, float, float]:
    """(gain, offset, variance) of the exact posterior."""
    v0, a, b, r = (config.prior_var, config.weight, config.bias,
                   config.noise_var)
    obs = a * v0 * a + r
    gain = v0 * a / obs
    offset = config.prior_mean - gain * (a * config.prior_mean + b)
    var = v0 - gain * a * v0
    return gain, offset, var


def build_conjugate_vae(config: ConjugateVaeConfig):
    """Game, context, dynamics and initial parameters for the VAE run."""
    prior = GaussianState([config.prior_mean], [[config.prior_var]])
    true_channel = GaussianChannel([[config.weight]], [config.bias],
                                   [[config.noise_var]])
    forward_family = ChannelFamily(
        instantiate=lambda _p: true_channel,
        params=("true-model",),
        label="generative",
    )

    def posterior(theta):
        gq, gb, s = (float(v) for v in np.atleast_1d(theta))
        return GaussianChannel([[gq]], [gb], [[math.exp(s)]])

    backward_family = ChannelFamily(
        instantiate=posterior,
        bounds=np.array([[-10.0, 10.0], [-10.0, 10.0], [-20.0, 5.0]]),
        label="posterior",
    )
    game = make_vae_game(forward_family, backward_family)

    gain, offset, var = conjugate_posterior(config)
    theta_opt = np.array([gain, offset, math.log(var)])
    game = dataclasses.replace(game, solve=lambda _ctx: (theta_opt,))

    ctx = Context(prior=prior, continuation=GaussianChannel.identity(1))

    data = pushforward(ctx.continuation, pushforward(true_channel, prior))
    mu_m, var_m = float(data.mean[0]), float(data.cov[0, 0])
    a, b, r = config.weight, config.bias, config.noise_var
    m0, v0 = config.prior_mean, config.prior_var

    def objective(theta):
        return game.fitness(np.atleast_1d(theta), ctx)

    gradient = None
    if config.grad == "analytic":
        def gradient(theta):
            gq, gb, s = (float(v) for v in np.atleast_1d(theta))
            sq = math.exp(s)
            resid_w = 1.0 - a * gq          # x - a(Gx+g) - b  =  Rx + rr
            resid_b = -a * gb - b
            mean_resid = resid_w * mu_m + resid_b
            dG = (-(a / r) * (resid_w * var_m + mean_resid * mu_m)
                  + (gq * var_m + (gq * mu_m + gb - m0) * mu_m) / v0)
            dg = (-(a / r) * mean_resid + (gq * mu_m + gb - m0) / v0)
            ds = 0.5 * (a * a * sq / r) + 0.5 * (sq / v0 - 1.0)
            return np.array([dG, dg, ds])

    dyn = GradientDynamics(
        objective=objective,
        learning_rate=config.eta,
        gradient=gradient,
        fd_step=config.fd_step,
        bounds=backward_family.bounds,
        line_search=config.line_search,
    )
    return game, ctx, dyn, np.asarray(config.theta0, dtype=float)


@dataclass
class ConjugateVaeReport:
    status: str
    theta_star: list | None
    theta_opt: list
    sup_error: float | None
    check: CyberneticReport

    def to_json(self) -> dict:
        out = self.check.to_json()
        out.update({
            "scenario": "conjugate_vae",
            "theta_opt": self.theta_opt,
            "sup_error": self.sup_error,
        })
        return out


def run_conjugate_vae(config: ConjugateVaeConfig) -> ConjugateVaeReport:
    game, ctx, dyn, theta0 = build_conjugate_vae(config)
    realisation = Realisation(static_game=game, dynamics=dyn,
                              label="conjugate vae")
    check = cybernetic_check(
        realisation, ctx, theta0, config.max_steps, tol=config.tol,
        eps_fix=config.eps_fix, window=config.window, seed=config.seed,
    )
    gain, offset, var = conjugate_posterior(config)
    theta_opt = [gain, offset, math.log(var)]
    sup_err = None
    if check.theta_star is not None:
        got = np.array(check.theta_star)
        # compare on (gain, offset, variance), not the log-variance chart
        want = np.array([gain, offset, var])
        have = np.array([got[0], got[1], math.exp(got[2])])
        sup_err = float(np.abs(want - have).max())
    return ConjugateVaeReport(
        status=check.status,
        theta_star=check.theta_star,
        theta_opt=theta_opt,
        sup_error=sup_err,
        check=check,
    )


# ---------------------------------------------------------------------------
# softmax-parameterized finite inference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoftmaxInferenceConfig:
    """Finite inference game whose backward rows are softmax(theta)."""

    channel_rows: tuple = ((0.9, 0.1), (0.2, 0.8))
    prior_probs: tuple = (0.5, 0.5)
    eta: float = 1.0
    line_search: bool = True
    max_steps: int = 5000
    eps_fix: float = 1e-10
    window: int = 10
    seed: int = 0
    tol: float = 1e-3


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def build_softmax_inference(config: SoftmaxInferenceConfig):
    """Game, context, dynamics, theta0 for the softmax inference family."""
    rows = np.asarray(config.channel_rows, dtype=float)
    nz, nx = rows.shape
    z_labels = tuple(f"z{i}" for i in range(nz))
    x_labels = tuple(f"x{j}" for j in range(nx))
    c = FiniteChannel(z_labels, x_labels, rows)
    prior = FiniteDist(z_labels, np.asarray(config.prior_probs, dtype=float))
    ctx = Context(prior=prior, continuation=FiniteChannel.identity(x_labels))

    def decode_channel(theta) -> FiniteChannel:
        table = np.asarray(theta, dtype=float).reshape(nx, nz)
        return FiniteChannel(x_labels, z_labels,
                             np.stack([_softmax(r) for r in table]))

    def decode(theta) -> BayesLens:
        return BayesLens(c, StateDependentChannel.constant(decode_channel(theta)))

    strategies = StrategySpace(
        "vector", decode, bounds=np.tile([-30.0, 30.0], (nx * nz, 1))
    )

    def fitness(theta, _ctx):
        return inference_objective(
            c, StateDependentChannel.constant(decode_channel(theta)), KL, _ctx
        )

    # closed form: any logits whose softmax is the exact posterior
    from .prob import bayes_invert

    post = bayes_invert(c, prior).as_channel()
    theta_opt = np.log(np.clip(post.matrix, 1e-300, None)).ravel()
    game = OpenGame(
        dom=z_labels, cod=x_labels, strategies=strategies, fitness=fitness,
        solve=lambda _ctx: (theta_opt,), label="softmax inference",
    )

    data = pushforward(ctx.continuation, pushforward(c, prior))
    nll = -np.log(rows)  # -log p(x|z), shape (z, x)

    def objective(theta):
        return fitness(theta, ctx)

    def gradient(theta):
        table = np.asarray(theta, dtype=float).reshape(nx, nz)
        out = np.zeros_like(table)
        for j, x in enumerate(x_labels):
            w = data.prob(x)
            q = _softmax(table[j])
            a = nll[:, j] + np.log(q / prior.probs)
            out[j] = w * q * (a - float(q @ a))
        return out.ravel()

    dyn = GradientDynamics(
        objective=objective,
        learning_rate=config.eta,
        gradient=gradient,
        line_search=config.line_search,
    )
    theta0 = np.zeros(nx * nz)
    return game, ctx, dyn, theta0, decode_channel
