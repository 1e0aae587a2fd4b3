"""Dynamical realisation of optimization games.

A static game is realised by a discrete-time system whose internal state
is the parameter vector of the game's strategy decoder and whose update
is projected gradient descent on the game's loss in a lifted context.
The lift turns a static context into a dynamical one: an autonomous
component that constantly emits the prior and a memoryless responder that
applies the continuation to whatever it is fed.  Fixed points of the
closed system are then compared against brute-force (or closed-form)
static equilibria: the realisation is consistent when the loss at its
fixed point is no worse than the static equilibrium loss.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .dynamics import (
    ClosedSystem,
    DynContext,
    DynLens,
    DynSystem,
    ObjectSpace,
    Trajectory,
    UNIT_SPACE,
    UNIT_VALUE,
    VectorSpace,
    close,
    state_metric,
    step,
)
from .errors import DivergedError, InvalidState
from .games import Context, OpenGame
from .prob import (
    Channel,
    FiniteDist,
    GaussianState,
    State,
    pushforward,
)
from .tolerances import TOL

DIVERGENCE_LIMIT = 1e9


@dataclass
class GradientDynamics:
    """Projected gradient descent on a parameter-space objective.

    ``objective`` maps a parameter vector to the loss; it is a closure
    over the lifted context's emissions.  ``gradient`` is the analytic
    gradient, or None to use central finite differences with step
    ``fd_step``.  One step is theta - lr * grad followed by projection
    onto the ``bounds`` box; with ``line_search`` the learning rate is
    backtracked until the Armijo condition holds.
    """

    objective: Callable[[np.ndarray], float]
    learning_rate: float
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    fd_step: float = 1e-5
    bounds: np.ndarray | None = None
    line_search: bool = False

    def project(self, theta: np.ndarray) -> np.ndarray:
        if self.bounds is None:
            return theta
        b = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        return np.clip(theta, b[:, 0], b[:, 1])

    def grad(self, theta: np.ndarray) -> np.ndarray:
        if self.gradient is not None:
            return np.asarray(self.gradient(theta), dtype=float)
        return central_difference(self.objective, theta, self.fd_step)

    def step(self, theta: np.ndarray) -> np.ndarray:
        g = self.grad(theta)
        if not self.line_search:
            return self.project(theta - self.learning_rate * g)
        base = self.objective(theta)
        gnorm2 = float(g @ g)
        t = self.learning_rate
        for _ in range(30):
            cand = self.project(theta - t * g)
            if self.objective(cand) <= base - 1e-4 * t * gnorm2 + TOL.mono:
                return cand
            t *= 0.5
        return self.project(theta - t * g)


def central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray,
                       h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient estimate."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (f(up) - f(dn)) / (2.0 * h)
    return out


# ---------------------------------------------------------------------------
# lifting static contexts
# ---------------------------------------------------------------------------


def lift_context(ctx: Context, mode: str = "exact") -> DynContext:
    """Lift a stationary context to a dynamical one.

    The autonomous component constantly emits the prior -- as the state
    object itself in exact mode, as fresh samples in sampled mode -- and
    the responder applies the continuation to its input each step (with
    the one-step delay all wiring has).  This constant-emitter lift is one
    admissible choice; nothing forces it beyond stationarity.
    """
    if mode == "exact":
        autonomous = DynSystem(
            state_space=UNIT_SPACE,
            input_space=UNIT_SPACE,
            output_space=ObjectSpace("prior"),
            readout=lambda s: (ctx.prior, UNIT_VALUE),
            transition=lambda s, a, rng: s,
            deterministic=True,
            label="constant prior",
        )

        def respond(state, y_and_residual, rng):
            y, _residual = y_and_residual
            return _apply_continuation(ctx.continuation, y)

        responder = DynSystem(
            state_space=ObjectSpace("response"),
            input_space=ObjectSpace("pair"),
            output_space=ObjectSpace("response"),
            readout=lambda s: s,
            transition=respond,
            deterministic=True,
            label="continuation",
        )
        return DynContext(autonomous=autonomous, responder=responder)
    if mode == "sampled":
        autonomous = DynSystem(
            state_space=ObjectSpace("sample"),
            input_space=UNIT_SPACE,
            output_space=ObjectSpace("sample"),
            readout=lambda s: (s, UNIT_VALUE),
            transition=lambda s, a, rng: _sample_state(ctx.prior, rng),
            deterministic=False,
            label="prior sampler",
        )

        def respond(state, y_and_residual, rng):
            y, _residual = y_and_residual
            dist = ctx.continuation.at(y)
            return _sample_state(dist, rng)

        responder = DynSystem(
            state_space=ObjectSpace("response"),
            input_space=ObjectSpace("pair"),
            output_space=ObjectSpace("response"),
            readout=lambda s: s,
            transition=respond,
            deterministic=False,
            label="continuation sampler",
        )
        return DynContext(autonomous=autonomous, responder=responder)
    raise InvalidState(f"unknown lift mode {mode!r}")


def _apply_continuation(k: Channel, y):
    """Exact mode: wires carry states, so apply the channel to a state;
    point inputs are promoted through the channel's conditional."""
    if isinstance(y, (FiniteDist, GaussianState)):
        return pushforward(k, y)
    return k.at(y)


def _sample_state(dist: State, rng: np.random.Generator):
    if isinstance(dist, FiniteDist):
        idx = rng.choice(len(dist.support), p=dist.probs)
        return dist.support[idx]
    from .prob import sample_gaussian

    return sample_gaussian(dist, rng, 1)[0]


# ---------------------------------------------------------------------------
# gradient realisation
# ---------------------------------------------------------------------------


@dataclass
class RealisationRun:
    """Outcome of a gradient realisation: the parameter trajectory, the
    per-step objective values and the fixed point if one was reached."""

    trajectory: Trajectory
    objectives: list[float]
    theta_star: np.ndarray | None
    steps_to_fix: int | None

    @property
    def converged(self) -> bool:
        return self.theta_star is not None


def _parameter_lens(game: OpenGame, ctx: Context, dyn: GradientDynamics,
                    dim: int) -> DynLens:
    """Forward system: the parameter vector descending the loss; backward
    system: echoes the context response through the played backward part
    (its output is the wire the closure discards and logs)."""

    def fwd_readout(theta):
        return (theta, _emission(game, ctx, theta))

    forward = DynSystem(
        state_space=VectorSpace(dim),
        input_space=ObjectSpace("prior"),
        output_space=ObjectSpace("pair"),
        readout=fwd_readout,
        transition=lambda theta, prior, rng: dyn.step(theta),
        deterministic=True,
        label="parameter descent",
    )

    def bwd_transition(state, mb, rng):
        theta, response = mb
        if isinstance(response, (FiniteDist, GaussianState)):
            try:
                back = game.play(theta).backward(ctx.prior)
                return pushforward(back, response)
            except Exception:
                return response
        return response

    backward = DynSystem(
        state_space=ObjectSpace("pullback"),
        input_space=ObjectSpace("pair"),
        output_space=ObjectSpace("pullback"),
        readout=lambda s: s,
        transition=bwd_transition,
        deterministic=True,
        label="posterior pullback",
    )
    return DynLens(forward, backward, residual=VectorSpace(dim))


def _emission(game: OpenGame, ctx: Context, theta):
    try:
        return pushforward(game.play(theta).forward, ctx.prior)
    except Exception:
        return None


def realise_gradient(game: OpenGame, ctx: Context, dyn: GradientDynamics,
                     theta0, max_steps: int, *, eps_fix: float = 1e-9,
                     window: int = 5, seed: int = 0,
                     record_emissions: bool = False) -> RealisationRun:
    """Close the parameter dynamics in the lifted context and run them.

    Quiescence -- ``window`` consecutive joint-state moves below
    ``eps_fix`` -- marks the fixed point, but the run keeps polishing
    until the move is exactly zero or ``max_steps`` is exhausted, so the
    returned parameters sit at the float-limit fixed point.  A non-finite
    or huge objective raises :class:`DivergedError` with the partial
    trajectory attached.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if dyn.objective is None:
        dyn = dataclasses.replace(dyn, objective=lambda th: game.fitness(th, ctx))
    lens = _parameter_lens(game, ctx, dyn, theta0.size)
    closed = close(lens, lift_context(ctx))
    rng = np.random.default_rng(seed)

    z = (UNIT_VALUE, theta0, None, None)
    traj = Trajectory(seed=seed)
    objectives: list[float] = []
    quiet = 0
    detect: int | None = None
    for t in range(max_steps + 1):
        theta = z[1]
        value = float(dyn.objective(theta))
        objectives.append(value)
        traj.states.append(z)
        obs = {"objective": value}
        if record_emissions:
            obs.update(closed.wires(z))
        traj.observables.append(obs)
        if not math.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
            raise DivergedError(
                f"objective diverged to {value!r} at step {t}", trajectory=traj
            )
        if t == max_steps:
            break
        z_next, _ = step(closed, z, rng)
        move = state_metric(z_next, z)
        if move < eps_fix:
            quiet += 1
            if quiet >= window and detect is None:
                detect = t
        else:
            quiet = 0
        if move == 0.0 and detect is not None:
            z = z_next
            theta = z[1]
            objectives.append(float(dyn.objective(theta)))
            traj.states.append(z)
            traj.observables.append({"objective": objectives[-1]})
            break
        z = z_next
    theta_star = z[1] if detect is not None else None
    return RealisationRun(
        trajectory=traj,
        objectives=objectives,
        theta_star=theta_star,
        steps_to_fix=detect,
    )


# ---------------------------------------------------------------------------
# the consistency check between dynamics and statics
# ---------------------------------------------------------------------------


@dataclass
class Realisation:
    """A static game together with its gradient dynamics and lift.

    ``project`` is the map from fixed-point parameters into the space the
    fitness reads; by default parameters decode to the played lens and the
    game's own loss in the ambient context is the fitness landscape.
    """

    static_game: OpenGame
    dynamics: GradientDynamics
    lift: Callable[[Context], DynContext] = lift_context
    project: Callable[[np.ndarray, Context], float] | None = None
    label: str = "realisation"

    def landscape(self, theta: np.ndarray, ctx: Context) -> float:
        if self.project is not None:
            return float(self.project(theta, ctx))
        return float(self.static_game.fitness(theta, ctx))


@dataclass
class CyberneticReport:
    """Outcome of comparing a realisation's fixed point with the static
    equilibrium.  ``status`` is pass/fail/inconclusive; inconclusive means
    no fixed point was found (oscillation or divergence), which is weaker
    than fail."""

    status: str
    phi_dynamic: float | None
    phi_static: float | None
    steps_to_fix: int | None
    theta_star: list | None
    sigma_static: Any
    tol: float
    trajectory: Trajectory | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "phi_dynamic": self.phi_dynamic,
            "phi_static": self.phi_static,
            "steps_to_fix": self.steps_to_fix,
            "theta_star": self.theta_star,
            "tol": float(self.tol),
            "note": self.note,
        }


def static_equilibrium_value(game: OpenGame, ctx: Context) -> tuple[Any, float]:
    """Best static strategy and its loss, by closed form or enumeration."""
    if game.solve is not None:
        candidates = tuple(game.solve(ctx))
    else:
        candidates = game.equilibria(ctx)
    values = [float(game.fitness(s, ctx)) for s in candidates]
    best = int(np.argmin(values))
    return candidates[best], values[best]


def cybernetic_check(realisation: Realisation, ctx: Context, theta0,
                     max_steps: int, tol: float = 1e-3, *,
                     eps_fix: float = 1e-9, window: int = 5,
                     seed: int = 0) -> CyberneticReport:
    """Pass iff the realised fixed point performs at least as well as the
    static equilibrium: landscape(theta*) <= static loss + tol."""
    game = realisation.static_game
    sigma_static, phi_static = static_equilibrium_value(game, ctx)
    try:
        run = realise_gradient(game, ctx, realisation.dynamics, theta0,
                               max_steps, eps_fix=eps_fix, window=window,
                               seed=seed)
    except DivergedError as err:
        return CyberneticReport(
            status="inconclusive", phi_dynamic=None, phi_static=phi_static,
            steps_to_fix=None, theta_star=None, sigma_static=sigma_static,
            tol=tol, trajectory=err.trajectory, note="objective diverged",
        )
    if run.theta_star is None:
        return CyberneticReport(
            status="inconclusive", phi_dynamic=None, phi_static=phi_static,
            steps_to_fix=None, theta_star=None, sigma_static=sigma_static,
            tol=tol, trajectory=run.trajectory, note="no fixed point found",
        )
    phi_dynamic = realisation.landscape(run.theta_star, ctx)
    status = "pass" if phi_dynamic <= phi_static + tol else "fail"
    return CyberneticReport(
        status=status,
        phi_dynamic=float(phi_dynamic),
        phi_static=float(phi_static),
        steps_to_fix=run.steps_to_fix,
        theta_star=[float(v) for v in np.atleast_1d(run.theta_star)],
        sigma_static=sigma_static,
        tol=tol,
        trajectory=run.trajectory,
    )
