"""Discrete-time dynamical systems shaped like lenses.

A system has an internal state, an input and an output: the readout is a
deterministic function of the current state and the update is a (possibly
stochastic) transition fed by the current input.  Semantics are
synchronous Moore machines: every component of a coupled system updates
simultaneously from the wires read off the *previous* states, so each
stage of wiring introduces a one-step delay and closure never creates an
algebraic loop.

A dynamical lens couples a forward and a backward system along a residual
wire; a dynamical context is an autonomous system plus a responder, and
closing a lens in a context produces a :class:`ClosedSystem` whose joint
state is the product of the four component states.  The discarded bottom
wire is logged in the observables rather than thrown away.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import DimensionMismatch, InvalidState
from .prob import FiniteChannel, FiniteDist, GaussianState, dumps_canonical
from .tolerances import TOL


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteSpace:
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True)
class VectorSpace:
    dim: int


@dataclass(frozen=True)
class ObjectSpace:
    """Opaque wire values (distribution objects, channels, ...)."""

    name: str = "object"


UNIT_SPACE = FiniteSpace(("*",))
UNIT_VALUE = "*"


def pair_space(a, b):
    if isinstance(a, FiniteSpace) and isinstance(b, FiniteSpace):
        return FiniteSpace(tuple((x, y) for x in a.labels for y in b.labels))
    return ObjectSpace(f"pair")


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DynSystem:
    """A state space with a deterministic readout and a stochastic update.

    ``transition(state, inp, rng)`` samples the next state; ``kernel``, if
    present, is the exact finite transition table over pair inputs
    ``(state, input)`` and enables exact distribution propagation.
    ``deterministic`` declares that the transition ignores the generator.
    """

    state_space: Any
    input_space: Any
    output_space: Any
    readout: Callable[[Any], Any]
    transition: Callable[[Any, Any, np.random.Generator], Any]
    kernel: FiniteChannel | None = None
    deterministic: bool = False
    label: str = "system"


def noop_system(space) -> DynSystem:
    """The unit system: the current input becomes the next state, and the
    readout emits the state unchanged (a one-step delay)."""
    if isinstance(space, FiniteSpace):
        pairs = tuple((s, a) for s in space.labels for a in space.labels)
        rows = np.zeros((len(pairs), len(space.labels)))
        for i, (_s, a) in enumerate(pairs):
            rows[i, space.labels.index(a)] = 1.0
        kernel = FiniteChannel(pairs, space.labels, rows)
    else:
        kernel = None
    return DynSystem(
        state_space=space,
        input_space=space,
        output_space=space,
        readout=lambda s: s,
        transition=lambda s, a, rng: a,
        kernel=kernel,
        deterministic=True,
        label="noop",
    )


def channel_system(channel: FiniteChannel, label: str = "channel") -> DynSystem:
    """Memoryless-with-delay system applying a finite channel each step."""
    space_in = FiniteSpace(channel.domain)
    space_state = FiniteSpace(channel.codomain)
    pairs = tuple((s, a) for s in space_state.labels for a in space_in.labels)
    rows = np.zeros((len(pairs), len(space_state.labels)))
    for i, (_s, a) in enumerate(pairs):
        rows[i] = channel.matrix[channel.domain.index(a)]
    kernel = FiniteChannel(pairs, space_state.labels, rows)

    def transition(s, a, rng):
        dist = channel.at(a)
        idx = rng.choice(len(dist.support), p=dist.probs)
        return dist.support[idx]

    return DynSystem(
        state_space=space_state,
        input_space=space_in,
        output_space=space_state,
        readout=lambda s: s,
        transition=transition,
        kernel=kernel,
        deterministic=False,
        label=label,
    )


def compose_dyn(f: DynSystem, g: DynSystem) -> DynSystem:
    """Pipeline f into g; the product state updates synchronously, so the
    composite output lags the input by the two stages' delays."""
    if isinstance(f.output_space, FiniteSpace) and isinstance(g.input_space, FiniteSpace):
        if f.output_space.labels != g.input_space.labels:
            raise DimensionMismatch("pipeline spaces do not match")

    def readout(s):
        return g.readout(s[1])

    def transition(s, a, rng):
        sf, sg = s
        mid = f.readout(sf)  # pre-update readout: synchronous semantics
        return (f.transition(sf, a, rng), g.transition(sg, mid, rng))

    kernel = None
    if (
        f.kernel is not None
        and g.kernel is not None
        and isinstance(f.state_space, FiniteSpace)
        and isinstance(g.state_space, FiniteSpace)
        and isinstance(f.input_space, FiniteSpace)
    ):
        states = tuple(
            (sf, sg) for sf in f.state_space.labels for sg in g.state_space.labels
        )
        pairs = tuple((s, a) for s in states for a in f.input_space.labels)
        rows = np.zeros((len(pairs), len(states)))
        for i, ((sf, sg), a) in enumerate(pairs):
            row_f = f.kernel.matrix[f.kernel.domain.index((sf, a))]
            row_g = g.kernel.matrix[g.kernel.domain.index((sg, f.readout(sf)))]
            rows[i] = np.kron(row_f, row_g)
        kernel = FiniteChannel(pairs, states, rows)

    return DynSystem(
        state_space=pair_space(f.state_space, g.state_space)
        if isinstance(f.state_space, FiniteSpace) and isinstance(g.state_space, FiniteSpace)
        else ObjectSpace("pair"),
        input_space=f.input_space,
        output_space=g.output_space,
        readout=readout,
        transition=transition,
        kernel=kernel,
        deterministic=f.deterministic and g.deterministic,
        label=f"{f.label};{g.label}",
    )


# ---------------------------------------------------------------------------
# dynamical lenses, contexts, closure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DynLens:
    """Two systems coupled along a residual wire.

    ``forward`` reads X and emits (residual, Y); ``backward`` reads
    (residual, B) and emits A.
    """

    forward: DynSystem
    backward: DynSystem
    residual: Any = None


def identity_dyn_lens(space) -> DynLens:
    """Both legs are no-ops; the residual carries the forward state."""
    fwd = noop_system(space)
    forward = DynSystem(
        state_space=fwd.state_space,
        input_space=fwd.input_space,
        output_space=pair_space(UNIT_SPACE, fwd.output_space),
        readout=lambda s: (UNIT_VALUE, s),
        transition=fwd.transition,
        kernel=fwd.kernel,
        deterministic=True,
        label="id-forward",
    )
    bwd = noop_system(space)
    backward = DynSystem(
        state_space=bwd.state_space,
        input_space=pair_space(UNIT_SPACE, bwd.input_space),
        output_space=bwd.output_space,
        readout=lambda s: s,
        transition=lambda s, mb, rng: mb[1],
        kernel=_reindex_pair_kernel(bwd, space) if isinstance(space, FiniteSpace) else None,
        deterministic=True,
        label="id-backward",
    )
    return DynLens(forward, backward, residual=UNIT_SPACE)


def _reindex_pair_kernel(sys: DynSystem, space: FiniteSpace) -> FiniteChannel | None:
    """Kernel for a no-op whose input arrives as (unit, value) pairs."""
    pairs = tuple(
        (s, (UNIT_VALUE, a)) for s in space.labels for a in space.labels
    )
    rows = np.zeros((len(pairs), len(space.labels)))
    for i, (_s, (_u, a)) in enumerate(pairs):
        rows[i, space.labels.index(a)] = 1.0
    return FiniteChannel(pairs, space.labels, rows)


def compose_dyn_lens(g: DynLens, f: DynLens) -> DynLens:
    """Optical composition: forwards pipeline (keeping both residuals),
    backwards pipeline in reverse order."""

    f_fwd, g_fwd = f.forward, g.forward

    def fwd_readout(s):
        sf, sg = s
        mf, _y = f_fwd.readout(sf)
        mg, z = g_fwd.readout(sg)
        return ((mf, mg), z)

    def fwd_transition(s, x, rng):
        sf, sg = s
        _mf, y = f_fwd.readout(sf)
        return (f_fwd.transition(sf, x, rng), g_fwd.transition(sg, y, rng))

    forward = DynSystem(
        state_space=ObjectSpace("pair"),
        input_space=f_fwd.input_space,
        output_space=ObjectSpace("pair"),
        readout=fwd_readout,
        transition=fwd_transition,
        deterministic=f_fwd.deterministic and g_fwd.deterministic,
        label=f"{f_fwd.label};{g_fwd.label}",
    )

    f_bwd, g_bwd = f.backward, g.backward

    def bwd_readout(s):
        sg, sf = s
        return f_bwd.readout(sf)

    def bwd_transition(s, mc, rng):
        (mf, mg), c = mc
        sg, sf = s
        b = g_bwd.readout(sg)
        return (g_bwd.transition(sg, (mg, c), rng), f_bwd.transition(sf, (mf, b), rng))

    backward = DynSystem(
        state_space=ObjectSpace("pair"),
        input_space=ObjectSpace("pair"),
        output_space=f_bwd.output_space,
        readout=bwd_readout,
        transition=bwd_transition,
        deterministic=f_bwd.deterministic and g_bwd.deterministic,
        label=f"{g_bwd.label};{f_bwd.label}",
    )
    return DynLens(forward, backward, residual=(f.residual, g.residual))


@dataclass(frozen=True)
class DynContext:
    """An autonomous emitter of (X, residual) plus a responder consuming
    (Y, residual) and emitting B; the lens's bottom output is discarded."""

    autonomous: DynSystem
    responder: DynSystem


@dataclass(frozen=True)
class ClosedSystem:
    """The four-component closure of a dynamical lens in a context.

    Joint states are 4-tuples (autonomous, forward, responder, backward).
    Wires are recomputed from readouts of the current joint state; one
    step updates every component synchronously from those wires.
    """

    autonomous: DynSystem
    forward: DynSystem
    responder: DynSystem
    backward: DynSystem

    @property
    def components(self) -> tuple[DynSystem, ...]:
        return (self.autonomous, self.forward, self.responder, self.backward)

    @property
    def deterministic(self) -> bool:
        return all(c.deterministic for c in self.components)

    def wires(self, z) -> dict:
        za, zf, zr, zb = z
        x, m_ctx = self.autonomous.readout(za)
        m, y = self.forward.readout(zf)
        b = self.responder.readout(zr)
        a = self.backward.readout(zb)
        return {"x": x, "m_ctx": m_ctx, "m": m, "y": y, "b": b, "a_discarded": a}

    def component_inputs(self, wires: dict) -> tuple:
        return (
            UNIT_VALUE,
            wires["x"],
            (wires["y"], wires["m_ctx"]),
            (wires["m"], wires["b"]),
        )


def close(lens: DynLens, ctx: DynContext) -> ClosedSystem:
    """Wire autonomous -> forward -> responder -> backward; the backward
    output is logged into observables, matching the discard."""
    return ClosedSystem(
        autonomous=ctx.autonomous,
        forward=lens.forward,
        responder=ctx.responder,
        backward=lens.backward,
    )


def step(sys: ClosedSystem, z, rng: np.random.Generator):
    """One synchronous update; returns (next state, emitted observables)."""
    wires = sys.wires(z)
    inputs = sys.component_inputs(wires)
    nxt = tuple(
        comp.transition(state, inp, rng)
        for comp, state, inp in zip(sys.components, z, inputs)
    )
    return nxt, wires


def total_kernel(sys: ClosedSystem) -> FiniteChannel:
    """Exact one-step kernel over the joint state space (finite systems)."""
    spaces = []
    for comp in sys.components:
        if not isinstance(comp.state_space, FiniteSpace) or comp.kernel is None:
            raise InvalidState("total kernel needs finite components with kernels")
        spaces.append(comp.state_space.labels)
    joint = tuple(itertools.product(*spaces))
    rows = np.zeros((len(joint), len(joint)))
    comps = sys.components
    for i, z in enumerate(joint):
        wires = sys.wires(z)
        inputs = sys.component_inputs(wires)
        per = []
        for comp, state, inp in zip(comps, z, inputs):
            per.append(comp.kernel.matrix[comp.kernel.domain.index((state, inp))])
        row = per[0]
        for r in per[1:]:
            row = np.kron(row, r)
        rows[i] = row
    return FiniteChannel(joint, joint, rows)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """A recorded run: states and emitted observables per step, replayable
    from (seed, initial state)."""

    seed: int
    states: list = field(default_factory=list)
    observables: list = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.states)

    def final_state(self):
        return self.states[-1]

    def to_csv(self, path) -> None:
        """One row per recorded step; floats use 17 significant digits."""
        rows = []
        state_cols = _flatten_columns("state", self.states[0])
        obs_cols = sorted(self.observables[0]) if self.observables else []
        header = ["step", *state_cols, *[f"obs_{k}" for k in obs_cols]]
        for t, (z, obs) in enumerate(zip(self.states, self.observables)):
            cells = [str(t)]
            cells.extend(_flatten_values(z))
            cells.extend(_render_cell(obs[k]) for k in obs_cols)
            rows.append(",".join(cells))
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            fh.write("\n".join(rows) + ("\n" if rows else ""))


def _flatten_columns(prefix: str, value) -> list[str]:
    if isinstance(value, tuple):
        out = []
        for i, v in enumerate(value):
            out.extend(_flatten_columns(f"{prefix}{i}", v))
        return out
    if isinstance(value, np.ndarray):
        return [f"{prefix}_{i}" for i in range(value.size)]
    return [prefix]


def _flatten_values(value) -> list[str]:
    if isinstance(value, tuple):
        out = []
        for v in value:
            out.extend(_flatten_values(v))
        return out
    if isinstance(value, np.ndarray):
        return [format(float(v), ".17g") for v in value.ravel()]
    return [_render_cell(value)]


def _render_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, np.ndarray):
        return "[" + " ".join(format(float(v), ".17g") for v in value.ravel()) + "]"
    if isinstance(value, (FiniteDist, GaussianState)):
        from .prob import state_to_json

        return '"' + dumps_canonical(state_to_json(value)).replace('"', "'") + '"'
    text = str(value)
    return '"' + text.replace('"', "'") + '"' if "," in text else text


def run(sys: ClosedSystem, z0, steps: int, seed: int = 0) -> Trajectory:
    """Iterate the closed system, recording every state and its wires.

    Zero steps gives the singleton trajectory of the initial state; the
    record is a pure function of (z0, steps, seed).
    """
    if steps < 0:
        raise InvalidState("steps must be >= 0")
    rng = np.random.default_rng(seed)
    traj = Trajectory(seed=seed)
    z = tuple(z0)
    traj.states.append(z)
    traj.observables.append(sys.wires(z))
    for _ in range(steps):
        z, _w = step(sys, z, rng)
        traj.states.append(z)
        traj.observables.append(sys.wires(z))
    return traj


# ---------------------------------------------------------------------------
# fixed points
# ---------------------------------------------------------------------------


def state_metric(a, b) -> float:
    """Sup-metric over joint states: numeric coordinates by absolute
    difference, labels and opaque objects by the discrete metric, with
    distribution-valued objects compared by their parameters."""
    if type(a) is not type(b):
        return 1.0
    if isinstance(a, tuple):
        if len(a) != len(b):
            return 1.0
        return max((state_metric(x, y) for x, y in zip(a, b)), default=0.0)
    if isinstance(a, np.ndarray):
        if a.shape != b.shape:
            return 1.0
        return float(np.abs(a - b).max(initial=0.0))
    if isinstance(a, (int, float, np.floating)) and not isinstance(a, bool):
        return abs(float(a) - float(b))
    if isinstance(a, FiniteDist):
        if a.support != b.support:
            return 1.0
        return float(np.abs(a.probs - b.probs).max(initial=0.0))
    if isinstance(a, GaussianState):
        if a.dim != b.dim:
            return 1.0
        return float(
            max(
                np.abs(a.mean - b.mean).max(initial=0.0),
                np.abs(a.cov - b.cov).max(initial=0.0),
            )
        )
    return 0.0 if a == b else 1.0


def find_fixed_point(sys: ClosedSystem, z0, max_steps: int, eps_fix: float,
                     window: int = 1, seed: int = 0, mode: str = "auto"):
    """Search the run from ``z0`` for a fixed point.

    In exact mode (finite components, small joint space) a state is fixed
    when its one-step distribution sits within ``eps_fix`` total variation
    of the point mass on itself.  Otherwise quiescence is used: the first
    state followed by ``window`` consecutive moves smaller than
    ``eps_fix``.  Returns the state or None.
    """
    if mode not in ("auto", "exact", "quiescence"):
        raise InvalidState(f"unknown mode {mode!r}")
    use_exact = False
    kernel = None
    if mode in ("auto", "exact"):
        try:
            kernel = total_kernel(sys)
            use_exact = len(kernel.domain) <= 4096
        except InvalidState:
            if mode == "exact":
                raise
    rng = np.random.default_rng(seed)
    z = tuple(z0)
    if use_exact:
        for _ in range(max_steps + 1):
            row = kernel.matrix[kernel.domain.index(z)]
            point = np.zeros_like(row)
            point[kernel.codomain.index(z)] = 1.0
            if 0.5 * np.abs(row - point).sum() < eps_fix:
                return z
            z, _ = step(sys, z, rng)
        return None
    candidate = z
    quiet = 0
    for _ in range(max_steps):
        nxt, _ = step(sys, z, rng)
        if state_metric(nxt, z) < eps_fix:
            if quiet == 0:
                candidate = z
            quiet += 1
            if quiet >= window:
                return candidate
        else:
            quiet = 0
        z = nxt
    return None
