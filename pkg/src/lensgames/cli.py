"""Command-line front end.

Subcommands: ``verify`` (randomized composition-law campaign), ``game``
(equilibria of a configured game), ``realise`` (gradient realisation of a
configured scenario) and ``thermostat`` (the shipped regulation scenario).
Every run writes its artifacts plus a manifest; reports and trajectories
are byte-identical across reruns with the same command, config and seed.
Exit codes: 0 pass, 1 fail, 2 usage or config error, 3 inconclusive.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LensgamesError, SchemaError
from .games import (
    ChannelFamily,
    Context,
    LevelModel,
    RowGridFamily,
    make_active_inference_game,
    make_inference_game,
    make_mle_game,
    make_vae_game,
)
from .lens import verify_optical_bayes
from .prob import (
    KL,
    ZERO_DIVERGENCE,
    any_channel_from_json,
    dist_from_json,
    dist_to_json,
    dumps_canonical,
    state_from_json,
)
from .scenarios import (
    ConjugateVaeConfig,
    SoftmaxInferenceConfig,
    ThermostatConfig,
    run_conjugate_vae,
    run_thermostat,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3


def _args_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "fn"}


def _out_dir(arg: str | None, command: str) -> Path:
    base = arg or os.environ.get("LENSGAMES_OUT") or "runs"
    path = Path(base) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.write_text(text)


def write_manifest(out: Path, command: list[str], config: dict, seed,
                   outputs: list[Path]) -> Path:
    """Manifest is written atomically last so no run leaves artifacts
    without one; its digests are recomputable from the outputs."""
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "started": _START_STAMP,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path = out / "manifest.json"
    tmp = out / ".manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    os.replace(tmp, path)
    return path


_START_STAMP = datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _swap_corruption(channel):
    """Test hook: swap two entries in the first row of the backward."""
    m = np.array(channel.matrix)
    m[0, 0], m[0, 1] = m[0, 1], m[0, 0]
    from .prob import FiniteChannel

    return FiniteChannel(channel.domain, channel.codomain, m)


def cmd_verify(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if not 2 <= args.max_dim <= 8:
        print("error: --max-dim must be between 2 and 8", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args.out, "verify")
    corrupt = _swap_corruption if args.inject_corruption else None
    report = verify_optical_bayes(args.trials, args.max_dim, args.seed,
                                  args.tol, workers=args.workers,
                                  corrupt=corrupt)
    report_path = out / "verify_report.json"
    _write_text(report_path, report.dumps() + "\n")
    outputs = [report_path]
    if report.failures:
        witness_path = out / "witnesses.json"
        _write_text(witness_path, dumps_canonical(report.failures) + "\n")
        outputs.append(witness_path)
    write_manifest(out, ["verify"], _args_config(args), args.seed, outputs)
    print(f"verify: {report.passes}/{report.trials} passed, "
          f"worst TV {report.worst_tv:.3g} -> {report_path}")
    return EXIT_PASS if report.all_passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# game
# ---------------------------------------------------------------------------


def _load_divergence(name: str):
    if name == "kl":
        return KL
    if name == "zero":
        return ZERO_DIVERGENCE
    raise SchemaError(f"unknown divergence {name!r}")


def _load_family(obj: dict) -> ChannelFamily:
    kind = obj.get("kind")
    if kind == "row_grid":
        return RowGridFamily.build(
            tuple(obj["domain"]), tuple(obj["codomain"]), float(obj["step"])
        )
    if kind == "enumeration":
        channels = tuple(any_channel_from_json(c) for c in obj["channels"])
        return ChannelFamily(
            instantiate=lambda i: channels[i],
            params=tuple(range(len(channels))),
            label=obj.get("label", "enumerated"),
        )
    raise SchemaError(f"unknown family kind {kind!r}")


def _load_context(obj: dict) -> Context:
    return Context(prior=state_from_json(obj["prior"]),
                   continuation=any_channel_from_json(obj["continuation"]))


def _encode_strategy(sigma):
    if isinstance(sigma, (int, np.integer)):
        return int(sigma)
    if isinstance(sigma, (tuple, list)):
        return [_encode_strategy(s) for s in sigma]
    if isinstance(sigma, (float, np.floating)):
        return float(sigma)
    if isinstance(sigma, np.ndarray):
        return [float(v) for v in sigma.ravel()]
    return str(sigma)


def build_game_from_config(config: dict):
    kind = config.get("game")
    ctx = _load_context(config["context"])
    if kind == "mle":
        candidates = [dist_from_json(d) for d in config["candidates"]]
        game = make_mle_game(candidates, log_score=bool(config.get("log_score", False)))
        return game, ctx
    if kind == "inference":
        forward = any_channel_from_json(config["forward"])
        family = _load_family(config["backward_family"])
        game = make_inference_game(forward, family,
                                   _load_divergence(config.get("divergence", "kl")))
        return game, ctx
    if kind in ("vae", "autoencoder"):
        game = make_vae_game(_load_family(config["forward_family"]),
                             _load_family(config["backward_family"]))
        return game, ctx
    if kind == "active_inference":
        levels = [tuple(tuple(s) for s in level) for level in config["levels"]]
        models = [
            LevelModel(sense=_load_family(m["sense"]),
                       policy=_load_family(m["policy"]))
            for m in config["models"]
        ]
        game = make_active_inference_game(levels, models)
        return game, ctx
    raise SchemaError(f"unknown game kind {kind!r}")


def cmd_game(args) -> int:
    out = _out_dir(args.out, "game")
    try:
        config = json.loads(Path(args.config).read_text())
        game, ctx = build_game_from_config(config)
    except (OSError, json.JSONDecodeError, SchemaError, KeyError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        equilibria = game.equilibria(ctx)
        objective = min(game.fitness(s, ctx) for s in equilibria) \
            if equilibria else None
        result = {
            "equilibria": [_encode_strategy(s) for s in equilibria],
            "objective": objective,
            "objective_table": None,
        }
        outputs = []
        if args.table and game.strategies.enumerable:
            table_path = out / "objective_table.csv"
            lines = ["strategy,objective"]
            for sigma, value in game.objective_table(ctx):
                encoded = dumps_canonical(_encode_strategy(sigma)).replace('"', "'")
                lines.append(f"\"{encoded}\",{format(float(value), '.17g')}")
            _write_text(table_path, "\n".join(lines) + "\n")
            result["objective_table"] = table_path.name
            outputs.append(table_path)
        result_path = out / "result.json"
        _write_text(result_path, dumps_canonical(result) + "\n")
        outputs.insert(0, result_path)
    except LensgamesError as exc:
        print(f"error: game evaluation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_manifest(out, ["game", args.config], config,
                   config.get("seed", 0), outputs)
    print(f"game: {len(equilibria)} equilibria -> {result_path}")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# realise / thermostat
# ---------------------------------------------------------------------------


_STATUS_EXIT = {"pass": EXIT_PASS, "fail": EXIT_FAIL,
                "inconclusive": EXIT_INCONCLUSIVE}


def _config_fields(cls, obj: dict, aliases: dict | None = None):
    aliases = aliases or {}
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in obj.items():
        key = aliases.get(key, key)
        if key == "scenario":
            continue
        if key not in names:
            raise SchemaError(f"unknown config key {key!r}")
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    return cls(**kwargs)


def _emit_scenario(out: Path, report, config: dict, command: list[str]) -> int:
    report_path = out / "report.json"
    payload = report.to_json()
    traj = report.check.trajectory
    outputs = [report_path]
    if traj is not None and traj.states:
        traj_path = out / "trajectory.csv"
        traj.to_csv(traj_path)
        payload["trajectory_csv"] = traj_path.name
        outputs.append(traj_path)
    _write_text(report_path, dumps_canonical(payload) + "\n")
    write_manifest(out, command, config, config.get("seed", 0), outputs)
    print(f"{payload.get('scenario', 'scenario')}: {report.status} -> {report_path}")
    return _STATUS_EXIT[report.status]


def cmd_realise(args) -> int:
    out = _out_dir(args.out, "realise")
    try:
        config = json.loads(Path(args.config).read_text())
        scenario = config.get("scenario")
        aliases = {"h": "fd_step"}
        if scenario == "thermostat":
            report = run_thermostat(_config_fields(ThermostatConfig, config, aliases))
        elif scenario == "conjugate_vae":
            report = run_conjugate_vae(_config_fields(ConjugateVaeConfig, config, aliases))
        else:
            raise SchemaError(f"unknown scenario {scenario!r}")
    except (OSError, json.JSONDecodeError, SchemaError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LensgamesError as exc:
        print(f"error: realisation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return _emit_scenario(out, report, config, ["realise", args.config])


def cmd_thermostat(args) -> int:
    out = _out_dir(args.out, "thermostat")
    config = ThermostatConfig(
        s_goal=args.s_goal,
        x0=args.x0,
        env_noise_var=args.env_noise,
        levels=args.levels,
        eta=args.eta,
        max_steps=args.max_steps,
        eps_fix=args.eps_fix,
        theta0=args.theta0,
        seed=args.seed,
        grad="fd" if args.levels == 2 else args.grad,
        bookkeeping="vae" if args.deep else "autoencoder",
    )
    try:
        report = run_thermostat(config)
    except LensgamesError as exc:
        print(f"error: thermostat failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return _emit_scenario(out, report, dataclasses.asdict(config),
                          ["thermostat"])


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lensgames",
        description="Bayesian lens composition checks, statistical games, "
                    "and gradient realisations with reproducible artifacts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="randomized composition-law campaign")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-dim", type=int, default=5, dest="max_dim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--inject-corruption", action="store_true",
                   dest="inject_corruption", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("game", help="solve a configured game")
    p.add_argument("--config", required=True)
    p.add_argument("--table", action="store_true",
                   help="also write the objective table CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_game)

    p = sub.add_parser("realise", help="gradient realisation of a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_realise)

    p = sub.add_parser("thermostat", help="the shipped regulation scenario")
    p.add_argument("--s-goal", type=float, default=21.0, dest="s_goal")
    p.add_argument("--x0", type=float, default=15.0)
    p.add_argument("--env-noise", type=float, default=0.25, dest="env_noise")
    p.add_argument("--levels", type=int, default=1, choices=(1, 2))
    p.add_argument("--eta", type=float, default=0.2)
    p.add_argument("--max-steps", type=int, default=500, dest="max_steps")
    p.add_argument("--eps-fix", type=float, default=1e-9, dest="eps_fix")
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grad", choices=("analytic", "fd"), default="analytic")
    p.add_argument("--deep", action="store_true",
                   help="use negative-ELBO bookkeeping")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_thermostat)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    return args.fn(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
