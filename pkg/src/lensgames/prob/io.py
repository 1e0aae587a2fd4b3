"""Canonical JSON for states and channels.

Floats are rendered with 17 significant digits, which round-trips IEEE
doubles bit-exactly; keys are emitted in sorted order so identical values
always serialise to identical bytes.  Tuple labels (product spaces) are
written as JSON arrays and read back as tuples, so list-valued labels are
not representable.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from ..errors import SchemaError
from .finite import FiniteChannel, FiniteDist
from .gaussian import GaussianChannel, GaussianState


def _render(value, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise SchemaError(f"cannot serialise non-finite float {v!r}")
        out.append(format(v, ".17g"))
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _render(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        seq = value.tolist() if isinstance(value, np.ndarray) else value
        out.append("[")
        for i, item in enumerate(seq):
            if i:
                out.append(", ")
            _render(item, out)
        out.append("]")
    else:
        raise SchemaError(f"cannot serialise {type(value).__name__}")


def dumps_canonical(value: Any) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    out: list[str] = []
    _render(value, out)
    return "".join(out)


def _label_out(label):
    return list(_label_out(part) for part in label) if isinstance(label, tuple) else label


def _label_in(raw):
    return tuple(_label_in(part) for part in raw) if isinstance(raw, list) else raw


def dist_to_json(d: FiniteDist) -> dict:
    return {"support": [_label_out(x) for x in d.support],
            "probs": [float(p) for p in d.probs]}


def dist_from_json(obj: dict) -> FiniteDist:
    try:
        return FiniteDist(tuple(_label_in(x) for x in obj["support"]),
                          np.asarray(obj["probs"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad finite distribution: {exc}") from exc


def channel_to_json(c: FiniteChannel) -> dict:
    return {"domain": [_label_out(x) for x in c.domain],
            "codomain": [_label_out(y) for y in c.codomain],
            "rows": [[float(v) for v in row] for row in c.matrix]}


def channel_from_json(obj: dict) -> FiniteChannel:
    try:
        return FiniteChannel(tuple(_label_in(x) for x in obj["domain"]),
                             tuple(_label_in(y) for y in obj["codomain"]),
                             np.asarray(obj["rows"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad finite channel: {exc}") from exc


def gaussian_state_to_json(g: GaussianState) -> dict:
    obj = {"mean": [float(v) for v in g.mean],
           "cov": [[float(v) for v in row] for row in g.cov]}
    if g.blocks is not None:
        obj["blocks"] = list(g.blocks)
    return obj


def gaussian_state_from_json(obj: dict) -> GaussianState:
    try:
        return GaussianState(
            np.asarray(obj["mean"], dtype=float),
            np.asarray(obj["cov"], dtype=float),
            blocks=tuple(obj["blocks"]) if "blocks" in obj else None,
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad Gaussian state: {exc}") from exc


def gaussian_channel_to_json(c: GaussianChannel) -> dict:
    return {"weight": [[float(v) for v in row] for row in c.weight],
            "bias": [float(v) for v in c.bias],
            "noise_cov": [[float(v) for v in row] for row in c.noise_cov]}


def gaussian_channel_from_json(obj: dict) -> GaussianChannel:
    try:
        return GaussianChannel(np.asarray(obj["weight"], dtype=float),
                               np.asarray(obj["bias"], dtype=float),
                               np.asarray(obj["noise_cov"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad Gaussian channel: {exc}") from exc


def state_to_json(state) -> dict:
    if isinstance(state, FiniteDist):
        return dist_to_json(state)
    if isinstance(state, GaussianState):
        return gaussian_state_to_json(state)
    raise SchemaError(f"not a state: {type(state).__name__}")


def state_from_json(obj: dict):
    if "support" in obj:
        return dist_from_json(obj)
    if "mean" in obj:
        return gaussian_state_from_json(obj)
    raise SchemaError("object is neither a finite nor a Gaussian state")


def any_channel_to_json(channel) -> dict:
    if isinstance(channel, FiniteChannel):
        return channel_to_json(channel)
    if isinstance(channel, GaussianChannel):
        return gaussian_channel_to_json(channel)
    raise SchemaError(f"not a channel: {type(channel).__name__}")


def any_channel_from_json(obj: dict):
    if "rows" in obj:
        return channel_from_json(obj)
    if "weight" in obj:
        return gaussian_channel_from_json(obj)
    raise SchemaError("object is neither a finite nor a Gaussian channel")
