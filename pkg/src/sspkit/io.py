"""JSON model/value/policy files.

Model file::

    {"name": ..., "states": [t, ...], "controls": [[...], ...],
     "branches": [[[{"p": ..., "next": label, "cost": ...}, ...], ...], ...],
     "interior": [labels]}            # optional, truncated models only

Value files map state labels to numbers or the string ``"inf"``.  Policy
files map state labels to control labels; an eventually-stationary policy
is ``{"prefix": [{...}, ...], "tail": {...}}``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidModelError, ParameterError
from .model import OutcomeBranch, Policy, SspModel, StationaryPolicy, Violation, ensure_valid


def model_to_dict(model: SspModel) -> dict[str, Any]:
    out: dict[str, Any] = {
        "name": model.name,
        "states": list(model.states),
        "controls": [list(c) for c in model.controls],
        "branches": [
            [
                [{"p": b.probability, "next": model.states[b.next], "cost": b.cost} for b in outs]
                for outs in per
            ]
            for per in model.branches
        ],
    }
    if model.interior is not None:
        out["interior"] = [model.states[i] for i in sorted(model.interior)]
    return out


def model_from_dict(doc: dict[str, Any]) -> SspModel:
    try:
        states = tuple(str(s) for s in doc["states"])
        idx = {s: i for i, s in enumerate(states)}
        controls = tuple(tuple(str(c) for c in cs) for cs in doc["controls"])

        def _next(v):
            return idx[v] if isinstance(v, str) else int(v)

        branches = tuple(
            tuple(
                tuple(
                    OutcomeBranch(float(b["p"]), _next(b["next"]), float(b["cost"])) for b in outs
                )
                for outs in per
            )
            for per in doc["branches"]
        )
        interior = doc.get("interior")
        inner = None if interior is None else frozenset(idx[s] for s in interior)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidModelError([Violation("malformed model file", detail=repr(exc))]) from None
    model = SspModel(states, controls, branches, str(doc.get("name", "ssp")), inner)
    return ensure_valid(model)


def dump(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_model(model: SspModel, path) -> None:
    Path(path).write_text(dump(model_to_dict(model)), encoding="utf-8")


def read_model(path) -> SspModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidModelError([Violation("malformed model file", detail=str(exc))]) from None
    return model_from_dict(doc)


def encode_value(v: float):
    return "inf" if math.isinf(v) else float(v)


def values_to_dict(model: SspModel, J) -> dict[str, Any]:
    return {s: encode_value(float(J[i])) for i, s in enumerate(model.states)}


def values_from_dict(model: SspModel, doc: dict[str, Any]) -> np.ndarray:
    J = np.zeros(model.n_states)
    for label, v in doc.items():
        x = model.index(label)
        if v == "inf":
            J[x] = np.inf
        else:
            try:
                J[x] = float(v)
            except (TypeError, ValueError):
                raise ParameterError(f"bad value {v!r} for state {label!r}") from None
    return J


def read_values(model: SspModel, path) -> np.ndarray:
    return values_from_dict(model, json.loads(Path(path).read_text(encoding="utf-8")))


def policy_to_dict(model: SspModel, pi: StationaryPolicy | Policy) -> dict[str, Any]:
    if isinstance(pi, StationaryPolicy):
        return pi.labels(model)
    return {"prefix": [mu.labels(model) for mu in pi.prefix], "tail": pi.tail_policy.labels(model)}


def policy_from_dict(model: SspModel, doc: dict[str, Any]) -> StationaryPolicy | Policy:
    if "tail" in doc and isinstance(doc["tail"], dict):
        prefix = tuple(StationaryPolicy.from_labels(model, d) for d in doc.get("prefix", []))
        return Policy(prefix, StationaryPolicy.from_labels(model, doc["tail"]))
    return StationaryPolicy.from_labels(model, doc)


def read_policy(model: SspModel, path) -> StationaryPolicy | Policy:
    return policy_from_dict(model, json.loads(Path(path).read_text(encoding="utf-8")))
