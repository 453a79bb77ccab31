"""The delta-perturbed problem and the limit delta -> 0.

Adding ``delta`` to every stage cost away from ``t`` makes every
non-terminating policy infinitely expensive, so the perturbed optimum only
reflects policies that reach ``t`` in finite expected time.  Its limit as
``delta`` shrinks is the best cost over such policies.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .bellman import ViOptions, evaluate_policy, greedy, value_iteration
from .errors import ContractViolation, ParameterError
from .model import TERMINAL, OutcomeBranch, SspModel, StationaryPolicy

DEFAULT_SCHEDULE = (1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001)
MONOTONE_SLACK = 1e-9


def perturb(model: SspModel, delta: float) -> SspModel:
    if not delta > 0:
        raise ParameterError("delta must be positive")
    branches = tuple(
        per
        if x == TERMINAL
        else tuple(
            tuple(OutcomeBranch(b.probability, b.next, b.cost + delta) for b in outs)
            for outs in per
        )
        for x, per in enumerate(model.branches)
    )
    return SspModel(
        model.states, model.controls, branches, f"{model.name}+{delta!r}", model.interior
    )


def solve_perturbed(model: SspModel, delta: float, opts: ViOptions | None = None) -> np.ndarray:
    """Optimal cost of the perturbed problem, by value iteration from zero."""
    J, _ = value_iteration(perturb(model, delta), model.zeros(), opts)
    return J


@dataclass
class SweepResult:
    """Value functions along a parameter schedule plus their limit estimate.

    ``values[i]`` belongs to ``schedule[i]``.  ``raw`` is the last row as
    computed; ``limit`` is the extrapolated (or final) value.
    """

    parameter: str
    schedule: tuple[float, ...]
    states: tuple[str, ...]
    values: np.ndarray
    limit: np.ndarray
    monotone: np.ndarray

    @property
    def raw(self) -> np.ndarray:
        return self.values[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state", *(f"{self.parameter}={p!r}" for p in self.schedule), "limit"])
        for i, s in enumerate(self.states):
            w.writerow([s, *(_cell(v) for v in self.values[:, i]), _cell(self.limit[i])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "schedule": list(self.schedule),
            "values": {
                s: [_cell(v) for v in self.values[:, i]] for i, s in enumerate(self.states)
            },
            "limit": {s: _cell(self.limit[i]) for i, s in enumerate(self.states)},
            "monotone": {s: bool(self.monotone[i]) for i, s in enumerate(self.states)},
        }


def _cell(v: float):
    return "inf" if np.isinf(v) else float(v)


def extrapolate_to_zero(d1: float, v1: np.ndarray, d2: float, v2: np.ndarray) -> np.ndarray:
    """Value at 0 of the line through ``(d1, v1)`` and ``(d2, v2)``, clipped at 0."""
    out = np.full_like(v2, np.inf)
    fin = np.isfinite(v1) & np.isfinite(v2)
    out[fin] = v2[fin] - d2 * (v1[fin] - v2[fin]) / (d1 - d2)
    return np.maximum(out, 0.0)


def delta_sweep(
    model: SspModel, schedule=DEFAULT_SCHEDULE, opts: ViOptions | None = None
) -> SweepResult:
    schedule = tuple(float(d) for d in schedule)
    if not schedule or any(d <= 0 for d in schedule):
        raise ParameterError("schedule must be nonempty and positive")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ParameterError("schedule must be strictly decreasing")
    values = np.array([solve_perturbed(model, d, opts) for d in schedule])
    if len(schedule) >= 2:
        limit = extrapolate_to_zero(schedule[-2], values[-2], schedule[-1], values[-1])
    else:
        limit = values[-1].copy()
    limit[TERMINAL] = 0.0
    # larger delta, larger cost; rows run from large to small delta
    with np.errstate(invalid="ignore"):
        ok = (values[1:] <= values[:-1] + MONOTONE_SLACK) | np.isinf(values[:-1])
    return SweepResult("delta", schedule, model.states, values, limit, ok.all(axis=0))


def proper_policy_extract(
    model: SspModel, delta: float, opts: ViOptions | None = None, j_delta=None
) -> StationaryPolicy:
    """Greedy policy for the perturbed optimum; proper wherever any policy is.

    Its unperturbed cost is bounded by the perturbed optimum on the
    effective domain; both facts are checked before returning.  Pass
    ``j_delta`` to reuse an already computed perturbed optimum.
    """
    from .properness import classify

    pm = perturb(model, delta)
    Jd = value_iteration(pm, model.zeros(), opts)[0] if j_delta is None else np.asarray(j_delta)
    mu = greedy(pm, Jd)
    report = classify(model, mu)
    dom = np.isfinite(Jd)
    if not report.proper[dom].all():
        bad = [model.states[x] for x in np.flatnonzero(dom & ~report.proper)]
        raise ContractViolation(f"extracted policy is improper at {bad}")
    slack = 1e-9 * np.maximum(1.0, Jd[dom])
    if np.any(report.cost[dom] > Jd[dom] + slack):
        raise ContractViolation("extracted policy costs more than the perturbed optimum")
    return mu


def proper_policy_cost(model: SspModel, delta: float, opts: ViOptions | None = None) -> np.ndarray:
    return evaluate_policy(model, proper_policy_extract(model, delta, opts))
