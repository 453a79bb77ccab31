"""Fixed-point checks, function-class membership, and solution-set reports.

The function classes checked here:

``W_hat``    J >= J_hat and E{J(x_k)} -> 0 along every proper (policy, start)
``W_star``   J_star <= J <= c * J_star for some c > 0
``B``        J(t) = 0 and J bounded on the effective domain of J_hat
``W_hat_b``  members of ``B`` with J >= J_hat

Only ``W_hat`` quantifies over all policies, which cannot be enumerated,
so its best verdict is ``evidence-only``.  The others are decided exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .bellman import (
    ViOptions,
    evaluate_policy,
    pointwise_residual,
    residual,
    value_iteration,
)
from .errors import ContractViolation, ParameterError
from .io import encode_value
from .model import (
    TERMINAL,
    OutcomeBranch,
    Policy,
    SspModel,
    StationaryPolicy,
    all_stationary_policies,
    count_stationary_policies,
    ensure_valid,
)
from .perturbation import (
    DEFAULT_SCHEDULE,
    MONOTONE_SLACK,
    SweepResult,
    delta_sweep,
    proper_policy_extract,
)
from .properness import far_expectation, proper_mask, tail_expectations

CLASS_TAGS = ("W_hat", "W_star", "B", "W_hat_b")
ZERO_TOL = 1e-12


@dataclass
class FixedPointReport:
    passed: bool
    residual: float
    worst_state: str | None
    tol: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "residual": encode_value(self.residual),
            "worst_state": self.worst_state,
            "tol": self.tol,
        }


def verify_fixed_point(model: SspModel, J, tol: float = 1e-9, domain=None) -> FixedPointReport:
    r = pointwise_residual(model, J)
    dom = sorted(range(model.n_states) if domain is None else domain)
    if not dom:
        return FixedPointReport(True, 0.0, None, tol)
    worst = dom[int(np.argmax(r[dom]))]
    return FixedPointReport(bool(r[worst] <= tol), float(r[worst]), model.states[worst], tol)


@dataclass
class MembershipContext:
    j_hat: np.ndarray | None = None
    j_star: np.ndarray | None = None
    x_hat: Iterable[int] | None = None
    horizon: int = 100
    tol: float = 1e-8
    # a still-decreasing tail that misses tol at ``horizon`` is re-checked here
    far_horizon: int = 2**16
    # policies checked for W_hat; default: every stationary policy
    policies: Sequence[StationaryPolicy | Policy] | None = None
    max_policies: int = 4096


@dataclass
class MembershipReport:
    tag: str
    verdict: str  # "member", "non-member" or "evidence-only"
    reason: str = ""
    witnesses: dict[str, Any] = field(default_factory=dict)

    @property
    def is_member(self) -> bool:
        return self.verdict in ("member", "evidence-only")

    def to_dict(self) -> dict:
        return {
            "class": self.tag,
            "verdict": self.verdict,
            "reason": self.reason,
            "witnesses": self.witnesses,
        }


def _need(value, what: str, tag: str):
    if value is None:
        raise ParameterError(f"membership in {tag} needs {what} in the context")
    return value


def _below(model: SspModel, lower: np.ndarray, J: np.ndarray) -> int | None:
    """First state where ``J < lower``, or None."""
    bad = np.flatnonzero(J < lower)
    return int(bad[0]) if bad.size else None


def membership(model: SspModel, J, tag: str, ctx: MembershipContext) -> MembershipReport:
    J = np.asarray(J, dtype=float)
    if tag not in CLASS_TAGS:
        raise ParameterError(f"unknown class {tag!r}; expected one of {CLASS_TAGS}")
    if J[TERMINAL] != 0 or (J < 0).any() or np.isnan(J).any():
        return MembershipReport(tag, "non-member", "not a nonnegative function vanishing at t")
    if tag == "W_hat":
        return _w_hat(model, J, ctx)
    if tag == "W_star":
        return _w_star(model, J, _need(ctx.j_star, "j_star", tag))
    bounded = _bounded(model, J, _need(ctx.x_hat, "x_hat", tag), tag)
    if tag == "B" or not bounded.is_member:
        return bounded
    x = _below(model, _need(ctx.j_hat, "j_hat", tag), J)
    if x is not None:
        return MembershipReport(tag, "non-member", "J < J_hat", {"state": model.states[x]})
    return MembershipReport(tag, "member", "bounded on the domain and above J_hat", bounded.witnesses)


def _bounded(model: SspModel, J: np.ndarray, x_hat, tag: str) -> MembershipReport:
    dom = sorted(x_hat)
    sup = float(np.max(J[dom], initial=0.0))
    if np.isfinite(sup):
        return MembershipReport(tag, "member", "bounded on the domain", {"sup": sup})
    worst = model.states[dom[int(np.argmax(J[dom]))]]
    return MembershipReport(tag, "non-member", "unbounded on the domain", {"sup": "inf", "state": worst})


def _w_star(model: SspModel, J: np.ndarray, j_star) -> MembershipReport:
    j_star = np.asarray(j_star, dtype=float)
    x = _below(model, j_star, J)
    if x is not None:
        return MembershipReport("W_star", "non-member", "J < J_star", {"state": model.states[x]})
    ratios = []
    for y in range(model.n_states):
        if np.isinf(j_star[y]):
            continue
        if j_star[y] <= 0:
            if J[y] > 0:
                return MembershipReport(
                    "W_star", "non-member", "J > 0 where J_star = 0", {"state": model.states[y]}
                )
            continue
        if np.isinf(J[y]):
            return MembershipReport(
                "W_star", "non-member", "J infinite where J_star is finite", {"state": model.states[y]}
            )
        ratios.append(J[y] / j_star[y])
    # with no positive finite J_star value any c > 0 works; report 1
    c = float(max(ratios)) if ratios else 1.0
    return MembershipReport("W_star", "member", "J_star <= J <= c J_star", {"c": c})


def _policies(model: SspModel, ctx: MembershipContext):
    if ctx.policies is not None:
        return list(ctx.policies)
    n = count_stationary_policies(model)
    if n > ctx.max_policies:
        raise ParameterError(
            f"{n} stationary policies exceed max_policies={ctx.max_policies}; pass policies explicitly"
        )
    return list(all_stationary_policies(model))


def _w_hat(model: SspModel, J: np.ndarray, ctx: MembershipContext) -> MembershipReport:
    j_hat = np.asarray(_need(ctx.j_hat, "j_hat", "W_hat"), dtype=float)
    x = _below(model, j_hat, J)
    if x is not None:
        return MembershipReport("W_hat", "non-member", "J < J_hat", {"state": model.states[x]})
    x_hat = sorted(ctx.x_hat) if ctx.x_hat is not None else np.flatnonzero(np.isfinite(j_hat)).tolist()
    K = ctx.horizon
    checked = 0
    for pi in _policies(model, ctx):
        proper = proper_mask(model, pi)
        for x0 in x_hat:
            if not proper[x0]:
                continue
            checked += 1
            table = tail_expectations(model, pi, x0, J, K)
            last, mid = table[K], table[K // 2]
            decays = last <= ctx.tol and last <= mid
            if not decays and last < mid and ctx.far_horizon > K:
                decays = far_expectation(model, pi, x0, J, ctx.far_horizon) <= ctx.tol
            if not decays:
                pol = pi.labels(model) if isinstance(pi, StationaryPolicy) else "eventually-stationary"
                kind = "constant" if np.allclose(table, table[0], rtol=1e-12, atol=0) else "slow"
                return MembershipReport(
                    "W_hat",
                    "non-member",
                    f"E{{J(x_k)}} does not decay to 0 ({kind} tail)",
                    {
                        "policy": pol,
                        "start": model.states[x0],
                        "decay": [encode_value(v) for v in table],
                        "tail_kind": kind,
                    },
                )
    return MembershipReport(
        "W_hat",
        "evidence-only",
        "J >= J_hat and decay holds for every checked proper pair; "
        "nonstationary policies are not covered",
        {"checked_pairs": checked, "horizon": K},
    )


# -- J_star versus J_hat ---------------------------------------------------------


@dataclass
class GapReport:
    states: tuple[str, ...]
    j_star: np.ndarray
    j_hat: np.ndarray
    gap: np.ndarray
    x_star: frozenset[int]
    x_hat: frozenset[int]
    j_star_check: FixedPointReport
    j_hat_check: FixedPointReport
    j_hat_source: str
    sweep: SweepResult
    others: list[dict] = field(default_factory=list)

    def summary(self) -> str:
        parts = []
        for i, s in enumerate(self.states):
            if i == TERMINAL:
                continue
            parts.append(f"J*({s})={self.j_star[i]:g} Ĵ({s})={self.j_hat[i]:g}")
        return " ".join(parts)

    def to_dict(self) -> dict:
        def vals(a):
            return {s: encode_value(float(a[i])) for i, s in enumerate(self.states)}

        return {
            "j_star": vals(self.j_star),
            "j_hat": vals(self.j_hat),
            "gap": vals(self.gap),
            "x_star": [self.states[i] for i in sorted(self.x_star)],
            "x_hat": [self.states[i] for i in sorted(self.x_hat)],
            "j_star_fixed_point": self.j_star_check.to_dict(),
            "j_hat_fixed_point": self.j_hat_check.to_dict(),
            "j_hat_source": self.j_hat_source,
            "other_fixed_points": self.others,
        }


def _gap(j_star: np.ndarray, j_hat: np.ndarray) -> np.ndarray:
    out = np.zeros_like(j_hat)
    fin = np.isfinite(j_hat) & np.isfinite(j_star)
    out[fin] = j_hat[fin] - j_star[fin]
    out[np.isinf(j_hat) & np.isfinite(j_star)] = np.inf
    return out


def solve_j_hat(
    model: SspModel, schedule=DEFAULT_SCHEDULE, opts: ViOptions | None = None, tol: float = 1e-8
) -> tuple[np.ndarray, str, SweepResult]:
    """Best cost over proper policies.

    Starts from the extrapolated perturbation limit.  When the policy
    extracted at the smallest delta is proper, greedy for its own cost, and
    matches the extrapolation within ``tol``, its exact cost replaces the
    extrapolated numbers (``source == "policy"``).
    """
    sweep = delta_sweep(model, schedule, opts)
    limit = sweep.limit
    dom = np.isfinite(limit)
    mu = proper_policy_extract(model, sweep.schedule[-1], opts, sweep.raw)
    J_mu = np.where(dom, evaluate_policy(model, mu), np.inf)
    close = np.all(np.abs(J_mu[dom] - limit[dom]) <= tol * np.maximum(1.0, limit[dom]))
    if close and residual(model, J_mu) <= tol:
        return J_mu, "policy", sweep
    return limit, "extrapolation", sweep


def gap_report(
    model: SspModel,
    schedule=DEFAULT_SCHEDULE,
    candidates: Mapping[str, np.ndarray] | None = None,
    tol: float = 1e-8,
    opts: ViOptions | None = None,
) -> GapReport:
    j_star, _ = value_iteration(model, model.zeros(), opts)
    j_hat, source, sweep = solve_j_hat(model, schedule, opts, tol)
    gap = _gap(j_star, j_hat)
    if (gap < -tol).any():
        raise ContractViolation("J_star exceeds J_hat somewhere")
    gap = np.maximum(gap, 0.0)
    x_star = frozenset(np.flatnonzero(np.isfinite(j_star)).tolist())
    x_hat = frozenset(np.flatnonzero(np.isfinite(j_hat)).tolist())
    ctx = MembershipContext(j_hat=j_hat, j_star=j_star, x_hat=x_hat, tol=tol)
    others = []
    for name, J in (candidates or {}).items():
        J = np.asarray(J, dtype=float)
        check = verify_fixed_point(model, J, tol)
        entry = {"name": name, "fixed_point": check.to_dict()}
        if check.passed:
            entry["classes"] = {
                tag: membership(model, J, tag, ctx).verdict
                for tag in CLASS_TAGS
                if tag != "W_hat" or count_stationary_policies(model) <= ctx.max_policies
            }
        others.append(entry)
    return GapReport(
        model.states,
        j_star,
        j_hat,
        gap,
        x_star,
        x_hat,
        verify_fixed_point(model, j_star, tol),
        verify_fixed_point(model, j_hat, tol),
        source,
        sweep,
        others,
    )


def candidate_family_scan(
    model: SspModel,
    family: Mapping[Any, Any] | Callable[[Any], Any],
    tol: float = 1e-12,
    domain=None,
    params: Iterable[Any] | None = None,
) -> list:
    """Parameters whose value function passes :func:`verify_fixed_point`.

    ``family`` is either a mapping ``param -> J`` or a callable used with
    ``params``.
    """
    if callable(family):
        if params is None:
            raise ParameterError("a callable family needs params")
        items = [(p, family(p)) for p in params]
    else:
        items = list(family.items())
    return [p for p, J in items if verify_fixed_point(model, J, tol, domain).passed]


# -- transformations ---------------------------------------------------------


def lump(model: SspModel, j_star, opts: ViOptions | None = None) -> SspModel:
    """Merge every state with zero optimal cost into ``t``."""
    j_star = np.asarray(j_star, dtype=float)
    if residual(model, j_star) > 1e-9:
        raise ParameterError("lump needs the optimal cost (a verified fixed point)")
    zero = j_star <= ZERO_TOL
    zero[TERMINAL] = True
    keep = [TERMINAL] + [x for x in range(1, model.n_states) if not zero[x]]
    new_index = {x: i for i, x in enumerate(keep)}

    def target(y: int) -> int:
        return TERMINAL if zero[y] else new_index[y]

    branches = [model.branches[TERMINAL]]
    for x in keep[1:]:
        branches.append(
            tuple(
                tuple(OutcomeBranch(b.probability, target(b.next), b.cost) for b in outs)
                for outs in model.branches[x]
            )
        )
    lumped = SspModel(
        tuple(model.states[x] for x in keep),
        tuple(model.controls[x] for x in keep),
        tuple(branches),
        f"{model.name}|lumped",
    )
    ensure_valid(lumped)
    j_new, _ = value_iteration(lumped, lumped.zeros(), opts)
    flat = [lumped.states[x] for x in range(1, lumped.n_states) if j_new[x] <= ZERO_TOL]
    if flat:
        raise ContractViolation(f"lumped model still has zero-cost states {flat}")
    return lumped


def discount_homotopy(
    model: SspModel, alphas: Sequence[float], opts: ViOptions | None = None
) -> SweepResult:
    """Discounted optima for increasing discount factors, each by VI from zero."""
    alphas = tuple(float(a) for a in alphas)
    if not alphas or any(not 0 < a < 1 for a in alphas):
        raise ParameterError("discount factors must lie in (0, 1)")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ParameterError("discount factors must be strictly increasing")
    values = np.array([value_iteration(model, model.zeros(), opts, discount=a)[0] for a in alphas])
    ok = (values[1:] >= values[:-1] - MONOTONE_SLACK).all(axis=0)
    return SweepResult("alpha", alphas, model.states, values, values[-1].copy(), ok)
