"""Bellman operators, value iteration, greedy policies, policy evaluation.

Arithmetic is over ``[0, inf]``.  Every stored branch has positive
probability, so ``0 * inf`` never arises inside a backup; ``p * inf`` is
``inf`` and ``inf + c`` is ``inf`` as numpy already does it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError, ParameterError
from .graph import certain_termination_states, finite_cost_states
from .model import TERMINAL, SspModel, StationaryPolicy, restrict


@dataclass
class ViOptions:
    tol_abs: float = 1e-10
    max_sweeps: int = 100_000
    # None means 1e12 * max(max stage cost, 1) * number of states
    divergence_threshold: float | None = None

    def __post_init__(self):
        if not self.tol_abs > 0:
            raise ParameterError("tol_abs must be positive")
        if self.max_sweeps < 1:
            raise ParameterError("max_sweeps must be >= 1")

    def threshold(self, model: SspModel) -> float:
        if self.divergence_threshold is not None:
            return float(self.divergence_threshold)
        return 1e12 * max(model.max_cost, 1.0) * model.n_states


@dataclass(frozen=True)
class SweepRecord:
    sweep: int
    change: float  # sup-norm change over states finite before and after
    infinite: frozenset[int]
    nondecreasing: bool


@dataclass
class ViTrace:
    records: list[SweepRecord] = field(default_factory=list)

    @property
    def sweeps(self) -> int:
        return len(self.records)

    @property
    def monotone(self) -> bool:
        return all(r.nondecreasing for r in self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sweep", "residual", "n_infinite"])
        for r in self.records:
            w.writerow([r.sweep, repr(r.change), len(r.infinite)])
        return buf.getvalue()


def _check_values(model: SspModel, J) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.shape != (model.n_states,):
        raise ParameterError(f"value function has shape {J.shape}, expected ({model.n_states},)")
    if np.isnan(J).any() or (J < 0).any():
        raise ParameterError("value functions take values in [0, inf]")
    return J


def q_values(model: SspModel, J, discount: float = 1.0) -> np.ndarray:
    """Expected one-step cost plus continuation for every (state, control) pair."""
    a = model.arrays
    J = np.asarray(J, dtype=float)
    cont = J[a.br_next] if discount == 1.0 else discount * J[a.br_next]
    return np.bincount(a.br_pair, weights=a.br_prob * (a.br_cost + cont), minlength=a.n_pairs)


def bellman_backup(model: SspModel, J, x: int, discount: float = 1.0) -> float:
    if x == TERMINAL:
        return 0.0
    J = _check_values(model, J)
    best = np.inf
    for outcomes in model.branches[x]:
        total = 0.0
        for b in outcomes:
            total += b.probability * (b.cost + discount * J[b.next])
        best = min(best, total)
    return float(best)


def apply_T(model: SspModel, J, discount: float = 1.0) -> np.ndarray:
    out = np.minimum.reduceat(q_values(model, J, discount), model.arrays.offsets[:-1])
    out[TERMINAL] = 0.0
    return out


def apply_T_mu(model: SspModel, mu: StationaryPolicy, J, discount: float = 1.0) -> np.ndarray:
    mu.check(model)
    out = q_values(model, J, discount)[mu.pair_indices(model)]
    out[TERMINAL] = 0.0
    return out


def value_iteration(
    model: SspModel,
    J0,
    opts: ViOptions | None = None,
    discount: float = 1.0,
) -> tuple[np.ndarray, ViTrace]:
    """Iterate ``J <- T J`` from ``J0`` until the change drops below ``tol_abs``.

    States whose optimal cost is infinite (certified by
    :func:`finite_cost_states`) or whose value passes the divergence
    threshold are reported as ``inf``.  Convergence also requires the set
    of infinite states to be the same in two consecutive iterates.
    """
    opts = opts or ViOptions()
    J = _check_values(model, J0).copy()
    if J[TERMINAL] != 0:
        raise ParameterError("initial function must vanish at t")
    if not 0 < discount <= 1:
        raise ParameterError("discount must lie in (0, 1]")
    thr = opts.threshold(model)
    pinned = ~finite_cost_states(model) if discount == 1.0 else np.zeros(model.n_states, bool)
    trace = ViTrace()
    offsets = model.arrays.offsets[:-1]
    old_inf = np.isinf(J)
    inf_set = frozenset(np.flatnonzero(old_inf).tolist())
    for sweep in range(1, opts.max_sweeps + 1):
        new = np.minimum.reduceat(q_values(model, J, discount), offsets)
        new[TERMINAL] = 0.0
        new[pinned | (new > thr)] = np.inf
        new_inf = np.isinf(new)
        same_inf = (new_inf == old_inf).all()
        if not same_inf:
            inf_set = frozenset(np.flatnonzero(new_inf).tolist())
        both = ~(old_inf | new_inf)
        change = float(np.abs(new[both] - J[both]).max(initial=0.0))
        trace.records.append(SweepRecord(sweep, change, inf_set, bool((new >= J).all())))
        J, old_inf = new, new_inf
        if change < opts.tol_abs and same_inf:
            return J, trace
    raise NonConvergenceError(
        f"value iteration did not converge in {opts.max_sweeps} sweeps", trace
    )


def greedy(model: SspModel, J, discount: float = 1.0) -> StationaryPolicy:
    """Control attaining the backup minimum at each state; ties go to the lowest index."""
    Q = q_values(model, _check_values(model, J), discount)
    off = model.arrays.offsets
    return StationaryPolicy(tuple(int(np.argmin(Q[off[x] : off[x + 1]])) for x in range(model.n_states)))


def policy_matrix(model: SspModel, mu: StationaryPolicy) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix and expected stage cost under ``mu``."""
    mu.check(model)
    n = model.n_states
    P = np.zeros((n, n))
    c = np.zeros(n)
    for x, u in enumerate(mu.choice):
        for b in model.branches[x][u]:
            P[x, b.next] += b.probability
            c[x] += b.probability * b.cost
    return P, c


def monotone_fixed_point(
    P: np.ndarray, c: np.ndarray, finite: np.ndarray, tol: float = 1e-12, max_doublings: int = 64
) -> np.ndarray:
    """Limit of ``J_{k+1} = c + P J_k`` from ``J_0 = 0`` on the ``finite`` states.

    The iterates are visited at sweeps 1, 2, 4, 8, ... using
    ``J_{2m} = J_m + P^m J_m``; this is the same monotone sequence, just
    sampled geometrically.  Rows of ``P`` restricted to ``finite`` must not
    leak mass to the other states.  Other states get ``inf``.
    """
    idx = np.flatnonzero(finite)
    out = np.full(len(c), np.inf)
    A = P[np.ix_(idx, idx)]
    J = c[idx].copy()
    changes = []
    for _ in range(max_doublings):
        nxt = J + A @ J
        change = float(np.max(np.abs(nxt - J), initial=0.0))
        changes.append(change)
        J = nxt
        if change < tol:
            out[idx] = J
            return out
        A = A @ A
    raise NonConvergenceError(
        f"policy iteration sum did not settle after 2**{max_doublings} sweeps", changes
    )


def evaluate_policy(model: SspModel, mu: StationaryPolicy, tol: float = 1e-12) -> np.ndarray:
    """Cost ``J_mu``: the smallest nonnegative solution of ``J = T_mu J``."""
    P, c = policy_matrix(model, mu)
    finite = finite_cost_states(restrict(model, mu))
    J = monotone_fixed_point(P, c, finite, tol)
    J[TERMINAL] = 0.0
    return J


def evaluate_policy_linear(model: SspModel, mu: StationaryPolicy) -> tuple[np.ndarray, np.ndarray]:
    """Direct solve of ``(I - P) J = c`` where termination under ``mu`` is certain.

    Returns the values (``nan`` outside that set) and the set as a mask.
    """
    P, c = policy_matrix(model, mu)
    mask = certain_termination_states(restrict(model, mu))
    idx = np.flatnonzero(mask & (np.arange(model.n_states) != TERMINAL))
    out = np.full(model.n_states, np.nan)
    out[TERMINAL] = 0.0
    if idx.size:
        A = np.eye(idx.size) - P[np.ix_(idx, idx)]
        out[idx] = np.linalg.solve(A, c[idx])
    return out, mask


def pointwise_residual(model: SspModel, J, discount: float = 1.0) -> np.ndarray:
    J = _check_values(model, J)
    TJ = apply_T(model, J, discount)
    fin = np.isfinite(J) & np.isfinite(TJ)
    out = np.zeros(model.n_states)
    out[fin] = np.abs(TJ[fin] - J[fin])
    out[np.isinf(J) != np.isinf(TJ)] = np.inf
    return out


def residual(model: SspModel, J, domain=None, discount: float = 1.0) -> float:
    """``max |J - T J|`` over ``domain`` (all states by default)."""
    r = pointwise_residual(model, J, discount)
    if domain is not None:
        r = r[sorted(domain)]
    return float(np.max(r, initial=0.0))
