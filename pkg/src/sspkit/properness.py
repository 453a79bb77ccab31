"""Properness of policies: termination probabilities, expected steps, rollouts.

A policy is proper at ``x`` when both its cost and its expected number of
steps to reach ``t`` from ``x`` are finite.  Everything here is exact
(distribution propagation or linear-algebra sums) except :func:`rollout`,
which is a seeded Monte Carlo estimator meant to be checked against the
exact quantities.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bellman import evaluate_policy, monotone_fixed_point, policy_matrix
from .errors import ContractViolation, ParameterError
from .graph import certain_termination_states
from .model import TERMINAL, Policy, SspModel, StationaryPolicy, reachable, restrict

AnyPolicy = StationaryPolicy | Policy


def _matrices(model: SspModel, pi: AnyPolicy, K: int):
    cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
    for k in range(K):
        mu = pi.at(k)
        if mu.choice not in cache:
            cache[mu.choice] = policy_matrix(model, mu)
        yield cache[mu.choice]


def distributions(model: SspModel, pi: AnyPolicy, x0: int, K: int) -> np.ndarray:
    """Rows ``k = 0..K`` hold the exact distribution of ``x_k`` under ``pi``."""
    if K < 0:
        raise ParameterError("k must be >= 0")
    out = np.zeros((K + 1, model.n_states))
    out[0, x0] = 1.0
    for k, (P, _) in enumerate(_matrices(model, pi, K)):
        out[k + 1] = out[k] @ P
    return out


def step_distribution(model: SspModel, pi: AnyPolicy, x0: int, k: int) -> np.ndarray:
    return distributions(model, pi, x0, k)[k]


def nontermination_probs(model: SspModel, pi: AnyPolicy, x0: int, K: int) -> np.ndarray:
    """``r_k``: probability that ``x_k != t``, for ``k = 0..K``."""
    d = distributions(model, pi, x0, K)
    return d[:, 1:].sum(axis=1) if model.n_states > 1 else np.zeros(K + 1)


def expect(dist: np.ndarray, J) -> float:
    """``E{J(x)}`` under ``dist`` with the convention ``0 * inf = 0``."""
    J = np.asarray(J, dtype=float)
    live = dist > 0
    return float(np.sum(dist[live] * J[live]))


def tail_expectations(model: SspModel, pi: AnyPolicy, x0: int, J, K: int) -> np.ndarray:
    """``E{J(x_k)}`` for ``k = 0..K`` along trajectories of ``pi`` from ``x0``."""
    return np.array([expect(d, J) for d in distributions(model, pi, x0, K)])


def far_expectation(model: SspModel, pi: AnyPolicy, x0: int, J, k: int) -> float:
    """``E{J(x_k)}`` for large ``k``, using a matrix power once the policy is stationary."""
    L = len(pi.prefix) if isinstance(pi, Policy) else 0
    if k <= L:
        return expect(step_distribution(model, pi, x0, k), J)
    P, _ = policy_matrix(model, pi.at(L))
    d = step_distribution(model, pi, x0, L) @ np.linalg.matrix_power(P, k - L)
    return expect(d, J)


def horizon_cost(model: SspModel, pi: AnyPolicy, x0: int, horizon: int) -> float:
    """Expected cost accumulated over the first ``horizon`` stages."""
    d = distributions(model, pi, x0, horizon)
    return float(sum(d[k] @ c for k, (_, c) in enumerate(_matrices(model, pi, horizon))))


def expected_steps(model: SspModel, mu: StationaryPolicy, tol: float = 1e-12) -> np.ndarray:
    """Expected number of steps to reach ``t`` under ``mu`` from each state."""
    P, _ = policy_matrix(model, mu)
    ones = np.ones(model.n_states)
    ones[TERMINAL] = 0.0
    finite = certain_termination_states(restrict(model, mu))
    N = monotone_fixed_point(P, ones, finite, tol)
    N[TERMINAL] = 0.0
    return N


def graph_oracle(model: SspModel, mu: StationaryPolicy, x: int) -> bool:
    """True iff every state reachable from ``x`` under ``mu`` can still reach ``t``.

    On a finite chain this is the same as finite expected steps.
    """
    mu.check(model)
    preds: dict[int, set[int]] = {y: set() for y in range(model.n_states)}
    for y in range(model.n_states):
        for z in model.successors(y, mu.choice[y]):
            preds[z].add(y)
    can_finish = {TERMINAL}
    todo = [TERMINAL]
    while todo:
        z = todo.pop()
        for y in preds[z]:
            if y not in can_finish:
                can_finish.add(y)
                todo.append(y)
    return reachable(model, x, mu) <= can_finish


@dataclass
class PropernessReport:
    policy: StationaryPolicy
    steps: np.ndarray
    cost: np.ndarray

    @property
    def finite_steps(self) -> np.ndarray:
        return np.isfinite(self.steps)

    @property
    def finite_cost(self) -> np.ndarray:
        return np.isfinite(self.cost)

    @property
    def proper(self) -> np.ndarray:
        return self.finite_steps & self.finite_cost

    @property
    def proper_states(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.proper).tolist())

    def pairs(self) -> list[tuple[StationaryPolicy, int]]:
        """Witnessed members ``(mu, x)`` of the set of proper (policy, state) pairs."""
        return [(self.policy, x) for x in sorted(self.proper_states)]

    def to_dict(self, model: SspModel) -> dict:
        return {
            "policy": self.policy.labels(model),
            "states": {
                s: {
                    "proper": bool(self.proper[i]),
                    "expected_steps": _num(self.steps[i]),
                    "cost": _num(self.cost[i]),
                }
                for i, s in enumerate(model.states)
            },
        }


def _num(v: float):
    return "inf" if np.isinf(v) else float(v)


def classify(model: SspModel, mu: StationaryPolicy) -> PropernessReport:
    return PropernessReport(mu, expected_steps(model, mu), evaluate_policy(model, mu))


def proper_mask(model: SspModel, pi: AnyPolicy) -> np.ndarray:
    """Starting states at which ``pi`` is proper.

    An eventually-stationary policy is proper at ``x0`` iff its tail is
    proper at every state it can occupy when the prefix runs out.
    """
    if isinstance(pi, StationaryPolicy):
        return classify(model, pi).proper
    tail_ok = classify(model, pi.tail_policy).proper
    L = len(pi.prefix)
    return np.array(
        [bool(np.all(tail_ok[step_distribution(model, pi, x0, L) > 0])) for x0 in range(model.n_states)]
    )


def proper_at(model: SspModel, pi: AnyPolicy, x0: int) -> bool:
    return bool(proper_mask(model, pi)[x0])


def effective_domain(model: SspModel, delta_probe: float = 0.1) -> frozenset[int]:
    """States where the perturbed optimum is finite, probed at two values of delta."""
    from .perturbation import solve_perturbed

    if not delta_probe > 0:
        raise ParameterError("delta_probe must be positive")
    first = np.isfinite(solve_perturbed(model, delta_probe))
    second = np.isfinite(solve_perturbed(model, delta_probe / 7))
    if not np.array_equal(first, second):
        raise ContractViolation("finite set of the perturbed optimum depends on delta")
    return frozenset(np.flatnonzero(first).tolist())


def uniform_properness(model: SspModel, mu: StationaryPolicy, domain) -> tuple[bool, float]:
    """Sup of expected steps over ``domain``; uniformly proper iff it is finite."""
    N = expected_steps(model, mu)
    dom = sorted(domain)
    bound = float(np.max(N[dom], initial=0.0))
    return bool(np.isfinite(bound)), bound


# -- Monte Carlo ---------------------------------------------------------------


@dataclass
class RolloutEstimate:
    horizon: int
    n_runs: int
    seed: int
    cost: float
    cost_se: float
    r: np.ndarray
    r_se: np.ndarray
    tail: np.ndarray | None = None
    tail_se: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "horizon": self.horizon,
            "n_runs": self.n_runs,
            "seed": self.seed,
            "cost": self.cost,
            "cost_se": self.cost_se,
            "r": self.r.tolist(),
            "r_se": self.r_se.tolist(),
        }
        if self.tail is not None:
            out["tail"] = [_num(v) for v in self.tail]
            out["tail_se"] = [_num(v) for v in self.tail_se]
        return out


def _branch_tables(model: SspModel):
    width = max(len(outs) for per in model.branches for outs in per)
    n_pairs = model.arrays.n_pairs
    cum = np.full((n_pairs, width), np.inf)
    nxt = np.zeros((n_pairs, width), dtype=np.intp)
    cost = np.zeros((n_pairs, width))
    pair = 0
    for per in model.branches:
        for outs in per:
            acc = 0.0
            for j, b in enumerate(outs):
                acc += b.probability
                cum[pair, j] = acc
                nxt[pair, j] = b.next
                cost[pair, j] = b.cost
            cum[pair, len(outs) - 1] = np.inf  # absorb rounding in the last bucket
            pair += 1
    return cum, nxt, cost


@lru_cache(maxsize=4)
def run_uniforms(seed: int, n_runs: int, horizon: int) -> np.ndarray:
    """Row ``i`` comes from its own generator seeded by ``(seed, i)``.

    Building 10^5 generators takes about two seconds, so the last few
    tables are cached (read-only).
    """
    U = np.empty((n_runs, horizon))
    for i in range(n_runs):
        U[i] = np.random.default_rng([seed, i]).random(horizon)
    U.flags.writeable = False
    return U


def _mean_se(samples: np.ndarray) -> tuple[float, float]:
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    with np.errstate(invalid="ignore"):
        se = samples.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, se


def rollout(
    model: SspModel,
    pi: AnyPolicy,
    x0: int,
    horizon: int,
    n_runs: int,
    seed: int,
    J=None,
) -> RolloutEstimate:
    """Seeded Monte Carlo estimates of horizon cost, ``r_k`` and ``E{J(x_k)}``."""
    if horizon < 1 or n_runs < 1:
        raise ParameterError("horizon and n_runs must be >= 1")
    pi.check(model)
    cum, nxt, cost = _branch_tables(model)
    offsets = model.arrays.offsets
    U = run_uniforms(seed, n_runs, horizon)
    state = np.full(n_runs, x0, dtype=np.intp)
    total = np.zeros(n_runs)
    alive = np.zeros((n_runs, horizon + 1))
    values = None if J is None else np.zeros((n_runs, horizon + 1))
    Jarr = None if J is None else np.asarray(J, dtype=float)
    for k in range(horizon + 1):
        alive[:, k] = state != TERMINAL
        if values is not None:
            values[:, k] = Jarr[state]
        if k == horizon:
            break
        choice = np.asarray(pi.at(k).choice, dtype=np.intp)
        pairs = offsets[state] + choice[state]
        pick = (U[:, k, None] >= cum[pairs]).sum(axis=1)
        total += cost[pairs, pick]
        state = nxt[pairs, pick]
    c_mean, c_se = _mean_se(total)
    r, r_se = _mean_se(alive)
    est = RolloutEstimate(horizon, n_runs, seed, float(c_mean), float(c_se), r, r_se)
    if values is not None:
        est.tail, est.tail_se = _mean_se(values)
    return est


def r_csv(r: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "r_k"])
    for k, v in enumerate(r):
        w.writerow([k, repr(float(v))])
    return buf.getvalue()
