"""SSP instances: states, controls, outcome branches, policies.

A model is a finite list of states with the termination state ``t`` at
index 0.  Each (state, control) pair carries a finite list of
:class:`OutcomeBranch` entries, one per disturbance value, holding the
probability, the next state, and the stage cost.

Value functions throughout the package are plain ``numpy`` float arrays
indexed like ``model.states``; ``np.inf`` is a legitimate value.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasiblePolicyError, InvalidModelError, ParameterError

TERMINAL = 0
PROB_TOL = 1e-12


@dataclass(frozen=True)
class OutcomeBranch:
    probability: float
    next: int
    cost: float


@dataclass(frozen=True)
class _Arrays:
    """Flat numpy view of a model used by the vectorized operators."""

    offsets: np.ndarray  # first pair index of each state, length n + 1
    pair_state: np.ndarray
    br_pair: np.ndarray
    br_prob: np.ndarray
    br_next: np.ndarray
    br_cost: np.ndarray

    @property
    def n_pairs(self) -> int:
        return len(self.pair_state)


@dataclass(frozen=True)
class SspModel:
    """Finite stochastic shortest path model with ``t`` at index 0.

    ``interior`` is set on truncated models: the states whose branches are
    exact.  Fixed-point checks on truncations should be restricted to it.
    """

    states: tuple[str, ...]
    controls: tuple[tuple[str, ...], ...]
    branches: tuple[tuple[tuple[OutcomeBranch, ...], ...], ...]
    name: str = "ssp"
    interior: frozenset[int] | None = field(default=None, compare=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def t(self) -> int:
        return TERMINAL

    def index(self, label: str | int) -> int:
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if 0 <= label < self.n_states:
                return int(label)
            raise ParameterError(f"state index {label} out of range")
        try:
            return self._state_index[label]
        except KeyError:
            raise ParameterError(f"unknown state {label!r}") from None

    def control_index(self, x: int, label: str | int) -> int:
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if 0 <= label < len(self.controls[x]):
                return int(label)
        elif label in self.controls[x]:
            return self.controls[x].index(label)
        raise InfeasiblePolicyError(
            f"control {label!r} not available at state {self.states[x]!r}"
        )

    @cached_property
    def _state_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def arrays(self) -> _Arrays:
        offsets = [0]
        pair_state, br_pair, br_prob, br_next, br_cost = [], [], [], [], []
        pair = 0
        for x, per_control in enumerate(self.branches):
            for outcomes in per_control:
                pair_state.append(x)
                for b in outcomes:
                    br_pair.append(pair)
                    br_prob.append(b.probability)
                    br_next.append(b.next)
                    br_cost.append(b.cost)
                pair += 1
            offsets.append(pair)
        return _Arrays(
            offsets=np.asarray(offsets, dtype=np.intp),
            pair_state=np.asarray(pair_state, dtype=np.intp),
            br_pair=np.asarray(br_pair, dtype=np.intp),
            br_prob=np.asarray(br_prob, dtype=float),
            br_next=np.asarray(br_next, dtype=np.intp),
            br_cost=np.asarray(br_cost, dtype=float),
        )

    @property
    def max_cost(self) -> float:
        costs = self.arrays.br_cost
        return float(costs.max()) if costs.size else 0.0

    def successors(self, x: int, u: int | None = None) -> set[int]:
        ctrls = range(len(self.branches[x])) if u is None else (u,)
        return {b.next for c in ctrls for b in self.branches[x][c]}

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_states)


def build_model(
    name: str,
    table: Mapping[str, Mapping[str, Sequence[tuple[float, str | int, float]]] | None],
    interior: Iterable[str] | None = None,
) -> SspModel:
    """Build a model from ``{state: {control: [(p, next, cost), ...]}}``.

    The first key is the termination state.  An empty or ``None`` entry for
    it gets a single cost-free self-loop.  The result is not validated.
    """
    labels = tuple(table)
    if not labels:
        raise ParameterError("a model needs at least the termination state")
    idx = {s: i for i, s in enumerate(labels)}

    def _next(v):
        if isinstance(v, str):
            if v not in idx:
                raise ParameterError(f"branch points at unknown state {v!r}")
            return idx[v]
        return int(v)

    controls, branches = [], []
    for i, s in enumerate(labels):
        entry = table[s]
        if i == TERMINAL and not entry:
            entry = {"stay": [(1.0, labels[0], 0.0)]}
        entry = entry or {}
        controls.append(tuple(entry))
        branches.append(
            tuple(
                tuple(OutcomeBranch(float(p), _next(nx), float(c)) for p, nx, c in outs)
                for outs in entry.values()
            )
        )
    inner = None if interior is None else frozenset(idx[s] for s in interior)
    return SspModel(labels, tuple(controls), tuple(branches), name, inner)


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    state: str | None = None
    control: str | None = None
    detail: str = ""

    def __str__(self) -> str:
        where = ""
        if self.state is not None:
            where = f" at {self.state}" + (f"/{self.control}" if self.control is not None else "")
        return f"{self.kind}{where}" + (f" ({self.detail})" if self.detail else "")


def validate(model: SspModel) -> list[Violation]:
    """List every violated model invariant; an empty list means valid."""
    out: list[Violation] = []
    n = len(model.states)
    if n == 0:
        return [Violation("no states")]
    if len(model.controls) != n or len(model.branches) != n:
        return [Violation("shape mismatch", detail="controls/branches must match states")]
    if len(set(model.states)) != n:
        out.append(Violation("duplicate state labels"))
    for x in range(n):
        s = model.states[x]
        if not model.controls[x]:
            out.append(Violation("no controls", s))
            continue
        if len(model.branches[x]) != len(model.controls[x]):
            out.append(Violation("shape mismatch", s, detail="one branch list per control"))
            continue
        for u, outcomes in enumerate(model.branches[x]):
            c = model.controls[x][u]
            if not outcomes:
                out.append(Violation("empty outcome list", s, c))
                continue
            total = 0.0
            for b in outcomes:
                if not (0 <= b.next < n):
                    out.append(Violation("next state out of range", s, c, str(b.next)))
                if not (b.probability > 0) or not math.isfinite(b.probability):
                    out.append(Violation("nonpositive probability", s, c, repr(b.probability)))
                else:
                    total += b.probability
                if not math.isfinite(b.cost):
                    out.append(Violation("non-finite cost", s, c, repr(b.cost)))
                elif b.cost < 0:
                    out.append(Violation("negative cost", s, c, repr(b.cost)))
                if x == TERMINAL:
                    if b.next != TERMINAL:
                        out.append(Violation("termination not absorbing", s, c))
                    if b.cost != 0:
                        out.append(Violation("termination not cost-free", s, c, repr(b.cost)))
            if abs(total - 1.0) > PROB_TOL:
                out.append(
                    Violation("probabilities do not sum to 1", s, c, f"sum={total!r}")
                )
    return out


def ensure_valid(model: SspModel, where: str | None = None) -> SspModel:
    problems = validate(model)
    if problems:
        raise InvalidModelError(problems, where or model.name)
    return model


# -- policies ----------------------------------------------------------------


@dataclass(frozen=True)
class StationaryPolicy:
    """Control index chosen at each state."""

    choice: tuple[int, ...]

    @classmethod
    def from_labels(cls, model: SspModel, mapping: Mapping[str, str | int]) -> "StationaryPolicy":
        """States missing from ``mapping`` use their first control."""
        unknown = set(mapping) - set(model.states)
        if unknown:
            raise ParameterError(f"policy names unknown states {sorted(unknown)}")
        choice = tuple(
            model.control_index(x, mapping[s]) if s in mapping else 0
            for x, s in enumerate(model.states)
        )
        return cls(choice)

    @classmethod
    def constant(cls, model: SspModel, label: str) -> "StationaryPolicy":
        """Pick ``label`` wherever it exists, else the first control."""
        return cls(
            tuple(
                model.controls[x].index(label) if label in model.controls[x] else 0
                for x in range(model.n_states)
            )
        )

    def check(self, model: SspModel) -> "StationaryPolicy":
        if len(self.choice) != model.n_states:
            raise InfeasiblePolicyError(
                f"policy covers {len(self.choice)} states, model has {model.n_states}"
            )
        for x, u in enumerate(self.choice):
            if not 0 <= u < len(model.controls[x]):
                raise InfeasiblePolicyError(
                    f"control index {u} not available at state {model.states[x]!r}"
                )
        return self

    def labels(self, model: SspModel) -> dict[str, str]:
        return {model.states[x]: model.controls[x][u] for x, u in enumerate(self.choice)}

    def pair_indices(self, model: SspModel) -> np.ndarray:
        return model.arrays.offsets[:-1] + np.asarray(self.choice, dtype=np.intp)

    # Policy protocol
    def at(self, k: int) -> "StationaryPolicy":
        return self

    def tail(self, k: int) -> "StationaryPolicy":
        return self


@dataclass(frozen=True)
class Policy:
    """Eventually-stationary policy: ``prefix[0], prefix[1], ..., tail, tail, ...``."""

    prefix: tuple[StationaryPolicy, ...]
    tail_policy: StationaryPolicy

    def at(self, k: int) -> StationaryPolicy:
        return self.prefix[k] if k < len(self.prefix) else self.tail_policy

    def tail(self, k: int) -> "Policy":
        """The policy obtained by dropping the first ``k`` stages."""
        return Policy(self.prefix[k:], self.tail_policy)

    def check(self, model: SspModel) -> "Policy":
        for mu in (*self.prefix, self.tail_policy):
            mu.check(model)
        return self


def all_stationary_policies(model: SspModel) -> Iterable[StationaryPolicy]:
    """Enumerate every stationary policy (product of the control sets)."""
    import itertools

    for choice in itertools.product(*(range(len(c)) for c in model.controls)):
        yield StationaryPolicy(choice)


def count_stationary_policies(model: SspModel) -> int:
    return math.prod(len(c) for c in model.controls)


def restrict(model: SspModel, mu: StationaryPolicy) -> SspModel:
    """Single-control model in which every state uses ``mu``'s control."""
    mu.check(model)
    return SspModel(
        model.states,
        tuple((model.controls[x][u],) for x, u in enumerate(mu.choice)),
        tuple((model.branches[x][u],) for x, u in enumerate(mu.choice)),
        f"{model.name}|policy",
        model.interior,
    )


def reachable(model: SspModel, x0: int, policy: StationaryPolicy | None = None) -> frozenset[int]:
    """States reachable from ``x0`` along positive-probability branches."""
    if policy is not None:
        policy.check(model)
    seen = {x0}
    todo = [x0]
    while todo:
        x = todo.pop()
        for y in model.successors(x, None if policy is None else policy.choice[x]):
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return frozenset(seen)


# -- countable generators and truncation ------------------------------------

Branches = Sequence[tuple[float, Hashable, float]]


@dataclass(frozen=True)
class CountableGenerator:
    """Lazily enumerated model over hashable state tokens.

    ``expand(token)`` returns ``[(control, [(p, next_token, cost), ...]), ...]``.
    Tokens for which ``is_terminal`` holds are all identified with ``t``.
    """

    roots: tuple[Hashable, ...]
    expand: Callable[[Hashable], Sequence[tuple[str, Branches]]]
    is_terminal: Callable[[Hashable], bool]
    label: Callable[[Hashable], str] = str
    terminal_label: str = "t"
    name: str = "generated"


def _checked_expand(gen: CountableGenerator, token) -> list[tuple[str, list]]:
    out = []
    problems = []
    expansion = list(gen.expand(token))
    if not expansion:
        problems.append(Violation("no controls", gen.label(token)))
    for control, outs in expansion:
        outs = list(outs)
        total = 0.0
        for p, _, cost in outs:
            if not (p > 0) or not math.isfinite(p):
                problems.append(Violation("nonpositive probability", gen.label(token), control))
            total += p
            if not math.isfinite(cost) or cost < 0:
                problems.append(Violation("negative cost", gen.label(token), control, repr(cost)))
        if not outs or abs(total - 1.0) > PROB_TOL:
            problems.append(Violation("probabilities do not sum to 1", gen.label(token), control))
        out.append((control, outs))
    if problems:
        raise InvalidModelError(problems, f"generator token {token!r}")
    return out


def truncate(
    gen: CountableGenerator, depth: int, roots: Sequence[Hashable] | None = None
) -> tuple[SspModel, frozenset[int]]:
    """Finite window of everything reachable from ``roots`` within ``depth`` steps.

    States whose successors would fall outside the window keep their
    controls but every branch is sent to ``t`` at zero cost.  Returns the
    model and its interior (states with exact branches).
    """
    if depth < 1:
        raise ParameterError("depth must be >= 1")
    roots = tuple(gen.roots if roots is None else roots)
    tokens: list[Hashable] = []
    level: dict[Hashable, int] = {}
    expansions: dict[Hashable, list] = {}
    queue: deque = deque()
    for r in roots:
        if not gen.is_terminal(r) and r not in level:
            level[r] = 0
            tokens.append(r)
            queue.append(r)
    while queue:
        tok = queue.popleft()
        if level[tok] >= depth:
            continue
        expansions[tok] = _checked_expand(gen, tok)
        for _, outs in expansions[tok]:
            for _, nxt, _ in outs:
                if not gen.is_terminal(nxt) and nxt not in level:
                    level[nxt] = level[tok] + 1
                    tokens.append(nxt)
                    queue.append(nxt)

    index = {tok: i + 1 for i, tok in enumerate(tokens)}
    interior: set[int] = set()
    controls = [("stay",)]
    branches = [((OutcomeBranch(1.0, TERMINAL, 0.0),),)]
    for tok in tokens:
        exp = expansions.get(tok)
        if exp is None:
            exp = _checked_expand(gen, tok)
            closed = all(
                gen.is_terminal(nxt) or nxt in index for _, outs in exp for _, nxt, _ in outs
            )
        else:
            closed = True
        controls.append(tuple(c for c, _ in exp))
        if closed:
            interior.add(index[tok])
            branches.append(
                tuple(
                    tuple(
                        OutcomeBranch(
                            float(p), TERMINAL if gen.is_terminal(nxt) else index[nxt], float(c)
                        )
                        for p, nxt, c in outs
                    )
                    for _, outs in exp
                )
            )
        else:
            branches.append(tuple((OutcomeBranch(1.0, TERMINAL, 0.0),) for _ in exp))
    labels = (gen.terminal_label, *(gen.label(tok) for tok in tokens))
    model = SspModel(labels, tuple(controls), tuple(branches), gen.name, frozenset(interior))
    ensure_valid(model)
    return model, frozenset(interior)


def as_values(model: SspModel, values: Mapping[str, float] | Sequence[float] | np.ndarray) -> np.ndarray:
    """Coerce a label mapping or sequence into a value array for ``model``."""
    if isinstance(values, Mapping):
        J = np.zeros(model.n_states)
        for k, v in values.items():
            J[model.index(k)] = float(v)
        return J
    J = np.asarray(values, dtype=float)
    if J.shape != (model.n_states,):
        raise ParameterError(f"value function has shape {J.shape}, expected ({model.n_states},)")
    return J


def values_dict(model: SspModel, J: np.ndarray) -> dict[str, float]:
    return {s: float(J[i]) for i, s in enumerate(model.states)}


def describe(model: SspModel) -> dict[str, Any]:
    return {
        "name": model.name,
        "n_states": model.n_states,
        "n_pairs": model.arrays.n_pairs,
        "max_cost": model.max_cost,
    }
