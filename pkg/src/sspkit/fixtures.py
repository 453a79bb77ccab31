"""Small instances with known answers, plus a random instance generator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .model import CountableGenerator, SspModel, build_model, ensure_valid, truncate


@dataclass
class FixtureCertificate:
    """Ground truth for a fixture, keyed by state label."""

    j_star: dict[str, float]
    j_hat: dict[str, float]
    proper: dict[str, dict[str, bool]] = field(default_factory=dict)
    note: str = ""
    extra: dict = field(default_factory=dict)


def cycle_fixture() -> tuple[SspModel, FixtureCertificate]:
    """One state with a paid exit (``a``) and a free self-loop (``b``)."""
    model = build_model(
        "cycle",
        {
            "t": None,
            "s1": {"a": [(1.0, "t", 1.0)], "b": [(1.0, "s1", 0.0)]},
        },
    )
    cert = FixtureCertificate(
        j_star={"t": 0.0, "s1": 0.0},
        j_hat={"t": 0.0, "s1": 1.0},
        proper={"a": {"s1": True}, "b": {"s1": False}},
        note="every J(s1) in [0, 1] solves Bellman's equation",
        extra={"fixed_point_interval": (0.0, 1.0)},
    )
    return ensure_valid(model), cert


def _token_label(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def example1_generator(alpha: float, x0: float = 1.0) -> CountableGenerator:
    """Single-policy chain on the reals: ``x -> x/alpha`` w.p. ``alpha``, else stop."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if x0 == 0:
        raise ParameterError("x0 must be nonzero")

    def expand(x):
        return [("w", [(alpha, x / alpha, 0.0), (1.0 - alpha, 0.0, 0.0)])]

    return CountableGenerator(
        roots=(float(x0),),
        expand=expand,
        is_terminal=lambda x: x == 0,
        label=_token_label,
        terminal_label="0",
        name=f"example1(alpha={alpha!r}, x0={x0!r})",
    )


def example1_chain(
    alpha: float, x0: float, depth: int
) -> tuple[SspModel, frozenset[int], FixtureCertificate]:
    """Truncation of the zero-cost chain on which every ``gamma*|x|`` is a fixed point."""
    if depth < 2:
        raise ParameterError("depth must be >= 2")
    model, interior = truncate(example1_generator(alpha, x0), depth)
    zeros = {s: 0.0 for s in model.states}
    cert = FixtureCertificate(
        j_star=dict(zeros),
        j_hat=dict(zeros),
        proper={"w": {s: True for s in model.states}},
        note="gamma*|x| solves Bellman's equation on the interior for every gamma > 0; "
        "E{gamma*|x_k|} = gamma*|x0| for every k",
        extra={"alpha": alpha, "x0": x0, "depth": depth},
    )
    return model, interior, cert


def homogeneous(model: SspModel, gamma: float) -> np.ndarray:
    """``gamma * |x|`` on an Example-1 style model whose labels are the numbers x."""
    return np.array([gamma * abs(float(s)) for s in model.states])


def countdown_generator(n: int) -> CountableGenerator:
    return CountableGenerator(
        roots=(n,),
        expand=lambda x: [("down", [(1.0, x - 1, 1.0)])],
        is_terminal=lambda x: x == 0,
        terminal_label="0",
        name=f"countdown({n})",
    )


def countdown_chain(n: int) -> tuple[SspModel, FixtureCertificate]:
    """States ``0..n`` with ``t = 0``; the only control steps down at cost 1."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    table = {"0": None}
    for x in range(1, n + 1):
        table[str(x)] = {"down": [(1.0, str(x - 1), 1.0)]}
    model = ensure_valid(build_model(f"countdown({n})", table))
    vals = {str(x): float(x) for x in range(n + 1)}
    cert = FixtureCertificate(
        j_star=dict(vals),
        j_hat=dict(vals),
        proper={"down": {str(x): True for x in range(n + 1)}},
        note="expected steps equal x; uniform bound over the chain is n",
        extra={"expected_steps": dict(vals), "uniform_bound": float(n)},
    )
    return model, cert


def stopping_grid(m: int) -> tuple[SspModel, FixtureCertificate]:
    """Controls ``u = i/m``; ``u > 0`` stops at cost ``u``, ``u = 0`` stays for free."""
    if m < 1:
        raise ParameterError("m must be >= 1")
    controls = {"0": [(1.0, "s1", 0.0)]}
    for i in range(1, m + 1):
        controls[f"{i}/{m}"] = [(1.0, "t", i / m)]
    model = ensure_valid(build_model(f"stopping_grid({m})", {"t": None, "s1": controls}))
    cert = FixtureCertificate(
        j_star={"t": 0.0, "s1": 0.0},
        j_hat={"t": 0.0, "s1": 1 / m},
        proper={"0": {"s1": False}, **{f"{i}/{m}": {"s1": True} for i in range(1, m + 1)}},
        note="staying is optimal but improper; the best proper control is u = 1/m",
        extra={"fixed_point_interval": (0.0, 1 / m)},
    )
    return model, cert


def zero_hop_chain() -> tuple[SspModel, FixtureCertificate]:
    """``s2 -> s1`` at cost 1, then ``s1 -> t`` for free; ``s1`` has zero optimal cost."""
    model = build_model(
        "zero_hop",
        {
            "t": None,
            "s1": {"go": [(1.0, "t", 0.0)]},
            "s2": {"go": [(1.0, "s1", 1.0)]},
        },
    )
    cert = FixtureCertificate(
        j_star={"t": 0.0, "s1": 0.0, "s2": 1.0},
        j_hat={"t": 0.0, "s1": 0.0, "s2": 1.0},
        proper={"go": {"t": True, "s1": True, "s2": True}},
    )
    return ensure_valid(model), cert


def _composition(rng: np.random.Generator, parts: int, total: int = 16) -> list[float]:
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False))
    sizes = np.diff(np.concatenate(([0], cuts, [total])))
    return [s / total for s in sizes]


def random_ssp(
    seed: int,
    n_states: int = 5,
    max_controls: int = 2,
    max_branches: int = 3,
    p_edge_to_t: float = 0.5,
    cost_max: float = 2.0,
    p_zero_cost: float = 0.3,
) -> SspModel:
    """Random model with ``n_states`` non-terminal states.

    Probabilities are multiples of 1/16 and costs multiples of 1/16, so
    they are exact in binary floating point.  Only a random subset of the
    states (each with probability ``p_edge_to_t``) can jump to ``t``, so
    both proper and improper policies show up.
    """
    if min(n_states, max_controls, max_branches) < 1:
        raise ParameterError("sizes must be >= 1")
    if not (0 <= p_edge_to_t <= 1 and 0 <= p_zero_cost <= 1) or cost_max < 0:
        raise ParameterError("bad probability or cost parameter")
    rng = np.random.default_rng(seed)
    labels = ["t"] + [f"s{i}" for i in range(1, n_states + 1)]
    exits = rng.random(n_states) < p_edge_to_t
    table: dict = {"t": None}
    for i in range(1, n_states + 1):
        ctrls = {}
        for u in range(int(rng.integers(1, max_controls + 1))):
            pool = list(range(1, n_states + 1))
            if exits[i - 1] and rng.random() < 0.5:
                pool.append(0)
            nb = int(min(rng.integers(1, max_branches + 1), len(pool), 16))
            targets = rng.choice(pool, size=nb, replace=False)
            probs = _composition(rng, nb)
            outs = []
            for y, p in zip(targets, probs):
                if rng.random() < p_zero_cost:
                    cost = 0.0
                else:
                    cost = int(rng.integers(0, int(cost_max * 16) + 1)) / 16
                outs.append((p, labels[int(y)], cost))
            ctrls[f"u{u}"] = outs
        table[labels[i]] = ctrls
    return ensure_valid(build_model(f"random(seed={seed})", table))


FIXTURES = {
    "cycle": cycle_fixture,
    "countdown": countdown_chain,
    "stopping": stopping_grid,
    "zero_hop": zero_hop_chain,
}
