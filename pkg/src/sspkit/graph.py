"""Graph computations that decide finiteness of values on finite models.

Nonnegative-cost value iteration never oscillates, but at states with
infinite optimal cost it can creep upward linearly (a self-loop of cost
``delta`` adds ``delta`` per sweep), far too slowly for a numeric threshold
to notice.  The sets computed here identify those states exactly.

* ``zero_cost_trap``: the largest set in which one can stay forever using
  controls whose every branch is free and stays inside the set.
* ``almost_sure_reach``: states from which some stationary policy reaches a
  target set with probability one.

For a finite model with finite control sets, the optimal cost is finite
exactly on ``almost_sure_reach(zero_cost_trap)``, and the optimum over
policies that terminate with probability one (equivalently, with a finite
expected number of steps) is finite exactly on ``almost_sure_reach({t})``.
"""

from __future__ import annotations

import numpy as np

from .model import TERMINAL, SspModel


def _per_pair_all(model: SspModel, flags: np.ndarray) -> np.ndarray:
    a = model.arrays
    bad = np.bincount(a.br_pair, weights=(~flags).astype(float), minlength=a.n_pairs)
    return bad == 0


def _per_pair_any(model: SspModel, flags: np.ndarray) -> np.ndarray:
    a = model.arrays
    hits = np.bincount(a.br_pair, weights=flags.astype(float), minlength=a.n_pairs)
    return hits > 0


def _per_state_any(model: SspModel, pair_flags: np.ndarray) -> np.ndarray:
    a = model.arrays
    counts = np.bincount(a.pair_state, weights=pair_flags.astype(float), minlength=model.n_states)
    return counts > 0


def zero_cost_trap(model: SspModel) -> np.ndarray:
    a = model.arrays
    free_pair = np.bincount(a.br_pair, weights=(a.br_cost > 0).astype(float), minlength=a.n_pairs) == 0
    inside = np.ones(model.n_states, dtype=bool)
    while True:
        ok = free_pair & _per_pair_all(model, inside[a.br_next])
        new = _per_state_any(model, ok)
        new[TERMINAL] = True
        if np.array_equal(new, inside):
            return inside
        inside = new


def almost_sure_reach(model: SspModel, target: np.ndarray) -> np.ndarray:
    a = model.arrays
    target = np.asarray(target, dtype=bool)
    region = np.ones(model.n_states, dtype=bool)
    while True:
        stays = _per_pair_all(model, region[a.br_next])
        reach = target & region
        while True:
            step = stays & _per_pair_any(model, reach[a.br_next])
            grown = reach | (_per_state_any(model, step) & region)
            if np.array_equal(grown, reach):
                break
            reach = grown
        if np.array_equal(reach, region):
            return region
        region = reach


def finite_cost_states(model: SspModel) -> np.ndarray:
    """Boolean mask of states with finite optimal cost."""
    return almost_sure_reach(model, zero_cost_trap(model))


def certain_termination_states(model: SspModel) -> np.ndarray:
    """Boolean mask of states from which some policy terminates with probability one."""
    target = np.zeros(model.n_states, dtype=bool)
    target[TERMINAL] = True
    return almost_sure_reach(model, target)
