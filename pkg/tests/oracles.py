"""Brute-force reference computations used only by the tests.

Nothing here calls into sspkit's graph or solver code.  Reachability is a
boolean transitive closure, costs come from a recurrent-class analysis
plus a dense linear solve, and optimal values are minima over every
stationary policy.
"""

import itertools

import numpy as np


def chain(model, choice):
    """Dense (P, c) for the stationary policy given as a tuple of control indices."""
    n = model.n_states
    P = np.zeros((n, n))
    c = np.zeros(n)
    positive = np.zeros((n, n), bool)  # a positive-cost branch x -> y exists
    for x in range(n):
        for b in model.branches[x][choice[x]]:
            P[x, b.next] += b.probability
            c[x] += b.probability * b.cost
            if b.cost > 0:
                positive[x, b.next] = True
    return P, c, positive


def closure(adj):
    """Reflexive-transitive closure of a boolean adjacency matrix (Warshall)."""
    R = adj.copy() | np.eye(len(adj), dtype=bool)
    for k in range(len(adj)):
        R |= R[:, k : k + 1] & R[k : k + 1, :]
    return R


def policy_oracle(model, choice):
    """Exact (cost, steps, proper) for one stationary policy.

    A state is recurrent iff every state it reaches reaches it back.  The
    expected number of steps is finite iff no recurrent class other than
    {t} is reachable.  The cost is infinite iff a reachable recurrent class
    contains a positive-cost transition.
    """
    n = model.n_states
    P, c, positive = chain(model, choice)
    R = closure(P > 0)
    recurrent = np.array([all(R[y, x] for y in range(n) if R[x, y]) for x in range(n)])
    bad_class = np.zeros(n, bool)  # recurrent and not t
    costly_class = np.zeros(n, bool)  # recurrent with a paid transition inside
    for x in range(n):
        if recurrent[x] and x != 0:
            bad_class[x] = True
            members = R[x] & R[:, x]
            costly_class[x] = bool((positive[members][:, members]).any()) or (c[x] > 0)
    steps_inf = np.array([bool((R[x] & bad_class).any()) for x in range(n)])
    cost_inf = np.array([bool((R[x] & costly_class).any()) for x in range(n)])

    steps = np.full(n, np.inf)
    live = [x for x in range(n) if not steps_inf[x] and x != 0]
    steps[0] = 0.0
    if live:
        A = np.eye(len(live)) - P[np.ix_(live, live)]
        steps[live] = np.linalg.solve(A, np.ones(len(live)))

    # Zero-cost recurrent classes contribute nothing; solve the rest.
    cost = np.full(n, np.inf)
    zero = [x for x in range(n) if x == 0 or (recurrent[x] and not costly_class[x])]
    cost[zero] = 0.0
    rest = [x for x in range(n) if not cost_inf[x] and x not in zero]
    if rest:
        A = np.eye(len(rest)) - P[np.ix_(rest, rest)]
        cost[rest] = np.linalg.solve(A, c[rest])
    proper = ~steps_inf & ~cost_inf
    return cost, steps, proper


def policies(model):
    return itertools.product(*(range(len(cs)) for cs in model.controls))


def optimal_values(model):
    """(J*, J_hat) as minima over stationary policies; J_hat only over policies proper at x."""
    n = model.n_states
    j_star = np.full(n, np.inf)
    j_hat = np.full(n, np.inf)
    for choice in policies(model):
        cost, _, proper = policy_oracle(model, choice)
        j_star = np.minimum(j_star, cost)
        j_hat = np.minimum(j_hat, np.where(proper, cost, np.inf))
    return j_star, j_hat


def reach_by_closure(model, x0, choice=None):
    n = model.n_states
    adj = np.zeros((n, n), bool)
    for x in range(n):
        ctrls = range(len(model.controls[x])) if choice is None else [choice[x]]
        for u in ctrls:
            for b in model.branches[x][u]:
                adj[x, b.next] = True
    return frozenset(np.flatnonzero(closure(adj)[x0]).tolist())
