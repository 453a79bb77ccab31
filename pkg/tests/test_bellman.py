import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import corpus_model
from oracles import policy_oracle
from sspkit.bellman import (
    ViOptions,
    apply_T,
    apply_T_mu,
    bellman_backup,
    evaluate_policy,
    evaluate_policy_linear,
    greedy,
    residual,
    value_iteration,
)
from sspkit.errors import InfeasiblePolicyError, NonConvergenceError, ParameterError
from sspkit.fixtures import countdown_chain, cycle_fixture, example1_chain, homogeneous
from sspkit.model import TERMINAL, StationaryPolicy, all_stationary_policies
from sspkit.perturbation import perturb


@pytest.fixture
def cycle():
    return cycle_fixture()[0]


def pol(model, **labels):
    return StationaryPolicy.from_labels(model, labels)


def test_backup_examples(cycle):
    assert bellman_backup(cycle, [0, 0], 1) == 0.0
    assert bellman_backup(cycle, [0, 5], 1) == 1.0
    assert bellman_backup(cycle, [0, 5], TERMINAL) == 0.0


def test_apply_T_on_cycle(cycle):
    np.testing.assert_array_equal(apply_T(cycle, [0, 0]), [0, 0])
    np.testing.assert_array_equal(apply_T(cycle, [0, np.inf]), [0, 1])


def test_homogeneous_functions_are_fixed_on_interior():
    model, interior, _ = example1_chain(0.5, 1.0, 30)
    inner = sorted(interior)
    for gamma in (0.5, 1.0, 2.0):
        J = homogeneous(model, gamma)
        np.testing.assert_array_equal(apply_T(model, J)[inner], J[inner])
        assert residual(model, J, interior) == 0.0


def test_apply_T_mu_examples(cycle):
    a, b = pol(cycle, s1="a"), pol(cycle, s1="b")
    assert apply_T_mu(cycle, b, [0, 0])[1] == 0.0
    assert apply_T_mu(cycle, a, [0, 0])[1] == 1.0
    assert apply_T_mu(cycle, a, [0, np.inf])[1] == 1.0
    assert apply_T_mu(cycle, b, [0, np.inf])[1] == np.inf
    with pytest.raises(InfeasiblePolicyError, match="s1"):
        apply_T_mu(cycle, StationaryPolicy((0, 7)), [0, 0])


def test_vi_cycle_from_zero_and_from_above(cycle):
    J, trace = value_iteration(cycle, [0, 0])
    assert J[1] == 0.0 and trace.sweeps == 1
    J, trace = value_iteration(cycle, [0, 5])
    assert J[1] == 1.0
    # first sweep lands on 1, second confirms it
    assert [r.change for r in trace.records] == [4.0, 0.0]


def test_vi_perturbed_cycle_ramp(cycle):
    J, trace = value_iteration(perturb(cycle, 0.1), [0, 0])
    assert J[1] == pytest.approx(1.1, abs=1e-12)
    assert trace.monotone
    # ramp 0.1, 0.2, ..., 1.1 takes 11 sweeps, plus one to confirm
    assert trace.sweeps == 12
    assert all(r.change == pytest.approx(0.1) for r in trace.records[:10])


def test_vi_rejects_bad_start(cycle):
    with pytest.raises(ParameterError):
        value_iteration(cycle, [1, 0])
    with pytest.raises(ParameterError):
        value_iteration(cycle, [0, -1])
    with pytest.raises(ParameterError):
        ViOptions(tol_abs=0)
    with pytest.raises(ParameterError):
        ViOptions(max_sweeps=0)


def test_vi_non_convergence_carries_trace(cycle):
    with pytest.raises(NonConvergenceError) as exc:
        value_iteration(perturb(cycle, 0.1), [0, 0], ViOptions(max_sweeps=3))
    assert exc.value.trace.sweeps == 3


def test_divergence_threshold_flags_infinity():
    model, _ = countdown_chain(10)
    J, trace = value_iteration(model, model.zeros(), ViOptions(divergence_threshold=5.5))
    np.testing.assert_array_equal(J, [0, 1, 2, 3, 4, 5] + [np.inf] * 5)
    assert trace.records[-1].infinite == frozenset(range(6, 11))


def test_structurally_infinite_states():
    # s2 pays 1 forever; its cost grows linearly and is caught structurally
    from sspkit.model import build_model

    model = build_model("loop", {"t": None, "s1": {"a": [(1.0, "t", 1.0)]}, "s2": {"a": [(1.0, "s2", 1.0)]}})
    J, trace = value_iteration(model, model.zeros())
    np.testing.assert_array_equal(J, [0, 1, np.inf])
    assert trace.sweeps <= 3


def test_trace_csv(cycle):
    _, trace = value_iteration(cycle, [0, 5])
    assert trace.to_csv().splitlines() == ["sweep,residual,n_infinite", "1,4.0,0", "2,0.0,0"]


def test_greedy_examples(cycle):
    assert greedy(cycle, [0, 0]).labels(cycle)["s1"] == "b"
    assert greedy(cycle, [0, 1]).labels(cycle)["s1"] == "a"  # tie goes to a
    pm = perturb(cycle, 0.1)
    assert greedy(pm, [0, 1.1]).labels(cycle)["s1"] == "a"


def test_evaluate_examples(cycle):
    assert evaluate_policy(cycle, pol(cycle, s1="a"))[1] == 1.0
    assert evaluate_policy(cycle, pol(cycle, s1="b"))[1] == 0.0
    model, _ = countdown_chain(3)
    np.testing.assert_array_equal(evaluate_policy(model, StationaryPolicy((0,) * 4)), [0, 1, 2, 3])


def test_residual_examples(cycle):
    assert residual(cycle, [0, 0.5]) == 0.0
    assert residual(cycle, [0, 1.5]) == 0.5
    assert residual(cycle, [0, np.inf]) == np.inf
    assert residual(cycle, [0, np.inf], domain=[TERMINAL]) == 0.0


def test_policy_evaluation_matches_oracle_and_linear_solve(corpus):
    for model in corpus[:40]:
        for mu in all_stationary_policies(model):
            J = evaluate_policy(model, mu)
            ref, _, _ = policy_oracle(model, mu.choice)
            assert np.array_equal(np.isinf(J), np.isinf(ref))
            np.testing.assert_allclose(J[np.isfinite(J)], ref[np.isfinite(ref)], atol=1e-9)
            lin, mask = evaluate_policy_linear(model, mu)
            np.testing.assert_allclose(lin[mask], J[mask], atol=1e-9)


def test_j_star_matches_brute_force(corpus, corpus_truth):
    for model, (j_star, _) in zip(corpus, corpus_truth):
        J, trace = value_iteration(model, model.zeros())
        assert trace.monotone
        assert np.array_equal(np.isinf(J), np.isinf(j_star))
        np.testing.assert_allclose(J[np.isfinite(J)], j_star[np.isfinite(j_star)], atol=1e-9)
        assert residual(model, J) <= 1e-9


def test_greedy_from_j_star_is_optimal(corpus):
    for model in corpus:
        J, _ = value_iteration(model, model.zeros())
        J_mu = evaluate_policy(model, greedy(model, J))
        assert np.array_equal(np.isinf(J_mu), np.isinf(J))
        np.testing.assert_allclose(J_mu[np.isfinite(J)], J[np.isfinite(J)], atol=1e-9)


def test_vi_from_above_j_hat_returns_j_hat(corpus, corpus_truth):
    # any finite J0 >= J_hat on the effective domain is in the regular class here
    rng = np.random.default_rng(5)
    for model, (_, j_hat) in zip(corpus, corpus_truth):
        J0 = j_hat + rng.uniform(0, 5, model.n_states)
        J0[TERMINAL] = 0
        J, _ = value_iteration(model, J0)
        assert np.array_equal(np.isinf(J), np.isinf(j_hat))
        np.testing.assert_allclose(J[np.isfinite(J)], j_hat[np.isfinite(j_hat)], atol=1e-8)


def _random_values(rng, n, p_inf=0.15):
    J = rng.uniform(0, 4, n)
    J[rng.random(n) < p_inf] = np.inf
    J[TERMINAL] = 0
    return J


@given(st.integers(0, 99), st.integers(0, 2**32 - 1))
def test_operators_are_monotone(seed, draw):
    model = corpus_model(seed)
    rng = np.random.default_rng(draw)
    J = _random_values(rng, model.n_states)
    Jp = J + _random_values(rng, model.n_states)
    TJ, TJp = apply_T(model, J), apply_T(model, Jp)
    assert np.all(TJ <= TJp)
    assert TJ[TERMINAL] == 0 and TJp[TERMINAL] == 0
    mu = StationaryPolicy(tuple(int(rng.integers(len(c))) for c in model.controls))
    assert np.all(apply_T_mu(model, mu, J) <= apply_T_mu(model, mu, Jp))
    assert np.all(TJ <= apply_T_mu(model, mu, J))


@given(st.integers(0, 99))
def test_backup_matches_vectorised_operator(seed):
    model = corpus_model(seed)
    J = _random_values(np.random.default_rng(seed), model.n_states)
    TJ = apply_T(model, J)
    assert [bellman_backup(model, J, x) for x in range(model.n_states)] == pytest.approx(TJ.tolist())
