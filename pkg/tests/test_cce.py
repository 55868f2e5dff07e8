import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from drcce.cce import cce_gap, deviation_payoffs, find_cce, round_to_cover, solve_cce
from drcce.simplex import LPError, linprog_max


def random_game(rng, H=3.0):
    n = int(rng.integers(1, 4))
    counts = tuple(int(c) for c in rng.integers(1, 5, size=n))
    return rng.uniform(0, H, (n,) + counts)


def scipy_welfare(Q):
    n = Q.shape[0]
    A = int(np.prod(Q.shape[1:]))
    G = np.vstack([D - Q[i].ravel()[None] for i, D in enumerate(deviation_payoffs(Q))])
    res = linprog(
        -Q.reshape(n, A).sum(axis=0),
        A_ub=G,
        b_ub=np.zeros(len(G)),
        A_eq=np.ones((1, A)),
        b_eq=[1.0],
        bounds=[(0, None)] * A,
        method="highs",
    )
    assert res.status == 0
    return -res.fun


def test_matching_pennies_is_uniform():
    Q = np.array([[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]])
    pi = solve_cce(Q)
    np.testing.assert_allclose(pi, 0.25, atol=1e-12)
    assert cce_gap(Q, pi) <= 1e-12


def test_prisoners_dilemma_picks_defection():
    # actions: 0 = cooperate, 1 = defect
    Q = np.array([[[3, 0], [5, 1]], [[3, 5], [0, 1]]], dtype=float)
    np.testing.assert_array_equal(solve_cce(Q), [0, 0, 0, 1])


def test_deviation_payoffs_shape_and_values():
    rng = np.random.default_rng(0)
    Q = rng.uniform(size=(2, 2, 3))
    D0, D1 = deviation_payoffs(Q)
    assert D0.shape == (2, 6) and D1.shape == (3, 6)
    # deviating to b gives Q_0(b, a_2) regardless of the recommended own action
    assert D0[1, 0] == Q[0, 1, 0] and D0[1, 4] == Q[0, 1, 1]


def test_welfare_matches_scipy():
    rng = np.random.default_rng(1)
    for _ in range(150):
        Q = random_game(rng)
        pi = solve_cce(Q)
        assert cce_gap(Q, pi) <= 1e-9
        assert pi.min() >= 0 and pi.sum() == pytest.approx(1.0)
        welfare = Q.reshape(Q.shape[0], -1).sum(axis=0) @ pi
        assert welfare == pytest.approx(scipy_welfare(Q), abs=1e-8)


def test_solver_is_deterministic():
    rng = np.random.default_rng(2)
    Q = random_game(rng)
    np.testing.assert_array_equal(solve_cce(Q), solve_cce(Q.copy()))


def test_rounding_grid():
    Q = np.array([[0.04, 0.06, 0.149, 0.151]])
    R = round_to_cover(Q, 0.05)
    np.testing.assert_allclose(R, [[0.0, 0.1, 0.1, 0.2]])
    assert np.abs(R - Q).max() <= 0.05 + 1e-15


def test_rounding_respects_cap_per_player():
    Q = np.array([[[2.99]], [[2.99]]])
    R = round_to_cover(Q, 0.1, cap=[3.0, 2.5])
    assert R[0, 0, 0] == pytest.approx(3.0) and R[1, 0, 0] == pytest.approx(2.5)


def test_rejects_bad_eps_and_nonfinite():
    with pytest.raises(ValueError):
        round_to_cover(np.zeros((1, 2)), 0.0)
    with pytest.raises(ValueError):
        solve_cce(np.array([[np.nan, 1.0]]))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.01, 0.1]))
def test_find_cce_is_two_eps_equilibrium(seed, eps):
    Q = random_game(np.random.default_rng(seed))
    assert cce_gap(Q, find_cce(Q, eps)) <= 2 * eps + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.01, 0.1]))
def test_find_cce_is_stable_within_a_cell(seed, eps):
    rng = np.random.default_rng(seed)
    R = round_to_cover(random_game(rng), eps)
    # any perturbation strictly inside the rounding cell keeps the grid tuple
    Q = R + rng.uniform(-0.9 * eps, 0.9 * eps, R.shape)
    np.testing.assert_array_equal(round_to_cover(Q, eps), R)
    np.testing.assert_array_equal(find_cce(Q, eps), find_cce(R, eps))


def test_simplex_small_lp():
    # max x + y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
    A = np.array([[1.0, 2, 1, 0], [3, 1, 0, 1]])
    x = linprog_max(np.array([1.0, 1, 0, 0]), A, np.array([4.0, 6]))
    np.testing.assert_allclose(x[:2], [1.6, 1.2], atol=1e-12)


def test_simplex_infeasible():
    with pytest.raises(LPError):
        linprog_max(np.array([1.0, 1.0]), np.array([[1.0, 1.0]]), np.array([-1.0]))


def test_simplex_handles_redundant_rows():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    x = linprog_max(np.array([1.0, 0.0, 0.0]), A, np.array([1.0, 2.0, 0.5]))
    np.testing.assert_allclose(x, [1.0, 0.0, 0.5], atol=1e-12)
