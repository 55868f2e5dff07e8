"""Exact robust dynamic-programming oracles.

Policies are arrays of shape (H, S, A) over flat joint actions. Values are
returned with a trailing zero layer, i.e. ``V`` has shape (n, H + 1, S).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .game import LinearMarkovGame
from .robust import factor_duals


def _sigmas(sigma, n) -> np.ndarray:
    return np.broadcast_to(np.asarray(sigma, dtype=float), (n,)).astype(float)


def _check_policy(game: LinearMarkovGame, policy) -> np.ndarray:
    pi = np.asarray(policy, dtype=float)
    expected = (game.horizon, game.n_states, game.n_joint_actions)
    if pi.shape != expected:
        raise ValueError(f"policy must have shape {expected}, got {pi.shape}")
    return pi


def robust_backup(game: LinearMarkovGame, h: int, i: int, V_next, sigma: float) -> np.ndarray:
    """``r_{i,h}(s,a) + sum_j phi_j(s,a) inf_{TV <= sigma} E[V_next]`` for all (s, a)."""
    return game.rewards[i, h] + game.phi @ factor_duals(game.mu[h], V_next, sigma)


def robust_policy_eval(game: LinearMarkovGame, policy, sigma):
    """Robust values of a fixed joint policy; returns ``(V, Q)``."""
    pi = _check_policy(game, policy)
    n, H, S, A = game.n_players, game.horizon, game.n_states, game.n_joint_actions
    sig = _sigmas(sigma, n)
    V = np.zeros((n, H + 1, S))
    Q = np.zeros((n, H, S, A))
    for h in reversed(range(H)):
        for i in range(n):
            Q[i, h] = robust_backup(game, h, i, V[i, h + 1], sig[i])
            V[i, h] = np.einsum("sa,sa->s", pi[h], Q[i, h])
    return V, Q


def marginalize_out(game: LinearMarkovGame, policy, i: int) -> np.ndarray:
    """Opponents' joint marginal: shape (H, S, prod_{j != i} A_j)."""
    if not 0 <= i < game.n_players:
        raise ValueError(f"player {i} out of range")
    pi = _check_policy(game, policy)
    full = pi.reshape(pi.shape[:2] + game.action_counts)
    return full.sum(axis=2 + i).reshape(pi.shape[0], pi.shape[1], -1)


@dataclass(frozen=True)
class BestResponse:
    V: np.ndarray  # (H + 1, S)
    Q: np.ndarray  # (H, S, A_i)
    policy: np.ndarray  # (H, S) own action


def robust_best_response(game: LinearMarkovGame, policy, i: int, sigma_i: float) -> BestResponse:
    """Markov deviation of player i against the opponents' marginal policy.

    Ties go to the smallest own action.
    """
    marg = marginalize_out(game, policy, i)
    H, S = game.horizon, game.n_states
    counts = game.action_counts
    V = np.zeros((H + 1, S))
    Qbr = np.zeros((H, S, counts[i]))
    act = np.zeros((H, S), dtype=int)
    for h in reversed(range(H)):
        full = robust_backup(game, h, i, V[h + 1], sigma_i).reshape((S,) + counts)
        full = np.moveaxis(full, 1 + i, 1).reshape(S, counts[i], -1)
        Qbr[h] = np.einsum("sbo,so->sb", full, marg[h])
        act[h] = np.argmax(Qbr[h], axis=1)
        V[h] = Qbr[h].max(axis=1)
    return BestResponse(V, Qbr, act)


def episode_gaps(game: LinearMarkovGame, policy, sigma, s1: int | None = None) -> np.ndarray:
    """Per-player ``V^{br}_{i,1}(s1) - V^{pi}_{i,1}(s1)``."""
    s1 = game.initial_state if s1 is None else s1
    sig = _sigmas(sigma, game.n_players)
    V, _ = robust_policy_eval(game, policy, sig)
    return np.array(
        [robust_best_response(game, policy, i, sig[i]).V[0, s1] - V[i, 0, s1] for i in range(game.n_players)]
    )


@dataclass(frozen=True)
class RegretCurve:
    gaps: np.ndarray  # (K, n)
    cumulative: np.ndarray  # (K, n) per-player running sums

    @property
    def regret(self) -> np.ndarray:
        """``max_i`` of the running per-player sums (max outside the sum)."""
        return self.cumulative.max(axis=1)


def regret_curve(game: LinearMarkovGame, policies, sigma, initial_states: Sequence[int] | None = None) -> RegretCurve:
    policies = np.asarray(policies, dtype=float)
    K = policies.shape[0]
    starts = [game.initial_state] * K if initial_states is None else list(initial_states)
    gaps = np.array([episode_gaps(game, policies[k], sigma, starts[k]) for k in range(K)])
    return RegretCurve(gaps, np.cumsum(gaps, axis=0))


def attach_regret(record, game: LinearMarkovGame, sigma) -> None:
    """Fill ``record.gaps`` from its stored per-episode policies."""
    starts = record.states[record.policy_episodes, 0]
    curve = regret_curve(game, record.policies, sigma, starts)
    record.gaps = curve.gaps
    record.gap_episodes = np.asarray(record.policy_episodes)
    record.eval_sigma = list(_sigmas(sigma, game.n_players))


def evaluate_under_perturbation(
    factory: Callable[[float], LinearMarkovGame], policy, rhos: Sequence[float]
) -> list:
    """Non-robust exact value of a fixed policy on each perturbed game.

    Returns one dict per rho with per-player values and their average.
    """
    rows = []
    for rho in rhos:
        game = factory(rho)
        V, _ = robust_policy_eval(game, policy, 0.0)
        values = V[:, 0, game.initial_state]
        rows.append({"rho": float(rho), "values": values.tolist(), "average": float(values.mean())})
    return rows
