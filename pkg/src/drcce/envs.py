"""Constructed test environments and test-time perturbations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .game import SIMPLEX_TOL, GameError, LinearMarkovGame, tabular_embedding, validate

SIM_STATES = ("s0", "s1", "s2", "sf", "sn")


def make_sim_game(rho: float = 0.0, r_n: float = 0.45) -> LinearMarkovGame:
    """Two-player, five-state game with a fail state reachable from s1 and s2.

    ``rho`` is the probability that factors 1 and 2 send s1/s2 to the fail
    state at step 2. Binary actions, H = 3, d = 4, starting in s0.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    S0, S1, S2, SF, SN = range(5)
    phi = np.zeros((5, 4, 4))
    for a1 in (0, 1):
        for a2 in (0, 1):
            m = a1 + a2
            phi[S0, 2 * a1 + a2] = (0.1 * m, 0.1 * m, 0.1, 0.9 - 0.2 * m)
    phi[S1, :, 0] = 1.0
    phi[S2, :, 1] = 1.0
    phi[SF, :, 2] = 1.0
    phi[SN, :, 3] = 1.0

    step1 = np.zeros((4, 5))
    step1[0, S1] = step1[1, S2] = step1[2, SF] = step1[3, SN] = 1.0
    step2 = step1.copy()
    step2[0, S1], step2[0, SF] = 1.0 - rho, rho
    step2[1, S2], step2[1, SF] = 1.0 - rho, rho
    # step-3 transitions are never used (the episode ends); reuse step 1
    mu = np.stack([step1, step2, step1])

    per_state = np.array([[0.0, 1.0, 0.0, 0.0, r_n], [0.0, 0.0, 1.0, 0.0, r_n]])
    rewards = np.broadcast_to(per_state[:, None, :, None], (2, 3, 5, 4))
    return LinearMarkovGame((2, 2), 3, phi, mu, rewards, initial_state=S0, fail_state=SF, state_names=SIM_STATES)


HARDNESS_STATES = ("s_good", "s_bad", "s_good1", "s_good2")


def make_hardness_pair(p: float = 0.8, q: float = 0.2, sigma: float = 0.1):
    """Two games that agree everywhere except the step-2 kernel at s_bad.

    s_bad is never reached under the nominal kernel; only the worst-case
    kernel moves mass there. Returns ``(game_theta1, game_theta2, meta)``.
    """
    if not (0 < q < 0.5 < p < 1):
        raise ValueError(f"need 0 < q < 1/2 < p < 1, got p={p}, q={q}")
    if not 0 < sigma < q:
        raise ValueError(f"need 0 < sigma < q, got sigma={sigma}")
    G, B, G1, G2 = range(4)
    A = 4  # a11, a12, a21, a22
    H = 3

    def kernels(theta):
        P = np.zeros((H, 4, A, 4))
        for h in range(H):
            for s in range(4):
                P[h, s, :, s] = 1.0
        P[1, G, :, G] = 0.0
        P[1, G, :, G1] = P[1, G, :, G2] = 0.5
        P[1, B, :, B] = 0.0
        own, other = (0, 3) if theta == 1 else (3, 0)
        to_g1 = np.full(A, 0.5)
        to_g1[own], to_g1[other] = p, q
        P[1, B, :, G1] = to_g1
        P[1, B, :, G2] = 1.0 - to_g1
        return P

    R = np.zeros((2, H, 4, A))
    # every "good" state pays 1 before the last step, so s_bad stays the
    # unique minimizer of the step-2 value and absorbs the worst-case mass
    R[:, :2, [G, G1, G2], :] = 1.0
    R[0, 2, G1, :] = 1.0
    R[1, 2, G2, :] = 1.0

    games = tuple(
        tabular_embedding(kernels(t), R, (2, 2), initial_state=G, state_names=HARDNESS_STATES) for t in (1, 2)
    )
    meta = dict(p=p, q=q, sigma=sigma, floor=sigma * min(2 * p - 1, 1 - 2 * q), s_bad=B, s_good=G)
    return games[0], games[1], meta


def make_learnability_mdp() -> LinearMarkovGame:
    """Single-player, three-state MDP whose bonus sum grows linearly in K.

    Action a1 at s0 has features (1/2, 1/2) and is optimal, so an optimal
    learner keeps sampling the same degenerate direction.
    """
    phi = np.zeros((3, 2, 2))
    phi[0, 0] = (0.5, 0.5)
    phi[0, 1] = (1.0, 0.0)
    phi[1, :] = (1.0, 0.0)
    phi[2, :] = (1.0, 0.0)
    factors = np.array([[0.0, 1 / 2, 1 / 2], [0.0, 1 / 3, 2 / 3]])
    mu = np.stack([factors, factors])
    rewards = np.zeros((1, 2, 3, 2))
    rewards[0, :, 2, :] = 1.0
    return LinearMarkovGame((2,), 2, phi, mu, rewards, initial_state=0, state_names=("s0", "s1", "s2"))


@dataclass(frozen=True)
class PerturbationSpec:
    """Shift ``rho`` of the mass of selected factor rows onto ``target``.

    ``target`` defaults to the game's fail state. ``mu`` replaces the factor
    measures outright when given (general reweighting).
    """

    rho: float = 0.0
    steps: tuple = ()
    factors: tuple = ()
    target: Optional[int] = None
    mu: Optional[np.ndarray] = None


def sim_perturbation(rho: float) -> PerturbationSpec:
    """The test-time shift of the simulation game: factors 1-2 at step 2."""
    return PerturbationSpec(rho=rho, steps=(1,), factors=(0, 1))


def tv_distance(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def perturb(game: LinearMarkovGame, spec: PerturbationSpec) -> LinearMarkovGame:
    if spec.mu is not None:
        mu = np.asarray(spec.mu, dtype=float)
        if mu.shape != game.mu.shape:
            raise ValueError(f"replacement mu must have shape {game.mu.shape}")
        if (mu < 0).any() or (np.abs(mu.sum(axis=2) - 1) > SIMPLEX_TOL).any():
            raise ValueError("replacement factor rows must be distributions")
        return game.replace(mu=mu)
    if not 0.0 <= spec.rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {spec.rho}")
    target = game.fail_state if spec.target is None else spec.target
    if target is None:
        raise ValueError("perturbation needs a target state (game has no fail state)")
    if not 0 <= target < game.n_states:
        raise ValueError(f"target state {target} out of range")
    mu = game.mu.copy()
    for h in spec.steps:
        for j in spec.factors:
            row = (1.0 - spec.rho) * mu[h, j]
            row[target] += spec.rho
            if tv_distance(row, game.mu[h, j]) > spec.rho + 1e-12:
                raise ValueError(f"perturbed factor ({h}, {j}) exceeds TV radius {spec.rho}")
            mu[h, j] = row
    out = game.replace(mu=mu)
    if validate(out):
        raise ValueError("perturbation produced an invalid game")
    return out


ENVIRONMENTS = {
    "sim": make_sim_game,
    "hardness": lambda theta=1, **kw: make_hardness_pair(**kw)[int(theta) - 1],
    "learnability": make_learnability_mdp,
}


def make_env(name: str, **params) -> LinearMarkovGame:
    try:
        factory = ENVIRONMENTS[name]
    except KeyError:
        raise GameError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return factory(**params)
