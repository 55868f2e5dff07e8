"""Optimistic least-squares value iteration for robust CCE learning.

Each episode runs a backward pass that builds optimistic Q tables from
ridge regression on past transitions, extracts a per-state correlated
policy with :func:`~drcce.cce.find_cce`, then plays one episode and adds
the visited features to the Gram matrices.

``mode="robust"`` uses per-coordinate robust weights and the d-term bonus;
``mode="baseline"`` is the non-robust comparator (plain ridge weights,
elliptical bonus, value cap H).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cce import CCESolverError, find_cce
from .game import LinearMarkovGame, draw, validate
from .records import RunRecord

MODES = ("robust", "baseline")


def value_cap(sigma: float, H: int) -> float:
    """``min{H, 1/sigma}``, with sigma = 0 meaning the cap is H."""
    return float(H) if sigma <= 0 else min(float(H), 1.0 / sigma)


def beta_schedule(sigma, n, d, H, K, delta, c_beta) -> float:
    """``min{H, 1/sigma} * sqrt(c_beta * n * d * log(n d H K / delta))``."""
    return value_cap(sigma, H) * math.sqrt(c_beta * n * d * math.log(n * d * H * K / delta))


@dataclass
class LearnerConfig:
    K: int
    sigma: tuple
    lam: float = 1.0
    c_beta: float = 0.003
    delta: float = 0.1
    eps: Optional[float] = None
    mode: str = "robust"
    beta: Optional[tuple] = None

    def __post_init__(self):
        self.sigma = tuple(float(s) for s in np.atleast_1d(self.sigma))
        if self.beta is not None:
            self.beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if any(not 0 <= s <= 1 for s in self.sigma):
            raise ValueError("every sigma must lie in [0, 1]")

    def cover_width(self, H: int) -> float:
        return self.eps if self.eps is not None else 1.0 / (self.K * H)

    def learner_sigma(self, n: int) -> np.ndarray:
        """Uncertainty levels used inside the learner (zero for the baseline)."""
        sig = np.broadcast_to(np.asarray(self.sigma), (n,)).astype(float)
        return np.zeros(n) if self.mode == "baseline" else sig

    def betas(self, n: int, d: int, H: int) -> np.ndarray:
        if self.beta is not None:
            return np.broadcast_to(np.asarray(self.beta), (n,)).astype(float)
        sig = self.learner_sigma(n)
        return np.array([beta_schedule(s, n, d, H, self.K, self.delta, self.c_beta) for s in sig])

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sigma"] = list(self.sigma)
        out["beta"] = None if self.beta is None else list(self.beta)
        return out


class GramState:
    """Per-step regularized Gram matrices plus the transitions behind them.

    Besides the raw lists, ``targets[h]`` accumulates features by successor
    state (d x S), so ``sum_tau phi_tau f(s'_tau) == targets[h] @ f``.
    """

    def __init__(self, H: int, d: int, S: int, lam: float = 1.0):
        self.lam = lam
        self.gram = np.tile(lam * np.eye(d), (H, 1, 1))
        self.targets = np.zeros((H, d, S))
        self.features = [[] for _ in range(H)]
        self.successors = [[] for _ in range(H)]
        self._inv = [None] * H

    @property
    def horizon(self) -> int:
        return self.gram.shape[0]

    def update(self, h: int, phi: np.ndarray, next_state: int) -> None:
        self.gram[h] += np.outer(phi, phi)
        self.targets[h, :, next_state] += phi
        self.features[h].append(np.array(phi, dtype=float))
        self.successors[h].append(int(next_state))
        self._inv[h] = None

    def inverse(self, h: int) -> np.ndarray:
        if self._inv[h] is None:
            self._inv[h] = np.linalg.inv(self.gram[h])
        return self._inv[h]

    def observed(self, h: int) -> np.ndarray:
        """States that appeared as successors at step h."""
        return np.flatnonzero(self.targets[h].any(axis=0))

    def rebuild(self, h: int) -> np.ndarray:
        d = self.gram.shape[1]
        out = self.lam * np.eye(d)
        for phi in self.features[h]:
            out += np.outer(phi, phi)
        return out


def ridge_clipped_estimate(gram: GramState, h: int, V, alpha: float) -> np.ndarray:
    """``Lambda_h^{-1} sum_tau phi_tau min(V(s'_tau), alpha)``."""
    return gram.inverse(h) @ (gram.targets[h] @ np.minimum(np.asarray(V, float), alpha))


def robust_weight(gram: GramState, h: int, V, sigma: float, cap: float) -> np.ndarray:
    """Coordinatewise ``max_{alpha in [0, cap]} nu_j(alpha) - sigma * alpha``.

    ``nu_j`` is piecewise linear in alpha with kinks at the observed
    successor values but need not be monotone, so every breakpoint is
    evaluated. With ``sigma == 0`` the ball is a single point and the
    result is the plain ridge estimate at ``alpha = cap``.
    """
    V = np.asarray(V, dtype=float)
    if sigma == 0:
        return ridge_clipped_estimate(gram, h, V, cap)
    seen = V[gram.observed(h)]
    alphas = np.unique(np.concatenate([seen[(seen >= 0) & (seen <= cap)], [0.0, cap]]))
    clipped = np.minimum(V[:, None], alphas[None, :])  # (S, B)
    nu = gram.inverse(h) @ (gram.targets[h] @ clipped)  # (d, B)
    return (nu - sigma * alphas[None, :]).max(axis=1)


def bonus(phi_sa: np.ndarray, gram: GramState, h: int, beta: float) -> np.ndarray:
    """d-term bonus ``beta * sum_j phi_j sqrt((Lambda_h^{-1})_jj)``; accepts (..., d)."""
    return beta * (np.asarray(phi_sa) @ np.sqrt(np.diag(gram.inverse(h))))


def elliptical_bonus(phi_sa: np.ndarray, gram: GramState, h: int, beta: float) -> np.ndarray:
    """Standard ``beta * sqrt(phi^T Lambda_h^{-1} phi)``; accepts (..., d)."""
    phi_sa = np.asarray(phi_sa)
    quad = np.einsum("...i,ij,...j->...", phi_sa, gram.inverse(h), phi_sa)
    return beta * np.sqrt(np.maximum(quad, 0.0))


def q_update(game: LinearMarkovGame, gram: GramState, h: int, i: int, V_next, sigma: float, beta: float) -> np.ndarray:
    """Optimistic robust Q table of shape (S, A), clamped to ``[0, min{H, 1/sigma}]``."""
    cap = value_cap(sigma, game.horizon)
    w = robust_weight(gram, h, V_next, sigma, cap)
    q = game.rewards[i, h] + game.phi @ w + bonus(game.phi, gram, h, beta)
    return np.clip(q, 0.0, cap)


def baseline_q_update(game: LinearMarkovGame, gram: GramState, h: int, i: int, V_next, beta: float) -> np.ndarray:
    cap = float(game.horizon)
    w = gram.inverse(h) @ (gram.targets[h] @ np.asarray(V_next, float))
    q = game.rewards[i, h] + game.phi @ w + elliptical_bonus(game.phi, gram, h, beta)
    return np.clip(q, 0.0, cap)


def _backward_pass(game, gram, cfg, sigma, betas, eps):
    n, H, S = game.n_players, game.horizon, game.n_states
    shape = (n,) + game.action_counts
    caps = np.array([value_cap(s, H) for s in sigma])
    Q = np.zeros((H, n, S, game.n_joint_actions))
    V = np.zeros((H + 1, n, S))
    pi = np.zeros((H, S, game.n_joint_actions))
    for h in reversed(range(H)):
        for i in range(n):
            if cfg.mode == "robust":
                Q[h, i] = q_update(game, gram, h, i, V[h + 1, i], sigma[i], betas[i])
            else:
                Q[h, i] = baseline_q_update(game, gram, h, i, V[h + 1, i], betas[i])
        for s in range(S):
            pi[h, s] = find_cce(Q[h, :, s].reshape(shape), eps, caps)
        V[h] = np.einsum("isa,sa->is", Q[h], pi[h])
    return Q, V, pi


def train(
    game: LinearMarkovGame,
    cfg: LearnerConfig,
    rng: np.random.Generator,
    *,
    behavior: Optional[Callable[[int, int, int], int]] = None,
    snapshot_every: int = 1,
    on_episode: Optional[Callable] = None,
) -> RunRecord:
    """Run K episodes of optimistic robust CCE learning on ``game``.

    ``behavior(k, h, s)``, when given, overrides the played joint action
    (the policy is still computed and recorded). ``on_episode(k, gram, Q,
    V, pi)`` is called after every backward pass, before the Gram update.
    """
    problems = validate(game)
    if problems:
        raise ValueError(f"game fails validation: {problems[0]} (+{len(problems) - 1} more)")
    n, H, d, S, A = game.n_players, game.horizon, game.dim, game.n_states, game.n_joint_actions
    sigma = cfg.learner_sigma(n)
    betas = cfg.betas(n, d, H)
    eps = cfg.cover_width(H)
    gram = GramState(H, d, S, cfg.lam)

    snapshots, snap_idx = [], []
    states = np.zeros((cfg.K, H + 1), dtype=int)
    actions = np.zeros((cfg.K, H), dtype=int)
    rewards = np.zeros((cfg.K, H, n))
    start = time.perf_counter()
    for k in range(cfg.K):
        try:
            Q, V, pi = _backward_pass(game, gram, cfg, sigma, betas, eps)
        except CCESolverError as exc:
            raise CCESolverError(f"episode {k + 1}: {exc}", exc.player, exc.action, exc.violation) from exc
        if on_episode is not None:
            on_episode(k, gram, Q, V, pi)
        if k % snapshot_every == 0 or k == cfg.K - 1:
            snapshots.append(pi)
            snap_idx.append(k)
        s = game.initial_state
        states[k, 0] = s
        for h in range(H):
            a = draw(pi[h, s], rng) if behavior is None else int(behavior(k, h, s))
            rewards[k, h] = game.rewards[:, h, s, a]
            s_next = draw(game.kernel[h, s, a], rng)
            gram.update(h, game.phi[s, a], s_next)
            actions[k, h] = a
            states[k, h + 1] = s_next
            s = s_next
    elapsed = time.perf_counter() - start

    return RunRecord(
        config=cfg.to_dict(),
        betas=betas.tolist(),
        policy_episodes=np.array(snap_idx),
        policies=np.array(snapshots),
        states=states,
        actions=actions,
        rewards=rewards,
        final_Q=Q,
        final_V=V,
        wall_clock=elapsed,
        gram=gram,
    )


def train_baseline(game: LinearMarkovGame, cfg: LearnerConfig, rng: np.random.Generator, **kwargs) -> RunRecord:
    """Non-robust comparator: same loop with ``mode="baseline"``."""
    cfg = LearnerConfig(**{**cfg.to_dict(), "mode": "baseline"})
    return train(game, cfg, rng, **kwargs)
