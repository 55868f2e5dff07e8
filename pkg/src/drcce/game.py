"""Finite linear Markov games.

A game is stored densely:

    phi      (S, A, d)     feature of state s under flat joint action a
    mu       (H, d, S)     factor measures, one set per step
    rewards  (n, H, S, A)  per-player deterministic rewards

Joint actions are flattened in C order over the per-player action counts,
so for two players ``a = a1 * A2 + a2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

KERNEL_TOL = 1e-10
SIMPLEX_TOL = 1e-12


class GameError(ValueError):
    """Raised for malformed game definitions or out-of-range indices."""


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearMarkovGame:
    action_counts: tuple
    horizon: int
    phi: np.ndarray
    mu: np.ndarray
    rewards: np.ndarray
    initial_state: int = 0
    fail_state: Optional[int] = None
    state_names: tuple = ()
    kernel: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(a) for a in self.action_counts))
        phi = _frozen(self.phi)
        mu = _frozen(self.mu)
        rewards = _frozen(self.rewards)
        n, H = len(self.action_counts), int(self.horizon)
        A = int(np.prod(self.action_counts))
        if phi.ndim != 3 or phi.shape[1] != A:
            raise GameError(f"phi must have shape (S, {A}, d), got {phi.shape}")
        S, _, d = phi.shape
        if mu.shape != (H, d, S):
            raise GameError(f"mu must have shape {(H, d, S)}, got {mu.shape}")
        if rewards.shape != (n, H, S, A):
            raise GameError(f"rewards must have shape {(n, H, S, A)}, got {rewards.shape}")
        if not 0 <= self.initial_state < S:
            raise GameError(f"initial state {self.initial_state} out of range")
        if self.fail_state is not None and not 0 <= self.fail_state < S:
            raise GameError(f"fail state {self.fail_state} out of range")
        names = tuple(self.state_names) or tuple(f"s{k}" for k in range(S))
        if len(names) != S:
            raise GameError("state_names length does not match phi")
        object.__setattr__(self, "horizon", H)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "state_names", names)
        object.__setattr__(self, "kernel", _frozen(np.einsum("sad,hdt->hsat", phi, mu)))

    @property
    def n_players(self) -> int:
        return len(self.action_counts)

    @property
    def n_states(self) -> int:
        return self.phi.shape[0]

    @property
    def n_joint_actions(self) -> int:
        return self.phi.shape[1]

    @property
    def dim(self) -> int:
        return self.phi.shape[2]

    def joint_index(self, actions: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(actions), self.action_counts))

    def joint_actions(self, a: int) -> tuple:
        return tuple(int(x) for x in np.unravel_index(a, self.action_counts))

    def state_index(self, s) -> int:
        if isinstance(s, str):
            try:
                return self.state_names.index(s)
            except ValueError:
                raise GameError(f"unknown state {s!r}") from None
        return int(s)

    @classmethod
    def from_reward_vectors(cls, action_counts, horizon, phi, mu, eta, **kwargs):
        """Build a game whose rewards are ``r_{i,h}(s,a) = <phi(s,a), eta[i,h]>``."""
        rewards = np.einsum("sad,ihd->ihsa", np.asarray(phi, float), np.asarray(eta, float))
        return cls(action_counts, horizon, phi, mu, rewards, **kwargs)

    def replace(self, **changes) -> "LinearMarkovGame":
        fields = dict(
            action_counts=self.action_counts,
            horizon=self.horizon,
            phi=self.phi,
            mu=self.mu,
            rewards=self.rewards,
            initial_state=self.initial_state,
            fail_state=self.fail_state,
            state_names=self.state_names,
        )
        fields.update(changes)
        return LinearMarkovGame(**fields)

    # -- documents ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n_players,
            "H": self.horizon,
            "states": list(self.state_names),
            "actions": list(self.action_counts),
            "phi": self.phi.tolist(),
            "mu0": self.mu.tolist(),
            "rewards": self.rewards.tolist(),
            "fail_state": None if self.fail_state is None else self.state_names[self.fail_state],
            "initial_state": self.state_names[self.initial_state],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearMarkovGame":
        try:
            states = doc["states"]
            actions = doc["actions"]
            n, H = int(doc["n"]), int(doc["H"])
            phi, mu0, rewards = doc["phi"], doc["mu0"], doc["rewards"]
        except KeyError as exc:
            raise GameError(f"game document missing field {exc}") from None
        # "actions" may be counts or per-player label lists
        counts = [len(a) if isinstance(a, list) else int(a) for a in actions]
        if len(counts) != n:
            raise GameError(f"expected {n} action sets, got {len(counts)}")
        states = [f"s{k}" for k in range(states)] if isinstance(states, int) else list(states)

        def lookup(s):
            if s is None:
                return None
            if isinstance(s, str):
                if s not in states:
                    raise GameError(f"unknown state {s!r}")
                return states.index(s)
            return int(s)

        return cls(
            counts,
            H,
            phi,
            mu0,
            rewards,
            initial_state=lookup(doc.get("initial_state", 0)),
            fail_state=lookup(doc.get("fail_state")),
            state_names=tuple(str(s) for s in states),
        )

    @classmethod
    def load(cls, path) -> "LinearMarkovGame":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


@dataclass(frozen=True)
class Violation:
    kind: str
    location: dict
    residual: float

    def __str__(self):
        where = ", ".join(f"{k}={v}" for k, v in self.location.items())
        return f"{self.kind} at ({where}): residual {self.residual:.3e}"


def validate(game: LinearMarkovGame) -> list:
    """Check the structural assumptions of a linear Markov game.

    Returns an empty list when every invariant holds; otherwise one
    :class:`Violation` per offending entry.
    """
    out = []
    phi, mu, P = game.phi, game.mu, game.kernel
    for s, a, j in zip(*np.nonzero(phi < 0)):
        out.append(Violation("negative feature", dict(s=int(s), a=int(a), j=int(j)), float(phi[s, a, j])))
    res = phi.sum(axis=2) - 1.0
    for s, a in zip(*np.nonzero(np.abs(res) > SIMPLEX_TOL)):
        out.append(Violation("feature not on simplex", dict(s=int(s), a=int(a)), float(res[s, a])))
    for h, j, t in zip(*np.nonzero(mu < 0)):
        out.append(Violation("negative factor measure", dict(h=int(h), j=int(j), s=int(t)), float(mu[h, j, t])))
    res = mu.sum(axis=2) - 1.0
    for h, j in zip(*np.nonzero(np.abs(res) > SIMPLEX_TOL)):
        out.append(Violation("factor measure not normalized", dict(h=int(h), j=int(j)), float(res[h, j])))
    for h, s, a, t in zip(*np.nonzero(P < -KERNEL_TOL)):
        out.append(Violation("negative transition", dict(h=int(h), s=int(s), a=int(a), t=int(t)), float(P[h, s, a, t])))
    res = P.sum(axis=3) - 1.0
    for h, s, a in zip(*np.nonzero(np.abs(res) > KERNEL_TOL)):
        out.append(Violation("transition not normalized", dict(h=int(h), s=int(s), a=int(a)), float(res[h, s, a])))
    r = game.rewards
    bad = (r < 0) | (r > 1)
    for i, h, s, a in zip(*np.nonzero(bad)):
        out.append(Violation("reward outside [0,1]", dict(i=int(i), h=int(h), s=int(s), a=int(a)), float(r[i, h, s, a])))
    f = game.fail_state
    if f is not None:
        stay = P[:, f, :, f] - 1.0
        for h, a in zip(*np.nonzero(np.abs(stay) > KERNEL_TOL)):
            out.append(Violation("fail state not absorbing", dict(h=int(h), s=f, a=int(a)), float(stay[h, a])))
        for i, h, a in zip(*np.nonzero(r[:, :, f, :] != 0)):
            out.append(Violation("nonzero reward at fail state", dict(i=int(i), h=int(h), s=f, a=int(a)), float(r[i, h, f, a])))
    return out


def _check_index(game: LinearMarkovGame, h: int, s: int, a: int) -> None:
    if not 0 <= h < game.horizon:
        raise GameError(f"step {h} out of range [0, {game.horizon})")
    if not 0 <= s < game.n_states:
        raise GameError(f"state {s} out of range [0, {game.n_states})")
    if not 0 <= a < game.n_joint_actions:
        raise GameError(f"joint action {a} out of range [0, {game.n_joint_actions})")


def transition_distribution(game: LinearMarkovGame, h: int, s: int, a: int) -> np.ndarray:
    """Next-state distribution ``<phi(s,a), mu_h(.)>`` (steps are 0-based)."""
    _check_index(game, h, s, a)
    return game.kernel[h, s, a]


def draw(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of one index from a probability vector."""
    k = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
    if k >= len(p):
        # cumsum can end a few ulps below 1
        k = int(np.flatnonzero(p)[-1])
    return k


def sample_next_state(game: LinearMarkovGame, h: int, s: int, a: int, rng: np.random.Generator) -> int:
    return draw(transition_distribution(game, h, s, a), rng)


def tabular_embedding(
    kernels,
    rewards,
    action_counts: Sequence[int],
    *,
    initial_state: int = 0,
    fail_state: Optional[int] = None,
    state_names: Sequence[str] = (),
) -> LinearMarkovGame:
    """Embed a tabular game as a linear one with indicator features.

    ``kernels`` has shape (H, S, A, S) and ``rewards`` (n, H, S, A). The
    feature of (s, a) is the basis vector e_{sa}, so d = S * A and factor
    (s, a) of step h is the kernel row P_h(. | s, a).
    """
    P = np.asarray(kernels, dtype=float)
    if P.ndim != 4:
        raise GameError(f"kernels must have shape (H, S, A, S), got {P.shape}")
    H, S, A, S2 = P.shape
    if S2 != S:
        raise GameError("kernel rows must range over the state space")
    if (P < 0).any():
        h, s, a, t = map(int, np.argwhere(P < 0)[0])
        raise GameError(f"negative kernel entry at h={h}, s={s}, a={a}, s'={t}")
    res = np.abs(P.sum(axis=3) - 1.0)
    if (res > KERNEL_TOL).any():
        h, s, a = map(int, np.argwhere(res > KERNEL_TOL)[0])
        raise GameError(f"kernel row h={h}, s={s}, a={a} sums to {P[h, s, a].sum()!r}")
    d = S * A
    phi = np.eye(d).reshape(S, A, d)
    mu = P.reshape(H, d, S)
    return LinearMarkovGame(
        tuple(action_counts),
        H,
        phi,
        mu,
        rewards,
        initial_state=initial_state,
        fail_state=fail_state,
        state_names=tuple(state_names),
    )
