"""Coarse correlated equilibria of n-player matrix games.

A payoff tensor is an array of shape ``(n, A_1, ..., A_n)``; entry
``payoffs[i][a]`` is player i's payoff under joint action ``a``.
Distributions over joint actions are flat vectors in C order.
"""

from __future__ import annotations

import numpy as np

from .simplex import LPError, linprog_max

GAP_TOL = 1e-9


class CCESolverError(RuntimeError):
    """Raised when the equilibrium LP fails; carries the violated constraint."""

    def __init__(self, message, player=None, action=None, violation=None):
        super().__init__(message)
        self.player = player
        self.action = action
        self.violation = violation


def _as_tensor(payoffs) -> np.ndarray:
    Q = np.asarray(payoffs, dtype=float)
    if Q.ndim < 2 or Q.shape[0] != Q.ndim - 1:
        raise ValueError(f"payoff tensor must have shape (n, A_1, ..., A_n), got {Q.shape}")
    if not np.isfinite(Q).all():
        raise ValueError("payoff entries must be finite")
    return Q


def deviation_payoffs(payoffs) -> list:
    """For each player i, an (A_i, |A|) matrix D with ``D[b, a] = Q_i(b, a_{-i})``."""
    Q = _as_tensor(payoffs)
    n = Q.shape[0]
    shape = Q.shape[1:]
    out = []
    for i in range(n):
        rows = []
        for b in range(shape[i]):
            fixed = np.take(Q[i], [b], axis=i)
            rows.append(np.broadcast_to(fixed, shape).ravel())
        out.append(np.array(rows))
    return out


def cce_gap(payoffs, dist) -> float:
    """Largest gain any player gets by committing to a fixed own action.

    ``dist`` is a coarse correlated equilibrium iff the result is <= 0.
    """
    Q = _as_tensor(payoffs)
    pi = np.asarray(dist, dtype=float).ravel()
    if pi.size != np.prod(Q.shape[1:]):
        raise ValueError(f"distribution has {pi.size} entries, expected {np.prod(Q.shape[1:])}")
    gap = -np.inf
    for i, D in enumerate(deviation_payoffs(Q)):
        gap = max(gap, float((D @ pi).max() - Q[i].ravel() @ pi))
    return gap


def _pure_welfare_equilibrium(Q: np.ndarray):
    """Lowest-index joint action maximizing total payoff, if it is a pure Nash equilibrium.

    Such an action is an optimal vertex of the welfare LP, so it is returned
    directly instead of running the simplex.
    """
    welfare = Q.sum(axis=0).ravel()
    a = int(np.argmax(welfare))
    idx = np.unravel_index(a, Q.shape[1:])
    for i in range(Q.shape[0]):
        line = list(idx)
        line[i] = slice(None)
        if Q[i][tuple(line)].max() > Q[i][idx]:
            return None
    return a


def solve_cce(payoffs) -> np.ndarray:
    """Welfare-maximizing coarse correlated equilibrium.

    Solves  max sum_i E_pi[Q_i]  s.t.  E_pi[Q_i(b, a_-i)] <= E_pi[Q_i]  for
    every player i and own action b, with pi a distribution over joint
    actions. Deterministic for a fixed input.
    """
    Q = _as_tensor(payoffs)
    n = Q.shape[0]
    A = int(np.prod(Q.shape[1:]))
    a = _pure_welfare_equilibrium(Q)
    if a is not None:
        pi = np.zeros(A)
        pi[a] = 1.0
        return pi

    devs = deviation_payoffs(Q)
    G = np.vstack([D - Q[i].ravel()[None, :] for i, D in enumerate(devs)])
    m = G.shape[0]
    A_eq = np.zeros((m + 1, A + m))
    A_eq[:m, :A] = G
    A_eq[:m, A:] = np.eye(m)
    A_eq[m, :A] = 1.0
    b_eq = np.zeros(m + 1)
    b_eq[m] = 1.0
    c = np.concatenate([Q.reshape(n, A).sum(axis=0), np.zeros(m)])
    try:
        x = linprog_max(c, A_eq, b_eq)
    except LPError as exc:
        raise CCESolverError(f"CCE linear program failed: {exc}") from exc

    pi = np.clip(x[:A], 0.0, None)
    pi /= pi.sum()
    viol = G @ pi
    k = int(np.argmax(viol))
    if viol[k] > GAP_TOL:
        sizes = np.cumsum([0] + [D.shape[0] for D in devs])
        player = int(np.searchsorted(sizes, k, side="right") - 1)
        raise CCESolverError(
            f"CCE constraint for player {player}, action {k - sizes[player]} violated by {viol[k]:.3e}",
            player=player,
            action=int(k - sizes[player]),
            violation=float(viol[k]),
        )
    return pi


def round_to_cover(payoffs, eps: float, cap=None) -> np.ndarray:
    """Snap every entry to the nearest multiple of ``2 * eps``.

    With ``cap`` given (scalar or one value per player), results are clipped
    to ``[0, cap]``. Entries already inside that range move by at most eps.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    Q = _as_tensor(payoffs)
    step = 2.0 * eps
    R = np.floor(Q / step + 0.5) * step
    if cap is not None:
        hi = np.broadcast_to(np.asarray(cap, dtype=float), (Q.shape[0],))
        hi = hi.reshape((-1,) + (1,) * (Q.ndim - 1))
        R = np.clip(R, 0.0, hi)
    return R


def find_cce(payoffs, eps: float, cap=None) -> np.ndarray:
    """Equilibrium of the payoffs rounded onto the eps-cover grid.

    The result is a 2*eps-approximate CCE of the unrounded game, and any two
    games that round to the same grid tuple get the same distribution.
    """
    return solve_cce(round_to_cover(payoffs, eps, cap))
