"""Worst-case expectations over total-variation balls.

TV distance is the half-L1 distance. For a nominal distribution ``mu`` and
a value vector ``V`` the inner problem is

    inf { E_nu[V] : TV(nu, mu) <= sigma }

which is solved two independent ways: a greedy mass transport
(:func:`primal_worst_case`) and the clipped dual over a scalar level alpha
(:func:`dual_worst_case`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .game import LinearMarkovGame, transition_distribution

DIST_TOL = 1e-9


def _check_distribution(mu: np.ndarray) -> None:
    if mu.ndim != 1 or (mu < -DIST_TOL).any() or abs(mu.sum() - 1.0) > DIST_TOL:
        raise ValueError("mu must be a probability vector")


def _check_sigma(sigma: float) -> None:
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma}")


def clip(values, alpha: float) -> np.ndarray:
    """Elementwise ``min(V, alpha)``."""
    if alpha < 0:
        raise ValueError(f"clip level must be nonnegative, got {alpha}")
    return np.minimum(np.asarray(values, dtype=float), alpha)


@dataclass(frozen=True)
class DualSolution:
    value: float
    alpha: float
    breakpoints: np.ndarray
    objective: np.ndarray


def dual_objective(mu, V, sigma, alpha) -> np.ndarray:
    """``E_mu[[V]_alpha] - sigma * (alpha - min_s [V]_alpha(s))`` at each alpha.

    When ``min V = 0`` and ``alpha >= 0`` the correction term vanishes and
    this is the familiar ``E_mu[[V]_alpha] - sigma * alpha``.
    """
    V = np.asarray(V, dtype=float)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    clipped = np.minimum(V[None, :], alpha[:, None])
    return clipped @ mu - sigma * (alpha - clipped.min(axis=1))


def dual_worst_case(mu, V, sigma: float, interval: Optional[Tuple[float, float]] = None) -> DualSolution:
    """Maximize the piecewise-linear dual exactly over its breakpoints.

    The admissible alpha range defaults to ``[min V, max V]``; ``interval``
    widens it (e.g. ``(0, cap)``). Ties go to the smallest alpha.
    """
    mu = np.asarray(mu, dtype=float)
    V = np.asarray(V, dtype=float)
    _check_distribution(mu)
    _check_sigma(sigma)
    if V.shape != mu.shape:
        raise ValueError("mu and V must have the same length")
    lo, hi = (V.min(), V.max()) if interval is None else interval
    pts = V[(V >= lo) & (V <= hi)]
    alphas = np.unique(np.concatenate([pts, [lo, hi]]))
    obj = dual_objective(mu, V, sigma, alphas)
    k = int(np.argmax(obj))
    return DualSolution(float(obj[k]), float(alphas[k]), alphas, obj)


def primal_worst_case(mu, V, sigma: float) -> Tuple[float, np.ndarray]:
    """Greedy minimizer over the TV ball of radius ``sigma`` around ``mu``.

    Up to ``sigma`` mass is taken from the highest-valued states and placed
    on the lowest-index argmin of V.
    """
    mu = np.asarray(mu, dtype=float)
    V = np.asarray(V, dtype=float)
    _check_distribution(mu)
    _check_sigma(sigma)
    nu = mu.copy()
    target = int(np.argmin(V))
    vmin = V[target]
    budget = sigma
    for s in np.argsort(-V, kind="stable"):
        if budget <= 0 or V[s] <= vmin:
            break
        take = min(budget, nu[s])
        nu[s] -= take
        nu[target] += take
        budget -= take
    return float(nu @ V), nu


def factor_duals(mu_rows: np.ndarray, V, sigma: float) -> np.ndarray:
    """Dual value for every factor row at once; shape (d,).

    Equivalent to ``[dual_worst_case(row, V, sigma).value for row in mu_rows]``.
    """
    V = np.asarray(V, dtype=float)
    if sigma == 0.0:
        return mu_rows @ V
    alphas = np.unique(V)
    clipped = np.minimum(V[None, :], alphas[:, None])
    obj = mu_rows @ clipped.T - sigma * (alphas - V.min())[None, :]
    return obj.max(axis=1)


def robust_factor_expectation(game: LinearMarkovGame, h: int, s: int, a: int, V, sigma: float) -> float:
    """``sum_j phi_j(s,a) * inf_{TV(nu, mu_{h,j}) <= sigma} E_nu[V]``."""
    _check_sigma(sigma)
    transition_distribution(game, h, s, a)  # index checks
    return float(game.phi[s, a] @ factor_duals(game.mu[h], V, sigma))


@dataclass(frozen=True)
class TiltedKernelReport:
    value: float  # worst-case expectation over the TV ball
    factor: float  # 1 - sigma
    tilted: np.ndarray  # P~ with value == factor * E_{P~}[V]
    sup_ratio: float  # max_s P~(s) / mu(s)
    ratio_bound_ok: bool  # sup_ratio <= 1 / (1 - sigma)
    sigma_ratio_bound_ok: bool  # sup_ratio <= 1 / sigma
    sigma_form_value: float  # sigma * inf over the 1/sigma likelihood-ratio ball
    sigma_form_ok: bool  # sigma_form_value == value

    def summary(self) -> str:
        return (
            f"value={self.value:.6f} factor(1-sigma)={self.factor:.3f} "
            f"sup_ratio={self.sup_ratio:.4f} ok(1/(1-sigma))={self.ratio_bound_ok} "
            f"ok(1/sigma)={self.sigma_ratio_bound_ok} sigma-form value={self.sigma_form_value:.6f} "
            f"sigma-form ok={self.sigma_form_ok}"
        )


def ratio_ball_min(mu, V, bound: float) -> np.ndarray:
    """argmin of E_P[V] over distributions with ``P(s) <= bound * mu(s)``.

    Filled greedily from the lowest-valued states up.
    """
    mu = np.asarray(mu, dtype=float)
    P = np.zeros_like(mu)
    left = 1.0
    for s in np.argsort(V, kind="stable"):
        take = min(left, bound * mu[s]) if np.isfinite(bound) else left
        P[s] = take
        left -= take
        if left <= 0:
            break
    return P


def tilted_kernel_check(mu, V, sigma: float, tol: float = 1e-9) -> TiltedKernelReport:
    """Compare the TV worst case with likelihood-ratio-ball reformulations.

    Requires ``min V == 0``. Checks both the ``(1 - sigma, 1/(1 - sigma))``
    pair and the ``(sigma, 1/sigma)`` pair and reports which reproduces the
    brute-force value.
    """
    mu = np.asarray(mu, dtype=float)
    V = np.asarray(V, dtype=float)
    if abs(V.min()) > 1e-12:
        raise ValueError(f"tilted kernel check requires min(V) == 0, got {V.min()}")
    value, worst = primal_worst_case(mu, V, sigma)
    factor = 1.0 - sigma
    with np.errstate(divide="ignore"):
        bound = 1.0 / factor if factor > 0 else np.inf
        sigma_bound = 1.0 / sigma if sigma > 0 else np.inf
    tilted = ratio_ball_min(mu, V, bound) if factor > 0 else worst
    support = mu > 0
    ratios = np.where(support, tilted / np.where(support, mu, 1.0), np.where(tilted > 0, np.inf, 0.0))
    sup_ratio = float(ratios.max())
    sigma_value = sigma * float(ratio_ball_min(mu, V, sigma_bound) @ V)
    return TiltedKernelReport(
        value=value,
        factor=factor,
        tilted=tilted,
        sup_ratio=sup_ratio,
        ratio_bound_ok=bool(sup_ratio <= bound + tol),
        sigma_ratio_bound_ok=bool(sup_ratio <= sigma_bound + tol),
        sigma_form_value=sigma_value,
        sigma_form_ok=bool(abs(sigma_value - value) <= tol),
    )
