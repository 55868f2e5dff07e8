"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Meant for the tiny LPs produced by matrix-game equilibrium problems
(a few dozen columns). Pivoting is fully deterministic.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-11


class LPError(RuntimeError):
    """The LP could not be solved to the requested accuracy."""


def _pivot(T: np.ndarray, basis: list, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = c


def _run(T: np.ndarray, basis: list, n_cols: int, max_iter: int) -> None:
    """Minimize the objective in the last row of ``T`` over the first ``n_cols`` columns."""
    m = len(basis)
    for _ in range(max_iter):
        reduced = T[m, :n_cols]
        entering = np.flatnonzero(reduced < -PIVOT_TOL)
        if entering.size == 0:
            return
        c = int(entering[0])
        col = T[:m, c]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise LPError("LP is unbounded")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL]
        r = int(min(ties, key=lambda k: basis[k]))
        _pivot(T, basis, r, c)
    raise LPError(f"simplex did not terminate within {max_iter} pivots")


def linprog_max(c, A_eq, b_eq, max_iter: int = 10_000) -> np.ndarray:
    """Solve ``max c.x  s.t.  A_eq x = b_eq, x >= 0``.

    Rows whose column set already contains a unit vector (with b >= 0)
    start with that column basic; the rest get artificial variables.
    """
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    basis = [-1] * m
    for j in range(n):
        col = A[:, j]
        nz = np.flatnonzero(col)
        if nz.size == 1 and col[nz[0]] == 1.0 and basis[nz[0]] < 0:
            basis[nz[0]] = j
    art_rows = [r for r in range(m) if basis[r] < 0]
    n_art = len(art_rows)

    T = np.zeros((m + 1, n + n_art + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    for k, r in enumerate(art_rows):
        T[r, n + k] = 1.0
        basis[r] = n + k

    if n_art:
        # phase 1: minimize the sum of artificials
        T[m, :] = 0.0
        T[m, n : n + n_art] = 1.0
        for r in art_rows:
            T[m] -= T[r]
        _run(T, basis, n + n_art, max_iter)
        if -T[m, -1] > 1e-9:
            raise LPError(f"LP is infeasible (phase-1 residual {-T[m, -1]:.3e})")
        # drive remaining zero-level artificials out of the basis
        for r in range(m):
            if basis[r] >= n:
                nz = np.flatnonzero(np.abs(T[r, :n]) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, basis, r, int(nz[0]))
        keep = [r for r in range(m) if basis[r] < n]
        T = np.vstack([T[keep], T[m : m + 1]])
        T = np.hstack([T[:, :n], T[:, -1:]])
        basis = [basis[r] for r in keep]
        m = len(basis)

    # phase 2 on -c
    T[m, :] = 0.0
    T[m, :n] = -c
    for r, j in enumerate(basis):
        T[m] -= T[m, j] * T[r]
    _run(T, basis, n, max_iter)

    x = np.zeros(n)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    return x
