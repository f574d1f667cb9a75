"""Dense two-phase simplex for small linear programs.

Solves min c.x subject to A x <= b, x >= 0. Entering and leaving variables use
Bland's smallest-index rule, so degenerate pivots cannot cycle and runs are
deterministic. Sized for problems with a few hundred variables.
"""

from __future__ import annotations

import numpy as np

TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SimplexResult:
    def __init__(self, status: str, x: np.ndarray | None = None, objective: float = 0.0):
        self.status = status
        self.x = x
        self.objective = objective


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and abs(tab[i, col]) > 0.0:
            tab[i] -= tab[i, col] * tab[row]
    basis[row] = col


def _iterate(tab: np.ndarray, basis: np.ndarray, ncols: int, allowed: np.ndarray,
             max_iterations: int) -> str:
    """Run simplex iterations on a tableau whose last row is the cost row."""
    m = tab.shape[0] - 1
    for _ in range(max_iterations):
        entering = -1
        for j in range(ncols):
            if allowed[j] and tab[m, j] < -TOL:
                entering = j  # smallest index with negative reduced cost
                break
        if entering < 0:
            return OPTIMAL
        ratios = np.full(m, np.inf)
        col = tab[:m, entering]
        positive = col > TOL
        ratios[positive] = tab[:m, -1][positive] / col[positive]
        best_ratio = ratios.min()
        if not np.isfinite(best_ratio):
            return UNBOUNDED
        # Bland: among minimum-ratio rows, leave the smallest basis index
        leaving = -1
        for i in range(m):
            if ratios[i] <= best_ratio + 1e-12:
                if leaving < 0 or basis[i] < basis[leaving]:
                    leaving = i
        _pivot(tab, basis, leaving, entering)
    raise RuntimeError("simplex iteration cap exceeded")


def solve(c, A, b, max_iterations: int = 200_000) -> SimplexResult:
    """Minimize c.x with A x <= b and x >= 0; returns an optimal basic solution."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).copy()
    c = np.asarray(c, dtype=np.float64)
    m, n = A.shape

    # equality form: A x + I s = b; rows with negative b are negated and given
    # an artificial variable to form the phase-1 starting basis
    neg = b < 0
    n_art = int(neg.sum())
    ncols = n + m + n_art
    tab = np.zeros((m + 1, ncols + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[:m][neg] *= -1.0

    basis = np.empty(m, dtype=np.int64)
    art_cols = []
    k = 0
    for i in range(m):
        if neg[i]:
            col = n + m + k
            tab[i, col] = 1.0
            basis[i] = col
            art_cols.append(col)
            k += 1
        else:
            basis[i] = n + i

    allowed = np.ones(ncols, dtype=bool)

    if n_art:
        # phase 1: minimize the sum of artificials
        art_set = set(art_cols)
        tab[m, :] = 0.0
        for col in art_cols:
            tab[m, col] = 1.0
        for i in range(m):
            if basis[i] in art_set:
                tab[m] -= tab[i]
        status = _iterate(tab, basis, ncols, allowed, max_iterations)
        if status != OPTIMAL or tab[m, -1] < -1e-7:
            return SimplexResult(INFEASIBLE)
        # pivot surviving artificials out of the basis where possible
        for i in range(m):
            if basis[i] in art_set:
                for j in range(n + m):
                    if abs(tab[i, j]) > TOL:
                        _pivot(tab, basis, i, j)
                        break
        for col in art_cols:
            allowed[col] = False

    # phase 2: the real objective
    tab[m, :] = 0.0
    tab[m, :n] = c
    tab[m, -1] = 0.0
    for i in range(m):
        if basis[i] < n and abs(c[basis[i]]) > 0.0:
            tab[m] -= c[basis[i]] * tab[i]
    status = _iterate(tab, basis, ncols, allowed, max_iterations)
    if status != OPTIMAL:
        return SimplexResult(status)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tab[i, -1]
    return SimplexResult(OPTIMAL, x=x, objective=float(-tab[m, -1]))
