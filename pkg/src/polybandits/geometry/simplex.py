"""Dense two-phase simplex for small LPs with free variables.

Solves   max c^T x   s.t.   A_ub x <= b_ub,  A_eq x = b_eq,  x free.

Bland's rule throughout, so the method terminates and the returned basic
solution is deterministic. Intended for per-action-set subproblems where the
constraint count is small (tens); no sparsity, no presolve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL, INFEASIBLE, UNBOUNDED = 0, 2, 3

_TOL = 1e-9


@dataclass
class LPResult:
    status: int
    x: np.ndarray | None
    value: float | None


def solve_lp_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    rows = []
    rhs = []
    n_ub = 0
    if A_ub is not None:
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
        n_ub = A_ub.shape[0]
        rows.append(A_ub)
        rhs.append(b_ub)
    if A_eq is not None:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        rows.append(A_eq)
        rhs.append(b_eq)
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    m = A.shape[0]

    # Standard form: x = u - v with u, v >= 0; slacks on the <= rows.
    ncols = 2 * n + n_ub
    T = np.zeros((m, ncols))
    T[:, :n] = A
    T[:, n:2 * n] = -A
    if n_ub:
        T[:n_ub, 2 * n:2 * n + n_ub] = np.eye(n_ub)

    neg = b < 0
    T[neg] *= -1.0
    b = np.abs(b)

    # Phase 1: artificial basis.
    full = np.hstack([T, np.eye(m)])
    basis = np.arange(ncols, ncols + m)
    obj = np.zeros(ncols + m)
    obj[ncols:] = 1.0
    tab, basis, ok = _simplex(full, b.copy(), obj, basis)
    if not ok:
        return LPResult(UNBOUNDED, None, None)  # cannot happen for phase 1
    if tab[:, -1] @ obj[basis] > 1e-7 * max(1.0, np.abs(b).max()):
        return LPResult(INFEASIBLE, None, None)
    # Drive any artificial still in the basis out (or drop a redundant row).
    tab, basis = _purge_artificials(tab, basis, ncols)
    tab = np.hstack([tab[:, :ncols], tab[:, -1:]])

    # Phase 2: minimize -c^T x over (u, v, slack).
    obj2 = np.zeros(ncols)
    obj2[:n] = -c
    obj2[n:2 * n] = c
    tab2, basis, ok = _simplex(tab[:, :-1], tab[:, -1].copy(), obj2, basis)
    if not ok:
        return LPResult(UNBOUNDED, None, None)
    z = np.zeros(ncols)
    z[basis] = tab2[:, -1]
    x = z[:n] - z[n:2 * n]
    return LPResult(OPTIMAL, x, float(c @ x))


def _simplex(A, b, obj, basis):
    """Bland-rule primal simplex on an already-feasible basis.

    Returns (tableau [A | b], basis, bounded_flag).
    """
    m, ncols = A.shape
    tab = np.hstack([A, b[:, None]])
    # Express the objective in terms of the current basis.
    while True:
        cb = obj[basis]
        # reduced costs: obj - cb^T B^-1 A; tableau rows already are B^-1 A.
        red = obj - cb @ tab[:, :ncols]
        enter = -1
        for j in range(ncols):
            if red[j] < -_TOL:
                enter = j
                break
        if enter < 0:
            return tab, basis, True
        col = tab[:, enter]
        pos = col > _TOL
        if not np.any(pos):
            return tab, basis, False
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[pos, -1] / col[pos]
        best = np.min(ratios)
        # Bland tie-break: smallest basis index among the minimizing rows.
        cand = np.where(ratios <= best + _TOL * (1 + abs(best)))[0]
        leave = cand[np.argmin(basis[cand])]
        _pivot(tab, leave, enter)
        basis[leave] = enter


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and abs(tab[r, col]) > 0:
            tab[r] -= tab[r, col] * tab[row]


def _purge_artificials(tab, basis, ncols):
    m = tab.shape[0]
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= ncols:
            piv = np.where(np.abs(tab[r, :ncols]) > _TOL)[0]
            if piv.size:
                _pivot(tab, r, piv[0])
                basis[r] = piv[0]
            else:
                keep[r] = False  # redundant row
    return tab[keep], basis[keep]
