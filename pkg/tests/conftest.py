"""Shared brute-force oracles and instance generators for the test suite."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from polybandits.geometry import ActionSet, EmpiricalPolytope


def enumerate_minkowski_points(entries) -> np.ndarray:
    """All weighted selection-pattern points of a finite-set mixture."""
    pts = np.zeros((1, entries[0][0].dim))
    for s, w in entries:
        pts = (pts[:, None, :] + w * s.points[None, :, :]).reshape(-1, s.dim)
    return pts


def hull_membership_gap(points: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Signed distance proxy to conv(points): <=0 inside. Qhull when full-dim,
    l-inf distance LP otherwise."""
    X = np.atleast_2d(X)
    d = points.shape[1]
    try:
        hull = ConvexHull(points)
        eq = hull.equations
        return (X @ eq[:, :d].T + eq[:, d]).max(axis=1)
    except QhullError:
        return np.array([_linf_dist(points, x) for x in X])


def _linf_dist(points: np.ndarray, x: np.ndarray) -> float:
    k, d = points.shape
    # min t s.t. |P^T lam - x|_inf <= t, lam in simplex
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_ub = np.zeros((2 * d, k + 1))
    A_ub[:d, :k] = points.T
    A_ub[d:, :k] = -points.T
    A_ub[:, -1] = -1.0
    b_ub = np.concatenate([x, -x])
    A_eq = np.zeros((1, k + 1))
    A_eq[0, :k] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * k + [(0, None)], method="highs")
    assert res.status == 0
    return float(res.fun)


def random_finite_mixture(rng, d, n_sets=None, max_pts=3, box=1.0):
    """Random small all-finite mixture with dirichlet weights."""
    n_sets = n_sets or int(rng.integers(2, 5))
    sets = []
    for _ in range(n_sets):
        k = int(rng.integers(1, max_pts + 1))
        sets.append(ActionSet.from_points(rng.uniform(-box, box, size=(k, d))))
    w = rng.dirichlet(np.ones(n_sets))
    return EmpiricalPolytope(list(zip(sets, w)))


def random_interior_point(rng, poly) -> np.ndarray:
    """Random strict convex combination of per-set points, pulled slightly
    toward the relative-interior point."""
    y = np.zeros(poly.dim)
    for s, w in poly.entries:
        lam = rng.dirichlet(np.ones(s.points.shape[0]))
        y += w * (lam @ s.points)
    return 0.95 * y + 0.05 * poly.interior_point
