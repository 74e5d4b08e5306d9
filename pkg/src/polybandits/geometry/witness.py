"""Interior-of-normal-cone witnesses.

For a vertex psi of the body, find phi (unit norm) under which psi is the
strict per-set argmin, so the linear-classifier policy a(A) = argmin <a, phi>
realizes psi as its weighted mean action across the body's sets.

Two routes:
  * subgradient descent on f(phi) = max_x <phi, psi - x> over the unit ball
    (default for all-finite mixtures, where strict per-set second-best margins
    are directly measurable), and
  * an exact margin-maximizing LP (used when H-rep sets are present, where the
    cone is encoded through active constraint normals, and available anywhere
    as a cross-check).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from ..util import DomainError, OracleInconsistency
from .polytope import EmpiricalPolytope, Vertex

_MARGIN_FLOOR = 1e-10


def cone_witness(poly: EmpiricalPolytope, psi, method: str = "auto"):
    """Returns (phi, eps_cone): unit witness and its certified strict margin."""
    rec = psi if isinstance(psi, Vertex) else _recover_components(poly, np.asarray(psi, float))
    if method == "auto":
        method = "subgradient" if poly._all_finite else "lp"
    if method == "subgradient":
        if not poly._all_finite:
            raise DomainError("subgradient witness route needs finite sets")
        return _witness_subgradient(poly, rec)
    if method == "lp":
        return _witness_lp(poly, rec)
    raise ValueError(f"unknown witness method {method!r}")


def _recover_components(poly, psi: np.ndarray) -> Vertex:
    """Rebuild per-set Minkowski components of a claimed vertex via a fiber LP."""
    if len(poly.entries) == 1:
        s, _ = poly.entries[0]
        if s.is_finite:
            j = int(np.argmin(np.linalg.norm(s.points - psi, axis=1)))
            comp = s.points[j][None]
            if np.linalg.norm(comp[0] - psi) > 1e-8 * poly.scale:
                raise DomainError("not a vertex: no matching point in the single set")
        else:
            comp = psi[None] / poly.entries[0][1]
        return Vertex(point=psi, components=comp, direction=np.zeros(poly.dim))
    d = poly.dim
    bounds = []
    col = 0
    layout = []
    for (s, w) in poly.entries:
        if s.is_finite:
            k = s.points.shape[0]
            layout.append(("V", col, k, s, w))
            bounds += [(0, None)] * k
            col += k
        else:
            layout.append(("H", col, d, s, w))
            bounds += [(None, None)] * d
            col += d
    A_eq = [np.zeros((d, col))]
    for kind, c0, n, s, w in layout:
        if kind == "V":
            A_eq[0][:, c0:c0 + n] = w * s.points.T
        else:
            A_eq[0][:, c0:c0 + n] = w * np.eye(d)
    b_eq = [psi]
    rows = []
    rhs = []
    for kind, c0, n, s, w in layout:
        if kind == "V":
            row = np.zeros(col)
            row[c0:c0 + n] = 1.0
            A_eq.append(row[None])
            b_eq.append(np.array([1.0]))
        else:
            blk = np.zeros((s.normals.shape[0], col))
            blk[:, c0:c0 + d] = s.normals
            rows.append(blk)
            rhs.append(s.offsets)
    res = linprog(np.zeros(col),
                  A_ub=np.vstack(rows) if rows else None,
                  b_ub=np.concatenate(rhs) if rows else None,
                  A_eq=np.vstack(A_eq), b_eq=np.concatenate(b_eq),
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise DomainError("not a vertex: fiber LP infeasible at the claimed point")
    comps = np.empty((len(poly.entries), d))
    for i, (kind, c0, n, s, w) in enumerate(layout):
        if kind == "V":
            p = s.points.T @ res.x[c0:c0 + n]
            j = int(np.argmin(np.linalg.norm(s.points - p, axis=1)))
            comps[i] = s.points[j]
        else:
            comps[i] = res.x[c0:c0 + n]
    if np.linalg.norm(poly._weights @ comps - psi) > 1e-8 * poly.scale:
        raise DomainError("not a vertex: fiber does not snap to per-set points")
    return Vertex(point=psi, components=comps, direction=np.zeros(poly.dim))


def _strict_diffs(poly, rec: Vertex):
    """Per-set (a - psi_i) rows excluding rows equal to psi_i, stacked."""
    diffs = []
    for (s, _), comp in zip(poly.entries, rec.components):
        if not s.is_finite:
            continue
        same = np.all(s.points == comp, axis=1)
        rest = s.points[~same]
        if rest.size:
            diffs.append(rest - comp)
    if not diffs:
        return np.zeros((0, poly.dim))
    return np.vstack(diffs)


def _witness_subgradient(poly, rec: Vertex, iters: int | None = None):
    d = poly.dim
    if iters is None:
        iters = 500 * d
    D = _strict_diffs(poly, rec)          # want <phi, D_j> > 0 for all rows
    if D.shape[0] == 0:
        phi = poly.basis[:, 0] if poly.hull_dim else np.zeros(d)
        return (phi if np.any(phi) else _unit(np.ones(d))), 1.0
    Dn = D / np.linalg.norm(D, axis=1, keepdims=True)
    psi = rec.point
    phi = _unit(poly.interior_point - psi)
    if not np.any(phi):
        phi = _unit(np.ones(d))
    best_m = -np.inf
    best_phi = phi
    for k in range(1, iters + 1):
        m = (Dn @ phi).min()
        if m > best_m:
            best_m = m
            best_phi = phi.copy()
        x_star = poly._weights @ poly.argmax_components(-phi, lex=False)
        g = psi - x_star                   # subgradient of f(phi)
        gn = np.linalg.norm(g)
        if gn > 0:
            phi = phi - g / (np.sqrt(k) * gn)
        else:
            # f is flat here; nudge toward the worst strict constraint
            phi = phi + Dn[np.argmin(Dn @ phi)] / np.sqrt(k)
        n = np.linalg.norm(phi)
        if n > 1.0:
            phi = phi / n
    if best_m <= _MARGIN_FLOOR:
        try:
            return _witness_lp(poly, rec)
        except DomainError:
            raise DomainError("not a vertex: no strictly separating witness found")
    phi = _unit(best_phi)
    margin = float((Dn @ phi).min())
    return phi, max(margin / 2.0, _MARGIN_FLOOR)


def _witness_lp(poly, rec: Vertex):
    """maximize m  s.t.  <phi, a - psi_i> >= m (unit-normalized rows) for finite
    sets, phi = -sum mu_l n_l with mu_l >= m over active rows for H-rep sets,
    |phi|_inf <= 1."""
    d = poly.dim
    cols = d + 1   # phi, m
    mu_blocks = []
    for (s, _), comp in zip(poly.entries, rec.components):
        if not s.is_finite:
            act = np.where(s.offsets - s.normals @ comp <=
                           1e-8 * np.maximum(1.0, np.abs(s.offsets)))[0]
            if act.size == 0:
                raise DomainError("not a vertex: component interior to its H-rep set")
            mu_blocks.append((cols, act, s))
            cols += act.size
    A_ub = []
    b_ub = []
    D = _strict_diffs(poly, rec)
    if D.shape[0]:
        Dn = D / np.linalg.norm(D, axis=1, keepdims=True)
        blk = np.zeros((Dn.shape[0], cols))
        blk[:, :d] = -Dn
        blk[:, d] = 1.0                    # m - <phi, diff> <= 0
        A_ub.append(blk)
        b_ub.append(np.zeros(Dn.shape[0]))
    A_eq = []
    b_eq = []
    for c0, act, s in mu_blocks:
        blk = np.zeros((d, cols))
        blk[:, :d] = np.eye(d)
        blk[:, c0:c0 + act.size] = s.normals[act].T
        A_eq.append(blk)                   # phi + N_act^T mu = 0
        b_eq.append(np.zeros(d))
        mrow = np.zeros((act.size, cols))
        mrow[:, d] = 1.0
        mrow[np.arange(act.size), c0 + np.arange(act.size)] = -1.0
        A_ub.append(mrow)                  # m <= mu_l
        b_ub.append(np.zeros(act.size))
    bounds = [(-1.0, 1.0)] * d + [(None, None)] + [(0, None)] * (cols - d - 1)
    obj = np.zeros(cols)
    obj[d] = -1.0
    res = linprog(obj,
                  A_ub=np.vstack(A_ub) if A_ub else None,
                  b_ub=np.concatenate(b_ub) if b_ub else None,
                  A_eq=np.vstack(A_eq) if A_eq else None,
                  b_eq=np.concatenate(b_eq) if b_eq else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise OracleInconsistency(f"witness LP failed (status {res.status})")
    m_star = -float(res.fun)
    if m_star <= _MARGIN_FLOOR:
        raise DomainError("not a vertex: witness margin LP is non-positive")
    phi = _unit(res.x[:d])
    margin = m_star / max(np.linalg.norm(res.x[:d]), 1e-30)
    return phi, max(margin / 2.0, _MARGIN_FLOOR)


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else v
