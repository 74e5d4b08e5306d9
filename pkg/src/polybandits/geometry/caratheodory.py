"""Carathéodory decomposition: express a body point as a convex combination of
at most hull_dim + 1 certified vertices.

Recursive ray shooting: pick a vertex v of the current face, shoot the ray
from v through the target to the face's relative boundary, record the weight
split, and recurse on the boundary point one dimension down. On polytopes
with a facet cache the exit point and the newly tight facet are exact closed
forms; otherwise the chord LP supplies the exit point and a supporting
direction, and the face is realized by restricting every action set to its
own maximizers (a face of a Minkowski average is the average of faces).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..util import DomainError, OracleInconsistency, stream
from .action_set import ActionSet
from .polytope import TAU_GEO, EmpiricalPolytope, Vertex

_RECON_TOL = 1e-8
_GENERIC_SEED = 771


@dataclass
class VertexDecomposition:
    vertices: np.ndarray          # (k, d)
    weights: np.ndarray           # (k,), sums to 1
    records: list[Vertex]

    @property
    def k(self) -> int:
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        return self.weights @ self.vertices


def decompose(poly: EmpiricalPolytope, y, tol: float = TAU_GEO) -> VertexDecomposition:
    y = np.asarray(y, dtype=float)
    if not poly.contains(y, max(tol, TAU_GEO) * 10):
        raise DomainError("decompose target is not a member of the body")
    if poly.hull_dim == 0:
        rec = _vertex_record(poly, poly.origin, np.zeros(poly.dim))
        return VertexDecomposition(rec.point[None], np.array([1.0]), [rec])
    pairs = _dispatch(poly, y, depth=poly.hull_dim + 2)
    return _finalize(poly, y, pairs)


def _dispatch(poly, y, depth):
    if poly.has_facets:
        return _decompose_facets(poly, poly.to_hull(y))
    return _decompose_oracle(poly, y, depth)


def _finalize(poly, y, pairs) -> VertexDecomposition:
    merged: dict[bytes, list] = {}
    order = []
    for rec, w in pairs:
        if w <= 1e-14:
            continue
        k = rec.key()
        if k in merged:
            merged[k][1] += w
        else:
            merged[k] = [rec, w]
            order.append(k)
    recs = [merged[k][0] for k in order]
    ws = np.array([merged[k][1] for k in order])
    ws = ws / ws.sum()
    verts = np.array([r.point for r in recs])
    out = VertexDecomposition(verts, ws, recs)
    err = np.linalg.norm(out.reconstruct() - y)
    if err > _RECON_TOL * poly.scale:
        raise OracleInconsistency(f"decomposition reconstruction error {err:.3g}")
    if out.k > poly.hull_dim + 1:
        raise OracleInconsistency(f"decomposition used {out.k} vertices")
    return out


# ----------------------------------------------------------------------
# facet-cache path (hull coordinates)

def _decompose_facets(poly, z):
    rows, offs = poly.facet_rows, poly.facet_offs
    r = poly.hull_dim
    gen = stream(_GENERIC_SEED, r)
    pairs = []
    remaining = 1.0
    active = np.zeros(rows.shape[0], dtype=bool)
    cur = np.asarray(z, dtype=float)
    tol = 1e-9 * poly.scale
    for _ in range(r + 1):
        active |= (offs - rows @ cur) <= tol
        if _rank(rows[active]) >= r:
            pairs.append((_vertex_from_active(poly, cur, active), remaining))
            return pairs
        v = _face_vertex(rows, offs, active, gen.standard_normal(r))
        u = cur - v
        if np.linalg.norm(u) <= tol:
            pairs.append((_vertex_from_active(poly, cur, active), remaining))
            return pairs
        free = ~active
        ru = rows[free] @ u
        slack = offs[free] - rows[free] @ v
        pos = ru > 1e-13
        if not np.any(pos):
            raise OracleInconsistency("ray never exits a bounded face")
        ratios = slack[pos] / ru[pos]
        t = max(float(ratios.min()), 1.0)
        v_active = active | ((offs - rows @ v) <= tol)
        pairs.append((_vertex_from_active(poly, v, v_active), remaining * (1.0 - 1.0 / t)))
        remaining /= t
        cur = v + t * u
    # active set gains an independent row each level, so r+1 levels suffice
    active |= (offs - rows @ cur) <= tol
    if _rank(rows[active]) >= r:
        pairs.append((_vertex_from_active(poly, cur, active), remaining))
        return pairs
    raise OracleInconsistency("facet recursion failed to reach a vertex")


def _face_vertex(rows, offs, active, g) -> np.ndarray:
    """Basic optimal solution on the face {rows<=offs, rows[active]=offs[active]}."""
    res = linprog(-g, A_ub=rows[~active], b_ub=offs[~active],
                  A_eq=rows[active] if active.any() else None,
                  b_eq=offs[active] if active.any() else None,
                  bounds=[(None, None)] * rows.shape[1], method="highs-ds")
    if res.status != 0:
        raise OracleInconsistency(f"face vertex LP failed (status {res.status})")
    return res.x


def _vertex_from_active(poly, z, active) -> Vertex:
    c_hull = poly.facet_rows[active].sum(axis=0)
    return _vertex_record(poly, poly.to_ambient(z), poly.basis @ c_hull)


def _vertex_record(poly, point, direction) -> Vertex:
    """Certify: per-set maximizers under `direction` must rebuild `point`.

    A positive combination of the facet normals active at a vertex lies in the
    relative interior of its normal cone, so the vertex is the unique
    maximizer and per-set argmaxes recover its Minkowski components.
    """
    if poly.hull_dim == 0 or np.linalg.norm(direction) == 0:
        comps = np.array([s.support_value_point(np.zeros(poly.dim), lex=True)[1]
                          for s, _ in poly.entries])
        return Vertex(point=np.asarray(point, dtype=float), components=comps,
                      direction=np.asarray(direction, dtype=float))
    comps = poly.argmax_components(direction, lex=True)
    rebuilt = poly._weights @ comps
    if np.linalg.norm(rebuilt - point) > 1e-7 * poly.scale:
        raise OracleInconsistency("vertex certificate direction failed to rebuild the vertex")
    return Vertex(point=rebuilt, components=comps, direction=np.asarray(direction, float))


def _rank(M: np.ndarray, tol: float = 1e-9) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))


# ----------------------------------------------------------------------
# oracle path (no facet cache): chord LP + per-set face restriction

def _decompose_oracle(poly, y, depth):
    if depth < 0:
        raise OracleInconsistency("face recursion exceeded the dimension bound")
    if poly.hull_dim == 0:
        return [(_vertex_record(poly, poly.origin, np.zeros(poly.dim)), 1.0)]
    gen = stream(_GENERIC_SEED, poly.hull_dim, depth)
    c = poly.basis @ gen.standard_normal(poly.hull_dim)
    vrec = poly.vertex(c)
    u_amb = y - vrec.point
    if np.linalg.norm(u_amb) <= 1e-9 * poly.scale:
        return [(vrec, 1.0)]
    z_v = poly.to_hull(vrec.point)
    z_y = poly.to_hull(y)
    u = z_y - z_v
    _, hi, _, d_hi = poly.chord(z_v, u)
    t = max(float(hi), 1.0)
    z_exit = z_v + t * u
    exit_amb = poly.to_ambient(z_exit)
    if d_hi is None:
        raise OracleInconsistency("chord oracle returned no supporting direction")
    phi = poly.basis @ d_hi
    face = _restrict_to_face(poly, phi)
    sub = _dispatch(face, exit_amb, depth - 1)
    out = [(vrec, 1.0 - 1.0 / t)]
    out += [(_recertify(poly, rec, phi), w / t) for rec, w in sub]
    return out


def _recertify(poly, rec: Vertex, phi: np.ndarray) -> Vertex:
    """Lift a face vertex's certificate to the parent body.

    The vertex maximizes rec.direction on the face and the face maximizes phi
    on the body, so mu*phi + rec.direction certifies it for large enough mu.
    """
    base = rec.direction
    bn = np.linalg.norm(base)
    pn = np.linalg.norm(phi)
    if pn == 0:
        return rec
    base = base / bn if bn > 0 else base
    last = None
    for mu in (1e3, 1e6, 1e9):
        try:
            return _vertex_record(poly, rec.point, mu * phi / pn + base)
        except OracleInconsistency as exc:
            last = exc
    raise last


def _restrict_to_face(poly, phi):
    """Minkowski average of the per-set faces supported by phi."""
    slack = 1e-9 * poly.scale
    new = []
    for (s, w) in poly.entries:
        if s.is_finite:
            vals = s.points @ phi
            keep = vals >= vals.max() - slack * max(1.0, abs(vals.max()))
            new.append((ActionSet.from_points(s.points[keep], s.radius_bound), w))
        else:
            v, _ = s.support(phi)
            normals = np.vstack([s.normals, phi[None], -phi[None]])
            offsets = np.concatenate([s.offsets, [v + slack, -(v - slack)]])
            new.append((ActionSet.from_halfspaces(normals, offsets, s.radius_bound), w))
    return EmpiricalPolytope(new)
