"""Weighted Minkowski average of action sets, accessed through oracles.

The body is sum_i w_i * conv(A_i). It is never vertex-enumerated; everything
runs through support evaluations, a separation routine, exact membership LPs,
and (when affordable) a cached facet description in affine-hull coordinates:

  * one H-rep entry      -> project its constraints into hull coordinates
  * one finite entry     -> convex hull of the projected points
  * small finite mixture -> enumerate selection patterns (<= _ENUM_CAP) + hull

Polytopes are immutable after construction; all caches are built eagerly so
instances can be shared across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from ..util import DomainError, InvariantViolation, OracleInconsistency, stream
from .action_set import ActionSet

TAU_GEO = 1e-9
_HULL_TOL = 1e-8
_ENUM_CAP = 4096


@dataclass
class SeparationResult:
    inside: bool
    direction: np.ndarray | None = None   # unit vector when separated
    margin: float = 0.0

    def __bool__(self) -> bool:  # truthy when the point is a member
        return self.inside


@dataclass
class Vertex:
    """A certified vertex: ambient point, per-set components, and a direction
    under which it is the unique maximizer."""
    point: np.ndarray
    components: np.ndarray        # (n_entries, d), per-set maximizers
    direction: np.ndarray         # ambient certificate direction

    def key(self) -> bytes:
        return self.point.tobytes()


class EmpiricalPolytope:

    def __init__(self, sets_with_weights, probe_seed: int = 90210):
        merged: dict[bytes, list] = {}
        order: list[bytes] = []
        for s, w in sets_with_weights:
            if w <= 0:
                raise InvariantViolation("non-positive mixture weight")
            k = s.canonical_key()
            if k in merged:
                merged[k][1] += w
            else:
                merged[k] = [s, w]
                order.append(k)
        self.entries: list[tuple[ActionSet, float]] = [tuple(merged[k]) for k in order]
        total = sum(w for _, w in self.entries)
        if abs(total - 1.0) > 1e-12:
            raise InvariantViolation(f"weights sum to {total!r}, expected 1")
        dims = {s.dim for s, _ in self.entries}
        if len(dims) != 1:
            raise InvariantViolation("mixed ambient dimensions")
        self.dim = dims.pop()
        self._weights = np.array([w for _, w in self.entries])
        self._all_finite = all(s.is_finite for s, _ in self.entries)
        self._build_affine_hull(probe_seed)
        self._build_facets()

    @staticmethod
    def from_samples(sets, probe_seed: int = 90210) -> "EmpiricalPolytope":
        n = len(sets)
        return EmpiricalPolytope([(s, 1.0 / n) for s in sets], probe_seed)

    # ------------------------------------------------------------------
    # support / optimization oracles

    def support(self, phi) -> tuple[float, np.ndarray]:
        """Weighted support value and a maximizer (which lies in the body)."""
        phi = np.asarray(phi, dtype=float)
        if not np.all(np.isfinite(phi)):
            raise DomainError("non-finite direction")
        value = 0.0
        point = np.zeros(self.dim)
        for (s, w) in self.entries:
            v, p = s.support(phi)
            value += w * v
            point += w * p
        return value, point

    def support_batch(self, Phi: np.ndarray):
        vals = np.zeros(Phi.shape[0])
        pts = np.zeros((Phi.shape[0], self.dim))
        for (s, w) in self.entries:
            v, p = s.support_batch(Phi)
            vals += w * v
            pts += w * p
        return vals, pts

    def argmax_components(self, phi, lex: bool = True) -> np.ndarray:
        return np.array([s.support_value_point(phi, lex=lex)[1] for s, _ in self.entries])

    def optimize(self, c, sense: str = "max") -> np.ndarray:
        """Extreme point maximizing (or minimizing) <c, y> over the body."""
        c = np.asarray(c, dtype=float)
        if not np.all(np.isfinite(c)):
            raise DomainError("non-finite objective")
        phi = c if sense == "max" else -c
        comps = self.argmax_components(phi, lex=True)
        return self._weights @ comps

    def vertex(self, c) -> Vertex:
        comps = self.argmax_components(np.asarray(c, dtype=float), lex=True)
        return Vertex(point=self._weights @ comps, components=comps,
                      direction=np.asarray(c, dtype=float))

    # ------------------------------------------------------------------
    # affine hull

    def _build_affine_hull(self, probe_seed: int) -> None:
        d = self.dim
        rng = stream(probe_seed, d)
        pts = []
        for _ in range(d):
            u = rng.standard_normal(d)
            u /= np.linalg.norm(u)
            for sgn in (1.0, -1.0):
                pts.append(self.support(sgn * u)[1])
        pts = np.array(pts)
        for _ in range(d + 1):
            o = pts.mean(axis=0)
            B = _row_space(pts - o, _HULL_TOL * max(1.0, np.abs(pts).max()))
            comp = _complement(B, d)
            grew = False
            for w in comp.T:
                for sgn in (1.0, -1.0):
                    v = self.support(sgn * w)[1]
                    if abs((sgn * w) @ (v - o)) > _HULL_TOL * max(1.0, np.abs(pts).max()):
                        pts = np.vstack([pts, v])
                        grew = True
            if not grew:
                break
        self.origin = pts.mean(axis=0)
        self.basis = _row_space(pts - self.origin,
                                _HULL_TOL * max(1.0, np.abs(pts).max()))
        self.hull_dim = self.basis.shape[1]
        self.interior_point = self.origin      # mean of probe vertices: in relint
        self.scale = max(1.0, float(np.linalg.norm(pts - self.origin, axis=1).max()))

    def to_hull(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin) @ self.basis

    def to_ambient(self, z: np.ndarray) -> np.ndarray:
        return self.origin + np.asarray(z, dtype=float) @ self.basis.T

    def hull_residual(self, x: np.ndarray) -> float:
        """Distance from x to the affine hull."""
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.to_ambient(self.to_hull(x))))

    # ------------------------------------------------------------------
    # facet cache

    def _build_facets(self) -> None:
        self.facet_rows = None
        self.facet_offs = None
        r = self.hull_dim
        if r == 0:
            self.facet_rows = np.zeros((0, 0))
            self.facet_offs = np.zeros(0)
            return
        if len(self.entries) == 1:
            s, w = self.entries[0]
            if not s.is_finite:
                self._facets_from_hrep(s)
                return
            self._facets_from_points(s.points * w if w != 1.0 else s.points)
            return
        if self._all_finite:
            counts = [s.points.shape[0] for s, _ in self.entries]
            prod = 1
            for k in counts:
                prod *= k
                if prod > _ENUM_CAP:
                    return
            pts = np.zeros((1, self.dim))
            for (s, w) in self.entries:
                pts = (pts[:, None, :] + w * s.points[None, :, :]).reshape(-1, self.dim)
            self._facets_from_points(pts)

    def _facets_from_points(self, pts: np.ndarray) -> None:
        z = (pts - self.origin) @ self.basis
        r = self.hull_dim
        if r == 1:
            zz = z[:, 0]
            self.facet_rows = np.array([[1.0], [-1.0]])
            self.facet_offs = np.array([zz.max(), -zz.min()])
            return
        try:
            hull = ConvexHull(z)
        except QhullError:
            return
        eq = hull.equations
        self.facet_rows = eq[:, :r]
        self.facet_offs = -eq[:, r]

    def _facets_from_hrep(self, s: ActionSet) -> None:
        w = self.entries[0][1]
        # body = w * {x : N x <= b}; substitute x = (origin + B z) / w
        N = s.normals
        b = w * s.offsets - N @ self.origin
        rows = N @ self.basis
        norms = np.linalg.norm(rows, axis=1)
        keep = norms > 1e-12 * np.maximum(1.0, np.linalg.norm(N, axis=1))
        if np.any(b[~keep] < -TAU_GEO * self.scale):
            raise OracleInconsistency("hull origin violates a hull-orthogonal constraint")
        rows, b, norms = rows[keep], b[keep], norms[keep]
        self.facet_rows = rows / norms[:, None]
        self.facet_offs = b / norms

    @property
    def has_facets(self) -> bool:
        return self.facet_rows is not None

    # ------------------------------------------------------------------
    # membership / separation

    def facet_gap(self, X: np.ndarray) -> np.ndarray:
        """Signed hull-coordinate infeasibility (<=0 inside) for query rows.
        Requires the facet cache; ambient inputs."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = (X - self.origin) @ self.basis
        resid = np.linalg.norm(X - (self.origin + Z @ self.basis.T), axis=1)
        if self.facet_rows.shape[0] == 0:
            return resid
        gap = (Z @ self.facet_rows.T - self.facet_offs).max(axis=1)
        return np.maximum(gap, resid)

    def contains(self, x, tol: float = TAU_GEO) -> bool:
        x = np.asarray(x, dtype=float)
        if self.hull_residual(x) > tol * self.scale:
            return False
        if self.has_facets:
            return bool(self.facet_gap(x[None])[0] <= tol * self.scale)
        gap, _ = self._membership_lp(x)
        return gap <= tol * self.scale

    def _membership_lp(self, x: np.ndarray):
        """Exact l-inf distance-style membership: returns (gap, certificate).

        gap <= 0 (numerically ~0) iff x is in the body; otherwise certificate
        is an ambient direction phi (not normalized) with <phi,x> - h(phi) > 0.
        """
        d = self.dim
        blocks = []
        bounds = []
        eq_rows = []
        eq_rhs = []
        col = 0
        combo_cols = []
        for (s, w) in self.entries:
            if s.is_finite:
                k = s.points.shape[0]
                combo_cols.append((col, w * s.points.T))   # d x k
                eq = np.zeros(0)
                eq_rows.append(("simplex", col, k))
                bounds += [(0, None)] * k
                col += k
            else:
                combo_cols.append((col, w * np.eye(d)))
                eq_rows.append(("hset", col, s))
                bounds += [(None, None)] * d
                col += d
        t_col = col
        bounds.append((0, None))
        n_var = col + 1
        # residual rows: +(combo) - t <= x ; -(combo) - t <= -x
        A_ub = []
        b_ub = []
        up = np.zeros((d, n_var))
        for c0, M in combo_cols:
            up[:, c0:c0 + M.shape[1]] = M
        up[:, t_col] = -1.0
        A_ub.append(up)
        b_ub.append(x)
        dn = -up.copy()
        dn[:, t_col] = -1.0
        A_ub.append(dn)
        b_ub.append(-x)
        A_eq = []
        b_eq = []
        for kind, c0, info in eq_rows:
            if kind == "simplex":
                row = np.zeros(n_var)
                row[c0:c0 + info] = 1.0
                A_eq.append(row)
                b_eq.append(1.0)
            else:
                s = info
                block = np.zeros((s.normals.shape[0], n_var))
                block[:, c0:c0 + d] = s.normals
                A_ub.append(block)
                b_ub.append(s.offsets)
        cvec = np.zeros(n_var)
        cvec[t_col] = 1.0
        res = linprog(cvec, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub),
                      A_eq=np.array(A_eq) if A_eq else None,
                      b_eq=np.array(b_eq) if b_eq else None,
                      bounds=bounds, method="highs")
        if res.status != 0:
            raise OracleInconsistency(f"membership LP failed (status {res.status})")
        gap = float(res.fun)
        marg = res.ineqlin.marginals
        phi = -(marg[:d] - marg[d:2 * d])
        return gap, phi

    def separate(self, x, certify: bool = True, iters: int | None = None) -> SeparationResult:
        """Membership verdict with a separating certificate when outside.

        Projected supergradient ascent of g(phi) = <phi,x> - h(phi) over the
        unit ball; Inside verdicts are confirmed against the exact membership
        test, whose dual supplies the direction if the ascent under-resolved.
        """
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite query point")
        res = self.separate_batch(x[None], certify=certify, iters=iters)
        return res[0]

    def separate_batch(self, X: np.ndarray, certify: bool = True,
                       iters: int | None = None) -> list[SeparationResult]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = X.shape[0]
        if iters is None:
            iters = 500 * self.dim
        Phi = X - self.interior_point
        norms = np.linalg.norm(Phi, axis=1, keepdims=True)
        Phi = np.where(norms > 1e-30, Phi / np.maximum(norms, 1e-30), 0.0)
        best_g = np.full(m, -np.inf)
        best_phi = Phi.copy()
        for k in range(1, iters + 1):
            vals, pts = self.support_batch(Phi)
            g = np.einsum("ij,ij->i", Phi, X) - vals
            upd = g > best_g
            best_g[upd] = g[upd]
            best_phi[upd] = Phi[upd]
            grad = X - pts
            gn = np.linalg.norm(grad, axis=1, keepdims=True)
            Phi = Phi + grad / (np.sqrt(k) * np.maximum(gn, 1e-30))
            pn = np.linalg.norm(Phi, axis=1, keepdims=True)
            Phi = np.where(pn > 1.0, Phi / np.maximum(pn, 1e-30), Phi)
        # normalize certificates; positive homogeneity only improves margins
        bn = np.linalg.norm(best_phi, axis=1, keepdims=True)
        best_phi = np.where(bn > 1e-30, best_phi / np.maximum(bn, 1e-30), best_phi)
        vals, _ = self.support_batch(best_phi)
        margins = np.einsum("ij,ij->i", best_phi, X) - vals
        out: list[SeparationResult] = []
        tol = TAU_GEO * self.scale
        for i in range(m):
            if margins[i] > tol:
                out.append(SeparationResult(False, best_phi[i], float(margins[i])))
            elif not certify:
                out.append(SeparationResult(True))
            else:
                out.append(self._certified_verdict(X[i], best_phi[i], margins[i]))
        return out

    def _certified_verdict(self, x, phi_hint, margin_hint) -> SeparationResult:
        tol = TAU_GEO * self.scale
        if self.has_facets:
            gap = float(self.facet_gap(x[None])[0])
            if gap <= tol:
                return SeparationResult(True)
        gap, phi = self._membership_lp(x)
        if gap <= tol:
            return SeparationResult(True)
        nrm = np.linalg.norm(phi)
        if nrm > 1e-30:
            phi = phi / nrm
            v, _ = self.support(phi)
            m = float(phi @ x - v)
            if m > 0:
                return SeparationResult(False, phi, m)
        if margin_hint > 0:
            return SeparationResult(False, phi_hint, float(margin_hint))
        raise OracleInconsistency(
            "membership LP reports exterior but no separating direction was recovered")

    # ------------------------------------------------------------------
    # chords (hull coordinates)

    def chord_batch(self, Z: np.ndarray, U: np.ndarray):
        """Per-row [lo, hi] with Z + t U inside the body; facet cache required."""
        if not self.has_facets or self.facet_rows.shape[0] == 0:
            raise OracleInconsistency("chord_batch requires a facet cache")
        RU = U @ self.facet_rows.T                     # (m, nrows)
        slack = self.facet_offs - Z @ self.facet_rows.T
        slack = np.maximum(slack, 0.0)
        big = 1e30
        pos = RU > 1e-14
        neg = RU < -1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(pos | neg, slack / np.where(RU == 0, 1, RU), np.nan)
        hi = np.where(pos, ratio, big).min(axis=1)
        lo = np.where(neg, ratio, -big).max(axis=1)
        if np.any(hi >= big) or np.any(lo <= -big):
            raise OracleInconsistency("unbounded chord in a bounded body")
        return lo, hi

    def chord(self, z: np.ndarray, u: np.ndarray):
        """Chord through hull-coordinate point z along u; exact.

        With a facet cache this is a closed-form ray/facet intersection.
        Otherwise a pair of LPs on the Minkowski structure; each also reports
        a supporting direction (hull coords) at its endpoint.
        Returns (lo, hi, dir_lo, dir_hi); directions are None on the cached path.
        """
        if self.has_facets and self.facet_rows.shape[0] > 0:
            lo, hi = self.chord_batch(z[None], u[None])
            return float(lo[0]), float(hi[0]), None, None
        hi, dhi = self._chord_lp(z, u)
        lo, dlo = self._chord_lp(z, -u)
        return -lo, hi, (dlo if dlo is None else -dlo), dhi

    def _chord_lp(self, z: np.ndarray, u: np.ndarray):
        d = self.dim
        x0 = self.to_ambient(z)
        du = self.basis @ u
        bounds = []
        col = 0
        combos = []
        eq_extra = []
        for (s, w) in self.entries:
            if s.is_finite:
                k = s.points.shape[0]
                combos.append((col, w * s.points.T))
                eq_extra.append(("simplex", col, k))
                bounds += [(0, None)] * k
                col += k
            else:
                combos.append((col, w * np.eye(d)))
                eq_extra.append(("hset", col, s))
                bounds += [(None, None)] * d
                col += d
        t_col = col
        bounds.append((None, None))
        n_var = col + 1
        Aeq = np.zeros((d, n_var))
        for c0, M in combos:
            Aeq[:, c0:c0 + M.shape[1]] = M
        Aeq[:, t_col] = -du
        beq = x0.copy()
        eq_rows = [Aeq]
        eq_rhs = [beq]
        A_ub = []
        b_ub = []
        for kind, c0, info in eq_extra:
            if kind == "simplex":
                row = np.zeros(n_var)
                row[c0:c0 + info] = 1.0
                eq_rows.append(row[None])
                eq_rhs.append(np.array([1.0]))
            else:
                s = info
                blk = np.zeros((s.normals.shape[0], n_var))
                blk[:, c0:c0 + d] = s.normals
                A_ub.append(blk)
                b_ub.append(s.offsets)
        cvec = np.zeros(n_var)
        cvec[t_col] = -1.0   # maximize t
        res = linprog(cvec,
                      A_ub=np.vstack(A_ub) if A_ub else None,
                      b_ub=np.concatenate(b_ub) if A_ub else None,
                      A_eq=np.vstack(eq_rows), b_eq=np.concatenate(eq_rhs),
                      bounds=bounds, method="highs")
        if res.status != 0:
            raise OracleInconsistency(f"chord LP failed (status {res.status})")
        t = float(-res.fun)
        lam = res.eqlin.marginals[:d]
        phi = self.basis.T @ lam
        nrm = np.linalg.norm(phi)
        direction = None
        if nrm > 1e-12:
            phi = phi / nrm
            # orient so the exit point attains the support value in direction phi
            zt = z + t * u
            if abs(self._hull_support(phi) - zt @ phi) > \
                    abs(self._hull_support(-phi) - zt @ (-phi)):
                phi = -phi
            direction = phi
        return t, direction

    def to_ambient_dir(self, u_hull: np.ndarray) -> np.ndarray:
        return self.basis @ u_hull

    def _hull_support(self, u_hull: np.ndarray) -> float:
        _, p = self.support(self.basis @ u_hull)
        return float(self.to_hull(p) @ u_hull)

    # ------------------------------------------------------------------

    def project_inside(self, x: np.ndarray, tol: float = TAU_GEO,
                       max_iter: int = 200):
        """Pull x onto the body along the segment toward the relative-interior
        point (bisection on membership). Returns (point, moved_flag)."""
        x = np.asarray(x, dtype=float)
        if self.contains(x, tol):
            return x, False
        lo, hi = 0.0, 1.0   # s=0 -> interior point, s=1 -> x
        if not self.contains(self.interior_point, max(tol, 1e-7)):
            raise OracleInconsistency("relative-interior point fails membership")
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if self.contains(self.interior_point + mid * (x - self.interior_point), tol):
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        return self.interior_point + lo * (x - self.interior_point), True


def _row_space(M: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (columns) of the row space of M, rank-revealed at tol."""
    if M.size == 0:
        return np.zeros((M.shape[1] if M.ndim == 2 else 0, 0))
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > tol))
    return vt[:r].T


def _complement(B: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of span(B)."""
    if B.shape[1] == 0:
        return np.eye(d)
    q, _ = np.linalg.qr(np.hstack([B, np.eye(d)]))
    return q[:, B.shape[1]:d]
