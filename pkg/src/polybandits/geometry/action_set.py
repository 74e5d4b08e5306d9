"""Action sets: finite point lists or bounded H-polytopes, plus their wire format.

A set is either `points` (K x d vertices-or-not, the learner never assumes
minimality) or `normals`/`offsets` giving {x : normals @ x <= offsets}. H-rep
sets are validated non-empty and bounded at construction; both kinds enforce a
configured Euclidean radius bound.

The text format is line-oriented and uses hex floats, so a write/read
round-trip is bit-exact.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from ..util import InvariantViolation
from .simplex import INFEASIBLE, OPTIMAL, solve_lp_max

DEFAULT_RADIUS_BOUND = 1e6
_LEX_SLACK = 1e-12


@dataclass
class ActionSet:
    dim: int
    points: np.ndarray | None = None
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None
    radius_bound: float = DEFAULT_RADIUS_BOUND
    box: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @staticmethod
    def from_points(points, radius_bound: float = DEFAULT_RADIUS_BOUND) -> "ActionSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float)) + 0.0  # -0.0 -> +0.0
        if pts.size == 0:
            raise InvariantViolation("empty action set")
        if not np.all(np.isfinite(pts)):
            raise InvariantViolation("non-finite point coordinates")
        norms = np.linalg.norm(pts, axis=1)
        if norms.max() > radius_bound * (1 + 1e-12):
            raise InvariantViolation(
                f"point norm {norms.max():.6g} exceeds radius bound {radius_bound:.6g}")
        a = ActionSet(dim=pts.shape[1], points=pts, radius_bound=radius_bound)
        a.box = (pts.min(axis=0), pts.max(axis=0))
        return a

    @staticmethod
    def from_halfspaces(normals, offsets,
                        radius_bound: float = DEFAULT_RADIUS_BOUND) -> "ActionSet":
        N = np.atleast_2d(np.asarray(normals, dtype=float)) + 0.0
        b = np.atleast_1d(np.asarray(offsets, dtype=float)) + 0.0
        if not (np.all(np.isfinite(N)) and np.all(np.isfinite(b))):
            raise InvariantViolation("non-finite constraint data")
        d = N.shape[1]
        a = ActionSet(dim=d, normals=N, offsets=b, radius_bound=radius_bound)
        lo = np.empty(d)
        hi = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            for sign, dest in ((1.0, hi), (-1.0, lo)):
                r = solve_lp_max(sign * e, A_ub=N, b_ub=b)
                if r.status == INFEASIBLE:
                    raise InvariantViolation("empty H-rep action set")
                if r.status != OPTIMAL:
                    raise InvariantViolation(
                        "unbounded H-rep action set (bounded-set precondition failed)")
                dest[j] = sign * r.value
        a.box = (lo, hi)
        corner = np.maximum(np.abs(lo), np.abs(hi))
        if np.linalg.norm(corner) > radius_bound * (1 + 1e-12):
            raise InvariantViolation("H-rep action set exceeds radius bound (box estimate)")
        return a

    @property
    def is_finite(self) -> bool:
        return self.points is not None

    # -- per-set linear optimization -------------------------------------

    def support(self, phi: np.ndarray) -> tuple[float, np.ndarray]:
        """max_{x in conv(set)} <phi, x> and a maximizing point (lex tie-break)."""
        return self.support_value_point(phi, lex=False)

    def support_value_point(self, phi: np.ndarray, lex: bool = False):
        if self.is_finite:
            vals = self.points @ phi
            vmax = float(vals.max())
            cand = np.where(vals >= vmax - _LEX_SLACK * (1.0 + abs(vmax)))[0]
            pick = cand[_lex_largest(self.points[cand])]
            return vmax, self.points[pick]
        return self._support_hrep(phi, lex=lex)

    def _support_hrep(self, phi: np.ndarray, lex: bool):
        r = solve_lp_max(phi, A_ub=self.normals, b_ub=self.offsets)
        if r.status != OPTIMAL:
            raise InvariantViolation("unbounded H-rep subproblem")
        if not lex:
            return float(r.value), r.x
        # Pin the optimal value, then lex-maximize coordinates: the result is
        # the lex-largest vertex of the optimal face.
        A_eq = [phi]
        b_eq = [r.value]
        x = r.x
        d = self.dim
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            rj = solve_lp_max(e, A_ub=self.normals, b_ub=self.offsets,
                              A_eq=np.array(A_eq), b_eq=np.array(b_eq))
            if rj.status != OPTIMAL:
                break
            A_eq.append(e)
            b_eq.append(rj.value)
            x = rj.x
        return float(r.value), x

    def support_batch(self, Phi: np.ndarray):
        """Vectorized support values+points for many directions (rows of Phi)."""
        if self.is_finite:
            vals = Phi @ self.points.T            # (m, K)
            idx = np.argmax(vals, axis=1)
            vmax = vals[np.arange(len(idx)), idx]
            return vmax, self.points[idx]
        out_v = np.empty(Phi.shape[0])
        out_x = np.empty((Phi.shape[0], self.dim))
        for i, phi in enumerate(Phi):
            out_v[i], out_x[i] = self._support_hrep(phi, lex=False)
        return out_v, out_x

    def argmin_point(self, phi: np.ndarray) -> np.ndarray:
        """Lex tie-broken minimizer of <a, phi>; a vertex for H-rep sets."""
        _, x = self.support_value_point(-phi, lex=True)
        return x

    # -- identity ---------------------------------------------------------

    def canonical_key(self) -> bytes:
        if self.is_finite:
            order = np.lexsort(self.points.T[::-1])
            return b"P" + self.points[order].tobytes() + self.dim.to_bytes(4, "little")
        rows = np.hstack([self.normals, self.offsets[:, None]])
        order = np.lexsort(rows.T[::-1])
        return b"H" + rows[order].tobytes() + self.dim.to_bytes(4, "little")


def _lex_largest(pts: np.ndarray) -> int:
    """Index of the lexicographically largest row (first coordinate primary)."""
    if pts.shape[0] == 1:
        return 0
    return int(np.lexsort(pts.T[::-1])[-1])


# -- serialization ---------------------------------------------------------
#
#   polyset v1
#   dim 2
#   [round 17]
#   set points 3 [weight 0x1.0p-1]
#   0x1.8p-1 0x1.0p+0
#   ...
#   set hrep 4 [weight ...]       (rows carry d normal components then offset)


def _hex(x: float) -> str:
    return float(x).hex()


def write_action_sets(f, sets, weights=None, rounds=None) -> None:
    own = isinstance(f, (str,))
    fh = open(f, "w") if own else f
    try:
        fh.write("polyset v1\n")
        fh.write(f"dim {sets[0].dim}\n")
        for i, s in enumerate(sets):
            if rounds is not None:
                fh.write(f"round {rounds[i]}\n")
            tag = "points" if s.is_finite else "hrep"
            n = s.points.shape[0] if s.is_finite else s.normals.shape[0]
            head = f"set {tag} {n}"
            if weights is not None:
                head += f" weight {_hex(weights[i])}"
            fh.write(head + "\n")
            rows = s.points if s.is_finite else np.hstack([s.normals, s.offsets[:, None]])
            for row in rows:
                fh.write(" ".join(_hex(v) for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_action_sets(f, radius_bound: float = DEFAULT_RADIUS_BOUND):
    """Returns (sets, weights_or_None, rounds_or_None)."""
    own = isinstance(f, (str,))
    fh = open(f) if own else f
    try:
        lines = [ln.rstrip("\n") for ln in fh]
    finally:
        if own:
            fh.close()
    it = iter(lines)
    if next(it, "").strip() != "polyset v1":
        raise ValueError("not a polyset v1 file")
    head = next(it, "").split()
    if len(head) != 2 or head[0] != "dim":
        raise ValueError("missing dim header")
    d = int(head[1])
    sets, weights, rounds = [], [], []
    cur_round = None
    saw_weight = saw_round = False
    for ln in it:
        tok = ln.split()
        if not tok:
            continue
        if tok[0] == "round":
            cur_round = int(tok[1])
            saw_round = True
            continue
        if tok[0] != "set":
            raise ValueError(f"unexpected line: {ln!r}")
        kind, n = tok[1], int(tok[2])
        w = None
        if len(tok) >= 5 and tok[3] == "weight":
            w = float.fromhex(tok[4])
            saw_weight = True
        rows = np.array([[float.fromhex(v) for v in next(it).split()] for _ in range(n)])
        if kind == "points":
            if rows.shape[1] != d:
                raise ValueError("point row width mismatch")
            sets.append(ActionSet.from_points(rows, radius_bound))
        elif kind == "hrep":
            if rows.shape[1] != d + 1:
                raise ValueError("hrep row width mismatch")
            sets.append(ActionSet.from_halfspaces(rows[:, :d], rows[:, d], radius_bound))
        else:
            raise ValueError(f"unknown set kind {kind!r}")
        weights.append(w)
        rounds.append(cur_round)
    return (sets,
            weights if saw_weight else None,
            rounds if saw_round else None)


def dumps_action_sets(sets, weights=None, rounds=None) -> str:
    buf = io.StringIO()
    write_action_sets(buf, sets, weights, rounds)
    return buf.getvalue()


def loads_action_sets(text: str, radius_bound: float = DEFAULT_RADIUS_BOUND):
    return read_action_sets(io.StringIO(text), radius_bound)
