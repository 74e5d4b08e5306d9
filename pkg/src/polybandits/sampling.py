"""Hit-and-run sampling of log-linear densities on oracle polytopes.

Target density on the body:  q(y) ∝ exp(-<y, v>) restricted to the polytope,
which in affine-hull coordinates z (y = origin + B z) is exp(-<z, B^T v>) up
to a constant. Each chain step draws a random direction, intersects the chord
with the facet cache (closed form; LP fallback without a cache), and samples
the exact 1-D truncated exponential along the chord.

Chains advance in lockstep, stored chain-contiguous (hull_dim, n_chains) so
the chord slopes are BLAS matmuls; the masked chord reductions run in a small
numba kernel and the inverse-CDF sampling in vectorized numpy.
"""

from __future__ import annotations

import numpy as np

from .util import OracleInconsistency, fast_stream

_DIR_EPS = 1e-13

try:
    import numba

    @numba.njit(cache=True, fastmath=True)
    def _chord_minmax(slack, RU, lo, hi):
        m, n = RU.shape
        for i in range(n):
            lo[i] = -np.inf
            hi[i] = np.inf
        for q in range(m):
            for i in range(n):
                s = slack[q, i]
                if s < 0.0:
                    s = 0.0
                a = RU[q, i]
                if a > _DIR_EPS:
                    t = s / a
                    if t < hi[i]:
                        hi[i] = t
                elif a < -_DIR_EPS:
                    t = s / a
                    if t > lo[i]:
                        lo[i] = t

    @numba.njit(cache=True, fastmath=True)
    def _chord_apply(Z, slack, U, RU, t):
        m = RU.shape[0]
        r = Z.shape[0]
        n = Z.shape[1]
        for j in range(r):
            for i in range(n):
                Z[j, i] += t[i] * U[j, i]
        for q in range(m):
            for i in range(n):
                slack[q, i] -= t[i] * RU[q, i]

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - numba is present in the supported env
    _HAVE_NUMBA = False

    def _chord_minmax(slack, RU, lo, hi):
        s = np.maximum(slack, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = s / RU
        np.copyto(hi, np.where(RU > _DIR_EPS, ratio, np.inf).min(axis=0))
        np.copyto(lo, np.where(RU < -_DIR_EPS, ratio, -np.inf).max(axis=0))

    def _chord_apply(Z, slack, U, RU, t):
        Z += t * U
        slack -= t * RU


def default_burn_in(hull_dim: int) -> int:
    return 100 * max(hull_dim, 1)


def default_thinning(hull_dim: int) -> int:
    return 10 * max(hull_dim, 1)


def truncated_exp(lo, hi, rate, xi):
    """Inverse-CDF samples of density ∝ exp(-rate*t) on [lo, hi], vectorized.

    Stable for any sign/magnitude of rate*(hi-lo); rate ~ 0 degrades to uniform.
    """
    lo = np.asarray(lo, dtype=float)
    delta = np.asarray(hi, dtype=float) - lo
    a = np.asarray(rate, dtype=float) * delta
    aa = np.abs(a)
    s = np.expm1(-aa)
    s *= xi
    np.log1p(s, out=s)
    s *= delta
    s /= -np.where(aa < 1e-12, 1.0, aa)
    s = np.where(aa < 1e-12, xi * delta, s)
    s = np.where(a < 0, delta - s, s)
    np.clip(s, 0.0, delta, out=s)
    s += lo
    return s


class ChainPool:
    """Persistent lockstep hit-and-run chains on one polytope."""

    def __init__(self, poly, n_chains: int, lp_fallback: bool = True):
        self.poly = poly
        self.n = n_chains
        self.r = poly.hull_dim
        self.lp_fallback = lp_fallback
        self._rows = None
        if poly.has_facets and self.r > 0:
            self._rows = np.ascontiguousarray(poly.facet_rows)
            self._offs = poly.facet_offs.copy()
        self._lo = np.empty(n_chains)
        self._hi = np.empty(n_chains)
        self._rate = np.empty(n_chains)
        self._ru = np.empty((self._rows.shape[0], n_chains)) if self._rows is not None \
            else None
        self.reset()

    def reset(self) -> None:
        z0 = self.poly.to_hull(self.poly.interior_point)
        self.Z = np.tile(z0[:, None], (1, self.n))      # (r, n)

    def advance(self, exponent_ambient: np.ndarray, steps: int, stream_path) -> None:
        if self.r == 0 or steps <= 0:
            return
        rng = fast_stream(*stream_path)
        c = self.poly.basis.T @ np.asarray(exponent_ambient, dtype=float)
        xis = rng.random((steps, self.n))
        if self.r == 1:
            dirs = np.where(rng.random((steps, 1, self.n)) < 0.5, -1.0, 1.0)
        elif self.r == 2:
            # uniform angles; float32 sincos is SIMD and unit-norm to 1e-7
            ang = rng.random((steps, self.n), dtype=np.float32)
            ang *= np.float32(2 * np.pi)
            dirs = np.empty((steps, 2, self.n))
            dirs[:, 0, :] = np.cos(ang)
            dirs[:, 1, :] = np.sin(ang)
        else:
            dirs = rng.standard_normal((steps, self.r, self.n),
                                       dtype=np.float32).astype(np.float64)
            nrm = np.linalg.norm(dirs, axis=1, keepdims=True)
            bad = nrm < 1e-12
            if np.any(bad):         # exact-zero f32 draws are rare but possible
                np.copyto(nrm, 1.0, where=bad)
                dirs[:, 0:1, :] = np.where(bad, 1.0, dirs[:, 0:1, :])
            dirs /= nrm
        if self._rows is not None:
            self._advance_facets(c, dirs, xis)
        elif self.lp_fallback:
            self._advance_lp(c, dirs, xis)
        else:
            raise OracleInconsistency("no facet cache and LP fallback disabled")

    def _advance_facets(self, c, dirs, xis) -> None:
        Z = self.Z
        rows = self._rows
        slack = self._offs[:, None] - rows @ Z        # resync from state
        lo, hi, rate = self._lo, self._hi, self._rate
        RU = self._ru
        for k in range(dirs.shape[0]):
            U = dirs[k]                                # (r, n)
            np.matmul(rows, U, out=RU)
            _chord_minmax(slack, RU, lo, hi)
            if np.isinf(hi.max()) or np.isinf(-lo.min()):
                raise OracleInconsistency("unbounded chord during sampling")
            np.matmul(c, U, out=rate)
            t = truncated_exp(lo, hi, rate, xis[k])
            _chord_apply(Z, slack, U, RU, t)
        if not np.all(np.isfinite(Z)):
            raise OracleInconsistency("non-finite chain state after advance")
        self.Z = Z

    def _advance_lp(self, c, dirs, xis) -> None:
        for k in range(dirs.shape[0]):
            for i in range(self.n):
                u = dirs[k, :, i]
                lo, hi, _, _ = self.poly.chord(self.Z[:, i], u)
                t = truncated_exp(np.array([lo]), np.array([hi]),
                                  np.array([u @ c]), np.array([xis[k, i]]))[0]
                self.Z[:, i] = self.Z[:, i] + t * u

    def states_hull(self) -> np.ndarray:
        return self.Z.T.copy()                         # (n, r)

    def states_ambient(self) -> np.ndarray:
        return self.poly.origin + self.Z.T @ self.poly.basis.T


def sample_log_linear(poly, exponent_ambient, m: int, seed_path,
                      burn_in: int | None = None, thinning: int | None = None,
                      n_chains: int | None = None) -> np.ndarray:
    """Approximate i.i.d. samples (ambient coordinates) of the log-linear
    density ∝ exp(-<y, exponent>) on the body: fresh chains, burn_in discarded,
    every `thinning`-th state retained per chain."""
    r = poly.hull_dim
    if r == 0:
        return np.tile(poly.interior_point, (m, 1))
    burn_in = default_burn_in(r) if burn_in is None else burn_in
    thinning = default_thinning(r) if thinning is None else thinning
    n_chains = min(m, 500) if n_chains is None else min(m, n_chains)
    per_chain = -(-m // n_chains)
    pool = ChainPool(poly, n_chains)
    out = np.empty((n_chains * per_chain, poly.dim))
    pool.advance(exponent_ambient, burn_in, (*seed_path, 0))
    for j in range(per_chain):
        pool.advance(exponent_ambient, thinning, (*seed_path, j + 1))
        out[j * n_chains:(j + 1) * n_chains] = pool.states_ambient()
    return out[:m]
