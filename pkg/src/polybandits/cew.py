"""Clipped continuous exponential weights over an oracle polytope, robust to a
known feedback bias level.

Per round t, with S = sum of adjusted loss estimates so far:

  q_t ∝ exp(-eta <y, S>) on the body;  x_t, Sigma_t = mean/covariance of q_t
  qhat_t = q_t restricted to the ellipsoid |y - x_t|^2_{Sigma_t^-1} <= d gamma^2
  play y_t ~ qhat_t, observe c_t in [0,1]
  theta_t = (beta I + Sigmahat_t)^{-1} (y_t - x_t) c_t
  bonus_t = mult * eta * (bias + 1/T^2) * S          (so bonus_1 = 0)
  S += theta_t - bonus_t

Moments are Monte-Carlo over a pool of persistent hit-and-run chains advanced
`thinning` steps per round (`burn_in` at round 1); the clipped draw is
rejection from the same pool, and Sigmahat_t is the covariance of the accepted
subset centered at x_t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import ChainPool, default_burn_in, default_thinning, sample_log_linear
from .util import DomainError, InvariantViolation, OracleInconsistency, SAMPLER, check_finite

_EIG_FLOOR = 1e-12


def default_gamma(d: int, T: int) -> float:
    return 10.0 * math.log(10.0 * d * T)


def default_eta(d: int, T: int, gamma: float) -> float:
    return min(1.0 / (d * gamma * gamma),
               math.sqrt(math.log(max(T, 2)) / (gamma * gamma * T)))


def default_beta(d: int, T: int) -> float:
    return d ** -2 * T ** -4.0


def default_sample_count(d: int) -> int:
    return max(4000, 50 * d * d)


@dataclass
class CEWConfig:
    T: int
    dim: int
    epsilon: float = 0.0
    gamma: float | None = None
    eta: float | None = None
    beta: float | None = None
    M: int | None = None
    burn_in: int | None = None
    thinning: int | None = None
    pool_steps: int | None = None     # chain steps per round; default = thinning
    bonus_multiplier: float = 8.0
    seed: int = 0

    def resolved(self, hull_dim: int) -> "CEWParams":
        d, T = self.dim, self.T
        gamma = self.gamma if self.gamma is not None else default_gamma(d, T)
        eta = self.eta if self.eta is not None else default_eta(d, T, gamma)
        beta = self.beta if self.beta is not None else default_beta(d, T)
        M = self.M if self.M is not None else default_sample_count(d)
        burn_in = self.burn_in if self.burn_in is not None else default_burn_in(hull_dim)
        thinning = self.thinning if self.thinning is not None else default_thinning(hull_dim)
        pool_steps = self.pool_steps if self.pool_steps is not None else thinning
        if min(gamma, eta, beta, M, T, pool_steps) <= 0 or self.epsilon < 0:
            raise InvariantViolation("CEW parameters must be positive (epsilon >= 0)")
        if eta > 1.0 / (d * gamma * gamma) * (1 + 1e-12):
            raise InvariantViolation(
                f"eta={eta:.3g} violates eta <= 1/(d gamma^2) = {1.0/(d*gamma*gamma):.3g}")
        if M < 10 * d * d:
            raise InvariantViolation("sample count below the 10 d^2 moment floor")
        return CEWParams(T=T, dim=d, epsilon=self.epsilon, gamma=gamma, eta=eta,
                         beta=beta, M=M, burn_in=burn_in, thinning=thinning,
                         pool_steps=pool_steps,
                         bonus_multiplier=self.bonus_multiplier, seed=self.seed)


@dataclass
class CEWParams:
    T: int
    dim: int
    epsilon: float
    gamma: float
    eta: float
    beta: float
    M: int
    burn_in: int
    thinning: int
    pool_steps: int
    bonus_multiplier: float
    seed: int


@dataclass
class RoundDiagnostics:
    y: np.ndarray
    x: np.ndarray
    acceptance: float
    theta: np.ndarray | None = None
    bonus: np.ndarray | None = None
    theta_norm: float = 0.0
    bonus_norm: float = 0.0
    sandwich_low: float = 0.0     # min eig of (Sigmahat - 0.7 Sigma) in hull coords
    sandwich_high: float = 0.0    # min eig of (1.4 Sigma - Sigmahat)


def estimate_moments(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical mean and symmetrized, eigenvalue-floored covariance."""
    samples = np.asarray(samples, dtype=float)
    m, d = samples.shape
    if m < 10 * d * d:
        raise DomainError(f"need at least 10 d^2 = {10*d*d} samples, got {m}")
    x = samples.mean(axis=0)
    centered = samples - x
    cov = centered.T @ centered / m
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    cov = (V * np.maximum(w, _EIG_FLOOR)) @ V.T
    return x, 0.5 * (cov + cov.T)


def clip_and_draw(samples: np.ndarray, x: np.ndarray, cov: np.ndarray,
                  radius_sq: float):
    """First pool element inside the clipping ellipsoid, plus the clipped-pool
    covariance centered at x. Returns (y, cov_clipped, acceptance, index)."""
    centered = samples - x
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    inv = 1.0 / np.maximum(w, _EIG_FLOOR)
    proj = centered @ V
    d2 = (proj * proj * inv).sum(axis=1)
    accept = d2 <= radius_sq
    n_acc = int(accept.sum())
    if n_acc == 0:
        raise OracleInconsistency("all pool samples rejected by the clip ellipsoid")
    idx = int(np.argmax(accept))
    sub = centered[accept]
    cov_hat = sub.T @ sub / n_acc
    cov_hat = 0.5 * (cov_hat + cov_hat.T)
    return samples[idx], cov_hat, n_acc / len(samples), idx


class ClippedExpWeights:
    """Sequential interface: y = alg.play(); alg.update(c)."""

    def __init__(self, poly, config: CEWConfig):
        self.poly = poly
        self.params = config.resolved(poly.hull_dim)
        if poly.dim != config.dim:
            raise InvariantViolation("config dimension does not match the body")
        self.pool = ChainPool(poly, self.params.M)
        self.t = 1
        self.cum_adjusted = np.zeros(poly.dim)
        self.bonus_vec = np.zeros(poly.dim)           # b_1 = 0 (empty sum)
        self.last: RoundDiagnostics | None = None
        self._pending = False
        self._y = None
        self._x = None
        self._cov_hat_amb = None

    # -- sampling ---------------------------------------------------------

    def exponent(self) -> np.ndarray:
        return self.params.eta * self.cum_adjusted

    def sample_unclipped(self, m: int | None = None) -> np.ndarray:
        """Fresh-chain samples of the current unclipped density (test surface)."""
        m = m or self.params.M
        return sample_log_linear(self.poly, self.exponent(), m,
                                 (self.params.seed, SAMPLER, self.t, 1 << 20),
                                 burn_in=self.params.burn_in,
                                 thinning=self.params.thinning)

    def _pool_hull(self) -> np.ndarray:
        steps = self.params.burn_in if self.t == 1 else self.params.pool_steps
        self.pool.advance(self.exponent(), steps, (self.params.seed, SAMPLER, self.t))
        return self.pool.states_hull()

    # -- one round --------------------------------------------------------

    def play(self) -> np.ndarray:
        if self._pending:
            raise DomainError("play() called twice without update()")
        p = self.params
        S = self._pool_hull()                            # (M, r)
        if self.poly.hull_dim == 0:
            y = self.poly.interior_point.copy()
            self.last = RoundDiagnostics(y=y, x=y.copy(), acceptance=1.0,
                                         sandwich_low=0.0, sandwich_high=0.0)
            self._y, self._x = y, y.copy()
            self._cov_hat_amb = np.zeros((p.dim, p.dim))
            self._pending = True
            return y
        x_h, cov_h = estimate_moments(S)
        radius = p.dim * p.gamma * p.gamma
        y_h, cov_hat_h, acc, _ = clip_and_draw(S, x_h, cov_h, radius)
        B = self.poly.basis
        y = self.poly.to_ambient(y_h)
        x = self.poly.to_ambient(x_h)
        low, high = _sandwich_margins(cov_h, cov_hat_h)
        self.last = RoundDiagnostics(y=y, x=x, acceptance=acc,
                                     sandwich_low=low, sandwich_high=high)
        self._y, self._x = y, x
        self._cov_hat_amb = B @ cov_hat_h @ B.T
        self._pending = True
        check_finite("CEW play", y, x)
        return y

    def bonus(self) -> np.ndarray:
        """Current bonus b_t, maintained by the exact recursion
        b_{t+1} = b_t + mult*eta*(eps + 1/T^2) * (theta_t - b_t)."""
        return self.bonus_vec.copy()

    def update(self, c: float) -> None:
        if not self._pending:
            raise DomainError("update() before play()")
        if not (0.0 <= c <= 1.0) or not np.isfinite(c):
            raise DomainError(f"feedback {c!r} outside [0, 1]")
        p = self.params
        A = p.beta * np.eye(p.dim) + self._cov_hat_amb
        theta = np.linalg.solve(A, (self._y - self._x) * c)
        b = self.bonus_vec
        kappa = p.bonus_multiplier * p.eta * (p.epsilon + 1.0 / p.T ** 2)
        self.cum_adjusted = self.cum_adjusted + (theta - b)
        self.bonus_vec = b + kappa * (theta - b)
        check_finite("CEW update", self.cum_adjusted)
        self.last.theta = theta
        self.last.bonus = b
        self.last.theta_norm = float(np.linalg.norm(theta))
        self.last.bonus_norm = float(np.linalg.norm(b))
        self.t += 1
        self._pending = False


def _sandwich_margins(cov, cov_hat):
    """Min eigenvalues of (cov_hat - 3/4 cov) and (4/3 cov - cov_hat), scaled
    to the 0.7 / 1.4 Monte-Carlo-slack bounds used by the run validators."""
    a = np.linalg.eigvalsh(cov_hat - 0.7 * cov)
    b = np.linalg.eigvalsh(1.4 * cov - cov_hat)
    return float(a.min()), float(b.min())


@dataclass
class CEWTrace:
    y: np.ndarray                 # (T, d)
    c: np.ndarray                 # (T,)
    theta_norm: np.ndarray
    bonus_norm: np.ndarray
    acceptance: np.ndarray
    sandwich_low: np.ndarray
    sandwich_high: np.ndarray
    cum_adjusted_final: np.ndarray = field(default=None)


def run_cew(poly, config: CEWConfig, feedback_fn) -> CEWTrace:
    """Run T rounds; feedback_fn(y, t) must return c in [0, 1]."""
    alg = ClippedExpWeights(poly, config)
    T = alg.params.T
    d = poly.dim
    tr = CEWTrace(y=np.empty((T, d)), c=np.empty(T), theta_norm=np.empty(T),
                  bonus_norm=np.empty(T), acceptance=np.empty(T),
                  sandwich_low=np.empty(T), sandwich_high=np.empty(T))
    for t in range(1, T + 1):
        y = alg.play()
        c = feedback_fn(y, t)
        alg.update(c)
        i = t - 1
        tr.y[i] = y
        tr.c[i] = c
        tr.theta_norm[i] = alg.last.theta_norm
        tr.bonus_norm[i] = alg.last.bonus_norm
        tr.acceptance[i] = alg.last.acceptance
        tr.sandwich_low[i] = alg.last.sandwich_low
        tr.sandwich_high[i] = alg.last.sandwich_high
    tr.cum_adjusted_final = alg.cum_adjusted.copy()
    return tr
