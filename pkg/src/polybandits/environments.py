"""Context distributions, oblivious adversaries, bandit feedback, and exact
comparator/regret oracles.

Adversary sequences are materialized in full before any interaction (consuming
only their own stream), and every distribution validates at construction that
realizable losses stay in [0, 1] for its paired adversary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .geometry import ActionSet
from .geometry.simplex import OPTIMAL, solve_lp_max
from .util import DomainError, InvariantViolation, stream

# ---------------------------------------------------------------------------
# context distributions


class FiniteSupport:
    def __init__(self, sets: list[ActionSet], probs):
        probs = np.asarray(probs, dtype=float)
        if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs <= 0):
            raise InvariantViolation("support probabilities must be positive and sum to 1")
        if len(sets) != len(probs):
            raise InvariantViolation("sets/probs length mismatch")
        self.sets = sets
        self.probs = probs
        self.dim = sets[0].dim

    @property
    def k_bound(self) -> int:
        return max(s.points.shape[0] if s.is_finite else _h_vertex_bound(s)
                   for s in self.sets)

    def draw(self, rng: np.random.Generator) -> ActionSet:
        return self.sets[int(rng.choice(len(self.sets), p=self.probs))]

    def support(self):
        return list(zip(self.sets, self.probs))

    def mean_action(self, phi: np.ndarray) -> np.ndarray:
        """Exact mean action of the linear-classifier policy argmin <a, phi>."""
        out = np.zeros(self.dim)
        for s, p in zip(self.sets, self.probs):
            out += p * s.argmin_point(phi)
        return out

    def mean_actions_batch(self, Phi: np.ndarray) -> np.ndarray:
        out = np.zeros((Phi.shape[0], self.dim))
        for s, p in zip(self.sets, self.probs):
            idx = np.argmin(Phi @ s.points.T, axis=1)
            out += p * s.points[idx]
        return out


class SleepingBasis:
    """Action set = available standard basis vectors; coordinate j is awake
    with probability p[j]; empty draws are rejected (conditional law)."""

    def __init__(self, d: int, availability):
        self.dim = d
        self.p = np.broadcast_to(np.asarray(availability, dtype=float), (d,)).copy()
        if np.all(self.p <= 0):
            raise InvariantViolation("no coordinate can ever be awake")
        self.k_bound = d

    def draw(self, rng: np.random.Generator) -> ActionSet:
        while True:
            awake = rng.random(self.dim) < self.p
            if awake.any():
                return ActionSet.from_points(np.eye(self.dim)[awake])

    def as_finite_support(self) -> FiniteSupport:
        if self.dim > 12:
            raise DomainError("support enumeration is exponential; d too large")
        sets, probs = [], []
        for mask in range(1, 2 ** self.dim):
            bits = np.array([(mask >> j) & 1 for j in range(self.dim)], dtype=bool)
            pr = np.prod(np.where(bits, self.p, 1 - self.p))
            if pr > 0:
                sets.append(ActionSet.from_points(np.eye(self.dim)[bits]))
                probs.append(pr)
        probs = np.array(probs)
        return FiniteSupport(sets, probs / probs.sum())


class MSet:
    """Action set = indicator vectors of all m-subsets of the awake coordinates
    (resampled until at least m are awake). Finite representation when small,
    otherwise the m-set polytope {0 <= x <= awake, sum x = m}."""

    def __init__(self, d: int, m: int, availability, enumerate_cap: int = 64):
        if not (1 <= m <= d):
            raise InvariantViolation("need 1 <= m <= d")
        self.dim = d
        self.m = m
        self.p = np.broadcast_to(np.asarray(availability, dtype=float), (d,)).copy()
        self.enumerate_cap = enumerate_cap
        self.k_bound = math.comb(d, m)

    def draw(self, rng: np.random.Generator) -> ActionSet:
        while True:
            awake = rng.random(self.dim) < self.p
            if awake.sum() >= self.m:
                break
        idx = np.where(awake)[0]
        if math.comb(len(idx), self.m) <= self.enumerate_cap:
            pts = np.zeros((math.comb(len(idx), self.m), self.dim))
            for r, combo in enumerate(combinations(idx, self.m)):
                pts[r, list(combo)] = 1.0
            return ActionSet.from_points(pts, radius_bound=math.sqrt(self.dim))
        d = self.dim
        ub = np.where(awake, 1.0, 0.0)
        normals = np.vstack([np.eye(d), -np.eye(d), np.ones(d), -np.ones(d)])
        offsets = np.concatenate([ub, np.zeros(d), [self.m], [-self.m]])
        return ActionSet.from_halfspaces(normals, offsets,
                                         radius_bound=math.sqrt(self.dim))


class ShortestPathDAG:
    """Source-to-sink chain of stages, each a bundle of parallel edges; actions
    are s-t paths as edge-indicator vectors (one edge per stage). The convex
    hull is a product of simplices: O(d) constraints, prod(stages) paths."""

    def __init__(self, stages, availability: float = 1.0):
        self.stages = [int(k) for k in stages]
        if any(k < 1 for k in self.stages):
            raise InvariantViolation("each stage needs at least one edge")
        self.dim = sum(self.stages)
        self.availability = float(availability)
        self.k_bound = int(np.prod(self.stages))
        self._stage_of = np.repeat(np.arange(len(self.stages)), self.stages)

    def _polytope(self, alive: np.ndarray) -> ActionSet:
        d = self.dim
        n_stage = len(self.stages)
        stage_rows = np.zeros((n_stage, d))
        stage_rows[self._stage_of, np.arange(d)] = 1.0
        rows = np.vstack([np.eye(d), -np.eye(d), stage_rows, -stage_rows])
        offs = np.concatenate([np.where(alive, 1.0, 0.0), np.zeros(d),
                               np.ones(n_stage), -np.ones(n_stage)])
        return ActionSet.from_halfspaces(rows, offs,
                                         radius_bound=math.sqrt(self.dim))

    def draw(self, rng: np.random.Generator) -> ActionSet:
        if self.availability >= 1.0:
            return self._polytope(np.ones(self.dim, dtype=bool))
        while True:
            alive = rng.random(self.dim) < self.availability
            if all(alive[self._stage_of == s].any() for s in range(len(self.stages))):
                return self._polytope(alive)


# ---------------------------------------------------------------------------
# adversaries


@dataclass
class AdversarySequence:
    thetas: np.ndarray                   # (T, d), fixed before interaction
    shift: float = 0.0                   # recorded affine normalization
    scale: float = 1.0
    name: str = "custom"

    def __post_init__(self):
        if not np.all(np.isfinite(self.thetas)):
            raise InvariantViolation("non-finite adversary losses")
        d = self.thetas.shape[1]
        norms = np.linalg.norm(self.thetas, axis=1)
        if norms.max() > math.sqrt(d) * (1 + 1e-9):
            raise InvariantViolation(
                f"adversary norm {norms.max():.4g} exceeds sqrt(d)")

    @property
    def T(self) -> int:
        return self.thetas.shape[0]


def constant_adversary(T: int, theta) -> AdversarySequence:
    theta = np.asarray(theta, dtype=float)
    return AdversarySequence(np.tile(theta, (T, 1)), name="constant")


def piecewise_constant_adversary(T: int, d: int, flips: int, seed: int,
                                 low: float = 0.05, high: float = 0.95) -> AdversarySequence:
    rng = stream(seed, 101)
    blocks = np.array_split(np.arange(T), flips + 1)
    thetas = np.empty((T, d))
    for b in blocks:
        raw = rng.uniform(low, high, size=d)
        thetas[b] = raw / max(1.0, np.linalg.norm(raw) / math.sqrt(d))
    return AdversarySequence(thetas, name=f"piecewise{flips}")


def sinusoidal_adversary(T: int, d: int, seed: int, period: float = 500.0,
                         base: float = 0.5, amplitude: float = 0.4) -> AdversarySequence:
    rng = stream(seed, 102)
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(d)
    v -= (v @ u) * u
    v /= np.linalg.norm(v)
    t = np.arange(T)[:, None]
    thetas = base / math.sqrt(d) + amplitude * (
        np.cos(2 * np.pi * t / period) * u + np.sin(2 * np.pi * t / period) * v)
    thetas /= np.maximum(1.0, np.linalg.norm(thetas, axis=1, keepdims=True) / math.sqrt(d))
    return AdversarySequence(thetas, name="sinusoidal")


def anti_greedy_adversary(T: int, dist, seed: int, pilot_rounds: int = 200,
                          scale: float = 0.9) -> AdversarySequence:
    """Constant loss vector aligned with the mean action of a pre-registered
    pilot (lexicographic-first policy on its own context stream); oblivious
    because the pilot consumes no learner data."""
    rng = stream(seed, 103)
    mean = np.zeros(dist.dim)
    for _ in range(pilot_rounds):
        s = dist.draw(rng)
        mean += s.argmin_point(np.zeros(dist.dim))
    mean /= pilot_rounds
    n = np.linalg.norm(mean)
    theta = scale * mean / n if n > 0 else np.zeros(dist.dim)
    return AdversarySequence(np.tile(theta, (T, 1)), name="anti_greedy")


def loss_range(dist, theta: np.ndarray) -> tuple[float, float]:
    """[min, max] of <a, theta> over every realizable action of the family."""
    if isinstance(dist, FiniteSupport):
        los, his = [], []
        for s in dist.sets:
            hi, _ = s.support(theta)
            lo = -s.support(-theta)[0]
            los.append(lo)
            his.append(hi)
        return min(los), max(his)
    if isinstance(dist, SleepingBasis):
        return float(theta.min()), float(theta.max())
    if isinstance(dist, MSet):
        srt = np.sort(theta)
        return float(srt[:dist.m].sum()), float(srt[-dist.m:].sum())
    if isinstance(dist, ShortestPathDAG):
        full = dist._polytope(np.ones(dist.dim, dtype=bool))
        hi, _ = full.support(theta)
        lo = -full.support(-theta)[0]
        return lo, hi
    raise DomainError(f"unknown distribution {type(dist).__name__}")


def validate_pairing(dist, adv: AdversarySequence, tol: float = 1e-9) -> None:
    distinct = np.unique(adv.thetas, axis=0)
    for theta in distinct:
        lo, hi = loss_range(dist, theta)
        if lo < -tol or hi > 1 + tol:
            raise InvariantViolation(
                f"adversary produces losses in [{lo:.4g}, {hi:.4g}], outside [0, 1]")


def normalize_adversary(dist, adv: AdversarySequence,
                        margin: float = 0.0) -> AdversarySequence:
    """Affine-map raw losses into [0+margin, 1-margin]; the shift uses the
    all-ones direction and needs every realizable action to have the same
    coordinate sum (basis / m-set / equal-length-path families)."""
    lo = np.inf
    hi = -np.inf
    for theta in np.unique(adv.thetas, axis=0):
        a, b = loss_range(dist, theta)
        lo, hi = min(lo, a), max(hi, b)
    span = hi - lo
    if span <= 0:
        raise InvariantViolation("degenerate loss range")
    s = _constant_coordinate_sum(dist)
    scale = (1 - 2 * margin) / span
    if s is None:
        if lo < 0:
            raise InvariantViolation(
                "cannot shift losses: actions do not lie on a common sum hyperplane")
        thetas = adv.thetas * ((1 - margin) / hi)
        return AdversarySequence(thetas, shift=0.0, scale=(1 - margin) / hi,
                                 name=adv.name)
    thetas = (adv.thetas - (lo / s) * np.ones(dist.dim)) * scale \
        + (margin / s) * np.ones(dist.dim)
    return AdversarySequence(thetas, shift=lo, scale=scale, name=adv.name)


def _constant_coordinate_sum(dist):
    if isinstance(dist, SleepingBasis):
        return 1.0
    if isinstance(dist, MSet):
        return float(dist.m)
    if isinstance(dist, ShortestPathDAG):
        return float(len(dist.stages))
    if isinstance(dist, FiniteSupport):
        sums = np.concatenate([s.points.sum(axis=1) for s in dist.sets
                               if s.is_finite])
        if len(sums) and np.ptp(sums) < 1e-12 and \
                all(s.is_finite for s in dist.sets):
            return float(sums[0])
    return None


# ---------------------------------------------------------------------------
# feedback and regret oracles


def bandit_feedback(a: np.ndarray, theta: np.ndarray, rng: np.random.Generator) -> float:
    mean = float(a @ theta)
    if mean < -1e-9 or mean > 1 + 1e-9:
        raise InvariantViolation(f"feedback mean {mean:.4g} outside [0, 1]")
    return float(rng.random() < min(max(mean, 0.0), 1.0))


def best_policy_loss_realized(context_log: list[ActionSet], thetas: np.ndarray) -> float:
    """Total loss of the best policy in hindsight on the realized contexts.

    A policy sees only the set, so rounds with identical sets share one action:
    group rounds by set identity and minimize against each group's theta sum.
    """
    groups: dict[bytes, list] = {}
    for s, th in zip(context_log, thetas):
        k = s.canonical_key()
        if k not in groups:
            groups[k] = [s, th.copy()]
        else:
            groups[k][1] += th
    total = 0.0
    for s, th_sum in groups.values():
        total += -s.support(-th_sum)[0]    # min over conv(set)
    return total


def best_policy_loss_expected(dist: FiniteSupport, thetas: np.ndarray) -> float:
    """T times the expected per-round loss of the best fixed policy: the
    linear-classifier policy under the summed loss vector is optimal."""
    phi = thetas.sum(axis=0)
    per_round = 0.0
    for s, p in dist.support():
        per_round += p * (-s.support(-phi)[0]) / len(thetas)
    return per_round * len(thetas)


def _h_vertex_bound(s: ActionSet) -> int:
    # crude bound used only in log factors: C choose d
    return max(2, math.comb(s.normals.shape[0], min(s.dim, s.normals.shape[0])))


# ---------------------------------------------------------------------------
# uniform-convergence gap


def empirical_uniform_convergence_gap(dist: FiniteSupport, theta: np.ndarray,
                                      N: int, probes: int, seed: int) -> float:
    """Lower bound on sup_phi |<Psi(pi_phi) - Psihat(pi_phi), theta>| from P
    random unit probes plus heuristic directions (subset sums of within-set
    point differences, the normals of the argmin arrangement)."""
    rng = stream(seed, 104)
    draws = [dist.draw(rng) for _ in range(N)]
    keys = {}
    for s in draws:
        k = s.canonical_key()
        keys.setdefault(k, [s, 0])[1] += 1
    d = dist.dim
    Phi = [rng.standard_normal((probes, d))]
    diffs = []
    for s in dist.sets:
        pts = s.points
        diffs += [pts[i] - pts[j] for i in range(len(pts)) for j in range(i)]
    rng2 = stream(seed, 105)
    heur = [theta, -theta]
    for _ in range(min(256, 4 * len(diffs) + 8)):
        take = rng2.random(len(diffs)) < 0.5
        v = sum((dv for dv, tk in zip(diffs, take) if tk), np.zeros(d))
        if np.linalg.norm(v) > 1e-12:
            heur.append(v)
    Phi.append(np.array(heur))
    Phi = np.vstack(Phi)
    Phi = Phi / np.maximum(np.linalg.norm(Phi, axis=1, keepdims=True), 1e-30)
    true_mean = dist.mean_actions_batch(Phi)
    emp_mean = np.zeros_like(true_mean)
    for s, count in keys.values():
        idx = np.argmin(Phi @ s.points.T, axis=1)
        emp_mean += (count / N) * s.points[idx]
    return float(np.abs((true_mean - emp_mean) @ theta).max())
