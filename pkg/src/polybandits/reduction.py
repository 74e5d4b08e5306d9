"""Contextual bandit play via the body's vertex structure.

Each round the linear-bandit learner proposes a body point y_t; it is
decomposed over at most hull_dim+1 certified vertices, one vertex is sampled
with the decomposition weights, its normal-cone witness phi maps the realized
action set to argmin <a, phi>, and the observed loss is fed back as the
learner's scalar feedback. Witnesses are memoized per vertex within an epoch
and re-derived after every rebuild of the body.

The doubling driver restarts at rounds 2, 4, 8, ..., rebuilding the body from
all contexts observed so far and re-deriving the bias level passed to the
learner from the sample count. Simulator mode draws its context pool up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cew import CEWConfig, ClippedExpWeights
from .environments import AdversarySequence, bandit_feedback, best_policy_loss_realized
from .geometry import EmpiricalPolytope, cone_witness, decompose
from .util import (BOOTSTRAP, CONTEXTS, DECOMP, DomainError, FEEDBACK,
                   SIMULATOR, check_finite, stream)

_FIDELITY_TOL = 1e-8


@dataclass
class PolicyWitness:
    phi: np.ndarray
    source_vertex: np.ndarray
    margin: float
    ident: int                      # stable id within the epoch
    fidelity_error: float           # | weighted per-set argmin - vertex |


@dataclass
class EpochPlan:
    T: int

    @property
    def restart_times(self) -> list[int]:
        out = []
        t = 2
        while t <= self.T:
            out.append(t)
            t *= 2
        return out

    def epochs(self):
        """Yields (epoch_index, start, end, contexts_before)."""
        yield 0, 1, 1, 0
        for i, s in enumerate(self.restart_times, start=1):
            yield i, s, min(2 * s - 1, self.T), s - 1


@dataclass
class RegretTrace:
    rounds: np.ndarray              # (T,)
    epochs: np.ndarray
    actions: np.ndarray             # (T, d)
    losses: np.ndarray              # realized Bernoulli losses
    mean_losses: np.ndarray         # <a_t, theta_t>
    witness_ids: np.ndarray
    projected: np.ndarray           # bool flags
    epoch_summary: list = field(default_factory=list)
    # (epoch, start, end, n_contexts, epsilon, epoch_regret_vs_realized_best)

    @property
    def projection_rate(self) -> float:
        return float(self.projected.mean())


def epsilon_from_samples(d: int, n: int, k_bound: int, T: int) -> float:
    """Bias level fed to the linear-bandit learner when the body was built
    from n sampled contexts (confidence 1 - 1/T^2)."""
    delta = 1.0 / T ** 2
    return 4.0 * math.sqrt(d * math.log(max(n, 1) * k_bound * T / delta) / max(n, 1))


class ContextualReduction:
    """One epoch: a linear-bandit learner on a fixed body plus the
    decomposition/witness machinery that turns its points into actions."""

    def __init__(self, poly: EmpiricalPolytope, config: CEWConfig):
        self.poly = poly
        self.alg = ClippedExpWeights(poly, config)
        self.witnesses: dict[bytes, PolicyWitness] = {}
        self.projection_events = 0
        self.rounds_played = 0
        self.worst_fidelity = 0.0

    def _witness(self, rec) -> PolicyWitness:
        key = rec.key()
        w = self.witnesses.get(key)
        if w is None:
            phi, margin = cone_witness(self.poly, rec)
            err = float(np.linalg.norm(self._mean_argmin(phi) - rec.point))
            w = PolicyWitness(phi=phi, source_vertex=rec.point, margin=margin,
                              ident=len(self.witnesses), fidelity_error=err)
            if err > 1e-9 * self.poly.scale:
                raise DomainError(
                    f"witness fails to realize its vertex (error {err:.3g})")
            self.witnesses[key] = w
        return w

    def _mean_argmin(self, phi: np.ndarray) -> np.ndarray:
        out = np.zeros(self.poly.dim)
        for s, wt in self.poly.entries:
            out += wt * s.argmin_point(phi)
        return out

    def play_round(self, action_set, round_index: int, seed: int):
        """Returns (action, witness, decomposition, projected_flag)."""
        y = self.alg.play()
        projected = False
        if not self.poly.contains(y, tol=1e-7):
            y, projected = self.poly.project_inside(y)
            self.projection_events += 1
        dec = decompose(self.poly, y)
        err = float(np.linalg.norm(dec.reconstruct() - y))
        self.worst_fidelity = max(self.worst_fidelity, err)
        if dec.k == 1:
            rec = dec.records[0]
        else:
            rng = stream(seed, DECOMP, round_index)
            rec = dec.records[int(rng.choice(dec.k, p=dec.weights))]
        w = self._witness(rec)
        a = action_set.argmin_point(w.phi)
        self.rounds_played += 1
        return a, w, dec, projected

    def feed_back(self, loss: float) -> None:
        if not (0.0 <= loss <= 1.0):
            raise DomainError(f"loss {loss!r} outside [0, 1]")
        self.alg.update(loss)


@dataclass
class Environment:
    dist: object                      # a context distribution
    adversary: AdversarySequence
    seed: int = 0

    def theta(self, t: int) -> np.ndarray:
        return self.adversary.thetas[t - 1]


def _empty_trace(T: int, d: int) -> RegretTrace:
    return RegretTrace(rounds=np.arange(1, T + 1), epochs=np.zeros(T, dtype=int),
                       actions=np.zeros((T, d)), losses=np.zeros(T),
                       mean_losses=np.zeros(T), witness_ids=np.full(T, -1),
                       projected=np.zeros(T, dtype=bool))


def _record(tr: RegretTrace, t: int, epoch: int, a, loss, mean, wid, proj) -> None:
    i = t - 1
    tr.epochs[i] = epoch
    tr.actions[i] = a
    tr.losses[i] = loss
    tr.mean_losses[i] = mean
    tr.witness_ids[i] = wid
    tr.projected[i] = proj


def _bootstrap_round(env: Environment, tr: RegretTrace, contexts: list) -> None:
    d = env.dist.dim
    rng = stream(env.seed, BOOTSTRAP)
    phi0 = rng.standard_normal(d)
    phi0 /= np.linalg.norm(phi0)
    a_set = env.dist.draw(stream(env.seed, CONTEXTS, 1))
    a = a_set.argmin_point(phi0)
    theta = env.theta(1)
    loss = bandit_feedback(a, theta, stream(env.seed, FEEDBACK, 1))
    _record(tr, 1, 0, a, loss, float(a @ theta), -1, False)
    contexts.append(a_set)


def doubling_driver(env: Environment, config: CEWConfig) -> RegretTrace:
    """Epoch-doubling contextual run over config.T rounds."""
    T = config.T
    d = env.dist.dim
    if env.adversary.T < T:
        raise DomainError("adversary shorter than the horizon")
    tr = _empty_trace(T, d)
    contexts: list = []
    plan = EpochPlan(T)
    for epoch, start, end, n_before in plan.epochs():
        if start > T:
            break
        if epoch == 0:
            _bootstrap_round(env, tr, contexts)
            continue
        poly = EmpiricalPolytope.from_samples(list(contexts))
        eps = epsilon_from_samples(d, n_before, env.dist.k_bound, T)
        horizon = end - start + 1
        cfg = _epoch_config(config, horizon, eps, env.seed * 131 + epoch)
        red = ContextualReduction(poly, cfg)
        for t in range(start, end + 1):
            a_set = env.dist.draw(stream(env.seed, CONTEXTS, t))
            a, w, _, proj = red.play_round(a_set, t, env.seed)
            theta = env.theta(t)
            loss = bandit_feedback(a, theta, stream(env.seed, FEEDBACK, t))
            red.feed_back(loss)
            _record(tr, t, epoch, a, loss, float(a @ theta), w.ident, proj)
            contexts.append(a_set)
        ep_rows = slice(start - 1, end)
        comparator = best_policy_loss_realized(
            contexts[start - 1:end], env.adversary.thetas[ep_rows])
        tr.epoch_summary.append((epoch, start, end, n_before, eps,
                                 float(tr.mean_losses[ep_rows].sum() - comparator)))
    check_finite("doubling trace", tr.mean_losses)
    return tr


def simulator_mode(env: Environment, config: CEWConfig,
                   n_cap: int = 10000, n_scale: float = 1.0) -> RegretTrace:
    """Single-epoch run with an up-front simulator context pool of size
    min(n_cap, ceil(n_scale * d^3 T^2)); the theoretical pool size is recorded
    in the epoch summary."""
    T = config.T
    d = env.dist.dim
    n_theory = math.ceil(n_scale * d ** 3 * T ** 2)
    n = min(n_cap, n_theory)
    rng = stream(env.seed, SIMULATOR)
    pool = [env.dist.draw(rng) for _ in range(n)]
    poly = EmpiricalPolytope.from_samples(pool)
    eps = epsilon_from_samples(d, n, env.dist.k_bound, T)
    cfg = _epoch_config(config, T, eps, env.seed * 131 + 1)
    red = ContextualReduction(poly, cfg)
    tr = _empty_trace(T, d)
    realized = []
    for t in range(1, T + 1):
        a_set = env.dist.draw(stream(env.seed, CONTEXTS, t))
        realized.append(a_set)
        a, w, _, proj = red.play_round(a_set, t, env.seed)
        theta = env.theta(t)
        loss = bandit_feedback(a, theta, stream(env.seed, FEEDBACK, t))
        red.feed_back(loss)
        _record(tr, t, 1, a, loss, float(a @ theta), w.ident, proj)
    comparator = best_policy_loss_realized(realized, env.adversary.thetas[:T])
    tr.epoch_summary.append((1, 1, T, n, eps, float(tr.mean_losses.sum() - comparator)))
    check_finite("simulator trace", tr.mean_losses)
    return tr


def _epoch_config(base: CEWConfig, horizon: int, eps: float, seed: int) -> CEWConfig:
    return CEWConfig(T=horizon, dim=base.dim, epsilon=eps, gamma=base.gamma,
                     eta=base.eta, beta=base.beta, M=base.M, burn_in=base.burn_in,
                     thinning=base.thinning, pool_steps=base.pool_steps,
                     bonus_multiplier=base.bonus_multiplier, seed=seed)
