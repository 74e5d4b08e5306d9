import numpy as np
import pytest

from polybandits.cew import (CEWConfig, ClippedExpWeights, clip_and_draw,
                             estimate_moments, run_cew)
from polybandits.geometry import ActionSet, EmpiricalPolytope
from polybandits.util import DomainError, FEEDBACK, InvariantViolation, stream


def unit_square(lo=0.0, hi=1.0):
    return EmpiricalPolytope.from_samples(
        [ActionSet.from_points([[lo, lo], [hi, lo], [lo, hi], [hi, hi]])])


# -- moment estimation --------------------------------------------------------

def test_moments_identical_points():
    p = np.array([0.3, -1.2])
    x, cov = estimate_moments(np.tile(p, (50, 1)))
    assert np.allclose(x, p)
    assert np.all(np.linalg.eigvalsh(cov) <= 1e-11)


def test_moments_uniform_square():
    rng = np.random.default_rng(0)
    S = rng.random((20000, 2))
    x, cov = estimate_moments(S)
    assert np.allclose(x, [0.5, 0.5], atol=0.02)
    assert np.allclose(cov, np.eye(2) / 12, atol=0.01)


def test_moments_rank_one_segment():
    rng = np.random.default_rng(1)
    S = np.column_stack([rng.random(500), np.zeros(500)])
    _, cov = estimate_moments(S)
    w = np.sort(np.linalg.eigvalsh(cov))
    assert w[0] <= 1e-11          # floored dead direction
    assert w[1] > 0.05


def test_moments_sample_floor():
    with pytest.raises(DomainError):
        estimate_moments(np.zeros((30, 2)))   # below 10 d^2


# -- clipping -----------------------------------------------------------------

def test_clip_huge_radius_keeps_first_sample():
    rng = np.random.default_rng(2)
    S = rng.random((200, 2))
    x, cov = estimate_moments(S)
    y, cov_hat, acc, idx = clip_and_draw(S, x, cov, radius_sq=1e12)
    assert idx == 0
    assert np.array_equal(y, S[0])
    assert acc == 1.0
    centered = S - x
    assert np.allclose(cov_hat, centered.T @ centered / len(S))


def test_clip_excludes_far_outlier():
    rng = np.random.default_rng(3)
    S = rng.standard_normal((500, 2))
    S[0] = [3000.0, -3000.0]               # ~1000 sigma
    x, cov = estimate_moments(S[1:])
    y, _, acc, idx = clip_and_draw(S, x, cov, radius_sq=2 * 16.0)
    assert idx != 0
    assert acc < 1.0
    assert np.linalg.norm(y) < 100


def test_clip_acceptance_near_one_at_default_gamma():
    sq = unit_square()
    alg = ClippedExpWeights(sq, CEWConfig(T=100, dim=2, seed=0))
    alg.play()
    # rejection mass bound 10 d e^-gamma is ~0 at the default gamma
    assert alg.last.acceptance == 1.0


def test_clip_all_rejected_raises():
    from polybandits.util import OracleInconsistency
    S = np.tile(np.array([5.0, 5.0]), (60, 1))
    x = np.zeros(2)
    cov = np.eye(2)
    with pytest.raises(OracleInconsistency):
        clip_and_draw(S, x, cov, radius_sq=1.0)


# -- update -------------------------------------------------------------------

def _primed(poly, **kw):
    alg = ClippedExpWeights(poly, CEWConfig(dim=2, **kw))
    alg.play()
    return alg


def test_update_zero_feedback():
    alg = _primed(unit_square(), T=50, seed=1, epsilon=0.3)
    pre = alg.cum_adjusted.copy()
    alg.update(0.0)
    assert np.allclose(alg.last.theta, 0.0)
    assert np.array_equal(alg.cum_adjusted, pre - alg.last.bonus)


def test_first_round_bonus_is_zero():
    alg = _primed(unit_square(), T=50, seed=2, epsilon=0.5)
    assert np.array_equal(alg.bonus(), np.zeros(2))
    alg.update(1.0)
    assert np.array_equal(alg.last.bonus, np.zeros(2))


def test_estimator_scalar_system():
    alg = _primed(unit_square(), T=50, seed=3)
    alg.params.beta = 1.0
    alg._cov_hat_amb = np.eye(2)
    alg._y = alg._x + np.array([1.0, 0.0])
    alg.update(1.0)
    assert np.allclose(alg.last.theta, [0.5, 0.0])


def test_feedback_range_validation():
    alg = _primed(unit_square(), T=50, seed=4)
    with pytest.raises(DomainError):
        alg.update(1.5)
    with pytest.raises(DomainError):
        alg.update(-0.1)
    with pytest.raises(DomainError):
        alg.play()   # still pending


def test_bonus_recursion_identity():
    sq = unit_square(0.2, 0.8)
    theta = np.array([0.4, 0.8])
    cfg = CEWConfig(T=40, dim=2, epsilon=0.25, gamma=4.0, seed=5)
    alg = ClippedExpWeights(sq, cfg)
    kappa = cfg.bonus_multiplier * alg.params.eta * (0.25 + 1 / 40 ** 2)
    rng = stream(5, FEEDBACK)
    for t in range(40):
        y = alg.play()
        b_before = alg.bonus_vec.copy()
        alg.update(float(rng.random() < y @ theta))
        expected = b_before + kappa * (alg.last.theta - b_before)
        assert np.array_equal(alg.bonus_vec, expected)


def test_eta_invariant_enforced():
    with pytest.raises(InvariantViolation):
        CEWConfig(T=100, dim=2, gamma=4.0, eta=1.0).resolved(2)
    with pytest.raises(InvariantViolation):
        CEWConfig(T=100, dim=2, M=30).resolved(2)


# -- statistical properties ---------------------------------------------------

def test_estimator_conditional_bias():
    # frozen round: resample y from the accepted pool; the Monte-Carlo mean of
    # theta must match (beta I + Sigmahat)^-1 Sigmahat theta_proj within 4 SE.
    seg = EmpiricalPolytope.from_samples(
        [ActionSet.from_points([[0.1, 0.5], [0.9, 0.5]])])
    theta = np.array([0.6, 0.4])          # off-hull component gets projected
    cfg = CEWConfig(T=100, dim=2, seed=6)  # default gamma: acceptance = 1
    alg = ClippedExpWeights(seg, cfg)
    alg.play()
    S = alg.pool.states_ambient()
    x = S.mean(axis=0)
    centered = S - x
    cov_hat = centered.T @ centered / len(S)
    A = alg.params.beta * np.eye(2) + cov_hat
    rng = stream(6, 99)
    draws = S[rng.integers(0, len(S), size=10000)]
    thetas = np.linalg.solve(A, ((draws - x) * (draws @ theta)[:, None]).T).T
    target = np.linalg.solve(A, cov_hat @ theta)
    se = thetas.std(axis=0) / np.sqrt(len(thetas))
    assert np.all(np.abs(thetas.mean(axis=0) - target) < 4 * se + 1e-12)


def test_moment_sandwich_along_run():
    sq = unit_square(0.2, 0.8)
    theta = np.array([0.4, 0.8])
    rng = stream(7, FEEDBACK)
    tr = run_cew(sq, CEWConfig(T=60, dim=2, gamma=4.0, seed=7),
                 lambda y, t: float(rng.random() < y @ theta))
    assert tr.sandwich_low.min() > -1e-9
    assert tr.sandwich_high.min() > -1e-9


def test_run_one_round():
    sq = unit_square()
    tr = run_cew(sq, CEWConfig(T=1, dim=2, seed=8), lambda y, t: 0.5)
    assert tr.y.shape == (1, 2)
    assert sq.contains(tr.y[0], tol=1e-7)


def test_orthogonal_state_shift_does_not_change_samples():
    seg = EmpiricalPolytope.from_samples([ActionSet.from_points([[0, 0], [1, 0]])])
    a = ClippedExpWeights(seg, CEWConfig(T=50, dim=2, seed=9))
    b = ClippedExpWeights(seg, CEWConfig(T=50, dim=2, seed=9))
    a.cum_adjusted = np.array([3.0, 0.0])
    b.cum_adjusted = np.array([3.0, 777.0])   # hull-orthogonal shift
    assert np.array_equal(a.sample_unclipped(500), b.sample_unclipped(500))


def test_point_body_runs():
    P = EmpiricalPolytope([(ActionSet.from_points([[1, 0]]), 0.5),
                           (ActionSet.from_points([[0, 1]]), 0.5)])
    tr = run_cew(P, CEWConfig(T=3, dim=2, seed=10), lambda y, t: 0.3)
    assert np.allclose(tr.y, 0.5)
