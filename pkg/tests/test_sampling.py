import numpy as np
import pytest
from scipy import stats

from polybandits.geometry import ActionSet, EmpiricalPolytope
from polybandits.sampling import ChainPool, sample_log_linear, truncated_exp
from polybandits.util import OracleInconsistency


def unit_square(lo=0.0, hi=1.0):
    return EmpiricalPolytope.from_samples(
        [ActionSet.from_points([[lo, lo], [hi, lo], [lo, hi], [hi, hi]])])


def trunc_exp_mean(rate, length=1.0):
    # mean of density ∝ exp(-rate*t) on [0, length]
    if abs(rate * length) < 1e-6:
        return length / 2 - rate * length ** 2 / 12
    return 1 / rate - length * np.exp(-rate * length) / (1 - np.exp(-rate * length))


def test_truncated_exp_quantiles():
    rng = np.random.default_rng(0)
    xi = rng.random(100000)
    for lam in (0.0, 1e-14, 0.7, -2.5, 30.0, -900.0):
        t = truncated_exp(np.zeros_like(xi), np.ones_like(xi),
                          np.full_like(xi, lam), xi)
        assert t.min() >= 0 and t.max() <= 1
        se = t.std() / np.sqrt(len(t))
        if abs(lam) < 700:
            assert abs(t.mean() - trunc_exp_mean(lam)) < 4 * se + 1e-9


def test_uniform_square_mean():
    sq = unit_square()
    S = sample_log_linear(sq, np.zeros(2), 4000, (0, 1))
    se = np.sqrt(1 / 12 / 4000)
    assert np.all(np.abs(S.mean(axis=0) - 0.5) < 3 * se * 3)  # thinned chains: 3x slack
    assert np.all(np.abs(S.var(axis=0) - 1 / 12) < 0.01)


def test_segment_truncated_exponential():
    seg = EmpiricalPolytope.from_samples([ActionSet.from_points([[0, 0], [1, 0]])])
    lam = 3.0
    S = sample_log_linear(seg, np.array([lam, 0.0]), 4000, (0, 2))
    se = S[:, 0].std() / np.sqrt(len(S))
    assert abs(S[:, 0].mean() - trunc_exp_mean(lam)) < 4 * se
    assert np.all(np.abs(S[:, 1]) < 1e-12)


def test_square_product_marginals_ks():
    sq = unit_square()
    lam = 4.0
    S = sample_log_linear(sq, np.array([lam, 0.0]), 4000, (0, 3))
    cdf = lambda x: (1 - np.exp(-lam * np.clip(x, 0, 1))) / (1 - np.exp(-lam))
    assert stats.kstest(S[:, 0], cdf).pvalue > 0.01
    assert stats.kstest(S[:, 1], "uniform").pvalue > 0.01


def test_higher_dim_box_marginal_means():
    d = 4
    box = ActionSet.from_halfspaces(np.vstack([np.eye(d), -np.eye(d)]),
                                    np.concatenate([np.ones(d), np.zeros(d)]))
    P = EmpiricalPolytope.from_samples([box])
    expo = np.array([0.5, 1.5, 3.0, 0.0])
    S = sample_log_linear(P, expo, 6000, (0, 4))
    for j in range(d):
        se = S[:, j].std() / np.sqrt(len(S))
        assert abs(S[:, j].mean() - trunc_exp_mean(expo[j])) < 5 * se


def test_orthogonal_exponent_component_is_ignored():
    seg = EmpiricalPolytope.from_samples([ActionSet.from_points([[0, 0], [1, 0]])])
    a = sample_log_linear(seg, np.array([2.0, 0.0]), 1000, (0, 5))
    b = sample_log_linear(seg, np.array([2.0, 123.0]), 1000, (0, 5))
    assert np.array_equal(a, b)   # hull-orthogonal part has exactly zero effect
    # rotated segment: effect only within float projection noise
    rot = EmpiricalPolytope.from_samples([ActionSet.from_points([[0, 0], [1, 1]])])
    ortho = np.array([1.0, -1.0])
    a = sample_log_linear(rot, np.array([2.0, 2.0]), 2000, (0, 6))
    b = sample_log_linear(rot, np.array([2.0, 2.0]) + 10 * ortho, 2000, (0, 6))
    assert stats.ks_2samp(a[:, 0], b[:, 0]).pvalue > 0.01
    assert np.allclose(a, b, atol=1e-9)


def test_point_body():
    P = EmpiricalPolytope([(ActionSet.from_points([[1, 0]]), 0.5),
                           (ActionSet.from_points([[0, 1]]), 0.5)])
    S = sample_log_linear(P, np.array([3.0, -2.0]), 50, (0, 7))
    assert np.allclose(S, [0.5, 0.5])


def test_lp_fallback_matches_facet_path_distribution():
    sq_f = unit_square()
    pool = ChainPool(sq_f, 300)
    pool._rows = None   # force the chord-LP path on the same body
    pool.advance(np.array([2.0, 0.0]), 60, (0, 8, 0))
    S = pool.states_ambient()
    ref = sample_log_linear(sq_f, np.array([2.0, 0.0]), 300, (0, 9))
    assert stats.ks_2samp(S[:, 0], ref[:, 0]).pvalue > 0.01


def test_unbounded_chord_raises():
    sq = unit_square()
    pool = ChainPool(sq, 16)
    pool._rows = pool._rows[:1]          # fault injection: drop facets
    pool._offs = pool._offs[:1]
    pool._ru = pool._ru[:1]
    with pytest.raises(OracleInconsistency):
        pool.advance(np.zeros(2), 5, (0, 10, 0))
