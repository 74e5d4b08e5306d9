import numpy as np
import pytest
from conftest import random_finite_mixture, random_interior_point

from polybandits.geometry import (ActionSet, EmpiricalPolytope, cone_witness,
                                  decompose)
from polybandits.util import DomainError


def exact_mean_argmin(poly, phi):
    """Weighted per-set exact argmin under phi (finite sets, exact comparisons)."""
    out = np.zeros(poly.dim)
    for s, w in poly.entries:
        vals = s.points @ phi
        out += w * s.points[int(np.argmin(vals))]
    return out


def test_square_origin():
    P = EmpiricalPolytope.from_samples(
        [ActionSet.from_points([[0, 0], [1, 0], [0, 1], [1, 1]])])
    phi, eps = cone_witness(P, np.array([0.0, 0.0]))
    assert np.isclose(np.linalg.norm(phi), 1.0)
    assert phi[0] > 0 and phi[1] > 0
    assert eps > 0
    for v in ([1, 0], [0, 1], [1, 1]):
        assert phi @ (np.zeros(2) - np.array(v)) < 0


def test_simplex_vertex():
    P = EmpiricalPolytope.from_samples(
        [ActionSet.from_points(np.eye(3))])
    phi, _ = cone_witness(P, np.array([1.0, 0, 0]))
    assert phi[0] < min(phi[1], phi[2])
    for v in (np.array([0, 1.0, 0]), np.array([0, 0, 1.0])):
        assert phi @ (np.eye(3)[0] - v) < 0


def test_witness_reproduces_vertex_exactly():
    rng = np.random.default_rng(41)
    checked = 0
    while checked < 15:
        P = random_finite_mixture(rng, d=3, n_sets=3, max_pts=3)
        if P.hull_dim == 0:
            continue
        y = random_interior_point(rng, P)
        dec = decompose(P, y)
        for rec in dec.records:
            for method in ("subgradient", "lp"):
                phi, _ = cone_witness(P, rec, method=method)
                assert np.linalg.norm(exact_mean_argmin(P, phi) - rec.point) < 1e-9
        checked += 1


def test_not_a_vertex_raises():
    P = EmpiricalPolytope.from_samples(
        [ActionSet.from_points([[0, 0], [1, 0], [0, 1], [1, 1]])])
    with pytest.raises(DomainError):
        cone_witness(P, np.array([0.5, 0.0]))   # edge midpoint
    with pytest.raises(DomainError):
        cone_witness(P, np.array([0.5, 0.5]))   # interior


def test_bare_vector_input_matches_record_input():
    P = EmpiricalPolytope([(ActionSet.from_points([[0, 0], [1, 0]]), 0.5),
                           (ActionSet.from_points([[0, 1], [1, 1], [0.5, 2]]), 0.5)])
    dec = decompose(P, np.array([0.4, 0.7]))
    for rec in dec.records:
        phi_rec, _ = cone_witness(P, rec)
        phi_bare, _ = cone_witness(P, rec.point.copy())
        assert np.linalg.norm(exact_mean_argmin(P, phi_rec) - rec.point) < 1e-9
        assert np.linalg.norm(exact_mean_argmin(P, phi_bare) - rec.point) < 1e-9
