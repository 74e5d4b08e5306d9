import numpy as np
import pytest

from polybandits.geometry import (ActionSet, dumps_action_sets,
                                  loads_action_sets)
from polybandits.util import InvariantViolation


def test_roundtrip_points_bit_exact():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((5, 3)) * np.array([1e-12, 1.0, 1e9])
    s = ActionSet.from_points(pts, radius_bound=1e12)
    text = dumps_action_sets([s], weights=[1 / 3])
    back, w, rounds = loads_action_sets(text, radius_bound=1e12)
    assert rounds is None
    assert w == [1 / 3]
    assert back[0].points.tobytes() == s.points.tobytes()


def test_roundtrip_hrep_bit_exact():
    s = ActionSet.from_halfspaces([[1, 0], [-1, 0], [0, 1], [0, -1]],
                                  [0.3, 0.1, np.pi, 0.0])
    text = dumps_action_sets([s])
    back, w, _ = loads_action_sets(text)
    assert w is None
    assert back[0].normals.tobytes() == s.normals.tobytes()
    assert back[0].offsets.tobytes() == s.offsets.tobytes()


def test_roundtrip_context_log():
    sets = [ActionSet.from_points([[0.5, 0.25]]),
            ActionSet.from_points([[1, 0], [0, 1]])]
    text = dumps_action_sets(sets, rounds=[3, 4])
    back, _, rounds = loads_action_sets(text)
    assert rounds == [3, 4]
    assert len(back) == 2
    assert back[1].points.tobytes() == sets[1].points.tobytes()


def test_validation_errors():
    with pytest.raises(InvariantViolation):
        ActionSet.from_points(np.array([[np.nan, 0.0]]))
    with pytest.raises(InvariantViolation):
        ActionSet.from_points([[10.0, 0.0]], radius_bound=1.0)
    with pytest.raises(ValueError):
        loads_action_sets("bogus\n")


def test_canonical_key_ignores_row_order():
    a = ActionSet.from_points([[0, 1], [1, 0]])
    b = ActionSet.from_points([[1, 0], [0, 1]])
    c = ActionSet.from_points([[1, 0], [0, 2]])
    assert a.canonical_key() == b.canonical_key()
    assert a.canonical_key() != c.canonical_key()


def test_lex_tie_break_returns_vertex():
    # two maximizers under phi=(0,1); lex picks the larger first coordinate
    s = ActionSet.from_points([[0, 1], [1, 1], [0.5, 0]])
    v, p = s.support(np.array([0.0, 1.0]))
    assert v == 1.0
    assert np.allclose(p, [1, 1])
