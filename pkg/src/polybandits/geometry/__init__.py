"""Implicit-polytope kernel: action sets, weighted Minkowski averages, and the
membership / separation / optimization / decomposition / witness oracles."""

from .action_set import (ActionSet, dumps_action_sets, loads_action_sets,
                         read_action_sets, write_action_sets)
from .caratheodory import VertexDecomposition, decompose
from .polytope import (TAU_GEO, EmpiricalPolytope, SeparationResult, Vertex)
from .witness import cone_witness

__all__ = [
    "ActionSet", "EmpiricalPolytope", "SeparationResult", "Vertex",
    "VertexDecomposition", "TAU_GEO", "decompose", "cone_witness",
    "read_action_sets", "write_action_sets", "dumps_action_sets",
    "loads_action_sets",
]
