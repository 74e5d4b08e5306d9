"""Shared plumbing: error taxonomy, deterministic RNG streams, float formatting."""

from __future__ import annotations

import numpy as np


class InvariantViolation(RuntimeError):
    """A constructed object or intermediate value broke a stated invariant."""


class DomainError(ValueError):
    """A caller violated an operation's precondition."""


class OracleInconsistency(RuntimeError):
    """Internal geometric oracles contradicted each other (e.g. a bisection
    failed to bracket a boundary the membership oracle claims exists)."""


def stream(*path: int) -> np.random.Generator:
    """Deterministic RNG keyed by an integer path, independent of call order.

    Components derive their generators as ``stream(seed, component_id, round, ...)``
    so that reruns and different schedulings consume identical random numbers.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(path))))


def fast_stream(*path: int) -> np.random.Generator:
    """SFC64 variant for bulk draws in the sampler hot loop (same keying)."""
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(list(path))))


# Component ids for stream() paths. Values are arbitrary but frozen: changing
# them changes every seeded trace.
ADVERSARY, CONTEXTS, FEEDBACK, SAMPLER, DECOMP, BOOTSTRAP, SIMULATOR = range(7)


def fmt(x) -> str:
    """Shortest round-trippable decimal for a float (CSV cells, byte-stable)."""
    return repr(float(x))


def check_finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvariantViolation(f"non-finite value in {name}")
