"""Adversarial linear contextual bandits with stochastic action sets.

Subpackages/modules:
  geometry      -- polytope oracles over weighted Minkowski averages
  sampling      -- hit-and-run for log-linear densities on those polytopes
  cew           -- clipped continuous exponential weights (bias-robust)
  reduction     -- contextual play via vertex decomposition + cone witnesses
  environments  -- context distributions, oblivious adversaries, regret oracles
  harness       -- seeded experiment runner, CSV traces, validation suites
"""

__version__ = "0.1.0"
