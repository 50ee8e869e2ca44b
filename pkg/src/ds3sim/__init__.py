"""Simulation and decoding toolkit for a non-Abelian S3 quantum double memory.

The package is organised around the life of a single experiment:

* :mod:`ds3sim.fusion` -- the anyon label algebra (fusion rules, total
  charge, neutrality tests) plus the solver that re-derives the fusion
  table from a handful of seed rules.
* :mod:`ds3sim.lab` -- an exact, small-lattice operator laboratory used
  to validate the microscopic stabilizer conventions that the fast
  simulator takes for granted.
* :mod:`ds3sim.spacetime` -- fault sampling on the (2+1)-dimensional
  cube lattice.
* :mod:`ds3sim.chunks` -- chunk decomposition of fault configurations
  and the combinatorial constants behind the threshold argument.
* :mod:`ds3sim.engine` -- the frame simulator: tracked Pauli/permutation
  frames, charge bookkeeping, gauging and ungauging of regions.
* :mod:`ds3sim.decoder` -- the just-in-time decoder that watches
  syndrome deltas, grows clusters, and schedules ungauge/repair cycles.
* :mod:`ds3sim.harness` -- Monte Carlo driver, statistics, reports.
* :mod:`ds3sim.cli` -- command line front end.
"""

from __future__ import annotations

__version__ = "0.1.0"

from ds3sim.fusion import (
    ANYONS,
    FUSION,
    QUANTUM_DIM,
    MicroCharge,
    conjugate,
    fuse,
    is_neutralizable,
    orbit_of,
    possible_total_charges,
    quantum_dim,
)

__all__ = [
    "ANYONS",
    "FUSION",
    "QUANTUM_DIM",
    "MicroCharge",
    "conjugate",
    "fuse",
    "is_neutralizable",
    "orbit_of",
    "possible_total_charges",
    "quantum_dim",
    "__version__",
]
