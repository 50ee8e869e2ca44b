"""Exact desk-scale operator laboratory.

Everything here runs on dense state vectors over at most eight edges
(local dimension 6, so about 1.7 million amplitudes). The lab's job is
to validate the microscopic operator conventions that the fast frame
simulator takes as given: stabilizer definitions, their commutators,
spectra, the gauging round trip, and the parafermion sector
convention.
"""

from __future__ import annotations

from ds3sim.lab.words import (
    Factor,
    OpSum,
    StateSpace,
    Word,
    apply_opsum,
    apply_word,
    check_identity,
    word_action,
    word_trace,
)
from ds3sim.lab.stabilizers import STABILIZER_KINDS, build_stabilizer, stabilizer_support

__all__ = [
    "Factor",
    "OpSum",
    "StateSpace",
    "Word",
    "apply_opsum",
    "apply_word",
    "check_identity",
    "word_action",
    "word_trace",
    "STABILIZER_KINDS",
    "build_stabilizer",
    "stabilizer_support",
]
