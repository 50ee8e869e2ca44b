"""Physics-level identity checks: placements, spectra, gauging."""

from __future__ import annotations

import numpy as np
import pytest

from ds3sim import fusion
from ds3sim.lab import checks
from ds3sim.lab.stabilizers import (
    build_stabilizer,
    qutrit_plaquette_z3_word,
    qutrit_vertex_z3_word,
    stabilizer_support,
)
from ds3sim.lab.words import Factor, StateSpace, Word


def test_commutator_sweep_all_placements():
    records = checks.verify_placements()["commutators"]
    assert len(records) == 90
    offsets = {r["offset"] for r in records}
    assert len(offsets) == 9
    bad = [r for r in records if not r["pass"]]
    assert bad == []


def test_corner_commutator_is_genuinely_mixed():
    # the shared-corner record compares against a two-term sum, all
    # others against plain words
    records = checks.verify_placements()["commutators"]
    corner = [r for r in records if r["family"] == "A_vs_B" and r["offset"] == (0, 0)]
    assert len(corner) == 1 and corner[0]["pass"]


def test_orders_and_hermiticity():
    for rec in checks.verify_placements()["orders"]:
        assert rec["pass"], rec


def test_spectra_match_contract():
    by_kind = {r["kind"]: r for r in checks.verify_placements()["spectra"]}
    assert set(by_kind) == set(
        ("alpha", "beta", "A", "B", "S_v", "S_p", "A3", "B3", "F", "G")
    )
    for kind in ("alpha", "beta", "S_v", "S_p"):
        assert by_kind[kind]["eigenvalues"] == [-1, 1], by_kind[kind]
        assert by_kind[kind]["pass"]
    for kind in ("A", "B", "A3", "B3"):
        assert by_kind[kind]["eigenvalues"] == ["1", "w", "w2"]
        assert by_kind[kind]["pass"]
        assert set(by_kind[kind]["multiplicities"].values()) == {by_kind[kind]["dim"] // 3}
    for kind in ("F", "G"):
        rec = by_kind[kind]
        assert rec["eigenvalues"] == [0, 1] and rec["pass"]
        # two thirds of every joint charge space triggers the projector
        assert rec["rank"] * 3 == rec["dim"] * 2


def test_vertex_and_plaquette_supports():
    L = 3
    assert stabilizer_support("alpha", (1, 1), L) == frozenset(
        {("v", 1, 1), ("h", 1, 1), ("v", 1, 0), ("h", 0, 1)}
    )
    assert stabilizer_support("B", (1, 1), L) == frozenset(
        {("h", 1, 2), ("v", 2, 1), ("h", 1, 1), ("v", 1, 1)}
    )
    # the projector site spans six edges: four around the plaquette
    # plus the two outer star edges of its north-east corner
    assert len(stabilizer_support("F", (1, 1), L)) == 6


def test_global_flip_equals_global_negation():
    rep = checks.verify_torus()["global_conjugation"]
    assert rep["pass"], rep
    assert rep["torus_residual"] < 1e-12
    assert rep["patch_residual"] < 1e-12


def test_ground_state_is_joint_fixed_point():
    rep = checks.verify_torus()["ground_state"]
    assert rep["pass"], rep


def test_qubit_marginal_is_eight_uniform_loops():
    space, psi = checks.ground_state_l2()
    dist = checks.qubit_pattern_distribution(space, psi)
    assert len(dist) == 8
    assert all(abs(p - 1 / 8) < 1e-12 for p in dist.values())
    for bits in dist:
        parities = checks.pattern_plaquette_parities(space, bits, 2)
        assert all(v == 0 for v in parities.values())


def test_ungauge_round_trip_every_pattern():
    rep = checks.verify_torus()["ungauging"]
    assert rep["pass"], {k: v for k, v in rep.items() if k != "patterns"}
    assert rep["pattern_count"] == 8
    for pat in rep["patterns"]:
        assert pat["round_trip_fidelity"] == pytest.approx(1.0, abs=1e-10)
        assert pat["fixed_form_residual"] < 1e-10
        assert pat["plain_code_residual"] < 1e-10


def test_open_string_pattern_rejected():
    space, _ = checks.ground_state_l2()
    bits = tuple([1] + [0] * (space.n - 1))
    rep = checks.ungauge_pattern_report(bits)
    assert not rep["accepted"]
    assert rep["probability"] < 1e-12
    assert any(v == 1 for v in rep["plaquette_parities"].values())


def test_trivial_pattern_reduces_to_plain_code_words():
    # with all qubits up, the pattern-fixed vertex word is exactly the
    # plain shift word and the plaquette word is the inverse of the
    # plain phase word
    L = 2
    site = (0, 1)
    space = StateSpace(sorted(checks.opsum_support(build_stabilizer("A", site, L))))
    fixed = Word((
        Factor(("v", 0, 1), "X", 1),
        Factor(("h", 0, 1), "X", 1),
        Factor(("v", 0, 0), "X", 2),
        Factor(("h", 1, 1), "X", 2),
    ))
    assert checks.word_residual(fixed, qutrit_vertex_z3_word(site, L), space) < 1e-12

    p = (1, 0)
    spb = StateSpace(sorted(checks.opsum_support(build_stabilizer("B", p, L))))
    fixed_p = Word((
        Factor(("h", 1, 1), "Z", 1),
        Factor(("v", 0, 0), "Z", 2),
        Factor(("h", 1, 0), "Z", 2),
        Factor(("v", 1, 0), "Z", 1),
    ))
    assert (
        checks.word_residual(fixed_p, qutrit_plaquette_z3_word(p, L).dagger(), spb) < 1e-12
    )


def test_parafermion_orbits_pin_fusion_constants():
    rep = checks.verify_torus()["parafermion_orbits"]
    assert rep["pass"], rep
    assert rep["matches_fusion_constants"]
    assert frozenset(map(tuple, rep["f_pairs"])) == fusion.F_ORBIT_PAIRS
    assert frozenset(map(tuple, rep["g_pairs"])) == fusion.G_ORBIT_PAIRS
    # off-diagonal single charges excite both projectors at once
    assert rep["pairs"]["0,1"]["F"] == pytest.approx(1.0, abs=1e-9)
    assert rep["pairs"]["0,1"]["G"] == pytest.approx(1.0, abs=1e-9)


def test_sector_resolution_needs_both_orbits():
    rep = checks.verify_torus()["sector_completeness"]
    assert rep["pass"], rep
    assert rep["resolution_residual"] < 1e-10
    assert rep["naive_equal_exponent_residual"] > 0.1


def test_aggregate_entry_points():
    assert checks.verify_stabilizers("3x3-patch")["pass"]
    assert checks.verify_stabilizers("2x2")["pass"]
    with pytest.raises(ValueError):
        checks.verify_stabilizers("4x4")
