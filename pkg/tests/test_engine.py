"""Frame engine tests.

The slow charge evaluators below are written straight from the edge
role tables with explicit loops, independently of the vectorized
implementations, so a sign or roll mistake in either copy shows up as
a disagreement.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ds3sim import engine as E
from ds3sim.engine import (
    EngineError,
    FrameState,
    GaugeRegion,
    Move,
    apply_correction,
    apply_fault,
    bounding_region,
    encode_logical,
    eta_winding,
    evaluate_neutrality,
    measure_round,
    move_defect,
    move_electric,
    move_magnetic,
    perform_region_correction,
    readout_logical,
    regauge_region,
    torus_box,
    ungauge_region,
)
from ds3sim.lattice import plaquette_boundary, vertex_star
from ds3sim.spacetime import Fault, sample_errors


def slow_electric(frame):
    L = frame.L
    out = np.zeros((L, L), dtype=int)
    for x in range(L):
        for y in range(L):
            total = 0
            for role, (kind, ex, ey) in vertex_star(x, y, L).items():
                layer = 0 if kind == "h" else 1
                c = int(frame.qutritZ[layer, ex, ey])
                if role in ("N", "E"):
                    k = 1
                else:
                    k = 2 - int(frame.qubitX[layer, ex, ey])
                total += k * c
            out[x, y] = (-total + int(frame.offsetE[x, y])) % 3
    return out


def slow_magnetic(frame):
    L = frame.L
    out = np.zeros((L, L), dtype=int)
    for x in range(L):
        for y in range(L):
            edges = plaquette_boundary(x, y, L)
            bits = {
                r: int(frame.qubitX[0 if k == "h" else 1, ex, ey])
                for r, (k, ex, ey) in edges.items()
            }
            coeff = {
                "W": 1,
                "N": 1 + bits["W"],
                "E": 2 - (bits["W"] + bits["N"] + bits["E"]) % 2,
                "S": 2 - (bits["W"] + bits["N"] + bits["E"] + bits["S"]) % 2,
            }
            total = 0
            for role, (kind, ex, ey) in edges.items():
                layer = 0 if kind == "h" else 1
                total += coeff[role] * int(frame.qutritX[layer, ex, ey])
            out[x, y] = (total + int(frame.offsetM[x, y])) % 3
    return out


def storm(frame, p, T, rng):
    faults = sample_errors(p, frame.L, T, rng)
    for t in range(1, T + 1):
        for f in faults:
            if f.t == t and f.is_spatial():
                apply_fault(frame, f)
        measure_round(frame, t, [f for f in faults if f.t == t and f.kind == "measFlip"])
    return faults


class TestChargeFields:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_vectorized_matches_slow_evaluators(self, seed):
        rng = np.random.default_rng(seed)
        f = FrameState(6)
        f.qubitX[:] = rng.integers(0, 2, f.qubitX.shape)
        f.qutritZ[:] = rng.integers(0, 3, f.qutritZ.shape)
        f.qutritX[:] = rng.integers(0, 3, f.qutritX.shape)
        assert np.array_equal(f.electric_charge(), slow_electric(f))
        assert np.array_equal(f.magnetic_charge(), slow_magnetic(f))

    def test_isolated_electric_fault_makes_conjugate_pair(self):
        f = FrameState(8)
        apply_fault(f, Fault(1, "qutritZ", "h", 2, 3, 1))
        e = f.electric_charge()
        assert e[2, 3] == 2 and e[3, 3] == 1
        assert int((e != 0).sum()) == 2
        assert not f.accumulators and f.conservation_ok()

    def test_isolated_magnetic_fault_makes_conjugate_pair(self):
        f = FrameState(8)
        apply_fault(f, Fault(1, "qutritX", "v", 4, 4, 1))
        m = f.magnetic_charge()
        assert m[4, 4] == 1 and m[3, 4] == 2
        assert int((m != 0).sum()) == 2

    def test_string_crossing_membrane_same_sign_plus_hidden_comp(self):
        f = FrameState(12)
        for y in (3, 4, 5):
            apply_fault(f, Fault(1, "qubitX", "h", 2, y, 1))
        assert f.mu_plaquettes() == [(2, 2), (2, 5)]
        apply_fault(f, Fault(1, "qutritZ", "h", 2, 4, 1))
        e = f.electric_charge()
        assert e[2, 4] == e[3, 4] == 2  # same sign, not a conjugate pair
        assert sum(acc[0] for acc in f.accumulators.values()) % 3 == 2
        assert f.conservation_ok()

    def test_fault_on_defect_boundary_is_absorbed(self):
        f = FrameState(8)
        apply_fault(f, Fault(1, "qubitX", "h", 2, 3, 1))  # defects (2,3),(2,2)
        apply_fault(f, Fault(1, "qutritX", "v", 2, 3, 1))  # m at (2,3),(1,3)
        m = f.magnetic_charge()
        assert m[2, 3] == 0 and m[1, 3] == 2
        assert tuple(f.accumulators[(2, 3)]) == (0, 1)
        assert f.conservation_ok()

    def test_membrane_toggle_alone_conserves(self):
        f = FrameState(8)
        apply_fault(f, Fault(1, "qutritZ", "v", 1, 1, 2))
        for e in (("h", 3, 3), ("v", 4, 2), ("h", 3, 4)):
            apply_fault(f, Fault(2, "qubitX", e[0], e[1], e[2], 1))
            assert f.conservation_ok()

    def test_qubitz_fault_only_touches_eta_layer(self):
        f = FrameState(8)
        apply_fault(f, Fault(1, "qubitZ", "h", 3, 3, 1))
        assert f.alpha_parity().sum() == 2
        assert f.electric_charge().sum() == 0
        assert f.beta_parity().sum() == 0


class TestConservation:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_exact_conservation_under_fault_storms(self, seed):
        rng = np.random.default_rng(seed)
        f = FrameState(10)
        storm(f, 0.06, 6, rng)
        assert f.conservation_ok()

    def test_conservation_through_region_lifecycle(self):
        rng = np.random.default_rng(11)
        f = FrameState(12)
        storm(f, 0.04, 4, rng)
        assert f.conservation_ok()
        h, _, _ = ungauge_region(f, torus_box((2, 2), (7, 7), 12), 5, 7)
        assert f.conservation_ok()
        perform_region_correction(f, h)
        assert f.conservation_ok()
        if evaluate_neutrality(f, h) == "1":
            regauge_region(f, h, 7, rng)
            assert f.conservation_ok()


class TestMeasureRound:
    def test_presence_readings_and_masking(self):
        f = FrameState(12)
        apply_fault(f, Fault(1, "qutritZ", "h", 5, 6, 1))
        apply_fault(f, Fault(1, "qubitX", "h", 2, 3, 1))
        r = measure_round(f, 1)
        assert r.sv[5, 6] == -1 and r.sv[6, 6] == -1
        assert r.sv[8, 8] == 1
        # every station within label distance 1 of a defect is blind
        for site in ((2, 3), (2, 2), (3, 4), (1, 1)):
            assert not r.sv_valid[site]
            assert not r.sp_valid[site]
        assert r.sv_valid[8, 8] and r.sp_valid[8, 8]
        # defect readings stay available everywhere
        assert r.mu[2, 3] == -1 and r.mu[2, 2] == -1

    def test_binarized_reading_cannot_tell_one_from_two(self):
        f1, f2 = FrameState(8), FrameState(8)
        apply_fault(f1, Fault(1, "qutritZ", "h", 2, 3, 1))
        apply_fault(f2, Fault(1, "qutritZ", "h", 2, 3, 2))
        r1, r2 = measure_round(f1, 1), measure_round(f2, 1)
        assert np.array_equal(r1.sv, r2.sv)

    def test_meas_flips(self):
        f = FrameState(8)
        r = measure_round(
            f,
            1,
            [
                Fault(1, "measFlip", "mu", 2, 2, 1),
                Fault(1, "measFlip", "eta", 3, 3, 1),
                Fault(1, "measFlip", "e", 4, 4, 1),
            ],
        )
        assert r.mu[2, 2] == -1 and r.eta[3, 3] == -1 and r.sv[4, 4] == -1
        assert f.conservation_ok()  # reading errors never touch the frame

    def test_meas_flip_on_charge_valued_region_increments_mod3(self):
        f = FrameState(8)
        measure_round(f, 1)
        ungauge_region(f, torus_box((1, 1), (4, 4), 8), 2, 4)
        r = measure_round(f, 2, [Fault(2, "measFlip", "e", 2, 2, 1)])
        assert r.e3_valid[2, 2] and r.e3[2, 2] == 1
        r = measure_round(f, 3, [Fault(3, "measFlip", "m", 2, 2, 1)])
        assert r.m3_valid[2, 2] and r.m3[2, 2] == 1

    def test_wall_ring_outside_region_is_blind_for_binarized(self):
        f = FrameState(10)
        measure_round(f, 1)
        ungauge_region(f, torus_box((3, 3), (2, 2), 10), 2, 4)
        r = measure_round(f, 2)
        assert not r.sp_valid[2, 3]  # shares a wall edge
        assert r.sp_valid[1, 3]
        assert not r.sv_valid[3, 3]
        assert r.e3_valid[4, 4]  # all four surrounding plaquettes are open
        assert not r.e3_valid[3, 3]  # rim vertex of the region is not interior


class TestUngauge:
    def test_closed_loop_report(self):
        f = FrameState(10)
        # contractible dual 4-cycle (4,4)-(5,4)-(5,5)-(4,5)
        for e in (("v", 5, 4), ("h", 5, 5), ("v", 5, 5), ("h", 4, 5)):
            apply_fault(f, Fault(1, "qubitX", e[0], e[1], e[2], 1))
        assert f.mu_plaquettes() == []
        measure_round(f, 1)
        _, _, report = ungauge_region(f, torus_box((2, 2), (6, 6), 10), 2, 4)
        assert report == {"closed": True, "open_ends": []}

    def test_open_string_report(self):
        f = FrameState(10)
        apply_fault(f, Fault(1, "qubitX", "h", 4, 4, 1))
        measure_round(f, 1)
        _, _, report = ungauge_region(f, torus_box((2, 2), (6, 6), 10), 2, 4)
        assert report["closed"] is False
        assert report["open_ends"] == [(4, 3), (4, 4)]

    def test_eta_endpoint_teleports_to_wall(self):
        f = FrameState(10)
        for y in (3, 4, 5):
            apply_fault(f, Fault(1, "qubitZ", "v", 4, y, 1))  # eta pair (4,3),(4,6)
        assert f.alpha_parity()[4, 3] == 1 and f.alpha_parity()[4, 6] == 1
        measure_round(f, 1)
        ungauge_region(f, torus_box((2, 2), (5, 3), 10), 2, 4)  # contains (4,3) end
        # interior qubit strings were measured out; the remaining end moved
        ends = sorted(map(tuple, np.argwhere(f.alpha_parity())))
        assert (4, 6) in ends and (4, 3) not in ends

    def test_double_ungauge_is_an_error(self):
        f = FrameState(8)
        measure_round(f, 1)
        ungauge_region(f, torus_box((1, 1), (3, 3), 8), 2, 5)
        with pytest.raises(EngineError):
            ungauge_region(f, torus_box((2, 2), (3, 3), 8), 3, 5)

    def test_unscheduled_computational_anyon_is_an_error(self):
        f = FrameState(16)
        encode_logical(f, [(2, 2), (8, 2), (2, 10), (8, 10)], 0)
        measure_round(f, 1)
        with pytest.raises(EngineError):
            ungauge_region(f, torus_box((1, 1), (4, 4), 16), 2, 4)

    def test_boundary_detector_fires_for_gap_fault_only(self):
        f = FrameState(12)
        apply_fault(f, Fault(1, "qutritZ", "h", 3, 3, 1))  # before the last reading
        measure_round(f, 1)
        apply_fault(f, Fault(2, "qutritX", "v", 4, 4, 1))  # after it
        _, events, _ = ungauge_region(f, torus_box((1, 1), (7, 7), 12), 2, 4)
        assert {(ev.species, ev.x, ev.y) for ev in events} == {("m", 4, 4), ("m", 3, 4)}
        assert all(ev.boundary for ev in events)

    def test_boundary_detector_catches_final_meas_flip(self):
        f = FrameState(10)
        measure_round(f, 1, [Fault(1, "measFlip", "mu", 4, 4, 1)])
        _, events, _ = ungauge_region(f, torus_box((2, 2), (5, 5), 10), 2, 4)
        assert [(ev.species, ev.x, ev.y) for ev in events] == [("mu", 4, 4)]

    def test_quiet_history_gives_no_boundary_events(self):
        f = FrameState(10)
        apply_fault(f, Fault(1, "qutritZ", "h", 4, 4, 1))
        measure_round(f, 1)
        _, events, _ = ungauge_region(f, torus_box((2, 2), (5, 5), 10), 2, 4)
        assert events == []


class TestNeutrality:
    def build_open(self, L=10, lo=(2, 2), span=(5, 5)):
        f = FrameState(L)
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box(lo, span, L), 2, 4)
        return f, h

    def test_vacuum_region(self):
        f, h = self.build_open()
        assert evaluate_neutrality(f, h) == "1"

    def test_contained_pair_is_neutral(self):
        f = FrameState(10)
        apply_fault(f, Fault(1, "qutritZ", "h", 4, 4, 1))
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((2, 2), (5, 5), 10), 2, 4)
        assert evaluate_neutrality(f, h) == "1"

    def test_single_charges_classify(self):
        f, h = self.build_open()
        f.offsetE[4, 4] = 1
        assert evaluate_neutrality(f, h) == "e"
        f.offsetE[4, 4] = 0
        f.offsetM[4, 4] = 2
        assert evaluate_neutrality(f, h) == "m"
        f.offsetE[4, 4] = 1
        assert evaluate_neutrality(f, h) == "f"
        f.offsetE[4, 4] = 2
        assert evaluate_neutrality(f, h) == "g"

    def test_closed_region_is_an_error(self):
        f = FrameState(8)
        region = GaugeRegion(torus_box((1, 1), (3, 3), 8), 0, 2)
        with pytest.raises(EngineError):
            evaluate_neutrality(f, region)


class TestTransport:
    def test_plain_path_matches_edgewise_oracle(self):
        # no membranes: the carry construction must equal a brute-force
        # edge-by-edge chain of unit string faults along the same path
        f = FrameState(10)
        measure_round(f, 1)
        ungauge_region(f, torus_box((0, 0), (9, 9), 10), 2, 4)
        f.offsetE[2, 2] = 1
        f.offsetE[9, 9] = 2  # parked conjugate so the frame starts neutral
        arrived = move_electric(f, (2, 2), (6, 5), 1)
        assert arrived == 1
        oracle = FrameState(10)
        for x in (2, 3, 4, 5):
            apply_fault(oracle, Fault(1, "qutritZ", "h", x, 2, 1))
        for y in (2, 3, 4):
            apply_fault(oracle, Fault(1, "qutritZ", "v", 6, y, 1))
        assert np.array_equal(f.qutritZ, oracle.qutritZ)
        oe = oracle.electric_charge()
        assert oe[2, 2] == 2 and oe[6, 5] == 1 and int((oe != 0).sum()) == 2
        e = f.electric_charge()
        assert e[2, 2] == 0 and e[6, 5] == 1 and e[9, 9] == 2
        assert int((e != 0).sum()) == 2
        assert not f.accumulators and not oracle.accumulators
        assert f.conservation_ok()

    def test_magnetic_path_leaves_no_residue(self):
        f = FrameState(10)
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((0, 0), (9, 9), 10), 2, 4)
        f.offsetM[3, 3] = 2
        f.offsetM[9, 9] = 1
        arrived = move_magnetic(f, (3, 3), (7, 6), 2)
        assert arrived == 2
        m = f.magnetic_charge()
        assert m[3, 3] == 0 and m[7, 6] == 2 and m[9, 9] == 1
        assert int((m != 0).sum()) == 2
        assert not f.accumulators and f.conservation_ok()

    def test_crossing_membrane_conjugates_and_books_balance(self):
        f = FrameState(12)
        for y in (3, 4, 5):
            apply_fault(f, Fault(1, "qubitX", "h", 2, y, 1))
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((0, 0), (6, 9), 12), 2, 4)
        f.offsetE[4, 4] = 2
        f.offsetE[1, 4] = 1
        arrived = move_electric(f, (4, 4), (1, 4), 2)
        assert arrived == 1  # conjugated crossing the membrane column
        assert f.conservation_ok()
        # the exchange sits on a membrane endpoint defect
        assert any(k in ((2, 2), (2, 5)) for k in f.accumulators)

    def test_defect_pair_annihilation_releases_content(self):
        f = FrameState(10)
        apply_fault(f, Fault(1, "qubitX", "h", 4, 4, 1))  # defects (4,4),(4,3)
        f._credit((4, 4), 1, 0)
        f._credit((4, 3), 1, 0)
        f.offsetE[0, 0] = 1  # balance the books for the injected content
        assert f.conservation_ok()
        move_defect(f, (4, 4), (4, 3))
        assert f.mu_plaquettes() == []
        assert not f.accumulators
        e = f.electric_charge()
        assert e[(4 + 1) % 10, (3 + 1) % 10] == 2  # released at the fusion corner


class TestCorrection:
    def test_apply_correction_clears_contained_noise(self):
        f = FrameState(12)
        apply_fault(f, Fault(1, "qutritZ", "h", 4, 4, 1))
        apply_fault(f, Fault(1, "qutritX", "v", 6, 6, 2))
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((2, 2), (8, 8), 12), 2, 4)
        moves = [Move("e", (4, 4), (5, 4), 2), Move("m", (5, 6), (6, 6), 1)]
        apply_correction(f, h, moves)
        assert evaluate_neutrality(f, h) == "1"

    def test_apply_correction_error_when_region_not_neutral(self):
        # string straddles the wall: only one endpoint charge is inside,
        # so no in-region move list can ever reach the expected vacuum
        f = FrameState(12)
        apply_fault(f, Fault(1, "qutritZ", "h", 2, 3, 1))
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((2, 2), (8, 8), 12), 2, 4)
        with pytest.raises(EngineError):
            apply_correction(f, h, [])

    def test_correction_outside_open_region_is_an_error(self):
        f = FrameState(8)
        region = GaugeRegion(torus_box((1, 1), (3, 3), 8), 0, 2)
        with pytest.raises(EngineError):
            apply_correction(f, region, [])

    def test_perform_cleans_defect_pair_with_crossing_string(self):
        f = FrameState(12)
        for y in (3, 4, 5):
            apply_fault(f, Fault(1, "qubitX", "h", 2, y, 1))
        apply_fault(f, Fault(1, "qutritZ", "h", 2, 4, 1))
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((0, 0), (8, 9), 12), 2, 4)
        out = perform_region_correction(f, h)
        assert out["success"] and out["defects"] == 2
        regauge_region(f, h, 4, eta_emission=False)
        r = measure_round(f, 5)
        assert int((r.sv[r.sv_valid] == -1).sum()) == 0
        assert int((r.sp[r.sp_valid] == -1).sum()) == 0
        assert f.mu_plaquettes() == []

    def test_perform_reports_infeasible_through_membrane(self):
        f = FrameState(12)
        for y in (2, 3, 4, 5, 6):
            apply_fault(f, Fault(1, "qubitX", "h", 1, y, 1))
        f.offsetE[1, 3] = 1
        f.offsetE[3, 3] = 2
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((0, 2), (5, 4), 12), 2, 4)
        out = perform_region_correction(f, h)
        assert not out["success"] and out["residual"] == "e"
        assert f.conservation_ok()

    def test_perform_succeeds_once_region_contains_the_membrane(self):
        f = FrameState(12)
        for y in (2, 3, 4, 5, 6):
            apply_fault(f, Fault(1, "qubitX", "h", 1, y, 1))
        f.offsetE[1, 3] = 1
        f.offsetE[3, 3] = 2
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((0, 0), (6, 9), 12), 2, 4)
        out = perform_region_correction(f, h)
        assert out["success"]
        assert evaluate_neutrality(f, h) == "1"

    def test_odd_defect_count_is_infeasible(self):
        f = FrameState(12)
        for y in (2, 3, 4):
            apply_fault(f, Fault(1, "qubitX", "h", 1, y, 1))  # ends (1,1),(1,4)
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((0, 2), (4, 4), 12), 2, 4)  # one end in
        out = perform_region_correction(f, h)
        assert not out["success"] and out["residual"] == "mu"


class TestRegauge:
    def test_before_deadline_is_an_error(self):
        f = FrameState(8)
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((1, 1), (3, 3), 8), 2, 6)
        with pytest.raises(EngineError):
            regauge_region(f, h, 4, eta_emission=False)

    def test_non_neutral_region_is_an_error(self):
        f = FrameState(8)
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((1, 1), (4, 4), 8), 2, 3)
        f.offsetE[3, 3] = 1
        with pytest.raises(EngineError):
            regauge_region(f, h, 3, eta_emission=False)

    def test_roundtrip_without_emission_is_exact(self):
        f = FrameState(8)
        snap = f.to_json()
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((1, 1), (4, 4), 8), 2, 4)
        regauge_region(f, h, 4, eta_emission=False)
        f.last_readings = None
        assert f.to_json() == snap

    def test_emission_toggles_wall_edges_only(self):
        rng = np.random.default_rng(0)
        f = FrameState(10)
        measure_round(f, 1)
        h, _, _ = ungauge_region(f, torus_box((2, 2), (4, 4), 10), 2, 4)
        _, wall = f.region_edges(h.plaquettes)
        emitted = regauge_region(f, h, 4, rng)
        assert emitted and set(emitted) <= wall
        for kind, x, y in emitted:
            assert f.qubitZ[0 if kind == "h" else 1, x, y] == 1
        assert f.gauge.sum() == 0


class TestLogicalMemory:
    POS = [(2, 2), (8, 2), (2, 10), (8, 10)]

    def test_encode_validates_inputs(self):
        f = FrameState(16)
        with pytest.raises(ValueError):
            encode_logical(f, self.POS, 2)
        with pytest.raises(ValueError):
            encode_logical(f, self.POS[:3], 0)
        with pytest.raises(ValueError):
            encode_logical(f, [(2, 2), (3, 2), (2, 10), (8, 10)], 0, min_separation=4)

    @pytest.mark.parametrize("bit", [0, 1])
    def test_noiseless_roundtrip(self, bit):
        f = FrameState(16)
        encode_logical(f, self.POS, bit)
        assert f.conservation_ok()
        measure_round(f, 1)
        out = readout_logical(f, 2)
        assert out["bit"] == bit and out["consistent"]

    def test_scheduled_anyons_hide_nearby_readings(self):
        f = FrameState(16)
        encode_logical(f, self.POS, 1)
        r = measure_round(f, 1)
        for p in self.POS:
            assert not r.sv_valid[p]
            assert not r.sp_valid[p]

    def test_ferried_charge_flips_both_pairs(self):
        f = FrameState(16)
        encode_logical(f, self.POS, 0)
        for y in range(2, 10):
            apply_fault(f, Fault(1, "qutritZ", "v", 2, y, 1))
        measure_round(f, 1)
        out = readout_logical(f, 2)
        assert out["pair_bits"] == [1, 1] and out["bit"] == 1

    def test_contained_noise_string_is_benign(self):
        f = FrameState(16)
        encode_logical(f, self.POS, 0)
        for x in (2, 3, 4):
            apply_fault(f, Fault(1, "qutritZ", "h", x, 2, 1))
        measure_round(f, 1)
        out = readout_logical(f, 2)
        assert out["bit"] == 0 and out["consistent"]

    def test_overlapping_pairs_error(self):
        f = FrameState(8)
        encode_logical(f, [(0, 0), (4, 0), (0, 2), (4, 2)], 0, min_separation=2)
        measure_round(f, 1)
        with pytest.raises(EngineError):
            readout_logical(f, 2)


class TestSerialization:
    def test_round_trip_and_determinism(self):
        rng = np.random.default_rng(5)
        f = FrameState(10)
        storm(f, 0.05, 5, rng)
        g = FrameState.from_json(f.to_json())
        assert f.to_json() == g.to_json()
        blob = json.loads(f.to_json())
        assert blob["L"] == 10

    def test_same_faults_same_trajectory(self):
        def run():
            rng = np.random.default_rng(77)
            f = FrameState(10)
            faults = storm(f, 0.05, 6, rng)
            return f.to_json(), faults

        (j1, f1), (j2, f2) = run(), run()
        assert j1 == j2 and f1 == f2


class TestGeometry:
    def test_torus_box_and_bounding_region(self):
        box = torus_box((7, 7), (3, 3), 8)
        assert (0, 0) in box and (7, 7) in box and len(box) == 9
        reg = bounding_region([(7, 1), (1, 1)], 8, pad=1)
        assert {(7, 1), (0, 1), (1, 1)} <= reg
        assert (4, 1) not in reg

    def test_bounding_region_clamps_to_lattice(self):
        reg = bounding_region([(0, 0), (4, 4)], 6, pad=2)
        assert len(reg) == 36

    @given(
        st.lists(
            st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=5
        ),
        st.integers(0, 2),
    )
    @settings(max_examples=60, deadline=None)
    def test_bounding_region_contains_sites(self, sites, pad):
        reg = bounding_region(sites, 10, pad=pad)
        assert set(sites) <= reg

    def test_eta_winding(self):
        f = FrameState(8)
        assert eta_winding(f) == (0, 0)
        for y in range(8):
            f.qubitZ[1, 3, y] ^= 1  # vertical loop: crosses the horizontal cut
        assert f.alpha_parity().sum() == 0
        assert eta_winding(f) == (0, 1)
        f2 = FrameState(8)
        for x in range(8):
            f2.qubitZ[0, x, 3] ^= 1  # horizontal loop: crosses the vertical cut
        assert f2.alpha_parity().sum() == 0
        assert eta_winding(f2) == (1, 0)
