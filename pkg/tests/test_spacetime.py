"""Sampling, metric, and detector extraction checks."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ds3sim.spacetime import (
    FAULT_ALPHABET,
    Absorber,
    DetectorEvent,
    Fault,
    cube_failure_prob,
    detectors_from_readings,
    diameter,
    distance,
    region_distance,
    sample_errors,
    torus_delta,
)


def test_alphabet_has_16_entries_and_4_meas_species():
    assert len(FAULT_ALPHABET) == 16
    assert len(set(FAULT_ALPHABET)) == 16
    meas = [a for a in FAULT_ALPHABET if a[0] == "measFlip"]
    assert sorted(a[1] for a in meas) == ["e", "eta", "m", "mu"]


# ---------------------------------------------------------------------------
# Cube failure probability
# ---------------------------------------------------------------------------


def test_cube_failure_prob_frozen():
    assert cube_failure_prob(0.0, 10) == 0.0
    assert cube_failure_prob(1.0, 1) == 1.0
    assert abs(cube_failure_prob(0.001, 10) - 0.009955119790251431) < 1e-8


def test_cube_failure_prob_rejects_bad_input():
    with pytest.raises(ValueError):
        cube_failure_prob(-0.1, 10)
    with pytest.raises(ValueError):
        cube_failure_prob(0.1, 0)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def test_sample_p0_is_empty():
    rng = np.random.default_rng(1)
    assert sample_errors(0.0, 8, 8, rng) == []


def test_sample_p1_faults_every_cube():
    rng = np.random.default_rng(1)
    faults = sample_errors(1.0, 2, 1, rng)
    assert len(faults) == 4
    assert {(f.x, f.y, f.t) for f in faults} == {
        (x, y, 1) for x in range(2) for y in range(2)
    }


def test_sample_is_deterministic_per_seed():
    a = sample_errors(0.05, 8, 8, np.random.default_rng(42))
    b = sample_errors(0.05, 8, 8, np.random.default_rng(42))
    assert a == b


def test_sample_mean_weight_matches_binomial():
    rng = np.random.default_rng(7)
    samples = 10_000
    n_cubes = 16 * 16 * 16
    p = 0.01
    total = sum(len(sample_errors(p, 16, 16, rng)) for _ in range(samples))
    mean = total / samples
    sigma = (n_cubes * p * (1 - p) / samples) ** 0.5
    assert abs(mean - n_cubes * p) < 3 * sigma


def test_sample_respects_restricted_alphabet():
    alphabet = [a for a in FAULT_ALPHABET if a[0] == "qubitZ"]
    rng = np.random.default_rng(3)
    faults = sample_errors(0.5, 8, 4, rng, alphabet=alphabet)
    assert faults
    assert {f.kind for f in faults} == {"qubitZ"}


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------


def test_distance_frozen_cases():
    assert distance((0, 0, 0), (3, -2, 1), 8) == 3
    assert distance((0, 0, 0), (7, 0, 0), 8) == 1
    assert distance((0, 0, 0), (0, 0, 5), 8) == 5


def test_torus_delta_wraps():
    assert torus_delta(0, 7, 8) == 1
    assert torus_delta(2, 6, 8) == 4


@settings(max_examples=200, deadline=None)
@given(
    st.integers(4, 12),
    st.tuples(st.integers(-20, 20), st.integers(-20, 20), st.integers(0, 20)),
    st.tuples(st.integers(-20, 20), st.integers(-20, 20), st.integers(0, 20)),
    st.tuples(st.integers(-20, 20), st.integers(-20, 20), st.integers(0, 20)),
)
def test_distance_is_a_metric(L, p, q, r):
    assert distance(p, q, L) == distance(q, p, L)
    assert distance(p, p, L) == 0
    assert distance(p, r, L) <= distance(p, q, L) + distance(q, r, L)


def test_region_distance_matches_brute_force_on_random_regions():
    rng = np.random.default_rng(5)
    L = 10
    for _ in range(50):
        a = [tuple(map(int, rng.integers(0, L, 3))) for _ in range(rng.integers(1, 5))]
        b = [tuple(map(int, rng.integers(0, L, 3))) for _ in range(rng.integers(1, 5))]
        oracle = min(
            max(
                min(abs(p[0] - q[0]) % L, L - abs(p[0] - q[0]) % L),
                min(abs(p[1] - q[1]) % L, L - abs(p[1] - q[1]) % L),
                abs(p[2] - q[2]),
            )
            for p in a
            for q in b
        )
        assert region_distance(a, b, L) == oracle


def test_diameter_cases():
    assert diameter([], 8) == 0
    assert diameter([(1, 1, 1)], 8) == 0
    assert diameter([(0, 0, 0), (3, 1, 2), (0, 1, 0)], 8) == 3


def test_absorber_requires_extent():
    with pytest.raises(ValueError):
        Absorber("gaugingWall", frozenset())
    a = Absorber("temporalBoundary", frozenset({(0, 0, 9)}))
    assert a.kind == "temporalBoundary"


# ---------------------------------------------------------------------------
# Detectors
# ---------------------------------------------------------------------------


def _series(T, base, changes):
    out = [base] * (T + 1)
    for t, val in changes.items():
        for u in range(t, T + 1):
            out[u] = val
    return out


def test_constant_readings_give_no_events():
    readings = {
        ("mu", 0, 0): [1] * 9,
        ("e", 1, 1): [0] * 9,
    }
    assert detectors_from_readings(readings, 8) == []


def test_single_persistent_flip_gives_one_event():
    readings = {("mu", 2, 3): _series(8, 1, {4: -1})}
    events = detectors_from_readings(readings, 8)
    assert events == [DetectorEvent("mu", 2, 3, 4, delta=1)]


def test_meas_flip_style_blip_gives_two_stacked_events():
    series = _series(8, 1, {})
    series[4] = -1
    events = detectors_from_readings({("mu", 2, 3): series}, 8)
    assert [e.t for e in events] == [4, 5]
    assert all(e.point[:2] == (2, 3) for e in events)


def test_charge_species_report_mod3_delta():
    series = _series(8, 0, {3: 2})
    events = detectors_from_readings({("e", 1, 0): series}, 8)
    assert events == [DetectorEvent("e", 1, 0, 3, delta=2)]


def test_masked_gap_produces_no_events():
    series = [0, 0, None, None, 1, 1, 1, 1, 1]
    events = detectors_from_readings({("m", 4, 4): series}, 8)
    assert events == []


def test_mu_worldline_flips_expectation():
    # a computational anyon parked at (5, 5) from round 1 on reads -1
    # without lighting its detector
    series = [1] + [-1] * 8
    worldline = frozenset((5, 5, t) for t in range(1, 9))
    events = detectors_from_readings({("mu", 5, 5): series}, 8, worldline)
    assert events == []
    # the same readings with no schedule give one event at t = 1
    events = detectors_from_readings({("mu", 5, 5): series}, 8)
    assert [e.t for e in events] == [1]


def test_short_series_raises():
    with pytest.raises(ValueError):
        detectors_from_readings({("mu", 0, 0): [1, 1]}, 8)


def test_fault_ordering_is_total():
    faults = [
        Fault(2, "qubitX", "h", 1, 1),
        Fault(1, "measFlip", "mu", 0, 0),
        Fault(1, "qubitZ", "v", 3, 2),
    ]
    assert sorted(faults)[0].t == 1
