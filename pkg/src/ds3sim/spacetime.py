"""Spacetime discretization: fault sampling, detectors, and the metric.

A run lives on an L x L torus observed for T rounds. Unit cubes are
indexed by (x, y, t) with t in 1..T. Space directions wrap, time does
not. All distances are L infinity, which is the metric every locality
bound in the analysis modules is stated in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

Point = tuple[int, int, int]

SPECIES: tuple[str, ...] = ("mu", "eta", "e", "m")

EDGE_LAYERS: tuple[str, ...] = ("h", "v")

# One cube draws uniformly from this alphabet when it faults. Spatial
# kinds act on the named edge layer at the cube's (x, y); measFlip
# corrupts one reported stabilizer reading of the named species there.
FAULT_ALPHABET: tuple[tuple[str, str, int], ...] = (
    ("qubitX", "h", 1),
    ("qubitX", "v", 1),
    ("qubitZ", "h", 1),
    ("qubitZ", "v", 1),
    ("qutritX", "h", 1),
    ("qutritX", "h", 2),
    ("qutritX", "v", 1),
    ("qutritX", "v", 2),
    ("qutritZ", "h", 1),
    ("qutritZ", "h", 2),
    ("qutritZ", "v", 1),
    ("qutritZ", "v", 2),
    ("measFlip", "mu", 1),
    ("measFlip", "eta", 1),
    ("measFlip", "e", 1),
    ("measFlip", "m", 1),
)

SPATIAL_KINDS = ("qubitX", "qubitZ", "qutritX", "qutritZ")


@dataclass(frozen=True, order=True)
class Fault:
    """One elementary fault.

    ``sub`` is the edge layer for spatial kinds and the reading species
    for measFlip. ``power`` is the qutrit exponent (1 except for the
    squared qutrit operators). A fault with timestep t acts after round
    t - 1 was read and before round t is read.
    """

    t: int
    kind: str
    sub: str
    x: int
    y: int
    power: int = 1

    @property
    def point(self) -> Point:
        return (self.x, self.y, self.t)

    def is_spatial(self) -> bool:
        return self.kind != "measFlip"


@dataclass(frozen=True, order=True)
class DetectorEvent:
    """A change between consecutive readings of one stabilizer station.

    ``delta`` is the reading difference: reserved sign info for the
    plus/minus species, the mod 3 increment for charge species.
    """

    species: str
    x: int
    y: int
    t: int
    delta: int = 1
    boundary: bool = False

    @property
    def point(self) -> Point:
        return (self.x, self.y, self.t)


@dataclass(frozen=True)
class Absorber:
    kind: str  # spatialBoundary | temporalBoundary | gaugingWall |
    #            computationalAnyonWorldline | errorClusterRegion
    extent: frozenset[Point]

    def __post_init__(self) -> None:
        if not self.extent:
            raise ValueError("absorber with empty extent")


def cube_failure_prob(eps: float, n_elements: int) -> float:
    """Probability that at least one of n_elements in a cube faults."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps out of range: {eps}")
    if n_elements < 1:
        raise ValueError("n_elements must be at least 1")
    return 1.0 - (1.0 - eps) ** n_elements


def sample_errors(
    p: float,
    L: int,
    T: int,
    rng: np.random.Generator,
    alphabet: Sequence[tuple[str, str, int]] = FAULT_ALPHABET,
) -> list[Fault]:
    """Sample one error configuration over the L x L x T volume.

    Each cube faults independently with probability p and then draws
    one alphabet entry uniformly. The returned list is ordered by
    (t, y, x), which makes replay deterministic given the generator.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p out of range: {p}")
    mask = rng.random((T, L, L)) < p
    ts, ys, xs = np.nonzero(mask)
    picks = rng.integers(0, len(alphabet), size=ts.size)
    faults = []
    for t, y, x, k in zip(ts.tolist(), ys.tolist(), xs.tolist(), picks.tolist()):
        kind, sub, power = alphabet[k]
        faults.append(Fault(t=t + 1, kind=kind, sub=sub, x=x, y=y, power=power))
    return faults


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------


def torus_delta(a: int, b: int, L: int) -> int:
    d = abs(a - b) % L
    return min(d, L - d)


def distance(p: Point, q: Point, L: int) -> int:
    """L infinity distance, periodic in the two space directions."""
    return max(
        torus_delta(p[0], q[0], L),
        torus_delta(p[1], q[1], L),
        abs(p[2] - q[2]),
    )


def region_distance(a: Iterable[Point], b: Iterable[Point], L: int) -> int:
    a = list(a)
    b = list(b)
    if not a or not b:
        raise ValueError("region distance needs nonempty regions")
    return min(distance(p, q, L) for p in a for q in b)


def diameter(points: Iterable[Point], L: int) -> int:
    pts = list(points)
    if len(pts) <= 1:
        return 0
    return max(
        distance(pts[i], pts[j], L)
        for i in range(len(pts))
        for j in range(i + 1, len(pts))
    )


def spatial_distance(a: tuple[int, int], b: tuple[int, int], L: int) -> int:
    return max(torus_delta(a[0], b[0], L), torus_delta(a[1], b[1], L))


# ---------------------------------------------------------------------------
# Detectors from reading histories
# ---------------------------------------------------------------------------

StationId = tuple[str, int, int]


def detectors_from_readings(
    readings: Mapping[StationId, Sequence],
    T: int,
    mu_worldlines: frozenset[Point] = frozenset(),
) -> list[DetectorEvent]:
    """Compare consecutive readings and report every change.

    ``readings[station][t]`` is the reported value at round t, or None
    where the station had no reading (masked, or ungauged away). The
    scheduled worldlines of computational anyons flip the expected sign
    of the mu species along their tracks, so a parked computational
    anyon does not light up its own detector. A None at t - 1 with a
    value at t yields no event here; reveal comparisons at gauge
    boundaries are the engine's job.
    """
    events: list[DetectorEvent] = []
    for (species, x, y), series in sorted(readings.items()):
        if len(series) < T + 1:
            raise ValueError(f"reading series too short at {(species, x, y)}")
        for t in range(1, T + 1):
            prev, cur = series[t - 1], series[t]
            if prev is None or cur is None:
                continue
            if species in ("mu", "eta"):
                adj_prev, adj_cur = prev, cur
                if species == "mu":
                    if (x, y, t - 1) in mu_worldlines:
                        adj_prev = -adj_prev
                    if (x, y, t) in mu_worldlines:
                        adj_cur = -adj_cur
                if adj_prev != adj_cur:
                    events.append(DetectorEvent(species, x, y, t, delta=1))
            else:
                delta = (cur - prev) % 3
                if delta:
                    events.append(DetectorEvent(species, x, y, t, delta=delta))
    return events
