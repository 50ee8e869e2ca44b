"""Fast frame simulator for the non-Abelian memory.

State is four string layers on the torus edges plus gauge-phase
bookkeeping. Charges are never stored directly: the electric charge at
a vertex and the magnetic charge at a plaquette are derived from the
qutrit layers with exponents decorated by the qubit membrane, exactly
mirroring the decorated stabilizer words the operator lab certifies.
Dragging a membrane across a charge string therefore conjugates the
charge with no extra case analysis.

Charge bookkeeping: every mutation reports its net visible-charge
delta, and any nonzero remainder is pushed into the accumulator of the
owning defect (nearest membrane endpoint, deterministic tie-break).
Charge deposited next to a defect is absorbed into that defect's
accumulator instead of staying visible. The sum of visible charge and
accumulator content is exactly conserved mod 3 at all times.

Gauge regions: a region is a set of plaquettes. Ungauging measures all
qubits on the region's plaquette boundaries, which switches the region
to charge-valued readings (and blinds the binarized readings on the
first ring outside, where the wall qubits were consumed). Membrane
data is kept: defect endpoints remain visible in either phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .fusion import MicroCharge, orbit_of
from .lattice import edge_sides, plaquette_boundary, vertex_star
from .spacetime import DetectorEvent, Fault, spatial_distance

Site = tuple[int, int]
Edge = tuple[str, int, int]

LAYER_INDEX = {"h": 0, "v": 1}


class EngineError(RuntimeError):
    """Contract violation inside the frame engine."""


@dataclass
class ScheduledAnyon:
    """A computational defect parked at a plaquette."""

    id: int
    plaquette: Site
    pair: int  # pair index, 0 or 1


@dataclass(frozen=True)
class GaugeRegion:
    plaquettes: frozenset[Site]
    open_time: int
    dwell_deadline: int
    expected_charge: str = "1"
    allowed_anyons: tuple[int, ...] = ()


@dataclass
class Readings:
    """One round of stabilizer readings. Arrays are [x, y] indexed;
    the paired valid mask says where a reading exists at all."""

    t: int
    mu: np.ndarray
    eta: np.ndarray
    eta_valid: np.ndarray
    sv: np.ndarray
    sv_valid: np.ndarray
    sp: np.ndarray
    sp_valid: np.ndarray
    e3: np.ndarray
    e3_valid: np.ndarray
    m3: np.ndarray
    m3_valid: np.ndarray


class FrameState:
    def __init__(self, L: int):
        if L < 4:
            raise ValueError("lattice too small for disjoint regions")
        self.L = L
        shape = (2, L, L)
        self.qubitX = np.zeros(shape, dtype=np.int8)
        self.qubitZ = np.zeros(shape, dtype=np.int8)
        self.qutritX = np.zeros(shape, dtype=np.int8)
        self.qutritZ = np.zeros(shape, dtype=np.int8)
        self.offsetE = np.zeros((L, L), dtype=np.int8)
        self.offsetM = np.zeros((L, L), dtype=np.int8)
        self.gauge = np.zeros((L, L), dtype=np.int8)  # 0 = full phase
        self.wall_time: dict[Site, int] = {}
        self.accumulators: dict[Site, list[int]] = {}
        self.schedule: list[ScheduledAnyon] = []
        self.last_readings: Readings | None = None

    # -- derived charge fields ------------------------------------------

    def beta_parity(self) -> np.ndarray:
        qx0, qx1 = self.qubitX
        return (
            qx0 + np.roll(qx0, -1, axis=1) + qx1 + np.roll(qx1, -1, axis=0)
        ) % 2

    def alpha_parity(self) -> np.ndarray:
        qz0, qz1 = self.qubitZ
        return (
            qz0 + qz1 + np.roll(qz1, 1, axis=1) + np.roll(qz0, 1, axis=0)
        ) % 2

    def electric_charge(self) -> np.ndarray:
        """Visible e charge per vertex, membrane decorations included."""
        z0, z1 = self.qutritZ.astype(np.int16)
        b0, b1 = self.qubitX
        c_s = np.roll(z1, 1, axis=1)
        c_w = np.roll(z0, 1, axis=0)
        k_s = 2 - np.roll(b1, 1, axis=1).astype(np.int16)
        k_w = 2 - np.roll(b0, 1, axis=0).astype(np.int16)
        raw = (-(z1 + z0 + k_s * c_s + k_w * c_w)) % 3
        return ((raw + self.offsetE) % 3).astype(np.int8)

    def magnetic_charge(self) -> np.ndarray:
        """Visible m charge per plaquette."""
        x0, x1 = self.qutritX.astype(np.int16)
        b0, b1 = self.qubitX
        a_n = np.roll(x0, -1, axis=1)
        a_e = np.roll(x1, -1, axis=0)
        a_s = x0
        a_w = x1
        b_n = np.roll(b0, -1, axis=1).astype(np.int16)
        b_e = np.roll(b1, -1, axis=0).astype(np.int16)
        b_s = b0.astype(np.int16)
        b_w = b1.astype(np.int16)
        l_n = 1 + b_w
        l_e = 2 - (b_w + b_n + b_e) % 2
        l_s = 2 - (b_w + b_n + b_e + b_s) % 2
        raw = (a_n * l_n + a_e * l_e + a_s * l_s + a_w) % 3
        return ((raw + self.offsetM) % 3).astype(np.int8)

    def mu_plaquettes(self) -> list[Site]:
        xs, ys = np.nonzero(self.beta_parity())
        return [(int(x), int(y)) for x, y in zip(xs, ys)]

    def scheduled_sites(self) -> set[Site]:
        return {a.plaquette for a in self.schedule}

    def total_charge(self) -> tuple[int, int]:
        e = int(self.electric_charge().sum()) % 3
        m = int(self.magnetic_charge().sum()) % 3
        for acc in self.accumulators.values():
            e = (e + acc[0]) % 3
            m = (m + acc[1]) % 3
        return e, m

    def conservation_ok(self) -> bool:
        return self.total_charge() == (0, 0)

    # -- accumulator plumbing -------------------------------------------

    def _owner_defect(self, near: Site) -> Site:
        """Accumulator key for charge handed to the defect sector:
        nearest defect plaquette, lexicographic tie-break, else the
        reference plaquette itself (closed-membrane bookkeeping)."""
        candidates = set(self.mu_plaquettes()) | self.scheduled_sites()
        if not candidates:
            return near
        return min(
            sorted(candidates),
            key=lambda p: (spatial_distance(p, near, self.L), p),
        )

    def _credit(self, key: Site, de: int, dm: int) -> None:
        de %= 3
        dm %= 3
        if de == 0 and dm == 0:
            return
        acc = self.accumulators.setdefault(key, [0, 0])
        acc[0] = (acc[0] + de) % 3
        acc[1] = (acc[1] + dm) % 3
        if acc == [0, 0]:
            del self.accumulators[key]

    def release_accumulator(self, key: Site) -> None:
        """Turn a defect's hidden content into visible charge at its
        location (e lands on the NE corner vertex)."""
        acc = self.accumulators.pop(key, None)
        if acc is None:
            return
        x, y = key
        corner = ((x + 1) % self.L, (y + 1) % self.L)
        self.offsetE[corner] = (self.offsetE[corner] + acc[0]) % 3
        self.offsetM[key] = (self.offsetM[key] + acc[1]) % 3

    # -- region geometry -------------------------------------------------

    def region_interior_vertices(self, region: frozenset[Site]) -> list[Site]:
        L = self.L
        out = []
        for x in range(L):
            for y in range(L):
                corners = (
                    ((x - 1) % L, (y - 1) % L),
                    (x, (y - 1) % L),
                    ((x - 1) % L, y),
                    (x, y),
                )
                if all(c in region for c in corners):
                    out.append((x, y))
        return out

    def region_edges(self, region: frozenset[Site]) -> tuple[set[Edge], set[Edge]]:
        """(all measured edges, wall subset) for a plaquette region."""
        touched: set[Edge] = set()
        for p in region:
            touched.update(plaquette_boundary(*p, self.L).values())
        wall = {
            e
            for e in touched
            if sum(s in region for s in edge_sides(e, self.L)) == 1
        }
        return touched, wall

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        blob = {
            "L": self.L,
            "qubitX": self.qubitX.tolist(),
            "qubitZ": self.qubitZ.tolist(),
            "qutritX": self.qutritX.tolist(),
            "qutritZ": self.qutritZ.tolist(),
            "offsetE": self.offsetE.tolist(),
            "offsetM": self.offsetM.tolist(),
            "gauge": self.gauge.tolist(),
            "wall_time": sorted(
                [int(x), int(y), int(t)] for (x, y), t in self.wall_time.items()
            ),
            "accumulators": sorted(
                [int(x), int(y), int(acc[0]), int(acc[1])]
                for (x, y), acc in self.accumulators.items()
            ),
            "schedule": [
                [a.id, int(a.plaquette[0]), int(a.plaquette[1]), a.pair]
                for a in self.schedule
            ],
        }
        return json.dumps(blob, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FrameState":
        blob = json.loads(text)
        frame = cls(blob["L"])
        for name in ("qubitX", "qubitZ", "qutritX", "qutritZ"):
            getattr(frame, name)[:] = np.asarray(blob[name], dtype=np.int8)
        frame.offsetE[:] = np.asarray(blob["offsetE"], dtype=np.int8)
        frame.offsetM[:] = np.asarray(blob["offsetM"], dtype=np.int8)
        frame.gauge[:] = np.asarray(blob["gauge"], dtype=np.int8)
        frame.wall_time = {(x, y): t for x, y, t in blob["wall_time"]}
        frame.accumulators = {(x, y): [a, b] for x, y, a, b in blob["accumulators"]}
        frame.schedule = [
            ScheduledAnyon(i, (x, y), pr) for i, x, y, pr in blob["schedule"]
        ]
        return frame

    def copy(self) -> "FrameState":
        return FrameState.from_json(self.to_json())


# ---------------------------------------------------------------------------
# guarded mutation: absorption and conservation bookkeeping
# ---------------------------------------------------------------------------


def _fully_z3_vertex_mask(frame: FrameState) -> np.ndarray:
    g = frame.gauge.astype(bool)
    return (
        g
        & np.roll(g, 1, axis=0)
        & np.roll(g, 1, axis=1)
        & np.roll(np.roll(g, 1, axis=0), 1, axis=1)
    )


def _mutate_tracked(
    frame: FrameState,
    mutate,
    owner_hint: Site,
    absorb: bool = True,
    owner_override: Site | None = None,
):
    """Run a layer mutation, then settle the books. Visible charge
    sitting on a defect (magnetic) or on one of its corner vertices
    (electric) is swallowed into that defect's accumulator, except in
    charge-valued regions where defects are inert. Any net visible
    imbalance (a conjugation exchange) is credited to the owning
    defect, so total charge is exactly conserved."""
    mutate()

    defect = frame.beta_parity().astype(bool)
    for a in frame.schedule:
        defect[a.plaquette] = True
    if absorb and defect.any():
        hosts = sorted((int(x), int(y)) for x, y in np.argwhere(defect))
        corner = (
            defect
            | np.roll(defect, 1, axis=0)
            | np.roll(defect, 1, axis=1)
            | np.roll(np.roll(defect, 1, axis=0), 1, axis=1)
        )
        e_chg = frame.electric_charge()
        eat_e = corner & (e_chg != 0) & ~_fully_z3_vertex_mask(frame)
        for x, y in sorted(map(tuple, np.argwhere(eat_e))):
            v = (int(x), int(y))
            host = min(hosts, key=lambda p: (spatial_distance(p, v, frame.L), p))
            q = int(e_chg[v])
            frame.offsetE[v] = (frame.offsetE[v] - q) % 3
            frame._credit(host, q, 0)
        m_chg = frame.magnetic_charge()
        eat_m = defect & (m_chg != 0) & ~frame.gauge.astype(bool)
        for x, y in sorted(map(tuple, np.argwhere(eat_m))):
            p = (int(x), int(y))
            q = int(m_chg[p])
            frame.offsetM[p] = (frame.offsetM[p] - q) % 3
            frame._credit(p, 0, q)

    e_tot, m_tot = frame.total_charge()
    if e_tot or m_tot:
        key = owner_override if owner_override is not None else frame._owner_defect(owner_hint)
        frame._credit(key, -e_tot, -m_tot)


def _edge_ref_plaquette(edge: Edge, L: int) -> Site:
    return edge_sides(edge, L)[0]


def apply_fault(frame: FrameState, fault: Fault) -> FrameState:
    """Apply one spatial fault. measFlip faults are handled by
    measure_round and are ignored here."""
    if fault.kind == "measFlip":
        return frame
    L = frame.L
    layer = LAYER_INDEX[fault.sub]
    x, y = fault.x % L, fault.y % L
    edge: Edge = (fault.sub, x, y)
    hint = _edge_ref_plaquette(edge, L)

    if fault.kind == "qubitZ":
        frame.qubitZ[layer, x, y] ^= 1
        return frame

    if fault.kind == "qubitX":
        def flip():
            frame.qubitX[layer, x, y] ^= 1
        _mutate_tracked(frame, flip, hint)
        return frame

    power = fault.power % 3
    target = frame.qutritZ if fault.kind == "qutritZ" else frame.qutritX

    def bump():
        target[layer, x, y] = (target[layer, x, y] + power) % 3

    _mutate_tracked(frame, bump, hint)
    return frame


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------


def measure_round(
    frame: FrameState, t: int, meas_errors: Iterable[Fault] = ()
) -> Readings:
    L = frame.L
    gauge = frame.gauge.astype(bool)

    beta = (1 - 2 * frame.beta_parity()).astype(np.int8)
    alpha = (1 - 2 * frame.alpha_parity()).astype(np.int8)
    e_chg = frame.electric_charge()
    m_chg = frame.magnetic_charge()

    # which stations still have their gauge qubits
    g = gauge
    around_vertex = (
        g
        | np.roll(g, 1, axis=0)
        | np.roll(g, 1, axis=1)
        | np.roll(np.roll(g, 1, axis=0), 1, axis=1)
    )
    fully_z3_vertex = (
        g
        & np.roll(g, 1, axis=0)
        & np.roll(g, 1, axis=1)
        & np.roll(np.roll(g, 1, axis=0), 1, axis=1)
    )
    edge_touched_plaquette = (
        g
        | np.roll(g, 1, axis=0)
        | np.roll(g, -1, axis=0)
        | np.roll(g, 1, axis=1)
        | np.roll(g, -1, axis=1)
    )

    eta_valid = ~around_vertex
    sv_valid = ~around_vertex
    sp_valid = ~edge_touched_plaquette
    e3_valid = fully_z3_vertex
    m3_valid = g.copy()

    # hiding: binarized charge readings blank out next to any defect
    defect = frame.beta_parity().astype(bool)
    for a in frame.schedule:
        defect[a.plaquette] = True
    near_defect = defect.copy()
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx or dy:
                near_defect |= np.roll(np.roll(defect, dx, axis=0), dy, axis=1)
    sv_valid &= ~near_defect
    sp_valid &= ~near_defect

    sv = np.where(e_chg == 0, 1, -1).astype(np.int8)
    sp = np.where(m_chg == 0, 1, -1).astype(np.int8)

    readings = Readings(
        t=t,
        mu=beta,
        eta=alpha,
        eta_valid=eta_valid,
        sv=sv,
        sv_valid=sv_valid,
        sp=sp,
        sp_valid=sp_valid,
        e3=e_chg,
        e3_valid=e3_valid,
        m3=m_chg,
        m3_valid=m3_valid,
    )

    for f in meas_errors:
        if f.kind != "measFlip":
            continue
        x, y = f.x % L, f.y % L
        if f.sub == "mu":
            readings.mu[x, y] = -readings.mu[x, y]
        elif f.sub == "eta":
            if readings.eta_valid[x, y]:
                readings.eta[x, y] = -readings.eta[x, y]
        elif f.sub == "e":
            if readings.e3_valid[x, y]:
                readings.e3[x, y] = (readings.e3[x, y] + 1) % 3
            elif readings.sv_valid[x, y]:
                readings.sv[x, y] = -readings.sv[x, y]
        elif f.sub == "m":
            if readings.m3_valid[x, y]:
                readings.m3[x, y] = (readings.m3[x, y] + 1) % 3
            elif readings.sp_valid[x, y]:
                readings.sp[x, y] = -readings.sp[x, y]

    frame.last_readings = readings
    return readings


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def region_mask(region: frozenset[Site], L: int) -> np.ndarray:
    m = np.zeros((L, L), dtype=bool)
    for p in region:
        m[p] = True
    return m


def torus_box(lo: Site, span: tuple[int, int], L: int) -> frozenset[Site]:
    if span[0] > L or span[1] > L:
        raise ValueError("box larger than lattice")
    return frozenset(
        ((lo[0] + i) % L, (lo[1] + j) % L)
        for i in range(span[0])
        for j in range(span[1])
    )


def bounding_region(sites: Iterable[Site], L: int, pad: int = 1) -> frozenset[Site]:
    """Smallest wrap-aware box around the sites, grown by pad rings,
    clamped to the full lattice."""
    pts = sorted(set(sites))
    if not pts:
        raise ValueError("empty site set")
    lo = [0, 0]
    span = [0, 0]
    for axis in range(2):
        vals = sorted({p[axis] for p in pts})
        if len(vals) == 1:
            start, width = vals[0], 1
        else:
            gaps = [
                ((vals[(i + 1) % len(vals)] - vals[i]) % L, i)
                for i in range(len(vals))
            ]
            best_gap, idx = max(gaps)
            start = vals[(idx + 1) % len(vals)]
            width = L - best_gap + 1
        start -= pad
        width += 2 * pad
        if width >= L:
            start, width = 0, L
        lo[axis] = start % L
        span[axis] = width
    return torus_box((lo[0], lo[1]), (span[0], span[1]), L)


def _interior_vertex_mask(mask: np.ndarray) -> np.ndarray:
    """Vertices whose four surrounding plaquettes are all in the mask."""
    return (
        mask
        & np.roll(mask, 1, axis=0)
        & np.roll(mask, 1, axis=1)
        & np.roll(np.roll(mask, 1, axis=0), 1, axis=1)
    )


# ---------------------------------------------------------------------------
# ungauging and neutrality
# ---------------------------------------------------------------------------


def ungauge_region(
    frame: FrameState,
    plaquettes: Iterable[Site],
    t: int,
    dwell_deadline: int,
    expected_charge: str = "1",
    allowed_anyons: tuple[int, ...] = (),
) -> tuple[GaugeRegion, list[DetectorEvent], dict]:
    """Switch a plaquette region to the charge-valued phase.

    Returns the region handle, the boundary detector events (reading
    changes not explained by the last round), and a membrane report
    {closed, open_ends} for the region."""
    region = frozenset((x % frame.L, y % frame.L) for x, y in plaquettes)
    if not region:
        raise EngineError("empty gauge region")
    for p in region:
        if frame.gauge[p]:
            raise EngineError(f"plaquette {p} already inside an open region")
    inside_ids = [a.id for a in frame.schedule if a.plaquette in region]
    for aid in inside_ids:
        if aid not in allowed_anyons:
            raise EngineError(f"computational anyon {aid} not scheduled for this region")

    prior = frame.last_readings
    mask = region_mask(region, frame.L)
    interior_v = _interior_vertex_mask(mask)

    # release hidden content of defects inside the region
    for key in sorted(frame.accumulators):
        if key in region:
            frame.release_accumulator(key)

    # measure out interior gauge qubits; eta endpoints jump to the wall
    touched, wall = frame.region_edges(region)
    for e in touched:
        if e not in wall:
            frame.qubitZ[LAYER_INDEX[e[0]], e[1], e[2]] = 0

    for p in region:
        frame.gauge[p] = 1
        frame.wall_time[p] = t

    beta_now = (1 - 2 * frame.beta_parity()).astype(np.int8)
    e_now = frame.electric_charge()
    m_now = frame.magnetic_charge()

    events: list[DetectorEvent] = []
    if prior is not None:
        for x, y in sorted(map(tuple, np.argwhere(mask))):
            if prior.mu[x, y] != beta_now[x, y]:
                events.append(DetectorEvent("mu", int(x), int(y), t, 1, boundary=True))
            if prior.sp_valid[x, y]:
                seen = prior.sp[x, y] == -1
                if seen != (m_now[x, y] != 0):
                    delta = int(m_now[x, y]) or 1
                    events.append(DetectorEvent("m", int(x), int(y), t, delta, boundary=True))
        for x, y in sorted(map(tuple, np.argwhere(interior_v))):
            if prior.sv_valid[x, y]:
                seen = prior.sv[x, y] == -1
                if seen != (e_now[x, y] != 0):
                    delta = int(e_now[x, y]) or 1
                    events.append(DetectorEvent("e", int(x), int(y), t, delta, boundary=True))

    open_ends = sorted(p for p in frame.mu_plaquettes() if p in region)
    report = {"closed": not open_ends, "open_ends": open_ends}
    handle = GaugeRegion(region, t, dwell_deadline, expected_charge, tuple(inside_ids))
    return handle, events, report


def evaluate_neutrality(frame: FrameState, region: GaugeRegion | frozenset[Site]) -> str:
    """Total visible charge class of an open region: mod-3 sums of the
    charge fields over the region, mapped to an anyon type."""
    plaquettes = region.plaquettes if isinstance(region, GaugeRegion) else region
    mask = region_mask(frozenset(plaquettes), frame.L)
    for p in sorted(plaquettes):
        if not frame.gauge[p]:
            raise EngineError(f"plaquette {p} is not in the charge-valued phase")
    e_sum = int(frame.electric_charge()[_interior_vertex_mask(mask)].sum()) % 3
    m_sum = int(frame.magnetic_charge()[mask].sum()) % 3
    return orbit_of(MicroCharge(e_sum, m_sum, 0))


# ---------------------------------------------------------------------------
# charge and defect transport
# ---------------------------------------------------------------------------

_INV3 = {1: 1, 2: 2}


def _site_path(src: Site, dst: Site, L: int, order: str = "xy") -> list[tuple[int, int]]:
    """Unit steps (dx, dy) along a shortest L-shaped torus path."""
    def axis_steps(a: int, b: int) -> list[int]:
        d = (b - a) % L
        if d <= L - d:
            return [1] * d
        return [-1] * (L - d)

    xs = axis_steps(src[0], dst[0])
    ys = axis_steps(src[1], dst[1])
    if order == "xy":
        return [(s, 0) for s in xs] + [(0, s) for s in ys]
    return [(0, s) for s in ys] + [(s, 0) for s in xs]


def _crossing_owner(frame: FrameState, edge: Edge) -> Site:
    """Defect held accountable for a membrane crossing: the one nearest
    the crossed edge. In practice that is an endpoint of the crossed
    arc, so the conjugation exchange stays within the owning pair, and
    a retraced path books its exchange against the same defect."""
    defect = frame.beta_parity().astype(bool)
    for a in frame.schedule:
        defect[a.plaquette] = True
    hosts = sorted((int(x), int(y)) for x, y in np.argwhere(defect))
    sides = edge_sides(edge, frame.L)
    if not hosts:
        return sides[0]
    return min(
        hosts,
        key=lambda p: (min(spatial_distance(p, s, frame.L) for s in sides), p),
    )


def move_electric(
    frame: FrameState,
    src: Site,
    dst: Site,
    amount: int,
    order: str = "xy",
    owner: Site | None = None,
) -> int:
    """Carry a vertex charge along an L-path, solving each edge power
    so that no intermediate residue is left. Returns the charge that
    actually arrives (conjugated when the path crosses a membrane)."""
    amount %= 3
    if amount == 0 or src == dst:
        frame.last_move_crossings = 0
        return amount
    L = frame.L
    plan: list[tuple[int, int, int, int]] = []
    carry = amount
    u = src
    first_cross: Edge | None = None
    crossings = 0
    for dx, dy in _site_path(src, dst, L, order):
        w = ((u[0] + dx) % L, (u[1] + dy) % L)
        if dx == 1:
            layer, ex, ey = 0, u[0], u[1]
            k_u, k_w = 1, 2 - int(frame.qubitX[0, ex, ey])
        elif dx == -1:
            layer, ex, ey = 0, w[0], w[1]
            k_u, k_w = 2 - int(frame.qubitX[0, ex, ey]), 1
        elif dy == 1:
            layer, ex, ey = 1, u[0], u[1]
            k_u, k_w = 1, 2 - int(frame.qubitX[1, ex, ey])
        else:
            layer, ex, ey = 1, w[0], w[1]
            k_u, k_w = 2 - int(frame.qubitX[1, ex, ey]), 1
        if frame.qubitX[layer, ex, ey]:
            crossings += 1
            if first_cross is None:
                first_cross = ("h" if layer == 0 else "v", ex, ey)
        delta = (carry * _INV3[k_u]) % 3
        plan.append((layer, ex, ey, delta))
        carry = (-k_w * delta) % 3
        u = w

    def run():
        for layer, ex, ey, delta in plan:
            frame.qutritZ[layer, ex, ey] = (frame.qutritZ[layer, ex, ey] + delta) % 3

    if owner is None and first_cross is not None:
        owner = _crossing_owner(frame, first_cross)
    hint = edge_sides(("h" if plan[0][0] == 0 else "v", plan[0][1], plan[0][2]), L)[0]
    _mutate_tracked(frame, run, hint, owner_override=owner)
    frame.last_move_crossings = crossings
    return carry


def _plaquette_step_edge(u: Site, dx: int, dy: int, L: int) -> Edge:
    if dx == 1:
        return ("v", (u[0] + 1) % L, u[1])
    if dx == -1:
        return ("v", u[0], u[1])
    if dy == 1:
        return ("h", u[0], (u[1] + 1) % L)
    return ("h", u[0], u[1])


def _m_coeff(frame: FrameState, p: Site, role: str) -> int:
    L = frame.L
    x, y = p
    b_w = int(frame.qubitX[1, x, y])
    b_n = int(frame.qubitX[0, x, (y + 1) % L])
    b_e = int(frame.qubitX[1, (x + 1) % L, y])
    b_s = int(frame.qubitX[0, x, y])
    if role == "W":
        return 1
    if role == "N":
        return 1 + b_w
    if role == "E":
        return 2 - (b_w + b_n + b_e) % 2
    return 2 - (b_w + b_n + b_e + b_s) % 2


def move_magnetic(
    frame: FrameState,
    src: Site,
    dst: Site,
    amount: int,
    order: str = "xy",
    owner: Site | None = None,
) -> int:
    """Carry a plaquette charge along a dual L-path. Same contract as
    move_electric."""
    amount %= 3
    if amount == 0 or src == dst:
        frame.last_move_crossings = 0
        return amount
    L = frame.L
    plan: list[tuple[int, int, int, int]] = []
    carry = amount
    u = src
    first_cross: Edge | None = None
    crossings = 0
    for dx, dy in _site_path(src, dst, L, order):
        w = ((u[0] + dx) % L, (u[1] + dy) % L)
        edge = _plaquette_step_edge(u, dx, dy, L)
        role_u = {(1, 0): "E", (-1, 0): "W", (0, 1): "N", (0, -1): "S"}[(dx, dy)]
        role_w = {(1, 0): "W", (-1, 0): "E", (0, 1): "S", (0, -1): "N"}[(dx, dy)]
        l_u = _m_coeff(frame, u, role_u)
        l_w = _m_coeff(frame, w, role_w)
        if (-l_w * _INV3[l_u]) % 3 == 2:
            crossings += 1
            if first_cross is None:
                first_cross = edge
        delta = (-carry * _INV3[l_u]) % 3
        plan.append((LAYER_INDEX[edge[0]], edge[1], edge[2], delta))
        carry = (l_w * delta) % 3
        u = w

    def run():
        for layer, ex, ey, delta in plan:
            frame.qutritX[layer, ex, ey] = (frame.qutritX[layer, ex, ey] + delta) % 3

    if owner is None and first_cross is not None:
        owner = _crossing_owner(frame, first_cross)
    _mutate_tracked(frame, run, src, owner_override=owner)
    frame.last_move_crossings = crossings
    return carry


def move_charge_preserving(
    frame: FrameState,
    species: str,
    src: Site,
    dst: Site,
    amount: int,
    owner: Site | None = None,
) -> int:
    """Deliver charge with its value intact. A path crossing a membrane
    an odd number of times conjugates the carried charge, so a naive
    L-path can turn a neutral configuration non-neutral once summed at
    the target. Every membrane is an open arc (closed ones get erased),
    so its complement is connected and an even-crossing route always
    exists; this tries the two direct orders, then L-path pairs through
    waypoints, undoing any attempt that arrives conjugated. Waypoints
    keep clear of defect neighborhoods so nothing absorbs mid-route."""
    amount %= 3
    if amount == 0 or src == dst:
        return amount
    mover = move_electric if species == "e" else move_magnetic
    L = frame.L

    def swap(order: str) -> str:
        return "yx" if order == "xy" else "xy"

    def attempt(legs: list[tuple[Site, Site, str]]) -> bool:
        carry = amount
        for a, b, order in legs:
            carry = mover(frame, a, b, carry, order, owner=owner)
        if carry == amount:
            return True
        # retrace the same geometric path; same crossing parity undoes
        # the conjugation, so `amount` lands back at src
        for a, b, order in reversed(legs):
            carry = mover(frame, b, a, carry, swap(order), owner=owner)
        return False

    if attempt([(src, dst, "xy")]) or attempt([(src, dst, "yx")]):
        return amount

    defects = set(frame.mu_plaquettes()) | set(frame.scheduled_sites())

    def clear_of_defects(w: Site) -> bool:
        for d in defects:
            dx = min((w[0] - d[0]) % L, (d[0] - w[0]) % L)
            dy = min((w[1] - d[1]) % L, (d[1] - w[1]) % L)
            if max(dx, dy) <= 2:
                return False
        return True

    seen = {src, dst}
    for ox in (0, 2, -2, 5, -5, L // 2):
        for oy in (0, 2, -2, 5, -5, L // 2):
            for w in (
                ((src[0] + ox) % L, (dst[1] + oy) % L),
                ((dst[0] + ox) % L, (src[1] + oy) % L),
            ):
                if w in seen or not clear_of_defects(w):
                    continue
                seen.add(w)
                if attempt([(src, w, "xy"), (w, dst, "xy")]):
                    return amount
    return mover(frame, src, dst, amount, "xy", owner=owner)


def move_defect(frame: FrameState, src: Site, dst: Site, owner: Site | None = None) -> None:
    """Drag a membrane endpoint along a dual L-path. The defect's
    hidden content rides along; on annihilation it becomes visible."""
    if src == dst:
        return
    L = frame.L
    edges: list[Edge] = []
    u = src
    for dx, dy in _site_path(src, dst, L, "xy"):
        edges.append(_plaquette_step_edge(u, dx, dy, L))
        u = ((u[0] + dx) % L, (u[1] + dy) % L)

    def run():
        for kind, ex, ey in edges:
            frame.qubitX[LAYER_INDEX[kind], ex, ey] ^= 1

    _mutate_tracked(frame, run, dst, owner_override=owner or dst)
    if src in frame.accumulators:
        acc = frame.accumulators.pop(src)
        frame._credit(dst, acc[0], acc[1])
    for a in frame.schedule:
        if a.plaquette == src:
            a.plaquette = dst
    if not frame.beta_parity()[dst]:
        frame.release_accumulator(dst)


@dataclass(frozen=True)
class Move:
    kind: str  # "mu", "e" or "m"
    src: Site
    dst: Site
    amount: int = 0


def apply_correction(frame: FrameState, region: GaugeRegion, moves: Sequence[Move]) -> None:
    """Execute explicit transport moves inside an open region, then
    check the region reads as its expected charge class."""
    for p in sorted(region.plaquettes):
        if not frame.gauge[p]:
            raise EngineError("correction outside the charge-valued phase")
    for mv in moves:
        if mv.kind == "mu":
            move_defect(frame, mv.src, mv.dst)
        elif mv.kind == "e":
            move_electric(frame, mv.src, mv.dst, mv.amount)
        elif mv.kind == "m":
            move_magnetic(frame, mv.src, mv.dst, mv.amount)
        else:
            raise EngineError(f"unknown move kind {mv.kind!r}")
    got = evaluate_neutrality(frame, region)
    if got != region.expected_charge:
        raise EngineError(
            f"correction left charge {got!r}, expected {region.expected_charge!r}"
        )


# ---------------------------------------------------------------------------
# whole-region correction
# ---------------------------------------------------------------------------


def _interior_edges(frame: FrameState, region: frozenset[Site]) -> list[Edge]:
    touched, wall = frame.region_edges(region)
    return sorted(e for e in touched if e not in wall)


def _erase_closed_membranes(frame: FrameState, region: frozenset[Site], anchor: Site) -> None:
    """Clear membrane bits on interior edges when doing so moves no
    defect endpoint. Through-going membranes (ends outside) are kept."""
    candidates = [
        e for e in _interior_edges(frame, region)
        if frame.qubitX[LAYER_INDEX[e[0]], e[1], e[2]]
    ]
    if not candidates:
        return

    def try_erase(edges: list[Edge]) -> bool:
        before = frame.beta_parity()
        for kind, x, y in edges:
            frame.qubitX[LAYER_INDEX[kind], x, y] ^= 1
        closed = bool(np.array_equal(before, frame.beta_parity()))
        for kind, x, y in edges:
            frame.qubitX[LAYER_INDEX[kind], x, y] ^= 1
        if not closed:
            return False

        def run():
            for kind, x, y in edges:
                frame.qubitX[LAYER_INDEX[kind], x, y] ^= 1

        _mutate_tracked(frame, run, anchor, absorb=False, owner_override=anchor)
        frame.release_accumulator(anchor)
        return True

    if try_erase(candidates):
        return
    # split into dual-connected components and keep only the cycles
    parent = {e: e for e in candidates}

    def find(e):
        while parent[e] != e:
            parent[e] = parent[parent[e]]
            e = parent[e]
        return e

    side_map: dict[Site, Edge] = {}
    for e in candidates:
        for s in edge_sides(e, frame.L):
            if s in side_map:
                ra, rb = find(side_map[s]), find(e)
                if ra != rb:
                    parent[ra] = rb
            else:
                side_map[s] = e
    groups: dict[Edge, list[Edge]] = {}
    for e in candidates:
        groups.setdefault(find(e), []).append(e)
    for root in sorted(groups):
        try_erase(sorted(groups[root]))


def _gather_charges(
    frame: FrameState,
    region: frozenset[Site],
    species: str,
    max_passes: int = 6,
) -> int:
    """Move all visible charge of one species in the region onto one
    site. Returns the final residue mod 3."""
    mask = region_mask(region, frame.L)
    if species == "e":
        site_mask = _interior_vertex_mask(mask)
        fieldf = lambda: frame.electric_charge()
    else:
        site_mask = mask
        fieldf = lambda: frame.magnetic_charge()
    target: Site | None = None
    for _ in range(max_passes):
        vals = fieldf()
        sites = [
            (int(x), int(y))
            for x, y in sorted(map(tuple, np.argwhere(site_mask & (vals != 0))))
        ]
        if not sites:
            return 0
        if target is None:
            target = sites[0]
        moved = False
        for s in sites:
            if s == target:
                continue
            q = int(fieldf()[s])
            if q == 0:
                continue
            move_charge_preserving(frame, species, s, target, q)
            moved = True
        if not moved:
            break
    vals = fieldf()
    return int(vals[site_mask].sum()) % 3


def perform_region_correction(frame: FrameState, region: GaugeRegion) -> dict:
    """Try to return an open region to its expected charge class:
    fuse defect pairs, erase closed membranes, and sweep all visible
    charge together. Returns {success, residual, defects}."""
    plaqs = region.plaquettes
    for p in sorted(plaqs):
        if not frame.gauge[p]:
            raise EngineError("correction outside the charge-valued phase")
    anchor = min(plaqs)
    scheduled = frame.scheduled_sites()

    defects = [p for p in frame.mu_plaquettes() if p in plaqs and p not in scheduled]
    n_defects = len(defects)
    if n_defects % 2:
        return {"success": False, "residual": "mu", "defects": n_defects}
    pending = sorted(defects)
    while pending:
        a = pending.pop(0)
        partner = min(pending, key=lambda b: (spatial_distance(a, b, frame.L), b))
        pending.remove(partner)
        move_defect(frame, a, partner)

    _erase_closed_membranes(frame, plaqs, anchor)

    e_res = _gather_charges(frame, plaqs, "e")
    m_res = _gather_charges(frame, plaqs, "m")
    residual = orbit_of(MicroCharge(e_res, m_res, 0))
    return {
        "success": residual == region.expected_charge,
        "residual": residual,
        "defects": n_defects,
    }


# ---------------------------------------------------------------------------
# regauging
# ---------------------------------------------------------------------------


def regauge_region(
    frame: FrameState,
    region: GaugeRegion,
    t: int,
    rng: np.random.Generator | None = None,
    eta_emission: bool = True,
) -> list[Edge]:
    """Return a region to the full phase. Requires the dwell deadline
    to have passed and the region to read as its expected class. Each
    wall edge independently emits an eta string end with prob 1/2."""
    if t < region.dwell_deadline:
        raise EngineError(
            f"regauge at t={t} before dwell deadline {region.dwell_deadline}"
        )
    got = evaluate_neutrality(frame, region)
    if got != region.expected_charge:
        raise EngineError(f"region reads {got!r}, expected {region.expected_charge!r}")
    emitted: list[Edge] = []
    if eta_emission:
        if rng is None:
            raise ValueError("eta emission needs an rng")
        _, wall = frame.region_edges(region.plaquettes)
        for e in sorted(wall):
            if rng.random() < 0.5:
                frame.qubitZ[LAYER_INDEX[e[0]], e[1], e[2]] ^= 1
                emitted.append(e)
    for p in region.plaquettes:
        frame.gauge[p] = 0
        frame.wall_time.pop(p, None)
    return emitted


# ---------------------------------------------------------------------------
# logical memory
# ---------------------------------------------------------------------------


def encode_logical(
    frame: FrameState,
    positions: Sequence[Site],
    bit: int,
    min_separation: int = 4,
) -> None:
    """Park two defect pairs and seed their hidden fusion content.
    bit 0: both pairs fuse to vacuum. bit 1: both pairs fuse to the
    two-dimensional electric class (conjugate seeds, so the global
    charge stays zero)."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    if len(positions) != 4:
        raise ValueError("need four defect positions")
    if frame.schedule:
        raise EngineError("logical content already encoded")
    if frame.gauge.any():
        raise EngineError("encode requires the full phase everywhere")
    pos = [(x % frame.L, y % frame.L) for x, y in positions]
    if len(set(pos)) != 4:
        raise ValueError("defect positions must be distinct")
    for i in range(4):
        for j in range(i + 1, 4):
            if spatial_distance(pos[i], pos[j], frame.L) < min_separation:
                raise ValueError(
                    f"positions {pos[i]} and {pos[j]} closer than {min_separation}"
                )
    for pair_idx, (ia, ib) in enumerate(((0, 1), (2, 3))):
        pa, pb = pos[ia], pos[ib]
        edges: list[Edge] = []
        u = pa
        for dx, dy in _site_path(pa, pb, frame.L, "xy"):
            edges.append(_plaquette_step_edge(u, dx, dy, frame.L))
            u = ((u[0] + dx) % frame.L, (u[1] + dy) % frame.L)

        def run(edges=edges):
            for kind, x, y in edges:
                frame.qubitX[LAYER_INDEX[kind], x, y] ^= 1

        _mutate_tracked(frame, run, pa, absorb=False, owner_override=pa)
        frame.schedule.append(ScheduledAnyon(ia, pa, pair_idx))
        frame.schedule.append(ScheduledAnyon(ib, pb, pair_idx))
    if bit == 1:
        frame._credit(pos[0], 1, 0)
        frame._credit(pos[2], 2, 0)


def readout_logical(frame: FrameState, t: int) -> dict:
    """Open one region per defect pair and read the pair's total
    charge class. Vacuum or the eta class decode to 0, the electric
    class to 1, anything else is flagged inconsistent.

    Each region pads the pair's box by 2 so the masked neighborhood of
    both defects sits fully interior: charge pairs born blind next to a
    defect then cancel inside instead of straddling the wall. The two
    regions open one after the other, closing in between, so they may
    share plaquettes on tight lattices."""
    if len(frame.schedule) != 4:
        raise EngineError("frame does not hold an encoded pair layout")
    groups: dict[int, list[ScheduledAnyon]] = {}
    for a in frame.schedule:
        groups.setdefault(a.pair, []).append(a)
    if sorted(groups) != [0, 1] or any(len(g) != 2 for g in groups.values()):
        raise EngineError("frame does not hold an encoded pair layout")
    regions = {
        k: bounding_region([a.plaquette for a in g], frame.L, pad=2)
        for k, g in groups.items()
    }
    for k in (0, 1):
        inside = {a.id for a in frame.schedule if a.plaquette in regions[k]}
        if inside != {a.id for a in groups[k]}:
            raise EngineError("readout regions mix pairs; pairs are too close")
    orbits: list[str] = []
    events: list[DetectorEvent] = []
    for k in (0, 1):
        allowed = tuple(a.id for a in groups[k])
        handle, evs, _ = ungauge_region(
            frame, regions[k], t + k, dwell_deadline=t + k, allowed_anyons=allowed
        )
        events.extend(evs)
        got = evaluate_neutrality(frame, handle)
        orbits.append(got)
        regauge_region(
            frame, replace(handle, expected_charge=got), t + k, eta_emission=False
        )
    bits = [0 if o in ("1", "eta") else 1 if o == "e" else None for o in orbits]
    consistent = bits[0] is not None and bits[0] == bits[1]
    return {
        "bit": bits[0] if consistent else None,
        "orbits": orbits,
        "pair_bits": bits,
        "consistent": consistent,
        "events": events,
    }


def eta_winding(frame: FrameState) -> tuple[int, int]:
    """Homology class of the eta string pattern: parities across a
    fixed vertical and horizontal cut."""
    return (
        int(frame.qubitZ[0, 0, :].sum()) % 2,
        int(frame.qubitZ[1, :, 0].sum()) % 2,
    )
