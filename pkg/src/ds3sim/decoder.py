"""Online decoder: cluster detection events, defer or commit, and drive
the ungauge / neutralize / correct / regauge cycle on the frame.

The decode loop runs once per measured round, strictly after the round's
readings are stored on the frame. Each step diffs the reported record
against the previous round, folds new events into spacetime clusters,
and acts on clusters that have aged past their own diameter:

  1. New events join the cluster whose linking radius reaches them
     (single linkage, radii doubling per escalation tier); unmatched
     events seed fresh clusters.
  2. A cluster too young to trust is deferred. Deferral reverses the
     most recent reading at each member site, which moves the detection
     into the next round. An event that never echoes back after its
     reversal was a reading ghost and is dropped on the spot.
  3. A ripe cluster in the full phase is opened: its covering box is
     switched to the charge-valued phase, where the collective class of
     its content is a sum of local readings.
  4. After the dwell, a region reading as its expected class is swept
     clean and closed. Anything else escalates: the linking radius
     doubles, nearby clusters are merged, and the open region grows by
     exactly the new plaquettes. Escalation past the lattice volume is
     a declared failure, left for the run accounting.

Eta events never participate: they cannot hide other species, so they
are logged and matched globally once the run ends.

Ages and diameters are frozen at each event's first detection. The
reversal bookkeeping moves an event's position in the classical record,
not its age, so persistent excitations ripen on schedule. Reversals are
written into the frame's stored readings; the wall comparison made at
ungauge time therefore sees the same record the decoder reported.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .lattice import Edge
from .engine import (
    EngineError,
    FrameState,
    GaugeRegion,
    Readings,
    bounding_region,
    eta_winding,
    move_charge_preserving,
    move_defect,
    perform_region_correction,
    regauge_region,
    ungauge_region,
)
from .spacetime import DetectorEvent, distance, spatial_distance

Site = tuple[int, int]


@dataclass
class TrackedEvent:
    """One live detection the decoder is accounting for.

    ``t0`` is the first detection round and never changes; ripeness is
    measured against it. ``confirmed`` flips once the event echoes back
    after a deferral reversal, proving it was not a lone reading flip.
    ``delivered`` marks events swallowed by a wall opening, where the
    boundary comparison takes over from the station record.
    """

    species: str
    site: Site
    t0: int
    delta: int = 1
    confirmed: bool = False
    delivered: bool = False

    @property
    def key(self) -> tuple[str, Site]:
        return (self.species, self.site)


@dataclass
class ClusterRecord:
    id: int
    events: list[TrackedEvent] = field(default_factory=list)
    birth: int = 0
    diameter: int = 0
    status: str = "deferred"  # deferred | ripe | ungauged | closed
    tier: int = 0
    region: frozenset[Site] = frozenset()
    region_open_time: int | None = None
    dwell_deadline: int | None = None
    expected: str = "1"
    failed: bool = False

    def recompute(self, L: int) -> None:
        pts = [(ev.site[0], ev.site[1], ev.t0) for ev in self.events]
        if not pts:
            self.diameter = 0
            return
        self.birth = min(p[2] for p in pts)
        self.diameter = max(distance(p, q, L) for p in pts for q in pts)

    def link_radius(self) -> int:
        """Linking reach: twice the padded diameter, or the escalation
        tier's doubling radius once the cluster has been widened."""
        return max(2**self.tier, 2 * (self.diameter + 2))

    def region_handle(self) -> GaugeRegion:
        return GaugeRegion(
            self.region,
            self.region_open_time if self.region_open_time is not None else 0,
            self.dwell_deadline if self.dwell_deadline is not None else 0,
            self.expected,
            (),
        )


def age_rule(cluster: ClusterRecord, t: int) -> bool:
    """True when every member is at least as old as the cluster's own
    spacetime diameter. Ages count from first detections."""
    if not cluster.events:
        return False
    return all(t - ev.t0 >= cluster.diameter for ev in cluster.events)


def _confirmed(cluster: ClusterRecord) -> bool:
    return all(ev.confirmed or ev.delivered for ev in cluster.events)


def _covering_plaquettes(species: str, site: Site, L: int) -> list[Site]:
    """Plaquettes a region needs so the station at ``site`` is readable
    in the charge-valued phase."""
    x, y = site
    if species == "e":
        return [
            ((x - 1) % L, (y - 1) % L),
            ((x - 1) % L, y % L),
            (x % L, (y - 1) % L),
            (x % L, y % L),
        ]
    return [(x % L, y % L)]


class Decoder:
    """Per-shot decoder. Strict alternation with the frame: apply the
    round's faults, measure, then call ``step(t)``."""

    def __init__(
        self,
        frame: FrameState,
        rng: np.random.Generator | None = None,
        eta_emission: bool = True,
    ):
        self.frame = frame
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.eta_emission = eta_emission
        self.record: Readings | None = None
        self.clusters: dict[int, ClusterRecord] = {}
        self.closed: list[ClusterRecord] = []
        self.eta_log: list[DetectorEvent] = []
        self.actions: list[dict] = []
        self._next_id = 0
        self._expected_echo: dict[tuple[str, Site], int] = {}
        self._quiet: dict[tuple[str, Site], int] = {}
        self._adopt_e3: set[Site] = set()
        self._adopt_m3: set[Site] = set()
        self.max_tier = 0
        self.escalation_failed = False

    # -- event extraction ---------------------------------------------------

    def _diff_round(self, curr: Readings) -> list[DetectorEvent]:
        """Compare against the last valid value per station, not just the
        previous round. A station that spends a while masked (open wall,
        defect neighborhood) is still held to what it last showed, so
        charge revealed by a closing region fires an event instead of
        being resynced away silently."""
        prev = self.record
        if prev is None:
            return []
        t = curr.t
        out: list[DetectorEvent] = []

        # first reading inside a freshly opened region reflects content
        # the clusters already track; adopt it without firing
        for v in [v for v in sorted(self._adopt_e3) if curr.e3_valid[v]]:
            prev.e3[v] = curr.e3[v]
            prev.e3_valid[v] = True
            self._adopt_e3.discard(v)
        for p in [p for p in sorted(self._adopt_m3) if curr.m3_valid[p]]:
            prev.m3[p] = curr.m3[p]
            prev.m3_valid[p] = True
            self._adopt_m3.discard(p)

        def emit(species: str, changed: np.ndarray, deltas: np.ndarray | None = None):
            for x, y in np.argwhere(changed):
                d = int(deltas[x, y]) if deltas is not None else 1
                out.append(DetectorEvent(species, int(x), int(y), t, d))

        emit("mu", prev.mu != curr.mu)
        emit("eta", (prev.eta != curr.eta) & curr.eta_valid)
        emit("e", (prev.sv != curr.sv) & curr.sv_valid)
        e3d = (curr.e3.astype(np.int16) - prev.e3) % 3
        emit("e", (e3d != 0) & curr.e3_valid, e3d)
        emit("m", (prev.sp != curr.sp) & curr.sp_valid)
        m3d = (curr.m3.astype(np.int16) - prev.m3) % 3
        emit("m", (m3d != 0) & curr.m3_valid, m3d)
        return out

    def _update_record(self, curr: Readings) -> None:
        """Fold this round's valid readings (including any deferral
        reversals written into them) back into the persistent record."""
        rec = self.record
        if rec is None:
            # unread stations default to the vacuum reading (+1 / 0)
            self.record = Readings(
                t=curr.t,
                mu=curr.mu.copy(),
                eta=np.where(curr.eta_valid, curr.eta, 1).astype(curr.eta.dtype),
                eta_valid=curr.eta_valid.copy(),
                sv=np.where(curr.sv_valid, curr.sv, 1).astype(curr.sv.dtype),
                sv_valid=curr.sv_valid.copy(),
                sp=np.where(curr.sp_valid, curr.sp, 1).astype(curr.sp.dtype),
                sp_valid=curr.sp_valid.copy(),
                e3=np.where(curr.e3_valid, curr.e3, 0).astype(curr.e3.dtype),
                e3_valid=curr.e3_valid.copy(),
                m3=np.where(curr.m3_valid, curr.m3, 0).astype(curr.m3.dtype),
                m3_valid=curr.m3_valid.copy(),
            )
            return
        rec.t = curr.t
        rec.mu[:] = curr.mu
        for name in ("eta", "sv", "sp", "e3", "m3"):
            ok = getattr(curr, name + "_valid")
            getattr(rec, name)[ok] = getattr(curr, name)[ok]
            getattr(rec, name + "_valid")[ok] = True

    def _resync_record(self, region: frozenset[Site]) -> None:
        """A fused region is vacuum; the record must agree, otherwise the
        next round would book our own cleanup as fresh events."""
        rec = self.record
        if rec is None:
            return
        for p in sorted(region):
            rec.mu[p] = 1
            rec.sp[p] = 1
            rec.sp_valid[p] = True
            rec.m3[p] = 0
            rec.m3_valid[p] = True
        for v in sorted(self.frame.region_interior_vertices(region)):
            rec.sv[v] = 1
            rec.sv_valid[v] = True
            rec.e3[v] = 0
            rec.e3_valid[v] = True
            rec.eta[v] = 1
            rec.eta_valid[v] = True
        self._adopt_e3 -= set(self.frame.region_interior_vertices(region))
        self._adopt_m3 -= set(region)

    # -- clustering -----------------------------------------------------------

    def _new_cluster(self, t: int) -> ClusterRecord:
        c = ClusterRecord(id=self._next_id, birth=t)
        self._next_id += 1
        self.clusters[c.id] = c
        return c

    def _region_diameter(self, region: frozenset[Site]) -> int:
        pts = sorted(region)
        L = self.frame.L
        return max((spatial_distance(p, q, L) for p in pts for q in pts), default=0)

    def _reach(self, cluster: ClusterRecord, ev: DetectorEvent) -> bool:
        L = self.frame.L
        p = (ev.x, ev.y, ev.t)
        r = cluster.link_radius()
        for member in cluster.events:
            q = (member.site[0], member.site[1], member.t0)
            if distance(p, q, L) <= r:
                return True
        if cluster.region:
            wall_r = 2 * (self._region_diameter(cluster.region) + 2)
            site = (ev.x, ev.y)
            return any(
                spatial_distance(site, q, L) <= wall_r for q in cluster.region
            )
        return False

    def _merge(self, a: ClusterRecord, b: ClusterRecord) -> ClusterRecord:
        """Fold b into a: union events and regions, keep the larger tier
        and the wider deadline."""
        a.events.extend(b.events)
        a.tier = max(a.tier, b.tier)
        a.region = a.region | b.region
        if b.region_open_time is not None:
            a.region_open_time = (
                b.region_open_time
                if a.region_open_time is None
                else min(a.region_open_time, b.region_open_time)
            )
        if b.dwell_deadline is not None:
            a.dwell_deadline = (
                b.dwell_deadline
                if a.dwell_deadline is None
                else max(a.dwell_deadline, b.dwell_deadline)
            )
        if b.status == "ungauged":
            a.status = "ungauged"
        a.failed = a.failed or b.failed
        a.recompute(self.frame.L)
        del self.clusters[b.id]
        return a

    def _integrate_events(self, events: list[DetectorEvent], t: int) -> None:
        for ev in sorted(events):
            if ev.species == "eta":
                self.eta_log.append(ev)
                continue
            key = (ev.species, (ev.x, ev.y))
            if self._quiet.get(key) == ev.t:
                # our own correction showing up in the always-read
                # defect channel right after the wall closed
                del self._quiet[key]
                continue
            if key in self._expected_echo:
                # our own reversal echoing back: same excitation, one
                # round later. Confirm the tracked copy, do not re-add.
                del self._expected_echo[key]
                for c in self.clusters.values():
                    for m in c.events:
                        if m.key == key and not m.delivered:
                            m.confirmed = True
                continue
            tracked = TrackedEvent(ev.species, (ev.x, ev.y), ev.t, ev.delta)
            if ev.boundary:
                tracked.confirmed = True  # the wall comparison vouches
            hits = [
                c
                for c in sorted(self.clusters.values(), key=lambda c: c.id)
                if self._reach(c, ev)
            ]
            if not hits:
                c = self._new_cluster(t)
                c.events.append(tracked)
                c.recompute(self.frame.L)
                continue
            host = min(hits, key=lambda c: (c.birth, c.id))
            for other in hits:
                if other is not host:
                    host = self._merge(host, other)
            host.events.append(tracked)
            host.recompute(self.frame.L)
            if host.status == "ungauged" and self._station_in_region(
                tracked, set(host.region)
            ):
                # inside the open wall the correction will handle it
                tracked.delivered = True

    def _reanchor_worldlines(
        self, events: list[DetectorEvent], curr: Readings, t: int
    ) -> list[DetectorEvent]:
        """Pull a displaced computational anyon back onto its parking spot.

        A qubit flip on a parked anyon's boundary drags the anyon one
        plaquette sideways, which shows up as a defect event at the
        scheduled site plus one at the neighbor. The pair identifies the
        edge, so the repair is immediate: drag the defect back and let
        next round's readings echo through. A lone event at a scheduled
        site has no displacement partner and is treated as a reading
        ghost instead."""
        sched = set(self.frame.scheduled_sites())
        if not sched:
            return events
        L = self.frame.L
        mu_here = {
            (ev.x, ev.y): ev
            for ev in events
            if ev.species == "mu" and not ev.boundary
        }
        drop: set[Site] = set()
        for s in sorted(sched & set(mu_here)):
            if ("mu", s) in self._expected_echo or ("mu", s) in self._quiet:
                continue  # our own repair or correction echoing back
            partner = None
            for nb in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                q = ((s[0] + nb[0]) % L, (s[1] + nb[1]) % L)
                if (
                    q in mu_here
                    and q not in sched
                    and q not in drop
                    and ("mu", q) not in self._expected_echo
                    and ("mu", q) not in self._quiet
                ):
                    partner = q
                    break
            if partner is None:
                self._defer_site(curr, "mu", s)
                self._expected_echo[("mu", s)] = t + 1
                drop.add(s)
                continue
            move_defect(self.frame, partner, s, owner=s)
            self._expected_echo[("mu", s)] = t + 1
            self._expected_echo[("mu", partner)] = t + 1
            drop.update((s, partner))
            self.actions.append(
                {"t": t, "action": "reanchor", "src": partner, "dst": s}
            )
        if not drop:
            return events
        return [
            ev
            for ev in events
            if not (ev.species == "mu" and (ev.x, ev.y) in drop)
        ]

    # -- deferral ---------------------------------------------------------------

    def _defer_site(self, curr: Readings, species: str, site: Site) -> bool:
        """Reverse the most recent reading at one station. Returns False
        when there is nothing to reverse (station lost its reading)."""
        prev = self.record
        x, y = site
        if species == "mu":
            curr.mu[x, y] = prev.mu[x, y]
            return True
        if species == "e":
            if prev.sv_valid[x, y] and curr.sv_valid[x, y]:
                curr.sv[x, y] = prev.sv[x, y]
                return True
            if prev.e3_valid[x, y] and curr.e3_valid[x, y]:
                curr.e3[x, y] = prev.e3[x, y]
                return True
            return False
        if prev.sp_valid[x, y] and curr.sp_valid[x, y]:
            curr.sp[x, y] = prev.sp[x, y]
            return True
        if prev.m3_valid[x, y] and curr.m3_valid[x, y]:
            curr.m3[x, y] = prev.m3[x, y]
            return True
        return False

    def _defer_cluster(self, cluster: ClusterRecord, curr: Readings, t: int) -> None:
        for m in cluster.events:
            if m.delivered or m.confirmed:
                # reversal is the confirmation probe; once an event has
                # echoed back the record already agrees with the lattice
                continue
            if self._defer_site(curr, m.species, m.site):
                self._expected_echo[m.key] = t + 1
        self.actions.append(
            {"t": t, "clusterId": cluster.id, "action": "defer", "region": []}
        )

    # -- region management -------------------------------------------------------

    def _blocked(self, cluster: ClusterRecord) -> set[Site]:
        """Plaquettes this cluster may not open: parked computational
        anyons and other clusters' live regions."""
        out = set(self.frame.scheduled_sites())
        for c in self.clusters.values():
            if c is not cluster:
                out |= set(c.region)
        return out

    def _target_region(self, cluster: ClusterRecord, pad: int) -> frozenset[Site]:
        need: set[Site] = set(cluster.region)
        L = self.frame.L
        for ev in cluster.events:
            need.update(_covering_plaquettes(ev.species, ev.site, L))
        return bounding_region(sorted(need), L, pad=pad)

    def _grow_region(self, cluster: ClusterRecord, t: int, pad: int) -> None:
        """Ungauge whatever the covering box adds beyond the already
        open plaquettes, then restart the dwell clock."""
        target = self._target_region(cluster, pad=pad)
        fresh = sorted(target - cluster.region - self._blocked(cluster))
        if fresh:
            handle, wall_events, _ = ungauge_region(
                self.frame, fresh, t, dwell_deadline=0,
                expected_charge=cluster.expected,
            )
            cluster.region = cluster.region | handle.plaquettes
            if cluster.region_open_time is None:
                cluster.region_open_time = t
            self._adopt_e3 |= set(
                self.frame.region_interior_vertices(cluster.region)
            )
            self._adopt_m3 |= set(cluster.region)
            inside = set(cluster.region)
            for m in cluster.events:
                if self._station_in_region(m, inside):
                    m.delivered = True
                    self._expected_echo.pop(m.key, None)
            self._consume_wall_events(cluster, wall_events, t)
        if not cluster.region:
            cluster.failed = True
            self.escalation_failed = True
            return
        cluster.dwell_deadline = t + cluster.diameter + 2
        cluster.status = "ungauged"

    def _station_in_region(self, m: TrackedEvent, region: set[Site]) -> bool:
        return any(
            p in region
            for p in _covering_plaquettes(m.species, m.site, self.frame.L)
        )

    def _consume_wall_events(
        self, cluster: ClusterRecord, wall_events: list[DetectorEvent], t: int
    ) -> None:
        keys = {m.key for m in cluster.events}
        unexplained = [
            ev for ev in wall_events if (ev.species, (ev.x, ev.y)) not in keys
        ]
        self._integrate_events(unexplained, t)

    def _open_region(self, cluster: ClusterRecord, t: int) -> None:
        self._grow_region(cluster, t, pad=1)
        if cluster.region:
            self.actions.append(
                {
                    "t": t,
                    "clusterId": cluster.id,
                    "action": "ungauge",
                    "region": sorted(cluster.region),
                }
            )

    def _cancel_emissions(self, edges: Iterable[Edge], t: int) -> None:
        """Undo heralded wall emissions on the spot.

        The regauge step reports exactly which wall edges came back
        flipped, and the flip is self-inverse, so the byproduct is
        cancelled where it was born. Waiting would let a later gauge
        cycle teleport the strings to a new wall; on a wall that wraps
        the torus the end-of-run syndrome alone cannot tell the emitted
        arcs from their complement, and guessing wrong costs a logical
        eta flip. Only unheralded fault strings are left for the global
        matcher."""
        for kind, x, y in edges:
            self.frame.qubitZ[0 if kind == "h" else 1, x, y] ^= 1
        if edges:
            self.actions.append(
                {"t": t, "action": "cancelEmissions", "edges": sorted(edges)}
            )

    def _try_correct(self, cluster: ClusterRecord, t: int) -> None:
        handle = cluster.region_handle()
        outcome = perform_region_correction(self.frame, handle)
        if outcome["success"]:
            emitted = regauge_region(
                self.frame, handle, t, rng=self.rng, eta_emission=self.eta_emission
            )
            self._cancel_emissions(emitted, t)
            self._resync_record(handle.plaquettes)
            for p in handle.plaquettes:
                self._quiet[("mu", p)] = t + 1
            self.actions.append(
                {
                    "t": t,
                    "clusterId": cluster.id,
                    "action": "regauge",
                    "region": sorted(handle.plaquettes),
                }
            )
            inside = set(handle.plaquettes)
            stranded = [
                m
                for m in cluster.events
                if not m.delivered and not self._station_in_region(m, inside)
            ]
            if stranded:
                # events that linked to the wall but were never covered:
                # their charge is still out there, so they re-dwell as
                # their own local problem instead of closing uncorrected.
                # Readings held them for a full dwell, which rules out a
                # one-round ghost, so they count as confirmed.
                for m in stranded:
                    m.confirmed = True
                cluster.events = stranded
                cluster.region = frozenset()
                cluster.status = "deferred"
                cluster.region_open_time = None
                cluster.dwell_deadline = None
                cluster.tier = 0
                cluster.recompute(self.frame.L)
                self.actions.append(
                    {
                        "t": t,
                        "clusterId": cluster.id,
                        "action": "release",
                        "region": sorted({m.site for m in stranded}),
                    }
                )
                return
            cluster.status = "closed"
            cluster.region = frozenset()
            self.closed.append(cluster)
            del self.clusters[cluster.id]
        else:
            self._widen(cluster, t, residual=outcome["residual"])

    def _nearest_worldline(self, cluster: ClusterRecord) -> tuple[int, Site] | None:
        """Closest parked computational anyon, by gap to the cluster's
        events and open plaquettes."""
        L = self.frame.L
        mine = sorted({m.site for m in cluster.events} | set(cluster.region))
        best: tuple[int, Site] | None = None
        for p in sorted(self.frame.scheduled_sites()):
            gap = min(spatial_distance(p, q, L) for q in mine)
            if best is None or (gap, p) < best:
                best = (gap, p)
        return best

    def _handoff_to_worldline(self, cluster: ClusterRecord, anyon: Site, t: int) -> None:
        """Feed the region's visible charge to an adjacent worldline.
        The anyon's accumulator takes it, to be revealed when the pair
        is fused at readout. The region then reads as vacuum again."""
        L = self.frame.L
        corner = ((anyon[0] + 1) % L, (anyon[1] + 1) % L)
        e_chg = self.frame.electric_charge()
        for v in self.frame.region_interior_vertices(cluster.region):
            q = int(e_chg[v])
            if q:
                move_charge_preserving(self.frame, "e", v, corner, q)
        m_chg = self.frame.magnetic_charge()
        scheduled = self.frame.scheduled_sites()
        for p in sorted(cluster.region):
            q = int(m_chg[p])
            if q and p not in scheduled:
                move_charge_preserving(self.frame, "m", p, anyon, q)
        cluster.dwell_deadline = t + cluster.diameter + 2
        self.actions.append(
            {"t": t, "clusterId": cluster.id, "action": "handoff",
             "region": [list(anyon)]}
        )

    def _widen(self, cluster: ClusterRecord, t: int, residual: str | None = None) -> None:
        """A region that did not read as expected must belong to a
        larger cluster: raise the tier, then merge with whatever the
        new radius reaches, preferring the nearest absorber. A parked
        anyon worldline in range takes charge-like residue outright;
        otherwise the open box grows and dwells again."""
        cluster.tier += 1
        self.max_tier = max(self.max_tier, cluster.tier)
        L = self.frame.L
        r = cluster.link_radius()
        if r > L:
            cluster.failed = True
            self.escalation_failed = True
            self.actions.append(
                {"t": t, "clusterId": cluster.id, "action": "widen", "region": []}
            )
            return
        mine = {m.site for m in cluster.events} | set(cluster.region)
        d_cluster: int | None = None
        for other in sorted(self.clusters.values(), key=lambda c: c.id):
            if other.id == cluster.id:
                continue
            theirs = {m.site for m in other.events}
            if not theirs:
                continue
            gap = min(
                spatial_distance(p, q, L)
                for p in sorted(mine)
                for q in sorted(theirs)
            )
            d_cluster = gap if d_cluster is None else min(d_cluster, gap)
        wl = self._nearest_worldline(cluster)
        if (
            residual not in (None, "mu")
            and wl is not None
            and wl[0] <= r
            and (d_cluster is None or wl[0] < d_cluster)
        ):
            self._handoff_to_worldline(cluster, wl[1], t)
            return
        for other in sorted(self.clusters.values(), key=lambda c: c.id):
            if other.id == cluster.id:
                continue
            theirs = {m.site for m in other.events}
            if not theirs:
                continue
            gap = min(
                spatial_distance(p, q, L)
                for p in sorted(mine)
                for q in sorted(theirs)
            )
            if gap <= r:
                cluster = self._merge(cluster, other)
                mine |= theirs
        self._grow_region(cluster, t, pad=min(r, L // 2))
        self.actions.append(
            {
                "t": t,
                "clusterId": cluster.id,
                "action": "widen",
                "region": sorted(cluster.region),
            }
        )

    # -- the per-round step ---------------------------------------------------------

    def step(self, t: int) -> list[dict]:
        curr = self.frame.last_readings
        if curr is None or curr.t != t:
            raise EngineError(f"no readings stored for round {t}")
        before = len(self.actions)

        events = self._reanchor_worldlines(self._diff_round(curr), curr, t)
        self._integrate_events(events, t)

        for key in [k for k, due in self._quiet.items() if due <= t]:
            del self._quiet[key]

        # reversals that never echoed back were reading ghosts
        stale = [k for k, due in self._expected_echo.items() if due <= t]
        for key in stale:
            del self._expected_echo[key]
            for c in list(self.clusters.values()):
                kept = [m for m in c.events if m.key != key or m.delivered]
                if len(kept) != len(c.events):
                    c.events = kept
                    c.recompute(self.frame.L)
                    if not c.events and not c.region:
                        c.status = "closed"
                        self.closed.append(c)
                        del self.clusters[c.id]

        for c in sorted(self.clusters.values(), key=lambda c: c.id):
            if c.id not in self.clusters or c.failed:
                continue
            if c.status == "ungauged":
                if c.dwell_deadline is not None and t >= c.dwell_deadline:
                    self._try_correct(c, t)
                continue
            if not c.events:
                continue
            if age_rule(c, t) and _confirmed(c):
                c.status = "ripe"
                self._open_region(c, t)
            else:
                self._defer_cluster(c, curr, t)

        self._update_record(curr)
        return self.actions[before:]

    def finish(self, t: int) -> dict:
        """End of run: resolve what resolves, flag the rest.

        Runs release rounds until quiet: a close can strand linked events
        that were never covered, and those re-open their own local region
        in the next pass. Whatever cannot be closed at the temporal
        boundary counts as a failure in the run accounting."""
        for _ in range(len(self.clusters) + 4):
            live = [
                c
                for c in sorted(self.clusters.values(), key=lambda c: c.id)
                if not c.failed
            ]
            if not live:
                break
            progress = False
            for c in live:
                if c.id not in self.clusters or c.failed:
                    continue
                if not c.region:
                    if not c.events:
                        c.status = "closed"
                        self.closed.append(c)
                        del self.clusters[c.id]
                        progress = True
                        continue
                    self._open_region(c, t)
                    if c.failed or not c.region:
                        continue
                tt = max(t, c.dwell_deadline or t)
                handle = GaugeRegion(
                    c.region, c.region_open_time or t, tt, c.expected, ()
                )
                outcome = perform_region_correction(self.frame, handle)
                if not outcome["success"] and outcome["residual"] != "mu":
                    wl = self._nearest_worldline(c)
                    if wl is not None and wl[0] <= 2 * (c.diameter + 2):
                        self._handoff_to_worldline(c, wl[1], tt)
                        outcome = perform_region_correction(self.frame, handle)
                if not outcome["success"]:
                    c.failed = True
                    continue
                emitted = regauge_region(
                    self.frame, handle, tt, rng=self.rng,
                    eta_emission=self.eta_emission,
                )
                self._cancel_emissions(emitted, tt)
                self._resync_record(handle.plaquettes)
                inside = set(handle.plaquettes)
                stranded = [
                    m
                    for m in c.events
                    if not m.delivered and not self._station_in_region(m, inside)
                ]
                c.region = frozenset()
                progress = True
                if stranded:
                    for m in stranded:
                        m.confirmed = True
                    c.events = stranded
                    c.status = "deferred"
                    c.region_open_time = None
                    c.dwell_deadline = None
                    c.tier = 0
                    c.recompute(self.frame.L)
                else:
                    c.status = "closed"
                    self.closed.append(c)
                    del self.clusters[c.id]
            if not progress:
                break
        leftovers = sum(
            1 for c in self.clusters.values() if c.events or c.region
        )
        return {
            "open_nonneutral": leftovers,
            "escalation_failed": self.escalation_failed or leftovers > 0,
        }


# ---------------------------------------------------------------------------
# global eta decode
# ---------------------------------------------------------------------------


def _pair_up(
    events: list[tuple[int, int, int]], L: int
) -> list[tuple[tuple[int, int, int], tuple[int, int, int]]]:
    """Greedy matching with doubling radii: repeatedly take the closest
    pair within the current radius, then double. Leftovers pair in
    order at the end so every event is accounted for."""
    unmatched = sorted(events)
    pairs = []
    radius = 1
    cap = max(2 * L, 2)
    while len(unmatched) > 1 and radius <= cap:
        found = True
        while found and len(unmatched) > 1:
            found = False
            best = None
            n = len(unmatched)
            for i in range(n):
                for j in range(i + 1, n):
                    d = distance(unmatched[i], unmatched[j], L)
                    if d <= radius and (best is None or d < best[0]):
                        best = (d, i, j)
            if best is not None:
                _, i, j = best
                pairs.append((unmatched[i], unmatched[j]))
                unmatched = [p for k, p in enumerate(unmatched) if k not in (i, j)]
                found = True
        radius *= 2
    while len(unmatched) > 1:
        pairs.append((unmatched[0], unmatched[1]))
        unmatched = unmatched[2:]
    return pairs


def _match_sites(sites: list[Site], L: int) -> tuple[list[tuple[Site, Site]], list[Site]]:
    """Spatial matching with doubling radii plus a pair-swap cleanup.

    Greedy shortest-first gets the obvious partners; the 2-opt sweep then
    untangles any crossed pairs the greedy order produced. Keeping the
    total correction length minimal is what keeps the matched strings
    homologically trivial: every physical source (a fault string, one
    wall's emissions) is short, so the cheapest matching never has to
    reach around the torus."""
    unmatched = sorted(sites)
    pairs: list[tuple[Site, Site]] = []
    radius = 1
    while len(unmatched) > 1 and radius <= 2 * L:
        found = True
        while found and len(unmatched) > 1:
            found = False
            best = None
            n = len(unmatched)
            for i in range(n):
                for j in range(i + 1, n):
                    d = spatial_distance(unmatched[i], unmatched[j], L)
                    if d <= radius and (best is None or d < best[0]):
                        best = (d, i, j)
            if best is not None:
                _, i, j = best
                pairs.append((unmatched[i], unmatched[j]))
                unmatched = [p for k, p in enumerate(unmatched) if k not in (i, j)]
                found = True
        radius *= 2
    improved = True
    guard = 0
    while improved and guard < 100:
        improved = False
        guard += 1
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                a, b = pairs[i]
                c, d = pairs[j]
                cur = spatial_distance(a, b, L) + spatial_distance(c, d, L)
                alt1 = spatial_distance(a, c, L) + spatial_distance(b, d, L)
                alt2 = spatial_distance(a, d, L) + spatial_distance(b, c, L)
                if min(alt1, alt2) < cur:
                    if alt1 <= alt2:
                        pairs[i], pairs[j] = (a, c), (b, d)
                    else:
                        pairs[i], pairs[j] = (a, d), (b, c)
                    improved = True
    return pairs, unmatched


def _apply_eta_string(frame: FrameState, a: Site, b: Site) -> int:
    """Flip the qubit layer along an L-shaped vertex path from a to b.
    Returns the number of edges flipped."""
    if a == b:
        return 0
    L = frame.L
    n = 0
    x, y = a
    dx = (b[0] - x) % L
    if dx > L - dx:
        dx -= L
    step = 1 if dx > 0 else -1
    for _ in range(abs(dx)):
        ex = x if step == 1 else (x - 1) % L
        frame.qubitZ[0, ex, y] ^= 1
        x = (x + step) % L
        n += 1
    dy = (b[1] - y) % L
    if dy > L - dy:
        dy -= L
    step = 1 if dy > 0 else -1
    for _ in range(abs(dy)):
        ey = y if step == 1 else (y - 1) % L
        frame.qubitZ[1, x, ey] ^= 1
        y = (y + step) % L
        n += 1
    return n


def global_eta_decode(frame: FrameState, eta_log: list[DetectorEvent]) -> dict:
    """Terminal matching of the deferred eta sector.

    The event log (detections plus heralded wall emissions) is paired in
    spacetime for the record, but corrections anchor on the terminal
    parity syndrome: gauge cycles teleport strings to whichever wall
    closed last, so the end-of-run excitations are the single source of
    truth for where charge actually sits. Matching them shortest-first
    and flipping the connecting strings clears every excitation; the
    leftover homology class decides logical eta failure."""
    L = frame.L
    pts = [(ev.x, ev.y, ev.t) for ev in eta_log]
    event_pairs = _pair_up(pts, L)
    sites = [(int(x), int(y)) for x, y in np.argwhere(frame.alpha_parity())]
    site_pairs, leftovers = _match_sites(sites, L)
    edges = 0
    for a, b in site_pairs:
        edges += _apply_eta_string(frame, a, b)
    winding = eta_winding(frame)
    return {
        "pairs": len(site_pairs),
        "event_pairs": len(event_pairs),
        "corrected_edges": edges,
        "uncorrected": len(leftovers),
        "winding": winding,
        "failed": winding != (0, 0) or bool(leftovers),
    }
