"""Deterministic discrete-event core.

Events are ordered by (time, scheduling sequence); time is held as an exact
rational number of microseconds so that slot-window airtime accounting is
exact. Data MPDUs fragment across slot boundaries: a transmitter fills its
usable window (slot duration minus propagation delay) completely and resumes
the remainder in its next assigned slot. Receivers acknowledge with one
delayed BlockAck transmitted exactly at the start of their earliest
subsequent BASIC transmit slot; a missing sequence triggers at most one
retransmission.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .channel import (
    LinkBudgetConfig,
    interferes,
    link_snr_db,
    propagation_delay_us,
)
from .controller import AssignmentResult, DirectedLink, InterferenceGraph
from .domain import DEFAULT_MCS_TABLE, McsEntry, NodeModel, mcs_from_snr
from .errors import SimulationError
from .frames import FrameSizes
from .maintenance import (
    LinkState,
    ReportSchedule,
    TpcFields,
    advance_clock,
    emit_link_measurement_report,
    keepalive_check,
    tpc_update,
)
from .schedule import Direction, SlotCategory, TddSlotStructure
from .trace import TraceRecorder, null_recorder


class EventKind(Enum):
    SLOT_BOUNDARY = "slot_boundary"
    FRAME_TX_START = "frame_tx_start"
    FRAME_RX_COMPLETE = "frame_rx_complete"
    TIMER = "timer"
    MAINTENANCE_TICK = "maintenance_tick"


@dataclass(frozen=True)
class SimEvent:
    time_us: Fraction
    seq: int
    kind: EventKind
    payload: dict


class EventQueue:
    """Heap ordered by (time, scheduling sequence); rejects past scheduling."""

    def __init__(self):
        self._heap: list[tuple[Fraction, int, SimEvent]] = []
        self._seq = 0
        self.now: Fraction = Fraction(0)

    def push(self, time_us, kind: EventKind, payload: dict) -> None:
        time_us = Fraction(time_us)
        if time_us < self.now:
            raise SimulationError(
                f"event {kind.value} scheduled at {float(time_us):.3f}us, "
                f"before current time {float(self.now):.3f}us"
            )
        event = SimEvent(time_us=time_us, seq=self._seq, kind=kind, payload=payload)
        self._seq += 1
        heapq.heappush(self._heap, (time_us, event.seq, event))

    def pop(self) -> SimEvent:
        time_us, _, event = heapq.heappop(self._heap)
        self.now = time_us
        return event

    def peek_time(self) -> Optional[Fraction]:
        return self._heap[0][0] if self._heap else None

    def __bool__(self) -> bool:
        return bool(self._heap)


# ---------------------------------------------------------------------------
# Traffic and per-link runtime state.


@dataclass
class Mpdu:
    seq: int
    size_bits: int
    payload_bits: int
    eligible_us: Fraction
    remaining_bits: Fraction
    corrupted: bool = False
    retried: bool = False
    tx_complete_us: Optional[Fraction] = None


@dataclass
class TrafficSource:
    # "none" keeps the link scheduled (for control traffic) without data.
    pattern: str  # "saturated" | "cbr" | "none"
    rate_bps: float = 0.0
    start_us: int = 0

    def __post_init__(self):
        if self.pattern not in ("saturated", "cbr", "none"):
            raise ValueError(f"unknown traffic pattern {self.pattern!r}")
        if self.pattern == "cbr" and self.rate_bps <= 0:
            raise ValueError("cbr traffic needs a positive rate")


@dataclass
class LinkRuntime:
    """Mutable simulation state of one directed, demanded link activation."""

    vertex: DirectedLink
    mcs: McsEntry
    prop_us: Fraction
    source: Optional[TrafficSource]
    size_bits: int
    payload_bits: int

    next_seq: int = 0
    queue: deque = field(default_factory=deque)
    pending: dict = field(default_factory=dict)  # seq -> Mpdu awaiting ack
    received: set = field(default_factory=set)  # decoded seqs at the receiver
    rx_since_ack: list = field(default_factory=list)  # (seq, rx_time)
    control_queue: deque = field(default_factory=deque)
    dead: bool = False

    # transmit window of the currently active slot, if any
    active_until: Fraction = Fraction(0)
    chained: bool = False
    interfered_now: bool = False

    # counters
    offered_bits: int = 0
    delivered_fragment_bits: Fraction = Fraction(0)
    delivered_mpdu_bits: int = 0
    delivered_payload_bits: int = 0
    dropped_bits: int = 0
    retx_bits: int = 0
    completed_mpdus: int = 0
    latency_samples_us: list = field(default_factory=list)
    ack_delay_samples_us: list = field(default_factory=list)
    snr_samples: list = field(default_factory=list)  # (t_us, snr_db)
    report_seq: int = 0

    @property
    def vertex_id(self) -> str:
        return self.vertex.vertex_id

    def queued_bits(self) -> Fraction:
        # An MPDU counts at full size until it is delivered or dropped, so a
        # partially transmitted head still owes its whole frame here.
        backlog = sum(m.size_bits for m in self.queue)
        pending_undelivered = sum(
            m.size_bits for m in self.pending.values() if m.corrupted
        )
        return Fraction(backlog + pending_undelivered)


@dataclass(frozen=True)
class SlotInstance:
    start_us: int
    end_us: int
    slot_index: int
    interval_index: int
    category: SlotCategory
    direction: Optional[Direction]
    actives: tuple[str, ...]  # vertex ids transmitting in this slot


@dataclass
class MaintenanceSettings:
    keepalive_period_us: int = 25600
    keepalive_timeout_us: int = 1_000_000
    heartbeat_period_us: int = 25600
    sync_tolerance_us: float = 1.0
    tpc_enabled: bool = False
    tpc_target_rsni_db: float = 20.0
    tpc_max_step_db: float = 3.0


# ---------------------------------------------------------------------------
# Metrics.


@dataclass
class LinkMetrics:
    vertex_id: str
    offered_bits: float
    delivered_bits: float
    delivered_mpdu_bits: int
    delivered_payload_bits: int
    dropped_bits: int
    queued_bits: float
    retx_bits: float
    completed_mpdus: int
    latency_us: list[float]
    ack_delay_us: list[float]
    snr_db: list[tuple[float, float]]

    @property
    def max_latency_us(self) -> float:
        return max(self.latency_us) if self.latency_us else 0.0


@dataclass
class Metrics:
    duration_us: int
    per_link: dict[str, LinkMetrics]
    slot_utilization: dict[str, float]  # category value -> used/usable
    bf_sweep_counts: dict[str, int]

    def goodput_bps(self, vertex_id: str) -> float:
        link = self.per_link[vertex_id]
        return link.delivered_payload_bits / (self.duration_us * 1e-6)

    def conservation_ok(self, tol_bits: float = 1e-6) -> bool:
        for link in self.per_link.values():
            balance = (
                link.delivered_mpdu_bits + link.dropped_bits + link.queued_bits
            )
            if abs(link.offered_bits - balance) > tol_bits:
                return False
        return True


# ---------------------------------------------------------------------------
# World.


def reverse_vertex_id(vertex: DirectedLink) -> str:
    return f"{vertex.link_id}:{vertex.direction.reverse().value}"


class World:
    """One self-contained simulation universe; shares nothing mutable."""

    def __init__(
        self,
        nodes: dict[str, NodeModel],
        channel_cfg: LinkBudgetConfig,
        plan: AssignmentResult,
        structure: TddSlotStructure,
        *,
        traffic: dict[str, TrafficSource],
        frame_sizes: Optional[FrameSizes] = None,
        mcs_table: Sequence[McsEntry] = DEFAULT_MCS_TABLE,
        maintenance: Optional[MaintenanceSettings] = None,
        report_schedules: Optional[dict[str, ReportSchedule]] = None,
        beacon_interval_us: int = 300_000,
        sp_offset_us: int = 0,
        sp_duration_us: int = 25_600,
        epoch_us: int = 0,
        duration_us: int = 300_000,
        trace: Optional[TraceRecorder] = None,
        bf_sweep_counts: Optional[dict[str, int]] = None,
    ):
        self.nodes = nodes
        self.channel_cfg = channel_cfg
        self.plan = plan
        self.graph_vertices = plan.vertices
        self.structure = structure
        self.frame_sizes = frame_sizes or FrameSizes()
        self.mcs_table = list(mcs_table)
        self.maintenance = maintenance or MaintenanceSettings()
        self.beacon_interval_us = beacon_interval_us
        self.sp_offset_us = sp_offset_us
        self.sp_duration_us = sp_duration_us
        self.epoch_us = epoch_us
        self.duration_us = duration_us
        self.trace = trace or null_recorder()
        self.queue = EventQueue()
        self.bf_sweep_counts = dict(bf_sweep_counts or {})

        self.runtimes: dict[str, LinkRuntime] = {}
        for vid, source in traffic.items():
            if vid not in self.graph_vertices:
                raise ValueError(f"traffic references unknown link activation {vid}")
            vertex = self.graph_vertices[vid]
            entry = mcs_from_snr(self.mcs_table, vertex.snr_db)
            if entry is None:
                raise ValueError(f"{vid} cannot carry traffic below the lowest MCS")
            tx = nodes[vertex.tx_node]
            rx = nodes[vertex.rx_node]
            prop = _quantized_prop_us(tx, rx)
            self.runtimes[vid] = LinkRuntime(
                vertex=vertex,
                mcs=entry,
                prop_us=prop,
                source=source,
                size_bits=self.frame_sizes.data_total_bits,
                payload_bits=self.frame_sizes.data_payload * 8,
            )

        # Per-link measurement reporting: emission time -> vertex ids due.
        self.report_due: dict[int, list[str]] = {}
        if report_schedules:
            for vid, schedule in report_schedules.items():
                if not schedule.accepted:
                    continue
                for t in schedule.emission_times_us:
                    self.report_due.setdefault(t, []).append(vid)

        # keep-alive bookkeeping: (rx_node, tx_node) -> last decoded frame time
        self.last_rx_us: dict[tuple[str, str], Fraction] = {}
        self.dead_links: set[str] = set()

        self.slot_instances = self._expand_instances()
        self._adjacent = self._precompute_conflicts()

        # utilization accounting, per slot category
        self.used_air_us: dict[str, Fraction] = {c.value: Fraction(0) for c in SlotCategory}
        self.usable_air_us: dict[str, Fraction] = {c.value: Fraction(0) for c in SlotCategory}

    # -- construction helpers ------------------------------------------------

    def _expand_instances(self) -> list[SlotInstance]:
        instances: list[SlotInstance] = []
        t_end = self.epoch_us + self.duration_us
        interval_us = self.structure.interval_duration_us
        n_intervals = self.sp_duration_us // interval_us
        slot_dirs = self.plan.schedule.slot_directions
        slot_links = self.plan.schedule.slot_links
        bi_start = self.epoch_us
        interval_counter = 0
        while bi_start < t_end:
            sp_start = bi_start + self.sp_offset_us
            for i in range(n_intervals):
                base = sp_start + i * interval_us
                if base + interval_us > t_end:
                    break
                for idx, slot in enumerate(self.structure.slots):
                    start = base + slot.start_offset_us
                    instances.append(SlotInstance(
                        start_us=start,
                        end_us=start + slot.duration_us,
                        slot_index=idx,
                        interval_index=interval_counter,
                        category=slot.category,
                        direction=slot_dirs.get(idx),
                        actives=slot_links.get(idx, ()),
                    ))
                interval_counter += 1
            bi_start += self.beacon_interval_us
        return instances

    def _precompute_conflicts(self) -> dict[int, frozenset[str]]:
        """Per slot index, the vertex ids whose decode fails from interference."""
        out: dict[int, frozenset[str]] = {}
        for idx, vids in self.plan.schedule.slot_links.items():
            hit: set[str] = set()
            for i, a in enumerate(vids):
                for b in vids[i + 1:]:
                    if self._conflicting(a, b):
                        hit.add(a)
                        hit.add(b)
            out[idx] = frozenset(hit)
        return out

    def _conflicting(self, a_id: str, b_id: str) -> bool:
        a = self.graph_vertices.get(a_id)
        b = self.graph_vertices.get(b_id)
        if a is None or b is None:
            return False
        if a.nodes & b.nodes:
            return True
        return (
            interferes(self.nodes[a.tx_node], a.tx_sector,
                       self.nodes[b.rx_node], b.rx_sector, self.channel_cfg)
            or interferes(self.nodes[b.tx_node], b.tx_sector,
                          self.nodes[a.rx_node], a.rx_sector, self.channel_cfg)
        )

    # -- live channel queries ------------------------------------------------

    def current_snr_db(self, vertex: DirectedLink) -> float:
        sample = link_snr_db(
            self.nodes[vertex.tx_node], vertex.tx_sector,
            self.nodes[vertex.rx_node], vertex.rx_sector, self.channel_cfg,
        )
        return sample.snr_db

    def control_rate_bps(self, vertex_id: str) -> float:
        vertex = self.graph_vertices[vertex_id]
        entry = mcs_from_snr(self.mcs_table, self.current_snr_db(vertex))
        return float(entry.phy_rate_bps) if entry else 0.0


def _quantized_prop_us(tx: NodeModel, rx: NodeModel) -> Fraction:
    # Quantize to integer picoseconds so event times stay exact rationals.
    return Fraction(round(propagation_delay_us(tx, rx) * 10**6), 10**6)


def _rate_per_us(rate_bps: float) -> Fraction:
    return Fraction(int(rate_bps), 10**6)  # bits per microsecond


# ---------------------------------------------------------------------------
# The event loop.


def run_until(world: World, t_end_us: Optional[int] = None) -> Metrics:
    """Process events through t_end (default: the configured duration)."""
    if t_end_us is None:
        t_end_us = world.epoch_us + world.duration_us
    _seed_events(world)
    queue = world.queue
    while queue:
        next_time = queue.peek_time()
        if next_time is None or next_time > t_end_us:
            break
        event = queue.pop()
        _dispatch(world, event)
    return collect_metrics(world)


def _seed_events(world: World) -> None:
    for instance in world.slot_instances:
        world.queue.push(
            instance.start_us, EventKind.SLOT_BOUNDARY, {"instance": instance}
        )
    interval_us = world.structure.interval_duration_us
    t = world.epoch_us
    t_end = world.epoch_us + world.duration_us
    while t <= t_end:
        world.queue.push(t, EventKind.MAINTENANCE_TICK, {"t": t})
        t += interval_us
    for vid, rt in world.runtimes.items():
        if rt.source and rt.source.pattern == "cbr":
            first = max(world.epoch_us + rt.source.start_us, world.epoch_us)
            world.queue.push(first, EventKind.TIMER, {"what": "arrival", "vertex": vid})


def _dispatch(world: World, event: SimEvent) -> None:
    if event.kind is EventKind.SLOT_BOUNDARY:
        _on_slot_boundary(world, event)
    elif event.kind is EventKind.FRAME_TX_START:
        _on_frame_tx_start(world, event)
    elif event.kind is EventKind.FRAME_RX_COMPLETE:
        _on_frame_rx_complete(world, event)
    elif event.kind is EventKind.TIMER:
        _on_timer(world, event)
    elif event.kind is EventKind.MAINTENANCE_TICK:
        _on_maintenance_tick(world, event)


def _on_slot_boundary(world: World, event: SimEvent) -> None:
    instance: SlotInstance = event.payload["instance"]
    now = event.time_us
    world.trace.record(
        now, "slot",
        slot_index=instance.slot_index,
        interval=instance.interval_index,
        category=instance.category.value,
        direction=instance.direction.value if instance.direction else None,
        links=list(instance.actives) or None,
    )
    interfered = world._adjacent.get(instance.slot_index, frozenset())

    for vid in instance.actives:
        if instance.category is SlotCategory.BASIC:
            # The BASIC active is the reverse path of a data activation.
            data_vertex = world.graph_vertices.get(vid)
            if data_vertex is None:
                continue
            data_id = reverse_vertex_id(data_vertex)
            rt = world.runtimes.get(data_id)
            if rt is None or rt.dead:
                continue
            controls = []
            if rt.rx_since_ack:
                controls.append("block_ack")
            for report_vid in world.report_due.get(instance.start_us, []):
                if report_vid == data_id:
                    controls.append("report")
            if controls:
                rt.control_queue.extend(controls)
                rt.interfered_now = vid in interfered
                window_end = Fraction(instance.end_us) - rt.prop_us
                world.usable_air_us[instance.category.value] += (
                    window_end - instance.start_us
                )
                world.queue.push(
                    instance.start_us, EventKind.FRAME_TX_START,
                    {"vertex": data_id, "category": instance.category,
                     "window_end": window_end, "slot_start": Fraction(instance.start_us)},
                )
        else:
            rt = world.runtimes.get(vid)
            if rt is None or rt.dead:
                continue
            rt.interfered_now = vid in interfered
            window_end = Fraction(instance.end_us) - rt.prop_us
            rt.active_until = window_end
            world.usable_air_us[instance.category.value] += (
                window_end - instance.start_us
            )
            if not rt.chained:
                rt.chained = True
                world.queue.push(
                    instance.start_us, EventKind.FRAME_TX_START,
                    {"vertex": vid, "category": instance.category,
                     "window_end": window_end, "slot_start": Fraction(instance.start_us)},
                )


def _head_mpdu(world: World, rt: LinkRuntime, now: Fraction) -> Optional[Mpdu]:
    if rt.queue:
        head = rt.queue[0]
        if head.eligible_us <= now:
            return head
        return None
    if rt.source and rt.source.pattern == "saturated":
        mpdu = Mpdu(
            seq=rt.next_seq, size_bits=rt.size_bits, payload_bits=rt.payload_bits,
            eligible_us=now, remaining_bits=Fraction(rt.size_bits),
        )
        rt.next_seq += 1
        rt.offered_bits += rt.size_bits
        rt.queue.append(mpdu)
        return mpdu
    return None


def _on_frame_tx_start(world: World, event: SimEvent) -> None:
    payload = event.payload
    rt = world.runtimes[payload["vertex"]]
    now = event.time_us
    window_end: Fraction = payload["window_end"]
    category: SlotCategory = payload["category"]

    if rt.control_queue and category is SlotCategory.BASIC:
        what = rt.control_queue.popleft()
        _transmit_control(world, rt, what, now, payload)
        return
    if category is SlotCategory.BASIC:
        return  # BASIC slots carry control traffic only

    if now >= window_end:
        rt.chained = False
        return
    mpdu = _head_mpdu(world, rt, now)
    if mpdu is None:
        rt.chained = False
        return

    rate = _rate_per_us(rt.mcs.phy_rate_bps)
    frag_bits = min(mpdu.remaining_bits, (window_end - now) * rate)
    if frag_bits <= 0:
        rt.chained = False
        return
    airtime = frag_bits / rate
    snr = world.current_snr_db(rt.vertex)
    ok = (not rt.interfered_now) and snr >= rt.mcs.min_snr_db
    if not ok:
        mpdu.corrupted = True
    mpdu.remaining_bits -= frag_bits
    last = mpdu.remaining_bits == 0
    if last:
        rt.queue.popleft()
        mpdu.tx_complete_us = now + airtime
        rt.pending[mpdu.seq] = mpdu
    if mpdu.retried:
        rt.retx_bits += frag_bits

    world.trace.record(
        now, "frame_tx", node=rt.vertex.tx_node, frame="data",
        link=rt.vertex_id, data_seq=mpdu.seq, bits=round(float(frag_bits), 3),
        last_fragment=last, mcs=rt.mcs.mcs_index,
    )
    world.used_air_us[category.value] += airtime
    world.queue.push(
        now + airtime + rt.prop_us, EventKind.FRAME_RX_COMPLETE,
        {"what": "data", "vertex": rt.vertex_id, "data_seq": mpdu.seq,
         "bits": frag_bits, "last": last, "ok": ok, "mpdu": mpdu},
    )
    if now + airtime < window_end:
        world.queue.push(
            now + airtime, EventKind.FRAME_TX_START,
            {"vertex": rt.vertex_id, "category": category,
             "window_end": window_end, "slot_start": payload["slot_start"]},
        )
    else:
        rt.chained = False


def _transmit_control(world: World, rt: LinkRuntime, what: str, now, payload) -> None:
    """Send one BlockAck or measurement report on the reverse path."""
    vertex = rt.vertex
    rev_id = reverse_vertex_id(vertex)
    rate_bps = world.control_rate_bps(rev_id)
    if rate_bps <= 0:
        return
    rate = _rate_per_us(rate_bps)
    slot_start: Fraction = payload["slot_start"]

    if what == "block_ack":
        covered = tuple(seq for seq, _ in rt.rx_since_ack)
        for seq, rx_t in rt.rx_since_ack:
            rt.ack_delay_samples_us.append(float(now - rx_t))
        rt.rx_since_ack.clear()
        bits = world.frame_sizes.ack * 8
        airtime = Fraction(bits) / rate
        ok = not rt.interfered_now
        world.trace.record(
            now, "frame_tx", node=vertex.rx_node, frame="block_ack",
            link=rt.vertex_id, covered=list(covered),
        )
        world.used_air_us[SlotCategory.BASIC.value] += airtime
        world.queue.push(
            now + airtime + rt.prop_us, EventKind.FRAME_RX_COMPLETE,
            {"what": "block_ack", "vertex": rt.vertex_id, "covered": covered,
             "formed_at": slot_start, "ok": ok},
        )
        next_at = now + airtime
    elif what == "report":
        sample = link_snr_db(
            world.nodes[vertex.tx_node], vertex.tx_sector,
            world.nodes[vertex.rx_node], vertex.rx_sector, world.channel_cfg,
        )
        report = emit_link_measurement_report(
            rt.vertex_id, sample, rt.report_seq,
            TpcFields(
                tx_power_dbm=world.nodes[vertex.tx_node].tx_power_dbm,
                target_rsni_db=world.maintenance.tpc_target_rsni_db,
                max_step_db=world.maintenance.tpc_max_step_db,
            ),
        )
        rt.report_seq += 1
        bits = world.frame_sizes.measurement_report * 8
        airtime = Fraction(bits) / rate
        ok = not rt.interfered_now
        world.trace.record(
            now, "frame_tx", node=vertex.rx_node, frame="link_measurement_report",
            link=rt.vertex_id, report_seq=report.sequence_number,
            rcpi_dbm=round(report.rcpi_dbm, 3), rsni_db=round(report.rsni_db, 3),
        )
        world.used_air_us[SlotCategory.BASIC.value] += airtime
        world.queue.push(
            now + airtime + rt.prop_us, EventKind.FRAME_RX_COMPLETE,
            {"what": "report", "vertex": rt.vertex_id, "report": report, "ok": ok},
        )
        next_at = now + airtime
    else:
        return
    if rt.control_queue:
        world.queue.push(
            next_at, EventKind.FRAME_TX_START,
            {"vertex": rt.vertex_id, "category": SlotCategory.BASIC,
             "window_end": payload["window_end"], "slot_start": slot_start},
        )


def _on_frame_rx_complete(world: World, event: SimEvent) -> None:
    payload = event.payload
    what = payload["what"]
    rt = world.runtimes[payload["vertex"]]
    now = event.time_us

    if what == "data":
        mpdu: Mpdu = payload["mpdu"]
        ok = payload["ok"]
        if ok:
            rt.delivered_fragment_bits += payload["bits"]
        world.trace.record(
            now, "frame_rx", node=rt.vertex.rx_node, frame="data",
            link=rt.vertex_id, data_seq=mpdu.seq,
            bits=round(float(payload["bits"]), 3),
            last_fragment=payload["last"],
            outcome="decoded" if ok else "interfered",
        )
        if payload["last"]:
            if not mpdu.corrupted:
                world.last_rx_us[(rt.vertex.rx_node, rt.vertex.tx_node)] = now
                if mpdu.seq not in rt.received:
                    rt.received.add(mpdu.seq)
                    rt.completed_mpdus += 1
                    rt.delivered_mpdu_bits += mpdu.size_bits
                    rt.delivered_payload_bits += mpdu.payload_bits
                    rt.latency_samples_us.append(float(now - mpdu.eligible_us))
                rt.rx_since_ack.append((mpdu.seq, now))
    elif what == "block_ack":
        ok = payload["ok"]
        world.trace.record(
            now, "frame_rx", node=rt.vertex.tx_node, frame="block_ack",
            link=rt.vertex_id, outcome="decoded" if ok else "interfered",
        )
        if ok:
            world.last_rx_us[(rt.vertex.tx_node, rt.vertex.rx_node)] = now
            _process_block_ack(world, rt, set(payload["covered"]), payload["formed_at"])
    elif what == "report":
        ok = payload["ok"]
        report = payload["report"]
        world.trace.record(
            now, "frame_rx", node=rt.vertex.tx_node, frame="link_measurement_report",
            link=rt.vertex_id, report_seq=report.sequence_number,
            outcome="decoded" if ok else "interfered",
        )
        if ok:
            world.last_rx_us[(rt.vertex.tx_node, rt.vertex.rx_node)] = now
            rt.snr_samples.append((float(now), report.rsni_db))
            if world.maintenance.tpc_enabled:
                _apply_tpc(world, rt, report, now)


def _process_block_ack(world: World, rt: LinkRuntime, covered: set, formed_at: Fraction) -> None:
    for seq in sorted(rt.pending):
        mpdu = rt.pending[seq]
        rx_time = mpdu.tx_complete_us + rt.prop_us
        if rx_time >= formed_at:
            continue  # completed after the ack was formed; next round decides
        if seq in covered:
            del rt.pending[seq]
        else:
            del rt.pending[seq]
            if seq in rt.received:
                # Delivered earlier but the covering ack was lost; the copy
                # in flight resolves it, nothing is owed.
                continue
            if mpdu.retried:
                rt.dropped_bits += mpdu.size_bits
                world.trace.record(
                    float(formed_at), "frame_drop", node=rt.vertex.tx_node,
                    link=rt.vertex_id, data_seq=seq, reason="retry exhausted",
                )
            else:
                mpdu.retried = True
                mpdu.corrupted = False
                mpdu.remaining_bits = Fraction(mpdu.size_bits)
                mpdu.tx_complete_us = None
                # Requeue behind a partially transmitted head, else at the front.
                if rt.queue and rt.queue[0].remaining_bits < rt.queue[0].size_bits:
                    rt.queue.insert(1, mpdu)
                else:
                    rt.queue.appendleft(mpdu)


def _apply_tpc(world: World, rt: LinkRuntime, report, now: Fraction) -> None:
    tx_node = world.nodes[rt.vertex.tx_node]
    new_power = tpc_update(
        tx_node.tx_power_dbm,
        report.rsni_db,
        world.maintenance.tpc_target_rsni_db,
        tx_node.power_limits,
        world.maintenance.tpc_max_step_db,
    )
    if new_power != tx_node.tx_power_dbm:
        tx_node.set_tx_power(new_power)
        world.trace.record(
            now, "tpc_update", node=tx_node.node_id, link=rt.vertex_id,
            power_dbm=round(new_power, 3), measured_rsni_db=round(report.rsni_db, 3),
            target_rsni_db=world.maintenance.tpc_target_rsni_db,
        )


def _on_timer(world: World, event: SimEvent) -> None:
    payload = event.payload
    if payload.get("what") != "arrival":
        return
    rt = world.runtimes[payload["vertex"]]
    now = event.time_us
    if rt.source is None or rt.source.pattern != "cbr":
        return
    mpdu = Mpdu(
        seq=rt.next_seq, size_bits=rt.size_bits, payload_bits=rt.payload_bits,
        eligible_us=now, remaining_bits=Fraction(rt.size_bits),
    )
    rt.next_seq += 1
    rt.offered_bits += rt.size_bits
    rt.queue.append(mpdu)
    if not rt.dead and not rt.chained and now < rt.active_until:
        rt.chained = True
        world.queue.push(
            now, EventKind.FRAME_TX_START,
            {"vertex": rt.vertex_id, "category": SlotCategory.DATA,
             "window_end": rt.active_until, "slot_start": now},
        )
    # Next arrival: one MPDU every size/rate seconds.
    gap_us = Fraction(rt.size_bits * 10**6, int(rt.source.rate_bps))
    world.queue.push(
        now + gap_us, EventKind.TIMER, {"what": "arrival", "vertex": rt.vertex_id}
    )


def _on_maintenance_tick(world: World, event: SimEvent) -> None:
    now = event.time_us
    settings = world.maintenance
    interval_us = world.structure.interval_duration_us
    for node in world.nodes.values():
        node.clock = advance_clock(node.clock, interval_us, settings.sync_tolerance_us)

    t_int = int(now)
    heartbeat_due = (t_int - world.epoch_us) % settings.heartbeat_period_us == 0
    ticked_aps = set()
    for vid, rt in world.runtimes.items():
        vertex = rt.vertex
        if heartbeat_due and vertex.ap_id not in ticked_aps:
            ticked_aps.add(vertex.ap_id)
            world.trace.record(
                now, "announce", node=vertex.ap_id, elements=["heartbeat"],
                broadcast=True,
            )
        if heartbeat_due:
            # Broadcast heartbeats refresh every served STA's keep-alive.
            world.last_rx_us[(vertex.sta_id, vertex.ap_id)] = now
        last = world.last_rx_us.get((vertex.sta_id, vertex.ap_id))
        if last is None:
            world.last_rx_us[(vertex.sta_id, vertex.ap_id)] = now
            last = now
        state = keepalive_check(float(last), float(now), settings.keepalive_timeout_us)
        if state is LinkState.DEAD and not rt.dead:
            rt.dead = True
            world.dead_links.add(vid)
            world.trace.record(
                now, "link_dead", link=vid, node=vertex.sta_id,
                last_rx=round(float(last), 3),
            )


def collect_metrics(world: World) -> Metrics:
    per_link: dict[str, LinkMetrics] = {}
    for vid, rt in world.runtimes.items():
        per_link[vid] = LinkMetrics(
            vertex_id=vid,
            offered_bits=float(rt.offered_bits),
            delivered_bits=float(rt.delivered_fragment_bits),
            delivered_mpdu_bits=rt.delivered_mpdu_bits,
            delivered_payload_bits=rt.delivered_payload_bits,
            dropped_bits=rt.dropped_bits,
            queued_bits=float(rt.queued_bits()),
            retx_bits=float(rt.retx_bits),
            completed_mpdus=rt.completed_mpdus,
            latency_us=list(rt.latency_samples_us),
            ack_delay_us=list(rt.ack_delay_samples_us),
            snr_db=list(rt.snr_samples),
        )
    utilization = {}
    for category, usable in world.usable_air_us.items():
        used = world.used_air_us[category]
        utilization[category] = float(used / usable) if usable else 0.0
    return Metrics(
        duration_us=world.duration_us,
        per_link=per_link,
        slot_utilization=utilization,
        bf_sweep_counts=dict(world.bf_sweep_counts),
    )


def metrics_to_csv(metrics: Metrics) -> str:
    """One row per link activation, suitable for spreadsheet import."""
    header = (
        "link,offered_bits,delivered_bits,delivered_payload_bits,dropped_bits,"
        "queued_bits,completed_mpdus,goodput_mbps,max_latency_us,mean_ack_delay_us"
    )
    rows = [header]
    for vid in sorted(metrics.per_link):
        link = metrics.per_link[vid]
        goodput = metrics.goodput_bps(vid) / 1e6
        mean_ack = (
            sum(link.ack_delay_us) / len(link.ack_delay_us)
            if link.ack_delay_us else 0.0
        )
        rows.append(
            f"{vid},{link.offered_bits:.0f},{link.delivered_bits:.3f},"
            f"{link.delivered_payload_bits},{link.dropped_bits},"
            f"{link.queued_bits:.3f},{link.completed_mpdus},"
            f"{goodput:.3f},{link.max_latency_us:.3f},{mean_ack:.3f}"
        )
    return "\n".join(rows) + "\n"
