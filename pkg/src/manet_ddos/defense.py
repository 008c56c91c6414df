"""Flow monitoring table, bandwidth querying, distributed rate control and
attacker detection.

The module-level functions are the scalar building blocks; ``FlowMonitor``
holds one node's table and reservations, and ``DestinationMonitor`` holds the
per-flow rows a destination receives piggybacked on data packets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .mac import MacSignals, Thresholds, congestion_detected


class InvalidRate(ValueError):
    pass


class UndefinedComparison(ValueError):
    pass


class FlowStatus(str, Enum):
    ACTIVE = "ACTIVE"
    REJECTED = "REJECTED"


class Verdict(str, Enum):
    COMPLIANT = "compliant"
    ATTACK = "attack"


REQUEST = "REQUEST"
REPLY = "REPLY"


@dataclass
class FmtEntry:
    flow_id: int
    source_id: int
    destination_id: int
    upstream: int | None = None
    downstream: int | None = None
    sending_rate: float = 0.0
    previous_sending_rate: float = 0.0
    assigned_rate: float = 0.0
    actual_rate: float = 0.0
    reserved_rate: float = 0.0
    traffic_counter: float = 0.0
    measured_rate: float = 0.0
    status: FlowStatus = FlowStatus.ACTIVE
    # False for a monitor-only row created for traffic that never reserved
    reserved: bool = True
    # highest ACR in force at any point of the current interval
    interval_acr: float = 0.0
    exceed_streak: int = 0
    # (counted bits, allowed bits) of the last few policed intervals
    recent: list = field(default_factory=list)

    @property
    def stream(self) -> tuple[int | None, int | None]:
        return self.upstream, self.downstream

    def reject(self) -> None:
        self.status = FlowStatus.REJECTED

    def set_actual_rate(self, acr: float) -> None:
        self.actual_rate = acr
        if acr > self.interval_acr:
            self.interval_acr = acr


@dataclass
class QueryPacket:
    direction: str
    source_id: int
    destination_id: int
    flow_id: int
    bnbw: float
    requested_rate: float
    message_type: str = "BANDWIDTH_QUERY"

    def to_reply(self) -> QueryPacket:
        return replace(self, direction=REPLY)


@dataclass
class CongestionNotice:
    destination_id: int
    flow_ids: list[int]
    issue_time: float
    congestion_bit: bool = True


@dataclass(frozen=True)
class FmtRow:
    """Snapshot of one node's FMT row carried on a data packet."""
    node_id: int
    flow_id: int
    interval: int
    sending_rate: float
    assigned_rate: float
    actual_rate: float


@dataclass(frozen=True)
class DropRule:
    source_id: int
    flow_id: int
    node_id: int
    installed_at: float


def initiate_query(source: int, destination: int, flow_id: int,
                   requested_rate: float) -> QueryPacket:
    if not requested_rate > 0:
        raise InvalidRate(f"requested rate must be positive, got {requested_rate}")
    return QueryPacket(REQUEST, source, destination, flow_id, float(requested_rate),
                       float(requested_rate))


def allocate_rates(capacity: float, assigned: dict) -> dict:
    """ACR for each stream: W * AR with W = min(1, L_c / sum(AR))."""
    total = sum(assigned.values())
    if total <= 0:
        return {k: 0.0 for k in assigned}
    w = min(1.0, capacity / total)
    return {k: w * ar for k, ar in assigned.items()}


def apply_congestion_bit(actual_rate: float, delta: float) -> float:
    return max(0.0, actual_rate - delta)


def measure_rate(entry: FmtEntry, T: float) -> float:
    if not T > 0:
        raise ValueError("measurement interval must be positive")
    mr = entry.traffic_counter / T
    entry.measured_rate = mr
    entry.traffic_counter = 0.0
    entry.previous_sending_rate = entry.sending_rate
    entry.sending_rate = mr
    return mr


def classify_flow(measured_rate: float, actual_rate: float) -> Verdict:
    return Verdict.ATTACK if measured_rate > actual_rate else Verdict.COMPLIANT


def detect_unresponsive_sender(previous_rate: float, current_rate: float,
                               epsilon: float) -> bool:
    if previous_rate == 0:
        raise UndefinedComparison("previous rate is zero")
    return abs(current_rate - previous_rate) / previous_rate <= epsilon


def packet_granular_rate(rate: float, T: float, packet_bits: float) -> float:
    """Smallest whole-packet budget per interval that admits ``rate``.

    A CBR source at ``rate`` emits at most ceil(rate*T/packet_bits) packets in
    any window of length T, so this is the rate compared against MR.
    """
    packets = math.ceil(rate * T / packet_bits * (1 - 1e-12))
    return packets * packet_bits / T


def exceeds_allowance(recent, window: int = 3) -> bool:
    """Whether the newest of ``recent`` (counted, allowed) bit pairs is an excess.

    The newest interval must exceed its own allowance, and the last
    ``window`` intervals together must exceed theirs, so a backlog released
    after a stall upstream is offset by the deficit that caused it.
    """
    if not recent:
        return False
    counted, allowed = recent[-1]
    if counted <= allowed:
        return False
    tail = recent[-window:]
    return sum(c for c, _ in tail) > sum(a for _, a in tail)


def establish_flow(requested_rate: float, final_reply: QueryPacket) -> float | None:
    """Granted sending rate, or None when the path has no bandwidth left."""
    if final_reply.bnbw <= 0:
        return None
    return min(requested_rate, final_reply.bnbw)


class FlowMonitor:
    """One node's flow monitoring table and bandwidth reservations."""

    def __init__(self, node_id: int, capacity: float):
        self.node_id = node_id
        self.capacity = float(capacity)
        self.entries: dict[int, FmtEntry] = {}
        self.drop_rules: dict[int, DropRule] = {}

    @property
    def reserved_total(self) -> float:
        return sum(e.reserved_rate for e in self.entries.values())

    @property
    def available_bandwidth(self) -> float:
        return max(0.0, self.capacity - self.reserved_total)

    def process_reply(self, reply: QueryPacket, upstream: int | None,
                      downstream: int | None) -> QueryPacket:
        if reply.direction != REPLY:
            raise ValueError("process_reply expects a REPLY packet")
        abw = self.available_bandwidth
        bnbw = reply.bnbw if abw >= reply.bnbw else abw
        entry = self.entries.get(reply.flow_id)
        if entry is not None and entry.status is FlowStatus.REJECTED:
            return replace(reply, bnbw=0.0)
        if entry is None or not entry.reserved:
            fresh = FmtEntry(reply.flow_id, reply.source_id, reply.destination_id,
                             upstream, downstream, assigned_rate=bnbw)
            if entry is not None:
                fresh.traffic_counter = entry.traffic_counter
            self.entries[reply.flow_id] = entry = fresh
        entry.reserved_rate += bnbw
        self.allocate()
        return replace(reply, bnbw=bnbw)

    def ensure_entry(self, flow_id: int, source: int, destination: int,
                     upstream: int | None, downstream: int | None) -> FmtEntry:
        """Row for traffic arriving without a reservation: AR = ACR = 0."""
        entry = self.entries.get(flow_id)
        if entry is None:
            entry = FmtEntry(flow_id, source, destination, upstream, downstream,
                             reserved=False)
            self.entries[flow_id] = entry
        return entry

    def release(self, flow_id: int) -> float:
        entry = self.entries.get(flow_id)
        if entry is None:
            return 0.0
        freed = entry.reserved_rate
        entry.reserved_rate = 0.0
        if entry.status is FlowStatus.REJECTED:
            entry.assigned_rate = 0.0
        else:
            del self.entries[flow_id]
        self.allocate()
        return freed

    def allocate(self) -> dict:
        active = {f: e.assigned_rate for f, e in self.entries.items()
                  if e.status is FlowStatus.ACTIVE}
        acr = allocate_rates(self.capacity, active)
        for f, rate in acr.items():
            self.entries[f].set_actual_rate(rate)
        for f, e in self.entries.items():
            if f not in acr:
                e.actual_rate = 0.0
        return acr

    def on_congestion_bit(self, flow_id: int, delta: float) -> tuple[float, float] | None:
        """Apply AR <- max(0, ACR - delta); returns (ACR before, AR after)."""
        entry = self.entries.get(flow_id)
        if entry is None or entry.status is FlowStatus.REJECTED:
            return None
        before = entry.actual_rate
        entry.assigned_rate = apply_congestion_bit(before, delta)
        self.allocate()
        return before, entry.assigned_rate

    def count(self, flow_id: int, bits: float) -> None:
        entry = self.entries.get(flow_id)
        if entry is not None:
            entry.traffic_counter += bits

    def install_rule(self, rule: DropRule) -> list[int]:
        """Block ``rule.source_id``; every row from that source becomes REJECTED."""
        self.drop_rules.setdefault(rule.source_id, rule)
        rejected = []
        for f, e in self.entries.items():
            if e.source_id == rule.source_id:
                if e.status is FlowStatus.ACTIVE:
                    rejected.append(f)
                e.reject()
                e.reserved_rate = 0.0
                e.assigned_rate = 0.0
        self.allocate()
        return rejected

    def blocks(self, source: int) -> bool:
        return source in self.drop_rules

    def row(self, flow_id: int, interval: int) -> FmtRow | None:
        e = self.entries.get(flow_id)
        if e is None:
            return None
        return FmtRow(self.node_id, flow_id, interval, e.sending_rate,
                      e.assigned_rate, e.actual_rate)


def propagate_fmt(packet, monitor: FlowMonitor, interval: int):
    """Stamp the forwarding node's current row for the packet's flow."""
    row = monitor.row(packet.flow_id, interval)
    if row is not None:
        packet.fmt_row = row
    return packet


@dataclass
class _Episode:
    reference_interval: int
    checks: list[int] = field(default_factory=list)
    same_streak: int = 0


class DestinationMonitor:
    """Rows received by a destination and the unresponsive-sender test.

    A flow that was sent a notice at tick k is checked by comparing the row
    measured over interval k+1 (the first interval fully after the notice)
    with the row measured just before the episode of notices began. Two
    consecutive "same rate" results identify the sender as an attacker.
    """

    history = 12

    def __init__(self, node_id: int, epsilon: float):
        self.node_id = node_id
        self.epsilon = epsilon
        self.rows: dict[int, dict[int, FmtRow]] = {}
        self.episodes: dict[int, _Episode] = {}

    def receive(self, row: FmtRow | None) -> None:
        if row is None:
            return
        per_flow = self.rows.setdefault(row.flow_id, {})
        per_flow[row.interval] = row
        if len(per_flow) > self.history:
            del per_flow[min(per_flow)]

    def latest(self, flow_id: int) -> tuple[FmtRow | None, FmtRow | None]:
        """(previous, current) rows by measurement interval."""
        per_flow = self.rows.get(flow_id, {})
        keys = sorted(per_flow)
        cur = per_flow[keys[-1]] if keys else None
        prev = per_flow[keys[-2]] if len(keys) > 1 else None
        return prev, cur

    def notice_sent(self, flow_id: int, tick: int) -> None:
        ep = self.episodes.get(flow_id)
        if ep is None:
            ep = self.episodes[flow_id] = _Episode(reference_interval=tick - 1)
        ep.checks.append(tick)

    def evaluate(self, tick: int) -> list[int]:
        """Run due checks at ``tick``; returns flows identified as unresponsive."""
        unresponsive = []
        for flow_id in sorted(self.episodes):
            ep = self.episodes[flow_id]
            per_flow = self.rows.get(flow_id, {})
            ref = per_flow.get(ep.reference_interval)
            remaining = []
            for k in ep.checks:
                cur = per_flow.get(k + 1)
                if cur is None:
                    if tick <= k + 4:
                        remaining.append(k)
                    continue
                if ref is None or ref.sending_rate == 0:
                    continue
                if detect_unresponsive_sender(ref.sending_rate, cur.sending_rate,
                                              self.epsilon):
                    ep.same_streak += 1
                else:
                    ep.same_streak = 0
                if ep.same_streak >= 2:
                    unresponsive.append(flow_id)
            ep.checks = remaining
            if flow_id in unresponsive or not remaining:
                del self.episodes[flow_id]
        return unresponsive


def destination_feedback(destination: int, signals: MacSignals, thresholds: Thresholds,
                         active_flows, now: float) -> CongestionNotice | None:
    if not congestion_detected(signals, thresholds):
        return None
    flows = sorted(active_flows)
    if not flows:
        return None
    return CongestionNotice(destination, flows, now)
