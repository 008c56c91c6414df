"""Packet-level network simulation tying together channel, routing, traffic,
the flow-monitoring defense and the SWAN-like baseline.

One ``Network`` instance is one run: it owns its engine, channel, monitors and
metrics, and shares no mutable state with other runs.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from . import defense
from .defense import (DestinationMonitor, DropRule, FlowMonitor, FlowStatus, Verdict,
                      classify_flow, destination_feedback, establish_flow,
                      exceeds_allowance, initiate_query, measure_rate,
                      packet_granular_rate, propagate_fmt)
from .engine import EventKind, Simulator, substream
from .mac import DELIVER, DROP, Channel, MacSignals, Thresholds
from .metrics import MetricsLog
from .routing import Route, Router
from .swan import SwanSourceState, swan_admission, swan_rate_control
from .topology import Topology
from .traffic import FlowSpec, RateZero, next_packet_time

log = logging.getLogger(__name__)

PROPOSED = "proposed"
SWAN = "swan"
NONE = "none"
SCHEMES = (PROPOSED, SWAN, NONE)

DATA = "DATA"
REQUEST = "REQUEST"
REPLY = "REPLY"
NOTICE = "NOTICE"


@dataclass
class SimConfig:
    scheme: str = PROPOSED
    link_capacity: float = 2_000_000.0
    packet_size: int = 512
    sim_time: float = 60.0
    interval: float = 1.0
    delta: float = 5_000.0
    epsilon: float = 0.05
    thresholds: Thresholds = field(default_factory=Thresholds)
    max_retries: int = 7
    backoff_mean: float = 1e-3
    queue_capacity: int = 50
    control_packet_size: int = 64
    query_timeout: float = 2.0
    burst_window: int = 3
    swan_increment: float = 5_000.0
    swan_decrease: float = 0.3
    bucket_width: float = 1.0
    link_breaks: list[tuple[float, int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(slots=True)
class Packet:
    kind: str
    flow_id: int
    source: int
    path: tuple
    hop: int
    bits: int
    seq: int = 0
    created: float = 0.0
    fmt_row: defense.FmtRow | None = None
    query: defense.QueryPacket | None = None
    path_abw: float = float("inf")

    @property
    def holder(self) -> int:
        return self.path[self.hop]

    @property
    def next_hop(self) -> int:
        return self.path[self.hop + 1]


class _Node:
    __slots__ = ("id", "data", "control", "in_service", "attempt", "transmitting",
                 "monitor", "sink")

    def __init__(self, node_id: int, capacity: float, epsilon: float):
        self.id = node_id
        self.data: deque = deque()
        self.control: deque = deque()
        self.in_service: Packet | None = None
        self.attempt = 0
        self.transmitting = False
        self.monitor = FlowMonitor(node_id, capacity)
        self.sink = DestinationMonitor(node_id, epsilon)


@dataclass
class _Flow:
    spec: FlowSpec
    route: Route | None
    rate: float = 0.0
    previous_rate: float = 0.0
    established: bool = False
    sending: bool = False
    paused: bool = False
    failed: bool = False
    noticed: bool = False
    seq: int = 0
    query_epoch: int = 0
    swan: SwanSourceState | None = None
    next_emit = None


@dataclass
class RunResult:
    config: SimConfig
    flows: list[FlowSpec]
    metrics: MetricsLog
    topology: Topology
    fmt_log: list[dict]
    allocation_log: list[dict]
    notice_log: list[dict]
    rejection_log: list[dict]
    query_log: list[dict]
    status: dict[int, str]
    events_fired: int
    trace: list | None = None


class Network:
    def __init__(self, topology: Topology, flows: list[FlowSpec], config: SimConfig,
                 seed: int, trace: bool = False, record_channel: bool = False):
        self.cfg = config
        self.seed = seed
        self.topology = topology
        self.sim = Simulator(trace=trace)
        self.channel = Channel(topology, config.link_capacity, substream(seed, "mac"),
                               config.max_retries, config.backoff_mean, record=record_channel)
        self.router = Router(topology)
        self.nodes = [_Node(n, config.link_capacity, config.epsilon)
                      for n in topology.node_ids()]
        self.metrics = MetricsLog(config.bucket_width, config.sim_time)
        self.flows: dict[int, _Flow] = {}
        self.control_bits = config.control_packet_size * 8
        self.measured_interval = -1
        self.fmt_log: list[dict] = []
        self.allocation_log: list[dict] = []
        self.notice_log: list[dict] = []
        self.rejection_log: list[dict] = []
        self.query_log: list[dict] = []
        self.blocked_at_source: set[int] = set()
        self.burst_window = config.burst_window
        for spec in flows:
            route = self.router.add_flow(spec.flow_id, spec.source_id, spec.destination_id)
            self.flows[spec.flow_id] = _Flow(spec, route)
            self.metrics.register_flow(spec.flow_id, spec.is_attacker)
        self.specs = list(flows)

    # ------------------------------------------------------------------ run

    def run(self) -> RunResult:
        cfg = self.cfg
        sim = self.sim
        for f in sorted(self.flows.values(), key=lambda f: f.spec.flow_id):
            sim.at(f.spec.start_time, self._start_flow, f)
        k = 1
        while k * cfg.interval <= cfg.sim_time + 1e-12:
            sim.at(k * cfg.interval, self._tick, k, kind=EventKind.MEASUREMENT_TICK)
            k += 1
        for t, u, v in sorted(cfg.link_breaks):
            sim.at(t, self._link_break, u, v)
        sim.run_until(cfg.sim_time)
        status = {}
        for fid in sorted(self.flows):
            status[fid] = (FlowStatus.REJECTED.value if fid in self.metrics.detection_times
                           else FlowStatus.ACTIVE.value)
        return RunResult(cfg, self.specs, self.metrics, self.topology, self.fmt_log,
                         self.allocation_log, self.notice_log, self.rejection_log,
                         self.query_log, status, sim.events_fired, sim.trace)

    # ------------------------------------------------------------- sources

    def _start_flow(self, flow: _Flow) -> None:
        if flow.route is None:
            flow.failed = True
            return
        scheme = self.cfg.scheme
        if scheme == NONE:
            self._establish(flow, flow.spec.data_rate)
            return
        if flow.spec.is_attacker:
            # an attacker gains nothing from a reservation it will not honor,
            # so it skips the query and floods from its start time
            self._establish(flow, flow.spec.data_rate)
            return
        self._send_query(flow)

    def _send_query(self, flow: _Flow) -> None:
        spec = flow.spec
        flow.query_epoch += 1
        q = initiate_query(spec.source_id, spec.destination_id, spec.flow_id, spec.data_rate)
        pkt = Packet(REQUEST, spec.flow_id, spec.source_id, flow.route.forward_path, 0,
                     self.control_bits, query=q, created=self.sim.clock)
        pkt.seq = flow.query_epoch
        self._enqueue(self.nodes[spec.source_id], pkt)
        if not spec.is_attacker:
            self.sim.after(self.cfg.query_timeout, self._query_timeout, flow, flow.query_epoch)

    def _query_timeout(self, flow: _Flow, epoch: int) -> None:
        if flow.established or flow.failed or epoch != flow.query_epoch:
            return
        self._send_query(flow)

    def _establish(self, flow: _Flow, rate: float) -> None:
        flow.established = True
        flow.rate = rate
        if self.cfg.scheme == SWAN and not flow.spec.is_attacker:
            flow.swan = SwanSourceState(flow.spec.flow_id, rate, self.cfg.swan_increment,
                                        self.cfg.swan_decrease, ceiling=flow.spec.data_rate)
        if not flow.sending:
            flow.sending = True
            self._emit(flow)

    def _emit(self, flow: _Flow) -> None:
        flow.next_emit = None
        if flow.failed or flow.route is None:
            flow.sending = False
            return
        if not flow.established:
            flow.sending = False
            return
        spec = flow.spec
        now = self.sim.clock
        try:
            t_next = next_packet_time(spec, flow.rate, now)
        except RateZero:
            flow.paused = True
            flow.sending = False
            return
        flow.paused = False
        flow.seq += 1
        pkt = Packet(DATA, spec.flow_id, spec.source_id, flow.route.forward_path, 0,
                     spec.packet_bits, flow.seq, now)
        self.metrics.add(now, spec.flow_id, "sent")
        src = self.nodes[spec.source_id]
        if not spec.is_attacker:
            src.monitor.count(spec.flow_id, spec.packet_bits)
        if not self._enqueue(src, pkt):
            self.metrics.add(now, spec.flow_id, "dropped_queue")
        flow.next_emit = self.sim.at(t_next, self._emit, flow)

    def _set_rate(self, flow: _Flow, rate: float) -> None:
        flow.previous_rate = flow.rate
        flow.rate = rate
        if rate > 0 and flow.established and not flow.sending and not flow.failed:
            flow.sending = True
            self._emit(flow)

    # ----------------------------------------------------------------- MAC

    def _enqueue(self, node: _Node, pkt: Packet) -> bool:
        if pkt.kind == DATA:
            if len(node.data) >= self.cfg.queue_capacity:
                return False
            node.data.append(pkt)
        else:
            node.control.append(pkt)
        if node.in_service is None:
            self._service(node)
        return True

    def _service(self, node: _Node) -> None:
        topo = self.topology
        while node.in_service is None:
            if node.control:
                pkt = node.control.popleft()
            elif node.data:
                pkt = node.data.popleft()
            else:
                return
            if pkt.kind == DATA and node.id != pkt.source and node.monitor.blocks(pkt.source):
                self.metrics.add(self.sim.clock, pkt.flow_id, "dropped_rejected")
                continue
            if not topo.is_adjacent(node.id, pkt.next_hop):
                self._lose(pkt, "dropped_mac")
                continue
            node.in_service = pkt
            node.attempt = 0
            self._attempt(node)

    def _attempt(self, node: _Node) -> None:
        pkt = node.in_service
        if not self.topology.is_adjacent(node.id, pkt.next_hop):
            node.in_service = None
            self._lose(pkt, "dropped_mac")
            self._service(node)
            return
        now = self.sim.clock
        outcome = self.channel.begin_transmission(now, node.id, pkt.bits, pkt.next_hop,
                                                  node.attempt)
        if outcome.kind == DELIVER:
            node.transmitting = True
            # the row nearest the sender travels with the packet: the source's
            # own row for a reserved flow, else the first relay's estimate
            if (pkt.kind == DATA and pkt.fmt_row is None and self.cfg.scheme == PROPOSED
                    and self.measured_interval >= 0):
                propagate_fmt(pkt, node.monitor, self.measured_interval)
            self.sim.at(outcome.time, self._tx_end, node, pkt,
                        kind=EventKind.TRANSMISSION_END)
        elif outcome.kind == DROP:
            node.in_service = None
            self._lose(pkt, "dropped_mac")
            self._service(node)
        else:
            node.attempt += 1
            self.sim.at(outcome.time, self._attempt, node)

    def _lose(self, pkt: Packet, category: str) -> None:
        if pkt.kind == DATA:
            self.metrics.add(self.sim.clock, pkt.flow_id, category)

    def _tx_end(self, node: _Node, pkt: Packet) -> None:
        node.transmitting = False
        node.in_service = None
        pkt.hop += 1
        self._arrive(self.nodes[pkt.holder], pkt)
        self._service(node)

    # ------------------------------------------------------------ arrivals

    def _arrive(self, node: _Node, pkt: Packet) -> None:
        kind = pkt.kind
        if kind == DATA:
            self._arrive_data(node, pkt)
        elif kind == REQUEST:
            if pkt.hop == len(pkt.path) - 1:
                reply = Packet(REPLY, pkt.flow_id, pkt.source, pkt.path[::-1], 0,
                               self.control_bits, pkt.seq, self.sim.clock,
                               query=pkt.query.to_reply())
                self._enqueue(node, reply)
            else:
                self._enqueue(node, pkt)
        elif kind == REPLY:
            self._arrive_reply(node, pkt)
        elif kind == NOTICE:
            self._arrive_notice(node, pkt)

    def _arrive_data(self, node: _Node, pkt: Packet) -> None:
        now = self.sim.clock
        flow = self.flows[pkt.flow_id]
        if self.cfg.scheme == PROPOSED and node.monitor.blocks(pkt.source):
            self.metrics.add(now, pkt.flow_id, "dropped_rejected")
            return
        if pkt.hop == len(pkt.path) - 1:
            self.metrics.add(now, pkt.flow_id, "delivered")
            self.metrics.add(now, pkt.flow_id, "bits", pkt.bits)
            if self.cfg.scheme == PROPOSED:
                node.sink.receive(pkt.fmt_row)
            return
        if self.cfg.scheme == PROPOSED:
            route = flow.route
            if route is not None and node.id in route.forward_path:
                i = route.forward_path.index(node.id)
                node.monitor.ensure_entry(pkt.flow_id, pkt.source, route.forward_path[-1],
                                          route.forward_path[i - 1], route.forward_path[i + 1])
            self._adopt(node, pkt)
            node.monitor.count(pkt.flow_id, pkt.bits)
        if not self._enqueue(node, pkt):
            self.metrics.add(now, pkt.flow_id, "dropped_queue")

    def _arrive_reply(self, node: _Node, pkt: Packet) -> None:
        flow = self.flows[pkt.flow_id]
        fwd = pkt.path[::-1]
        i = len(fwd) - 1 - pkt.hop
        upstream = fwd[i - 1] if i > 0 else None
        downstream = fwd[i + 1]
        reply = pkt.query
        if self.cfg.scheme == PROPOSED:
            before = reply.bnbw
            abw = node.monitor.available_bandwidth
            reply = node.monitor.process_reply(reply, upstream, downstream)
            self.query_log.append({"time": self.sim.clock, "flow": pkt.flow_id,
                                   "node": node.id, "abw": abw, "bnbw_in": before,
                                   "bnbw_out": reply.bnbw, "epoch": pkt.seq})
        else:
            pkt.path_abw = min(pkt.path_abw, node.monitor.available_bandwidth)
        pkt.query = reply
        if pkt.hop < len(pkt.path) - 1:
            self._enqueue(node, pkt)
            return
        # reply is back at the source
        if pkt.seq != flow.query_epoch or flow.failed:
            return
        if self.cfg.scheme == PROPOSED:
            granted = establish_flow(flow.spec.data_rate, reply)
            if flow.spec.is_attacker:
                return
            if granted is None:
                for n in fwd[:-1]:
                    self.nodes[n].monitor.release(pkt.flow_id)
                self.query_log.append({"time": self.sim.clock, "flow": pkt.flow_id,
                                       "node": node.id, "rejected_at_admission": True})
                return
            self._establish(flow, granted)
        else:
            if flow.spec.is_attacker:
                return
            if swan_admission([pkt.path_abw], flow.spec.data_rate):
                self._establish(flow, flow.spec.data_rate)
            else:
                self.sim.after(self.cfg.interval, self._send_query, flow)

    def _arrive_notice(self, node: _Node, pkt: Packet) -> None:
        if pkt.hop < len(pkt.path) - 1:
            self._enqueue(node, pkt)
            return
        flow = self.flows[pkt.flow_id]
        flow.noticed = True
        if self.cfg.scheme != PROPOSED or flow.spec.is_attacker:
            return
        change = node.monitor.on_congestion_bit(pkt.flow_id, self.cfg.delta)
        if change is not None:
            self.notice_log.append({"time": self.sim.clock, "flow": pkt.flow_id,
                                    "node": node.id, "acr_before": change[0],
                                    "delta": self.cfg.delta, "ar_after": change[1]})
            self._set_rate(flow, change[1])

    def _adopt(self, node: _Node, pkt: Packet) -> None:
        """Take up a reduced AR announced by the upstream row on a data packet.

        Relays never apply a congestion bit themselves, so a notice lost on
        its way to the source cannot leave a relay policing a rate the
        source never agreed to.
        """
        row = pkt.fmt_row
        if row is None:
            return
        entry = node.monitor.entries.get(pkt.flow_id)
        if (entry is None or not entry.reserved or entry.status is not FlowStatus.ACTIVE
                or row.assigned_rate >= entry.assigned_rate):
            return
        before = entry.assigned_rate
        entry.assigned_rate = row.assigned_rate
        node.monitor.allocate()
        self.notice_log.append({"time": self.sim.clock, "flow": pkt.flow_id,
                                "node": node.id, "adopted_from": row.node_id,
                                "ar_before": before, "ar_after": row.assigned_rate})

    # --------------------------------------------------------------- ticks

    def _tick(self, k: int) -> None:
        cfg = self.cfg
        now = self.sim.clock
        T = cfg.interval
        interval = k - 1
        signals: dict[int, MacSignals] = {}
        for node in self.nodes:
            signals[node.id] = self.channel.sample_signals(node.id, T, now)
        if cfg.scheme == PROPOSED:
            self._measure(now, interval)
        self.measured_interval = interval
        if cfg.scheme in (PROPOSED, SWAN):
            self._feedback(now, k, signals)
        if cfg.scheme == SWAN:
            for fid in sorted(self.flows):
                flow = self.flows[fid]
                if flow.swan is None:
                    continue
                rate = swan_rate_control(flow.swan, flow.noticed)
                flow.noticed = False
                self._set_rate(flow, rate)

    def _measure(self, now: float, interval: int) -> None:
        T = self.cfg.interval
        bits = self.cfg.packet_size * 8
        flagged = []
        for node in self.nodes:
            entries = node.monitor.entries
            if not entries:
                continue
            node.monitor.allocate()
            self.allocation_log.append({
                "time": now, "node": node.id, "capacity": node.monitor.capacity,
                "assigned": {f: e.assigned_rate for f, e in sorted(entries.items())
                             if e.status is FlowStatus.ACTIVE},
                "actual": {f: e.actual_rate for f, e in sorted(entries.items())
                           if e.status is FlowStatus.ACTIVE},
            })
            for fid in sorted(entries):
                e = entries[fid]
                counted = e.traffic_counter
                reference = e.interval_acr
                mr = measure_rate(e, T)
                e.interval_acr = e.actual_rate
                if e.status is FlowStatus.REJECTED:
                    continue
                policed = node.id != self.flows[fid].spec.source_id
                verdict = None
                if policed:
                    allowance = packet_granular_rate(reference, T, bits)
                    verdict = classify_flow(mr, allowance)
                    e.recent.append((counted, allowance * T))
                    del e.recent[:-self.burst_window]
                    excess = exceeds_allowance(e.recent, self.burst_window)
                    e.exceed_streak = e.exceed_streak + 1 if excess else 0
                    if e.exceed_streak >= 2:
                        flagged.append((node, fid))
                self.fmt_log.append({
                    "time": now, "interval": interval, "node": node.id, "flow": fid,
                    "counter_bits": counted, "T": T, "measured": mr,
                    "assigned": e.assigned_rate, "actual": e.actual_rate,
                    "reference_actual": reference,
                    "verdict": verdict.value if verdict else None,
                })
        for node, fid in flagged:
            self._reject(fid, node.id, "rate_exceeds_actual")

    def _feedback(self, now: float, k: int, signals: dict[int, MacSignals]) -> None:
        by_dest: dict[int, list[int]] = {}
        for fid in sorted(self.flows):
            flow = self.flows[fid]
            if flow.failed or flow.route is None or not flow.established:
                continue
            by_dest.setdefault(flow.spec.destination_id, []).append(fid)
        for dest in sorted(by_dest):
            node = self.nodes[dest]
            active = [f for f in by_dest[dest]
                      if not node.monitor.blocks(self.flows[f].spec.source_id)]
            notice = destination_feedback(dest, signals[dest], self.cfg.thresholds,
                                          active, now)
            if notice is not None:
                for fid in notice.flow_ids:
                    route = self.flows[fid].route
                    pkt = Packet(NOTICE, fid, dest, route.reverse_path, 0,
                                 self.control_bits, created=now)
                    self._enqueue(node, pkt)
                    if self.cfg.scheme == PROPOSED:
                        node.sink.notice_sent(fid, k)
            if self.cfg.scheme == PROPOSED:
                for fid in node.sink.evaluate(k):
                    self._reject(fid, dest, "unresponsive_sender")

    # ----------------------------------------------------------- rejection

    def _reject(self, flow_id: int, detector: int, reason: str) -> None:
        flow = self.flows[flow_id]
        source = flow.spec.source_id
        if source in self.blocked_at_source:
            return
        self.blocked_at_source.add(source)
        now = self.sim.clock
        self.metrics.record_detection(flow_id, now)
        self.rejection_log.append({"time": now, "flow": flow_id, "source": source,
                                   "node": detector, "reason": reason,
                                   "attacker": flow.spec.is_attacker})
        path = flow.route.forward_path if flow.route else (source, detector)
        hop_delay = self.control_bits / self.cfg.link_capacity
        pos = path.index(detector) if detector in path else 0
        for i, n in enumerate(path):
            if n == source:
                continue
            rule = DropRule(source, flow_id, n, now + abs(i - pos) * hop_delay)
            if i == pos:
                self._install(rule)
            else:
                self.sim.at(rule.installed_at, self._install, rule)

    def _install(self, rule: DropRule) -> None:
        newly = self.nodes[rule.node_id].monitor.install_rule(rule)
        for fid in newly:
            self.metrics.record_detection(fid, self.sim.clock)

    # ------------------------------------------------------------- faults

    def _link_break(self, u: int, v: int) -> None:
        if not self.topology.is_adjacent(u, v):
            return
        affected = self.router.on_link_break(u, v)
        self.channel.refresh_neighborhoods()
        for fid, (old, new) in sorted(affected.items()):
            flow = self.flows[fid]
            for n in old.forward_path[:-1]:
                self.nodes[n].monitor.release(fid)
            flow.route = new
            if new is None:
                flow.failed = True
                if flow.next_emit is not None:
                    self.sim.cancel(flow.next_emit)
                    flow.next_emit = None
                flow.sending = False
                continue
            if self.cfg.scheme != NONE and not flow.spec.is_attacker:
                flow.established = False
                if flow.next_emit is not None:
                    self.sim.cancel(flow.next_emit)
                    flow.next_emit = None
                flow.sending = False
                self._send_query(flow)


def simulate(topology: Topology, flows: list[FlowSpec], config: SimConfig, seed: int,
             **kwargs) -> RunResult:
    return Network(topology, flows, config, seed, **kwargs).run()
