"""Time-bucketed per-flow counters and the figures derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

CATEGORIES = ("sent", "delivered", "bits", "dropped_mac", "dropped_rejected", "dropped_queue")
DROP_CATEGORIES = ("dropped_mac", "dropped_rejected", "dropped_queue")

CSV_COLUMNS = ("time_s", "flow_id", "delivered_bits", "sent_pkts", "delivered_pkts",
               "dropped_mac", "dropped_rejected", "dropped_queue")


class NoTraffic(ValueError):
    pass


@dataclass
class MetricsLog:
    bucket_width: float
    sim_time: float
    flows: dict[int, bool] = field(default_factory=dict)  # flow_id -> is_attacker
    # (flow_id, category) -> list indexed by bucket
    counters: dict[tuple[int, str], list] = field(default_factory=dict)
    detection_times: dict[int, float] = field(default_factory=dict)
    events: list[tuple[float, int, str]] = field(default_factory=list)
    record_events: bool = False

    def __post_init__(self):
        if not self.bucket_width > 0:
            raise ValueError("bucket width must be positive")
        self.n_buckets = max(1, math.ceil(self.sim_time / self.bucket_width - 1e-9))

    def register_flow(self, flow_id: int, is_attacker: bool) -> None:
        self.flows[flow_id] = is_attacker
        for cat in CATEGORIES:
            self.counters[(flow_id, cat)] = [0] * self.n_buckets

    def bucket(self, t: float) -> int:
        return min(self.n_buckets - 1, int(t / self.bucket_width))

    def add(self, t: float, flow_id: int, category: str, amount=1) -> None:
        self.counters[(flow_id, category)][self.bucket(t)] += amount
        if self.record_events and category != "bits":
            self.events.append((t, flow_id, category))

    def record_detection(self, flow_id: int, t: float) -> None:
        self.detection_times.setdefault(flow_id, t)

    def total(self, flow_id: int, category: str):
        return sum(self.counters[(flow_id, category)])

    def legitimate(self) -> list[int]:
        return sorted(f for f, bad in self.flows.items() if not bad)

    def attackers(self) -> list[int]:
        return sorted(f for f, bad in self.flows.items() if bad)

    def in_flight(self, flow_id: int) -> int:
        return self.total(flow_id, "sent") - self.total(flow_id, "delivered") - sum(
            self.total(flow_id, c) for c in DROP_CATEGORIES)

    def rows(self):
        """CSV rows ordered by flow then bucket."""
        for f in sorted(self.flows):
            for b in range(self.n_buckets):
                yield (
                    round(b * self.bucket_width, 9), f,
                    self.counters[(f, "bits")][b],
                    self.counters[(f, "sent")][b],
                    self.counters[(f, "delivered")][b],
                    self.counters[(f, "dropped_mac")][b],
                    self.counters[(f, "dropped_rejected")][b],
                    self.counters[(f, "dropped_queue")][b],
                )


def received_bandwidth_series(log: MetricsLog, legitimate_only: bool = True,
                              flows=None) -> list[tuple[float, float]]:
    if flows is None:
        flows = log.legitimate() if legitimate_only else sorted(log.flows)
    out = []
    for b in range(log.n_buckets):
        bits = sum(log.counters[(f, "bits")][b] for f in flows)
        out.append((b * log.bucket_width, bits / log.bucket_width))
    return out


def packet_delivery_ratio(log: MetricsLog, flows) -> float:
    sent = sum(log.total(f, "sent") for f in flows)
    if sent <= 0:
        raise NoTraffic("no packets were sent by the selected flows")
    return sum(log.total(f, "delivered") for f in flows) / sent


def lost_packets_series(log: MetricsLog, flows=None) -> list[tuple[float, int]]:
    """Per-bucket drops of all categories for the selected (default: legitimate) flows."""
    if flows is None:
        flows = log.legitimate()
    return [(b * log.bucket_width,
             sum(log.counters[(f, c)][b] for f in flows for c in DROP_CATEGORIES))
            for b in range(log.n_buckets)]


def summarize(log: MetricsLog) -> dict:
    per_flow = {}
    for f in sorted(log.flows):
        per_flow[f] = {
            "attacker": log.flows[f],
            "sent": log.total(f, "sent"),
            "delivered": log.total(f, "delivered"),
            "dropped_mac": log.total(f, "dropped_mac"),
            "dropped_rejected": log.total(f, "dropped_rejected"),
            "dropped_queue": log.total(f, "dropped_queue"),
            "in_flight": log.in_flight(f),
            "delivered_bits": log.total(f, "bits"),
        }
    legit = log.legitimate()
    attackers = log.attackers()
    try:
        pdr = packet_delivery_ratio(log, legit)
    except NoTraffic:
        pdr = float("nan")
    lost = sum(per_flow[f][c] for f in legit for c in DROP_CATEGORIES)
    legit_bits = sum(per_flow[f]["delivered_bits"] for f in legit)
    all_bits = sum(p["delivered_bits"] for p in per_flow.values())
    return {
        "flows": per_flow,
        "legit_pdr": pdr,
        "legit_lost_packets": lost,
        "legit_dropped_mac": sum(per_flow[f]["dropped_mac"] for f in legit),
        "legit_dropped_queue": sum(per_flow[f]["dropped_queue"] for f in legit),
        "legit_dropped_rejected": sum(per_flow[f]["dropped_rejected"] for f in legit),
        "attacker_dropped_rejected": sum(per_flow[f]["dropped_rejected"] for f in attackers),
        "mean_legit_bandwidth_bps": legit_bits / log.sim_time,
        "mean_all_bandwidth_bps": all_bits / log.sim_time,
        "sent": sum(p["sent"] for p in per_flow.values()),
        "delivered": sum(p["delivered"] for p in per_flow.values()),
        "dropped": sum(p[c] for p in per_flow.values() for c in DROP_CATEGORIES),
        "in_flight": sum(p["in_flight"] for p in per_flow.values()),
        "detection_times": {f: log.detection_times[f] for f in sorted(log.detection_times)},
    }
