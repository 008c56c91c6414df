"""Abstract shared-medium contention model and the MAC signals it exposes.

No frame-level DCF is simulated. A sender may start a transmission only when
no node in its closed neighborhood senses the medium busy, so at most one
transmission is audible in any closed neighborhood at a time. A busy medium
defers the attempt until the neighborhood falls idle plus a seeded
exponential backoff whose mean doubles per retry. Every transmission counts
as one RTS/CTS receipt at each neighbor of the sender.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .topology import Topology

DELIVER = "deliver"
RETRY = "retry"
DROP = "drop"


class NotAdjacent(ValueError):
    pass


@dataclass(frozen=True)
class MacSignals:
    rts_cts_frequency: float = 0.0
    busy_fraction: float = 0.0
    retransmission_count: int = 0
    window: float = 1.0


@dataclass(frozen=True)
class Thresholds:
    busy: float = 0.8
    rts_per_s: float = 150.0
    retx: float = 60

    def __post_init__(self):
        if not (self.busy > 0 and self.rts_per_s > 0 and self.retx > 0):
            raise ValueError("congestion thresholds must be positive")


def congestion_detected(signals: MacSignals, thresholds: Thresholds) -> bool:
    return (signals.busy_fraction > thresholds.busy
            or signals.rts_cts_frequency > thresholds.rts_per_s
            or signals.retransmission_count > thresholds.retx)


@dataclass(frozen=True)
class Outcome:
    kind: str
    time: float


class Channel:
    """Neighborhood channel state for all nodes of a topology.

    ``begin_transmission`` is the only mutator of occupancy; counters are read
    and reset by ``sample_signals``.
    """

    def __init__(self, topology: Topology, capacity_bps: float, rng: random.Random,
                 max_retries: int = 7, backoff_mean: float = 1e-3,
                 record: bool = False):
        if not capacity_bps > 0:
            raise ValueError("link capacity must be positive")
        self.topology = topology
        self.capacity = float(capacity_bps)
        self.rng = rng
        self.max_retries = max_retries
        self.backoff_mean = backoff_mean
        n = len(topology.nodes)
        self.busy_until = [0.0] * n
        self.rts_cts = [0] * n
        self.retransmissions = [0] * n
        self.busy_time = [0.0] * n
        self.mac_drops = [0] * n
        self._closed: list[tuple[int, ...]] = []
        self.refresh_neighborhoods()
        # (start, end, sender) of every transmission, for offline replay
        self.log: list[tuple[float, float, int]] | None = [] if record else None

    def refresh_neighborhoods(self) -> None:
        adj = self.topology.adjacency
        self._closed = [tuple(sorted(adj[u] | {u})) for u in range(len(self.topology.nodes))]

    def transmission_time(self, bits: float) -> float:
        return bits / self.capacity

    def is_idle(self, node: int, now: float) -> bool:
        busy = self.busy_until
        return all(busy[v] <= now for v in self._closed[node])

    def begin_transmission(self, now: float, sender: int, packet_bits: float,
                           receiver: int, attempt: int = 0) -> Outcome:
        """Try to seize the medium for one frame.

        ``attempt`` is the number of busy attempts already made for this
        frame. Returns DELIVER with the transmission end time, RETRY with the
        time of the next attempt, or DROP once ``max_retries`` retries have
        all found the medium busy.
        """
        if packet_bits <= 0:
            raise ValueError("packet_bits must be positive")
        if not self.topology.is_adjacent(sender, receiver):
            raise NotAdjacent(f"{receiver} is not a neighbor of {sender}")
        closed = self._closed[sender]
        busy = self.busy_until
        for v in closed:
            if busy[v] > now:
                break
        else:
            end = now + packet_bits / self.capacity
            duration = end - now
            for v in closed:
                busy[v] = end
                self.busy_time[v] += duration
                if v != sender:
                    self.rts_cts[v] += 1
            if self.log is not None:
                self.log.append((now, end, sender))
            return Outcome(DELIVER, end)
        if attempt >= self.max_retries:
            self.mac_drops[sender] += 1
            return Outcome(DROP, now)
        self.retransmissions[sender] += 1
        # defer until the neighborhood falls idle, then back off
        idle_at = max(busy[v] for v in closed)
        mean = self.backoff_mean * (2 ** attempt)
        return Outcome(RETRY, idle_at + self.rng.expovariate(1.0 / mean))

    def sample_signals(self, node: int, window: float, now: float | None = None) -> MacSignals:
        """Signals accumulated since the previous sample of ``node``, then reset.

        When ``now`` is given, the part of an ongoing transmission that extends
        past ``now`` is carried into the next window.
        """
        if not window > 0:
            raise ValueError("window must be positive")
        busy = self.busy_time[node]
        carry = 0.0
        if now is not None:
            carry = max(0.0, self.busy_until[node] - now)
            busy -= carry
        signals = MacSignals(
            rts_cts_frequency=self.rts_cts[node] / window,
            busy_fraction=min(1.0, max(0.0, busy / window)),
            retransmission_count=self.retransmissions[node],
            window=window,
        )
        self.rts_cts[node] = 0
        self.retransmissions[node] = 0
        self.busy_time[node] = carry
        return signals
