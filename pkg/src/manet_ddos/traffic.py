"""CBR flow descriptions and seeded endpoint selection."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .routing import NoRoute, hop_distances
from .topology import Topology


class RateZero(ValueError):
    """The flow's current rate is zero; it stays paused until the rate rises."""


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    source_id: int
    destination_id: int
    data_rate: float
    packet_size: int = 512
    start_time: float = 0.0
    is_attacker: bool = False

    def __post_init__(self):
        if not self.data_rate > 0:
            raise ValueError(f"flow {self.flow_id}: data_rate must be positive")
        if not self.packet_size > 0:
            raise ValueError(f"flow {self.flow_id}: packet_size must be positive")
        if self.source_id == self.destination_id:
            raise ValueError(f"flow {self.flow_id}: source equals destination")

    @property
    def packet_bits(self) -> int:
        return self.packet_size * 8


def next_packet_time(flow: FlowSpec, current_rate: float, now: float) -> float:
    rate = flow.data_rate if flow.is_attacker else current_rate
    if rate <= 0:
        raise RateZero(f"flow {flow.flow_id} has zero rate")
    return now + flow.packet_bits / rate


def _path_from(dist: dict[int, int], source: int, topology: Topology) -> tuple[int, ...]:
    path = [source]
    node = source
    while dist[node] > 0:
        node = min(v for v in topology.adjacency[node] if dist.get(v) == dist[node] - 1)
        path.append(node)
    return tuple(path)


def _candidate_pairs(topology: Topology, min_hops: int, used: set[int], dist_to):
    nodes = [n for n in topology.node_ids() if n not in used]
    for s in nodes:
        for d in nodes:
            if s == d:
                continue
            hops = dist_to[d].get(s)
            if hops is not None and hops >= min_hops:
                yield s, d


def select_flows(topology: Topology, rng: random.Random, *, legit_count: int,
                 legit_rate: float, attack_count: int, attack_rate: float,
                 packet_size: int = 512, legit_start: float = 0.0,
                 attack_start: float = 10.0, min_hops: int = 2) -> list[FlowSpec]:
    """Draw endpoints for legitimate and attack flows.

    Every flow gets two fresh endpoints connected by a path of at least
    ``min_hops`` hops. Legitimate pairs are drawn uniformly. Attack pairs are
    drawn among pairs whose route passes through a relay of some legitimate
    route, so attack traffic contends with legitimate traffic; if no such
    pair is left, any remaining pair is used.
    """
    dist_to = {d: hop_distances(topology, d) for d in topology.node_ids()}
    flows: list[FlowSpec] = []
    used: set[int] = set()
    relays: set[int] = set()
    for i in range(legit_count):
        pairs = list(_candidate_pairs(topology, min_hops, used, dist_to))
        if not pairs:
            raise NoRoute("not enough connected node pairs for legitimate flows")
        s, d = rng.choice(pairs)
        path = _path_from(dist_to[d], s, topology)
        used.update((s, d))
        relays.update(path[1:-1])
        flows.append(FlowSpec(i, s, d, legit_rate, packet_size, legit_start, False))
    for j in range(attack_count):
        pairs = list(_candidate_pairs(topology, min_hops, used, dist_to))
        crossing = [(s, d) for s, d in pairs
                    if relays & set(_path_from(dist_to[d], s, topology)[1:-1])]
        if crossing:
            pairs = crossing
        if not pairs:
            raise NoRoute("not enough connected node pairs for attack flows")
        s, d = rng.choice(pairs)
        used.update((s, d))
        flows.append(FlowSpec(legit_count + j, s, d, attack_rate, packet_size,
                              attack_start, True))
    return flows
