"""Minimum-hop routing with deterministic tie-breaking and a link-break hook."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .topology import Topology


class NoRoute(LookupError):
    pass


@dataclass(frozen=True)
class Route:
    flow_id: int
    forward_path: tuple[int, ...]

    @property
    def reverse_path(self) -> tuple[int, ...]:
        return self.forward_path[::-1]

    @property
    def hops(self) -> int:
        return len(self.forward_path) - 1

    def links(self) -> set[frozenset]:
        p = self.forward_path
        return {frozenset((p[i], p[i + 1])) for i in range(len(p) - 1)}


def hop_distances(topology: Topology, target: int) -> dict[int, int]:
    dist = {target: 0}
    queue = deque([target])
    adj = topology.adjacency
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_path(source: int, destination: int, topology: Topology) -> tuple[int, ...]:
    if source == destination:
        raise ValueError("source and destination must differ")
    dist = hop_distances(topology, destination)
    if source not in dist:
        raise NoRoute(f"no path from {source} to {destination}")
    path = [source]
    node = source
    while node != destination:
        # smallest-id neighbor one hop closer to the destination
        node = min(v for v in topology.adjacency[node] if dist.get(v) == dist[node] - 1)
        path.append(node)
    return tuple(path)


def compute_route(source: int, destination: int, topology: Topology, flow_id: int = -1) -> Route:
    return Route(flow_id, shortest_path(source, destination, topology))


class Router:
    """Holds the current route of every flow and re-routes on link breakage."""

    def __init__(self, topology: Topology):
        self.topology = topology
        self.routes: dict[int, Route] = {}
        self.failed: set[int] = set()
        self.endpoints: dict[int, tuple[int, int]] = {}

    def add_flow(self, flow_id: int, source: int, destination: int) -> Route:
        self.endpoints[flow_id] = (source, destination)
        route = compute_route(source, destination, self.topology, flow_id)
        self.routes[flow_id] = route
        return route

    def route(self, flow_id: int) -> Route:
        return self.routes[flow_id]

    def on_link_break(self, u: int, v: int) -> dict[int, tuple[Route, Route | None]]:
        """Remove link (u, v); returns {flow_id: (old_route, new_route or None)}.

        A ``None`` new route means the flow is now failed.
        """
        self.topology.remove_link(u, v)
        link = frozenset((u, v))
        affected = {}
        for flow_id in sorted(self.routes):
            old = self.routes[flow_id]
            if link not in old.links():
                continue
            src, dst = self.endpoints[flow_id]
            try:
                new = compute_route(src, dst, self.topology, flow_id)
            except NoRoute:
                new = None
                del self.routes[flow_id]
                self.failed.add(flow_id)
            else:
                self.routes[flow_id] = new
            affected[flow_id] = (old, new)
        return affected
