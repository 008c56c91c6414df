"""Geometric topology: seeded node placement and unit-disk adjacency."""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field


class InvalidGeometry(ValueError):
    pass


@dataclass
class Topology:
    nodes: list[tuple[int, float, float]]
    radio_range: float
    adjacency: dict[int, set[int]] = field(default_factory=dict)

    def neighbors(self, node: int) -> set[int]:
        return self.adjacency[node]

    def is_adjacent(self, u: int, v: int) -> bool:
        return v in self.adjacency.get(u, ())

    def remove_link(self, u: int, v: int) -> None:
        self.adjacency[u].discard(v)
        self.adjacency[v].discard(u)

    def node_ids(self) -> list[int]:
        return [n for n, _, _ in self.nodes]

    def position(self, node: int) -> tuple[float, float]:
        _, x, y = self.nodes[node]
        return x, y

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, ordered by smallest member."""
        seen: set[int] = set()
        out = []
        for start in self.node_ids():
            if start in seen:
                continue
            comp = []
            queue = deque([start])
            seen.add(start)
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in sorted(self.adjacency[u]):
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
            out.append(sorted(comp))
        return out


def place_nodes(count: int, width: float, height: float,
                rng: random.Random) -> list[tuple[int, float, float]]:
    """Uniform random placement; node ids are 0..count-1."""
    return [(i, rng.uniform(0.0, width), rng.uniform(0.0, height)) for i in range(count)]


def build_topology(node_specs, radio_range: float,
                   area: tuple[float, float] | None = None) -> Topology:
    """Unit-disk graph: u and v are adjacent iff their distance is <= radio_range."""
    if not radio_range > 0:
        raise InvalidGeometry(f"radio range must be positive, got {radio_range}")
    nodes = [(int(n), float(x), float(y)) for n, x, y in node_specs]
    ids = [n for n, _, _ in nodes]
    if ids != list(range(len(nodes))):
        raise InvalidGeometry("node ids must be 0..N-1 in order")
    if area is not None:
        w, h = area
        for n, x, y in nodes:
            if not (0.0 <= x <= w and 0.0 <= y <= h):
                raise InvalidGeometry(f"node {n} at ({x}, {y}) lies outside {w}x{h}")
    adjacency: dict[int, set[int]] = {n: set() for n in ids}
    for i, (u, xu, yu) in enumerate(nodes):
        for v, xv, yv in nodes[i + 1:]:
            if math.hypot(xu - xv, yu - yv) <= radio_range:
                adjacency[u].add(v)
                adjacency[v].add(u)
    return Topology(nodes, float(radio_range), adjacency)
