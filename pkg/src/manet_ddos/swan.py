"""SWAN-like baseline: probe-based admission and AIMD source shaping.

There is no flow monitoring and no rejection; attackers ignore the shaper.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class SwanSourceState:
    flow_id: int
    shaped_rate: float
    increment: float = 5_000.0
    decrease_fraction: float = 0.3
    # application rate; the shaper cannot push a CBR source above it
    ceiling: float | None = None

    def __post_init__(self):
        if self.shaped_rate < 0:
            raise ValueError("shaped_rate must be non-negative")
        if not 0 < self.decrease_fraction < 1:
            raise ValueError("decrease_fraction must lie in (0, 1)")


def swan_admission(path_abw, requested_rate: float) -> bool:
    """Admit iff the minimum available bandwidth along the probed path covers the request."""
    return min(path_abw) >= requested_rate


def swan_rate_control(state: SwanSourceState, congested: bool) -> float:
    if congested:
        state.shaped_rate = state.shaped_rate * (1 - state.decrease_fraction)
    else:
        state.shaped_rate = state.shaped_rate + state.increment
        if state.ceiling is not None:
            state.shaped_rate = min(state.shaped_rate, state.ceiling)
    return state.shaped_rate
