import pytest
from hypothesis import given, strategies as st

from manet_ddos.engine import Event, EventKind, PastEvent, Simulator, substream


def test_event_fires_at_scheduled_time():
    sim = Simulator()
    seen = []
    sim.at(0.5, lambda: seen.append(sim.clock))
    sim.run_until(1.0)
    assert seen == [0.5]


def test_equal_times_fire_in_sequence_order():
    sim = Simulator()
    seen = []
    sim.schedule(Event(1.0, 8, EventKind.TIMER, seen.append, (8,)))
    sim.schedule(Event(1.0, 7, EventKind.TIMER, seen.append, (7,)))
    sim.run_until(2.0)
    assert seen == [7, 8]


def test_scheduling_in_the_past_raises():
    sim = Simulator()
    sim.run_until(0.2)
    with pytest.raises(PastEvent):
        sim.at(0.1, lambda: None)


def test_empty_queue_advances_clock():
    sim = Simulator()
    assert sim.run_until(60.0) == 60.0
    assert sim.events_fired == 0


def test_run_until_boundary_leaves_later_events_pending():
    sim = Simulator()
    seen = []
    for t in (1.0, 2.0, 3.0):
        sim.at(t, seen.append, t)
    sim.run_until(2.5)
    assert seen == [1.0, 2.0]
    assert sim.pending() == 1
    assert sim.clock == 2.5


def test_cancelled_event_does_not_fire():
    sim = Simulator()
    seen = []
    ev = sim.at(1.0, seen.append, "x")
    sim.cancel(ev)
    sim.run_until(2.0)
    assert seen == [] and sim.events_fired == 0


def test_substreams_are_reproducible_and_distinct():
    a = [substream(3, "mac").random() for _ in range(3)]
    b = [substream(3, "mac").random() for _ in range(3)]
    assert a == b
    assert substream(3, "mac").random() != substream(3, "flows").random()
    assert substream(3, "mac").random() != substream(4, "mac").random()


@given(st.lists(st.floats(min_value=0, max_value=100, allow_nan=False), min_size=1, max_size=40))
def test_clock_never_runs_backwards(times):
    sim = Simulator(trace=True)
    for t in times:
        sim.at(t, lambda: None)
    sim.run_until(100.0)
    fired = [t for t, _, _ in sim.trace]
    assert fired == sorted(fired)
    assert len(fired) == len(times)


@given(st.lists(st.floats(min_value=0, max_value=5, allow_nan=False), min_size=1, max_size=30))
def test_handlers_scheduling_follow_ups_keep_order(times):
    sim = Simulator(trace=True)

    def chain(depth):
        if depth:
            sim.after(0.25, chain, depth - 1)

    for t in times:
        sim.at(t, chain, 2)
    sim.run_until(10.0)
    keys = [(t, s) for t, s, _ in sim.trace]
    assert [t for t, _ in keys] == sorted(t for t, _ in keys)
    assert len(set(keys)) == len(keys)
