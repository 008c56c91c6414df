from collections import Counter

import pytest
from hypothesis import given, strategies as st

from manet_ddos.metrics import (DROP_CATEGORIES, MetricsLog, NoTraffic, lost_packets_series,
                                packet_delivery_ratio, received_bandwidth_series, summarize)


def steady_log(rates, sim_time=10.0):
    log = MetricsLog(1.0, sim_time)
    for f, rate in enumerate(rates):
        log.register_flow(f, False)
        for b in range(int(sim_time)):
            log.add(b + 0.5, f, "bits", rate)
    return log


def test_steady_flow_gives_flat_series():
    assert [v for _, v in received_bandwidth_series(steady_log([50_000]))] == [50_000] * 10


def test_empty_bucket_reads_zero():
    log = MetricsLog(1.0, 3.0)
    log.register_flow(0, False)
    log.add(0.2, 0, "bits", 4096)
    assert received_bandwidth_series(log) == [(0.0, 4096.0), (1.0, 0.0), (2.0, 0.0)]


def test_two_flows_add_up():
    assert {v for _, v in received_bandwidth_series(steady_log([50_000, 50_000]))} == {100_000}


def test_half_second_buckets_scale_to_bits_per_second():
    log = MetricsLog(0.5, 1.0)
    log.register_flow(0, False)
    log.add(0.1, 0, "bits", 1000)
    assert received_bandwidth_series(log)[0] == (0.0, 2000.0)


def test_legitimate_only_excludes_attackers():
    log = steady_log([50_000])
    log.register_flow(9, True)
    log.add(1.0, 9, "bits", 1_000_000)
    assert received_bandwidth_series(log)[1][1] == 50_000
    assert received_bandwidth_series(log, legitimate_only=False)[1][1] == 1_050_000


def _pdr_log(sent, delivered):
    log = MetricsLog(1.0, 1.0)
    log.register_flow(0, False)
    log.add(0.0, 0, "sent", sent)
    log.add(0.0, 0, "delivered", delivered)
    return log


@pytest.mark.parametrize("sent,delivered,pdr", [(1000, 900, 0.9), (40, 40, 1.0)])
def test_pdr_examples(sent, delivered, pdr):
    assert packet_delivery_ratio(_pdr_log(sent, delivered), [0]) == pdr


def test_pdr_without_traffic():
    with pytest.raises(NoTraffic):
        packet_delivery_ratio(_pdr_log(0, 0), [0])


def test_events_after_the_end_land_in_the_last_bucket():
    log = MetricsLog(1.0, 60.0)
    assert log.n_buckets == 60 and log.bucket(60.0) == 59 and log.bucket(59.999) == 59


def test_bucket_width_must_be_positive():
    with pytest.raises(ValueError):
        MetricsLog(0.0, 10.0)


def test_summary_passes_detection_time_through():
    log = MetricsLog(1.0, 60.0)
    log.register_flow(0, False)
    log.register_flow(5, True)
    log.record_detection(5, 12.0)
    log.record_detection(5, 13.0)
    assert summarize(log)["detection_times"] == {5: 12.0}


def test_clean_run_summary():
    s = summarize(steady_log([50_000, 50_000]))
    assert s["detection_times"] == {} and s["attacker_dropped_rejected"] == 0
    assert s["mean_legit_bandwidth_bps"] == 100_000


def test_lost_packets_count_only_legitimate_drops():
    log = MetricsLog(1.0, 2.0)
    log.register_flow(0, False)
    log.register_flow(1, True)
    log.add(0.5, 0, "dropped_mac")
    log.add(1.5, 0, "dropped_queue", 2)
    log.add(1.5, 1, "dropped_rejected", 30)
    assert lost_packets_series(log) == [(0.0, 1), (1.0, 2)]
    s = summarize(log)
    assert s["legit_lost_packets"] == 3 and s["attacker_dropped_rejected"] == 30


# random event streams: (time, flow, outcome) with outcome None = still in flight
events = st.lists(st.tuples(st.floats(0, 20, allow_nan=False), st.integers(0, 3),
                            st.sampled_from([None, "delivered"] + list(DROP_CATEGORIES)),
                            st.floats(0, 20, allow_nan=False)), max_size=200)


@given(events)
def test_summary_totals_match_an_independent_count(stream):
    log = MetricsLog(1.0, 20.0, record_events=True)
    for f in range(4):
        log.register_flow(f, f == 3)
    for t_sent, f, outcome, t_end in stream:
        log.add(t_sent, f, "sent")
        if outcome is not None:
            log.add(t_end, f, outcome)
            if outcome == "delivered":
                log.add(t_end, f, "bits", 4096)
    counts = Counter((f, cat) for _, f, cat in log.events)
    pending = Counter(f for _, f, outcome, _ in stream if outcome is None)
    s = summarize(log)
    for f, p in s["flows"].items():
        assert p["sent"] == counts[(f, "sent")]
        assert p["in_flight"] == pending[f]
        assert p["sent"] == p["delivered"] + sum(p[c] for c in DROP_CATEGORIES) + p["in_flight"]
    assert s["sent"] == s["delivered"] + s["dropped"] + s["in_flight"]
    if any(p["sent"] for f, p in s["flows"].items() if f != 3):
        assert 0.0 <= s["legit_pdr"] <= 1.0


@given(st.lists(st.lists(st.integers(0, 10**6), min_size=5, max_size=5), min_size=1, max_size=5))
def test_series_is_the_sum_of_per_flow_series(per_flow_bits):
    log = MetricsLog(1.0, 5.0)
    for f, bits in enumerate(per_flow_bits):
        log.register_flow(f, f % 2 == 1)
        for b, v in enumerate(bits):
            log.add(b, f, "bits", v)
    total = received_bandwidth_series(log, legitimate_only=False)
    parts = [received_bandwidth_series(log, flows=[f]) for f in log.flows]
    for b, (t, v) in enumerate(total):
        assert v == sum(p[b][1] for p in parts)


@given(st.integers(1, 500), st.data())
def test_pdr_is_monotone_in_deliveries(sent, data):
    a = data.draw(st.integers(0, sent))
    b = data.draw(st.integers(a, sent))
    assert packet_delivery_ratio(_pdr_log(sent, a), [0]) <= packet_delivery_ratio(_pdr_log(sent, b), [0])
