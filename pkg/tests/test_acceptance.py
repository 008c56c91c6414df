"""End-to-end acceptance checks.

Each criterion records one PASS/FAIL line that is printed in the pytest
terminal summary. Scheme comparisons reuse one cached batch of runs:
attacker counts 0..5, schemes proposed and swan, seeds 1..10.
"""

import random
import tempfile
import time
from collections import Counter
from fractions import Fraction
from pathlib import Path
from statistics import mean

import pytest

import conftest
from manet_ddos.cli import format_summary, write_bucket_csv
from manet_ddos.defense import (FlowMonitor, FmtEntry, allocate_rates, apply_congestion_bit,
                                initiate_query, measure_rate)
from manet_ddos.metrics import DROP_CATEGORIES, received_bandwidth_series, summarize
from manet_ddos.network import DATA, Network
from manet_ddos.scenario import DEFAULT_SCENARIO, load_scenario

SEEDS = range(1, 11)
COUNTS = range(0, 6)
SCHEMES = ("proposed", "swan")


def report(number, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


class Run:
    """What the checks need from one simulation, without keeping the network alive."""

    def __init__(self, scenario, seed):
        topology = scenario.topology(seed)
        flows = scenario.resolve_flows(topology, seed)
        net = Network(topology, flows, scenario.config(), seed)
        start = time.perf_counter()
        result = net.run()
        self.wall = time.perf_counter() - start
        self.scenario = scenario
        self.seed = seed
        self.result = result
        self.summary = summarize(result.metrics)
        held = Counter()
        for node in net.nodes:
            for pkt in node.data:
                held[pkt.flow_id] += 1
            if node.in_service is not None and node.in_service.kind == DATA:
                held[node.in_service.flow_id] += 1
        self.held = held
        self.csv = _csv_text(result)

    def legit_series(self):
        return [v for _, v in received_bandwidth_series(self.result.metrics)]


def _csv_text(result):
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "run.csv"
        write_bucket_csv(path, result)
        return path.read_bytes()


@pytest.fixture(scope="module")
def default():
    return load_scenario(DEFAULT_SCENARIO)


@pytest.fixture(scope="module")
def runs(default):
    out = {}
    for count in COUNTS:
        for scheme in SCHEMES:
            sc = default.with_(attack_flows=count, scheme=scheme)
            for seed in SEEDS:
                out[(count, scheme, seed)] = Run(sc, seed)
    return out


def test_criterion_1_default_scenario(default, runs):
    sc = default
    fields_ok = (sc.node_count == 80 and sc.area == (1200.0, 1200.0) and sc.radio_range == 250.0
                 and sc.link_capacity == 2_000_000.0 and sc.sim_time == 60.0
                 and sc.packet_size == 512 and sc.traffic == "CBR")
    slowest = max(r.wall for r in runs.values())
    report(1, fields_ok and slowest < 10.0,
           f"default file fields match={fields_ok}, slowest of {len(runs)} runs {slowest:.2f} s (< 10 s)")


def test_criterion_2_bandwidth_after_onset(default, runs):
    onset = int(default.attack_start_s / default.bucket_width_s)
    wins, recoveries = 0, []
    for seed in SEEDS:
        prop = runs[(1, "proposed", seed)]
        swan = runs[(1, "swan", seed)]
        p_after = mean(prop.legit_series()[onset:])
        s_after = mean(swan.legit_series()[onset:])
        wins += p_after >= s_after
        series = prop.legit_series()
        before = mean(series[1:onset])
        t_reject = min(prop.result.metrics.detection_times.values())
        b = int(t_reject / default.bucket_width_s)
        recoveries.append(mean(series[b:b + 5]) / before)
    worst = min(recoveries)
    report(2, wins >= 9 and worst >= 0.9,
           f"post-onset legit bandwidth proposed >= swan in {wins}/10 seeds (need 9); "
           f"worst 5 s post-rejection recovery {worst:.3f} of pre-attack (need 0.90)")


def test_criterion_3_lost_packets(runs):
    tallies = {}
    for count in range(1, 6):
        tallies[count] = sum(
            runs[(count, "proposed", s)].summary["legit_lost_packets"]
            < runs[(count, "swan", s)].summary["legit_lost_packets"] for s in SEEDS)
    ok = all(v >= 9 for v in tallies.values())
    detail = ", ".join(f"{c} att: {v}/10" for c, v in tallies.items())
    report(3, ok, f"lost legit packets proposed < swan ({detail}; need 9 each)")


def test_criterion_4_delivery_ratio(runs):
    pdr = {(c, s): mean(runs[(c, s, seed)].summary["legit_pdr"] for seed in SEEDS)
           for c in COUNTS for s in SCHEMES}
    better = all(pdr[(c, "proposed")] > pdr[(c, "swan")] for c in range(1, 6))
    gap0 = abs(pdr[(0, "proposed")] - pdr[(0, "swan")])
    detail = ", ".join(f"{c}: {pdr[(c, 'proposed')]:.3f} vs {pdr[(c, 'swan')]:.3f}" for c in COUNTS)
    report(4, better and gap0 <= 0.02,
           f"seed-averaged legit PDR proposed vs swan by attacker count ({detail}); "
           f"|gap| at 0 attackers {gap0:.4f} (need <= 0.02)")


def test_criterion_5_detection_completeness(runs):
    delays, missing, printed = [], 0, 0
    for seed in SEEDS:
        run = runs[(1, "proposed", seed)]
        result = run.result
        T = result.config.interval
        attacker = result.metrics.attackers()[0]
        t_reject = result.metrics.detection_times.get(attacker)
        excess = [r["time"] for r in result.fmt_log
                  if r["flow"] == attacker and r["verdict"] == "attack"]
        if t_reject is None or not excess:
            missing += 1
            continue
        delays.append(t_reject - (min(excess) - T))
        text = format_summary(run.scenario, seed, result)
        printed += f"detection_time flow {attacker} (attacker): {t_reject:.3f} s" in text
    worst = max(delays) if delays else float("inf")
    report(5, missing == 0 and worst <= 2.0 + 1e-9 and printed == len(SEEDS),
           f"attacker rejected in {10 - missing}/10 seeds, worst delay after first "
           f"MR > ACR interval began {worst:.3f} s (need <= 2 s), shown in summary {printed}/10")


def test_criterion_6_detection_soundness(runs):
    false = [(seed, r["flow"]) for seed in SEEDS
             for r in runs[(1, "proposed", seed)].result.rejection_log if not r["attacker"]]
    report(6, not false, f"legitimate flows rejected across 10 default seeds: {len(false)} {false}")


def _oracle_allocate(capacity, assigned):
    total = sum(Fraction(a) for a in assigned)
    w = Fraction(1) if total == 0 else min(Fraction(1), Fraction(capacity) / total)
    return [w * Fraction(a) for a in assigned]


def _close(a, b):
    b = float(b)
    return a == b or abs(a - b) <= 1e-12 * max(abs(a), abs(b))


def test_criterion_7_rate_equations():
    rng = random.Random(20240601)
    bad = 0
    for _ in range(1000):
        capacity = rng.uniform(1e5, 1e7)
        assigned = [rng.uniform(0, 3e6) for _ in range(rng.randint(1, 8))]
        delta = rng.uniform(0, 1e5)
        bits = rng.randint(0, 10**7)
        T = rng.uniform(0.1, 5.0)
        got = allocate_rates(capacity, dict(enumerate(assigned)))
        want = _oracle_allocate(capacity, assigned)
        ok = all(_close(got[i], want[i]) for i in range(len(assigned)))
        acr = float(want[0])
        ok &= _close(apply_congestion_bit(acr, delta), max(Fraction(0), Fraction(acr) - Fraction(delta)))
        entry = FmtEntry(0, 0, 1, traffic_counter=bits)
        ok &= _close(measure_rate(entry, T), Fraction(bits) / Fraction(T))
        bad += not ok
    report(7, bad == 0, f"1000 random (L_c, AR, delta, C, T) tuples, {bad} mismatches at rel 1e-12")


def test_criterion_8_bottleneck_bandwidth():
    rng = random.Random(77)
    capacity = 2_000_000.0
    bad = 0
    for trial in range(500):
        n = rng.randint(2, 6)
        requested = rng.uniform(1e3, 1.5e6)
        monitors, abw = [], []
        for i in range(n):
            m = FlowMonitor(i, capacity)
            load = rng.choice([0.0, rng.uniform(0, capacity)])
            if load > 0:
                m.process_reply(initiate_query(0, 1, -1, load).to_reply(), None, None)
            monitors.append(m)
            abw.append(m.available_bandwidth)
        reply = initiate_query(0, n - 1, trial, requested).to_reply()
        # the reply walks back from the destination; every node but the destination reserves
        for i in range(n - 2, -1, -1):
            reply = monitors[i].process_reply(reply, i - 1 if i else None, i + 1)
        walk = requested
        for i in range(n - 1):
            walk = walk if walk <= abw[i] else abw[i]
        bad += reply.bnbw != min(requested, min(abw[:-1])) or reply.bnbw != walk
    report(8, bad == 0, f"500 random 2-6 node paths, {bad} BnBW mismatches (exact)")


def test_criterion_9_conservation_and_determinism(default, runs):
    broken = 0
    for run in runs.values():
        for fid, p in run.summary["flows"].items():
            drops = sum(p[c] for c in DROP_CATEGORIES)
            if p["sent"] != p["delivered"] + drops + run.held[fid] or p["in_flight"] != run.held[fid]:
                broken += 1
    again = [Run(default.with_(attack_flows=c, scheme=s), 1).csv == runs[(c, s, 1)].csv
             for c in (0, 1, 5) for s in SCHEMES]
    report(9, broken == 0 and all(again),
           f"conservation violations over {len(runs)} runs: {broken}; "
           f"repeated runs byte-identical {sum(again)}/{len(again)}")
