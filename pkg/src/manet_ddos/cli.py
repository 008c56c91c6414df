"""Command line entry point: single-scenario seed batches and attacker sweeps.

    manet-ddos [SCENARIO] [--scheme S] [--seeds 1-10] [--out DIR]
               [--attackers 0,1,2,3,4,5] [--bucket-width W]

Without ``--attackers`` every seed of the scenario is run once and per-seed
bucket CSVs plus summaries are written. With it, each (attacker count,
scheme, seed) combination is run and one combined CSV row is written per run.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from statistics import mean

from .metrics import CSV_COLUMNS, summarize
from .network import PROPOSED, SCHEMES, SWAN, RunResult, simulate
from .scenario import DEFAULT_SCENARIO, ParseError, Scenario, ValidationError, load_scenario

log = logging.getLogger("manet_ddos")

SUMMARY_COLUMNS = ("scheme", "seed", "attackers", "legit_pdr", "legit_lost_packets",
                   "legit_dropped_mac", "legit_dropped_queue", "attacker_dropped_rejected",
                   "mean_legit_bandwidth_bps", "mean_all_bandwidth_bps", "sent", "delivered",
                   "dropped", "in_flight", "false_rejections", "first_detection_s")

SWEEP_COLUMNS = ("attackers",) + tuple(c for c in SUMMARY_COLUMNS if c != "attackers")


def run_one(scenario: Scenario, seed: int, **kwargs) -> RunResult:
    topology = scenario.topology(seed)
    flows = scenario.resolve_flows(topology, seed)
    return simulate(topology, flows, scenario.config(), seed, **kwargs)


def summary_row(scenario: Scenario, seed: int, result: RunResult) -> dict:
    s = summarize(result.metrics)
    attackers = result.metrics.attackers()
    false_rejections = sum(1 for f in s["detection_times"] if f not in attackers)
    detected = [t for f, t in s["detection_times"].items() if f in attackers]
    return {
        "scheme": scenario.scheme,
        "seed": seed,
        "attackers": len(attackers),
        "legit_pdr": s["legit_pdr"],
        "legit_lost_packets": s["legit_lost_packets"],
        "legit_dropped_mac": s["legit_dropped_mac"],
        "legit_dropped_queue": s["legit_dropped_queue"],
        "attacker_dropped_rejected": s["attacker_dropped_rejected"],
        "mean_legit_bandwidth_bps": s["mean_legit_bandwidth_bps"],
        "mean_all_bandwidth_bps": s["mean_all_bandwidth_bps"],
        "sent": s["sent"],
        "delivered": s["delivered"],
        "dropped": s["dropped"],
        "in_flight": s["in_flight"],
        "false_rejections": false_rejections,
        "first_detection_s": min(detected) if detected else "",
    }


def write_bucket_csv(path: Path, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in result.metrics.rows():
            w.writerow(row)


def format_summary(scenario: Scenario, seed: int, result: RunResult) -> str:
    s = summarize(result.metrics)
    lines = [
        f"scheme: {scenario.scheme}",
        f"seed: {seed}",
        f"flows: {len(s['flows'])}, attackers: {len(result.metrics.attackers())}",
        f"legit_pdr: {s['legit_pdr']:.4f}",
        f"legit_lost_packets: {s['legit_lost_packets']}",
        f"mean_legit_bandwidth_bps: {s['mean_legit_bandwidth_bps']:.1f}",
        f"mean_all_bandwidth_bps: {s['mean_all_bandwidth_bps']:.1f}",
        f"sent: {s['sent']}  delivered: {s['delivered']}  dropped: {s['dropped']}"
        f"  in_flight: {s['in_flight']}",
    ]
    if s["detection_times"]:
        for f, t in s["detection_times"].items():
            role = "attacker" if s["flows"][f]["attacker"] else "legitimate"
            lines.append(f"detection_time flow {f} ({role}): {t:.3f} s")
    else:
        lines.append("detection_time: none")
    lines.append("")
    lines.append("flow  attacker  src  dst  sent  delivered  mac  rejected  queue  in_flight")
    specs = {f.flow_id: f for f in result.flows}
    for f, p in s["flows"].items():
        spec = specs[f]
        lines.append(f"{f:4d}  {str(p['attacker']):8s}  {spec.source_id:3d}  "
                     f"{spec.destination_id:3d}  {p['sent']:4d}  {p['delivered']:9d}  "
                     f"{p['dropped_mac']:3d}  {p['dropped_rejected']:8d}  "
                     f"{p['dropped_queue']:5d}  {p['in_flight']:9d}")
    return "\n".join(lines) + "\n"


def _average(rows: list[dict]) -> dict:
    out = {}
    for key in ("legit_pdr", "legit_lost_packets", "mean_legit_bandwidth_bps",
                "mean_all_bandwidth_bps", "false_rejections"):
        values = [r[key] for r in rows if not (isinstance(r[key], float) and math.isnan(r[key]))]
        out[key] = mean(values) if values else float("nan")
    detected = [r["first_detection_s"] for r in rows if r["first_detection_s"] != ""]
    out["first_detection_s"] = mean(detected) if detected else None
    out["detected_runs"] = len(detected)
    return out


def _write_rows(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r[c] for c in columns})


def run_experiment(scenario: Scenario, seeds, out_dir) -> list[dict]:
    """Run every seed and write per-seed and seed-averaged outputs to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in seeds:
        result = run_one(scenario, seed)
        stem = f"{scenario.scheme}_seed{seed}"
        write_bucket_csv(out / f"{stem}.csv", result)
        (out / f"{stem}_summary.txt").write_text(format_summary(scenario, seed, result))
        rows.append(summary_row(scenario, seed, result))
        log.info("%s seed %d done", scenario.scheme, seed)
    _write_rows(out / f"{scenario.scheme}_summaries.csv", SUMMARY_COLUMNS, rows)
    avg = _average(rows)
    det = avg["first_detection_s"]
    text = [
        f"scheme: {scenario.scheme}",
        f"seeds: {', '.join(str(s) for s in seeds)}",
        f"mean legit_pdr: {avg['legit_pdr']:.4f}",
        f"mean legit_lost_packets: {avg['legit_lost_packets']:.1f}",
        f"mean legit bandwidth_bps: {avg['mean_legit_bandwidth_bps']:.1f}",
        f"mean all bandwidth_bps: {avg['mean_all_bandwidth_bps']:.1f}",
        f"mean false_rejections: {avg['false_rejections']:.2f}",
        f"attacker detected in {avg['detected_runs']} of {len(rows)} runs"
        + (f", mean first detection {det:.3f} s" if det is not None else ""),
    ]
    (out / f"{scenario.scheme}_summary.txt").write_text("\n".join(text) + "\n")
    return rows


def sweep_attackers(scenario: Scenario, attacker_counts, schemes, seeds,
                    out_dir=None) -> list[dict]:
    """One summary row per (attacker count, scheme, seed)."""
    counts = list(attacker_counts)
    if not counts or any(c < 0 for c in counts):
        raise ValueError("attacker counts must be a non-empty list of non-negative integers")
    rows = []
    for count in counts:
        for scheme in schemes:
            sc = scenario.with_(attack_flows=count, scheme=scheme)
            for seed in seeds:
                rows.append(summary_row(sc, seed, run_one(sc, seed)))
                log.info("attackers=%d %s seed %d done", count, scheme, seed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return rows


def parse_int_list(text: str) -> list[int]:
    """'1-3,7' -> [1, 2, 3, 7]"""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            values.extend(range(lo, hi + 1))
        else:
            values.append(int(part))
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _int_list(text: str) -> list[int]:
    try:
        return parse_int_list(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="manet-ddos",
        description="Flow-monitoring DDoS defense vs a SWAN-like baseline in a static ad hoc network.")
    p.add_argument("scenario", nargs="?", default=str(DEFAULT_SCENARIO),
                   help="scenario TOML file (default: the built-in 80-node scenario)")
    p.add_argument("--scheme", choices=SCHEMES,
                   help="override the scenario's scheme (sweeps default to proposed and swan)")
    p.add_argument("--seeds", type=_int_list, default=None,
                   help="seed list such as 1-10 or 1,4,9 (default: the scenario seed)")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--attackers", type=_int_list, default=None,
                   help="attacker counts to sweep, e.g. 0-5")
    p.add_argument("--bucket-width", type=float, default=None,
                   help="metrics bucket width in seconds")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ParseError, ValidationError) as exc:
        print(f"manet-ddos: {exc}", file=sys.stderr)
        return 1
    if args.bucket_width is not None:
        if not args.bucket_width > 0:
            print("manet-ddos: --bucket-width must be positive", file=sys.stderr)
            return 2
        scenario = scenario.with_(bucket_width_s=args.bucket_width)
    seeds = args.seeds or [scenario.seed]
    try:
        if args.attackers is not None:
            schemes = [args.scheme] if args.scheme else [PROPOSED, SWAN]
            rows = sweep_attackers(scenario, args.attackers, schemes, seeds, args.out)
            print(f"wrote {len(rows)} rows to {Path(args.out) / 'sweep.csv'}")
        else:
            if args.scheme:
                scenario = scenario.with_(scheme=args.scheme)
            rows = run_experiment(scenario, seeds, args.out)
            for r in rows:
                det = r["first_detection_s"]
                print(f"seed {r['seed']}: legit_pdr={r['legit_pdr']:.4f} "
                      f"lost={r['legit_lost_packets']} "
                      f"bandwidth={r['mean_legit_bandwidth_bps']:.0f} bps "
                      f"detection={det if det != '' else 'none'}")
    except (ValidationError, ValueError) as exc:
        print(f"manet-ddos: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"manet-ddos: cannot write results: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
