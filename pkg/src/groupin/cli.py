"""``groupin`` command-line interface.

Exit codes: 0 success, 2 usage or configuration error, 3 bad input,
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import simulator as sim
from .bench import DEFAULT_INTERVALS, DEFAULT_POPULATIONS, bench
from .config import ConfigError, build_run_config, load_toml
from .core import InputError, read_packets, write_packets
from .decentralized import MessageError
from .linkage import linkage_build, stats_build
from .metrics import DomainMismatch, score_records
from .pipeline import RunConfig, detect_all, run_stream
from .store import GroupStore, StoreError

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("groupin")

# run-config flags: (flag, dest, type, help)
RUN_FLAGS = (
    ("--sample-secs", "sample_secs", float, "sampling slot length in seconds (default 5)"),
    ("--interval-secs", "interval_secs", float, "detection interval length in seconds (default 120)"),
    ("--origin", "origin", float, "time grid origin (default: interval-aligned first packet)"),
    ("--rssi-min", "rssi_min", float, "RSSI mapped to 0 (default -100)"),
    ("--rssi-max", "rssi_max", float, "RSSI mapped to 1 (default -40)"),
    ("--global-ref-rssi", "global_ref_rssi", float, "reference RSSI that readings are shifted to (default -59)"),
    ("--zeta", "zeta", float, "MDD per-dimension bound (default 7)"),
    ("--upsilon", "upsilon", str, "comma-separated match score vector (default 5,2,1)"),
    ("--omega", "omega", float, "UPR normalizer (default 9)"),
    ("--min-edge-weight", "min_edge_weight", float, "drop graph edges lighter than this (default per scheme)"),
    ("--threshold", "threshold", float, "HCS connectivity scale in (0, 1.5] (default 0.5)"),
    ("--cluster-distance", "cluster_distance", float, "DenGraph neighbourhood radius (default 0.2)"),
    ("--lateness", "lateness", float, "streaming lateness allowance in seconds (default 2 slots)"),
)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with run settings; flags override it")
    p.add_argument("--agg", choices=("median", "mean"), help="slot aggregation (default median)")
    p.add_argument("--scheme", choices=("centralized", "decentralized", "centralized-wfm",
                                        "centralized-mdd"), help="matching scheme (default centralized)")
    p.add_argument("--matcher", choices=("wfm", "mdd"), help="centralized matcher (default wfm)")
    p.add_argument("--cluster", choices=("hcs", "maxclique", "dengraph"), help="clustering (default hcs)")
    for flag, dest, kind, text in RUN_FLAGS:
        p.add_argument(flag, dest=dest, type=kind, help=text)


def _run_config(args: argparse.Namespace):
    file_values = load_toml(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in ("agg", "scheme", "matcher", "cluster")}
    overrides.update({dest: getattr(args, dest) for _, dest, _, _ in RUN_FLAGS})
    return build_run_config(file_values, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupin", description="Detect people groups from RSSI traces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("simulate", help="generate a labelled packet trace")
    p.add_argument("--preset", required=True,
                   help="office-static, straight-walk, random-walk, two-group-distance(D), deployment-case(N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=600.0, help="seconds (default 600)")
    p.add_argument("--interval-secs", type=float, default=120.0, help="interval length of the truth file")
    p.add_argument("--detection-prob", type=float, default=0.3)
    p.add_argument("--sigma", type=float, default=4.0, help="shadowing standard deviation in dB")
    p.add_argument("--adv-interval", type=float, default=0.5, help="advertising interval in seconds")
    p.add_argument("--out", required=True, help="packet file (.jsonl or .csv)")
    p.add_argument("--truth", help="ground truth JSON Lines file")

    p = sub.add_parser("detect", help="detect groups and append records to a store")
    p.add_argument("--input", required=True, help="packet file (.jsonl or .csv)")
    p.add_argument("--out", required=True, help="store directory")
    p.add_argument("--stream", action="store_true", help="use the streaming path (same result on sorted input)")
    _add_run_flags(p)

    p = sub.add_parser("query", help="print stored records intersecting a time range")
    p.add_argument("--store", required=True)
    p.add_argument("--from", dest="t_from", type=float, default=float("-inf"))
    p.add_argument("--to", dest="t_to", type=float, default=float("inf"))
    p.add_argument("--out", help="write JSON Lines here instead of stdout")

    p = sub.add_parser("linkage", help="long-term linkage edge list")
    p.add_argument("--store", required=True)
    p.add_argument("--min-co-present", type=int, default=3)
    p.add_argument("--out", required=True, help="edge list CSV")
    p.add_argument("--dot", help="also write a Graphviz DOT file")

    p = sub.add_parser("stats", help="people and group counts per interval")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="per-interval CSV")
    p.add_argument("--hist-out", help="group size histogram CSV")

    p = sub.add_parser("score", help="score stored groups against ground truth")
    p.add_argument("--pred", required=True, help="store directory")
    p.add_argument("--truth", required=True, help="ground truth JSON Lines file")
    p.add_argument("--out", help="per-interval report CSV")

    p = sub.add_parser("bench", help="time detection on synthetic crowds")
    p.add_argument("--populations", default=",".join(map(str, DEFAULT_POPULATIONS)))
    p.add_argument("--interval-mins", default=",".join(f"{t / 60:g}" for t in DEFAULT_INTERVALS))
    p.add_argument("--sample-secs", type=float, default=30.0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="result CSV")
    return parser


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def cmd_simulate(args) -> int:
    try:
        name, param = sim.parse_preset(args.preset)
        sc = sim.preset(name, args.seed, param, args.duration)
        rm = sim.RadioModel(shadowing_sigma=args.sigma, detection_prob=args.detection_prob,
                            advertising_interval=args.adv_interval)
    except ValueError as exc:  # ScenarioError or a bad preset argument
        raise ConfigError(str(exc)) from exc
    n = write_packets(args.out, sim.simulate_packets(sc, rm))
    if args.truth:
        sim.write_truth(args.truth, sim.ground_truth(sc, args.interval_secs))
    log.info("wrote %d packets to %s", n, args.out)
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _run_config(args)
    stats: dict = {}
    packets = read_packets(args.input, stats)
    if not packets and stats.get("malformed"):
        raise InputError(f"{args.input}: no valid packets ({stats['malformed']} malformed lines)")
    store = GroupStore(args.out)
    if args.stream:
        records = run_stream(sorted(packets, key=lambda p: p.time), cfg, stats)
    else:
        records = detect_all(packets, cfg)
    count = 0
    for rec in records:
        store.append(rec)
        count += 1
    log.info("stored %d records (%d malformed lines, %d late packets)", count,
             stats.get("malformed", 0), stats.get("late", 0))
    return EXIT_OK


def cmd_query(args) -> int:
    records = GroupStore(args.store).query(args.t_from, args.t_to)
    lines = "".join(r.to_json() + "\n" for r in records)
    if args.out:
        Path(args.out).write_text(lines, encoding="utf-8")
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def _existing_store(path: str) -> GroupStore:
    if not Path(path).is_dir():
        raise InputError(f"store directory {path} does not exist")
    return GroupStore(path)


def cmd_linkage(args) -> int:
    if args.min_co_present < 1:
        raise ConfigError("--min-co-present must be >= 1")
    g = linkage_build(_existing_store(args.store), args.min_co_present)
    g.write_csv(args.out)
    if args.dot:
        g.write_dot(args.dot)
    return EXIT_OK


def cmd_stats(args) -> int:
    s = stats_build(_existing_store(args.store))
    s.write_csv(args.out)
    if args.hist_out:
        s.write_histogram_csv(args.hist_out)
    return EXIT_OK


def cmd_score(args) -> int:
    store = _existing_store(args.pred)
    try:
        truth = sim.read_truth(args.truth)
    except OSError as exc:
        raise InputError(f"cannot read truth file: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise InputError(f"malformed truth file: {exc}") from exc
    report = score_records(list(store), truth)
    if args.out:
        report.write_csv(args.out)
    print(json.dumps({"intervals": len(report.rows),
                      "pairwise_mean": report.mean("pairwise"), "pairwise_std": report.std("pairwise"),
                      "jaccard_mean": report.mean("jaccard"), "jaccard_std": report.std("jaccard")}))
    return EXIT_OK


def cmd_bench(args) -> int:
    pops = _int_list(args.populations)
    lengths = [60.0 * m for m in _float_list(args.interval_mins)]
    if any(n < 0 for n in pops) or not lengths or args.repeats < 1:
        raise ConfigError("populations must be >= 0, with at least one interval length and repeat")
    try:
        cfg = RunConfig(sample_seconds=args.sample_secs)
        result = bench(pops, lengths, cfg, args.repeats, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result.write_csv(args.out)
    for t in lengths:
        print(f"T={t / 60:g} min: fitted exponent {result.exponent(t):.2f}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "detect": cmd_detect, "query": cmd_query, "linkage": cmd_linkage,
            "stats": cmd_stats, "score": cmd_score, "bench": cmd_bench}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"groupin: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, MessageError, DomainMismatch, StoreError, FileNotFoundError) as exc:
        print(f"groupin: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort handler
        log.debug("internal error", exc_info=True)
        print(f"groupin: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
