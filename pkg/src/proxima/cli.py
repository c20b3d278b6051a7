"""Experiment runner: regenerates every headline table as deterministic CSV.

Runs are pure functions of their parameters — two invocations with the same
seed produce byte-identical output. Wherever a row reproduces a pinned
number, the row carries the targeted value (reference_value) and the
tolerance applied to it.
"""
from __future__ import annotations

import argparse
import csv
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis, costs, crossshard, flat, simnet, tree

# knobs a config file may set; everything else is rejected
_CONFIG_KEYS = {
    "n", "byz", "pmiss", "seed", "seeds", "rounds", "branching", "tau",
    "samples", "kmax", "percentile", "margin", "trials", "rate", "shards",
    "cores",
}


def _parse_value(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def load_config(path: str) -> Dict[str, object]:
    out: Dict[str, object] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _parse_value(raw.strip())
    return out


def _resolve(args: argparse.Namespace, defaults: Dict[str, object]) -> Dict[str, object]:
    """Precedence: command-line flag > config file > command default."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            if key in merged:
                merged[key] = value
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(out: Optional[str], header: Sequence[str], rows: List[Dict[str, object]]) -> None:
    def write(fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row.get(col, "")) for col in header])

    if out:
        with open(out, "w", newline="") as fh:
            write(fh)
        print(f"wrote {len(rows)} rows to {out}")
    else:
        write(sys.stdout)


# ------------------------------------------------------------ subcommands

def cmd_calibrate(args) -> int:
    p = _resolve(args, dict(samples=2000, kmax=2, percentile=99.9, margin=1.2,
                            seed=0, seeds=20))
    if p["samples"] < 100:
        print(f"warning: {p['samples']} samples is a thin basis for a "
              f"{p['percentile']}th percentile", file=sys.stderr)
    header = ["seed", "samples", "k_max", "percentile", "margin",
              "percentile_value", "threshold", "reference_value", "tolerance"]
    rows = []
    values = []
    for i in range(int(p["seeds"])):
        r = analysis.calibrate(int(p["samples"]), int(p["kmax"]),
                               float(p["percentile"]), float(p["margin"]),
                               seed=int(p["seed"]) + i)
        values.append(r.threshold)
        rows.append({
            "seed": int(p["seed"]) + i, "samples": r.samples, "k_max": r.k_max,
            "percentile": r.percentile, "margin": r.margin,
            "percentile_value": r.percentile_value, "threshold": r.threshold,
            "reference_value": 4.9, "tolerance": "range 4.6..5.2",
        })
    arr = np.array(values)
    rows.append({"seed": "mean", "threshold": float(arr.mean()),
                 "reference_value": 4.9, "tolerance": "range 4.6..5.2"})
    spread = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    rows.append({"seed": "std", "threshold": spread})
    _write_csv(args.out, header, rows)
    return 0


_TABLE_REFS = {
    1000: {"tree": 2990, "flat": 3348, "hotstuff": 6518, "pbft": 2_000_000},
    10_000: {"tree": 30_042, "flat": 33_600, "hotstuff": 65_180, "pbft": 200_000_000},
    100_000: {"tree": 300_245, "flat": 335_803, "hotstuff": 651_800, "pbft": 20_000_000_000},
}

_FLAT_COMPOSITION = ("N digest+bloom sends + pushes + |included| assignments "
                     "+ |included| commits + |included| finality")
_TREE_COMPOSITION = ("N digest+bloom sends + pushes + non-root summaries "
                     "+ (member commits + non-root aggregates) "
                     "+ (non-root + member finality)")


def cmd_messages_table(args) -> int:
    p = _resolve(args, dict(seed=0, rounds=1, byz=0.3, pmiss=0.37, branching=10))
    header = ["n", "protocol", "messages", "bytes", "reference_value",
              "tolerance", "note"]
    rows = []
    for n in (1000, 10_000, 100_000):
        refs = _TABLE_REFS[n]
        cfg = simnet.SimConfig(
            n_validators=n, byz_fraction=float(p["byz"]), p_miss=float(p["pmiss"]),
            seed=int(p["seed"]), branching=int(p["branching"]),
            behaviors=(simnet.Behavior.FABRICATE,), counting_only=True,
        )
        rounds = int(p["rounds"])
        stats_flat = flat.run_many(simnet.spawn_world(cfg), rounds)
        stats_tree = tree.run_tree_many(simnet.spawn_world(cfg), rounds)
        rows.append({"n": n, "protocol": "tree",
                     "messages": stats_tree.mean_messages,
                     "bytes": stats_tree.metrics.bytes / rounds,
                     "reference_value": refs["tree"], "tolerance": "10%",
                     "note": _TREE_COMPOSITION})
        rows.append({"n": n, "protocol": "flat",
                     "messages": stats_flat.mean_messages,
                     "bytes": stats_flat.metrics.bytes / rounds,
                     "reference_value": refs["flat"], "tolerance": "10%",
                     "note": _FLAT_COMPOSITION})
        rows.append({"n": n, "protocol": "hotstuff",
                     "messages": costs.hotstuff_messages(n, float(p["byz"]), float(p["pmiss"])),
                     "reference_value": refs["hotstuff"], "tolerance": "exact",
                     "note": "6N + 2*p_miss*(1-byz)*N"})
        rows.append({"n": n, "protocol": "pbft",
                     "messages": costs.pbft_messages(n),
                     "reference_value": refs["pbft"], "tolerance": "exact",
                     "note": "2*N^2"})
    _write_csv(args.out, header, rows)
    return 0


def cmd_byzantine_sweep(args) -> int:
    p = _resolve(args, dict(n=100, rounds=200, pmiss=0.37, seed=0, tau=4.9))
    header = ["byz_fraction", "n", "rounds", "success_rate", "fast_path_rate",
              "mean_messages", "mean_bytes", "rotations",
              "reference_value", "tolerance"]
    rows = []
    for b in [round(0.05 * i, 2) for i in range(9)]:  # 0.00 .. 0.40
        cfg = simnet.SimConfig(n_validators=int(p["n"]), byz_fraction=b,
                               p_miss=float(p["pmiss"]), seed=int(p["seed"]),
                               tau=float(p["tau"]))
        stats = flat.run_many(simnet.spawn_world(cfg), int(p["rounds"]))
        ref = 1.0 if b <= 0.33 else 0.0
        rows.append({
            "byz_fraction": b, "n": int(p["n"]), "rounds": stats.rounds,
            "success_rate": stats.success_rate,
            "fast_path_rate": stats.fast_path_rate,
            "mean_messages": stats.mean_messages,
            "mean_bytes": stats.mean_bytes,
            "rotations": stats.rotations,
            "reference_value": ref, "tolerance": "exact",
        })
    _write_csv(args.out, header, rows)
    return 0


def cmd_committees(args) -> int:
    p = _resolve(args, dict(n=1000, byz=0.3, branching=10, trials=100, seed=0))
    byz_count = int(float(p["byz"]) * int(p["n"]) + 1e-9)
    comp = tree.committee_compare(int(p["n"]), byz_count, int(p["branching"]),
                                  int(p["trials"]), int(p["seed"]))
    header = ["kind", "trial", "group_size", "byz_fraction", "failed_groups",
              "bft_participants", "distance_participants", "value",
              "reference_value", "tolerance"]
    rows = []
    for t in range(len(comp.failed_groups)):
        rows.append({"kind": "trial", "trial": t, "group_size": comp.group_size,
                     "byz_fraction": float(p["byz"]),
                     "failed_groups": int(comp.failed_groups[t]),
                     "bft_participants": int(comp.bft_participants[t]),
                     "distance_participants": int(comp.distance_participants[t])})
    rows.append({"kind": "mean", "failed_groups": comp.mean_failed,
                 "bft_participants": comp.mean_bft_participants,
                 "distance_participants": float(comp.distance_participants.mean()),
                 "reference_value": "failed 35 / participants 700",
                 "tolerance": "failed 5 / participants exact"})
    for g, ref in ((10, 0.3504), (128, 0.21)):
        rows.append({"kind": "analytic_tail", "group_size": g,
                     "byz_fraction": 0.3,
                     "value": analysis.committee_failure_prob(g, 0.3),
                     "reference_value": ref,
                     "tolerance": "0.0001" if g == 10 else "0.01"})
    _write_csv(args.out, header, rows)
    return 0


def cmd_crossshard(args) -> int:
    p = _resolve(args, dict(n=1000, branching=10, rate=0.95, shards=100, seed=0))
    pair = crossshard.ShardPairScenario(int(p["n"]), 100, float(p["rate"]))
    header = ["scope", "model", "n_tx", "validators", "rate", "messages",
              "cross_shard", "bandwidth_bytes", "bandwidth_kb",
              "bytes_per_message", "reference_value", "tolerance", "note"]
    refs = {"twopc": (404_000, 4_000), "receipt": (101_000, 1_000),
            "digest": (5_052, 52)}
    rows = []
    for model, fn in (("twopc", crossshard.twopc_cost),
                      ("receipt", crossshard.receipt_cost),
                      ("digest", crossshard.digest_cost)):
        c = fn(pair)
        rows.append({"scope": "pair", "model": model, "n_tx": pair.n_cross_tx,
                     "validators": pair.validators_per_shard,
                     "rate": pair.propagation_rate,
                     "messages": c.messages, "cross_shard": c.cross_shard_messages,
                     "bandwidth_bytes": c.bandwidth_bytes,
                     "bandwidth_kb": c.bandwidth_kb,
                     "bytes_per_message": crossshard.PER_MESSAGE_BYTES[model],
                     "reference_value": f"{refs[model][0]} / {refs[model][1]}",
                     "tolerance": "exact messages, 20% bandwidth"})
    full = crossshard.digest_cost(crossshard.ShardPairScenario(int(p["n"]), 100, 1.0))
    rows.append({"scope": "pair", "model": "digest", "n_tx": pair.n_cross_tx,
                 "validators": 100, "rate": 1.0, "messages": full.messages,
                 "cross_shard": full.cross_shard_messages,
                 "reference_value": 2, "tolerance": "exact",
                 "note": "full propagation leaves only the digest exchange"})
    ring_refs = {"twopc": 4_040_000, "receipt": 1_010_000, "digest": 50_700}
    for model in ("twopc", "receipt", "digest"):
        c = crossshard.multi_shard_cost(int(p["shards"]), model,
                                        per_pair_tx=100,
                                        propagation_rate=float(p["rate"]))
        rows.append({"scope": "ring", "model": model, "n_tx": 100,
                     "validators": 100, "rate": float(p["rate"]),
                     "messages": c.messages,
                     "cross_shard": c.cross_shard_messages,
                     "bandwidth_bytes": c.bandwidth_bytes,
                     "reference_value": ring_refs[model], "tolerance": "exact",
                     "note": "100 ring pairs, 100 txs each"})
    shared = crossshard.multi_shard_cost(int(p["shards"]), "digest",
                                         per_pair_tx=100,
                                         propagation_rate=float(p["rate"]),
                                         shared_exchange=True)
    rows.append({"scope": "ring", "model": "digest", "n_tx": 100,
                 "validators": 100, "rate": float(p["rate"]),
                 "messages": shared.messages,
                 "cross_shard": shared.cross_shard_messages,
                 "reference_value": 50_502, "tolerance": "exact",
                 "note": "shared-exchange variant; the headline multi-shard "
                         "figure matches this reading, the per-pair reading "
                         "gives 50,700 — both emitted"})
    _write_csv(args.out, header, rows)
    return 0


def cmd_latency(args) -> int:
    p = _resolve(args, dict(n=100_000, byz=0.3, branching=10, seed=0))
    n = int(p["n"])
    header = ["kind", "protocol", "n", "cores", "levels", "bls_ms",
              "network_ms", "total_ms", "formula", "reference_value", "tolerance"]
    rows = []
    levels = tree.build_topology(n, int(p["branching"])).levels
    net_refs = {"hotstuff": 800, "flat": 600, "tree": 882}
    for proto in costs.PROTOCOLS:
        rows.append({"kind": "network", "protocol": proto, "n": n,
                     "levels": levels if proto == "tree" else "",
                     "network_ms": costs.network_latency(proto, levels),
                     "reference_value": net_refs[proto], "tolerance": "exact"})
    bls_refs = {("tree", 1): 9.9, ("flat", 1): 3960, ("hotstuff", 1): 17_595,
                ("hotstuff", 16): 940}
    for cores in (1, 16):
        for proto in costs.PROTOCOLS:
            proj = costs.finality_projection(proto, n, float(p["byz"]),
                                             int(p["branching"]), cores)
            ref = bls_refs.get((proto, cores), "")
            rows.append({"kind": "projection", "protocol": proto, "n": n,
                         "cores": cores,
                         "levels": levels if proto == "tree" else "",
                         "bls_ms": proj.bls_ms, "network_ms": proj.network_ms,
                         "total_ms": proj.total_ms, "formula": proj.formula,
                         "reference_value": ref,
                         "tolerance": "25% on bls_ms" if ref != "" else ""})
    _write_csv(args.out, header, rows)
    return 0


def cmd_fastpath(args) -> int:
    p = _resolve(args, dict(n=10, rounds=2000, seed=0, pmiss=None))
    points = [float(p["pmiss"])] if p["pmiss"] is not None else [0.05, 0.01]
    header = ["p_miss", "n", "rounds", "fast_path_rate", "predicted",
              "reference_value", "tolerance"]
    rows = []
    for pm in points:
        cfg = simnet.SimConfig(n_validators=int(p["n"]), byz_fraction=0.0,
                               p_miss=pm, seed=int(p["seed"]))
        stats = flat.run_many(simnet.spawn_world(cfg), int(p["rounds"]))
        predicted = analysis.fast_path_probability(pm, int(p["n"]))
        rows.append({"p_miss": pm, "n": int(p["n"]), "rounds": stats.rounds,
                     "fast_path_rate": stats.fast_path_rate,
                     "predicted": predicted, "reference_value": predicted,
                     "tolerance": "3 percentage points"})
    _write_csv(args.out, header, rows)
    return 0


def cmd_demo(args) -> int:
    p = _resolve(args, dict(n=10, byz=0.1, pmiss=0.37, seed=7, tau=4.9))
    cfg = simnet.SimConfig(n_validators=int(p["n"]), byz_fraction=float(p["byz"]),
                           p_miss=float(p["pmiss"]), seed=int(p["seed"]),
                           tau=float(p["tau"]),
                           behaviors=(simnet.Behavior.FABRICATE,))
    world = simnet.spawn_world(cfg)
    res = flat.run_round(world, 0)
    s = res.setup
    print(f"single round, N={cfg.n_validators}, byz={cfg.byz_fraction}, "
          f"p_miss={cfg.p_miss}, tau={cfg.tau}, seed={cfg.seed}")
    print(f"block {s.block.hash.hex()[:16]}… with {len(s.block.txs)} txs; "
          f"reference digest = full-set vector sum")
    print(f"aggregator: validator {res.aggregator}")
    print("\nround 1 — digests and clustering:")
    for v in world.validators:
        d = s.distances[v.index]
        role = v.behavior.value if v.behavior else "honest"
        missing = int(s.miss_count[v.index])
        state = "included" if res.cluster.included[v.index] else "EXCLUDED"
        extra = f", missing {missing} tx" if missing and v.behavior is None else ""
        print(f"  v{v.index:<2} {role:<22} distance {d:7.3f}  -> {state}{extra}")
    print(f"pushes sent: {res.cluster.push_messages} "
          f"({res.cluster.pushed_tx_count} txs); cluster variance after sync "
          f"{res.cluster.variance:.2e}")
    if res.cluster.fast_path:
        print("\nround 2 skipped — unanimous first round, fast-path finality")
    else:
        print(f"\nround 2 — commits: {res.commits_valid} valid "
              f"(quorum {cfg.quorum})")
    if res.finalized:
        kind = "fast-path" if res.finalized.fast_path else "quorum certificate"
        print(f"finalized via {kind}; signers: {len(res.finalized.signers)}")
        if res.finalized.certificate:
            print(f"  aggregate signature: "
                  f"{res.finalized.certificate.aggregate.hex()[:24]}…")
    else:
        print("not finalized")
    m = res.metrics
    print(f"\nmessages {m.messages}, bytes {m.bytes}")
    for phase, (msgs, byts) in sorted(m.by_phase().items()):
        print(f"  {phase}: {msgs} msgs, {byts} B")
    return 0


# ------------------------------------------------------------------ wiring

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n", type=int, help="validator count")
    sp.add_argument("--byz", type=float, help="Byzantine fraction")
    sp.add_argument("--pmiss", type=float, help="partial-observation probability")
    sp.add_argument("--seed", type=int, help="base RNG seed")
    sp.add_argument("--seeds", type=int, help="number of seeds")
    sp.add_argument("--rounds", type=int, help="rounds per configuration")
    sp.add_argument("--branching", type=int, help="tree branching / group size")
    sp.add_argument("--tau", type=float, help="distance threshold")
    sp.add_argument("--out", help="CSV output path (default stdout)")
    sp.add_argument("--config", help="key=value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxima",
        description="digest-based consensus experiments and cost models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("calibrate", help="distance threshold calibration")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--kmax", type=int)
    sp.add_argument("--percentile", type=float)
    sp.add_argument("--margin", type=float)
    _add_common(sp)
    sp.set_defaults(fn=cmd_calibrate)

    sp = sub.add_parser("messages-table", help="per-block message counts vs baselines")
    _add_common(sp)
    sp.set_defaults(fn=cmd_messages_table)

    sp = sub.add_parser("byzantine-sweep", help="success rate vs Byzantine fraction")
    _add_common(sp)
    sp.set_defaults(fn=cmd_byzantine_sweep)

    sp = sub.add_parser("committees", help="vote committees vs distance filtering")
    sp.add_argument("--trials", type=int)
    _add_common(sp)
    sp.set_defaults(fn=cmd_committees)

    sp = sub.add_parser("crossshard", help="cross-shard coordination cost models")
    sp.add_argument("--rate", type=float, help="pre-deadline propagation rate")
    sp.add_argument("--shards", type=int)
    _add_common(sp)
    sp.set_defaults(fn=cmd_crossshard)

    sp = sub.add_parser("latency", help="finality latency projections")
    sp.add_argument("--cores", type=int)
    _add_common(sp)
    sp.set_defaults(fn=cmd_latency)

    sp = sub.add_parser("fastpath", help="optimistic fast-path rate")
    _add_common(sp)
    sp.set_defaults(fn=cmd_fastpath)

    sp = sub.add_parser("demo", help="annotated single-round transcript")
    _add_common(sp)
    sp.set_defaults(fn=cmd_demo)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
