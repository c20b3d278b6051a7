"""Tree-structured two-phase consensus.

Validators form leaf groups of `branching` members. Leaf leaders filter
members by digest distance, push missing transactions, and send 76-byte
group summaries upward. Every aggregation node checks each child summary's
mean against the reference before merging — a forged whole-group summary is
caught at its parent instead of diluting into the global mean. Commits flow
up the same edges with associative signature aggregation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .digest import GRID, Digest, GroupSummary, merge_summaries
from .flat import FinalityRecord
from .signatures import QuorumCertificate, SignerBitmap, aggregate, sign
from .simnet import (
    Behavior,
    Metrics,
    RoundSetup,
    World,
    commit_action,
    prepare_round,
)


@dataclass(frozen=True)
class TreeTopology:
    n: int
    branching: int
    layer_sizes: Tuple[int, ...]  # aggregation nodes per layer, leaves first

    @property
    def levels(self) -> int:
        """Aggregation hops from leaf layer to root (2 at N=10, 5 at N=100K)."""
        return len(self.layer_sizes)

    @property
    def n_leaves(self) -> int:
        return self.layer_sizes[0]

    @property
    def non_root_nodes(self) -> int:
        return sum(self.layer_sizes) - 1

    def leaf_of(self, validator: int) -> int:
        return validator // self.branching

    def members(self, leaf: int) -> range:
        lo = leaf * self.branching
        return range(lo, min(lo + self.branching, self.n))


def build_topology(n: int, branching: int = 10) -> TreeTopology:
    if branching < 2:
        raise ValueError("branching must be >= 2")
    if n < 1:
        raise ValueError("need at least one validator")
    sizes = [math.ceil(n / branching)]
    while sizes[-1] > 1:
        sizes.append(math.ceil(sizes[-1] / branching))
    if len(sizes) == 1:
        sizes.append(1)  # a single leaf still reports to a distinct root
    return TreeTopology(n, branching, tuple(sizes))


@dataclass
class _Report:
    """A node's upward summary plus the member set it vouches for."""

    summary: GroupSummary
    members: np.ndarray  # validator indices


@dataclass
class TreeRoundResult:
    finalized: Optional[FinalityRecord]
    metrics: Metrics
    included: np.ndarray
    fast_path: bool
    rotations: int
    commits_valid: int
    conflicting: List[Tuple[bytes, int]]
    root_summary: Optional[GroupSummary]
    rejected_summaries: int
    setup: RoundSetup

    @property
    def success(self) -> bool:
        return self.finalized is not None


def _leaf_leader(world: World, members: range, round_index: int,
                 metrics: Metrics) -> Optional[int]:
    """Rotating leader; a silent (suppressing) leader costs the members one
    re-send wave each before the next candidate takes over."""
    size = len(members)
    for off in range(size):
        cand = members[(round_index + off) % size]
        if world.validators[cand].behavior is not Behavior.SUPPRESS_AGG:
            return cand
        metrics.send("phase1", "digest+bloom", count=size, level=0)
    return None


def run_tree_round(world: World, round_index: int,
                   topology: Optional[TreeTopology] = None,
                   tau: Optional[float] = None) -> TreeRoundResult:
    cfg = world.config
    tau = cfg.tau if tau is None else tau
    topo = topology or build_topology(cfg.n_validators, cfg.branching)
    n = cfg.n_validators
    setup = prepare_round(world, round_index)
    metrics = Metrics(cfg.byte_constants())
    ref = setup.ref_grid / GRID
    honest = np.array([not v.byzantine for v in world.validators])

    # proposer (root operator) rotation, as in the flat protocol
    aggregator = round_index % n
    rotations = 0
    while world.validators[aggregator].behavior is Behavior.SUPPRESS_AGG:
        metrics.send("phase1", "digest+bloom", count=n, level=0)
        rotations += 1
        aggregator = (aggregator + 1) % n

    # ---- upward wave 1: member digests to leaf leaders, filter, push, summarize
    metrics.send("phase1", "digest+bloom", count=n, level=0)
    post = setup.digests.copy()
    push_messages = 0
    reports: List[Optional[_Report]] = []
    for leaf in range(topo.n_leaves):
        members = topo.members(leaf)
        leader = _leaf_leader(world, members, round_index, metrics)
        if leader is None:
            reports.append(None)  # every member suppresses; group is silent
            continue
        if world.validators[leader].behavior is Behavior.FABRICATE:
            # forged summary: the leader vouches for the whole group with its
            # own fabricated digest and zero spread
            forged = GroupSummary(setup.claimed_digest(leader), len(members), 0.0)
            metrics.send("phase1", "summary", level=1)
            reports.append(_Report(forged, np.array([], dtype=np.int64)))
            continue
        sel = [m for m in members if setup.distances[m] <= tau]
        for m in sel:
            if setup.miss_count[m] == 0:
                continue
            detected = setup.detected_missing(m)
            if not detected:
                continue
            push_messages += 1
            metrics.send("phase1", "push", size=64 * len(detected), level=0)
            if honest[m]:
                k = int(setup.miss_count[m])
                hidden = [p for p in setup.miss_pos[m, :k] if int(p) not in detected]
                post[m] = ref - setup.tx_grids[hidden].sum(axis=0) / GRID if hidden else ref
        metrics.send("phase1", "summary", level=1)
        if not sel:
            reports.append(None)
            continue
        rows = post[sel]
        mean = rows.mean(axis=0)
        variance = float(np.square(rows - mean).sum(axis=1).mean())
        reports.append(_Report(
            GroupSummary(Digest(tuple(float(x) for x in mean)), len(sel), variance),
            np.array(sel, dtype=np.int64),
        ))

    # ---- upward waves 2..L: merge child summaries, rejecting per child
    rejected = 0
    for layer in range(1, topo.levels):
        width = topo.layer_sizes[layer]
        next_reports: List[Optional[_Report]] = []
        for node in range(width):
            children = reports[node * topo.branching:(node + 1) * topo.branching]
            accepted: List[_Report] = []
            for child in children:
                if child is None:
                    continue
                d = float(np.linalg.norm(child.summary.mean.as_array() - ref))
                if d <= tau:
                    accepted.append(child)
                else:
                    rejected += 1
            if layer < topo.levels - 1:
                metrics.send("phase1", "summary", level=layer + 1)
            if accepted:
                merged = merge_summaries([c.summary for c in accepted])
                members = np.concatenate([c.members for c in accepted]) \
                    if accepted else np.array([], dtype=np.int64)
                next_reports.append(_Report(merged, members))
            else:
                next_reports.append(None)
        reports = next_reports

    root_report = reports[0]
    root_summary = root_report.summary if root_report else None
    included = np.zeros(n, dtype=bool)
    if root_report is not None and root_report.members.size:
        included[root_report.members] = True
    inc = np.flatnonzero(included)
    metrics.excluded_honest += int((~included & honest).sum())
    metrics.excluded_byz += int((~included & ~honest).sum())

    fast = (
        inc.size >= cfg.quorum
        and bool(np.all(setup.distances[inc] == 0.0))
        and bool(np.all(included[honest]))
        and push_messages == 0
    )

    conflicting: List[Tuple[bytes, int]] = []
    commits_valid = 0
    record: Optional[FinalityRecord] = None
    if fast:
        metrics.fast_path = True
        _send_downward(metrics, topo, inc.size)
        record = FinalityRecord(setup.block.hash, tuple(int(i) for i in inc), None, True)
        commits_valid = int(inc.size)
    elif inc.size:
        record, conflicting, commits_valid = _commit_waves(
            world, setup, topo, inc, metrics)

    world.tip = setup.block.hash
    return TreeRoundResult(
        finalized=record,
        metrics=metrics,
        included=included,
        fast_path=fast,
        rotations=rotations,
        commits_valid=commits_valid,
        conflicting=conflicting,
        root_summary=root_summary,
        rejected_summaries=rejected,
        setup=setup,
    )


def _send_downward(metrics: Metrics, topo: TreeTopology, member_count: int) -> None:
    """Finality wave: one message per tree edge, then per included member."""
    for layer in range(topo.levels - 1, 0, -1):
        metrics.send("phase2", "signature+bitmap",
                     count=topo.layer_sizes[layer - 1], level=layer)
    metrics.send("phase2", "signature+bitmap", count=int(member_count), level=0)


def _commit_waves(world: World, setup: RoundSetup, topo: TreeTopology,
                  inc: np.ndarray, metrics: Metrics):
    """Commits up (members, then one aggregate per non-root node), certificate
    at the root, finality back down the edges."""
    cfg = world.config
    counting = cfg.counting_only

    claims: List[Tuple[int, bytes]] = []
    for i in inc:
        h = commit_action(world, setup, int(i))
        if h is None:
            continue
        metrics.send("phase2", "signature", level=0)
        claims.append((int(i), h))

    by_hash: Dict[bytes, List[int]] = {}
    signatures: Dict[int, bytes] = {}
    for i, h in claims:
        if not counting:
            sig = sign(world.validators[i].secret, h)
            if not world.registry.verify(i, h, sig):
                continue
            signatures[i] = sig
        by_hash.setdefault(h, []).append(i)

    # per-node aggregation wave: every non-root node forwards one partial
    # aggregate regardless of how many commits it collected
    for layer in range(1, topo.levels):
        metrics.send("phase2", "signature+bitmap",
                     count=topo.layer_sizes[layer - 1], level=layer)

    matching = by_hash.get(setup.block.hash, [])
    conflicting = [(h, len(v)) for h, v in by_hash.items()
                   if h != setup.block.hash and len(v) >= cfg.quorum]

    record = None
    if len(matching) >= cfg.quorum:
        cert = None
        if not counting:
            cert = _hierarchical_certificate(world, setup, topo, matching, signatures)
            assert world.registry.verify_aggregate(cert)
        record = FinalityRecord(setup.block.hash, tuple(matching), cert, False)
        _send_downward(metrics, topo, inc.size)
    return record, conflicting, len(matching)


def _hierarchical_certificate(world: World, setup: RoundSetup, topo: TreeTopology,
                              matching: Sequence[int],
                              signatures: Dict[int, bytes]) -> QuorumCertificate:
    """Aggregate leaf-by-leaf, then layer-by-layer; associativity makes the
    result byte-identical to one flat pass."""
    cfg = world.config
    partials: List[Optional[bytes]] = []
    match_set = set(matching)
    for leaf in range(topo.n_leaves):
        sigs = [signatures[m] for m in topo.members(leaf) if m in match_set]
        partials.append(aggregate(sigs) if sigs else None)
    for layer in range(1, topo.levels):
        nxt: List[Optional[bytes]] = []
        for node in range(topo.layer_sizes[layer]):
            parts = [p for p in partials[node * topo.branching:(node + 1) * topo.branching]
                     if p is not None]
            nxt.append(aggregate(parts) if parts else None)
        partials = nxt
    bitmap = SignerBitmap(cfg.n_validators)
    for i in matching:
        bitmap.set(i)
    assert partials[0] is not None
    return QuorumCertificate(
        block_hash=setup.block.hash,
        aggregate=partials[0],
        bitmap_bytes=bitmap.to_bytes(),
        n_validators=cfg.n_validators,
    )


@dataclass
class TreeRunStats:
    rounds: int
    successes: int
    fast_rounds: int
    metrics: Metrics
    rejected_summaries: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.rounds

    @property
    def fast_path_rate(self) -> float:
        return self.fast_rounds / self.rounds

    @property
    def mean_messages(self) -> float:
        return self.metrics.messages / self.rounds


def run_tree_many(world: World, rounds: int, tau: Optional[float] = None,
                  topology: Optional[TreeTopology] = None) -> TreeRunStats:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    topo = topology or build_topology(world.config.n_validators, world.config.branching)
    total = Metrics(world.config.byte_constants())
    successes = fast = rejected = 0
    for r in range(rounds):
        res = run_tree_round(world, r, topo, tau)
        successes += res.success
        fast += res.fast_path
        rejected += res.rejected_summaries
        total.merge(res.metrics)
    return TreeRunStats(rounds, successes, fast, total, rejected)


# ---------------------------------------------------------------- committees

@dataclass
class CommitteeComparison:
    """Per-trial outcomes of vote-based committees vs distance filtering over
    the same random group assignment."""

    group_size: int
    failed_groups: np.ndarray       # committees drawing > floor(G/3) Byzantine
    bft_participants: np.ndarray    # honest members of surviving committees
    distance_participants: np.ndarray  # honest validators — every group reports

    @property
    def mean_failed(self) -> float:
        return float(self.failed_groups.mean())

    @property
    def mean_bft_participants(self) -> float:
        return float(self.bft_participants.mean())


def committee_compare(n: int = 1000, byz_count: int = 300, group_size: int = 10,
                      trials: int = 100, seed: int = 0) -> CommitteeComparison:
    if n % group_size:
        raise ValueError("n must be divisible by group_size")
    if byz_count >= n:
        raise ValueError("byz_count must be < n")
    rng = np.random.default_rng(seed)
    n_groups = n // group_size
    thr = group_size // 3
    failed = np.zeros(trials, dtype=np.int64)
    bft = np.zeros(trials, dtype=np.int64)
    dist = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        groups = rng.permutation(n).reshape(n_groups, group_size)
        byz_per = (groups < byz_count).sum(axis=1)
        dead = byz_per > thr
        failed[t] = int(dead.sum())
        bft[t] = int(((group_size - byz_per)[~dead]).sum())
        dist[t] = n - byz_count  # every honest validator counts, every trial
    return CommitteeComparison(group_size, failed, bft, dist)
