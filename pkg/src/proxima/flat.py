"""Flat two-phase consensus: distance clustering around a reference digest,
one-message bloom push sync, an optimistic fast path, and an aggregated
commit round producing a quorum certificate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .digest import GRID, Digest
from .signatures import QuorumCertificate, SignerBitmap, aggregate, sign
from .simnet import (
    Behavior,
    Metrics,
    RoundSetup,
    World,
    commit_action,
    prepare_round,
)

FAST_PATH_EPS = 1e-9  # digest coordinates are grid-quantized, so true
                      # agreement gives exactly zero variance


@dataclass
class ClusterResult:
    reference: Digest
    included: np.ndarray        # (N,) bool
    pushed_tx_count: int
    push_messages: int
    variance: float
    fast_path: bool
    pre_push_distances: np.ndarray
    post_digests: np.ndarray    # (N, 8) views after push sync

    @property
    def excluded(self) -> np.ndarray:
        return ~self.included

    def included_indices(self) -> np.ndarray:
        return np.flatnonzero(self.included)


@dataclass(frozen=True)
class FinalityRecord:
    block_hash: bytes
    signers: Tuple[int, ...]
    certificate: Optional[QuorumCertificate]  # None on fast path / counting runs
    fast_path: bool


@dataclass
class RoundResult:
    finalized: Optional[FinalityRecord]
    cluster: ClusterResult
    metrics: Metrics
    aggregator: int
    rotations: int
    commits_valid: int
    conflicting: List[Tuple[bytes, int]]
    reputation_delta: np.ndarray
    setup: RoundSetup

    @property
    def success(self) -> bool:
        return self.finalized is not None


def run_phase1(world: World, setup: RoundSetup, metrics: Metrics,
               tau: float) -> ClusterResult:
    cfg = world.config
    n = cfg.n_validators
    metrics.send("phase1", "digest+bloom", count=n)

    included = setup.distances <= tau
    honest = np.array([not v.byzantine for v in world.validators])
    metrics.excluded_honest += int((~included & honest).sum())
    metrics.excluded_byz += int((~included & ~honest).sum())

    post = setup.digests.copy()
    pushed_txs = 0
    push_messages = 0
    ref = setup.ref_grid / GRID
    for i in np.flatnonzero(included & (setup.miss_count > 0)):
        detected = setup.detected_missing(int(i))
        if not detected:
            continue
        push_messages += 1
        pushed_txs += len(detected)
        metrics.send("phase1", "push", size=64 * len(detected))
        if honest[i]:
            # re-digest: only bloom-hidden txs can still be absent
            k = int(setup.miss_count[i])
            hidden = [p for p in setup.miss_pos[i, :k] if int(p) not in detected]
            post[i] = ref - setup.tx_grids[hidden].sum(axis=0) / GRID if hidden else ref

    inc = np.flatnonzero(included)
    mean = post[inc].mean(axis=0)
    variance = float(np.square(post[inc] - mean).sum(axis=1).mean())

    fast = (
        bool(np.all(setup.distances[inc] == 0.0))
        and bool(np.all(included[honest]))
        and inc.size >= cfg.quorum
        and push_messages == 0
    )
    return ClusterResult(
        reference=setup.reference,
        included=included,
        pushed_tx_count=pushed_txs,
        push_messages=push_messages,
        variance=variance,
        fast_path=fast,
        pre_push_distances=setup.distances.copy(),
        post_digests=post,
    )


def run_phase2(world: World, setup: RoundSetup, included_idx: np.ndarray,
               metrics: Metrics):
    """Commit round over an explicit included set.

    Returns (finality record or None, conflicting quorum hashes, valid commit
    count). The included set is a parameter so that safety tests can force
    Byzantine validators into the cluster.
    """
    cfg = world.config
    counting = cfg.counting_only
    claims: List[Tuple[int, bytes]] = []
    for i in included_idx:
        h = commit_action(world, setup, int(i))
        if h is None:
            continue
        metrics.send("phase2", "signature")
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

    matching = by_hash.get(setup.block.hash, [])
    conflicting = [(h, len(v)) for h, v in by_hash.items()
                   if h != setup.block.hash and len(v) >= cfg.quorum]

    record = None
    if len(matching) >= cfg.quorum:
        cert = None
        if not counting:
            bitmap = SignerBitmap(cfg.n_validators)
            for i in matching:
                bitmap.set(i)
            cert = QuorumCertificate(
                block_hash=setup.block.hash,
                aggregate=aggregate([signatures[i] for i in matching]),
                bitmap_bytes=bitmap.to_bytes(),
                n_validators=cfg.n_validators,
            )
            assert world.registry.verify_aggregate(cert)
        record = FinalityRecord(setup.block.hash, tuple(matching), cert, False)
        metrics.send("phase2", "signature+bitmap", count=int(len(included_idx)))
    return record, conflicting, len(matching)


def run_round(world: World, round_index: int, tau: Optional[float] = None) -> RoundResult:
    cfg = world.config
    tau = cfg.tau if tau is None else tau
    n = cfg.n_validators
    setup = prepare_round(world, round_index)
    metrics = Metrics(cfg.byte_constants())

    # aggregator rotation: a silent aggregator costs one wasted digest wave
    aggregator = round_index % n
    rotations = 0
    while world.validators[aggregator].behavior is Behavior.SUPPRESS_AGG:
        metrics.send("phase1", "digest+bloom", count=n)
        rotations += 1
        aggregator = (aggregator + 1) % n

    cluster = run_phase1(world, setup, metrics, tau)
    inc = cluster.included_indices()

    conflicting: List[Tuple[bytes, int]] = []
    commits_valid = 0
    if cluster.fast_path:
        metrics.fast_path = True
        metrics.send("phase1", "bitmap", count=int(inc.size))
        record = FinalityRecord(setup.block.hash, tuple(int(i) for i in inc), None, True)
        commits_valid = int(inc.size)
    else:
        metrics.send("phase1", "bitmap", count=int(inc.size))
        record, conflicting, commits_valid = run_phase2(world, setup, inc, metrics)

    world.tip = setup.block.hash
    return RoundResult(
        finalized=record,
        cluster=cluster,
        metrics=metrics,
        aggregator=aggregator,
        rotations=rotations,
        commits_valid=commits_valid,
        conflicting=conflicting,
        reputation_delta=cluster.pre_push_distances,
        setup=setup,
    )


class ReputationTable:
    """Running mean of each validator's distance from the reference."""

    def __init__(self, n: int):
        self.total = np.zeros(n)
        self.samples = np.zeros(n, dtype=np.int64)

    def update(self, distances: np.ndarray) -> None:
        self.total += distances
        self.samples += 1

    def means(self) -> np.ndarray:
        out = np.full(len(self.total), np.nan)
        seen = self.samples > 0
        out[seen] = self.total[seen] / self.samples[seen]
        return out


@dataclass
class RunStats:
    rounds: int
    successes: int
    fast_rounds: int
    metrics: Metrics
    reputation: ReputationTable
    rotations: int
    results: Optional[List[RoundResult]] = None

    @property
    def success_rate(self) -> float:
        return self.successes / self.rounds

    @property
    def fast_path_rate(self) -> float:
        return self.fast_rounds / self.rounds

    @property
    def mean_messages(self) -> float:
        return self.metrics.messages / self.rounds

    @property
    def mean_bytes(self) -> float:
        return self.metrics.bytes / self.rounds


def run_many(world: World, rounds: int, tau: Optional[float] = None,
             keep_results: bool = False) -> RunStats:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    cfg = world.config
    total = Metrics(cfg.byte_constants())
    reputation = ReputationTable(cfg.n_validators)
    successes = fast = rotations = 0
    kept: Optional[List[RoundResult]] = [] if keep_results else None
    for r in range(rounds):
        res = run_round(world, r, tau)
        successes += res.success
        fast += res.cluster.fast_path
        rotations += res.rotations
        reputation.update(res.reputation_delta)
        total.merge(res.metrics)
        if kept is not None:
            kept.append(res)
    return RunStats(rounds, successes, fast, total, reputation, rotations, kept)
