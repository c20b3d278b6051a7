"""Cross-shard consistency: digest-based shard-pair verification and the
analytical coordination-cost models it is compared against.

Per-message byte constants are models, documented and emitted with results:
a 2PC coordination message is counted at 96 B, a receipt at 128 B, and a
digest-path message at 200 B (the digest exchange itself is 64 B per side;
conflict-resolution messages carry a transaction plus proof material and
dominate the average).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Set, Tuple

from . import bloom
from .digest import digest_of, distance

PER_MESSAGE_BYTES = {"twopc": 96, "receipt": 128, "digest": 200}


@dataclass(frozen=True)
class ShardPairScenario:
    n_cross_tx: int = 1000
    validators_per_shard: int = 100
    propagation_rate: float = 0.95
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_cross_tx < 0:
            raise ValueError("n_cross_tx must be non-negative")
        if self.validators_per_shard < 1:
            raise ValueError("validators_per_shard must be >= 1")
        if not (0 <= self.propagation_rate <= 1):
            raise ValueError("propagation_rate must be in [0, 1]")


@dataclass(frozen=True)
class CoordinationCost:
    messages: int
    bandwidth_bytes: int
    cross_shard_messages: int

    @property
    def bandwidth_kb(self) -> float:
        return self.bandwidth_bytes / 1024


def twopc_cost(s: ShardPairScenario) -> CoordinationCost:
    """Prepare/commit with both shards voting: per tx, 4 coordinator hops and
    two 2N intra-shard waves."""
    n, v = s.n_cross_tx, s.validators_per_shard
    msgs = n * (4 + 4 * v)
    return CoordinationCost(msgs, msgs * PER_MESSAGE_BYTES["twopc"], 4 * n)


def receipt_cost(s: ShardPairScenario) -> CoordinationCost:
    """Asynchronous receipts: one receipt crosses per tx, one intra-shard
    inclusion wave applies it."""
    n, v = s.n_cross_tx, s.validators_per_shard
    msgs = n * (1 + v)
    return CoordinationCost(msgs, msgs * PER_MESSAGE_BYTES["receipt"], n)


def conflict_count(s: ShardPairScenario) -> int:
    return round((1 - s.propagation_rate) * s.n_cross_tx)


def digest_cost(s: ShardPairScenario) -> CoordinationCost:
    """One digest exchange per pair; only transactions that failed to
    propagate before the deadline are resolved individually, each costing a
    receipt-like (1 + N) wave."""
    conflicts = conflict_count(s)
    msgs = 2 + conflicts * (1 + s.validators_per_shard)
    return CoordinationCost(msgs, msgs * PER_MESSAGE_BYTES["digest"], 2 + conflicts)


def multi_shard_cost(shards: int, model: str, per_pair_tx: int = 100,
                     validators_per_shard: int = 100,
                     propagation_rate: float = 0.95,
                     shared_exchange: bool = False) -> CoordinationCost:
    """Ring of `shards` shard pairs, per-pair model cost summed.

    For the digest model, shared_exchange=True replaces the per-pair digest
    exchange with one global exchange (2 messages total); the two variants
    bracket the headline multi-shard figure, which matches the shared
    reading (100 pairs with 5 conflicts each: 50,700 per-pair vs 50,502
    shared).
    """
    if shards < 2:
        raise ValueError("need at least 2 shards")
    if model not in PER_MESSAGE_BYTES:
        raise ValueError(f"unknown model {model!r}")
    if shared_exchange and model != "digest":
        raise ValueError("shared_exchange only applies to the digest model")
    per = ShardPairScenario(per_pair_tx, validators_per_shard, propagation_rate)
    if model == "twopc":
        one = twopc_cost(per)
    elif model == "receipt":
        one = receipt_cost(per)
    else:
        one = digest_cost(per)
        if shared_exchange:
            conflicts = conflict_count(per)
            msgs = 2 + shards * conflicts * (1 + validators_per_shard)
            return CoordinationCost(
                msgs, msgs * PER_MESSAGE_BYTES["digest"], 2 + shards * conflicts)
    return CoordinationCost(one.messages * shards,
                            one.bandwidth_bytes * shards,
                            one.cross_shard_messages * shards)


# ------------------------------------------------------------- simulation

@dataclass(frozen=True)
class PairCheckResult:
    divergent: Set[bytes]       # identified tx ids (absent from one side's bloom)
    distance: float
    cost: CoordinationCost

    @property
    def consistent(self) -> bool:
        return self.distance == 0.0


def simulate_pair(shard_a_txs: Sequence[bytes],
                  shard_b_txs: Sequence[bytes]) -> PairCheckResult:
    """Digest check between two shards' views of the same cross-shard tx set.

    Both sides exchange 64-byte digests; on a mismatch they exchange bloom
    filters and flag, in each direction, the transactions the other side's
    filter does not contain. False positives can hide a divergent tx; no
    transaction present on both sides is ever flagged.
    """
    da, db = digest_of(shard_a_txs), digest_of(shard_b_txs)
    d = distance(da, db)
    if d == 0.0:
        return PairCheckResult(set(), 0.0, CoordinationCost(2, 128, 2))

    ids_a = [bloom.tx_id(p) for p in shard_a_txs]
    ids_b = [bloom.tx_id(p) for p in shard_b_txs]
    fa = bloom.build_filter(ids_a, 0.01)
    fb = bloom.build_filter(ids_b, 0.01)
    divergent = set(bloom.missing_from(fb, ids_a)) | set(bloom.missing_from(fa, ids_b))
    cost = CoordinationCost(4, 128 + 2 * 25, 4)
    return PairCheckResult(divergent, d, cost)
