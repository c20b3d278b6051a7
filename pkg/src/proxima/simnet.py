"""Deterministic simulated validator network.

Worlds are seeded and pure: the same SimConfig yields identical metrics
byte-for-byte. Counting mode (counting_only=True) skips per-round signature
work but consumes exactly the same random streams, so message/byte totals
from cheap large-N runs match the fully cryptographic runs bit-for-bit.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import bloom
from .digest import GRID, Digest, tx_vector
from .signatures import SignerRegistry, keygen, quorum


class Behavior(Enum):
    FABRICATE = "fabricate_digest"          # invents a digest tied to no tx set
    REPLACE_ONE = "replace_one_tx"          # swaps one tx, later signs its own hash
    WITHHOLD = "withhold_signature"         # honest round 1, never commits
    WRONG_HASH = "sign_wrong_hash"          # honest round 1, commits to a fork
    SUPPRESS_AGG = "suppress_as_aggregator"  # silent whenever it holds a leader role


DEFAULT_BEHAVIORS: Tuple[Behavior, ...] = (
    Behavior.FABRICATE,
    Behavior.REPLACE_ONE,
    Behavior.WITHHOLD,
    Behavior.WRONG_HASH,
    Behavior.SUPPRESS_AGG,
)

# Accounting constants (payload bytes per message component). The bloom is
# counted at its 20-tx/1% sizing figure; the framed wire encoding is 27 B
# and both are reported where bandwidth matters.
PAYLOAD_BYTES: Dict[str, int] = {
    "digest": 64,
    "bloom": 25,
    "signature": 96,
    "summary": 76,
}
PUSH_BYTES_PER_TX = 64

_TAG_TXS, _TAG_OBS, _TAG_BYZ = 0, 1, 2
GENESIS = bytes(32)


@dataclass(frozen=True)
class SimConfig:
    n_validators: int
    byz_fraction: float = 0.0
    p_miss: float = 0.37
    txs_per_block: int = 20
    max_missing: int = 2
    seed: int = 0
    tau: float = 4.9
    branching: int = 10
    fabricate_spread: float = 14.0
    behaviors: Tuple[Behavior, ...] = DEFAULT_BEHAVIORS
    counting_only: bool = False
    delivery_delay: float = 1.0  # post-GST delivery bound, abstract units

    def __post_init__(self) -> None:
        if self.n_validators < 1:
            raise ValueError("need at least one validator")
        if not (0 <= self.byz_fraction < 1):
            raise ValueError("byz_fraction must be in [0, 1)")
        if not (0 <= self.p_miss <= 1):
            raise ValueError("p_miss must be in [0, 1]")
        if self.txs_per_block <= self.max_missing:
            raise ValueError("txs_per_block must exceed max_missing")
        if self.max_missing < 1:
            raise ValueError("max_missing must be >= 1")
        if self.branching < 2:
            raise ValueError("branching must be >= 2")
        if not self.behaviors:
            raise ValueError("behaviors must be non-empty")

    @property
    def n_byzantine(self) -> int:
        # floor, with an epsilon so 0.3 * 100 does not land on 29
        return int(math.floor(self.byz_fraction * self.n_validators + 1e-9))

    @property
    def quorum(self) -> int:
        return quorum(self.n_validators)

    @property
    def bitmap_bytes(self) -> int:
        return (self.n_validators + 7) // 8

    def byte_constants(self) -> Dict[str, int]:
        out = dict(PAYLOAD_BYTES)
        out["bitmap"] = self.bitmap_bytes
        return out


@dataclass
class Validator:
    index: int
    behavior: Optional[Behavior]  # None = honest
    secret: bytes
    public: bytes

    @property
    def byzantine(self) -> bool:
        return self.behavior is not None


@dataclass
class World:
    config: SimConfig
    validators: List[Validator]
    registry: SignerRegistry
    tip: bytes = GENESIS

    def state_hash(self) -> bytes:
        h = hashlib.sha256()
        h.update(struct.pack(">QQ", self.config.n_validators, self.config.seed))
        for v in self.validators:
            h.update(v.public)
            h.update(v.behavior.value.encode() if v.behavior else b"honest")
        return h.digest()


def spawn_world(config: SimConfig) -> World:
    n_byz = config.n_byzantine
    validators = []
    registry = SignerRegistry(config.n_validators)
    for i in range(config.n_validators):
        kp = keygen(i)
        behavior = config.behaviors[i % len(config.behaviors)] if i < n_byz else None
        validators.append(Validator(i, behavior, kp.secret, kp.public))
        registry.register(i, kp)
    return World(config, validators, registry)


# ---------------------------------------------------------------- blocks

@dataclass(frozen=True)
class Transaction:
    id: bytes
    payload: bytes


def make_transaction(payload: bytes) -> Transaction:
    return Transaction(bloom.tx_id(payload), payload)


def block_hash(height: int, parent_hash: bytes, tx_ids: Iterable[bytes]) -> bytes:
    h = hashlib.sha256()
    h.update(struct.pack(">Q", height))
    h.update(parent_hash)
    for i in tx_ids:
        h.update(i)
    return h.digest()


@dataclass(frozen=True)
class Block:
    height: int
    parent_hash: bytes
    txs: Tuple[Transaction, ...]
    hash: bytes


def make_block(height: int, parent_hash: bytes, payloads: Sequence[bytes]) -> Block:
    txs = tuple(make_transaction(p) for p in payloads)
    return Block(height, parent_hash, txs, block_hash(height, parent_hash, (t.id for t in txs)))


def _rng(seed: int, round_index: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, round_index, tag)))


# ---------------------------------------------------------------- rounds

@dataclass
class RoundSetup:
    """Everything one consensus round observes, fixed before any protocol runs.

    digests[i] is validator i's claimed digest (honest views follow the
    observation sampling; Byzantine claims follow the assigned behavior).
    """

    block: Block
    tx_grids: np.ndarray          # (T, 8) int64 per-tx grid vectors
    ref_grid: np.ndarray          # (8,) int64, full-set digest on the grid
    miss_count: np.ndarray        # (N,) int64
    miss_pos: np.ndarray          # (N, max_missing) int64, -1 padded
    digests: np.ndarray           # (N, 8) float64 claimed digests
    distances: np.ndarray         # (N,) float64 distance to reference
    wrong_hash: bytes
    replace_hash: Dict[int, bytes]      # REPLACE_ONE validator -> its fork hash
    replace_extra: Dict[int, np.ndarray]  # its injected tx's probe mask
    replace_fake_id: Dict[int, bytes]
    probe_masks: np.ndarray       # (T, words) uint64 bloom probe masks per tx
    m_bits: int
    k_hashes: int

    @property
    def reference(self) -> Digest:
        return Digest(tuple(self.ref_grid / GRID))

    def claimed_digest(self, index: int) -> Digest:
        return Digest(tuple(self.digests[index]))

    def view_mask(self, index: int) -> np.ndarray:
        """Union of bloom probe masks over the validator's claimed tx view."""
        k = int(self.miss_count[index])
        if k == 0:
            present = self.probe_masks
        else:
            sel = np.ones(len(self.tx_grids), dtype=bool)
            sel[self.miss_pos[index, :k]] = False
            present = self.probe_masks[sel]
        out = np.bitwise_or.reduce(present, axis=0)
        extra = self.replace_extra.get(index)
        if extra is not None:
            out = out | extra
        return out

    def detected_missing(self, index: int) -> List[int]:
        """Block positions the aggregator's bloom diff flags as absent.

        A true-missing tx stays hidden when every one of its probe bits is
        covered by the rest of the view (the per-lookup false-positive case).
        """
        k = int(self.miss_count[index])
        if k == 0:
            return []
        vm = self.view_mask(index)
        out = []
        for p in self.miss_pos[index, :k]:
            if np.any(self.probe_masks[p] & ~vm):
                out.append(int(p))
        return out

    def view_tx_ids(self, index: int) -> List[bytes]:
        k = int(self.miss_count[index])
        missing = set(int(p) for p in self.miss_pos[index, :k])
        ids = [t.id for j, t in enumerate(self.block.txs) if j not in missing]
        fake = self.replace_fake_id.get(index)
        if fake is not None:
            ids.append(fake)
        return ids


def _probe_mask_words(m_bits: int) -> int:
    return (m_bits + 63) // 64


def _probe_mask(ident: bytes, m_bits: int, k_hashes: int) -> np.ndarray:
    out = np.zeros(_probe_mask_words(m_bits), dtype=np.uint64)
    for ix in bloom.probe_indices(ident, m_bits, k_hashes):
        out[ix >> 6] |= np.uint64(1 << (ix & 63))
    return out


def prepare_round(world: World, round_index: int) -> RoundSetup:
    cfg = world.config
    n, t = cfg.n_validators, cfg.txs_per_block

    rng_tx = _rng(cfg.seed, round_index, _TAG_TXS)
    block = make_block(round_index, world.tip, [rng_tx.bytes(32) for _ in range(t)])
    tx_grids = np.stack([tx_vector(tx.payload) for tx in block.txs])
    ref_grid = tx_grids.sum(axis=0)

    # honest observation sampling: straggle w.p. p_miss, then drop a uniform
    # subset of size uniform{1..max_missing}
    rng_obs = _rng(cfg.seed, round_index, _TAG_OBS)
    strag = rng_obs.random(n) < cfg.p_miss
    ks = rng_obs.integers(1, cfg.max_missing + 1, size=n)
    order = np.argsort(rng_obs.random((n, t)), axis=1)[:, : cfg.max_missing]

    n_byz = cfg.n_byzantine
    honest = np.ones(n, dtype=bool)
    honest[:n_byz] = False
    hit = strag & honest

    miss_count = np.zeros(n, dtype=np.int64)
    miss_pos = np.full((n, cfg.max_missing), -1, dtype=np.int64)
    miss_count[hit] = ks[hit]
    for k in range(1, cfg.max_missing + 1):
        rows = hit & (ks == k)
        if rows.any():
            miss_pos[rows, :k] = order[rows, :k]

    digests = np.tile(ref_grid.astype(np.float64) / GRID, (n, 1))
    idx = np.flatnonzero(hit)
    if idx.size:
        pad = np.arange(cfg.max_missing)[None, :] < miss_count[idx][:, None]
        sums = (tx_grids[miss_pos[idx]] * pad[:, :, None]).sum(axis=1)
        digests[idx] -= sums / GRID

    m_bits, k_hashes = bloom.filter_params(t, 0.01)
    probe_masks = np.stack([_probe_mask(tx.id, m_bits, k_hashes) for tx in block.txs])

    # Byzantine first-round claims, drawn in index order from one stream
    rng_byz = _rng(cfg.seed, round_index, _TAG_BYZ)
    replace_hash: Dict[int, bytes] = {}
    replace_extra: Dict[int, np.ndarray] = {}
    replace_fake_id: Dict[int, bytes] = {}
    center = t / 2.0
    half = cfg.fabricate_spread / 2.0
    for v in world.validators[:n_byz]:
        if v.behavior is Behavior.FABRICATE:
            digests[v.index] = rng_byz.uniform(center - half, center + half, size=8)
        elif v.behavior is Behavior.REPLACE_ONE:
            pos = int(rng_byz.integers(t))
            fresh = rng_byz.bytes(32)
            digests[v.index] = (ref_grid - tx_grids[pos] + tx_vector(fresh)) / GRID
            miss_count[v.index] = 1
            miss_pos[v.index, 0] = pos
            fake_id = bloom.tx_id(fresh)
            ids = [tx.id for tx in block.txs]
            ids[pos] = fake_id
            replace_hash[v.index] = block_hash(round_index, world.tip, ids)
            replace_extra[v.index] = _probe_mask(fake_id, m_bits, k_hashes)
            replace_fake_id[v.index] = fake_id

    distances = np.linalg.norm(digests - ref_grid / GRID, axis=1)
    wrong_hash = hashlib.sha256(b"conflicting-branch:" + block.hash).digest()

    return RoundSetup(
        block=block,
        tx_grids=tx_grids,
        ref_grid=ref_grid,
        miss_count=miss_count,
        miss_pos=miss_pos,
        digests=digests,
        distances=distances,
        wrong_hash=wrong_hash,
        replace_hash=replace_hash,
        replace_extra=replace_extra,
        replace_fake_id=replace_fake_id,
        probe_masks=probe_masks,
        m_bits=m_bits,
        k_hashes=k_hashes,
    )


def byzantine_phase1_payload(world: World, setup: RoundSetup, index: int):
    """The (digest, bloom filter) pair a Byzantine validator actually sends."""
    v = world.validators[index]
    if not v.byzantine:
        raise ValueError("validator %d is honest" % index)
    f = bloom.build_filter(setup.view_tx_ids(index), 0.01)
    return setup.claimed_digest(index), f


def commit_action(world: World, setup: RoundSetup, index: int) -> Optional[bytes]:
    """The hash validator `index` signs in the commit round; None = silent."""
    b = world.validators[index].behavior
    if b is None:
        return setup.block.hash
    if b is Behavior.REPLACE_ONE:
        return setup.replace_hash[index]
    if b is Behavior.WRONG_HASH:
        return setup.wrong_hash
    # fabricators have no consistent block; withholders and suppressors stay silent
    return None


# ---------------------------------------------------------------- metrics

class Metrics:
    """Message and byte counters keyed by (phase, kind, tree level).

    Totals are derived from the single underlying counter map, so the
    conservation invariant (total = sum of any breakdown) holds by
    construction.
    """

    def __init__(self, byte_sizes: Optional[Dict[str, int]] = None):
        self.byte_sizes = dict(byte_sizes) if byte_sizes else dict(PAYLOAD_BYTES)
        self.counters: Dict[Tuple[str, str, int], List[int]] = {}
        self.fast_path = False
        self.excluded_honest = 0
        self.excluded_byz = 0

    def _size_of(self, kind: str) -> int:
        total = 0
        for part in kind.split("+"):
            if part not in self.byte_sizes:
                raise ValueError("unknown message kind: %r" % part)
            total += self.byte_sizes[part]
        return total

    def send(self, phase: str, kind: str, count: int = 1, level: int = 0,
             size: Optional[int] = None) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        if count == 0:
            return
        if size is None:
            size = self._size_of(kind)
        slot = self.counters.setdefault((phase, kind, level), [0, 0])
        slot[0] += count
        slot[1] += count * size

    @property
    def messages(self) -> int:
        return sum(c[0] for c in self.counters.values())

    @property
    def bytes(self) -> int:
        return sum(c[1] for c in self.counters.values())

    def by_phase(self) -> Dict[str, Tuple[int, int]]:
        out: Dict[str, List[int]] = {}
        for (phase, _, _), (m, b) in self.counters.items():
            slot = out.setdefault(phase, [0, 0])
            slot[0] += m
            slot[1] += b
        return {k: (v[0], v[1]) for k, v in out.items()}

    def by_level(self) -> Dict[int, Tuple[int, int]]:
        out: Dict[int, List[int]] = {}
        for (_, _, level), (m, b) in self.counters.items():
            slot = out.setdefault(level, [0, 0])
            slot[0] += m
            slot[1] += b
        return {k: (v[0], v[1]) for k, v in out.items()}

    def merge(self, other: "Metrics") -> None:
        for key, (m, b) in other.counters.items():
            slot = self.counters.setdefault(key, [0, 0])
            slot[0] += m
            slot[1] += b
        self.excluded_honest += other.excluded_honest
        self.excluded_byz += other.excluded_byz

    def as_dict(self) -> Dict[str, object]:
        return {
            "messages": self.messages,
            "bytes": self.bytes,
            "fast_path": self.fast_path,
            "excluded_honest": self.excluded_honest,
            "excluded_byz": self.excluded_byz,
            "by_phase": self.by_phase(),
            "by_level": self.by_level(),
        }


def metrics_rows(metrics: Metrics, protocol: str, config: SimConfig,
                 finalized: bool) -> List[Dict[str, object]]:
    """Flatten one round's metrics into CSV-ready per-(phase, level) rows."""
    grouped: Dict[Tuple[str, int], List[int]] = {}
    for (phase, _, level), (m, b) in sorted(metrics.counters.items()):
        slot = grouped.setdefault((phase, level), [0, 0])
        slot[0] += m
        slot[1] += b
    rows = []
    for (phase, level), (m, b) in sorted(grouped.items()):
        rows.append({
            "protocol": protocol,
            "n_validators": config.n_validators,
            "byz_fraction": config.byz_fraction,
            "p_miss": config.p_miss,
            "seed": config.seed,
            "phase": phase,
            "level": level,
            "messages": m,
            "bytes": b,
            "fast_path": metrics.fast_path,
            "finalized": finalized,
        })
    return rows
