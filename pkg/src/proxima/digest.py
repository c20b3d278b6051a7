"""Distance-preserving transaction digests.

A transaction is hashed with SHA-512 and the 64-byte output is split into
8 big-endian u64 segments; each segment is reduced mod 10000 and divided
by 10000, giving an 8-dimensional vector on a 1/10000 grid in [0, 1).
The digest of a transaction set is the coordinate-wise sum of its member
vectors, so digests of overlapping sets differ exactly by the vectors of
the transactions they disagree on, and Euclidean distance between digests
scales with the size of the disagreement.

Internally all set arithmetic runs on integer grid units so that sums are
exact and order-independent; the wire format is 8 big-endian float64.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

GRID = 10000
DIMENSIONS = 8
DIGEST_BYTES = 64   # 8 big-endian float64
SUMMARY_BYTES = 76  # 64-byte mean + 4-byte count + 8-byte variance

_U32_MAX = 0xFFFFFFFF


def tx_vector(payload: bytes) -> np.ndarray:
    """Grid vector of one transaction: 8 ints in [0, GRID)."""
    segments = struct.unpack(">8Q", hashlib.sha512(payload).digest())
    return np.array([s % GRID for s in segments], dtype=np.int64)


@dataclass(frozen=True)
class Digest:
    """An 8-coordinate digest. coords are floats (grid multiples for any
    digest produced by digest_of / add / subtract)."""

    coords: Tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) != DIMENSIONS:
            raise ValueError(f"digest needs {DIMENSIONS} coordinates, got {len(self.coords)}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)


def _from_grid(grid: np.ndarray) -> Digest:
    return Digest(tuple(float(g) / GRID for g in grid))


def _to_grid(d: Digest) -> np.ndarray:
    # snap to grid units; exact for digest_of-produced digests because the
    # division by GRID is correctly rounded and |grid| stays far below 2**53
    return np.rint(d.as_array() * GRID).astype(np.int64)


def digest_of(payloads: Iterable[bytes]) -> Digest:
    """Digest of a transaction set. Commutative: any iteration order gives
    bit-identical coordinates (integer accumulation)."""
    total = np.zeros(DIMENSIONS, dtype=np.int64)
    for p in payloads:
        total += tx_vector(p)
    return _from_grid(total)


def add(a: Digest, b: Digest) -> Digest:
    """Exact digest sum: digest_of(A | B) == add(digest_of(A), digest_of(B))
    for disjoint A, B."""
    return _from_grid(_to_grid(a) + _to_grid(b))


def subtract(a: Digest, b: Digest) -> Digest:
    """Exact digest difference (inverse of add)."""
    return _from_grid(_to_grid(a) - _to_grid(b))


def distance(a: Digest, b: Digest) -> float:
    """Euclidean distance between two digests."""
    return float(np.linalg.norm(a.as_array() - b.as_array()))


def weighted_mean(entries: Sequence[Tuple[Digest, float]]) -> Digest:
    """Weighted mean of digests. Weights must be positive."""
    if not entries:
        raise ValueError("weighted_mean of nothing")
    weights = np.array([w for _, w in entries], dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    stack = np.stack([d.as_array() for d, _ in entries])
    mean = (weights[:, None] * stack).sum(axis=0) / weights.sum()
    return Digest(tuple(float(x) for x in mean))


@dataclass(frozen=True)
class GroupSummary:
    """Fixed-size description of a group of digests: weighted mean, member
    count, and the weighted mean squared Euclidean distance from the mean."""

    mean: Digest
    count: int
    variance: float


def summarize(digests: Sequence[Digest], weights: Optional[Sequence[float]] = None) -> GroupSummary:
    if not digests:
        raise ValueError("cannot summarize an empty group")
    if weights is None:
        weights = [1.0] * len(digests)
    if len(weights) != len(digests):
        raise ValueError("weights/digests length mismatch")
    w = np.array(weights, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    stack = np.stack([d.as_array() for d in digests])
    wsum = w.sum()
    mean = (w[:, None] * stack).sum(axis=0) / wsum
    sq = np.square(stack - mean).sum(axis=1)
    variance = float((w * sq).sum() / wsum)
    return GroupSummary(Digest(tuple(float(x) for x in mean)), len(digests), variance)


def merge_summaries(summaries: Sequence[GroupSummary]) -> GroupSummary:
    """Merge group summaries as if their members were pooled.

    Counts act as weights; variance recombines by the law of total variance,
    so a hierarchical merge reproduces the flat summary of all members.
    """
    if not summaries:
        raise ValueError("cannot merge zero summaries")
    counts = np.array([s.count for s in summaries], dtype=np.float64)
    if np.any(counts <= 0):
        raise ValueError("summaries must have positive counts")
    means = np.stack([s.mean.as_array() for s in summaries])
    total = counts.sum()
    mean = (counts[:, None] * means).sum(axis=0) / total
    spread = np.square(means - mean).sum(axis=1)
    variance = float((counts * (np.array([s.variance for s in summaries]) + spread)).sum() / total)
    return GroupSummary(Digest(tuple(float(x) for x in mean)), int(total), variance)


def encode_digest(d: Digest) -> bytes:
    return struct.pack(">8d", *d.coords)


def decode_digest(raw: bytes) -> Digest:
    if len(raw) != DIGEST_BYTES:
        raise ValueError(f"digest wire size is {DIGEST_BYTES} bytes, got {len(raw)}")
    coords = struct.unpack(">8d", raw)
    if not all(math.isfinite(c) for c in coords):
        raise ValueError("digest coordinates must be finite")
    return Digest(coords)


def encode_summary(s: GroupSummary) -> bytes:
    if not (0 <= s.count <= _U32_MAX):
        raise ValueError("summary count does not fit in u32")
    return encode_digest(s.mean) + struct.pack(">I", s.count) + struct.pack(">d", s.variance)


def decode_summary(raw: bytes) -> GroupSummary:
    if len(raw) != SUMMARY_BYTES:
        raise ValueError(f"summary wire size is {SUMMARY_BYTES} bytes, got {len(raw)}")
    mean = decode_digest(raw[:DIGEST_BYTES])
    (count,) = struct.unpack(">I", raw[DIGEST_BYTES:DIGEST_BYTES + 4])
    (variance,) = struct.unpack(">d", raw[DIGEST_BYTES + 4:])
    if not math.isfinite(variance) or variance < 0:
        raise ValueError("summary variance must be finite and non-negative")
    return GroupSummary(mean, count, variance)
