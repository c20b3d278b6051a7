"""Threshold calibration and probability calculators for the digest scheme.

The distance between a complete digest and one missing k transactions is
the norm of the sum of the k missing vectors; with per-coordinate mean 1/2
and variance 1/12 that gives E[d^2] = 8*(k/12 + k^2/4) = 2k/3 + 2k^2.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .digest import GRID, Digest, digest_of, distance

DEFAULT_TAU = 4.9
DEFAULT_COLLISION_SCALE = 14.0


def expected_sq_distance(k: int) -> float:
    """Expected squared digest distance when k transactions differ one-sided."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return 2 * k / 3 + 2 * k * k


def distance_bound(k: int) -> float:
    """Upper bound on the mean distance at k missing (Jensen on the moment)."""
    return math.sqrt(expected_sq_distance(k))


def sample_missing_distances(samples: int, k_max: int, rng: np.random.Generator) -> np.ndarray:
    """Distances of views missing uniform{1..k_max} transactions.

    Vectors are sampled uniformly on the coordinate grid, which matches the
    hash-derived distribution.
    """
    ks = rng.integers(1, k_max + 1, size=samples)
    out = np.empty(samples, dtype=np.float64)
    for k in range(1, k_max + 1):
        mask = ks == k
        n = int(mask.sum())
        if n == 0:
            continue
        g = rng.integers(0, GRID, size=(n, k, 8))
        out[mask] = np.linalg.norm(g.sum(axis=1) / GRID, axis=1)
    return out


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    percentile_value: float
    samples: int
    k_max: int
    percentile: float
    margin: float


def calibrate(
    samples: int = 2000,
    k_max: int = 2,
    percentile: float = 99.9,
    margin: float = 1.2,
    seed: int = 0,
) -> CalibrationResult:
    """Distance threshold from honest-straggler sampling: a tail percentile
    of the missing-transaction distance distribution times a safety margin.

    The shipped default percentile (99.9) makes the recipe reproduce the
    protocol's operating threshold of about 4.9; at the 99th percentile the
    same recipe lands near 4.59, visibly below where the deployed threshold
    sits, so the tail point is exposed as a parameter.
    """
    if samples < 10:
        raise ValueError("too few samples to take a tail percentile")
    if not (0 < percentile < 100):
        raise ValueError("percentile must be in (0, 100)")
    if margin <= 0:
        raise ValueError("margin must be positive")
    rng = np.random.default_rng(seed)
    d = sample_missing_distances(samples, k_max, rng)
    p = float(np.percentile(d, percentile))
    return CalibrationResult(margin * p, p, samples, k_max, percentile, margin)


def monte_carlo_distance_moments(
    ks: Sequence[int], trials: int, seed: int = 0
) -> List[Tuple[int, float, float]]:
    """(k, mean distance, mean squared distance) per k over fresh trials."""
    rng = np.random.default_rng(seed)
    out = []
    for k in ks:
        g = rng.integers(0, GRID, size=(trials, k, 8))
        d = np.linalg.norm(g.sum(axis=1) / GRID, axis=1)
        out.append((k, float(d.mean()), float(np.square(d).mean())))
    return out


def liveness_failure_bound(n_validators: int, p_excluded: float = 0.005 * 0.37) -> float:
    """Hoeffding bound on the chance that honest inclusions fall below the
    two-thirds quorum when each honest validator is independently excluded
    with probability p_excluded (straggle rate times the conditional
    threshold-exceedance rate)."""
    if n_validators < 1:
        raise ValueError("need at least one validator")
    if not (0 <= p_excluded < 1 / 3):
        raise ValueError("bound needs p_excluded < 1/3")
    t = 1 / 3 - p_excluded
    return math.exp(-2 * n_validators * t * t)


def collision_probability(tau: float = DEFAULT_TAU, scale: float = DEFAULT_COLLISION_SCALE) -> float:
    """Chance a digest drawn uniformly from a cube of the given side lands
    within tau of a fixed reference: the volume ratio of an 8-ball to the
    cube, (pi^4/24) * (tau/scale)^8, clamped to 1."""
    if tau <= 0 or scale <= 0:
        raise ValueError("tau and scale must be positive")
    return min(1.0, (math.pi ** 4 / 24) * (tau / scale) ** 8)


def empirical_collision_rate(
    trials: int = 10_000,
    tau: float = DEFAULT_TAU,
    scale: float = DEFAULT_COLLISION_SCALE,
    txs_per_block: int = 20,
    seed: int = 0,
) -> float:
    """Measured rate at which fabricated digests (uniform over a cube of
    side `scale` centered on the expected full-block digest) land within
    tau of a real reference digest."""
    rng = np.random.default_rng(seed)
    ref = rng.integers(0, GRID, size=(trials, txs_per_block, 8)).sum(axis=1) / GRID
    center = txs_per_block / 2
    fab = rng.uniform(center - scale / 2, center + scale / 2, size=(trials, 8))
    return float((np.linalg.norm(fab - ref, axis=1) <= tau).mean())


def committee_failure_prob(group_size: int, byz_fraction: float) -> float:
    """Exact binomial tail: probability a committee of group_size validators
    draws strictly more than floor(group_size/3) Byzantine members."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    if not (0 <= byz_fraction <= 1):
        raise ValueError("byz_fraction must be in [0, 1]")
    thr = group_size // 3
    total = 0.0
    for i in range(thr + 1, group_size + 1):
        total += math.comb(group_size, i) * byz_fraction ** i * (1 - byz_fraction) ** (group_size - i)
    return total


def fast_path_probability(p_miss: float, honest: int) -> float:
    """Chance every honest validator sees the full block: (1 - p_miss)^H."""
    if not (0 <= p_miss <= 1):
        raise ValueError("p_miss must be in [0, 1]")
    if honest < 0:
        raise ValueError("honest count must be non-negative")
    return (1 - p_miss) ** honest


@dataclass(frozen=True)
class SearchResult:
    payloads: Optional[List[bytes]]
    trials: int

    @property
    def found(self) -> bool:
        return self.payloads is not None


def adversarial_search(
    target: Digest,
    tau: float,
    set_size: int,
    budget: int,
    seed: int = 0,
) -> SearchResult:
    """Random-sampling search for a transaction set whose digest lands
    within tau of the target.

    Candidates are sets of fresh random transactions of the given size.
    Candidate digests concentrate near the expected set digest, so against
    a target that is itself a same-size set digest the search succeeds in
    a handful of trials at the operating threshold 4.9; shrinking tau to
    the one-missing-transaction scale (~1.61) turns it into a genuine
    rare-event hunt with per-candidate hit rate near 1e-3.
    """
    if set_size < 1:
        raise ValueError("set_size must be positive")
    if budget < 0:
        raise ValueError("budget must be non-negative")
    rng = np.random.default_rng(seed)
    t = target.as_array()
    trials = 0
    batch = 512
    while trials < budget:
        n = min(batch, budget - trials)
        payloads = [rng.bytes(32) for _ in range(n * set_size)]
        grids = np.array(
            [_vector_cached(p) for p in payloads], dtype=np.int64
        ).reshape(n, set_size, 8)
        d = np.linalg.norm(grids.sum(axis=1) / GRID - t, axis=1)
        hits = np.flatnonzero(d <= tau)
        if hits.size:
            first = int(hits[0])
            trials += first + 1
            lo = first * set_size
            return SearchResult(payloads[lo:lo + set_size], trials)
        trials += n
    return SearchResult(None, trials)


def _vector_cached(payload: bytes) -> np.ndarray:
    # local import indirection kept trivial; hashing dominates anyway
    from .digest import tx_vector

    return tx_vector(payload)
