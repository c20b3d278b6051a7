"""Vector digest: hashing, additivity, summaries, wire format."""
import hashlib
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxima import digest


def test_tx_vector_frozen_golden():
    # recomputed longhand: SHA-512(b"tx-0"), eight big-endian u64 segments mod 10000
    raw = hashlib.sha512(b"tx-0").digest()
    longhand = [int.from_bytes(raw[8 * i:8 * i + 8], "big") % 10000 for i in range(8)]
    assert longhand == [251, 1982, 3921, 5905, 5580, 7045, 1784, 4038]
    assert digest.tx_vector(b"tx-0").tolist() == longhand


def test_tx_vector_range_and_dtype():
    v = digest.tx_vector(b"anything")
    assert v.shape == (8,)
    assert v.dtype == np.int64
    assert np.all((0 <= v) & (v < digest.GRID))


def test_digest_of_matches_manual_sum():
    txs = [b"tx-%d" % i for i in range(20)]
    acc = np.zeros(8, dtype=np.int64)
    for t in txs:
        acc += digest.tx_vector(t)
    d = digest.digest_of(txs)
    assert d.coords == tuple(acc / digest.GRID)


@given(st.lists(st.binary(min_size=1, max_size=64), min_size=1, max_size=30))
def test_digest_permutation_invariant(txs):
    d1 = digest.digest_of(txs)
    d2 = digest.digest_of(list(reversed(txs)))
    assert d1 == d2


@given(st.lists(st.binary(min_size=1, max_size=32), min_size=1, max_size=15),
       st.lists(st.binary(min_size=1, max_size=32), min_size=1, max_size=15))
def test_digest_additivity_exact(a, b):
    # set-sum additivity is exact because arithmetic runs on integer grid units
    whole = digest.digest_of(a + b)
    parts = digest.add(digest.digest_of(a), digest.digest_of(b))
    assert whole == parts


def test_subtract_recovers_missing_tx():
    txs = [b"m-%d" % i for i in range(10)]
    full = digest.digest_of(txs)
    partial = digest.digest_of(txs[:-1])
    gap = digest.subtract(full, partial)
    assert gap == digest.digest_of([txs[-1]])


def test_distance_zero_iff_equal():
    d = digest.digest_of([b"x"])
    assert digest.distance(d, d) == 0.0
    e = digest.add(d, digest.digest_of([b"y"]))
    assert digest.distance(d, e) > 0.0


def test_distance_euclidean():
    a = digest.Digest((0.0,) * 8)
    b = digest.Digest((3.0, 4.0) + (0.0,) * 6)
    assert digest.distance(a, b) == 5.0


def test_summarize_mean_and_count():
    ds = [digest.digest_of([b"s-%d" % i]) for i in range(7)]
    s = digest.summarize(ds)
    assert s.count == 7
    manual = np.mean([d.coords for d in ds], axis=0)
    assert np.allclose(s.mean.coords, manual, atol=1e-12)


def test_summarize_variance_of_pair():
    # two points at distance d have mean squared deviation d^2/4
    a = digest.digest_of([b"p"])
    b = digest.digest_of([b"q"])
    d = digest.distance(a, b)
    s = digest.summarize([a, b])
    assert math.isclose(s.variance, d * d / 4, rel_tol=1e-12)


def test_summarize_rejects_empty():
    with pytest.raises(ValueError):
        digest.summarize([])


def test_merge_summaries_matches_flat_summary():
    rng = np.random.default_rng(11)
    ds = [digest.digest_of([rng.bytes(16)]) for _ in range(50)]
    flat = digest.summarize(ds)
    # partition into uneven groups, summarize each, then merge
    cuts = [0, 7, 19, 23, 41, 50]
    parts = [digest.summarize(ds[a:b]) for a, b in zip(cuts, cuts[1:])]
    merged = digest.merge_summaries(parts)
    # pairwise fold gives the same result as the one-shot merge
    folded = parts[0]
    for p in parts[1:]:
        folded = digest.merge_summaries([folded, p])
    assert merged.count == flat.count == folded.count
    assert np.allclose(folded.mean.coords, merged.mean.coords, atol=1e-9)
    assert math.isclose(folded.variance, merged.variance, rel_tol=1e-9)
    assert np.allclose(merged.mean.coords, flat.mean.coords, atol=1e-9)
    assert math.isclose(merged.variance, flat.variance, rel_tol=1e-9)


@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_merge_summaries_associative_any_split(n, seed):
    rng = np.random.default_rng(seed)
    ds = [digest.digest_of([rng.bytes(8)]) for _ in range(n)]
    cut = rng.integers(1, n)
    left = digest.summarize(ds[:cut])
    right = digest.summarize(ds[cut:])
    merged = digest.merge_summaries([left, right])
    flat = digest.summarize(ds)
    assert np.allclose(merged.mean.coords, flat.mean.coords, atol=1e-9)
    assert math.isclose(merged.variance, flat.variance, rel_tol=1e-9, abs_tol=1e-12)


def test_weighted_mean_counts():
    a = digest.Digest((0.0,) * 8)
    b = digest.Digest((1.0,) * 8)
    m = digest.weighted_mean([(a, 1.0), (b, 3.0)])
    assert np.allclose(m.coords, (0.75,) * 8)


def test_digest_wire_roundtrip():
    d = digest.digest_of([b"wire"])
    raw = digest.encode_digest(d)
    assert len(raw) == digest.DIGEST_BYTES == 64
    assert digest.decode_digest(raw) == d


def test_digest_wire_big_endian_floats():
    d = digest.Digest((1.5,) + (0.0,) * 7)
    raw = digest.encode_digest(d)
    assert raw[:8] == struct.pack(">d", 1.5)


def test_summary_wire_roundtrip():
    ds = [digest.digest_of([b"w-%d" % i]) for i in range(5)]
    s = digest.summarize(ds)
    raw = digest.encode_summary(s)
    assert len(raw) == digest.SUMMARY_BYTES == 76
    back = digest.decode_summary(raw)
    assert back.count == 5
    assert np.allclose(back.mean.coords, s.mean.coords)
    assert math.isclose(back.variance, s.variance)


def test_decode_rejects_bad_input():
    with pytest.raises(ValueError):
        digest.decode_digest(b"\x00" * 63)
    with pytest.raises(ValueError):
        digest.decode_summary(b"\x00" * 75)
    nan_digest = struct.pack(">8d", *([float("nan")] * 8))
    with pytest.raises(ValueError):
        digest.decode_digest(nan_digest)


def test_summarize_rejects_nonpositive_weights():
    ds = [digest.digest_of([b"a"]), digest.digest_of([b"b"])]
    with pytest.raises(ValueError):
        digest.summarize(ds, weights=[1.0, 0.0])
