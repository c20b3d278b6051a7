"""Bloom filter sizing, membership guarantees, wire format."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxima import bloom


def test_params_at_design_point():
    # n=20, p=0.01: m = ceil(20 * ln(100) / ln(2)^2) = 192 bits, k = 7
    m, k = bloom.filter_params(20, 0.01)
    assert (m, k) == (192, 7)


def test_payload_within_budget():
    ids = [bloom.tx_id(b"b-%d" % i) for i in range(20)]
    f = bloom.build_filter(ids, 0.01)
    assert f.payload_bytes == 24
    assert f.payload_bytes <= 25


def test_wire_format_27_bytes():
    ids = [bloom.tx_id(b"w-%d" % i) for i in range(20)]
    f = bloom.build_filter(ids, 0.01)
    raw = bloom.encode_filter(f)
    assert len(raw) == 2 + 1 + 24  # u16 m, u8 k, payload
    assert int.from_bytes(raw[0:2], "big") == 192
    assert raw[2] == 7
    back = bloom.decode_filter(raw)
    assert back.m_bits == f.m_bits and back.k_hashes == f.k_hashes
    assert back.bits == f.bits


def test_decode_rejects_garbage():
    with pytest.raises(ValueError):
        bloom.decode_filter(b"\x00")
    with pytest.raises(ValueError):
        bloom.decode_filter(b"\x00\xc0\x07" + b"\x00" * 10)  # wrong payload size


@given(st.lists(st.binary(min_size=4, max_size=32), min_size=0, max_size=40, unique=True))
def test_no_false_negatives(payloads):
    ids = [bloom.tx_id(p) for p in payloads]
    f = bloom.build_filter(ids, 0.01)
    for i in ids:
        assert f.contains(i)
    assert bloom.missing_from(f, ids) == []


def test_false_positive_rate_near_design():
    rng = np.random.default_rng(42)
    held = [rng.bytes(32) for _ in range(20)]
    f = bloom.build_filter(held, 0.01)
    lookups = 100_000
    fp = sum(f.contains(rng.bytes(32)) for _ in range(lookups))
    rate = fp / lookups
    # design rate 1%, tolerance half a point either way
    assert 0.005 <= rate <= 0.015, rate


def test_per_validator_miss_rate_bounded():
    # a validator missing k txs fails to flag at least one with prob <= k * fp
    rng = np.random.default_rng(7)
    for k in (1, 2, 5):
        misses = 0
        trials = 2000
        for _ in range(trials):
            universe = [rng.bytes(32) for _ in range(20)]
            f = bloom.build_filter(universe[:20 - k], 0.01)
            flagged = bloom.missing_from(f, universe)
            if set(flagged) != set(universe[20 - k:]):
                misses += 1
        assert misses / trials <= k * 0.01 + 0.005, (k, misses / trials)


def test_probe_indices_independent_segments():
    import hashlib
    ident = bloom.tx_id(b"probe")
    raw = hashlib.sha512(ident + b"\x00\x00").digest()
    longhand = [int.from_bytes(raw[8 * i:8 * i + 8], "big") % 192 for i in range(7)]
    assert bloom.probe_indices(ident, 192, 7) == longhand
    # a probe count past one hash block continues with the next counter
    raw2 = hashlib.sha512(ident + b"\x00\x01").digest()
    longhand += [int.from_bytes(raw[56:64], "big") % 192,
                 int.from_bytes(raw2[0:8], "big") % 192]
    assert bloom.probe_indices(ident, 192, 9) == longhand


def test_empty_filter_matches_nothing():
    f = bloom.build_filter([], 0.01)
    assert not f.contains(bloom.tx_id(b"anything"))
    assert bloom.missing_from(f, [bloom.tx_id(b"x")]) == [bloom.tx_id(b"x")]


def test_params_validation():
    with pytest.raises(ValueError):
        bloom.filter_params(0, 0.01)
    with pytest.raises(ValueError):
        bloom.filter_params(10, 0.0)
    with pytest.raises(ValueError):
        bloom.filter_params(10, 1.0)


@settings(max_examples=25)
@given(st.integers(1, 500), st.floats(0.001, 0.2))
def test_params_monotone_in_n(n, p):
    m1, _ = bloom.filter_params(n, p)
    m2, _ = bloom.filter_params(n + 1, p)
    assert m2 >= m1
