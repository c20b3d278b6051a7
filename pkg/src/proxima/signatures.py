"""Hash-based aggregate signature stand-in.

Keeps the sizes and algebra of BLS aggregation (96-byte signatures,
byte-wise XOR aggregation, signer bitmaps) without real pairing crypto,
which is enough for protocol simulation at scale. Verification runs
through an in-simulation registry that holds every signer's secret; no
protocol code path hands one validator another validator's secret.

XOR aggregation is exactly associative and commutative, so any merge
order over the same signer set produces byte-identical aggregates.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

SIGNATURE_BYTES = 96
_SECRET_LABEL = b"sig-secret-v1:"
_PUBLIC_LABEL = b"sig-public-v1:"


@dataclass(frozen=True)
class KeyPair:
    secret: bytes
    public: bytes


def keygen(index: int) -> KeyPair:
    """Deterministic keypair for a validator index."""
    secret = hashlib.sha256(_SECRET_LABEL + index.to_bytes(8, "big")).digest()
    public = hashlib.sha256(_PUBLIC_LABEL + secret).digest()
    return KeyPair(secret, public)


def sign(secret: bytes, message: bytes) -> bytes:
    """96-byte keyed hash stream over (secret, message)."""
    a = hashlib.sha512(secret + message + b"\x00").digest()
    b = hashlib.sha512(secret + message + b"\x01").digest()
    return a + b[:32]


def aggregate(signatures: Sequence[bytes]) -> bytes:
    """XOR-fold signatures into one 96-byte aggregate."""
    if not signatures:
        raise ValueError("cannot aggregate zero signatures")
    acc = np.zeros(SIGNATURE_BYTES, dtype=np.uint8)
    for s in signatures:
        if len(s) != SIGNATURE_BYTES:
            raise ValueError("signature must be 96 bytes")
        acc ^= np.frombuffer(s, dtype=np.uint8)
    return acc.tobytes()


def quorum(n_validators: int) -> int:
    """Strict two-thirds quorum: floor(2N/3) + 1."""
    if n_validators < 1:
        raise ValueError("need at least one validator")
    return 2 * n_validators // 3 + 1


class SignerBitmap:
    """LSB-first signer set: validator i lives at bit (i % 8) of byte (i // 8)."""

    def __init__(self, n_validators: int, raw: Optional[bytes] = None):
        self.n = n_validators
        size = (n_validators + 7) // 8
        if raw is None:
            self.buf = bytearray(size)
        else:
            if len(raw) != size:
                raise ValueError("bitmap size mismatch")
            self.buf = bytearray(raw)

    def set(self, i: int) -> None:
        if not (0 <= i < self.n):
            raise IndexError("validator index out of range")
        self.buf[i // 8] |= 1 << (i % 8)

    def get(self, i: int) -> bool:
        if not (0 <= i < self.n):
            raise IndexError("validator index out of range")
        return bool(self.buf[i // 8] >> (i % 8) & 1)

    def popcount(self) -> int:
        return sum(bin(b).count("1") for b in self.buf)

    def indices(self) -> List[int]:
        return [i for i in range(self.n) if self.get(i)]

    def to_bytes(self) -> bytes:
        return bytes(self.buf)

    def __or__(self, other: "SignerBitmap") -> "SignerBitmap":
        if self.n != other.n:
            raise ValueError("bitmap width mismatch")
        out = SignerBitmap(self.n)
        out.buf = bytearray(a | b for a, b in zip(self.buf, other.buf))
        return out


@dataclass(frozen=True)
class QuorumCertificate:
    block_hash: bytes
    aggregate: bytes
    bitmap_bytes: bytes
    n_validators: int

    def bitmap(self) -> SignerBitmap:
        return SignerBitmap(self.n_validators, self.bitmap_bytes)


class SignerRegistry:
    """Verification oracle for the simulation: holds each validator's
    registered keypair, indexed by validator, so signatures and aggregates
    can be re-derived and checked. No protocol code path reads another
    validator's secret through this."""

    def __init__(self, n_validators: int):
        if n_validators < 1:
            raise ValueError("need at least one validator")
        self.n = n_validators
        self._pairs: List[Optional[KeyPair]] = [None] * n_validators

    def register(self, index: int, kp: KeyPair) -> None:
        if not (0 <= index < self.n):
            raise IndexError("validator index out of range")
        self._pairs[index] = kp

    def public(self, index: int) -> bytes:
        kp = self._pairs[index]
        if kp is None:
            raise KeyError(f"validator {index} not registered")
        return kp.public

    def verify(self, index: int, message: bytes, signature: bytes) -> bool:
        if not (0 <= index < self.n):
            return False
        kp = self._pairs[index]
        return kp is not None and sign(kp.secret, message) == signature

    def verify_aggregate(self, cert: QuorumCertificate) -> bool:
        """True iff the aggregate equals the XOR of the flagged signers'
        streams over the certified hash AND the signer count meets quorum."""
        if cert.n_validators != self.n:
            return False
        signers = cert.bitmap().indices()
        if len(signers) < quorum(cert.n_validators):
            return False
        expected = np.zeros(SIGNATURE_BYTES, dtype=np.uint8)
        for i in signers:
            kp = self._pairs[i]
            if kp is None:
                return False
            expected ^= np.frombuffer(sign(kp.secret, cert.block_hash),
                                      dtype=np.uint8)
        return expected.tobytes() == cert.aggregate
