"""Single-recipient envelope encryption: hybrid KEM + AES-256-GCM in one CBOR map.

Wire format (keys in this order)::

    {"v": 1, "alg": "X25519+ML-KEM-768+AES-256-GCM",
     "kem_ct": bstr,   ; encoded HybridCiphertext
     "nonce": bstr .size 12,
     "aad": bstr,
     "ct": bstr}       ; AES-GCM ciphertext || 16-byte tag

The AEAD key is the 32-byte KEM shared secret as is; the combiner already
bound the KEM ciphertext into it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from hybridseal import cbor
from hybridseal.errors import (
    AuthenticationError,
    HybridSealError,
    MalformedEncodingError,
    MalformedKeyError,
    UnsupportedAlgorithmError,
    UnsupportedVersionError,
)
from hybridseal.kem import HybridCiphertext, HybridKEM, HybridKeyPair, HybridPublicKey
from hybridseal.keyformat import CIPHERTEXT, decode_cbor, encode_cbor
from hybridseal.primitives import AEAD_NONCE_LEN, AEAD_TAG_LEN, aead_open, aead_seal

__all__ = ["Envelope", "seal", "open_envelope", "AEAD_SUFFIX"]

FORMAT_VERSION = 1
AEAD_SUFFIX = "+AES-256-GCM"
_FIELDS = ("v", "alg", "kem_ct", "nonce", "aad", "ct")


@dataclass(frozen=True)
class Envelope:
    v: int
    alg: str
    kem_ct: bytes
    nonce: bytes
    aad: bytes
    ct: bytes

    @property
    def kem_alg(self) -> str:
        return self.alg[: -len(AEAD_SUFFIX)] if self.alg.endswith(AEAD_SUFFIX) else self.alg

    def to_bytes(self) -> bytes:
        return cbor.dumps({k: getattr(self, k) for k in _FIELDS})

    @classmethod
    def from_bytes(cls, data: bytes) -> Envelope:
        m = cbor.loads(data)
        if not isinstance(m, dict):
            raise MalformedEncodingError("envelope must be a CBOR map")
        if "v" not in m:
            raise MalformedEncodingError("missing field 'v'")
        v = m["v"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise MalformedEncodingError(f"field 'v' must be a positive integer, got {v!r}")
        if v > FORMAT_VERSION:
            raise UnsupportedVersionError(v)
        if list(m) != list(_FIELDS):
            raise MalformedEncodingError(f"envelope fields must be exactly {list(_FIELDS)} in order")
        if not isinstance(m["alg"], str):
            raise MalformedEncodingError("field 'alg' must be text")
        for name in _FIELDS[2:]:
            if not isinstance(m[name], bytes):
                raise MalformedEncodingError(f"field {name!r} must be a byte string")
        if not m["alg"].endswith(AEAD_SUFFIX):
            raise UnsupportedAlgorithmError(m["alg"], ["X25519+ML-KEM-768" + AEAD_SUFFIX])
        if len(m["nonce"]) != AEAD_NONCE_LEN:
            raise MalformedEncodingError(f"nonce must be {AEAD_NONCE_LEN} bytes")
        if len(m["ct"]) < AEAD_TAG_LEN:
            raise MalformedEncodingError("AEAD ciphertext shorter than its tag")
        return cls(**m)


def seal(recipient: HybridPublicKey, plaintext: bytes, aad: bytes = b"") -> Envelope:
    if not isinstance(recipient, HybridPublicKey):
        raise MalformedKeyError(f"recipient must be a HybridPublicKey, got {type(recipient).__name__}")
    kem_ct, ss = HybridKEM(recipient.alg).encapsulate(recipient)
    nonce = os.urandom(AEAD_NONCE_LEN)
    ct = aead_seal(bytes(ss), nonce, aad, plaintext)
    return Envelope(FORMAT_VERSION, recipient.alg.name + AEAD_SUFFIX, encode_cbor(kem_ct),
                    nonce, bytes(aad), ct)


def open_envelope(kp: HybridKeyPair, env: Envelope | bytes, aad: bytes | None = None) -> bytes:
    """Decrypt ``env`` (an :class:`Envelope` or its encoding).

    ``aad`` overrides the associated data carried in the envelope, for callers
    that know what it must be.

    Any failure after the envelope parses, including a wrong recipient key,
    surfaces as :class:`AuthenticationError`.
    """
    if isinstance(env, (bytes, bytearray)):
        env = Envelope.from_bytes(env)
    if not isinstance(kp, HybridKeyPair):
        raise MalformedKeyError(f"expected HybridKeyPair, got {type(kp).__name__}")
    if env.kem_alg != kp.alg.name:
        raise MalformedKeyError(f"envelope is for {env.kem_alg}, key is {kp.alg.name}")
    try:
        kem_ct = decode_cbor(env.kem_ct, expect=CIPHERTEXT)
    except HybridSealError as exc:
        raise MalformedEncodingError(f"bad KEM ciphertext in envelope: {exc}") from None
    if not isinstance(kem_ct, HybridCiphertext):
        raise MalformedEncodingError("kem_ct does not hold a KEM ciphertext")
    ss = HybridKEM(kp.alg).decapsulate(kp, kem_ct)
    try:
        return aead_open(bytes(ss), env.nonce, env.aad if aad is None else bytes(aad), env.ct)
    except AuthenticationError:
        raise AuthenticationError("envelope authentication failed") from None

