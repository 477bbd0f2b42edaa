"""Hybrid X25519 + ML-KEM-768 key encapsulation.

    kem = HybridKEM()
    kp = kem.generate_keypair()
    ct, ss = kem.encapsulate(kp.public)
    assert kem.decapsulate(kp, ct) == ss

The shared secret is HKDF-SHA256 over ``ss_x25519 || ss_mlkem`` with an empty
salt and an info string that binds the algorithm name and the full ciphertext
(see :func:`combiner_info`).
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass, field
from functools import cached_property

from hybridseal.errors import (
    DowngradeRefusedError,
    MalformedCiphertextError,
    MalformedKeyError,
    UnsupportedAlgorithmError,
)
from hybridseal.primitives import (
    CLASSICAL_ONLY_KEM,
    DEFAULT_KEM,
    AlgorithmId,
    HybridKemSuite,
    KdfSpec,
    Kind,
    algorithm,
    hkdf_extract_expand,
    lookup_backend,
)

__all__ = [
    "FORMAT_VERSION",
    "HKDF_SALT",
    "INFO_PREFIX",
    "SHARED_SECRET_LEN",
    "HybridKEM",
    "HybridKeyPair",
    "HybridPublicKey",
    "HybridCiphertext",
    "SharedSecret",
    "combine",
    "combiner_info",
    "generate_keypair",
    "classical_only_keypair",
    "encapsulate",
    "decapsulate",
]

FORMAT_VERSION = 1
SHARED_SECRET_LEN = 32
HKDF_SALT = b""
INFO_PREFIX = b"hybridseal/v1/"


def _kem_suite(alg: AlgorithmId | str) -> tuple[AlgorithmId, HybridKemSuite]:
    alg_id = algorithm(alg)
    suite = lookup_backend(alg_id)
    if alg_id.kind is not Kind.KEM or not isinstance(suite, HybridKemSuite):
        raise UnsupportedAlgorithmError(
            alg_id.name, [n for n in (DEFAULT_KEM.name, CLASSICAL_ONLY_KEM.name)]
        )
    return alg_id, suite


def _check_len(what: str, value: bytes, expected: int, exc: type[Exception]) -> None:
    if not isinstance(value, (bytes, bytearray)):
        raise exc(f"{what} must be bytes, got {type(value).__name__}")
    if len(value) != expected:
        raise exc(f"{what} must be {expected} bytes, got {len(value)}")


def _handle(obj, slot: str, make):
    # loaded backend keys are cached on the (immutable) key object itself
    cache = obj.__dict__
    h = cache.get(slot)
    if h is None:
        h = cache[slot] = make()
    return h


def _short_repr(obj) -> str:
    pub = getattr(obj, "cls_pub", None) or getattr(obj, "cls_eph_pub", b"")
    return f"{type(obj).__name__}(alg={obj.alg.name!r}, v={obj.version}, cls={pub[:8].hex()}...)"


def _require_downgrade_flag(alg: AlgorithmId, confirm_downgrade: bool) -> None:
    if alg == CLASSICAL_ONLY_KEM and confirm_downgrade is not True:
        raise DowngradeRefusedError(
            "classical-only X25519 has no post-quantum security; "
            "pass confirm_downgrade=True to use it"
        )


@dataclass(frozen=True, repr=False)
class HybridPublicKey:
    alg: AlgorithmId
    cls_pub: bytes
    pqc_pub: bytes
    version: int = FORMAT_VERSION

    def __post_init__(self):
        alg, suite = _kem_suite(self.alg)
        object.__setattr__(self, "alg", alg)
        _check_len("classical public key", self.cls_pub, suite.classical.pk_len, MalformedKeyError)
        pqc_len = suite.pqc.pk_len if suite.pqc else 0
        _check_len("PQC public key", self.pqc_pub, pqc_len, MalformedKeyError)

    __repr__ = _short_repr

    def _handles(self, suite: HybridKemSuite):
        return _handle(self, "_pub_handles", lambda: (
            suite.classical.load_public(self.cls_pub),
            suite.pqc.load_public(self.pqc_pub) if suite.pqc else None,
        ))


@dataclass(frozen=True, repr=False)
class HybridKeyPair:
    alg: AlgorithmId
    cls_pub: bytes
    cls_sec: bytes = field(repr=False)
    pqc_pub: bytes
    pqc_sec: bytes = field(repr=False)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        alg, suite = _kem_suite(self.alg)
        object.__setattr__(self, "alg", alg)
        _check_len("classical public key", self.cls_pub, suite.classical.pk_len, MalformedKeyError)
        _check_len("classical secret key", self.cls_sec, suite.classical.sk_len, MalformedKeyError)
        if suite.pqc is None:
            _check_len("PQC public key", self.pqc_pub, 0, MalformedKeyError)
            _check_len("PQC secret key", self.pqc_sec, 0, MalformedKeyError)
        else:
            _check_len("PQC public key", self.pqc_pub, suite.pqc.pk_len, MalformedKeyError)
            _check_len("PQC secret key", self.pqc_sec, suite.pqc.sk_len, MalformedKeyError)

    @classmethod
    def from_secrets(cls, alg: AlgorithmId | str, cls_sec: bytes, pqc_sec: bytes) -> HybridKeyPair:
        """Rebuild a keypair from its two secret halves (public halves are re-derived)."""
        alg, suite = _kem_suite(alg)
        _check_len("classical secret key", cls_sec, suite.classical.sk_len, MalformedKeyError)
        cls_pub = suite.classical.public_from_secret(cls_sec)
        if suite.pqc is None:
            pqc_pub = b""
        else:
            _check_len("PQC secret key", pqc_sec, suite.pqc.sk_len, MalformedKeyError)
            pqc_pub = suite.pqc.public_from_secret(pqc_sec)
        return cls(alg, cls_pub, bytes(cls_sec), pqc_pub, bytes(pqc_sec))

    __repr__ = _short_repr

    @cached_property
    def public(self) -> HybridPublicKey:
        """Public projection; carries neither secret half."""
        return HybridPublicKey(self.alg, self.cls_pub, self.pqc_pub, self.version)

    def _handles(self, suite: HybridKemSuite):
        return _handle(self, "_sec_handles", lambda: (
            suite.classical.load_secret(self.cls_sec),
            suite.pqc.load_secret(self.pqc_sec) if suite.pqc else None,
        ))

    @property
    def is_classical_only(self) -> bool:
        return self.alg == CLASSICAL_ONLY_KEM


@dataclass(frozen=True, repr=False)
class HybridCiphertext:
    alg: AlgorithmId
    cls_eph_pub: bytes
    pqc_ct: bytes
    version: int = FORMAT_VERSION

    def __post_init__(self):
        alg, suite = _kem_suite(self.alg)
        object.__setattr__(self, "alg", alg)
        _check_len("classical ephemeral public", self.cls_eph_pub, suite.classical.ct_len,
                   MalformedCiphertextError)
        pqc_len = suite.pqc.ct_len if suite.pqc else 0
        _check_len("PQC ciphertext", self.pqc_ct, pqc_len, MalformedCiphertextError)

    __repr__ = _short_repr


class SharedSecret:
    """32-byte derived secret. Equality is constant-time; repr never shows the value."""

    __slots__ = ("_value",)

    def __init__(self, value: bytes):
        if len(value) != SHARED_SECRET_LEN:
            raise ValueError(f"shared secret must be {SHARED_SECRET_LEN} bytes")
        self._value = bytes(value)

    def __bytes__(self) -> bytes:
        return self._value

    def __len__(self) -> int:
        return len(self._value)

    def __eq__(self, other) -> bool:
        if isinstance(other, SharedSecret):
            other = other._value
        if not isinstance(other, (bytes, bytearray)):
            return NotImplemented
        return hmac.compare_digest(self._value, bytes(other))

    __hash__ = None

    def __repr__(self) -> str:
        return "SharedSecret(<32 bytes>)"


def combiner_info(alg_name: str, cls_eph_pub: bytes, pqc_ct: bytes) -> bytes:
    """Info string binding the algorithm and the full ciphertext transcript."""
    return INFO_PREFIX + alg_name.encode("ascii") + b"\x00" + bytes(cls_eph_pub) + bytes(pqc_ct)


def combine(ss_cls: bytes, ss_pqc: bytes, alg_name: str, cls_eph_pub: bytes, pqc_ct: bytes) -> bytes:
    """HKDF-SHA256(ss_cls || ss_pqc, salt="", info=combiner_info(...)), 32 bytes.

    The classical share always comes first.
    """
    spec = KdfSpec(output_len=SHARED_SECRET_LEN, salt=HKDF_SALT,
                   info=combiner_info(alg_name, cls_eph_pub, pqc_ct))
    return hkdf_extract_expand(bytes(ss_cls) + bytes(ss_pqc), spec)


class HybridKEM:
    """Hybrid KEM bound to one algorithm id (default X25519+ML-KEM-768)."""

    def __init__(self, alg: AlgorithmId | str = DEFAULT_KEM):
        self.alg, self._suite = _kem_suite(alg)

    def generate_keypair(self, *, confirm_downgrade: bool = False) -> HybridKeyPair:
        _require_downgrade_flag(self.alg, confirm_downgrade)
        # the two halves come from independent backend calls; no shared RNG state
        cls_pub, cls_sec, cls_h = self._suite.classical.generate()
        if self._suite.pqc is None:
            pqc_pub = pqc_sec = b""
            pqc_h = None
        else:
            pqc_pub, pqc_sec, pqc_h = self._suite.pqc.generate()
        kp = HybridKeyPair(self.alg, cls_pub, cls_sec, pqc_pub, pqc_sec)
        if cls_h is not None and (pqc_h is not None or self._suite.pqc is None):
            kp.__dict__["_sec_handles"] = (cls_h, pqc_h)
        return kp

    def encapsulate(self, pub: HybridPublicKey, *, confirm_downgrade: bool = False
                    ) -> tuple[HybridCiphertext, SharedSecret]:
        if not isinstance(pub, HybridPublicKey):
            raise MalformedKeyError(f"expected HybridPublicKey, got {type(pub).__name__}")
        _require_downgrade_flag(pub.alg, confirm_downgrade)
        if pub.alg != self.alg:
            raise MalformedKeyError(f"key algorithm {pub.alg.name} does not match {self.alg.name}")
        cls_h, pqc_h = pub._handles(self._suite)
        eph_pub, ss_cls = self._suite.classical.encapsulate(cls_h)
        if self._suite.pqc is None:
            pqc_ct, ss_pqc = b"", b""
        else:
            pqc_ct, ss_pqc = self._suite.pqc.encapsulate(pqc_h)
        ss = combine(ss_cls, ss_pqc, self.alg.name, eph_pub, pqc_ct)
        return HybridCiphertext(self.alg, eph_pub, pqc_ct), SharedSecret(ss)

    def decapsulate(self, kp: HybridKeyPair, ct: HybridCiphertext, *,
                    confirm_downgrade: bool = False) -> SharedSecret:
        if not isinstance(kp, HybridKeyPair):
            raise MalformedKeyError(f"expected HybridKeyPair, got {type(kp).__name__}")
        if not isinstance(ct, HybridCiphertext):
            raise MalformedCiphertextError(f"expected HybridCiphertext, got {type(ct).__name__}")
        _require_downgrade_flag(kp.alg, confirm_downgrade)
        if kp.alg != self.alg or ct.alg != self.alg:
            raise MalformedCiphertextError(
                f"algorithm mismatch: kem {self.alg.name}, key {kp.alg.name}, ciphertext {ct.alg.name}"
            )
        cls_h, pqc_h = kp._handles(self._suite)
        ss_cls = self._suite.classical.decapsulate(cls_h, ct.cls_eph_pub)
        if self._suite.pqc is None:
            ss_pqc = b""
        else:
            ss_pqc = self._suite.pqc.decapsulate(pqc_h, ct.pqc_ct)
        return SharedSecret(combine(ss_cls, ss_pqc, self.alg.name, ct.cls_eph_pub, ct.pqc_ct))


def generate_keypair(alg: AlgorithmId | str = DEFAULT_KEM) -> HybridKeyPair:
    return HybridKEM(alg).generate_keypair()


def classical_only_keypair(confirm_downgrade: bool = False) -> HybridKeyPair:
    """X25519-only keypair. Refused unless ``confirm_downgrade`` is literally True."""
    _require_downgrade_flag(CLASSICAL_ONLY_KEM, confirm_downgrade)
    return HybridKEM(CLASSICAL_ONLY_KEM).generate_keypair(confirm_downgrade=True)


def encapsulate(pub: HybridPublicKey, *, confirm_downgrade: bool = False):
    if not isinstance(pub, HybridPublicKey):
        raise MalformedKeyError(f"expected HybridPublicKey, got {type(pub).__name__}")
    return HybridKEM(pub.alg).encapsulate(pub, confirm_downgrade=confirm_downgrade)


def decapsulate(kp: HybridKeyPair, ct: HybridCiphertext, *, confirm_downgrade: bool = False):
    if not isinstance(kp, HybridKeyPair):
        raise MalformedKeyError(f"expected HybridKeyPair, got {type(kp).__name__}")
    return HybridKEM(kp.alg).decapsulate(kp, ct, confirm_downgrade=confirm_downgrade)
