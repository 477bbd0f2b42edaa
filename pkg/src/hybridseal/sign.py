"""Ed25519 + ML-DSA-65 co-signatures with strict-AND verification.

Both components sign the raw message. A signature is accepted only if both
verify under their respective public halves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from hybridseal.errors import MalformedKeyError, MalformedSignatureError, UnsupportedAlgorithmError
from hybridseal.primitives import DEFAULT_SIG, AlgorithmId, HybridSigSuite, Kind, algorithm, lookup_backend

__all__ = [
    "HybridSign",
    "HybridSigKeyPair",
    "HybridSigPublicKey",
    "HybridSignature",
    "generate_keypair",
    "sign",
    "verify",
]

FORMAT_VERSION = 1


def _sig_suite(alg: AlgorithmId | str) -> tuple[AlgorithmId, HybridSigSuite]:
    alg_id = algorithm(alg)
    suite = lookup_backend(alg_id)
    if alg_id.kind is not Kind.SIG or not isinstance(suite, HybridSigSuite):
        raise UnsupportedAlgorithmError(alg_id.name, [DEFAULT_SIG.name])
    return alg_id, suite


def _check(what, value, expected, exc):
    if not isinstance(value, (bytes, bytearray)) or len(value) != expected:
        got = len(value) if isinstance(value, (bytes, bytearray)) else type(value).__name__
        raise exc(f"{what} must be {expected} bytes, got {got}")


@dataclass(frozen=True, repr=False)
class HybridSigPublicKey:
    alg: AlgorithmId
    cls_pub: bytes
    pqc_pub: bytes
    version: int = FORMAT_VERSION

    def __post_init__(self):
        alg, suite = _sig_suite(self.alg)
        object.__setattr__(self, "alg", alg)
        _check("Ed25519 public key", self.cls_pub, suite.classical.pk_len, MalformedKeyError)
        _check("ML-DSA public key", self.pqc_pub, suite.pqc.pk_len, MalformedKeyError)

    def __repr__(self):
        return f"HybridSigPublicKey(alg={self.alg.name!r}, v={self.version}, cls={self.cls_pub[:8].hex()}...)"

    def _handles(self, suite):
        h = self.__dict__.get("_pub_handles")
        if h is None:
            h = self.__dict__["_pub_handles"] = (suite.classical.load_public(self.cls_pub),
                                                 suite.pqc.load_public(self.pqc_pub))
        return h


@dataclass(frozen=True, repr=False)
class HybridSigKeyPair:
    alg: AlgorithmId
    cls_pub: bytes
    cls_sec: bytes = field(repr=False)
    pqc_pub: bytes
    pqc_sec: bytes = field(repr=False)
    version: int = FORMAT_VERSION

    def __post_init__(self):
        alg, suite = _sig_suite(self.alg)
        object.__setattr__(self, "alg", alg)
        _check("Ed25519 public key", self.cls_pub, suite.classical.pk_len, MalformedKeyError)
        _check("Ed25519 secret key", self.cls_sec, suite.classical.sk_len, MalformedKeyError)
        _check("ML-DSA public key", self.pqc_pub, suite.pqc.pk_len, MalformedKeyError)
        _check("ML-DSA secret seed", self.pqc_sec, suite.pqc.sk_len, MalformedKeyError)

    @classmethod
    def from_secrets(cls, alg, cls_sec: bytes, pqc_sec: bytes) -> HybridSigKeyPair:
        alg, suite = _sig_suite(alg)
        _check("Ed25519 secret key", cls_sec, suite.classical.sk_len, MalformedKeyError)
        _check("ML-DSA secret seed", pqc_sec, suite.pqc.sk_len, MalformedKeyError)
        return cls(alg, suite.classical.public_from_secret(cls_sec), bytes(cls_sec),
                   suite.pqc.public_from_secret(pqc_sec), bytes(pqc_sec))

    def __repr__(self):
        return f"HybridSigKeyPair(alg={self.alg.name!r}, v={self.version}, cls={self.cls_pub[:8].hex()}...)"

    @cached_property
    def public(self) -> HybridSigPublicKey:
        return HybridSigPublicKey(self.alg, self.cls_pub, self.pqc_pub, self.version)

    def _handles(self, suite):
        h = self.__dict__.get("_sec_handles")
        if h is None:
            h = self.__dict__["_sec_handles"] = (suite.classical.load_secret(self.cls_sec),
                                                 suite.pqc.load_secret(self.pqc_sec))
        return h


@dataclass(frozen=True, repr=False)
class HybridSignature:
    alg: AlgorithmId
    cls_sig: bytes
    pqc_sig: bytes
    version: int = FORMAT_VERSION

    def __post_init__(self):
        alg, suite = _sig_suite(self.alg)
        object.__setattr__(self, "alg", alg)
        _check("Ed25519 signature", self.cls_sig, suite.classical.sig_len, MalformedSignatureError)
        _check("ML-DSA signature", self.pqc_sig, suite.pqc.sig_len, MalformedSignatureError)

    def __repr__(self):
        return f"HybridSignature(alg={self.alg.name!r}, v={self.version}, cls={self.cls_sig[:8].hex()}...)"


class HybridSign:
    def __init__(self, alg: AlgorithmId | str = DEFAULT_SIG):
        self.alg, self._suite = _sig_suite(alg)

    def generate_keypair(self) -> HybridSigKeyPair:
        cls_pub, cls_sec, cls_h = self._suite.classical.generate()
        pqc_pub, pqc_sec, pqc_h = self._suite.pqc.generate()
        kp = HybridSigKeyPair(self.alg, cls_pub, cls_sec, pqc_pub, pqc_sec)
        if cls_h is not None and pqc_h is not None:
            kp.__dict__["_sec_handles"] = (cls_h, pqc_h)
        return kp

    def sign(self, kp: HybridSigKeyPair, msg: bytes) -> HybridSignature:
        if not isinstance(kp, HybridSigKeyPair) or kp.alg != self.alg:
            raise MalformedKeyError("signing key does not belong to this algorithm")
        msg = bytes(msg)
        cls_h, pqc_h = kp._handles(self._suite)
        return HybridSignature(
            self.alg,
            self._suite.classical.sign(cls_h, msg),
            self._suite.pqc.sign(pqc_h, msg),
        )

    def verify(self, pub, msg: bytes, sig: HybridSignature) -> bool:
        """True iff both component signatures verify.

        Raises :class:`MalformedSignatureError` when ``sig`` is not a structurally
        valid signature for this algorithm; a well-formed but wrong signature is
        simply False.
        """
        if isinstance(pub, HybridSigKeyPair):
            pub = pub.public
        if not isinstance(pub, HybridSigPublicKey):
            raise MalformedKeyError(f"expected HybridSigPublicKey, got {type(pub).__name__}")
        if not isinstance(sig, HybridSignature):
            raise MalformedSignatureError(f"expected HybridSignature, got {type(sig).__name__}")
        if sig.alg != self.alg or pub.alg != self.alg:
            raise MalformedSignatureError("algorithm mismatch between signature, key and verifier")
        # dataclasses can be bypassed with object.__setattr__; recheck lengths here
        _check("Ed25519 signature", sig.cls_sig, self._suite.classical.sig_len, MalformedSignatureError)
        _check("ML-DSA signature", sig.pqc_sig, self._suite.pqc.sig_len, MalformedSignatureError)
        msg = bytes(msg)
        # evaluate both so the verdict's timing does not reveal which half failed
        try:
            cls_h, pqc_h = pub._handles(self._suite)
        except (MalformedKeyError, ValueError):
            return False
        cls_ok = self._suite.classical.verify(cls_h, msg, sig.cls_sig)
        pqc_ok = self._suite.pqc.verify(pqc_h, msg, sig.pqc_sig)
        return cls_ok and pqc_ok


def generate_keypair(alg: AlgorithmId | str = DEFAULT_SIG) -> HybridSigKeyPair:
    return HybridSign(alg).generate_keypair()


def sign(kp: HybridSigKeyPair, msg: bytes) -> HybridSignature:
    return HybridSign(kp.alg).sign(kp, msg)


def verify(pub, msg: bytes, sig: HybridSignature) -> bool:
    alg = pub.alg if hasattr(pub, "alg") else DEFAULT_SIG
    return HybridSign(alg).verify(pub, msg, sig)
