"""Backend layer: the only module that names concrete primitive implementations.

Everything above this module talks to :class:`KemBackend` / :class:`SigBackend`
objects obtained from :func:`lookup_backend`. The table is static; there is no
plugin mechanism.

ML-KEM-768 and ML-DSA-65 come from ``cryptography`` (OpenSSL FIPS 203/204
implementations). X25519 is wrapped as a KEM (ephemeral-static DH) so both
halves of the hybrid share one interface.
"""

from __future__ import annotations

import abc
import enum
import hashlib
import hmac
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ed25519, mldsa, mlkem, x25519
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from hybridseal.errors import (
    AuthenticationError,
    InvalidParameterError,
    MalformedCiphertextError,
    MalformedKeyError,
    UnsupportedAlgorithmError,
)

__all__ = [
    "AlgorithmId",
    "Kind",
    "KdfSpec",
    "KemBackend",
    "SigBackend",
    "HybridKemSuite",
    "HybridSigSuite",
    "DEFAULT_KEM",
    "DEFAULT_SIG",
    "CLASSICAL_ONLY_KEM",
    "algorithm",
    "registered_names",
    "lookup_backend",
    "hkdf_extract_expand",
    "aead_seal",
    "aead_open",
    "AEAD_KEY_LEN",
    "AEAD_NONCE_LEN",
    "AEAD_TAG_LEN",
]

HASH_LEN = 32
HKDF_MAX_OUTPUT = 255 * HASH_LEN
HKDF_MIN_OUTPUT = 16

AEAD_KEY_LEN = 32
AEAD_NONCE_LEN = 12
AEAD_TAG_LEN = 16


class Kind(str, enum.Enum):
    KEM = "kem"
    SIG = "sig"


@dataclass(frozen=True)
class AlgorithmId:
    """Registered algorithm identity.

    ``security_level`` is the NIST PQ category (1/3/5); classical-only
    entries carry 0 because they offer no post-quantum security.
    """

    name: str
    kind: Kind
    security_level: int

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class KdfSpec:
    """HKDF-SHA256 parameters."""

    output_len: int = 32
    salt: bytes = b""
    info: bytes = b""

    def __post_init__(self):
        if not HKDF_MIN_OUTPUT <= self.output_len <= HKDF_MAX_OUTPUT:
            raise InvalidParameterError(
                f"HKDF-SHA256 output length must be in [{HKDF_MIN_OUTPUT}, {HKDF_MAX_OUTPUT}], "
                f"got {self.output_len}"
            )


def hkdf_extract_expand(ikm: bytes, spec: KdfSpec) -> bytes:
    if not ikm:
        raise InvalidParameterError("HKDF input keying material must be non-empty")
    # an empty salt is replaced by HashLen zero bytes inside HKDF (RFC 5869 2.2)
    kdf = HKDF(
        algorithm=hashes.SHA256(),
        length=spec.output_len,
        salt=spec.salt or None,
        info=spec.info,
    )
    return kdf.derive(bytes(ikm))


def _check_aead_params(key: bytes, nonce: bytes) -> None:
    if len(key) != AEAD_KEY_LEN:
        raise InvalidParameterError(f"AES-256-GCM key must be {AEAD_KEY_LEN} bytes, got {len(key)}")
    if len(nonce) != AEAD_NONCE_LEN:
        raise InvalidParameterError(f"AES-GCM nonce must be {AEAD_NONCE_LEN} bytes, got {len(nonce)}")


def aead_seal(key: bytes, nonce: bytes, aad: bytes, plaintext: bytes) -> bytes:
    """AES-256-GCM encrypt; returns ciphertext with the 16-byte tag appended."""
    _check_aead_params(key, nonce)
    return AESGCM(bytes(key)).encrypt(bytes(nonce), bytes(plaintext), bytes(aad))


def aead_open(key: bytes, nonce: bytes, aad: bytes, ciphertext: bytes) -> bytes:
    _check_aead_params(key, nonce)
    try:
        return AESGCM(bytes(key)).decrypt(bytes(nonce), bytes(ciphertext), bytes(aad))
    except InvalidTag:
        raise AuthenticationError("AEAD authentication failed") from None


class KemBackend(abc.ABC):
    name: str
    pk_len: int
    sk_len: int
    ct_len: int
    ss_len: int

    @abc.abstractmethod
    def keygen(self) -> tuple[bytes, bytes]:
        """Return ``(public, secret)``."""

    @abc.abstractmethod
    def encapsulate(self, public: bytes) -> tuple[bytes, bytes]:
        """Return ``(ciphertext, shared_secret)``."""

    @abc.abstractmethod
    def decapsulate(self, secret: bytes, ciphertext: bytes) -> bytes: ...

    @abc.abstractmethod
    def public_from_secret(self, secret: bytes) -> bytes: ...

    def generate(self):
        """Like :meth:`keygen` but also returns the loaded secret handle (or None)."""
        public, secret = self.keygen()
        return public, secret, None

    def load_public(self, public: bytes):
        """Parse raw public bytes into a backend handle accepted in place of the bytes."""
        return public

    def load_secret(self, secret: bytes):
        return secret


class SigBackend(abc.ABC):
    name: str
    pk_len: int
    sk_len: int
    sig_len: int

    @abc.abstractmethod
    def keygen(self) -> tuple[bytes, bytes]: ...

    @abc.abstractmethod
    def sign(self, secret: bytes, msg: bytes) -> bytes: ...

    @abc.abstractmethod
    def verify(self, public: bytes, msg: bytes, sig: bytes) -> bool:
        """Never raises for bad signatures or keys; returns False instead."""

    @abc.abstractmethod
    def public_from_secret(self, secret: bytes) -> bytes: ...

    def generate(self):
        public, secret = self.keygen()
        return public, secret, None

    def load_public(self, public: bytes):
        return public

    def load_secret(self, secret: bytes):
        return secret


class X25519Kem(KemBackend):
    """X25519 DH presented as a KEM: the ciphertext is the sender's ephemeral public."""

    name = "X25519"
    pk_len = 32
    sk_len = 32
    ct_len = 32
    ss_len = 32

    def keygen(self):
        public, secret, _ = self.generate()
        return public, secret

    def generate(self):
        sk = x25519.X25519PrivateKey.generate()
        return sk.public_key().public_bytes_raw(), sk.private_bytes_raw(), sk

    def load_public(self, public):
        if isinstance(public, x25519.X25519PublicKey):
            return public
        if len(public) != self.pk_len:
            raise MalformedKeyError(f"X25519 public key must be 32 bytes, got {len(public)}")
        return x25519.X25519PublicKey.from_public_bytes(bytes(public))

    def load_secret(self, secret):
        if isinstance(secret, x25519.X25519PrivateKey):
            return secret
        if len(secret) != self.sk_len:
            raise MalformedKeyError(f"X25519 secret key must be 32 bytes, got {len(secret)}")
        return x25519.X25519PrivateKey.from_private_bytes(bytes(secret))

    def encapsulate(self, public):
        peer = self.load_public(public)
        eph = x25519.X25519PrivateKey.generate()
        try:
            ss = eph.exchange(peer)
        except ValueError:
            raise MalformedKeyError("X25519 public key is a low-order point") from None
        return eph.public_key().public_bytes_raw(), ss

    def decapsulate(self, secret, ciphertext):
        sk = self.load_secret(secret)
        if len(ciphertext) != self.ct_len:
            raise MalformedCiphertextError(
                f"X25519 ephemeral public must be 32 bytes, got {len(ciphertext)}"
            )
        try:
            return sk.exchange(x25519.X25519PublicKey.from_public_bytes(bytes(ciphertext)))
        except ValueError:
            # Low-order ephemeral: answer with a keyed pseudorandom value instead of
            # an error, mirroring ML-KEM implicit rejection.
            return hmac.new(sk.private_bytes_raw(), b"x25519-reject" + bytes(ciphertext),
                            hashlib.sha256).digest()

    def public_from_secret(self, secret):
        return self.load_secret(secret).public_key().public_bytes_raw()


class MLKem768(KemBackend):
    name = "ML-KEM-768"
    pk_len = 1184
    sk_len = 64  # FIPS 203 (d, z) seed form
    ct_len = 1088
    ss_len = 32

    def keygen(self):
        public, secret, _ = self.generate()
        return public, secret

    def generate(self):
        sk = mlkem.MLKEM768PrivateKey.generate()
        return sk.public_key().public_bytes_raw(), sk.private_bytes_raw(), sk

    def load_public(self, public):
        if isinstance(public, mlkem.MLKEM768PublicKey):
            return public
        if len(public) != self.pk_len:
            raise MalformedKeyError(f"ML-KEM-768 public key must be 1184 bytes, got {len(public)}")
        try:
            return mlkem.MLKEM768PublicKey.from_public_bytes(bytes(public))
        except ValueError as exc:
            raise MalformedKeyError(f"invalid ML-KEM-768 public key: {exc}") from None

    def load_secret(self, secret):
        if isinstance(secret, mlkem.MLKEM768PrivateKey):
            return secret
        if len(secret) != self.sk_len:
            raise MalformedKeyError(f"ML-KEM-768 secret seed must be 64 bytes, got {len(secret)}")
        return mlkem.MLKEM768PrivateKey.from_seed_bytes(bytes(secret))

    def encapsulate(self, public):
        ss, ct = self.load_public(public).encapsulate()
        return ct, ss

    def decapsulate(self, secret, ciphertext):
        sk = self.load_secret(secret)
        if len(ciphertext) != self.ct_len:
            raise MalformedCiphertextError(
                f"ML-KEM-768 ciphertext must be 1088 bytes, got {len(ciphertext)}"
            )
        # implicit rejection: a well-sized but invalid ciphertext yields a pseudorandom secret
        return sk.decapsulate(bytes(ciphertext))

    def public_from_secret(self, secret):
        return self.load_secret(secret).public_key().public_bytes_raw()


class Ed25519Sig(SigBackend):
    name = "Ed25519"
    pk_len = 32
    sk_len = 32
    sig_len = 64

    def keygen(self):
        public, secret, _ = self.generate()
        return public, secret

    def generate(self):
        sk = ed25519.Ed25519PrivateKey.generate()
        return sk.public_key().public_bytes_raw(), sk.private_bytes_raw(), sk

    def load_public(self, public):
        if isinstance(public, ed25519.Ed25519PublicKey):
            return public
        if len(public) != self.pk_len:
            raise MalformedKeyError(f"Ed25519 public key must be 32 bytes, got {len(public)}")
        return ed25519.Ed25519PublicKey.from_public_bytes(bytes(public))

    def load_secret(self, secret):
        if isinstance(secret, ed25519.Ed25519PrivateKey):
            return secret
        if len(secret) != self.sk_len:
            raise MalformedKeyError(f"Ed25519 secret key must be 32 bytes, got {len(secret)}")
        return ed25519.Ed25519PrivateKey.from_private_bytes(bytes(secret))

    def sign(self, secret, msg):
        return self.load_secret(secret).sign(bytes(msg))

    def verify(self, public, msg, sig):
        try:
            self.load_public(public).verify(bytes(sig), bytes(msg))
        except (InvalidSignature, ValueError):
            return False
        return True

    def public_from_secret(self, secret):
        return self.load_secret(secret).public_key().public_bytes_raw()


class MLDsa65Sig(SigBackend):
    name = "ML-DSA-65"
    pk_len = 1952
    sk_len = 32  # FIPS 204 xi seed form
    sig_len = 3309

    def keygen(self):
        public, secret, _ = self.generate()
        return public, secret

    def generate(self):
        sk = mldsa.MLDSA65PrivateKey.generate()
        return sk.public_key().public_bytes_raw(), sk.private_bytes_raw(), sk

    def load_public(self, public):
        if isinstance(public, mldsa.MLDSA65PublicKey):
            return public
        if len(public) != self.pk_len:
            raise MalformedKeyError(f"ML-DSA-65 public key must be 1952 bytes, got {len(public)}")
        try:
            return mldsa.MLDSA65PublicKey.from_public_bytes(bytes(public))
        except ValueError as exc:
            raise MalformedKeyError(f"invalid ML-DSA-65 public key: {exc}") from None

    def load_secret(self, secret):
        if isinstance(secret, mldsa.MLDSA65PrivateKey):
            return secret
        if len(secret) != self.sk_len:
            raise MalformedKeyError(f"ML-DSA-65 secret seed must be 32 bytes, got {len(secret)}")
        return mldsa.MLDSA65PrivateKey.from_seed_bytes(bytes(secret))

    def sign(self, secret, msg):
        # OpenSSL signs in hedged (randomized) mode by default
        return self.load_secret(secret).sign(bytes(msg))

    def verify(self, public, msg, sig):
        try:
            self.load_public(public).verify(bytes(sig), bytes(msg))
        except (InvalidSignature, ValueError):
            return False
        return True

    def public_from_secret(self, secret):
        return self.load_secret(secret).public_key().public_bytes_raw()


@dataclass(frozen=True)
class HybridKemSuite:
    """Classical + PQC KEM pair behind a hybrid algorithm id. ``pqc`` is None for classical-only."""

    alg: AlgorithmId
    classical: KemBackend
    pqc: KemBackend | None


@dataclass(frozen=True)
class HybridSigSuite:
    alg: AlgorithmId
    classical: SigBackend
    pqc: SigBackend


DEFAULT_KEM = AlgorithmId("X25519+ML-KEM-768", Kind.KEM, 3)
DEFAULT_SIG = AlgorithmId("Ed25519+ML-DSA-65", Kind.SIG, 3)
CLASSICAL_ONLY_KEM = AlgorithmId("X25519-only", Kind.KEM, 0)

_X25519 = X25519Kem()
_MLKEM768 = MLKem768()
_ED25519 = Ed25519Sig()
_MLDSA65 = MLDsa65Sig()

_REGISTRY: dict[str, tuple[AlgorithmId, object]] = {
    DEFAULT_KEM.name: (DEFAULT_KEM, HybridKemSuite(DEFAULT_KEM, _X25519, _MLKEM768)),
    DEFAULT_SIG.name: (DEFAULT_SIG, HybridSigSuite(DEFAULT_SIG, _ED25519, _MLDSA65)),
    CLASSICAL_ONLY_KEM.name: (CLASSICAL_ONLY_KEM, HybridKemSuite(CLASSICAL_ONLY_KEM, _X25519, None)),
    "X25519": (AlgorithmId("X25519", Kind.KEM, 0), _X25519),
    "ML-KEM-768": (AlgorithmId("ML-KEM-768", Kind.KEM, 3), _MLKEM768),
    "Ed25519": (AlgorithmId("Ed25519", Kind.SIG, 0), _ED25519),
    "ML-DSA-65": (AlgorithmId("ML-DSA-65", Kind.SIG, 3), _MLDSA65),
}


def registered_names() -> list[str]:
    return list(_REGISTRY)


def algorithm(name: AlgorithmId | str) -> AlgorithmId:
    """Resolve a name (or pass through an id) to its registered :class:`AlgorithmId`."""
    key = name.name if isinstance(name, AlgorithmId) else name
    try:
        return _REGISTRY[key][0]
    except (KeyError, TypeError):
        raise UnsupportedAlgorithmError(key, registered_names()) from None


def lookup_backend(alg: AlgorithmId | str):
    """Return the backend object registered for ``alg``.

    Hybrid ids map to a :class:`HybridKemSuite` / :class:`HybridSigSuite`;
    component ids map to a single :class:`KemBackend` / :class:`SigBackend`.
    The same id always yields the same object.
    """
    key = alg.name if isinstance(alg, AlgorithmId) else alg
    try:
        return _REGISTRY[key][1]
    except (KeyError, TypeError):
        raise UnsupportedAlgorithmError(key, registered_names()) from None
