"""Versioned CBOR key format, PEM wrapping, and the classical-to-hybrid upgrade path.

Every serialized key, ciphertext and signature is one CBOR map::

    {"v": 1, "alg": "X25519+ML-KEM-768", "cls": h'..', "pqc": h'..', ? "params": {..}}

with keys in exactly that order. Private keys use the same map with the
secret halves in ``cls``/``pqc`` (ML-KEM and ML-DSA secrets are stored as
their FIPS seeds). Which object a map holds follows from the algorithm and
the two component lengths; for the classical-only KEM, where public key,
secret key and ciphertext all have the same shape, pass ``expect``.
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric import ed25519, x25519

from hybridseal import cbor
from hybridseal.errors import (
    HybridSealError,
    MalformedEncodingError,
    MalformedKeyError,
    UnsupportedAlgorithmError,
    UnsupportedVersionError,
)
from hybridseal.kem import HybridCiphertext, HybridKeyPair, HybridPublicKey
from hybridseal.primitives import (
    DEFAULT_KEM,
    DEFAULT_SIG,
    HybridKemSuite,
    HybridSigSuite,
    Kind,
    algorithm,
    lookup_backend,
)
from hybridseal.sign import HybridSigKeyPair, HybridSigPublicKey, HybridSignature

__all__ = [
    "FORMAT_VERSION",
    "PEM_PUBLIC_LABEL",
    "PEM_PRIVATE_LABEL",
    "CborHybridKey",
    "encode_cbor",
    "decode_cbor",
    "pem_encode",
    "pem_decode",
    "upgrade_classical",
    "save",
    "load",
]

FORMAT_VERSION = 1
PEM_PUBLIC_LABEL = "HYBRID PUBLIC KEY"
PEM_PRIVATE_LABEL = "HYBRID PRIVATE KEY"

_FIELD_ORDER = ("v", "alg", "cls", "pqc", "params")
_REQUIRED = frozenset(_FIELD_ORDER[:4])

# expect= names
PUBLIC, SECRET, CIPHERTEXT, SIGNATURE = "public", "secret", "ciphertext", "signature"

_PUBLIC_TYPES = (HybridPublicKey, HybridSigPublicKey)
_SECRET_TYPES = (HybridKeyPair, HybridSigKeyPair)


@dataclass(frozen=True)
class CborHybridKey:
    """The raw map. ``params`` is carried through untouched."""

    v: int
    alg: str
    cls: bytes
    pqc: bytes
    params: dict | None = field(default=None)

    def to_bytes(self) -> bytes:
        m = {"v": self.v, "alg": self.alg, "cls": self.cls, "pqc": self.pqc}
        if self.params is not None:
            m["params"] = self.params
        return cbor.dumps(m)

    @classmethod
    def from_bytes(cls, data: bytes) -> CborHybridKey:
        m = cbor.loads(data)
        if not isinstance(m, dict):
            raise MalformedEncodingError("top-level CBOR item must be a map")
        # version gate comes before any other field is looked at
        if "v" not in m:
            raise MalformedEncodingError("missing field 'v'")
        v = m["v"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise MalformedEncodingError(f"field 'v' must be a positive integer, got {v!r}")
        if v > FORMAT_VERSION:
            raise UnsupportedVersionError(v)
        keys = list(m)
        unknown = [k for k in keys if k not in _FIELD_ORDER]
        if unknown:
            raise MalformedEncodingError(f"unknown field(s) {unknown!r}")
        missing = sorted(_REQUIRED - set(keys))
        if missing:
            raise MalformedEncodingError(f"missing field(s) {missing!r}")
        if keys != [k for k in _FIELD_ORDER if k in m]:
            raise MalformedEncodingError("fields are not in canonical order")
        if not isinstance(m["alg"], str):
            raise MalformedEncodingError("field 'alg' must be a text string")
        if not isinstance(m["cls"], bytes) or not isinstance(m["pqc"], bytes):
            raise MalformedEncodingError("fields 'cls' and 'pqc' must be byte strings")
        params = m.get("params")
        if "params" in m and not isinstance(params, dict):
            raise MalformedEncodingError("field 'params' must be a map")
        return cls(v, m["alg"], m["cls"], m["pqc"], params)


def _to_map(obj) -> CborHybridKey:
    if isinstance(obj, CborHybridKey):
        return obj
    if isinstance(obj, _PUBLIC_TYPES):
        cls_b, pqc_b = obj.cls_pub, obj.pqc_pub
    elif isinstance(obj, _SECRET_TYPES):
        cls_b, pqc_b = obj.cls_sec, obj.pqc_sec
    elif isinstance(obj, HybridCiphertext):
        cls_b, pqc_b = obj.cls_eph_pub, obj.pqc_ct
    elif isinstance(obj, HybridSignature):
        cls_b, pqc_b = obj.cls_sig, obj.pqc_sig
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return CborHybridKey(obj.version, obj.alg.name, bytes(cls_b), bytes(pqc_b))


def encode_cbor(obj) -> bytes:
    """Deterministic CBOR for a key, keypair, ciphertext, signature, or raw map."""
    return _to_map(obj).to_bytes()


def _shapes(suite) -> dict[str, tuple[int, int]]:
    if isinstance(suite, HybridKemSuite):
        c, p = suite.classical, suite.pqc
        return {
            PUBLIC: (c.pk_len, p.pk_len if p else 0),
            SECRET: (c.sk_len, p.sk_len if p else 0),
            CIPHERTEXT: (c.ct_len, p.ct_len if p else 0),
        }
    c, p = suite.classical, suite.pqc
    return {
        PUBLIC: (c.pk_len, p.pk_len),
        SECRET: (c.sk_len, p.sk_len),
        SIGNATURE: (c.sig_len, p.sig_len),
    }


def _build(kind: str, alg, suite, cls_b: bytes, pqc_b: bytes):
    is_kem = isinstance(suite, HybridKemSuite)
    if kind == PUBLIC:
        return (HybridPublicKey if is_kem else HybridSigPublicKey)(alg, cls_b, pqc_b)
    if kind == SECRET:
        return (HybridKeyPair if is_kem else HybridSigKeyPair).from_secrets(alg, cls_b, pqc_b)
    if kind == CIPHERTEXT:
        return HybridCiphertext(alg, cls_b, pqc_b)
    return HybridSignature(alg, cls_b, pqc_b)


def decode_cbor(data: bytes, expect: str | None = None):
    """Parse one serialized object.

    Raises :class:`UnsupportedVersionError` for ``v`` > 1,
    :class:`UnsupportedAlgorithmError` for unknown ``alg`` and
    :class:`MalformedEncodingError` for anything structurally wrong.
    """
    raw = CborHybridKey.from_bytes(data)
    alg = algorithm(raw.alg)
    suite = lookup_backend(alg)
    if not isinstance(suite, (HybridKemSuite, HybridSigSuite)):
        raise UnsupportedAlgorithmError(raw.alg, [DEFAULT_KEM.name, DEFAULT_SIG.name, "X25519-only"])
    shapes = _shapes(suite)
    got = (len(raw.cls), len(raw.pqc))
    if expect is not None:
        if expect not in shapes:
            raise MalformedEncodingError(f"{raw.alg} has no {expect!r} objects")
        if shapes[expect] != got:
            raise MalformedEncodingError(
                f"{raw.alg} {expect} needs component lengths {shapes[expect]}, got {got}"
            )
        kind = expect
    else:
        matches = [k for k, shape in shapes.items() if shape == got]
        if not matches:
            raise MalformedEncodingError(f"component lengths {got} match no {raw.alg} object")
        if len(matches) > 1:
            raise MalformedEncodingError(
                f"{raw.alg} object with lengths {got} is ambiguous ({', '.join(matches)}); pass expect="
            )
        kind = matches[0]
    try:
        return _build(kind, alg, suite, raw.cls, raw.pqc)
    except MalformedEncodingError:
        raise
    except (HybridSealError, ValueError) as exc:
        raise MalformedEncodingError(f"invalid {kind} material: {exc}") from None


_PEM_RE = re.compile(
    r"-----BEGIN (?P<label>[A-Z0-9 ]+)-----\s*(?P<body>[A-Za-z0-9+/=\s]*?)\s*-----END (?P=label)-----\s*\Z"
)


def pem_encode(obj) -> str:
    if isinstance(obj, _PUBLIC_TYPES):
        label = PEM_PUBLIC_LABEL
    elif isinstance(obj, _SECRET_TYPES):
        label = PEM_PRIVATE_LABEL
    else:
        raise TypeError(f"only keys are PEM-wrapped, not {type(obj).__name__}")
    body = base64.b64encode(encode_cbor(obj)).decode("ascii")
    lines = [body[i:i + 64] for i in range(0, len(body), 64)]
    return f"-----BEGIN {label}-----\n" + "\n".join(lines) + f"\n-----END {label}-----\n"


def pem_decode(text: str):
    match = _PEM_RE.match(text.strip() + "\n")
    if not match:
        raise MalformedEncodingError("not a PEM block")
    label = match["label"]
    if label not in (PEM_PUBLIC_LABEL, PEM_PRIVATE_LABEL):
        raise MalformedEncodingError(f"unknown PEM label {label!r}")
    try:
        der = base64.b64decode("".join(match["body"].split()), validate=True)
    except binascii.Error:
        raise MalformedEncodingError("invalid base64 in PEM body") from None
    return decode_cbor(der, expect=PUBLIC if label == PEM_PUBLIC_LABEL else SECRET)


def _classical_secret(classical_key, kind: Kind) -> bytes:
    if isinstance(classical_key, (x25519.X25519PrivateKey, ed25519.Ed25519PrivateKey)):
        want = x25519.X25519PrivateKey if kind is Kind.KEM else ed25519.Ed25519PrivateKey
        if not isinstance(classical_key, want):
            raise MalformedKeyError(f"{type(classical_key).__name__} cannot seed a {kind.value} keypair")
        return classical_key.private_bytes_raw()
    if not isinstance(classical_key, (bytes, bytearray)):
        raise MalformedKeyError(f"classical key must be bytes or a private key, got {type(classical_key).__name__}")
    if len(classical_key) != 32:
        raise MalformedKeyError(f"classical secret key must be 32 bytes, got {len(classical_key)}")
    return bytes(classical_key)


def upgrade_classical(classical_key, kind: Kind | str = Kind.KEM):
    """Pair an existing X25519 (kem) or Ed25519 (sig) secret key with a fresh PQC half.

    The classical half is reused verbatim, so peers that pinned the old public
    key can still recognise it inside the hybrid key.
    """
    kind = Kind(kind)
    secret = _classical_secret(classical_key, kind)
    alg = DEFAULT_KEM if kind is Kind.KEM else DEFAULT_SIG
    suite = lookup_backend(alg)
    _, pqc_sec = suite.pqc.keygen()
    if kind is Kind.KEM:
        return HybridKeyPair.from_secrets(alg, secret, pqc_sec)
    return HybridSigKeyPair.from_secrets(alg, secret, pqc_sec)


def save(obj, path: str | Path) -> Path:
    """Write ``obj`` as binary CBOR (``.chk``) or PEM (``.pem``), chosen by suffix."""
    path = Path(path)
    if path.suffix == ".pem":
        path.write_text(pem_encode(obj))
    else:
        path.write_bytes(encode_cbor(obj))
    return path


def load(path: str | Path, expect: str | None = None):
    path = Path(path)
    data = path.read_bytes()
    if data.lstrip().startswith(b"-----BEGIN"):
        try:
            return pem_decode(data.decode("ascii"))
        except UnicodeDecodeError:
            raise MalformedEncodingError("PEM file is not ASCII") from None
    return decode_cbor(data, expect=expect)
