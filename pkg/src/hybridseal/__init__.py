"""Hybrid-by-default post-quantum cryptography with a statistical benchmark harness."""

__version__ = "0.1.0"

from hybridseal.errors import (  # noqa: E402
    AuthenticationError,
    DowngradeRefusedError,
    HybridSealError,
    MalformedCiphertextError,
    MalformedEncodingError,
    MalformedKeyError,
    MalformedSignatureError,
    UnsupportedAlgorithmError,
    UnsupportedVersionError,
)
from hybridseal.kem import (  # noqa: E402
    HybridCiphertext,
    HybridKEM,
    HybridKeyPair,
    HybridPublicKey,
    SharedSecret,
)
from hybridseal.primitives import DEFAULT_KEM, DEFAULT_SIG, AlgorithmId  # noqa: E402
from hybridseal.sign import HybridSign, HybridSignature, HybridSigKeyPair, HybridSigPublicKey  # noqa: E402

__all__ = [
    "__version__",
    "AlgorithmId",
    "DEFAULT_KEM",
    "DEFAULT_SIG",
    "HybridKEM",
    "HybridKeyPair",
    "HybridPublicKey",
    "HybridCiphertext",
    "SharedSecret",
    "HybridSign",
    "HybridSigKeyPair",
    "HybridSigPublicKey",
    "HybridSignature",
    "HybridSealError",
    "AuthenticationError",
    "DowngradeRefusedError",
    "MalformedCiphertextError",
    "MalformedEncodingError",
    "MalformedKeyError",
    "MalformedSignatureError",
    "UnsupportedAlgorithmError",
    "UnsupportedVersionError",
]
