"""Exception hierarchy shared by every hybridseal module."""


class HybridSealError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(HybridSealError, ValueError):
    pass


class UnsupportedAlgorithmError(HybridSealError):
    def __init__(self, name, registered=()):
        self.name = name
        self.registered = tuple(registered)
        msg = f"unsupported algorithm {name!r}"
        if self.registered:
            msg += f"; registered: {', '.join(self.registered)}"
        super().__init__(msg)


class MalformedKeyError(HybridSealError, ValueError):
    pass


class MalformedCiphertextError(HybridSealError, ValueError):
    pass


class MalformedSignatureError(HybridSealError, ValueError):
    pass


class MalformedEncodingError(HybridSealError, ValueError):
    pass


class UnsupportedVersionError(HybridSealError):
    def __init__(self, version):
        self.version = version
        super().__init__(f"unsupported format version {version}")


class AuthenticationError(HybridSealError):
    """AEAD tag check failed. Raised for tampering and wrong keys alike."""


class DowngradeRefusedError(HybridSealError):
    """Classical-only operation attempted without the explicit confirmation flag."""


class InsufficientSamplesError(HybridSealError, ValueError):
    pass


class DegenerateVarianceError(HybridSealError, ValueError):
    pass
