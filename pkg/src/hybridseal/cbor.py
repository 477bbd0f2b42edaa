"""Strict deterministic CBOR (RFC 8949) for the small value subset the formats need.

Supported: unsigned/negative integers, byte strings, text strings, arrays,
maps, ``true``/``false``/``null``. Encoding always uses definite lengths and
the shortest head; maps keep the caller's key order. The decoder rejects
anything the encoder would not produce (indefinite lengths, non-minimal heads,
tags, floats, duplicate keys, trailing bytes), so ``encode(decode(b)) == b``
for every accepted input.
"""

from __future__ import annotations

from hybridseal.errors import MalformedEncodingError

__all__ = ["dumps", "loads", "MAX_DEPTH"]

MAX_DEPTH = 16

_UINT, _NINT, _BSTR, _TSTR, _ARRAY, _MAP, _TAG, _SIMPLE = range(8)


def _head(major: int, n: int) -> bytes:
    if n < 24:
        return bytes([(major << 5) | n])
    if n < 0x100:
        return bytes([(major << 5) | 24, n])
    if n < 0x10000:
        return bytes([(major << 5) | 25]) + n.to_bytes(2, "big")
    if n < 0x100000000:
        return bytes([(major << 5) | 26]) + n.to_bytes(4, "big")
    if n < 0x10000000000000000:
        return bytes([(major << 5) | 27]) + n.to_bytes(8, "big")
    raise ValueError("integer out of CBOR range")


def _encode(obj, out: bytearray) -> None:
    # bool before int: bool is an int subclass
    if obj is True:
        out.append(0xF5)
    elif obj is False:
        out.append(0xF4)
    elif obj is None:
        out.append(0xF6)
    elif isinstance(obj, int):
        out += _head(_UINT, obj) if obj >= 0 else _head(_NINT, -1 - obj)
    elif isinstance(obj, (bytes, bytearray, memoryview)):
        obj = bytes(obj)
        out += _head(_BSTR, len(obj))
        out += obj
    elif isinstance(obj, str):
        raw = obj.encode("utf-8")
        out += _head(_TSTR, len(raw))
        out += raw
    elif isinstance(obj, (list, tuple)):
        out += _head(_ARRAY, len(obj))
        for item in obj:
            _encode(item, out)
    elif isinstance(obj, dict):
        out += _head(_MAP, len(obj))
        for key, value in obj.items():
            _encode(key, out)
            _encode(value, out)
    else:
        raise TypeError(f"cannot CBOR-encode {type(obj).__name__}")


def dumps(obj) -> bytes:
    out = bytearray()
    _encode(obj, out)
    return bytes(out)


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise MalformedEncodingError("truncated CBOR data")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def head(self) -> tuple[int, int]:
        ib = self.take(1)[0]
        major, ai = ib >> 5, ib & 0x1F
        if major == _SIMPLE:
            return major, ai
        if ai < 24:
            return major, ai
        if ai > 27:
            raise MalformedEncodingError(f"indefinite or reserved length (initial byte 0x{ib:02x})")
        width = 1 << (ai - 24)
        n = int.from_bytes(self.take(width), "big")
        minimum = (24, 0x100, 0x10000, 0x100000000)[ai - 24]
        if n < minimum:
            raise MalformedEncodingError("non-minimal CBOR integer encoding")
        return major, n

    def item(self, depth: int):
        if depth > MAX_DEPTH:
            raise MalformedEncodingError("CBOR nesting too deep")
        major, n = self.head()
        if major == _UINT:
            return n
        if major == _NINT:
            return -1 - n
        if major == _BSTR:
            return self.take(n)
        if major == _TSTR:
            try:
                return self.take(n).decode("utf-8")
            except UnicodeDecodeError:
                raise MalformedEncodingError("invalid UTF-8 in text string") from None
        if major == _ARRAY:
            if n > len(self.data) - self.pos:
                raise MalformedEncodingError("array length exceeds input")
            return [self.item(depth + 1) for _ in range(n)]
        if major == _MAP:
            if 2 * n > len(self.data) - self.pos:
                raise MalformedEncodingError("map length exceeds input")
            result = {}
            for _ in range(n):
                key = self.item(depth + 1)
                if not isinstance(key, (str, int)) or isinstance(key, bool):
                    raise MalformedEncodingError("map keys must be text or integers")
                if key in result:
                    raise MalformedEncodingError(f"duplicate map key {key!r}")
                result[key] = self.item(depth + 1)
            return result
        if major == _TAG:
            raise MalformedEncodingError("CBOR tags are not accepted")
        # major 7
        if n == 20:
            return False
        if n == 21:
            return True
        if n == 22:
            return None
        raise MalformedEncodingError(f"unsupported CBOR simple/float value {n}")


def loads(data: bytes):
    """Decode exactly one CBOR item; raises :class:`MalformedEncodingError` on anything else."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise MalformedEncodingError(f"expected bytes, got {type(data).__name__}")
    reader = _Reader(bytes(data))
    obj = reader.item(0)
    if reader.pos != len(reader.data):
        raise MalformedEncodingError(f"{len(reader.data) - reader.pos} trailing bytes after CBOR item")
    return obj
