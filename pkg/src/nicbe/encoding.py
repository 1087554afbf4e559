"""Binary codec shared by every ``*.nicbe`` file.

Layout of every file: ``b"NICB"``, one version byte, one kind byte, body.
Integers are big-endian; sequences carry a 4-byte big-endian count.
"""

from __future__ import annotations

import struct
from enum import IntEnum

from .algebra import G1, G2
from .errors import CorruptFileError

MAGIC = b"NICB"
FORMAT_VERSION = 1

# Hard cap on any decoded count; keeps a corrupted length field from
# triggering a huge allocation.
MAX_COUNT = 1 << 20


class Kind(IntEnum):
    PARAMS = 1
    PUBLIC_KEY = 2
    SECRET_KEY = 3
    REGISTRY = 4
    GROUP = 5
    MEMBER = 6
    MESSAGE = 7
    TA_PUBLIC = 8
    TA_SECRET = 9


class Writer:
    def __init__(self, kind: Kind | None = None) -> None:
        self._buf = bytearray()
        if kind is not None:
            self._buf += MAGIC + bytes([FORMAT_VERSION, int(kind)])

    def u8(self, v: int) -> "Writer":
        self._buf += struct.pack(">B", v)
        return self

    def u16(self, v: int) -> "Writer":
        self._buf += struct.pack(">H", v)
        return self

    def u32(self, v: int) -> "Writer":
        self._buf += struct.pack(">I", v)
        return self

    def raw(self, data: bytes) -> "Writer":
        self._buf += data
        return self

    def blob(self, data: bytes) -> "Writer":
        return self.u32(len(data)).raw(data)

    def elem(self, e) -> "Writer":
        return self.raw(e.to_bytes())

    def elems(self, seq) -> "Writer":
        self.u32(len(seq))
        for e in seq:
            self.elem(e)
        return self

    def bitmap(self, bits: set[int] | frozenset[int], n: int) -> "Writer":
        """Slots are 1-based; slot i is bit (i-1), LSB-first within each byte."""
        out = bytearray((n + 7) // 8)
        for i in bits:
            out[(i - 1) // 8] |= 1 << ((i - 1) % 8)
        return self.raw(bytes(out))

    def getvalue(self) -> bytes:
        return bytes(self._buf)


class Reader:
    def __init__(self, data: bytes, kind: Kind | None = None) -> None:
        self._data = memoryview(bytes(data))
        self._pos = 0
        if kind is not None:
            magic = self.raw(4)
            if magic != MAGIC:
                raise CorruptFileError("bad magic, not a nicbe file")
            version = self.u8()
            if version != FORMAT_VERSION:
                raise CorruptFileError(f"unsupported format version {version}")
            got = self.u8()
            if got != int(kind):
                raise CorruptFileError(f"expected {kind.name} file, found kind {got}")

    def raw(self, k: int) -> bytes:
        if k < 0 or self._pos + k > len(self._data):
            raise CorruptFileError("truncated data")
        out = bytes(self._data[self._pos : self._pos + k])
        self._pos += k
        return out

    def u8(self) -> int:
        return self.raw(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.raw(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.raw(4))[0]

    def count(self) -> int:
        c = self.u32()
        if c > MAX_COUNT:
            raise CorruptFileError(f"count {c} exceeds limit")
        return c

    def blob(self) -> bytes:
        return self.raw(self.count())

    def g1(self) -> G1:
        return G1.from_bytes(self.raw(G1._size))

    def g2(self) -> G2:
        return G2.from_bytes(self.raw(G2._size))

    def g1s(self) -> list[G1]:
        return [self.g1() for _ in range(self.count())]

    def g2s(self) -> list[G2]:
        return [self.g2() for _ in range(self.count())]

    def bitmap(self, n: int) -> frozenset[int]:
        data = self.raw((n + 7) // 8)
        bits = set()
        for i in range(1, n + 1):
            if data[(i - 1) // 8] >> ((i - 1) % 8) & 1:
                bits.add(i)
        # padding bits past n must be clear
        for i in range(n + 1, 8 * len(data) + 1):
            if data[(i - 1) // 8] >> ((i - 1) % 8) & 1:
                raise CorruptFileError("nonzero padding bits in bitmap")
        return frozenset(bits)

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def done(self) -> None:
        if self._pos != len(self._data):
            raise CorruptFileError(f"{len(self._data) - self._pos} trailing bytes")
