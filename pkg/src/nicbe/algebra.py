"""BLS12-381 group algebra with operation accounting.

Elements are written multiplicatively to match the protocol notation:
``a * b`` is the group operation, ``a ** s`` exponentiation and
``a.inverse()`` inversion. The pairing is ``e: G1 x G2 -> GT``.

Every group operation bumps the counters of the active :func:`count_ops`
region, which is how the benchmark harness measures operation counts.
"""

from __future__ import annotations

import contextlib
import contextvars
import hashlib
import secrets
from dataclasses import dataclass, fields
from typing import Iterator, Sequence

import py_arkworks_bls12381 as _bls

from .errors import CorruptFileError, ParameterError

#: Prime order of G1, G2 and GT.
Q = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001

SCALAR_BYTES = 32
G1_BYTES = 48
G2_BYTES = 96
GT_BYTES = 576


@dataclass
class OpCounters:
    """Operation counts for a measured region.

    ``g1_*`` fields cover both source groups (G1 and G2); target-group work
    is counted separately.
    """

    pairings: int = 0
    g1_exponentiations: int = 0
    g1_multiplications: int = 0
    inversions: int = 0
    gt_exponentiations: int = 0
    gt_multiplications: int = 0

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_active: contextvars.ContextVar[OpCounters | None] = contextvars.ContextVar("nicbe_ops", default=None)


@contextlib.contextmanager
def count_ops() -> Iterator[OpCounters]:
    """Count group operations performed inside the ``with`` block."""
    counters = OpCounters()
    token = _active.set(counters)
    try:
        yield counters
    finally:
        _active.reset(token)


def _bump(name: str, k: int = 1) -> None:
    c = _active.get()
    if c is not None:
        setattr(c, name, getattr(c, name) + k)


# -- scalars -----------------------------------------------------------------


def random_scalar(rng=None) -> int:
    """Uniform element of Z_q^* (never zero).

    ``rng`` is anything with ``randrange`` (``random.Random(seed)`` for
    reproducible tests); the default is the OS CSPRNG.
    """
    if rng is None:
        return secrets.randbelow(Q - 1) + 1
    return rng.randrange(1, Q)


def scalar_to_bytes(s: int) -> bytes:
    return (s % Q).to_bytes(SCALAR_BYTES, "big")


def scalar_from_bytes(data: bytes) -> int:
    if len(data) != SCALAR_BYTES:
        raise CorruptFileError(f"scalar must be {SCALAR_BYTES} bytes, got {len(data)}")
    s = int.from_bytes(data, "big")
    if s >= Q:
        raise CorruptFileError("scalar is not reduced modulo the group order")
    return s


def _sc(s: int) -> _bls.Scalar:
    return _bls.Scalar(s % Q)


# -- source groups -----------------------------------------------------------


class _SourceElem:
    __slots__ = ("_p", "_enc")
    _backend: type
    _size: int

    def __init__(self, point) -> None:
        self._p = point
        self._enc: bytes | None = None

    @classmethod
    def generator(cls):
        return cls(cls._backend())

    @classmethod
    def identity(cls):
        return cls(cls._backend.identity())

    @classmethod
    def from_bytes(cls, data: bytes):
        if len(data) != cls._size:
            raise CorruptFileError(f"{cls.__name__} encoding must be {cls._size} bytes, got {len(data)}")
        try:
            point = cls._backend.from_compressed_bytes(bytes(data))
        except (ValueError, TypeError) as exc:
            raise CorruptFileError(f"invalid {cls.__name__} point: {exc}") from None
        if bytes(point.to_compressed_bytes()) != bytes(data):
            # the backend tolerates junk flag/padding bits; only the canonical form is accepted
            raise CorruptFileError(f"non-canonical {cls.__name__} encoding")
        elem = cls(point)
        elem._enc = bytes(data)
        return elem

    def to_bytes(self) -> bytes:
        if self._enc is None:
            self._enc = bytes(self._p.to_compressed_bytes())
        return self._enc

    def __mul__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        _bump("g1_multiplications")
        return type(self)(self._p + other._p)

    def __pow__(self, s: int):
        _bump("g1_exponentiations")
        return type(self)(self._p * _sc(s))

    def inverse(self):
        _bump("inversions")
        return type(self)(-self._p)

    def __truediv__(self, other):
        return self * other.inverse()

    def is_identity(self) -> bool:
        return self._p == self._backend.identity()

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self._p == other._p

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_bytes().hex()[:16]}…)"

    @classmethod
    def msm(cls, elems: Sequence, exps: Sequence[int]):
        """Multi-exponentiation prod(elems[i] ** exps[i]) (variable time, public inputs only)."""
        if len(elems) != len(exps):
            raise ParameterError("msm: length mismatch")
        if not elems:
            return cls.identity()
        _bump("g1_exponentiations", len(elems))
        _bump("g1_multiplications", len(elems) - 1)
        return cls(cls._backend.multiexp_unchecked([e._p for e in elems], [_sc(x) for x in exps]))


class G1(_SourceElem):
    """Element of the first source group (48-byte compressed encoding)."""

    __slots__ = ()
    _backend = _bls.G1Point
    _size = G1_BYTES


class G2(_SourceElem):
    """Element of the second source group (96-byte compressed encoding)."""

    __slots__ = ()
    _backend = _bls.G2Point
    _size = G2_BYTES


# -- target group ------------------------------------------------------------


class GT:
    __slots__ = ("_v",)

    def __init__(self, value) -> None:
        self._v = value

    @classmethod
    def identity(cls) -> "GT":
        return cls(_bls.GT.one())

    def __mul__(self, other: "GT") -> "GT":
        if not isinstance(other, GT):
            return NotImplemented
        _bump("gt_multiplications")
        return GT(self._v * other._v)

    def __pow__(self, s: int) -> "GT":
        # Montgomery ladder over a fixed 255-bit schedule; the backend has no GT power.
        _bump("gt_exponentiations")
        s %= Q
        r0, r1 = _bls.GT.one(), self._v
        for i in range(Q.bit_length() - 1, -1, -1):
            if (s >> i) & 1:
                r0, r1 = r0 * r1, r1 * r1
            else:
                r0, r1 = r0 * r0, r0 * r1
        return GT(r0)

    def inverse(self) -> "GT":
        _bump("inversions")
        token = _active.set(None)
        try:
            return self ** (Q - 1)
        finally:
            _active.reset(token)

    def is_identity(self) -> bool:
        return self._v == _bls.GT.one()

    def to_bytes(self) -> bytes:
        return bytes.fromhex(str(self._v))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GT):
            return NotImplemented
        return self._v == other._v

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def __repr__(self) -> str:
        return f"GT({self.to_bytes().hex()[:16]}…)"


def pairing(a: G1, b: G2) -> GT:
    _bump("pairings")
    return GT(_bls.GT.pairing(a._p, b._p))


def pairing_product(pairs: Sequence[tuple[G1, G2]]) -> GT:
    """prod e(a_i, b_i) with a single final exponentiation."""
    if not pairs:
        return GT.identity()
    _bump("pairings", len(pairs))
    return GT(_bls.GT.multi_pairing([a._p for a, _ in pairs], [b._p for _, b in pairs]))


def multi_combine(elems: Sequence, signs: Sequence[int] | None = None):
    """Signed product of source-group elements, applied left to right.

    ``signs[i] == -1`` multiplies by the inverse of ``elems[i]``. The empty
    product is the identity of ``G1``.
    """
    if signs is None:
        signs = [1] * len(elems)
    if len(signs) != len(elems):
        raise ParameterError("multi_combine: elems and signs differ in length")
    if not elems:
        return G1.identity()
    acc = None
    for e, s in zip(elems, signs):
        if s not in (1, -1):
            raise ParameterError(f"multi_combine: sign must be +1 or -1, got {s}")
        term = e if s == 1 else e.inverse()
        acc = term if acc is None else acc * term
    return acc


def batch_coefficients(transcript: bytes, count: int) -> list[int]:
    """Deterministic 128-bit coefficients for small-exponent batch verification.

    Derived from a hash of everything being verified, so a forger cannot
    choose errors that cancel under the coefficients.
    """
    seed = hashlib.sha256(b"nicbe/batch-verify/v1" + transcript).digest()
    out = []
    for i in range(count):
        block = hashlib.sha256(seed + i.to_bytes(4, "big")).digest()
        out.append(int.from_bytes(block[:16], "big") | 1)
    return out
