"""Broadcast encryption to a chosen subset of group members.

``encrypt``/``decrypt`` form the KEM: a two-element header and a session key
in GT. ``seal``/``open_sealed`` wrap it with HKDF-SHA256 and
ChaCha20-Poly1305 for actual payloads.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Iterable

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .algebra import G2, GT, pairing, pairing_product, random_scalar
from .encoding import Kind, Reader, Writer
from .errors import AuthenticationError, CorruptFileError, MembershipError, NotARecipientError, ParameterError, StaleRoundError
from .group import GROUP_ID_BYTES, GroupInfo, MemberInfo
from .params import SystemParams

DEM_TAG = b"nicbe/dem/hkdf-sha256/chacha20poly1305/v1"
NONCE_BYTES = 12


@dataclass(frozen=True)
class BroadcastHeader:
    """Two group elements (C1 = ĝ^ρ, C2 = Ŷ1^ρ) plus routing metadata."""

    group_id: bytes
    round: int
    n: int
    recipients: frozenset[int]
    C1: G2
    C2: G2

    def crypto_bytes(self) -> bytes:
        return self.C1.to_bytes() + self.C2.to_bytes()

    def metadata_bytes(self) -> bytes:
        return Writer().raw(self.group_id).u32(self.round).u16(self.n).bitmap(self.recipients, self.n).getvalue()

    def to_bytes(self) -> bytes:
        return self.metadata_bytes() + self.crypto_bytes()

    @classmethod
    def read(cls, r: Reader) -> "BroadcastHeader":
        gid, rnd, n = r.raw(GROUP_ID_BYTES), r.u32(), r.u16()
        if n < 2:
            raise CorruptFileError(f"implausible group size {n}")
        recipients = r.bitmap(n)
        if not recipients:
            raise CorruptFileError("header names no recipients")
        return cls(gid, rnd, n, recipients, r.g2(), r.g2())

    @classmethod
    def from_bytes(cls, data: bytes) -> "BroadcastHeader":
        r = Reader(data)
        h = cls.read(r)
        r.done()
        return h


@dataclass(frozen=True)
class SealedMessage:
    header: BroadcastHeader
    nonce: bytes
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        return Writer(Kind.MESSAGE).raw(self.header.to_bytes()).raw(self.nonce).blob(self.ciphertext).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedMessage":
        r = Reader(data, Kind.MESSAGE)
        header = BroadcastHeader.read(r)
        nonce = r.raw(NONCE_BYTES)
        ct = r.blob()
        r.done()
        return cls(header, nonce, ct)


def _split(g_info: GroupInfo, recipients: Iterable[int]) -> tuple[frozenset[int], frozenset[int]]:
    U = frozenset(recipients)
    if not U:
        raise ParameterError("recipient set is empty")
    if not U <= g_info.st:
        raise MembershipError(f"slots {sorted(U - g_info.st)} are not group members")
    return U, g_info.st - U


def encrypt(
    params: SystemParams,
    g_info: GroupInfo,
    recipients: Iterable[int],
    rng=None,
    rho: int | None = None,
    expected_round: int | None = None,
) -> tuple[BroadcastHeader, GT]:
    """Produce a header and session key for recipient slots ``recipients``.

    Anyone holding the public ``g_info`` can call this. ``rho`` pins the
    encryption randomness (tests only).
    """
    if expected_round is not None and expected_round != g_info.round:
        raise StaleRoundError(f"group is at round {g_info.round}, sender expected {expected_round}")
    U, excluded = _split(g_info, recipients)
    tup = params.tuple_for(g_info.gamma)
    Y1_hat, Y2_hat = g_info.omega.Y1, g_info.omega.Y2
    for i in sorted(excluded):
        Y1_hat = Y1_hat * tup.a(i)
    for i in sorted(excluded):
        Y2_hat = Y2_hat * tup.b(i)
    if rho is None:
        rho = random_scalar(rng)
    C1 = params.g_hat ** rho
    C2 = Y1_hat ** rho
    k = pairing(params.u, Y2_hat) ** rho
    return BroadcastHeader(g_info.id, g_info.round, g_info.n, U, C1, C2), k


def decrypt(params: SystemParams, g_info: GroupInfo, header: BroadcastHeader, my_slot: int, m_info: MemberInfo) -> GT:
    """Recover the session key as recipient ``my_slot``."""
    if my_slot not in header.recipients:
        raise NotARecipientError(f"slot {my_slot} is not a recipient of this header")
    if header.group_id != g_info.id or m_info.group_id != g_info.id:
        raise ParameterError("header, group and member state refer to different groups")
    if m_info.slot != my_slot:
        raise ParameterError(f"member state is for slot {m_info.slot}, not {my_slot}")
    if header.round != g_info.round or m_info.round != header.round:
        raise StaleRoundError(
            f"header round {header.round}, group round {g_info.round}, member state round {m_info.round}"
        )
    U, excluded = _split(g_info, header.recipients)
    tup = params.tuple_for(g_info.gamma)
    d_hat = m_info.d
    for l in sorted(excluded):
        d_hat = d_hat * tup.k(l, my_slot)
    return pairing_product([(d_hat, header.C1), (params.h(my_slot).inverse(), header.C2)])


def derive_dem_key(k: GT, header: BroadcastHeader) -> bytes:
    info = DEM_TAG + header.metadata_bytes()
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=info).derive(k.to_bytes())


def session_key_digest(k: GT) -> str:
    return hashlib.sha256(k.to_bytes()).hexdigest()


def wrap(header: BroadcastHeader, k: GT, plaintext: bytes, rng=None) -> SealedMessage:
    """DEM half of :func:`seal`: encrypt ``plaintext`` under a key derived from ``k``."""
    nonce = rng.randbytes(NONCE_BYTES) if rng is not None else os.urandom(NONCE_BYTES)
    ct = ChaCha20Poly1305(derive_dem_key(k, header)).encrypt(nonce, plaintext, header.to_bytes())
    return SealedMessage(header, nonce, ct)


def unwrap(sealed: SealedMessage, k: GT) -> bytes:
    try:
        return ChaCha20Poly1305(derive_dem_key(k, sealed.header)).decrypt(sealed.nonce, sealed.ciphertext, sealed.header.to_bytes())
    except InvalidTag:
        raise AuthenticationError("message authentication failed") from None


def seal(params: SystemParams, g_info: GroupInfo, recipients: Iterable[int], plaintext: bytes, rng=None, rho: int | None = None) -> SealedMessage:
    header, k = encrypt(params, g_info, recipients, rng, rho)
    return wrap(header, k, plaintext, rng)


def open_sealed(params: SystemParams, g_info: GroupInfo, sealed: SealedMessage, my_slot: int, m_info: MemberInfo) -> bytes:
    """Decrypt a sealed payload; raises :class:`AuthenticationError` on any tampering."""
    return unwrap(sealed, decrypt(params, g_info, sealed.header, my_slot, m_info))
