"""Group key derivation and non-interactive join/leave updates.

Every function here is a pure transition old state -> new state. Public
group state lives in :class:`GroupInfo`; each member keeps a private
:class:`MemberInfo`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .algebra import G1, G2, multi_combine, pairing_product
from .encoding import Kind, Reader, Writer
from .errors import (
    ConsistencyError,
    CorruptFileError,
    InvalidKeyError,
    JoinAbortError,
    MembershipError,
    ParameterError,
    StaleRoundError,
)
from .params import SystemParams
from .registry import MemberPublicKey, MemberSecretKey, verify_public_key

GROUP_ID_BYTES = 16


@dataclass(frozen=True)
class GroupEncryptionKey:
    Y1: G2
    Y2: G2


@dataclass(frozen=True)
class GroupInfo:
    """Public record of one group at one session round.

    ``st`` is the set of occupied slots (the n-bit occupancy string, see
    :meth:`st_bits`); ``delta`` maps each occupied slot to its user index.
    The group index ``pi`` equals the placeholder tuple index ``gamma``.
    """

    pi: int
    id: bytes
    round: int
    gamma: int
    n: int
    st: frozenset[int]
    omega: GroupEncryptionKey
    delta: dict[int, int]

    def __post_init__(self) -> None:
        if set(self.delta) != set(self.st):
            raise ParameterError("occupancy string and member map disagree")
        if any(not 1 <= i <= self.n for i in self.st):
            raise ParameterError("occupied slot outside [1, n]")

    def st_bits(self) -> str:
        return "".join("1" if i in self.st else "0" for i in range(1, self.n + 1))

    def unoccupied(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1)) - self.st

    def to_bytes(self) -> bytes:
        w = Writer(Kind.GROUP).u32(self.pi).raw(self.id).u32(self.round).u32(self.gamma).u32(self.n)
        w.bitmap(self.st, self.n).elem(self.omega.Y1).elem(self.omega.Y2)
        w.u32(len(self.delta))
        for slot in sorted(self.delta):
            w.u32(slot).u32(self.delta[slot])
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "GroupInfo":
        pi, gid, rnd, gamma, n = r.u32(), r.raw(GROUP_ID_BYTES), r.u32(), r.u32(), r.u32()
        if not 2 <= n <= 4096:
            raise CorruptFileError(f"implausible group size {n}")
        st = r.bitmap(n)
        omega = GroupEncryptionKey(r.g2(), r.g2())
        delta = {}
        for _ in range(r.count()):
            slot, user = r.u32(), r.u32()
            if slot in delta:
                raise CorruptFileError(f"slot {slot} listed twice")
            delta[slot] = user
        try:
            return cls(pi, gid, rnd, gamma, n, st, omega, delta)
        except ParameterError as exc:
            raise CorruptFileError(str(exc)) from None

    @classmethod
    def from_bytes(cls, data: bytes) -> "GroupInfo":
        r = Reader(data, Kind.GROUP)
        g = cls.read(r)
        r.done()
        return g


@dataclass(frozen=True)
class MemberInfo:
    """Private per-member state: the helper array dk̂_1..dk̂_n and d_i."""

    group_id: bytes
    round: int
    slot: int
    dk_hat: tuple[G1, ...]
    d: G1

    def to_bytes(self) -> bytes:
        w = Writer(Kind.MEMBER).raw(self.group_id).u32(self.round).u32(self.slot)
        return w.elems(self.dk_hat).elem(self.d).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MemberInfo":
        r = Reader(data, Kind.MEMBER)
        gid, rnd, slot = r.raw(GROUP_ID_BYTES), r.u32(), r.u32()
        dk_hat = tuple(r.g1s())
        d = r.g1()
        r.done()
        if not 1 <= slot <= len(dk_hat):
            raise CorruptFileError(f"member slot {slot} outside [1, {len(dk_hat)}]")
        return cls(gid, rnd, slot, dk_hat, d)


@dataclass(frozen=True)
class UpdateRecord:
    """Public description of one membership change; ``round`` is the new round."""

    round: int
    op: str
    slot: int
    user: int

    def write(self, w: Writer) -> None:
        w.u32(self.round).u8({"join": 1, "leave": 2}[self.op]).u32(self.slot).u32(self.user)

    @classmethod
    def read(cls, r: Reader) -> "UpdateRecord":
        rnd, op, slot, user = r.u32(), r.u8(), r.u32(), r.u32()
        if op not in (1, 2):
            raise CorruptFileError(f"unknown update kind {op}")
        return cls(rnd, "join" if op == 1 else "leave", slot, user)


def verify_decryption_key(params: SystemParams, g_info: GroupInfo, slot: int, d: G1) -> bool:
    """Check e(d, ĝ) == e(h_i, Y1)·e(u, Y2)."""
    if not 1 <= slot <= params.n:
        return False
    return pairing_product(
        [(d, params.g_hat), (params.h(slot).inverse(), g_info.omega.Y1), (params.u.inverse(), g_info.omega.Y2)]
    ).is_identity()


def derive_public_state(params: SystemParams, gamma: int, members: Mapping[int, MemberPublicKey]) -> tuple[GroupEncryptionKey, tuple[G1, ...]]:
    """Ω and the helper array for occupancy ``members``; real keys fill occupied slots, placeholders the rest."""
    tup = params.tuple_for(gamma)
    slots = list(params.slots())
    Y1 = multi_combine([members[i].A if i in members else tup.a(i) for i in slots])
    Y2 = multi_combine([members[i].B if i in members else tup.b(i) for i in slots])
    dk_hat = tuple(
        multi_combine([members[j].K[i] if j in members else tup.k(j, i) for j in slots if j != i]) for i in slots
    )
    return GroupEncryptionKey(Y1, Y2), dk_hat


def key_derive(
    params: SystemParams,
    group_id: bytes,
    gamma: int,
    members: Mapping[int, MemberPublicKey],
    my_slot: int,
    my_sk: MemberSecretKey,
    users: Mapping[int, int] | None = None,
    round: int = 1,
    verify_keys: bool = True,
) -> tuple[GroupInfo, MemberInfo]:
    """Derive the group encryption key and this member's decryption key.

    ``members`` maps each occupied slot to its public key; any subset of
    slots may be occupied. ``users`` maps slots to user indices (defaults
    to the slot numbers). Aborts with :class:`ConsistencyError` when the
    derived key fails the pairing check.
    """
    if len(group_id) != GROUP_ID_BYTES:
        raise ParameterError(f"group id must be {GROUP_ID_BYTES} bytes")
    if my_slot not in members:
        raise MembershipError(f"slot {my_slot} is not among the group members")
    if my_sk.slot != my_slot:
        raise ParameterError(f"secret key is for slot {my_sk.slot}, not {my_slot}")
    for slot, pk in members.items():
        if not 1 <= slot <= params.n or pk.slot != slot:
            raise ParameterError(f"public key for slot {pk.slot} placed at slot {slot}")
        if verify_keys and not verify_public_key(params, pk):
            raise InvalidKeyError(f"public key at slot {slot} fails verification")
    users = dict(users) if users is not None else {s: s for s in members}
    if set(users) != set(members):
        raise ParameterError("user map must cover exactly the member slots")

    omega, dk_hat = derive_public_state(params, gamma, members)
    d = dk_hat[my_slot - 1] * my_sk.SK
    g_info = GroupInfo(gamma, bytes(group_id), round, gamma, params.n, frozenset(members), omega, users)
    if not verify_decryption_key(params, g_info, my_slot, d):
        raise ConsistencyError(f"derived decryption key for slot {my_slot} fails the consistency check")
    return g_info, MemberInfo(bytes(group_id), round, my_slot, dk_hat, d)


# -- updates ----------------------------------------------------------------


def group_join(params: SystemParams, g_info: GroupInfo, new_pk: MemberPublicKey, new_user: int, verify_key: bool = True) -> tuple[GroupInfo, UpdateRecord]:
    """Public half of a join: update Ω, st, Δ and the round."""
    I = new_pk.slot
    if not 1 <= I <= params.n:
        raise ParameterError(f"slot {I} outside [1, {params.n}]")
    if I in g_info.st or len(g_info.st) + 1 > params.n:
        raise JoinAbortError(f"cannot join at slot {I}: " + ("slot occupied" if I in g_info.st else "group full"))
    if new_user in g_info.delta.values():
        raise JoinAbortError(f"user {new_user} is already a member")
    if verify_key and not verify_public_key(params, new_pk):
        raise InvalidKeyError(f"public key for slot {I} fails verification")
    tup = params.tuple_for(g_info.gamma)
    omega = GroupEncryptionKey(
        g_info.omega.Y1 * new_pk.A * tup.a(I).inverse(),
        g_info.omega.Y2 * new_pk.B * tup.b(I).inverse(),
    )
    rnd = g_info.round + 1
    g_new = replace(g_info, round=rnd, st=g_info.st | {I}, omega=omega, delta={**g_info.delta, I: new_user})
    return g_new, UpdateRecord(rnd, "join", I, new_user)


def group_leave(params: SystemParams, g_info: GroupInfo, leaving_pk: MemberPublicKey) -> tuple[GroupInfo, UpdateRecord]:
    """Public half of a leave."""
    J = leaving_pk.slot
    if J not in g_info.st:
        raise MembershipError(f"slot {J} is not occupied")
    tup = params.tuple_for(g_info.gamma)
    omega = GroupEncryptionKey(
        g_info.omega.Y1 * leaving_pk.A.inverse() * tup.a(J),
        g_info.omega.Y2 * leaving_pk.B.inverse() * tup.b(J),
    )
    rnd = g_info.round + 1
    delta = {s: u for s, u in g_info.delta.items() if s != J}
    g_new = replace(g_info, round=rnd, st=g_info.st - {J}, omega=omega, delta=delta)
    return g_new, UpdateRecord(rnd, "leave", J, g_info.delta[J])


def update_factors(params: SystemParams, gamma: int, record: UpdateRecord, pk: MemberPublicKey) -> dict[int, G1]:
    """Per-slot factors that move the helper array across one update.

    Join at I: K_Il · K_Ilγ^-1. Leave at J: K_Jlγ · K_Jl^-1. Slot
    ``record.slot`` itself has no factor.
    """
    if pk.slot != record.slot:
        raise ParameterError(f"public key is for slot {pk.slot}, update concerns slot {record.slot}")
    tup = params.tuple_for(gamma)
    s = record.slot
    if record.op == "join":
        return {l: pk.K[l] * tup.k(s, l).inverse() for l in params.slots() if l != s}
    return {l: tup.k(s, l) * pk.K[l].inverse() for l in params.slots() if l != s}


def _apply(m_info: MemberInfo, factors: Mapping[int, G1], rnd: int) -> MemberInfo:
    dk_hat = tuple(v * factors[l] if l in factors else v for l, v in enumerate(m_info.dk_hat, 1))
    return replace(m_info, round=rnd, dk_hat=dk_hat, d=m_info.d * factors[m_info.slot])


def update_member(
    params: SystemParams,
    gamma: int,
    m_info: MemberInfo,
    record: UpdateRecord,
    pk: MemberPublicKey,
    check_against: GroupInfo | None = None,
) -> MemberInfo:
    """Member-side half of an update, computed locally from public values.

    When ``check_against`` is given the new d_i must pass the consistency
    check against it.
    """
    if m_info.round + 1 != record.round:
        raise StaleRoundError(f"member state is at round {m_info.round}, update produces round {record.round}")
    if m_info.slot == record.slot:
        raise MembershipError(f"slot {record.slot} cannot apply its own {record.op}")
    new = _apply(m_info, update_factors(params, gamma, record, pk), record.round)
    if check_against is not None and not verify_decryption_key(params, check_against, new.slot, new.d):
        raise ConsistencyError(f"updated decryption key for slot {new.slot} fails the consistency check")
    return new


def _check_members(g_info: GroupInfo, member_infos: Mapping[int, MemberInfo]) -> None:
    for slot, m in member_infos.items():
        if m.slot != slot or slot not in g_info.st:
            raise MembershipError(f"member state for slot {slot} does not belong to this group")
        if m.round != g_info.round or m.group_id != g_info.id:
            raise StaleRoundError(f"member state for slot {slot} is at round {m.round}, group at {g_info.round}")


def join(
    params: SystemParams,
    g_info: GroupInfo,
    member_infos: Mapping[int, MemberInfo],
    new_pk: MemberPublicKey,
    new_user: int,
) -> tuple[GroupInfo, dict[int, MemberInfo], UpdateRecord]:
    """Add ``new_pk`` to the group and update every existing member.

    The newcomer's own state comes from :func:`key_derive` over the enlarged
    membership with ``round`` set to the returned group's round.
    """
    _check_members(g_info, member_infos)
    g_new, record = group_join(params, g_info, new_pk, new_user)
    factors = update_factors(params, g_info.gamma, record, new_pk)
    out = {}
    for slot, m in member_infos.items():
        new = _apply(m, factors, record.round)
        if not verify_decryption_key(params, g_new, slot, new.d):
            raise ConsistencyError(f"updated decryption key for slot {slot} fails the consistency check")
        out[slot] = new
    return g_new, out, record


def leave(
    params: SystemParams,
    g_info: GroupInfo,
    member_infos: Mapping[int, MemberInfo],
    leaving_slot: int,
    leaving_pk: MemberPublicKey,
) -> tuple[GroupInfo, dict[int, MemberInfo], UpdateRecord]:
    """Remove the member at ``leaving_slot``; remaining members are updated."""
    if leaving_pk.slot != leaving_slot:
        raise ParameterError(f"public key is for slot {leaving_pk.slot}, not {leaving_slot}")
    _check_members(g_info, member_infos)
    g_new, record = group_leave(params, g_info, leaving_pk)
    factors = update_factors(params, g_info.gamma, record, leaving_pk)
    out = {}
    for slot, m in member_infos.items():
        if slot == leaving_slot:
            continue
        new = _apply(m, factors, record.round)
        if not verify_decryption_key(params, g_new, slot, new.d):
            raise ConsistencyError(f"updated decryption key for slot {slot} fails the consistency check")
        out[slot] = new
    return g_new, out, record
