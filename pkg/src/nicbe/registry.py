"""Key registration at the trusted authority (TA).

The TA issues each party a long-term key pair bound to a group slot and
signs the binding ``(user index, tuple index, public key)`` with an Ed25519
key; the signed record stands in for a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from .algebra import G1, G2, pairing_product, random_scalar
from .encoding import Kind, Reader, Writer
from .errors import AuthenticationError, CorruptFileError, NotFoundError, ParameterError, SlotCollisionError
from .params import SystemParams, check_key_rows

SIGNATURE_BYTES = 64


@dataclass(frozen=True)
class MemberPublicKey:
    """PK_i = (i, A_i, B_i, {K_ij}) with A_i = ĝ^a_i, B_i = ĝ^b_i, K_ij = h_j^a_i · u^b_i."""

    slot: int
    A: G2
    B: G2
    K: dict[int, G1]

    def to_bytes(self) -> bytes:
        w = Writer().u32(self.slot).elem(self.A).elem(self.B)
        return w.elems([self.K[j] for j in sorted(self.K)]).getvalue()

    @classmethod
    def read(cls, r: Reader) -> "MemberPublicKey":
        slot = r.u32()
        A, B = r.g2(), r.g2()
        ks = r.g1s()
        n = len(ks) + 1
        if not 1 <= slot <= n:
            raise CorruptFileError(f"public key slot {slot} outside [1, {n}]")
        return cls(slot, A, B, dict(zip([j for j in range(1, n + 1) if j != slot], ks)))

    @classmethod
    def from_bytes(cls, data: bytes) -> "MemberPublicKey":
        r = Reader(data)
        pk = cls.read(r)
        r.done()
        return pk


@dataclass(frozen=True)
class MemberSecretKey:
    """SK_i = h_i^a_i · u^b_i. The exponents themselves are never kept."""

    slot: int
    SK: G1
    user_index: int = 0
    gamma: int = 0

    def to_bytes(self) -> bytes:
        w = Writer(Kind.SECRET_KEY).u32(self.user_index).u32(self.gamma).u32(self.slot)
        return w.elem(self.SK).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MemberSecretKey":
        r = Reader(data, Kind.SECRET_KEY)
        user_index, gamma, slot = r.u32(), r.u32(), r.u32()
        sk = r.g1()
        r.done()
        return cls(slot, sk, user_index, gamma)


def _signed_payload(user_index: int, gamma: int, pk: MemberPublicKey) -> bytes:
    return b"nicbe/registry/v1" + Writer().u32(user_index).u32(gamma).blob(pk.to_bytes()).getvalue()


@dataclass(frozen=True)
class RegistryRecord:
    user_index: int
    gamma: int
    pk: MemberPublicKey
    signature: bytes

    @property
    def slot(self) -> int:
        return self.pk.slot

    def verify_signature(self, ta_public: Ed25519PublicKey) -> None:
        try:
            ta_public.verify(self.signature, _signed_payload(self.user_index, self.gamma, self.pk))
        except InvalidSignature:
            raise AuthenticationError(f"registry signature invalid for user {self.user_index}") from None

    def body(self) -> bytes:
        w = Writer().u32(self.user_index).u32(self.gamma).blob(self.pk.to_bytes())
        return w.raw(self.signature).getvalue()

    @classmethod
    def from_body(cls, data: bytes) -> "RegistryRecord":
        r = Reader(data)
        user_index, gamma = r.u32(), r.u32()
        pk = MemberPublicKey.from_bytes(r.blob())
        sig = r.raw(SIGNATURE_BYTES)
        r.done()
        return cls(user_index, gamma, pk, sig)

    def to_bytes(self) -> bytes:
        """Standalone public-key file (``pk_<user>.nicbe``)."""
        return Writer(Kind.PUBLIC_KEY).raw(self.body()).getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RegistryRecord":
        r = Reader(data, Kind.PUBLIC_KEY)
        return cls.from_body(r.raw(len(data) - 6))


def generate_key_pair(params: SystemParams, slot: int, rng=None) -> tuple[MemberPublicKey, MemberSecretKey]:
    """Fresh key pair for group slot ``slot`` (one-at-a-time registration)."""
    if not 1 <= slot <= params.n:
        raise ParameterError(f"slot {slot} outside [1, {params.n}]")
    a, b = random_scalar(rng), random_scalar(rng)
    A, B = params.g_hat ** a, params.g_hat ** b
    u_b = params.u ** b
    K = {j: (params.h(j) ** a) * u_b for j in params.slots() if j != slot}
    sk = (params.h(slot) ** a) * u_b
    return MemberPublicKey(slot, A, B, K), MemberSecretKey(slot, sk)


def verify_public_key(params: SystemParams, pk: MemberPublicKey) -> bool:
    """True iff every K_ij satisfies e(K_ij, ĝ) = e(h_j, A_i)·e(u, B_i)."""
    if not 1 <= pk.slot <= params.n:
        return False
    if set(pk.K) != {j for j in params.slots() if j != pk.slot}:
        return False
    if pk.A.is_identity() or pk.B.is_identity():
        return False
    return not check_key_rows(params, [(pk.slot, pk.A, pk.B, pk.K)])


def verify_key_pair(params: SystemParams, pk: MemberPublicKey, sk: MemberSecretKey) -> bool:
    if pk.slot != sk.slot:
        return False
    h = params.h(pk.slot)
    return pairing_product([(sk.SK, params.g_hat), (h.inverse(), pk.A), (params.u.inverse(), pk.B)]).is_identity()


@dataclass
class Registry:
    """TA-side store of issued keys.

    At most one key per (tuple, slot), and each user index is registered
    once. Records are appended in issue order.
    """

    params: SystemParams
    signing_key: Ed25519PrivateKey | None = None
    ta_public: Ed25519PublicKey | None = None
    records: list[RegistryRecord] = field(default_factory=list)
    _pending: dict[int, list[tuple[MemberPublicKey, MemberSecretKey]]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.signing_key is None and self.ta_public is None:
            self.signing_key = Ed25519PrivateKey.generate()
        if self.ta_public is None:
            self.ta_public = self.signing_key.public_key()

    @classmethod
    def new(cls, params: SystemParams, rng=None) -> "Registry":
        """Fresh registry with a new TA signing key (seeded from ``rng`` when given)."""
        if rng is None:
            return cls(params)
        return cls(params, Ed25519PrivateKey.from_private_bytes(rng.randbytes(32)))

    def _taken(self, gamma: int, slot: int) -> bool:
        if any(r.gamma == gamma and r.slot == slot for r in self.records):
            return True
        return any(pk.slot == slot for pk, _ in self._pending.get(gamma, ()))

    def _check(self, gamma: int, slot: int) -> None:
        self.params.tuple_for(gamma)
        if not 1 <= slot <= self.params.n:
            raise ParameterError(f"slot {slot} outside [1, {self.params.n}]")
        if self._taken(gamma, slot):
            raise SlotCollisionError(f"slot {slot} of tuple {gamma} is already registered")

    def _sign(self, user_index: int, gamma: int, pk: MemberPublicKey) -> RegistryRecord:
        if self.signing_key is None:
            raise AuthenticationError("registry opened read-only, no TA signing key")
        sig = self.signing_key.sign(_signed_payload(user_index, gamma, pk))
        rec = RegistryRecord(user_index, gamma, pk, sig)
        self.records.append(rec)
        return rec

    def key_regis(self, gamma: int, user_index: int, slot: int, rng=None) -> tuple[RegistryRecord, MemberSecretKey]:
        """Register ``user_index`` at ``slot`` of the group built on tuple ``gamma``."""
        self._check(gamma, slot)
        if self.lookup(user_index) is not None:
            raise SlotCollisionError(f"user {user_index} is already registered")
        pk, sk = generate_key_pair(self.params, slot, rng)
        rec = self._sign(user_index, gamma, pk)
        return rec, MemberSecretKey(slot, sk.SK, user_index, gamma)

    def key_regis_batch(self, gamma: int, count: int, rng=None) -> list[tuple[MemberPublicKey, MemberSecretKey]]:
        """Batch mode: pre-generate key pairs for every slot of tuple ``gamma``.

        The pairs are handed out first-come-first-served by :meth:`assign`.
        """
        if count != self.params.n:
            raise ParameterError(f"batch registration generates exactly n={self.params.n} pairs, got count={count}")
        taken = [s for s in self.params.slots() if self._taken(gamma, s)]
        self.params.tuple_for(gamma)
        if taken:
            raise SlotCollisionError(f"tuple {gamma}: slots {taken} already registered")
        pairs = [generate_key_pair(self.params, slot, rng) for slot in self.params.slots()]
        self._pending[gamma] = list(pairs)
        return pairs

    def assign(self, gamma: int, user_index: int) -> tuple[RegistryRecord, MemberSecretKey]:
        queue = self._pending.get(gamma)
        if not queue:
            raise NotFoundError(f"no pre-generated key pairs left for tuple {gamma}")
        if self.lookup(user_index) is not None:
            raise SlotCollisionError(f"user {user_index} is already registered")
        pk, sk = queue.pop(0)
        rec = self._sign(user_index, gamma, pk)
        return rec, MemberSecretKey(pk.slot, sk.SK, user_index, gamma)

    def lookup(self, user_index: int) -> RegistryRecord | None:
        for r in self.records:
            if r.user_index == user_index:
                return r
        return None

    def verify(self) -> list[str]:
        """Re-check every record: signature, key structure and index discipline."""
        problems = []
        seen: set[tuple[int, int]] = set()
        users: set[int] = set()
        for rec in self.records:
            try:
                rec.verify_signature(self.ta_public)
            except AuthenticationError as exc:
                problems.append(str(exc))
            if not verify_public_key(self.params, rec.pk):
                problems.append(f"user {rec.user_index}: public key fails structural checks")
            if (rec.gamma, rec.slot) in seen:
                problems.append(f"duplicate registration for tuple {rec.gamma} slot {rec.slot}")
            if rec.user_index in users:
                problems.append(f"user {rec.user_index} registered twice")
            seen.add((rec.gamma, rec.slot))
            users.add(rec.user_index)
        return problems

    # -- ledger file --------------------------------------------------------

    def header_bytes(self) -> bytes:
        from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

        raw = self.ta_public.public_bytes(Encoding.Raw, PublicFormat.Raw)
        return Writer(Kind.REGISTRY).blob(raw).getvalue()

    def to_bytes(self) -> bytes:
        return self.header_bytes() + b"".join(record_entry(r) for r in self.records)

    @classmethod
    def from_bytes(cls, params: SystemParams, data: bytes, signing_key: Ed25519PrivateKey | None = None) -> "Registry":
        r = Reader(data, Kind.REGISTRY)
        raw = r.blob()
        if len(raw) != 32:
            raise CorruptFileError("TA public key must be 32 bytes")
        ta_public = Ed25519PublicKey.from_public_bytes(raw)
        records = []
        while r.remaining():
            records.append(RegistryRecord.from_body(r.blob()))
        reg = cls(params, signing_key, ta_public, records)
        problems = reg.verify()
        if problems:
            raise CorruptFileError("registry ledger invalid: " + "; ".join(problems))
        return reg


def record_entry(rec: RegistryRecord) -> bytes:
    """One length-prefixed ledger entry, suitable for appending."""
    return Writer().blob(rec.body()).getvalue()
