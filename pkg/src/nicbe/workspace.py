"""On-disk layout for multi-party runs.

Public files (params, TA public key, registry, ``pk_*``, ``group_*``) are
plain. Secret files (``sk_*``, ``member_*``, ``ta.key``) are encrypted at rest
when a passphrase is supplied. Every write goes through a temp file and an
atomic rename.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt
from cryptography.hazmat.primitives.serialization import Encoding, NoEncryption, PrivateFormat, PublicFormat
from filelock import FileLock

from .encoding import MAGIC, Kind, Reader, Writer
from .errors import AuthenticationError, CorruptFileError, NotFoundError, ParameterError
from .group import GroupInfo, MemberInfo, UpdateRecord
from .params import SystemParams, load_params
from .registry import MemberSecretKey, Registry, RegistryRecord, record_entry

PROTECTED = 0x80
_SCRYPT_N = 2**14


def atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _file_key(passphrase: str, salt: bytes) -> bytes:
    return Scrypt(salt=salt, length=32, n=_SCRYPT_N, r=8, p=1).derive(passphrase.encode())


def protect(data: bytes, passphrase: str | None, rng=None) -> bytes:
    """Encrypt the body of a nicbe file under a passphrase; header kind gets the 0x80 bit."""
    if not passphrase:
        return data
    header, body = data[:6], data[6:]
    rand = rng.randbytes if rng is not None else os.urandom
    salt, nonce = rand(16), rand(12)
    new_header = header[:5] + bytes([header[5] | PROTECTED])
    ct = ChaCha20Poly1305(_file_key(passphrase, salt)).encrypt(nonce, body, new_header)
    return Writer().raw(new_header).raw(salt).raw(nonce).blob(ct).getvalue()


def unprotect(data: bytes, passphrase: str | None) -> bytes:
    if len(data) < 6 or data[:4] != MAGIC:
        raise CorruptFileError("bad magic, not a nicbe file")
    if not data[5] & PROTECTED:
        return data
    if not passphrase:
        raise AuthenticationError("file is passphrase-protected; set NICBE_PASSPHRASE")
    r = Reader(data[6:])
    salt, nonce, ct = r.raw(16), r.raw(12), r.blob()
    r.done()
    try:
        body = ChaCha20Poly1305(_file_key(passphrase, salt)).decrypt(nonce, ct, data[:6])
    except InvalidTag:
        raise AuthenticationError("wrong passphrase or tampered secret file") from None
    return data[:5] + bytes([data[5] & ~PROTECTED]) + body


@dataclass
class GroupFile:
    """Public group record plus the log of every membership change."""

    info: GroupInfo
    log: list[UpdateRecord] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        w = Writer().raw(self.info.to_bytes()).u32(len(self.log))
        for rec in self.log:
            rec.write(w)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GroupFile":
        r = Reader(data, Kind.GROUP)
        info = GroupInfo.read(r)
        log = [UpdateRecord.read(r) for _ in range(r.count())]
        r.done()
        if [rec.round for rec in log] != list(range(2, info.round + 1)):
            raise CorruptFileError("group update log must hold every update from round 2 to the current round")
        return cls(info, log)


def ta_key_bytes(key: Ed25519PrivateKey) -> bytes:
    raw = key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())
    return Writer(Kind.TA_SECRET).raw(raw).getvalue()


def ta_pub_bytes(key: Ed25519PublicKey) -> bytes:
    return Writer(Kind.TA_PUBLIC).raw(key.public_bytes(Encoding.Raw, PublicFormat.Raw)).getvalue()


def read_ta_key(data: bytes) -> Ed25519PrivateKey:
    r = Reader(data, Kind.TA_SECRET)
    raw = r.raw(32)
    r.done()
    return Ed25519PrivateKey.from_private_bytes(raw)


def read_ta_pub(data: bytes) -> Ed25519PublicKey:
    r = Reader(data, Kind.TA_PUBLIC)
    raw = r.raw(32)
    r.done()
    return Ed25519PublicKey.from_public_bytes(raw)


class Workspace:
    def __init__(self, root: str | os.PathLike, passphrase: str | None = None) -> None:
        self.root = Path(root)
        self.passphrase = passphrase
        self._params: SystemParams | None = None

    # paths
    @property
    def params_path(self) -> Path:
        return self.root / "params.nicbe"

    @property
    def registry_path(self) -> Path:
        return self.root / "registry.nicbe"

    @property
    def ta_key_path(self) -> Path:
        return self.root / "ta.key"

    @property
    def ta_pub_path(self) -> Path:
        return self.root / "ta.pub"

    def pk_path(self, user: int) -> Path:
        return self.root / f"pk_{user}.nicbe"

    def sk_path(self, user: int) -> Path:
        return self.root / f"sk_{user}.nicbe"

    def group_path(self, gid: bytes) -> Path:
        return self.root / f"group_{gid.hex()}.nicbe"

    def member_path(self, gid: bytes, slot: int) -> Path:
        return self.root / f"member_{gid.hex()}_{slot}.nicbe"

    def group_lock(self, gid: bytes) -> FileLock:
        return FileLock(str(self.root / f"group_{gid.hex()}.lock"))

    def registry_lock(self) -> FileLock:
        return FileLock(str(self.root / "registry.lock"))

    def _read(self, path: Path) -> bytes:
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFoundError(f"missing file {path}") from None

    # params / TA
    def params(self) -> SystemParams:
        if self._params is None:
            self._params = load_params(self._read(self.params_path))
        return self._params

    def ta_public(self) -> Ed25519PublicKey:
        return read_ta_pub(self._read(self.ta_pub_path))

    def ta_key(self) -> Ed25519PrivateKey:
        return read_ta_key(unprotect(self._read(self.ta_key_path), self.passphrase))

    def registry(self, signing: bool = False) -> Registry:
        key = self.ta_key() if signing else None
        reg = Registry.from_bytes(self.params(), self._read(self.registry_path), key)
        if reg.ta_public.public_bytes(Encoding.Raw, PublicFormat.Raw) != self.ta_public().public_bytes(Encoding.Raw, PublicFormat.Raw):
            raise CorruptFileError("registry was signed by a different TA key")
        return reg

    def append_record(self, rec: RegistryRecord) -> None:
        atomic_write(self.registry_path, self._read(self.registry_path) + record_entry(rec))

    # keys
    def record(self, user: int) -> RegistryRecord:
        rec = RegistryRecord.from_bytes(self._read(self.pk_path(user)))
        if rec.user_index != user:
            raise CorruptFileError(f"{self.pk_path(user)} holds the key of user {rec.user_index}")
        rec.verify_signature(self.ta_public())
        return rec

    def secret_key(self, user: int) -> MemberSecretKey:
        sk = MemberSecretKey.from_bytes(unprotect(self._read(self.sk_path(user)), self.passphrase))
        if sk.user_index != user:
            raise CorruptFileError(f"{self.sk_path(user)} holds the key of user {sk.user_index}")
        return sk

    # groups
    def group(self, gid: bytes) -> GroupFile:
        return GroupFile.from_bytes(self._read(self.group_path(gid)))

    def groups(self) -> list[GroupFile]:
        return [GroupFile.from_bytes(p.read_bytes()) for p in sorted(self.root.glob("group_*.nicbe"))]

    def write_group(self, gf: GroupFile) -> None:
        atomic_write(self.group_path(gf.info.id), gf.to_bytes())

    def member(self, gid: bytes, slot: int) -> MemberInfo:
        m = MemberInfo.from_bytes(unprotect(self._read(self.member_path(gid, slot)), self.passphrase))
        if m.group_id != gid or m.slot != slot:
            raise CorruptFileError("member file does not match its name")
        return m

    def write_member(self, m: MemberInfo) -> None:
        atomic_write(self.member_path(m.group_id, m.slot), protect(m.to_bytes(), self.passphrase))

    def write_secret(self, path: Path, data: bytes, rng=None) -> None:
        atomic_write(path, protect(data, self.passphrase, rng))


def parse_group_id(text: str) -> bytes:
    try:
        gid = bytes.fromhex(text)
    except ValueError:
        raise ParameterError(f"group id {text!r} is not hex") from None
    if len(gid) != 16:
        raise ParameterError("group id must be 16 bytes (32 hex characters)")
    return gid

