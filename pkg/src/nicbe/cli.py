"""``nicbe`` command-line driver.

Each invocation acts as a single party and touches at most one member's
secrets. Parties exchange only public files in the workspace directory
(``--home`` / ``NICBE_HOME``).
"""

from __future__ import annotations

import hashlib
import json
import logging
import random

import click

from .bench import ALGORITHMS, run_bench
from .broadcast import SealedMessage, decrypt, encrypt, session_key_digest, unwrap, wrap
from .errors import (
    ConsistencyError,
    MembershipError,
    NicbeError,
    NotARecipientError,
    ParameterError,
    StaleRoundError,
)
from .group import group_join, group_leave, key_derive, update_member, verify_decryption_key
from .params import globe_setup, validate_params
from .registry import Registry
from .workspace import GroupFile, Workspace, atomic_write, parse_group_id, ta_key_bytes, ta_pub_bytes

log = logging.getLogger(__name__)


class NicbeGroup(click.Group):
    """Maps library errors onto their exit codes with a one-line message on stderr."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except NicbeError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)


def _ints(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise ParameterError(f"expected a comma-separated list of integers, got {text!r}") from None


def _rng(seed: int | None, insecure: bool):
    if seed is None:
        return None
    if not insecure:
        raise click.UsageError("--seed requires --insecure-deterministic")
    return random.Random(seed)


def seed_options(fn):
    fn = click.option("--insecure-deterministic", is_flag=True, help="Allow --seed (testing only, keys become predictable).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Deterministic RNG seed.")(fn)
    return fn


def emit(ctx: click.Context, **values) -> None:
    if ctx.obj["format"] == "json":
        click.echo(json.dumps(values, sort_keys=True))
        return
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        click.echo(f"{key}: {value}")


def _ws(ctx: click.Context) -> Workspace:
    return ctx.obj["ws"]


def _member_slot(ws: Workspace, gf: GroupFile, user: int) -> int:
    slot = ws.record(user).slot
    if gf.info.delta.get(slot) != user:
        raise MembershipError(f"user {user} is not a member of group {gf.info.id.hex()}")
    return slot


@click.group(cls=NicbeGroup)
@click.option("--home", envvar="NICBE_HOME", default=".", type=click.Path(file_okay=False), help="Workspace directory.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.option("--passphrase", envvar="NICBE_PASSPHRASE", default=None, help="Encrypts secret files at rest.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx, home, fmt, passphrase, verbose):
    """Non-interactive contributory broadcast encryption."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    ctx.obj = {"ws": Workspace(home, passphrase), "format": fmt, "home": home}


@cli.command()
@click.option("--n", "n", type=int, required=True, help="Maximum group size.")
@click.option("--tuples", type=int, default=1, show_default=True, help="Number of placeholder tuples.")
@click.option("--population", type=int, default=None, help="Number of public h_j values (default n).")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Workspace directory (overrides --home).")
@click.option("--force", is_flag=True, help="Overwrite an existing workspace.")
@seed_options
@click.pass_context
def setup(ctx, n, tuples, population, out, force, seed, insecure_deterministic):
    """Generate public parameters, the TA key and an empty registry."""
    rng = _rng(seed, insecure_deterministic)
    ws = Workspace(out, ctx.obj["ws"].passphrase) if out else _ws(ctx)
    ws.root.mkdir(parents=True, exist_ok=True)
    if ws.params_path.exists() and not force:
        raise ParameterError(f"{ws.params_path} exists; pass --force to overwrite")
    params = globe_setup(128, n, tuples, population, rng)
    registry = Registry.new(params, rng)
    data = params.to_bytes()
    atomic_write(ws.params_path, data)
    atomic_write(ws.ta_pub_path, ta_pub_bytes(registry.ta_public))
    ws.write_secret(ws.ta_key_path, ta_key_bytes(registry.signing_key), rng)
    atomic_write(ws.registry_path, registry.to_bytes())
    emit(ctx, n=n, tuples=tuples, population=params.population,
         params=str(ws.params_path), params_sha256=hashlib.sha256(data).hexdigest())


@cli.command()
@click.option("--user", type=int, required=True, help="User index to register.")
@click.option("--slot", type=int, required=True, help="Slot position within the group.")
@click.option("--gamma", type=int, default=None, help="Placeholder tuple (default: lowest with the slot free).")
@seed_options
@click.pass_context
def register(ctx, user, slot, gamma, seed, insecure_deterministic):
    """TA: issue a key pair for a user at a slot (writes pk_<user> and sk_<user>)."""
    rng = _rng(seed, insecure_deterministic)
    ws = _ws(ctx)
    with ws.registry_lock():
        reg = ws.registry(signing=True)
        if gamma is None:
            taken = {r.gamma for r in reg.records if r.slot == slot}
            free = [g for g in range(1, reg.params.tuple_count + 1) if g not in taken]
            if not free:
                raise ParameterError(f"slot {slot} is taken in every placeholder tuple")
            gamma = free[0]
        rec, sk = reg.key_regis(gamma, user, slot, rng)
        ws.append_record(rec)
    atomic_write(ws.pk_path(user), rec.to_bytes())
    ws.write_secret(ws.sk_path(user), sk.to_bytes(), rng)
    emit(ctx, user=user, slot=slot, gamma=gamma, public_key=str(ws.pk_path(user)),
         pk_sha256=hashlib.sha256(rec.pk.to_bytes()).hexdigest())


def default_group_id(gamma: int, users: list[int]) -> bytes:
    h = hashlib.sha256(b"nicbe/group-id/v1" + gamma.to_bytes(4, "big"))
    for u in sorted(users):
        h.update(u.to_bytes(8, "big"))
    return h.digest()[:16]


@cli.command()
@click.option("--user", type=int, required=True, help="The deriving party.")
@click.option("--members", required=True, help="Comma-separated user indices of the initial members.")
@click.option("--group-id", default=None, help="32 hex characters (default: derived from the member list).")
@click.pass_context
def derive(ctx, user, members, group_id):
    """Derive the group key and this user's decryption key from public keys alone."""
    ws = _ws(ctx)
    params = ws.params()
    users = sorted(set(_ints(members)))
    if user not in users:
        raise MembershipError(f"user {user} is not in the member list")
    records = [ws.record(u) for u in users]
    gammas = {r.gamma for r in records}
    if len(gammas) != 1:
        raise ParameterError(f"members registered under different tuples {sorted(gammas)}")
    gamma = gammas.pop()
    gid = parse_group_id(group_id) if group_id else default_group_id(gamma, users)
    sk = ws.secret_key(user)
    pks = {r.slot: r.pk for r in records}
    g_info, m_info = key_derive(params, gid, gamma, pks, sk.slot, sk, users={r.slot: r.user_index for r in records})

    with ws.group_lock(gid):
        if ws.group_path(gid).exists():
            existing = ws.group(gid)
            if existing.info.round != 1:
                raise StaleRoundError(f"group already at round {existing.info.round}; use sync")
            if existing.info.to_bytes() != g_info.to_bytes():
                raise ConsistencyError("derived group state disagrees with the published group file")
        else:
            for other in ws.groups():
                if other.info.gamma == gamma:
                    raise ParameterError(f"tuple {gamma} is already used by group {other.info.id.hex()}")
            ws.write_group(GroupFile(g_info))
    ws.write_member(m_info)
    emit(ctx, group=gid.hex(), round=g_info.round, slot=m_info.slot, occupancy=g_info.st_bits(),
         omega_sha256=hashlib.sha256(g_info.omega.Y1.to_bytes() + g_info.omega.Y2.to_bytes()).hexdigest())


@cli.command()
@click.option("--user", type=int, required=True, help="The newcomer.")
@click.option("--group", "group_hex", required=True)
@click.pass_context
def join(ctx, user, group_hex):
    """Newcomer: publish the join and derive its own keys. Others run ``sync``."""
    ws = _ws(ctx)
    params = ws.params()
    gid = parse_group_id(group_hex)
    rec = ws.record(user)
    sk = ws.secret_key(user)
    with ws.group_lock(gid):
        gf = ws.group(gid)
        if rec.gamma != gf.info.gamma:
            raise ParameterError(f"user {user} is registered under tuple {rec.gamma}, group uses {gf.info.gamma}")
        g_new, update = group_join(params, gf.info, rec.pk, user)
        pks = {s: (rec.pk if u == user else ws.record(u).pk) for s, u in g_new.delta.items()}
        g_fresh, m_info = key_derive(params, gid, g_new.gamma, pks, rec.slot, sk, users=g_new.delta,
                                     round=g_new.round, verify_keys=False)
        if g_fresh.to_bytes() != g_new.to_bytes():
            raise ConsistencyError("incremental and fresh group state disagree")
        ws.write_group(GroupFile(g_new, gf.log + [update]))
    ws.write_member(m_info)
    emit(ctx, group=gid.hex(), round=g_new.round, slot=rec.slot, occupancy=g_new.st_bits())


@cli.command()
@click.option("--user", type=int, required=True, help="The leaving member.")
@click.option("--group", "group_hex", required=True)
@click.pass_context
def leave(ctx, user, group_hex):
    """Publish a member's departure. Remaining members run ``sync``."""
    ws = _ws(ctx)
    params = ws.params()
    gid = parse_group_id(group_hex)
    with ws.group_lock(gid):
        gf = ws.group(gid)
        slot = _member_slot(ws, gf, user)
        g_new, update = group_leave(params, gf.info, ws.record(user).pk)
        ws.write_group(GroupFile(g_new, gf.log + [update]))
    ws.member_path(gid, slot).unlink(missing_ok=True)
    emit(ctx, group=gid.hex(), round=g_new.round, slot=slot, occupancy=g_new.st_bits())


@cli.command()
@click.option("--user", type=int, required=True)
@click.option("--group", "group_hex", required=True)
@click.pass_context
def sync(ctx, user, group_hex):
    """Bring a member's private state up to the group's current round."""
    ws = _ws(ctx)
    params = ws.params()
    gid = parse_group_id(group_hex)
    gf = ws.group(gid)
    slot = _member_slot(ws, gf, user)
    m = ws.member(gid, slot)
    start = m.round
    pending = [r for r in gf.log if r.round > m.round]
    if m.round > gf.info.round or (pending and pending[0].round != m.round + 1) or (not pending and m.round != gf.info.round):
        raise StaleRoundError(f"member state round {m.round} cannot be brought to group round {gf.info.round}")
    for update in pending:
        m = update_member(params, gf.info.gamma, m, update, ws.record(update.user).pk)
    if not verify_decryption_key(params, gf.info, slot, m.d):
        raise ConsistencyError(f"synchronised decryption key for slot {slot} fails the consistency check")
    ws.write_member(m)
    emit(ctx, group=gid.hex(), slot=slot, from_round=start, round=m.round, applied=len(pending))


@cli.command("encrypt")
@click.option("--group", "group_hex", required=True)
@click.option("--to", "to_users", default=None, help="Comma-separated recipient user indices.")
@click.option("--slots", default=None, help="Comma-separated recipient slots.")
@click.option("--in", "infile", type=click.File("rb"), default="-", show_default=True)
@click.option("--out", "outfile", type=click.Path(dir_okay=False), required=True)
@click.option("--round", "expected_round", type=int, default=None, help="Abort if the group is not at this round.")
@seed_options
@click.pass_context
def encrypt_cmd(ctx, group_hex, to_users, slots, infile, outfile, expected_round, seed, insecure_deterministic):
    """Anyone: encrypt a payload to a subset of group members."""
    if (to_users is None) == (slots is None):
        raise click.UsageError("give exactly one of --to or --slots")
    rng = _rng(seed, insecure_deterministic)
    ws = _ws(ctx)
    params = ws.params()
    gf = ws.group(parse_group_id(group_hex))
    if slots is not None:
        recipients = _ints(slots)
    else:
        by_user = {u: s for s, u in gf.info.delta.items()}
        missing = [u for u in _ints(to_users) if u not in by_user]
        if missing:
            raise MembershipError(f"users {missing} are not group members")
        recipients = [by_user[u] for u in _ints(to_users)]
    header, k = encrypt(params, gf.info, recipients, rng, expected_round=expected_round)
    sealed = wrap(header, k, infile.read(), rng)
    atomic_write(outfile, sealed.to_bytes())
    emit(ctx, message=outfile, round=header.round, recipients=sorted(header.recipients),
         header_bytes=len(header.crypto_bytes()), session_key_sha256=session_key_digest(k))


@cli.command("decrypt")
@click.option("--user", type=int, required=True)
@click.option("--msg", type=click.Path(dir_okay=False, exists=True), required=True)
@click.option("--out", "outfile", type=click.Path(dir_okay=False), default=None, help="Plaintext destination; '-' for stdout.")
@click.pass_context
def decrypt_cmd(ctx, user, msg, outfile):
    """Recipient: recover the payload of a broadcast message."""
    ws = _ws(ctx)
    params = ws.params()
    with open(msg, "rb") as fh:
        sealed = SealedMessage.from_bytes(fh.read())
    header = sealed.header
    gf = ws.group(header.group_id)
    slot = _member_slot(ws, gf, user)
    if slot not in header.recipients:
        raise NotARecipientError(f"user {user} (slot {slot}) is not a recipient of this message")
    if header.round != gf.info.round:
        raise StaleRoundError(f"message is for round {header.round}, group is at round {gf.info.round}")
    m = ws.member(header.group_id, slot)
    k = decrypt(params, gf.info, header, slot, m)
    plaintext = unwrap(sealed, k)
    if outfile == "-":
        click.echo(plaintext, nl=False)
        click.echo()
    elif outfile:
        atomic_write(outfile, plaintext)
    emit(ctx, user=user, slot=slot, round=header.round, session_key_sha256=session_key_digest(k),
         plaintext_bytes=len(plaintext))


@cli.command()
@click.option("--group", "group_hex", default=None)
@click.option("--user", type=int, default=None, help="Also check this member's decryption key.")
@click.pass_context
def verify(ctx, group_hex, user):
    """Validate parameters, registry, and optionally a group and a member."""
    ws = _ws(ctx)
    params = ws.params()
    report = validate_params(params)
    if not report.ok:
        raise ConsistencyError("; ".join(report.issues))
    reg = ws.registry()
    checked = {"params": "ok", "registry": f"ok ({len(reg.records)} records)"}
    if group_hex:
        gid = parse_group_id(group_hex)
        gf = ws.group(gid)
        for slot, u in gf.info.delta.items():
            if ws.record(u).slot != slot:
                raise ConsistencyError(f"group maps slot {slot} to user {u}, whose key is for another slot")
        checked["group"] = f"ok (round {gf.info.round}, occupancy {gf.info.st_bits()})"
        if user is not None:
            slot = _member_slot(ws, gf, user)
            m = ws.member(gid, slot)
            if m.round != gf.info.round:
                raise StaleRoundError(f"member state at round {m.round}, group at {gf.info.round}; run sync")
            if not verify_decryption_key(params, gf.info, slot, m.d):
                raise ConsistencyError(f"decryption key of user {user} fails the consistency check")
            checked["member"] = f"ok (slot {slot})"
    elif user is not None:
        raise click.UsageError("--user needs --group")
    emit(ctx, **checked)


@cli.command()
@click.option("--sizes", default="10,20,30,40,50,60,70,80,90,100", show_default=True)
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--occupancy", type=float, default=0.8, show_default=True)
@click.option("--ops-only", is_flag=True, help="Skip timing, record operation counts only.")
@click.option("--algorithms", default=",".join(ALGORITHMS), show_default=True)
@click.option("--out", "outfile", type=click.File("w"), default="-", show_default=True)
@click.option("--seed", type=int, default=None)
def bench(sizes, trials, occupancy, ops_only, algorithms, outfile, seed):
    """Time every algorithm and count group operations; writes CSV."""
    names = [a for a in algorithms.split(",") if a]
    unknown = set(names) - set(ALGORITHMS)
    if unknown:
        raise ParameterError(f"unknown algorithms {sorted(unknown)}")
    rng = random.Random(seed) if seed is not None else None
    try:
        report = run_bench(_ints(sizes), occupancy, trials, rng, ops_only, names)
    except ValueError as exc:
        raise ParameterError(str(exc)) from None
    report.write_csv(outfile)


def main() -> None:
    cli(prog_name="nicbe")


if __name__ == "__main__":
    main()
