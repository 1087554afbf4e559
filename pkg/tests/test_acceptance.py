"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the per-criterion summary
is printed in the "acceptance criteria" section at the end of the run.
"""

import contextlib
import random
import time
from dataclasses import replace

import pytest

import conftest
from conftest import World, make_world
from nicbe.algebra import G1, G2
from nicbe.bench import ALGORITHMS, loglog_slope, run_bench
from nicbe.broadcast import decrypt, encrypt
from nicbe.conformance import excluded_member_attempt, member_equal, oracle_group_state
from nicbe.errors import CorruptFileError, NotARecipientError
from nicbe.group import group_join, group_leave, key_derive, update_member, verify_decryption_key
from nicbe.params import PlaceholderTuple, SystemParams, validate_params
from nicbe.registry import MemberPublicKey

SIZES = (4, 8, 16)


@contextlib.contextmanager
def criterion(num, title):
    start = time.perf_counter()
    info = {"detail": ""}
    try:
        yield info
    except BaseException as exc:
        conftest.ACCEPTANCE_RESULTS.append((num, title, "FAIL", f"{type(exc).__name__}: {exc}"[:200]))
        raise
    elapsed = time.perf_counter() - start
    conftest.ACCEPTANCE_RESULTS.append((num, title, "PASS", f"{info['detail']} ({elapsed:.1f}s)"))


@pytest.fixture(scope="module")
def worlds():
    return {n: make_world(n, seed=1000 + n) for n in SIZES}


class Group:
    """A live group driven through the public/member halves of each update."""

    def __init__(self, world: World, occupancy):
        self.w = world
        self.g, self.infos = world.derive(occupancy)
        self.transitions = 0
        self.checks = 0
        self.check_all()

    def check_all(self):
        for s, m in self.infos.items():
            assert verify_decryption_key(self.w.params, self.g, s, m.d), f"slot {s} round {self.g.round}"
            self.checks += 1

    def join(self, slot):
        w = self.w
        g_new, rec = group_join(w.params, self.g, w.pks[slot], slot, verify_key=False)
        infos = {s: update_member(w.params, w.gamma, m, rec, w.pks[slot]) for s, m in self.infos.items()}
        _, infos[slot] = key_derive(w.params, w.gid, w.gamma, {s: w.pks[s] for s in g_new.st}, slot, w.sks[slot],
                                    users=g_new.delta, round=g_new.round, verify_keys=False)
        self.g, self.infos = g_new, infos
        self.transitions += 1
        self.check_all()

    def leave(self, slot):
        w = self.w
        g_new, rec = group_leave(w.params, self.g, w.pks[slot])
        self.g = g_new
        self.infos = {s: update_member(w.params, w.gamma, m, rec, w.pks[slot])
                      for s, m in self.infos.items() if s != slot}
        self.transitions += 1
        self.check_all()

    def random_step(self, rng):
        n = self.w.params.n
        outside = [s for s in range(1, n + 1) if s not in self.g.st]
        if outside and (len(self.g.st) == 1 or rng.random() < 0.5):
            self.join(rng.choice(outside))
        else:
            self.leave(rng.choice(sorted(self.g.st)))


def test_criterion_1_2_correctness_and_consistency(worlds):
    rng = random.Random(1)
    with criterion(1, "correctness over randomized lifecycles") as c1, \
            criterion(2, "consistency equation after every transition, perturbations rejected") as c2:
        lifecycles = agreements = exclusions = checks = perturbations = 0
        for n in SIZES:
            w = worlds[n]
            for _ in range(100):
                occ = rng.sample(range(1, n + 1), rng.randint(1, n))
                grp = Group(w, occ)
                for _ in range(rng.randint(0, 20)):
                    grp.random_step(rng)
                U = set(rng.sample(sorted(grp.g.st), rng.randint(1, len(grp.g.st))))
                header, k = encrypt(w.params, grp.g, U, rng)
                for s in U:
                    assert decrypt(w.params, grp.g, header, s, grp.infos[s]) == k
                    agreements += 1
                for s in grp.g.st - U:
                    assert excluded_member_attempt(w.params, grp.g, header, s, grp.infos[s]) != k
                    with pytest.raises(NotARecipientError):
                        decrypt(w.params, grp.g, header, s, grp.infos[s])
                    exclusions += 1
                # single-element perturbations of d_i, Y1, Y2
                s = rng.choice(sorted(grp.g.st))
                d = grp.infos[s].d
                delta = G1.generator() ** rng.randrange(1, 2**64)
                assert not verify_decryption_key(w.params, grp.g, s, d * delta)
                for field in ("Y1", "Y2"):
                    bumped = getattr(grp.g.omega, field) * G2.generator() ** rng.randrange(1, 2**64)
                    g_bad = replace(grp.g, omega=replace(grp.g.omega, **{field: bumped}))
                    assert not verify_decryption_key(w.params, g_bad, s, d)
                perturbations += 3
                checks += grp.checks
                lifecycles += 1
        c1["detail"] = f"{lifecycles} lifecycles, {agreements} recipient agreements, {exclusions} excluded mismatches"
        c2["detail"] = f"{checks} post-transition checks held, {perturbations} perturbations rejected"


def test_criterion_3_oracle_equivalence(worlds):
    rng = random.Random(3)
    with criterion(3, "incremental state equals fresh derivation byte-for-byte") as c:
        compared = 0
        for n in SIZES:
            w = worlds[n]
            for _ in range(50):
                grp = Group(w, rng.sample(range(1, n + 1), rng.randint(1, n)))
                for _ in range(rng.randint(1, 12)):
                    grp.random_step(rng)
                g = grp.g
                fresh_g, fresh = w.derive(g.st, users=g.delta, round=g.round)
                assert fresh_g.to_bytes() == g.to_bytes()
                oracle = oracle_group_state(w.params, w.gamma, w.pks, w.sks, g.st)
                assert (oracle.Y1, oracle.Y2) == (g.omega.Y1, g.omega.Y2)
                for s in g.st:
                    assert fresh[s].to_bytes() == grp.infos[s].to_bytes()
                    assert member_equal(fresh[s], grp.infos[s])
                    assert grp.infos[s].d == oracle.d[s] and grp.infos[s].dk_hat == oracle.dk_hat[s]
                    compared += 1
        c["detail"] = f"{3 * 50} update sequences, {compared} member states identical"


def truncate(world: World, m: int) -> World:
    """The first ``m`` slots of a larger world form a valid smaller one."""
    p = world.params
    t = p.tuples[0]
    tup = PlaceholderTuple(1, t.A[:m], t.B[:m], tuple(row[:m] for row in t.K[:m]))
    params = SystemParams(m, 1, m, p.g, p.g_hat, p.u, p.H[:m], (tup,))
    pks = {s: MemberPublicKey(s, pk.A, pk.B, {j: v for j, v in pk.K.items() if j <= m})
           for s, pk in world.pks.items() if s <= m}
    return World(params, pks, {s: sk for s, sk in world.sks.items() if s <= m})


def test_criterion_4_constant_size_header():
    big = make_world(64, seed=64)
    rng = random.Random(4)
    with criterion(4, "serialized header is exactly two G2 elements") as c:
        headers = 0
        for n in range(4, 65):
            w = truncate(big, n)
            if n in (4, 17, 64):
                assert validate_params(w.params).ok
            g, _ = key_derive(w.params, w.gid, 1, w.pks, 1, w.sks[1], verify_keys=False)
            for size in range(1, n + 1):
                header, _ = encrypt(w.params, g, rng.sample(range(1, n + 1), size), rng)
                assert len(header.crypto_bytes()) == 2 * 96
                headers += 1
        c["detail"] = f"{headers} headers for n=4..64 and every |U|, all 192 bytes"


@pytest.mark.slow
def test_criterion_5_complexity_shape():
    sizes = list(range(10, 101, 10))
    with criterion(5, "complexity shape: decrypt pairings, KeyDerive slope, decrypt time ratio") as c:
        started = time.perf_counter()
        report = run_bench(sizes, occupancy=0.8, trials=10, rng=random.Random(5), algorithms=ALGORITHMS)
        elapsed = time.perf_counter() - started
        dec = report.select("Decrypt")
        assert all(r.ops["pairings"] == 2 for r in dec)
        kd = report.select("KeyDerive")
        slope = loglog_slope([r.n for r in kd], [r.ops["g1_multiplications"] for r in kd])
        assert 1.8 <= slope <= 2.2, slope
        times = [r.mean_us for r in dec]
        ratio = max(times) / min(times)
        assert ratio <= 3, ratio
        assert elapsed < 600
        c["detail"] = (f"(a) decrypt pairings == 2 at all {len(dec)} sizes; (b) KeyDerive slope {slope:.3f}; "
                       f"(c) decrypt max/min {ratio:.2f}; bench {elapsed:.0f}s")


def test_criterion_6_serialization():
    import test_serialization as ser

    with criterion(6, "round-trip, determinism, corruption rejection") as c:
        again, _ = ser.build(1)
        loaders = ser.loaders()
        rejected = 0
        for fmt, (data, elem) in ser.FILES.items():
            assert loaders[fmt](data) == data
            assert again[fmt][0] == data
            patterns = ser.corruptions(data, elem)
            if elem is not None:
                assert len(patterns) == 10
            for name, bad in patterns.items():
                with pytest.raises(CorruptFileError):
                    loaders[fmt](bad)
                rejected += 1
        c["detail"] = f"{len(ser.FILES)} formats round-trip and reproduce; {rejected} corrupted files rejected"


def test_criterion_7_cli_end_to_end(tmp_path):
    from test_cli import four_party

    with criterion(7, "scripted 4-party CLI lifecycle") as c:
        started = time.perf_counter()
        p, gid = four_party(tmp_path)
        (tmp_path / "plain").write_bytes(b"hello group")
        sent = p.json("encrypt", "--group", gid, "--to", "1,3", "--in", tmp_path / "plain", "--out", tmp_path / "m")
        digests = {p.json("decrypt", "--user", u, "--msg", tmp_path / "m")["session_key_sha256"] for u in (1, 3)}
        assert digests == {sent["session_key_sha256"]}
        p.run("decrypt", "--user", 2, "--msg", tmp_path / "m", code=NotARecipientError.exit_code)
        elapsed = time.perf_counter() - started
        assert elapsed < 30
        c["detail"] = f"digests match for users 1,3; user 2 exits {NotARecipientError.exit_code}"


def test_criterion_8_security_reduction_not_executed():
    conftest.ACCEPTANCE_RESULTS.append(
        (8, "security reduction", "NOT EXECUTED", "out of scope by design; no executable check exists")
    )
    pytest.skip("the security reduction is an argument, not an executable property")
