import random
from dataclasses import dataclass, field

import pytest

from nicbe.group import join, key_derive, leave
from nicbe.params import globe_setup
from nicbe.registry import generate_key_pair


@dataclass
class World:
    """Parameters plus a key pair for every slot of one placeholder tuple."""

    params: object
    pks: dict
    sks: dict
    gid: bytes = b"\x07" * 16
    gamma: int = 1

    def derive(self, slots, users=None, round=1):
        members = {s: self.pks[s] for s in slots}
        infos, g_info = {}, None
        for s in sorted(slots):
            g_info, infos[s] = key_derive(self.params, self.gid, self.gamma, members, s, self.sks[s],
                                          users=users, round=round, verify_keys=False)
        return g_info, infos


@dataclass
class Lifecycle:
    """Live group driven through the library's pure transitions."""

    world: World
    g_info: object = None
    infos: dict = field(default_factory=dict)

    def join(self, slot):
        w = self.world
        g_new, infos, _ = join(w.params, self.g_info, self.infos, w.pks[slot], slot)
        members = {s: w.pks[s] for s in g_new.st}
        _, infos[slot] = key_derive(w.params, w.gid, w.gamma, members, slot, w.sks[slot],
                                    users=g_new.delta, round=g_new.round, verify_keys=False)
        self.g_info, self.infos = g_new, infos

    def leave(self, slot):
        w = self.world
        self.g_info, self.infos, _ = leave(w.params, self.g_info, self.infos, slot, w.pks[slot])


def make_world(n, seed=0, tuple_count=1):
    rng = random.Random(seed)
    params = globe_setup(128, n, tuple_count, None, rng)
    pairs = {s: generate_key_pair(params, s, rng) for s in params.slots()}
    return World(params, {s: p[0] for s, p in pairs.items()}, {s: p[1] for s, p in pairs.items()})


def start(world, slots):
    g_info, infos = world.derive(slots)
    return Lifecycle(world, g_info, infos)


@pytest.fixture(scope="session")
def world4():
    return make_world(4, seed=4)


@pytest.fixture(scope="session")
def world8():
    return make_world(8, seed=8)


# (number, title, status, detail) rows filled in by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[int, str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, status, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {num} [{status}] {title}: {detail}")
