"""Timing and operation-count harness.

For each maximum group size n the harness builds parameters and a group
with ``round(occupancy * n)`` members outside any timed region, then times
each algorithm over several warm trials and records the group operations
it performs. Output is one CSV row per (algorithm, n).
"""

from __future__ import annotations

import csv
import gc
import logging
import math
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .algebra import OpCounters, count_ops
from .broadcast import decrypt, encrypt
from .group import group_join, group_leave, key_derive, update_member
from .params import globe_setup
from .registry import generate_key_pair

log = logging.getLogger(__name__)

ALGORITHMS = ("KeyRegis", "KeyDerive", "JoinOld", "JoinNew", "LeaveOld", "Encrypt", "Decrypt")
COLUMNS = [
    "algorithm", "n", "t", "u", "trials", "mean_us", "stddev_us",
    "pairings", "g1_exponentiations", "g1_multiplications", "inversions",
    "gt_exponentiations", "gt_multiplications",
]


@dataclass
class BenchRow:
    algorithm: str
    n: int
    t: int
    u: float
    trials: int
    mean_us: float
    stddev_us: float
    ops: dict[str, float]

    def as_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm, "n": self.n, "t": self.t, "u": round(self.u, 2),
            "trials": self.trials, "mean_us": round(self.mean_us, 1), "stddev_us": round(self.stddev_us, 1),
        }
        out.update({k: round(v, 2) for k, v in self.ops.items()})
        return out


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def select(self, algorithm: str) -> list[BenchRow]:
        return [r for r in self.rows if r.algorithm == algorithm]

    def write_csv(self, fh) -> None:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in self.rows:
            w.writerow(r.as_dict())


def _measure(fn: Callable[[], object], setup: Callable[[], tuple], trials: int, timed: bool) -> tuple[list[float], list[OpCounters], list[float]]:
    """Run ``fn(*setup())`` ``trials`` times after one warm-up.

    ``setup`` runs outside the timed region and returns ``(args, u)``.
    """
    args, _ = setup()
    fn(*args)
    times, counts, us = [], [], []
    gc_was = gc.isenabled()
    gc.disable()
    try:
        for _ in range(trials):
            args, u = setup()
            with count_ops() as c:
                t0 = time.perf_counter_ns()
                fn(*args)
                elapsed = time.perf_counter_ns() - t0
            times.append(elapsed / 1000.0 if timed else 0.0)
            counts.append(c)
            us.append(u)
    finally:
        if gc_was:
            gc.enable()
    return times, counts, us


def _row(name: str, n: int, t: int, times, counts, us) -> BenchRow:
    ops = {k: statistics.fmean(c.as_dict()[k] for c in counts) for k in counts[0].as_dict()}
    sd = statistics.stdev(times) if len(times) > 1 else 0.0
    return BenchRow(name, n, t, statistics.fmean(us), len(times), statistics.fmean(times), sd, ops)


def bench_size(n: int, occupancy: float = 0.8, trials: int = 10, rng=None, ops_only: bool = False,
               algorithms: Sequence[str] = ALGORITHMS) -> list[BenchRow]:
    rng = rng or random.Random()
    timed = not ops_only
    t = max(1, min(n - 1, round(occupancy * n)))
    params = globe_setup(128, n, 1, n, rng)
    pairs = {s: generate_key_pair(params, s, rng) for s in params.slots()}
    members = {s: pairs[s][0] for s in range(1, t + 1)}
    gid = rng.randbytes(16)
    g_info, _ = key_derive(params, gid, 1, members, 1, pairs[1][1])
    infos = {s: key_derive(params, gid, 1, members, s, pairs[s][1], verify_keys=False)[1] for s in members}
    newcomer = t + 1
    rows = []

    def run(name, fn, setup):
        if name in algorithms:
            rows.append(_row(name, n, t, *_measure(fn, setup, trials, timed)))

    run("KeyRegis", lambda s: generate_key_pair(params, s, rng), lambda: ((rng.randint(1, n),), 0))
    run("KeyDerive", lambda s: key_derive(params, gid, 1, members, s, pairs[s][1], verify_keys=False),
        lambda: ((rng.randint(1, t),), 0))

    g_join, rec_join = group_join(params, g_info, pairs[newcomer][0], newcomer, verify_key=False)
    run("JoinOld", lambda m: update_member(params, 1, m, rec_join, pairs[newcomer][0], check_against=g_join),
        lambda: ((infos[rng.randint(1, t)],), 0))
    enlarged = {**members, newcomer: pairs[newcomer][0]}
    run("JoinNew", lambda: key_derive(params, gid, 1, enlarged, newcomer, pairs[newcomer][1], round=2, verify_keys=False),
        lambda: ((), 0))

    def leave_setup():
        leaver = rng.randint(2, t) if t > 1 else 1
        g_l, rec = group_leave(params, g_info, pairs[leaver][0])
        stay = 1 if leaver != 1 else 2
        return (infos[stay], rec, pairs[leaver][0], g_l), 0

    if t > 1:
        run("LeaveOld", lambda m, rec, pk, g_l: update_member(params, 1, m, rec, pk, check_against=g_l), leave_setup)

    def pick_recipients():
        size = rng.randint(1, t)
        return frozenset(rng.sample(sorted(g_info.st), size))

    def encrypt_setup():
        U = pick_recipients()
        return (U,), len(U)

    run("Encrypt", lambda U: encrypt(params, g_info, U, rng), encrypt_setup)

    def decrypt_setup():
        U = pick_recipients()
        header, _ = encrypt(params, g_info, U, rng)
        me = rng.choice(sorted(U))
        return (header, me), len(U)

    run("Decrypt", lambda header, me: decrypt(params, g_info, header, me, infos[me]), decrypt_setup)
    return rows


def run_bench(sizes: Sequence[int], occupancy: float = 0.8, trials: int = 10, rng=None, ops_only: bool = False,
              algorithms: Sequence[str] = ALGORITHMS) -> BenchReport:
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be sorted ascending")
    if trials < 1:
        raise ValueError("need at least one trial")
    report = BenchReport()
    for n in sizes:
        log.info("benchmarking n=%d", n)
        report.rows.extend(bench_size(n, occupancy, trials, rng, ops_only, algorithms))
    return report


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx, my = statistics.fmean(lx), statistics.fmean(ly)
    return sum((a - mx) * (b - my) for a, b in zip(lx, ly)) / sum((a - mx) ** 2 for a in lx)
