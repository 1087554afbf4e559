import io
import math
import random

import pytest

from nicbe.bench import ALGORITHMS, COLUMNS, bench_size, loglog_slope, run_bench


@pytest.fixture(scope="module")
def rows():
    out = {}
    for n in (4, 6, 9):
        for r in bench_size(n, trials=4, rng=random.Random(n), ops_only=True):
            out[r.algorithm, n] = r
    return out


@pytest.mark.parametrize("n", [4, 6, 9])
def test_counts_match_formulas(rows, n):
    t = round(0.8 * n)
    reg = rows["KeyRegis", n].ops
    assert reg["g1_exponentiations"] == n + 3 and reg["g1_multiplications"] == n and reg["pairings"] == 0

    for name in ("KeyDerive", "JoinNew"):
        kd = rows[name, n].ops
        assert kd["g1_multiplications"] == n * n - 1
        assert kd["pairings"] == 3 and kd["inversions"] == 2 and kd["g1_exponentiations"] == 0

    for name in ("JoinOld", "LeaveOld"):
        upd = rows[name, n].ops
        assert upd["g1_multiplications"] == 2 * n - 1
        assert upd["inversions"] == (n - 1) + 2 and upd["pairings"] == 3

    enc = rows["Encrypt", n]
    assert enc.ops["pairings"] == 1 and enc.ops["g1_exponentiations"] == 2 and enc.ops["gt_exponentiations"] == 1
    assert enc.ops["g1_multiplications"] == pytest.approx(2 * (t - enc.u))

    dec = rows["Decrypt", n]
    assert dec.ops["pairings"] == 2 and dec.ops["inversions"] == 1
    assert dec.ops["g1_multiplications"] == pytest.approx(t - dec.u)


def test_keyderive_multiplications_quadratic(rows):
    ns = [4, 6, 9]
    slope = loglog_slope(ns, [rows["KeyDerive", n].ops["g1_multiplications"] for n in ns])
    assert 1.8 <= slope <= 2.2


def test_report_csv_layout():
    report = run_bench([4, 5], trials=2, rng=random.Random(0), ops_only=True, algorithms=["Decrypt", "KeyRegis"])
    buf = io.StringIO()
    report.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == COLUMNS
    assert len(lines) == 5
    assert {r.algorithm for r in report.rows} == {"Decrypt", "KeyRegis"}
    assert len(report.select("Decrypt")) == 2


def test_timed_rows_report_spread():
    rows = bench_size(4, trials=10, rng=random.Random(2), algorithms=["Decrypt"])
    (row,) = rows
    assert row.trials == 10 and row.mean_us > 0 and row.stddev_us >= 0


def test_run_bench_rejects_unsorted():
    with pytest.raises(ValueError):
        run_bench([5, 4])
    with pytest.raises(ValueError):
        run_bench([4], trials=0)


def test_loglog_slope():
    xs = [10, 20, 40, 80]
    assert loglog_slope(xs, [x ** 2 for x in xs]) == pytest.approx(2.0)
    assert loglog_slope(xs, [3 * math.sqrt(x) for x in xs]) == pytest.approx(0.5)


def test_algorithm_names():
    assert ALGORITHMS == ("KeyRegis", "KeyDerive", "JoinOld", "JoinNew", "LeaveOld", "Encrypt", "Decrypt")


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="constant 3-pairing consistency check dominates KeyDerive at n=10; see README")
def test_keyderive_time_ratio():
    report = run_bench([10, 100], trials=10, rng=random.Random(3), algorithms=["KeyDerive"])
    small, large = (r.mean_us for r in report.select("KeyDerive"))
    assert large / small >= 20
