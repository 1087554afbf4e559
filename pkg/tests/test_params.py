import hashlib
import random
from dataclasses import replace

import pytest

from nicbe.algebra import G1, pairing_product
from nicbe.errors import CorruptFileError, ParameterError
from nicbe.params import PlaceholderTuple, SystemParams, globe_setup, load_params, validate_params


@pytest.fixture(scope="module")
def params():
    return globe_setup(128, 6, 2, 10, random.Random(11))


def test_shapes(params):
    assert params.n == 6 and params.tuple_count == 2 and params.population == 10
    assert len(params.H) == 6
    for t in params.tuples:
        assert len(t.A) == len(t.B) == 6
        for i in range(6):
            assert t.K[i][i] is None
            assert sum(x is not None for x in t.K[i]) == 5


def test_placeholder_cells_satisfy_pairing_relation(params):
    p = params
    t = p.tuple_for(2)
    for i in p.slots():
        for j in p.slots():
            if i == j:
                continue
            check = pairing_product([(t.k(i, j), p.g_hat), (p.h(j).inverse(), t.a(i)), (p.u.inverse(), t.b(i))])
            assert check.is_identity()


def test_validate_accepts_fresh(params):
    report = validate_params(params)
    assert report.ok and bool(report)


def test_validate_names_perturbed_cell(params):
    t = params.tuples[0]
    K = [list(row) for row in t.K]
    K[2][4] = K[2][4] * G1.generator()
    bad = replace(params, tuples=(PlaceholderTuple(1, t.A, t.B, tuple(tuple(r) for r in K)), params.tuples[1]))
    report = validate_params(bad)
    assert not report.ok
    assert report.issues == ["tuple 1: cell (3,5) fails the pairing consistency check"]


def test_validate_missing_h(params):
    bad = replace(params, H=params.H[:-1])
    report = validate_params(bad)
    assert any("H has 5 entries, expected n=6" in s for s in report.issues)


def test_validate_swapped_A(params):
    t = params.tuples[1]
    A = list(t.A)
    A[0], A[1] = A[1], A[0]
    bad = replace(params, tuples=(params.tuples[0], replace(t, A=tuple(A))))
    issues = validate_params(bad).issues
    assert issues and all(s.startswith("tuple 2: cell (1,") or s.startswith("tuple 2: cell (2,") for s in issues)


@pytest.mark.parametrize("kwargs", [
    {"n": 1}, {"n": 0}, {"n": 4, "tuple_count": 0}, {"n": 4, "population": 3}, {"n": 4, "security_level": 256},
])
def test_setup_rejects_bad_sizes(kwargs):
    with pytest.raises(ParameterError):
        globe_setup(**kwargs)


def test_tuple_index_range(params):
    with pytest.raises(ParameterError):
        params.tuple_for(0)
    with pytest.raises(ParameterError):
        params.tuple_for(3)
    with pytest.raises(ParameterError):
        params.tuples[0].k(2, 2)


def test_roundtrip_and_determinism():
    a = globe_setup(128, 5, 2, None, random.Random(99)).to_bytes()
    b = globe_setup(128, 5, 2, None, random.Random(99)).to_bytes()
    assert hashlib.sha256(a).digest() == hashlib.sha256(b).digest()
    p = load_params(a)
    assert p.to_bytes() == a
    assert globe_setup(128, 5, 2, None, random.Random(98)).to_bytes() != a


def test_load_rejects_tampered_cell(params):
    data = bytearray(params.to_bytes())
    # swap two K cells of the same tuple: every element stays valid but relations break
    t = params.tuples[1]
    x, y = t.k(1, 2).to_bytes(), t.k(1, 3).to_bytes()
    i, j = data.index(x), data.index(y)
    data[i:i + 48], data[j:j + 48] = y, x
    with pytest.raises(CorruptFileError, match="tuple 2: cell"):
        load_params(bytes(data))
    assert SystemParams.from_bytes(bytes(data)).n == 6


@pytest.mark.slow
def test_n100_setup_and_validation():
    p = globe_setup(128, 100, 1, None, random.Random(1))
    assert validate_params(p).ok
    assert load_params(p.to_bytes()).to_bytes() == p.to_bytes()
