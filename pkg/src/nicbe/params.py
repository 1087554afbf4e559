"""Global setup: public system parameters and placeholder key tuples."""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import G1, G2, batch_coefficients, pairing_product, random_scalar
from .encoding import Kind, Reader, Writer
from .errors import CorruptFileError, ParameterError

SUITE = "nicbe-bls12381-v1"


@dataclass(frozen=True)
class PlaceholderTuple:
    """Key material standing in for every unoccupied slot of one group.

    ``A``/``B`` hold ĝ^α_i, ĝ^β_i; ``K[i-1][j-1]`` holds h_j^α_i · u^β_i and
    is ``None`` on the diagonal. All accessors take 1-based slots.
    """

    gamma: int
    A: tuple[G2, ...]
    B: tuple[G2, ...]
    K: tuple[tuple[G1 | None, ...], ...]

    def a(self, i: int) -> G2:
        return self.A[i - 1]

    def b(self, i: int) -> G2:
        return self.B[i - 1]

    def k(self, i: int, j: int) -> G1:
        if i == j:
            raise ParameterError(f"placeholder key K[{i}][{j}] does not exist")
        return self.K[i - 1][j - 1]


@dataclass(frozen=True)
class SystemParams:
    n: int
    tuple_count: int
    population: int
    g: G1
    g_hat: G2
    u: G1
    H: tuple[G1, ...]
    tuples: tuple[PlaceholderTuple, ...]
    security_level: int = 128
    suite: str = SUITE

    def h(self, j: int) -> G1:
        return self.H[j - 1]

    def tuple_for(self, gamma: int) -> PlaceholderTuple:
        if not 1 <= gamma <= len(self.tuples):
            raise ParameterError(f"tuple index {gamma} outside [1, {len(self.tuples)}]")
        return self.tuples[gamma - 1]

    def slots(self) -> range:
        return range(1, self.n + 1)

    def to_bytes(self) -> bytes:
        w = Writer(Kind.PARAMS)
        w.blob(self.suite.encode()).u16(self.security_level)
        w.u32(self.n).u32(self.tuple_count).u32(self.population)
        w.elem(self.g).elem(self.g_hat).elem(self.u).elems(self.H)
        w.u32(len(self.tuples))
        for t in self.tuples:
            w.u32(t.gamma).elems(t.A).elems(t.B)
            w.elems([x for row in t.K for x in row if x is not None])
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SystemParams":
        r = Reader(data, Kind.PARAMS)
        try:
            suite = r.blob().decode()
        except UnicodeDecodeError:
            raise CorruptFileError("suite tag is not text") from None
        if suite != SUITE:
            raise CorruptFileError(f"unsupported suite {suite!r}")
        level = r.u16()
        n, tuple_count, population = r.u32(), r.u32(), r.u32()
        if n < 2 or n > 4096:
            raise CorruptFileError(f"implausible group size n={n}")
        g, g_hat, u = r.g1(), r.g2(), r.g1()
        H = tuple(r.g1s())
        tuples = []
        for _ in range(r.count()):
            gamma = r.u32()
            A, B = tuple(r.g2s()), tuple(r.g2s())
            flat = r.g1s()
            if len(flat) != n * (n - 1):
                raise CorruptFileError(f"tuple {gamma}: expected {n * (n - 1)} K entries, got {len(flat)}")
            it = iter(flat)
            K = tuple(tuple(None if i == j else next(it) for j in range(n)) for i in range(n))
            tuples.append(PlaceholderTuple(gamma, A, B, K))
        r.done()
        return cls(n, tuple_count, population, g, g_hat, u, H, tuple(tuples), level, suite)


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def __bool__(self) -> bool:
        return self.ok


def globe_setup(security_level: int = 128, n: int = 8, tuple_count: int = 1, population: int | None = None, rng=None) -> SystemParams:
    """Generate public parameters for groups of at most ``n`` members.

    The placeholder exponents live only inside this call.
    """
    if security_level > 128:
        raise ParameterError(f"BLS12-381 provides 128-bit security, {security_level} requested")
    if n < 2:
        raise ParameterError(f"maximum group size must be at least 2, got {n}")
    if tuple_count < 1:
        raise ParameterError(f"need at least one placeholder tuple, got {tuple_count}")
    population = n if population is None else population
    if population < n:
        raise ParameterError(f"population bound {population} is smaller than n={n}")

    g, g_hat = G1.generator(), G2.generator()
    u = g ** random_scalar(rng)
    H = tuple(g ** random_scalar(rng) for _ in range(n))
    tuples = []
    for gamma in range(1, tuple_count + 1):
        A, B, K = [], [], []
        for i in range(n):
            alpha, beta = random_scalar(rng), random_scalar(rng)
            A.append(g_hat ** alpha)
            B.append(g_hat ** beta)
            u_beta = u ** beta
            K.append(tuple(None if j == i else (H[j] ** alpha) * u_beta for j in range(n)))
        tuples.append(PlaceholderTuple(gamma, tuple(A), tuple(B), tuple(K)))
    return SystemParams(n, tuple_count, population, g, g_hat, u, H, tuple(tuples), security_level)


def check_key_rows(p: SystemParams, rows) -> list[tuple[int, int]]:
    """Check e(K_j, ĝ) = e(h_j, A)·e(u, B) for a batch of key rows.

    ``rows`` yields ``(label, A, B, {j: K_j})``. One randomized product
    check covers every equation; only if it fails are the cells checked one
    at a time. Returns the failing ``(label, j)`` cells.
    """
    rows = list(rows)
    cells = [(label, A, B, j, K) for label, A, B, Ks in rows for j, K in sorted(Ks.items())]
    if not cells:
        return []
    transcript = b"".join(A.to_bytes() + B.to_bytes() + K.to_bytes() + j.to_bytes(4, "big") for _, A, B, j, K in cells)
    transcript += p.u.to_bytes() + b"".join(h.to_bytes() for h in p.H)
    r = batch_coefficients(transcript, len(cells))

    pairs = [(G1.msm([c[4] for c in cells], r), p.g_hat)]
    offset = 0
    for label, A, B, Ks in rows:
        js = sorted(Ks)
        coeffs = r[offset : offset + len(js)]
        offset += len(js)
        if not js:
            continue
        pairs.append((G1.msm([p.h(j) for j in js], coeffs).inverse(), A))
        pairs.append(((p.u ** sum(coeffs)).inverse(), B))
    if pairing_product(pairs).is_identity():
        return []

    bad = []
    for label, A, B, j, K in cells:
        if not pairing_product([(K, p.g_hat), (p.h(j).inverse(), A), (p.u.inverse(), B)]).is_identity():
            bad.append((label, j))
    return bad


def validate_params(p: SystemParams) -> ValidationReport:
    """List every violated invariant of ``p``; an empty report means valid.

    Subgroup membership is enforced when elements are decoded, so this
    covers shapes and the pairing relations between tuple entries.
    """
    report = ValidationReport()
    issues = report.issues
    if p.n < 2:
        issues.append(f"n={p.n} is below the minimum group size 2")
    if len(p.H) != p.n:
        issues.append(f"H has {len(p.H)} entries, expected n={p.n}")
    for j, h in enumerate(p.H, 1):
        if h.is_identity():
            issues.append(f"h_{j} is the identity")
    if p.u.is_identity():
        issues.append("u is the identity")
    if p.g != G1.generator() or p.g_hat != G2.generator():
        issues.append("generators differ from the standard BLS12-381 generators")
    if len(p.tuples) != p.tuple_count:
        issues.append(f"{len(p.tuples)} placeholder tuples present, header says {p.tuple_count}")
    if p.population < p.n:
        issues.append(f"population bound {p.population} below n={p.n}")
    if issues and any(s.startswith("H has") for s in issues):
        return report

    rows = []
    for idx, t in enumerate(p.tuples, 1):
        if t.gamma != idx:
            issues.append(f"tuple at position {idx} is labelled gamma={t.gamma}")
        if len(t.A) != p.n or len(t.B) != p.n or len(t.K) != p.n or any(len(row) != p.n for row in t.K):
            issues.append(f"tuple {t.gamma}: wrong dimensions")
            continue
        for i in range(1, p.n + 1):
            if t.K[i - 1][i - 1] is not None:
                issues.append(f"tuple {t.gamma}: diagonal cell ({i},{i}) must be absent")
            cells = {j: t.K[i - 1][j - 1] for j in range(1, p.n + 1) if j != i}
            if any(v is None for v in cells.values()):
                issues.append(f"tuple {t.gamma}: row {i} has missing entries")
                continue
            rows.append(((t.gamma, i), t.a(i), t.b(i), cells))
    for (gamma, i), j in check_key_rows(p, rows):
        issues.append(f"tuple {gamma}: cell ({i},{j}) fails the pairing consistency check")
    return report


def load_params(data: bytes, validate: bool = True) -> SystemParams:
    p = SystemParams.from_bytes(data)
    if validate:
        report = validate_params(p)
        if not report:
            raise CorruptFileError("parameter validation failed: " + "; ".join(report.issues))
    return p
