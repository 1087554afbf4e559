"""Brute-force reference computations.

Everything here is evaluated term by term from the public keys, the
placeholder tuple and explicit index sets. Nothing is shared with the
optimized code paths in :mod:`nicbe.group` and :mod:`nicbe.broadcast`, so
agreement between the two is meaningful evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .algebra import G1, G2, GT, pairing
from .broadcast import BroadcastHeader
from .group import GroupInfo, MemberInfo
from .params import PlaceholderTuple, SystemParams
from .registry import MemberPublicKey, MemberSecretKey


def _prod(identity, terms: Iterable):
    acc = identity
    for t in terms:
        acc = acc * t
    return acc


@dataclass
class OracleState:
    n: int
    tup: PlaceholderTuple
    pks: dict[int, MemberPublicKey]
    S: frozenset[int]
    S_bar: frozenset[int]
    Y1: G2
    Y2: G2
    dk_hat: dict[int, tuple[G1, ...]]
    d: dict[int, G1]


def oracle_group_state(
    params: SystemParams,
    gamma: int,
    pks: Mapping[int, MemberPublicKey],
    sks: Mapping[int, MemberSecretKey],
    occupancy: Iterable[int],
) -> OracleState:
    """Ω, every member's helper array and every d_i for an arbitrary occupancy."""
    n = params.n
    tup = params.tuples[gamma - 1]
    S = frozenset(occupancy)
    S_bar = frozenset(i for i in range(1, n + 1) if i not in S)

    Y1 = _prod(G2.identity(), [pks[i].A for i in sorted(S)] + [tup.A[i - 1] for i in sorted(S_bar)])
    Y2 = _prod(G2.identity(), [pks[i].B for i in sorted(S)] + [tup.B[i - 1] for i in sorted(S_bar)])

    def helper(i: int) -> G1:
        real = [pks[j].K[i] for j in sorted(S) if j != i]
        placeholder = [tup.K[j - 1][i - 1] for j in sorted(S_bar) if j != i]
        return _prod(G1.identity(), real + placeholder)

    array = tuple(helper(i) for i in range(1, n + 1))
    return OracleState(
        n, tup, dict(pks), S, S_bar, Y1, Y2,
        {i: array for i in S},
        {i: array[i - 1] * sks[i].SK for i in S},
    )


def oracle_contiguous_state(
    params: SystemParams,
    gamma: int,
    pks: Mapping[int, MemberPublicKey],
    sks: Mapping[int, MemberSecretKey],
    t: int,
) -> OracleState:
    """The literal contiguous form: members hold slots 1..t, placeholders t+1..n."""
    n = params.n
    tup = params.tuples[gamma - 1]
    Y1 = _prod(G2.identity(), [pks[i].A for i in range(1, t + 1)])
    Y1 = _prod(Y1, [tup.A[i - 1] for i in range(t + 1, n + 1)])
    Y2 = _prod(G2.identity(), [pks[i].B for i in range(1, t + 1)])
    Y2 = _prod(Y2, [tup.B[i - 1] for i in range(t + 1, n + 1)])
    array = []
    for i in range(1, n + 1):
        v = _prod(G1.identity(), [pks[j].K[i] for j in range(1, t + 1) if j != i])
        v = _prod(v, [tup.K[j - 1][i - 1] for j in range(t + 1, n + 1) if j != i])
        array.append(v)
    array = tuple(array)
    S = frozenset(range(1, t + 1))
    return OracleState(
        n, tup, dict(pks), S, frozenset(range(t + 1, n + 1)), Y1, Y2,
        {i: array for i in S},
        {i: array[i - 1] * sks[i].SK for i in S},
    )


def oracle_session_key(params: SystemParams, state: OracleState, U: Iterable[int], rho: int) -> GT:
    """k = e(u^ρ, ∏_{S} B_i · ∏_{Ū} B_iγ · ∏_{S̄} B_iγ), evaluated as written."""
    U = frozenset(U)
    U_bar = state.S - U
    terms = [state.pks[i].B for i in sorted(state.S)]
    terms += [state.tup.B[i - 1] for i in sorted(U_bar)]
    terms += [state.tup.B[i - 1] for i in sorted(state.S_bar)]
    return pairing(params.u ** rho, _prod(G2.identity(), terms))


def oracle_header(params: SystemParams, state: OracleState, U: Iterable[int], rho: int) -> tuple[G2, G2]:
    U_bar = state.S - frozenset(U)
    Y1_hat = _prod(state.Y1, [state.tup.A[i - 1] for i in sorted(U_bar)])
    return params.g_hat ** rho, Y1_hat ** rho


def excluded_member_attempt(params: SystemParams, g_info: GroupInfo, header: BroadcastHeader, slot: int, m_info: MemberInfo) -> GT:
    """Best computation available to an excluded member ``slot`` ∈ Ū.

    It runs the recipient formula but must skip its own placeholder factor
    K_{ii,γ}, which does not exist.
    """
    tup = params.tuples[g_info.gamma - 1]
    U_bar = g_info.st - header.recipients
    d_hat = _prod(m_info.d, [tup.K[l - 1][slot - 1] for l in sorted(U_bar) if l != slot])
    return pairing(d_hat, header.C1) * pairing(params.h(slot), header.C2).inverse()


def member_equal(a: MemberInfo, b: MemberInfo) -> bool:
    """Byte-level comparison of the cryptographic content of two member states."""
    return (
        a.slot == b.slot
        and [x.to_bytes() for x in a.dk_hat] == [x.to_bytes() for x in b.dk_hat]
        and a.d.to_bytes() == b.d.to_bytes()
    )
