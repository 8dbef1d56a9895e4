"""Signature matrix and offset assignment problem (structural analysis).

The offsets (c, d) are the dual variables of a maximum-weight perfect
matching on the signature matrix: minimize sum(d) - sum(c) subject to
d_j - c_i >= sigma_ij and c_i >= 0.  The matching is found by a Hungarian
method on the negated matrix; the canonical (elementwise smallest) duals are
then produced by fixed-point iteration, which makes the result independent
of equation order and of tie-breaking in the matching.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyRow, NoPerfectMatching, NotSquare
from .expr import leading_order
from .system import DaeSystem

# sentinel for "variable absent": more negative than any legal order
MINUS_INF = -(1 << 30)


@dataclass(frozen=True)
class SignatureMatrix:
    n: int
    entries: tuple[tuple[int, ...], ...]  # MINUS_INF marks absent variables

    def __getitem__(self, ij: tuple[int, int]) -> int:
        return self.entries[ij[0]][ij[1]]


@dataclass(frozen=True)
class OffsetPair:
    c: tuple[int, ...]
    d: tuple[int, ...]
    delta: int
    transversal: tuple[int, ...]  # transversal[i] = column matched to row i

    def __post_init__(self):
        if min(self.c) != 0:
            raise ValueError("canonical offsets need min(c) == 0")
        if self.delta != sum(self.d) - sum(self.c):
            raise ValueError("delta must equal sum(d) - sum(c)")


def build_signature(sys: DaeSystem) -> SignatureMatrix:
    """Signature matrix: entry (i, j) is the highest order of variable j in
    equation i, MINUS_INF when absent."""
    if not sys.is_square():
        raise NotSquare(
            f"{sys.n_equations} equations but {sys.n_vars} dependent variables")
    n = sys.n_vars
    rows = []
    for i, eq in enumerate(sys.equations):
        row = []
        for j in range(n):
            k = leading_order(eq, j)
            row.append(MINUS_INF if k is None else k)
        if all(v == MINUS_INF for v in row):
            raise EmptyRow(f"equation {i + 1} references no dependent variable")
        rows.append(tuple(row))
    return SignatureMatrix(n, tuple(rows))


def _max_weight_matching(sig: SignatureMatrix) -> list[int]:
    """Hungarian method (shortest augmenting paths with potentials) on the
    negated signature matrix.  MINUS_INF entries are forbidden edges.
    Returns col_of_row; raises NoPerfectMatching when infeasible."""
    n = sig.n
    BIG = float("inf")
    # cost[i][j] for minimization
    cost = [[(-sig.entries[i][j]) if sig.entries[i][j] != MINUS_INF else BIG
             for j in range(n)] for i in range(n)]

    # standard O(n^3) formulation with 1-based virtual row/col 0
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j] = row matched to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [BIG] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = BIG
            j1 = -1
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            if delta == BIG:
                raise NoPerfectMatching(
                    "signature matrix admits no finite perfect matching")
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    col_of_row = [-1] * n
    for j in range(1, n + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    if any(c < 0 for c in col_of_row) or any(
            sig.entries[i][col_of_row[i]] == MINUS_INF for i in range(n)):
        raise NoPerfectMatching("signature matrix admits no finite perfect matching")
    return col_of_row


def solve_offsets(sig: SignatureMatrix) -> OffsetPair:
    """Canonical smallest nonnegative duals of the offset problem."""
    n = sig.n
    match = _max_weight_matching(sig)
    c = [0] * n
    for _ in range(n * n + 2):
        d = [max(sig.entries[i][j] + c[i]
                 for i in range(n) if sig.entries[i][j] != MINUS_INF)
             for j in range(n)]
        c_new = [d[match[i]] - sig.entries[i][match[i]] for i in range(n)]
        if c_new == c:
            break
        c = c_new
    else:  # pragma: no cover - iteration provably terminates
        raise RuntimeError("offset fixed point failed to stabilize")

    delta = sum(d) - sum(c)
    pair = OffsetPair(tuple(c), tuple(d), delta, tuple(match))
    _check_feasible(sig, pair)
    return pair


def _check_feasible(sig: SignatureMatrix, off: OffsetPair) -> None:
    for i in range(sig.n):
        for j in range(sig.n):
            s = sig.entries[i][j]
            if s != MINUS_INF and off.d[j] - off.c[i] < s:
                raise ValueError(f"offsets infeasible at entry ({i}, {j})")
        j = off.transversal[i]
        if off.d[j] - off.c[i] != sig.entries[i][j]:
            raise ValueError(f"complementary slackness violated in row {i}")


def extended_delta(top_delta: int, n_constraint_eqs: int) -> int:
    """Degrees of freedom of a non-square system: the optimal value of its
    square top block minus the number of extra constraint equations."""
    if n_constraint_eqs < 0:
        raise ValueError("constraint equation count must be nonnegative")
    return top_delta - n_constraint_eqs
