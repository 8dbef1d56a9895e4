"""Prolonged systems: block-triangular form and block Jacobians.

Block p holds the (p + c_j - k_c)-th total derivatives of each equation j
for which that order is nonnegative; the top block holds every equation at
its full offset.  Jacobian entries are built canonically as
partial(F_j, x_m^(d_m - c_j)), which by the derivative-commutation identity
equals the partial of any prolonged copy with respect to its column
variable; all blocks therefore literally share entry expressions, making the
submatrix property exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .structure import OffsetPair
from .system import DaeSystem
from .tape import Tape


@dataclass(frozen=True)
class ProlongedSystem:
    source: DaeSystem
    offsets: OffsetPair
    k_c: int
    k_d: int
    # blocks[p] lists (eq_index, deriv_order, expression), ordered by eq_index
    blocks: tuple[tuple[tuple[int, int, ex.Expr], ...], ...]
    # var_partition[q] lists the jet variables of X^(q), ordered by var index
    var_partition: tuple[tuple[ex.JetVar, ...], ...]

    @property
    def n(self) -> int:
        return self.source.n_vars

    @property
    def top_block(self):
        return self.blocks[-1]

    def algebraic_constraints(self) -> list[ex.Expr]:
        """Equations of B_0 .. B_{k_c - 1} (empty when every c_i is zero)."""
        out = []
        for block in self.blocks[:-1]:
            out.extend(e for _, _, e in block)
        return out

    def all_equations(self) -> list[ex.Expr]:
        out = []
        for block in self.blocks:
            out.extend(e for _, _, e in block)
        return out

    def state_jets(self) -> list[ex.JetVar]:
        """Jet variables of orders below each d_j, in (var, order) order."""
        out = []
        for j, dj in enumerate(self.offsets.d):
            out.extend(ex.JetVar(j, k) for k in range(dj))
        return out

    def top_jets(self) -> list[ex.JetVar]:
        return [ex.JetVar(j, dj) for j, dj in enumerate(self.offsets.d)]


def prolong(sys: DaeSystem, off: OffsetPair) -> ProlongedSystem:
    n = sys.n_vars
    c, d = off.c, off.d
    k_c = max(c)
    k_d = max(d)

    derivs: list[list[ex.Expr]] = []
    for j, eq in enumerate(sys.equations):
        row = [eq]
        for _ in range(c[j]):
            row.append(ex.total_derivative(row[-1]))
        derivs.append(row)

    blocks = []
    for p in range(k_c + 1):
        block = []
        for j in range(n):
            r = p + c[j] - k_c
            if r >= 0:
                block.append((j, r, derivs[j][r]))
        blocks.append(tuple(block))

    partition = []
    for q in range(k_d + 1):
        part = []
        for m in range(n):
            k = q + d[m] - k_d
            if k >= 0:
                part.append(ex.JetVar(m, k))
        partition.append(tuple(part))

    return ProlongedSystem(sys, off, k_c, k_d, tuple(blocks), tuple(partition))


@dataclass
class BlockJacobian:
    block_index: int
    rows: tuple[tuple[int, int], ...]       # (eq_index, deriv_order) per row
    cols: tuple[ex.JetVar, ...]             # variables of X^(i + k_d - k_c)
    entries: tuple[tuple[ex.Expr, ...], ...]
    _tape: Tape | None = field(default=None, repr=False)
    _inputs: tuple[ex.Expr, ...] = field(default=(), repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.cols))

    def _compiled(self):
        if self._tape is None:
            leaves: list[ex.Expr] = [ex.tvar()]
            seen = {id(leaves[0])}
            for row in self.entries:
                for e in row:
                    for node in ex.postorder(e):
                        if node.kind in (ex.JET, ex.FROZEN) and id(node) not in seen:
                            seen.add(id(node))
                            leaves.append(node)
            flat = [e for row in self.entries for e in row]
            self._inputs = tuple(leaves)
            self._tape = Tape(flat, leaves)
        return self._tape, self._inputs

    def evaluate(self, b: ex.Binding) -> np.ndarray:
        tape, inputs = self._compiled()
        x = np.empty(len(inputs))
        for i, leaf in enumerate(inputs):
            if leaf.kind == ex.TVAR:
                x[i] = b.t
            elif leaf.kind == ex.JET:
                try:
                    x[i] = b.values[leaf.payload]
                except KeyError:
                    raise ex.UnboundVariable(
                        f"unbound jet variable {leaf.payload}") from None
            else:
                try:
                    x[i] = b.frozen[leaf.payload]
                except KeyError:
                    raise ex.UnboundVariable(
                        f"unbound frozen constant {leaf.payload!r}") from None
        m, n = self.shape
        return tape.eval_real(x).reshape(m, n)


def block_jacobian(ps: ProlongedSystem, i: int) -> BlockJacobian:
    """J_i: partials of block i with respect to X^(i + k_d - k_c)."""
    if not 0 <= i <= ps.k_c:
        raise IndexError(f"block index {i} out of range 0..{ps.k_c}")
    cols = ps.var_partition[i + ps.k_d - ps.k_c]
    c = ps.offsets.c
    rows = []
    entries = []
    for j, r, _ in ps.blocks[i]:
        rows.append((j, r))
        row = []
        for jv in cols:
            k = jv.order - r  # equals d_m - c_j
            if k < 0:
                row.append(ex.ZERO)
            else:
                row.append(ex.partial(ps.source.equations[j], ex.JetVar(jv.var_index, k)))
        entries.append(tuple(row))
    return BlockJacobian(i, tuple(rows), tuple(cols), tuple(entries))


def evaluate_jacobian(bj: BlockJacobian, b: ex.Binding) -> np.ndarray:
    return bj.evaluate(b)
