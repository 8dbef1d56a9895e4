"""Compilation of expression DAGs to flat instruction tapes.

Every numerical hot loop in the package (homotopy path tracking, block
Jacobian evaluation, the predict-project integrator) evaluates fixed systems
of expressions thousands of times.  Expressions are therefore compiled once
into a register-machine tape that a small kernel executes over float64 or
complex128.  The kernel has two interchangeable implementations: a Cython
extension (daestruct._tape_cy) and a pure-Python fallback (_tape_py), chosen
at import time.  Set DAESTRUCT_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os
import threading
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import DomainError, UnboundVariable

# opcodes (mirrored in _tape_cy.pyx; keep in sync)
OP_CONST = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_DIV = 4
OP_POWI = 5
OP_SIN = 6
OP_COS = 7
OP_TAN = 8
OP_TANH = 9
OP_EXP = 10
OP_LN = 11
OP_SQRT = 12

_CALL_OPS = {
    "sin": OP_SIN,
    "cos": OP_COS,
    "tan": OP_TAN,
    "tanh": OP_TANH,
    "exp": OP_EXP,
    "ln": OP_LN,
    "sqrt": OP_SQRT,
}

_ERRORS = {
    1: "division by zero",
    2: "ln of non-positive value",
    3: "sqrt of negative value",
    4: "zero raised to a negative power",
}

if os.environ.get("DAESTRUCT_PURE_PYTHON"):
    from . import _tape_py as _kernel
    BACKEND = "python"
else:
    try:
        from . import _tape_cy as _kernel
        BACKEND = "cython"
    except ImportError:  # extension not built; fall back
        from . import _tape_py as _kernel
        BACKEND = "python"


class Tape:
    """A compiled program evaluating a fixed list of expressions.

    Inputs are leaf expressions (t, jet variables, frozen constants) bound
    positionally; outputs follow the order of the compiled expression list.
    """

    def __init__(self, exprs: Sequence[ex.Expr], inputs: Sequence[ex.Expr]):
        self.n_inputs = len(inputs)
        self.n_outputs = len(exprs)
        slot: dict[int, int] = {}
        for i, leaf in enumerate(inputs):
            if leaf.kind not in (ex.TVAR, ex.JET, ex.FROZEN):
                raise ValueError("tape inputs must be leaf expressions")
            slot[id(leaf)] = i

        seen: set[int] = set(slot)
        nodes: list[ex.Expr] = []
        for e in exprs:
            for n in ex.postorder(e):
                if id(n) not in seen:
                    seen.add(id(n))
                    nodes.append(n)

        reg = dict(slot)
        consts: list[float] = []
        const_ix: dict[float, int] = {}
        ops, ia, ib, iout = [], [], [], []
        nreg = self.n_inputs
        for n in nodes:
            k = n.kind
            if k == ex.CONST:
                j = const_ix.get(n.payload)
                if j is None:
                    j = len(consts)
                    const_ix[n.payload] = j
                    consts.append(n.payload)
                ops.append(OP_CONST)
                ia.append(j)
                ib.append(0)
            elif k in (ex.TVAR, ex.JET, ex.FROZEN):
                raise UnboundVariable(f"leaf {n!r} is not among the tape inputs")
            elif k in (ex.ADD, ex.SUB, ex.MUL, ex.DIV):
                op = {ex.ADD: OP_ADD, ex.SUB: OP_SUB, ex.MUL: OP_MUL, ex.DIV: OP_DIV}[k]
                ops.append(op)
                ia.append(reg[id(n.a)])
                ib.append(reg[id(n.b)])
            elif k == ex.POW:
                ops.append(OP_POWI)
                ia.append(reg[id(n.a)])
                ib.append(n.payload)
            else:
                ops.append(_CALL_OPS[n.payload])
                ia.append(reg[id(n.a)])
                ib.append(0)
            reg[id(n)] = nreg
            iout.append(nreg)
            nreg += 1

        self.n_regs = nreg
        self.ops = np.asarray(ops, dtype=np.int32)
        self.ia = np.asarray(ia, dtype=np.int32)
        self.ib = np.asarray(ib, dtype=np.int32)
        self.iout = np.asarray(iout, dtype=np.int32)
        self.consts = np.asarray(consts, dtype=np.float64)
        self.out_regs = np.asarray([reg[id(e)] for e in exprs], dtype=np.int32)
        self._local = threading.local()

    def _buffers(self):
        buf = getattr(self._local, "buf", None)
        if buf is None:
            buf = (
                np.empty(self.n_regs, dtype=np.float64),
                np.empty(self.n_outputs, dtype=np.float64),
                np.empty(self.n_regs, dtype=np.complex128),
                np.empty(self.n_outputs, dtype=np.complex128),
                self.consts.astype(np.complex128),
            )
            self._local.buf = buf
        return buf

    def eval_real(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at float64 inputs x (length n_inputs); returns a copy."""
        regs, out, _, _, _ = self._buffers()
        regs[: self.n_inputs] = x
        err = _kernel.eval_f64(self.ops, self.ia, self.ib, self.iout,
                               self.consts, regs, self.out_regs, out)
        if err:
            raise DomainError(_ERRORS.get(err >> 24, "domain error") +
                              f" at tape instruction {err & 0xFFFFFF}")
        return out.copy()

    def eval_complex(self, z: np.ndarray) -> np.ndarray:
        """Evaluate at complex128 inputs; domain errors surface as inf/nan."""
        _, _, regs, out, cconsts = self._buffers()
        regs[: self.n_inputs] = z
        _kernel.eval_c128(self.ops, self.ia, self.ib, self.iout,
                          cconsts, regs, self.out_regs, out)
        return out.copy()


def compile_exprs(exprs: Sequence[ex.Expr], inputs: Sequence[ex.Expr]) -> Tape:
    return Tape(exprs, inputs)
