"""Pure-Python tape kernel, API-compatible with the Cython extension.

Roughly two orders of magnitude slower than the compiled kernel; kept as an
import-time fallback and as the baseline for benchmarks/bench_eval.py.
"""

from __future__ import annotations

import cmath
import math


def eval_f64(ops, ia, ib, iout, consts, regs, out_regs, out) -> int:
    o = ops.tolist()
    a = ia.tolist()
    b = ib.tolist()
    w = iout.tolist()
    c = consts.tolist()
    r = regs.tolist()
    for i in range(len(o)):
        op = o[i]
        if op == 0:
            v = c[a[i]]
        elif op == 1:
            v = r[a[i]] + r[b[i]]
        elif op == 2:
            v = r[a[i]] - r[b[i]]
        elif op == 3:
            v = r[a[i]] * r[b[i]]
        elif op == 4:
            d = r[b[i]]
            if d == 0.0:
                return (1 << 24) | i
            v = r[a[i]] / d
        elif op == 5:
            base = r[a[i]]
            n = b[i]
            if base == 0.0 and n < 0:
                return (4 << 24) | i
            v = base ** n
        elif op == 6:
            v = math.sin(r[a[i]])
        elif op == 7:
            v = math.cos(r[a[i]])
        elif op == 8:
            v = math.tan(r[a[i]])
        elif op == 9:
            v = math.tanh(r[a[i]])
        elif op == 10:
            x = r[a[i]]
            v = math.exp(x) if x < 709.0 else math.inf
        elif op == 11:
            x = r[a[i]]
            if x <= 0.0:
                return (2 << 24) | i
            v = math.log(x)
        else:
            x = r[a[i]]
            if x < 0.0:
                return (3 << 24) | i
            v = math.sqrt(x)
        r[w[i]] = v
    regs[:] = r
    for k in range(len(out_regs)):
        out[k] = r[out_regs[k]]
    return 0


def eval_c128(ops, ia, ib, iout, consts, regs, out_regs, out) -> int:
    o = ops.tolist()
    a = ia.tolist()
    b = ib.tolist()
    w = iout.tolist()
    c = consts.tolist()
    r = regs.tolist()
    for i in range(len(o)):
        op = o[i]
        if op == 0:
            v = c[a[i]]
        elif op == 1:
            v = r[a[i]] + r[b[i]]
        elif op == 2:
            v = r[a[i]] - r[b[i]]
        elif op == 3:
            v = r[a[i]] * r[b[i]]
        elif op == 4:
            d = r[b[i]]
            v = r[a[i]] / d if d != 0 else complex(math.inf, math.inf)
        elif op == 5:
            base = r[a[i]]
            n = b[i]
            if base == 0 and n < 0:
                v = complex(math.inf, math.inf)
            else:
                v = base ** n
        elif op == 6:
            v = cmath.sin(r[a[i]])
        elif op == 7:
            v = cmath.cos(r[a[i]])
        elif op == 8:
            v = cmath.tan(r[a[i]])
        elif op == 9:
            v = cmath.tanh(r[a[i]])
        elif op == 10:
            v = cmath.exp(r[a[i]])
        elif op == 11:
            x = r[a[i]]
            v = cmath.log(x) if x != 0 else complex(-math.inf, 0.0)
        else:
            v = cmath.sqrt(r[a[i]])
        r[w[i]] = v
    regs[:] = r
    for k in range(len(out_regs)):
        out[k] = r[out_regs[k]]
    return 0
