"""Benchmark DAE systems used across the test suite.

Five systems from the DAE literature (transistor amplifier, nonlinearly
modified pendulum, ring modulator, a degenerate index-1 system with known
exact solution, and the bending beam), plus small synthetic systems.
"""

from __future__ import annotations

import math

from daestruct import expr as ex
from daestruct.system import DaeSystem


def J(j: int, k: int = 0) -> ex.Expr:
    return ex.jet(j, k)


def fn(name: str, a) -> ex.Expr:
    return ex.call(name, ex.as_expr(a))


T = ex.tvar()


def example4() -> DaeSystem:
    """Index-1 system whose top-block Jacobian vanishes on the whole
    constraint variety y = x^2; exact solution x = 2 + sin t."""
    x, y = J(0), J(1)
    xp, yp = J(0, 1), J(1, 1)
    f1 = 2 * y * xp - x * yp - x + fn("sin", T) + 2
    f2 = y - x**2
    return DaeSystem((f1, f2), ("x", "y"), name="example4")


EXAMPLE4_EXACT = (lambda t: 2 + math.sin(t), lambda t: (2 + math.sin(t)) ** 2)


def beam(lam: float = 1.0) -> DaeSystem:
    """Bending beam under collinear moments; for lam=1 the constraint
    factors into the two branches y1 = y2 and y1 = -y2."""
    y1, y2 = J(0), J(1)
    y1pp, y2pp = J(0, 2), J(1, 2)
    f1 = y1pp + y2pp + (1 - fn("sin", T)) / 5 + y1
    f2 = lam * y1**2 - y2**2
    return DaeSystem((f1, f2), ("y1", "y2"), name="beam")


def beam_singular_exact(t: float) -> float:
    """y1(t) on the degenerate branch (y2 = -y1)."""
    return -(1.0 - math.sin(t)) / 5.0


AMP = dict(ub=6.0, uf=0.026, alpha=0.99, beta=1e-6,
           r0=1000.0, r=9000.0,
           c1=1e-6, c2=2e-6, c3=3e-6, c4=4e-6, c5=5e-6)

AMP_INIT = (0.0, 3.0, 3.0, 6.0, 3.0, 3.0, 0.0, 0.0)


def amplifier() -> DaeSystem:
    """Transistor amplifier: linear in the derivatives with identically
    rank-deficient leading Jacobian (rank 5 of 8)."""
    p = AMP
    x = [J(i) for i in range(8)]
    xd = [J(i, 1) for i in range(8)]

    def f(u):
        return p["beta"] * (fn("exp", u / p["uf"]) - 1)

    ue = 0.1 * fn("sin", 200 * math.pi * T)
    r = p["r"]
    eqs = (
        p["c1"] * (xd[0] - xd[1]) + (x[0] - ue) / p["r0"],
        p["c1"] * (xd[0] - xd[1]) - (1 - p["alpha"]) * f(x[1] - x[2])
        + p["ub"] / r - x[1] * (1 / r + 1 / r),
        p["c2"] * xd[2] + x[2] / r - f(x[1] - x[2]),
        p["c3"] * (xd[3] - xd[4]) + x[3] / r - p["ub"] / r + p["alpha"] * f(x[1] - x[2]),
        p["c3"] * (xd[3] - xd[4]) - x[4] * (1 / r + 1 / r) + p["ub"] / r
        - (1 - p["alpha"]) * f(x[4] - x[5]),
        p["c4"] * xd[5] + x[5] / r - f(x[4] - x[5]),
        p["c5"] * (xd[6] - xd[7]) + x[6] / r - p["ub"] / r + p["alpha"] * f(x[4] - x[5]),
        p["c5"] * (xd[6] - xd[7]) - x[7] / r,
    )
    return DaeSystem(eqs, tuple(f"x{i+1}" for i in range(8)), name="amplifier")


PEND_G = 9.8
PEND_INIT = (0.6, 0.8, math.pi / 2, 0.0, 0.0)


def pendulum() -> DaeSystem:
    """Nonlinearly modified pendulum (index 3, symbolic cancellation)."""
    x1, x2, x3, x4, x5 = (J(i) for i in range(5))
    d1, d2, d3, d4, d5 = (J(i, 1) for i in range(5))
    eqs = (
        d4 - x1 * x2 * fn("cos", x3),
        d5 - x2**2 * fn("cos", x3) * fn("sin", x3) + PEND_G,
        x1**2 + x2**2 * fn("sin", x3) ** 2 - 1,
        fn("tanh", d1 - x4),
        d2 * fn("sin", x3) + x2 * d3 * fn("cos", x3) - x5,
    )
    return DaeSystem(eqs, ("x1", "x2", "x3", "x4", "x5"), name="pendulum")


RING = dict(c=1.6e-8, cp=1e-8, r=25000.0, rp=50.0, lh=4.45,
            ls1=0.002, ls2=5e-4, ls3=5e-4, rg1=36.3, rg2=17.3,
            ri=50.0, rc=600.0, gamma=40.67286402e-9, delta=17.7493332)

RING_INIT = (0.0,) * 15


def ring_modulator() -> DaeSystem:
    """Ring modulator: 11 differential plus 4 algebraic equations, leading
    Jacobian identically of rank 14."""
    p = RING
    x = [J(i) for i in range(15)]
    xd = [J(i, 1) for i in range(15)]
    uin1 = 0.5 * fn("sin", 2000 * math.pi * T)
    uin2 = 2 * fn("sin", 20000 * math.pi * T)
    ud1 = x[2] - x[4] - x[6] - uin2
    ud2 = -x[3] + x[5] - x[6] - uin2
    ud3 = x[3] + x[4] + x[6] + uin2
    ud4 = -x[2] - x[5] + x[6] + uin2

    def G(u):
        return p["gamma"] * (fn("exp", p["delta"] * u) - 1)

    eqs = (
        p["c"] * xd[0] - x[7] - 0.5 * x[9] + 0.5 * x[10] + x[13] - x[0] / p["r"],
        p["c"] * xd[1] - x[8] - 0.5 * x[11] + 0.5 * x[12] + x[14] - x[1] / p["r"],
        x[9] - G(ud1) + G(ud4),
        x[10] - G(ud2) + G(ud3),
        x[11] + G(ud1) - G(ud3),
        x[12] + G(ud2) - G(ud4),
        xd[6] + (x[6] / p["rp"] - G(ud1) - G(ud2) + G(ud3) + G(ud4)) / p["cp"],
        xd[7] + x[0] / p["lh"],
        xd[8] + x[1] / p["lh"],
        xd[9] + (x[2] - 0.5 * x[0] + p["rg2"] * x[9]) / p["ls2"],
        xd[10] + (-x[3] + 0.5 * x[0] + p["rg2"] * x[10]) / p["ls3"],
        xd[11] + (x[4] - 0.5 * x[1] + p["rg2"] * x[11]) / p["ls2"],
        xd[12] + (-x[5] + 0.5 * x[1] + p["rg2"] * x[12]) / p["ls3"],
        xd[13] + (x[0] + (p["rg1"] + p["ri"]) * x[13] - uin1) / p["ls1"],
        xd[14] + (x[1] + (p["rc"] + p["rg1"]) * x[14]) / p["ls1"],
    )
    return DaeSystem(eqs, tuple(f"x{i+1}" for i in range(15)), name="ring")


# --- small synthetic systems -------------------------------------------------


def regular_parabola() -> DaeSystem:
    """Constraint y = x^2 with a top block that is regular off x = -1/2."""
    x, y = J(0), J(1)
    return DaeSystem((J(0, 1) + J(1, 1) - fn("cos", T), y - x**2),
                     ("x", "y"), name="regular_parabola")


def identity_structure() -> DaeSystem:
    """Plain ODE x' = f(x): leading Jacobian is the identity."""
    return DaeSystem((J(0, 1) - J(1), J(1, 1) - J(0) * J(1)),
                     ("x1", "x2"), name="identity_structure")


def inconsistent_circle() -> DaeSystem:
    """x^2 + y^2 = 1 with x x' + y y' = -1: no solution exists."""
    x, y = J(0), J(1)
    return DaeSystem((x**2 + y**2 - 1, x * J(0, 1) + y * J(1, 1) + 1),
                     ("x", "y"), name="inconsistent_circle")


def fold_1d() -> DaeSystem:
    """2 x x' + 1 = 0: solution x = sqrt(x0^2 - t) hits a fold where the
    leading Jacobian 2x vanishes."""
    return DaeSystem((2 * J(0) * J(0, 1) + 1,), ("x",), name="fold_1d")


def saturating_actuator() -> DaeSystem:
    """tanh(x') = t: the leading derivative saturates, so no solution
    exists past t = 1 and the top-block solve must fail there."""
    return DaeSystem((fn("tanh", J(0, 1)) - T,), ("x",), name="saturating")
