"""Expression core: a closed term algebra over jet variables.

Expressions are immutable DAGs with hash-consing, so structurally equal
subterms are shared and identity comparison is cheap.  Simplification is
limited to constant folding and 0/1 identities; anything fancier would risk
nondeterministic output.  Supported leaves are real constants, the
independent variable t, jet variables x_j^(k), and named frozen constants
(used by the regularizer for the xi placeholders).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .errors import DomainError, NonPolynomialConstraint, OrderLimitError, UnboundVariable

MAX_ORDER = 64

# node kinds
CONST = "const"
TVAR = "t"
JET = "jet"
FROZEN = "frozen"
ADD = "+"
SUB = "-"
MUL = "*"
DIV = "/"
POW = "powi"
CALL = "call"

FUNCTIONS = ("sin", "cos", "tan", "tanh", "exp", "ln", "sqrt")

_REAL_FN: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "tanh": math.tanh,
    "exp": math.exp,
}


@dataclass(frozen=True, slots=True)
class JetVar:
    """A dependent variable paired with a derivative order."""

    var_index: int
    order: int

    def __post_init__(self):
        if self.var_index < 0 or self.order < 0:
            raise ValueError("jet variable needs var_index >= 0 and order >= 0")

    def shifted(self, dk: int) -> "JetVar":
        return JetVar(self.var_index, self.order + dk)


class Expr:
    """One interned node of an expression DAG.  Construct via the module
    functions (const, tvar, jet, ...) or operator overloads, never directly."""

    __slots__ = ("kind", "a", "b", "payload", "_hash")

    def __init__(self, kind, a, b, payload, h):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "payload", payload)
        object.__setattr__(self, "_hash", h)

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        # interning makes structural equality coincide with identity
        return self is other

    def __repr__(self):
        return f"Expr({format_expr(self)})"

    # arithmetic sugar, accepting plain numbers on either side
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, n):
        return powi(self, n)

    def __neg__(self):
        return mul(const(-1.0), self)


_table: dict[tuple, Expr] = {}


def _intern(kind, a, b, payload) -> Expr:
    key = (kind, None if a is None else id(a), None if b is None else id(b), payload)
    node = _table.get(key)
    if node is None:
        h = hash(key)
        node = Expr(kind, a, b, payload, h)
        _table[key] = node
    return node


ZERO: Expr
ONE: Expr


def const(value: float) -> Expr:
    return _intern(CONST, None, None, float(value))


def tvar() -> Expr:
    return _intern(TVAR, None, None, None)


def jet(var_index: int, order: int = 0) -> Expr:
    return _intern(JET, None, None, JetVar(var_index, order))


def jetvar(v: JetVar) -> Expr:
    return _intern(JET, None, None, v)


def frozen(name: str) -> Expr:
    return _intern(FROZEN, None, None, name)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def _is_const(e: Expr, v=None) -> bool:
    return e.kind == CONST and (v is None or e.payload == v)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.payload + b.payload)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return _intern(ADD, a, b, None)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.payload - b.payload)
    if _is_const(b, 0.0):
        return a
    return _intern(SUB, a, b, None)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.payload * b.payload)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return _intern(MUL, a, b, None)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b) and b.payload != 0.0 and _is_const(a):
        return const(a.payload / b.payload)
    if _is_const(b, 1.0):
        return a
    return _intern(DIV, a, b, None)


def powi(a: Expr, n: int) -> Expr:
    n = int(n)
    if n == 0:
        return const(1.0)
    if n == 1:
        return a
    if _is_const(a) and (a.payload != 0.0 or n > 0):
        return const(a.payload ** n)
    return _intern(POW, a, None, n)


def call(fname: str, a: Expr) -> Expr:
    if fname not in FUNCTIONS:
        raise ValueError(f"unknown function {fname!r}")
    if _is_const(a):
        v = _eval_call(fname, a.payload)
        if math.isfinite(v):
            return const(v)
    return _intern(CALL, a, None, fname)


ZERO = const(0.0)
ONE = const(1.0)


def _eval_call(fname: str, x: float) -> float:
    if fname == "ln":
        if x <= 0.0:
            raise DomainError(f"ln of non-positive value {x}")
        return math.log(x)
    if fname == "sqrt":
        if x < 0.0:
            raise DomainError(f"sqrt of negative value {x}")
        return math.sqrt(x)
    return _REAL_FN[fname](x)


# ---------------------------------------------------------------------------
# traversal


def postorder(e: Expr) -> list[Expr]:
    """Unique nodes of e in child-before-parent order (iterative, DAG-aware)."""
    out: list[Expr] = []
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            out.append(node)
        else:
            stack.append((node, True))
            if node.b is not None:
                stack.append((node.b, False))
            if node.a is not None:
                stack.append((node.a, False))
    return out


@dataclass
class Binding:
    """Values for the independent variable, jet variables and frozen constants."""

    t: float = 0.0
    values: dict[JetVar, float] = None
    frozen: dict[str, float] = None

    def __post_init__(self):
        if self.values is None:
            self.values = {}
        if self.frozen is None:
            self.frozen = {}


def evaluate(e: Expr, b: Binding) -> float:
    """Evaluate e at the binding.  Raises UnboundVariable / DomainError."""
    vals: dict[int, float] = {}
    for node in postorder(e):
        k = node.kind
        if k == CONST:
            v = node.payload
        elif k == TVAR:
            v = b.t
        elif k == JET:
            try:
                v = b.values[node.payload]
            except KeyError:
                raise UnboundVariable(f"unbound jet variable {node.payload}") from None
        elif k == FROZEN:
            try:
                v = b.frozen[node.payload]
            except KeyError:
                raise UnboundVariable(f"unbound frozen constant {node.payload!r}") from None
        elif k == ADD:
            v = vals[id(node.a)] + vals[id(node.b)]
        elif k == SUB:
            v = vals[id(node.a)] - vals[id(node.b)]
        elif k == MUL:
            v = vals[id(node.a)] * vals[id(node.b)]
        elif k == DIV:
            d = vals[id(node.b)]
            if d == 0.0:
                raise DomainError("division by zero")
            v = vals[id(node.a)] / d
        elif k == POW:
            base = vals[id(node.a)]
            if base == 0.0 and node.payload < 0:
                raise DomainError("zero raised to a negative power")
            v = base ** node.payload
        else:  # CALL
            v = _eval_call(node.payload, vals[id(node.a)])
        vals[id(node)] = v
    return vals[id(e)]


def _map_nodes(e: Expr, leaf: Callable[[Expr], Expr]) -> Expr:
    """Rebuild e bottom-up, replacing leaves via `leaf` and re-running the
    simplifying constructors on interior nodes."""
    out: dict[int, Expr] = {}
    for node in postorder(e):
        k = node.kind
        if k in (CONST, TVAR, JET, FROZEN):
            r = leaf(node)
        elif k == ADD:
            r = add(out[id(node.a)], out[id(node.b)])
        elif k == SUB:
            r = sub(out[id(node.a)], out[id(node.b)])
        elif k == MUL:
            r = mul(out[id(node.a)], out[id(node.b)])
        elif k == DIV:
            r = div(out[id(node.a)], out[id(node.b)])
        elif k == POW:
            r = powi(out[id(node.a)], node.payload)
        else:
            r = call(node.payload, out[id(node.a)])
        out[id(node)] = r
    return out[id(e)]


def substitute(
    e: Expr,
    jet_map: Mapping[JetVar, Expr] | None = None,
    t_value: Expr | None = None,
    frozen_map: Mapping[str, Expr] | None = None,
) -> Expr:
    jet_map = jet_map or {}
    frozen_map = frozen_map or {}

    def leaf(node: Expr) -> Expr:
        if node.kind == JET and node.payload in jet_map:
            return jet_map[node.payload]
        if node.kind == TVAR and t_value is not None:
            return t_value
        if node.kind == FROZEN and node.payload in frozen_map:
            return frozen_map[node.payload]
        return node

    return _map_nodes(e, leaf)


# ---------------------------------------------------------------------------
# differentiation

_DERIV: dict[str, Callable[[Expr], Expr]] = {
    "sin": lambda a: call("cos", a),
    "cos": lambda a: mul(const(-1.0), call("sin", a)),
    "tan": lambda a: add(ONE, powi(call("tan", a), 2)),
    "tanh": lambda a: sub(ONE, powi(call("tanh", a), 2)),
    "exp": lambda a: call("exp", a),
    "ln": lambda a: div(ONE, a),
    "sqrt": lambda a: div(const(0.5), call("sqrt", a)),
}


def _differentiate(e: Expr, leaf_rule: Callable[[Expr], Expr]) -> Expr:
    """Shared chain-rule walker; leaf_rule supplies d(leaf)."""
    d: dict[int, Expr] = {}
    for node in postorder(e):
        k = node.kind
        if k in (CONST, TVAR, JET, FROZEN):
            r = leaf_rule(node)
        elif k == ADD:
            r = add(d[id(node.a)], d[id(node.b)])
        elif k == SUB:
            r = sub(d[id(node.a)], d[id(node.b)])
        elif k == MUL:
            r = add(mul(d[id(node.a)], node.b), mul(node.a, d[id(node.b)]))
        elif k == DIV:
            r = sub(div(d[id(node.a)], node.b),
                    div(mul(node.a, d[id(node.b)]), powi(node.b, 2)))
        elif k == POW:
            n = node.payload
            r = mul(mul(const(float(n)), powi(node.a, n - 1)), d[id(node.a)])
        else:
            r = mul(_DERIV[node.payload](node.a), d[id(node.a)])
        d[id(node)] = r
    return d[id(e)]


def partial(e: Expr, v: JetVar) -> Expr:
    """Symbolic partial derivative with respect to one jet variable."""

    def leaf(node: Expr) -> Expr:
        if node.kind == JET and node.payload == v:
            return ONE
        return ZERO

    return _differentiate(e, leaf)


def partial_frozen(e: Expr, name: str) -> Expr:
    def leaf(node: Expr) -> Expr:
        if node.kind == FROZEN and node.payload == name:
            return ONE
        return ZERO

    return _differentiate(e, leaf)


def total_derivative(e: Expr) -> Expr:
    """Formal total derivative: t differentiates to 1 and every jet (j, k)
    differentiates to (j, k+1)."""

    def leaf(node: Expr) -> Expr:
        if node.kind == TVAR:
            return ONE
        if node.kind == JET:
            jv: JetVar = node.payload
            if jv.order + 1 > MAX_ORDER:
                raise OrderLimitError(
                    f"derivative order {jv.order + 1} exceeds cap {MAX_ORDER}")
            return jetvar(jv.shifted(1))
        return ZERO

    return _differentiate(e, leaf)


# ---------------------------------------------------------------------------
# structure queries


def jet_vars(e: Expr) -> set[JetVar]:
    return {n.payload for n in postorder(e) if n.kind == JET}


def frozen_names(e: Expr) -> set[str]:
    return {n.payload for n in postorder(e) if n.kind == FROZEN}


def leading_order(e: Expr, var_index: int) -> int | None:
    """Highest derivative order of variable var_index in e, None if absent."""
    best: int | None = None
    for n in postorder(e):
        if n.kind == JET and n.payload.var_index == var_index:
            if best is None or n.payload.order > best:
                best = n.payload.order
    return best


def is_polynomial(e: Expr) -> bool:
    """True iff no elementary-function node has a jet variable in its subtree.

    Elementary functions of t alone are permitted (time-dependent forcing).
    """
    has_jet: dict[int, bool] = {}
    for node in postorder(e):
        k = node.kind
        if k == JET:
            hj = True
        elif k in (CONST, TVAR, FROZEN):
            hj = False
        elif node.b is not None:
            hj = has_jet[id(node.a)] or has_jet[id(node.b)]
        else:
            hj = has_jet[id(node.a)]
        if k == CALL and has_jet[id(node.a)]:
            return False
        has_jet[id(node)] = hj
    return True


def poly_degree(e: Expr, unknowns: set[JetVar]) -> int:
    """Total degree of e as a polynomial in the given jet variables.

    Raises NonPolynomialConstraint for non-constant denominators, negative
    powers of unknowns, or elementary functions applied to unknowns.
    """
    deg: dict[int, int] = {}
    for node in postorder(e):
        k = node.kind
        if k == JET:
            d = 1 if node.payload in unknowns else 0
        elif k in (CONST, TVAR, FROZEN):
            d = 0
        elif k in (ADD, SUB):
            d = max(deg[id(node.a)], deg[id(node.b)])
        elif k == MUL:
            d = deg[id(node.a)] + deg[id(node.b)]
        elif k == DIV:
            if deg[id(node.b)] != 0:
                raise NonPolynomialConstraint("non-constant denominator")
            d = deg[id(node.a)]
        elif k == POW:
            if deg[id(node.a)] != 0 and node.payload < 0:
                raise NonPolynomialConstraint("negative power of an unknown")
            d = deg[id(node.a)] * max(node.payload, 0)
        else:
            if deg[id(node.a)] != 0:
                raise NonPolynomialConstraint(
                    f"elementary function {node.payload!r} of an unknown")
            d = 0
        deg[id(node)] = d
    return deg[id(e)]


def format_expr(e: Expr, var_names: list[str] | None = None) -> str:
    """Human-readable rendering (for reports and error messages)."""

    def name(jv: JetVar) -> str:
        base = var_names[jv.var_index] if var_names else f"x{jv.var_index + 1}"
        if jv.order == 0:
            return base
        if jv.order <= 3:
            return base + "'" * jv.order
        return f"diff({base},t,{jv.order})"

    s: dict[int, str] = {}
    prec: dict[int, int] = {}

    def wrap(node: Expr, need: int) -> str:
        return f"({s[id(node)]})" if prec[id(node)] < need else s[id(node)]

    for node in postorder(e):
        k = node.kind
        if k == CONST:
            v = node.payload
            txt = repr(v) if v >= 0 else f"{v!r}"
            p = 100 if v >= 0 else 0
        elif k == TVAR:
            txt, p = "t", 100
        elif k == JET:
            txt, p = name(node.payload), 100
        elif k == FROZEN:
            txt, p = node.payload, 100
        elif k == ADD:
            txt, p = f"{wrap(node.a, 1)} + {wrap(node.b, 1)}", 1
        elif k == SUB:
            txt, p = f"{wrap(node.a, 1)} - {wrap(node.b, 2)}", 1
        elif k == MUL:
            txt, p = f"{wrap(node.a, 2)}*{wrap(node.b, 3)}", 2
        elif k == DIV:
            txt, p = f"{wrap(node.a, 2)}/{wrap(node.b, 3)}", 2
        elif k == POW:
            txt, p = f"{wrap(node.a, 4)}^{node.payload}", 3
        else:
            txt, p = f"{node.payload}({s[id(node.a)]})", 100
        s[id(node)] = txt
        prec[id(node)] = p
    return s[id(e)]
