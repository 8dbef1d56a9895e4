"""Parser for the .dae input format.

Line-oriented: each statement sits on its own line.

    # comment
    var x, y
    param lambda = 1
    indep t in [0, 6.2831853]
    factor y1 - y2
    init x = 2, x' = 1
    2*y*x' - x*y' - x + sin(t) + 2 = 0

Expressions use +, -, *, /, ^ (integer powers), primes or diff(x,t,k) for
derivatives, the elementary functions, `pi`, and declared parameters (folded
to constants at parse time).  Every line that is not a declaration must be
an equation `expr = expr`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from . import expr as ex
from .errors import CountMismatch, DaeSyntaxError, UndeclaredIdentifier
from .system import DaeSystem

_TOKEN = re.compile(r"""
    (?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<primes>'+)
  | (?P<pow>\*\*|\^)
  | (?P<op>[-+*/(),=\[\]])
  | (?P<ws>\s+)
""", re.VERBOSE)

FUNCTIONS = set(ex.FUNCTIONS)


@dataclass
class Token:
    kind: str
    text: str
    col: int


def _tokenize(line: str, lineno: int) -> list[Token]:
    out = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if not m:
            raise DaeSyntaxError(f"unexpected character {line[pos]!r}",
                                 lineno, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            text = "^" if kind == "pow" else m.group()
            out.append(Token(kind if kind != "pow" else "op", text, pos + 1))
        pos = m.end()
    return out


@dataclass
class ParsedDae:
    system: DaeSystem
    t_span: tuple[float, float]
    init: dict[tuple[str, int], float] | None
    factors: list[ex.Expr]
    params: dict[str, float]
    source_name: str = ""


class _ExprParser:
    def __init__(self, tokens, lineno, var_index, params, indep_name):
        self.toks = tokens
        self.i = 0
        self.lineno = lineno
        self.vars = var_index
        self.params = params
        self.indep = indep_name

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise DaeSyntaxError("unexpected end of line", self.lineno,
                                 self.toks[-1].col if self.toks else 1)
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            raise DaeSyntaxError(f"expected {text!r}, found {tok.text!r}",
                                 self.lineno, tok.col)
        return tok

    def err(self, msg, tok):
        raise DaeSyntaxError(msg, self.lineno, tok.col if tok else 1)

    def parse_expr(self) -> ex.Expr:
        e = self.parse_term()
        while (tok := self.peek()) and tok.text in "+-":
            self.next()
            rhs = self.parse_term()
            e = ex.add(e, rhs) if tok.text == "+" else ex.sub(e, rhs)
        return e

    def parse_term(self) -> ex.Expr:
        e = self.parse_unary()
        while (tok := self.peek()) and tok.text in "*/":
            self.next()
            rhs = self.parse_unary()
            e = ex.mul(e, rhs) if tok.text == "*" else ex.div(e, rhs)
        return e

    def parse_unary(self) -> ex.Expr:
        tok = self.peek()
        if tok and tok.text == "-":
            self.next()
            return ex.mul(ex.const(-1.0), self.parse_unary())
        if tok and tok.text == "+":
            self.next()
            return self.parse_unary()
        return self.parse_postfix()

    def parse_postfix(self) -> ex.Expr:
        e, base_var = self.parse_atom()
        while (tok := self.peek()) is not None:
            if tok.kind == "primes":
                self.next()
                if base_var is None:
                    self.err("only dependent variables can be primed", tok)
                j, k = base_var
                base_var = (j, k + len(tok.text))
                e = ex.jet(j, base_var[1])
            elif tok.text == "^":
                self.next()
                e = ex.powi(e, self._integer())
                base_var = None
            else:
                break
        return e

    def _integer(self) -> int:
        tok = self.next()
        sign = 1
        if tok.text == "-":
            sign = -1
            tok = self.next()
        if tok.kind != "num" or not re.fullmatch(r"\d+", tok.text):
            self.err("exponent must be an integer literal", tok)
        return sign * int(tok.text)

    def parse_atom(self):
        """Returns (expr, (var_index, order) | None)."""
        tok = self.next()
        if tok.kind == "num":
            return ex.const(float(tok.text)), None
        if tok.text == "(":
            e = self.parse_expr()
            self.expect(")")
            return e, None
        if tok.kind == "ident":
            name = tok.text
            if name == "diff":
                return self._parse_diff(tok), None
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                return ex.call(name, arg), None
            if name == self.indep:
                return ex.tvar(), None
            if name == "pi":
                return ex.const(math.pi), None
            if name in self.params:
                return ex.const(self.params[name]), None
            if name in self.vars:
                j = self.vars[name]
                return ex.jet(j, 0), (j, 0)
            raise UndeclaredIdentifier(f"undeclared identifier {name!r}",
                                       self.lineno, tok.col)
        self.err(f"unexpected token {tok.text!r}", tok)

    def _parse_diff(self, tok):
        self.expect("(")
        name_tok = self.next()
        if name_tok.kind != "ident" or name_tok.text not in self.vars:
            self.err("diff() needs a dependent variable", name_tok)
        self.expect(",")
        t_tok = self.next()
        if t_tok.text != self.indep:
            self.err(f"diff() differentiates with respect to {self.indep!r}",
                     t_tok)
        order = 1
        if self.peek() and self.peek().text == ",":
            self.next()
            order = self._integer()
            if order < 0:
                self.err("derivative order must be nonnegative", t_tok)
        self.expect(")")
        return ex.jet(self.vars[name_tok.text], order)


def parse(text: str, source_name: str = "<input>") -> ParsedDae:
    var_names: list[str] = []
    params: dict[str, float] = {}
    t_span = (0.0, 1.0)
    indep_name = "t"
    factors_raw: list[tuple[int, list[Token]]] = []
    init_raw: list[tuple[int, list[Token]]] = []
    eq_raw: list[tuple[int, list[Token]]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = _tokenize(line, lineno)
        head = toks[0]
        if head.kind == "ident" and head.text == "var":
            for tok in toks[1:]:
                if tok.kind == "ident":
                    if tok.text in var_names:
                        raise DaeSyntaxError(
                            f"variable {tok.text!r} declared twice",
                            lineno, tok.col)
                    var_names.append(tok.text)
                elif tok.text != ",":
                    raise DaeSyntaxError("malformed var declaration",
                                         lineno, tok.col)
        elif head.kind == "ident" and head.text == "param":
            if (len(toks) < 4 or toks[1].kind != "ident"
                    or toks[2].text != "="):
                raise DaeSyntaxError("malformed param declaration",
                                     lineno, head.col)
            value_toks = toks[3:]
            sign = 1.0
            if value_toks and value_toks[0].text == "-":
                sign = -1.0
                value_toks = value_toks[1:]
            if len(value_toks) != 1 or value_toks[0].kind != "num":
                raise DaeSyntaxError("param value must be a number",
                                     lineno, toks[3].col)
            params[toks[1].text] = sign * float(value_toks[0].text)
        elif head.kind == "ident" and head.text == "indep":
            if (len(toks) != 8 or toks[1].kind != "ident"
                    or toks[2].text != "in" or toks[3].text != "["
                    or toks[5].text != "," or toks[7].text != "]"):
                raise DaeSyntaxError(
                    "expected: indep t in [t0, tend]", lineno, head.col)
            indep_name = toks[1].text
            try:
                t_span = (float(toks[4].text), float(toks[6].text))
            except ValueError:
                raise DaeSyntaxError("span bounds must be numbers",
                                     lineno, toks[4].col) from None
        elif head.kind == "ident" and head.text == "factor":
            factors_raw.append((lineno, toks[1:]))
        elif head.kind == "ident" and head.text == "init":
            init_raw.append((lineno, toks[1:]))
        else:
            eq_raw.append((lineno, toks))

    var_index = {name: j for j, name in enumerate(var_names)}

    def expr_of(lineno, toks):
        p = _ExprParser(toks, lineno, var_index, params, indep_name)
        e = p.parse_expr()
        if p.peek() is not None:
            p.err(f"unexpected trailing token {p.peek().text!r}", p.peek())
        return e

    equations = []
    for lineno, toks in eq_raw:
        split = [i for i, tok in enumerate(toks) if tok.text == "="]
        if len(split) != 1:
            raise DaeSyntaxError("an equation needs exactly one '='",
                                 lineno, toks[0].col)
        lhs = expr_of(lineno, toks[:split[0]])
        rhs = expr_of(lineno, toks[split[0] + 1:])
        equations.append(ex.sub(lhs, rhs))

    if len(equations) != len(var_names):
        raise CountMismatch(
            f"{len(equations)} equations but {len(var_names)} dependent "
            f"variables in {source_name}")

    factors = [expr_of(lineno, toks) for lineno, toks in factors_raw]

    init: dict[tuple[str, int], float] | None = None
    if init_raw:
        init = {}
        for lineno, toks in init_raw:
            for group in _split_on_commas(toks):
                if not group:
                    continue
                eq_pos = [i for i, tok in enumerate(group) if tok.text == "="]
                if len(eq_pos) != 1:
                    raise DaeSyntaxError("init entries look like x = value",
                                         lineno, group[0].col)
                target = expr_of(lineno, group[:eq_pos[0]])
                if target.kind != ex.JET:
                    raise DaeSyntaxError(
                        "init targets must be variables or their derivatives",
                        lineno, group[0].col)
                value_expr = expr_of(lineno, group[eq_pos[0] + 1:])
                if value_expr.kind != ex.CONST:
                    raise DaeSyntaxError("init values must be constant",
                                         lineno, group[eq_pos[0]].col)
                jv: ex.JetVar = target.payload
                init[(var_names[jv.var_index], jv.order)] = value_expr.payload

    name = source_name
    sys = DaeSystem(tuple(equations), tuple(var_names), name=name)
    return ParsedDae(sys, t_span, init, factors, params, source_name)


def _split_on_commas(toks):
    depth = 0
    group: list[Token] = []
    for tok in toks:
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
        if tok.text == "," and depth == 0:
            yield group
            group = []
        else:
            group.append(tok)
    yield group
