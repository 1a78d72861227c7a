"""Immutable expression DAG with structural hash-consing.

Nodes are interned per `ExprContext`, so structural equality is object
identity and node ids give a deterministic ordering.  Constants carry exact
rationals; rounding applications carry a named operator resolved to a format.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from .formats import FpFormat

VAR, CONST, NEG, ABS, ADD, SUB, MUL, DIV, ROUND = (
    "var", "const", "neg", "abs", "add", "sub", "mul", "div", "round")

_BINOPS = {ADD: "+", SUB: "-", MUL: "*", DIV: "/"}


class Expr:
    __slots__ = ("kind", "payload", "children", "id")

    def __init__(self, kind: str, payload, children: tuple, node_id: int):
        self.kind = kind
        self.payload = payload  # name for VAR, Fraction for CONST, (op name, FpFormat) for ROUND
        self.children = children
        self.id = node_id

    def __repr__(self) -> str:
        return f"<expr {self.id}:{self.kind}>"

    @property
    def round_format(self) -> FpFormat:
        assert self.kind == ROUND
        return self.payload[1]

    @property
    def round_name(self) -> str:
        assert self.kind == ROUND
        return self.payload[0]


class ExprContext:
    """Interning table; one per script/session."""

    def __init__(self):
        self._table: dict[tuple, Expr] = {}
        self._nodes: list[Expr] = []

    def _intern(self, kind: str, payload, children: tuple) -> Expr:
        key = (kind, payload, tuple(c.id for c in children))
        node = self._table.get(key)
        if node is None:
            node = Expr(kind, payload, children, len(self._nodes))
            self._table[key] = node
            self._nodes.append(node)
        return node

    def var(self, name: str) -> Expr:
        return self._intern(VAR, name, ())

    def const(self, value: Fraction) -> Expr:
        return self._intern(CONST, Fraction(value), ())

    def neg(self, a: Expr) -> Expr:
        return self._intern(NEG, None, (a,))

    def abs(self, a: Expr) -> Expr:
        return self._intern(ABS, None, (a,))

    def add(self, a: Expr, b: Expr) -> Expr:
        return self._intern(ADD, None, (a, b))

    def sub(self, a: Expr, b: Expr) -> Expr:
        return self._intern(SUB, None, (a, b))

    def mul(self, a: Expr, b: Expr) -> Expr:
        return self._intern(MUL, None, (a, b))

    def div(self, a: Expr, b: Expr) -> Expr:
        return self._intern(DIV, None, (a, b))

    def round(self, op_name: str, fmt: FpFormat, a: Expr) -> Expr:
        return self._intern(ROUND, (op_name, fmt), (a,))

    def lookup(self, kind: str, payload, children: tuple) -> Optional[Expr]:
        key = (kind, payload, tuple(c.id for c in children))
        return self._table.get(key)

    def nodes(self) -> list[Expr]:
        return self._nodes

    def node_count(self) -> int:
        return len(self._nodes)


def subexpressions(e: Expr) -> list[Expr]:
    """All distinct nodes reachable from e, parents after children."""
    seen: dict[int, Expr] = {}

    def walk(n: Expr) -> None:
        if n.id in seen:
            return
        for c in n.children:
            walk(c)
        seen[n.id] = n

    walk(e)
    return list(seen.values())


_PREC = {ADD: 1, SUB: 1, MUL: 2, DIV: 2, NEG: 3}


def format_expr(e: Expr, names: Optional[dict[int, str]] = None) -> str:
    """Render in the surface syntax; `names` maps node ids to definition names."""

    def go(n: Expr, parent_prec: int, rightmost: bool) -> str:
        if names and n.id in names:
            return names[n.id]
        if n.kind == VAR:
            return n.payload
        if n.kind == CONST:
            return format_rational(n.payload)
        if n.kind == ABS:
            return f"|{go(n.children[0], 0, False)}|"
        if n.kind == ROUND:
            return f"{n.round_name}({go(n.children[0], 0, False)})"
        if n.kind == NEG:
            inner = go(n.children[0], _PREC[NEG], False)
            text = f"-{inner}"
            return f"({text})" if parent_prec >= _PREC[NEG] else text
        prec = _PREC[n.kind]
        left = go(n.children[0], prec - 1, False)
        right = go(n.children[1], prec, False)
        text = f"{left} {_BINOPS[n.kind]} {right}"
        if parent_prec >= prec:
            return f"({text})"
        return text

    return go(e, 0, True)


def format_rational(q: Fraction) -> str:
    """Exact literal for a rational: integer, m b e, or decimal-fraction form."""
    if q.denominator == 1:
        return str(q.numerator)
    den = q.denominator
    # power of two -> binary literal
    if den & (den - 1) == 0:
        return f"{q.numerator}b-{den.bit_length() - 1}"
    # decimal denominators render exactly in decimal
    d = den
    twos = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    fives = 0
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d == 1:
        digits = max(twos, fives)
        scaled = q.numerator * 10**digits // den
        sign = "-" if scaled < 0 else ""
        s = str(abs(scaled)).rjust(digits + 1, "0")
        return f"{sign}{s[:-digits]}.{s[-digits:]}"
    return f"({q.numerator} / {q.denominator})"
