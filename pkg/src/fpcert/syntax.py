"""Lexer, parser, and elaborator for the verification script language.

A script declares rounding operators, binds names to real-valued expressions
(`x = e;` exact, `x rnd= e;` with every arithmetic operator rounded), states
one property block `{ hypotheses -> goals }`, and optionally gives hints:
rewrites `lhs -> rhs;` (with `{ A <> 0 }` side conditions), approximations
`a ~ b;`, interval splits `$ z in (p1,p2);`, and dichotomy `Expr $ z;`.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import expr as E
from .expr import Expr, ExprContext, format_expr, format_rational
from .formats import FpFormat, make_format

__all__ = ["Script", "PropAtom", "Goal", "Hint", "ScriptError", "parse",
           "elaborate", "load_script", "format_script", "script_hash"]


class ScriptError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<bin>\d+b-?\d+)
  | (?P<dec>(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|/\\|<=|>=|<>|[@=;,<>()\[\]{}|+\-*/~$?])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # 'num', 'ident', or the operator text itself
    text: str
    value: Optional[Fraction]
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            raise ScriptError(f"unexpected character {text[pos]!r}", line, col)
        col = pos - line_start + 1
        pos = m.end()
        if m.lastgroup in ("ws", "comment"):
            nl = m.group(0).count("\n")
            if nl:
                line += nl
                line_start = m.start() + m.group(0).rindex("\n") + 1
            continue
        if m.lastgroup == "bin":
            mant, exp = m.group(0).split("b")
            value = Fraction(int(mant)) * Fraction(2) ** int(exp)
            tokens.append(Token("num", m.group(0), value, line, col))
        elif m.lastgroup == "dec":
            tokens.append(Token("num", m.group(0), Fraction(m.group(0)), line, col))
        elif m.lastgroup == "ident":
            tokens.append(Token("ident", m.group(0), None, line, col))
        else:
            tokens.append(Token(m.group(0), m.group(0), None, line, col))
    tokens.append(Token("eof", "", None, line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# raw syntax tree
# ---------------------------------------------------------------------------

# raw expressions are nested tuples:
#   ('num', Fraction) ('ident', name) ('call', name, raw) ('abs', raw)
#   ('neg', raw) ('add'|'sub'|'mul'|'div', raw, raw)


@dataclass
class RawAtom:
    expr: tuple
    form: str  # 'range', 'upper', 'query'
    lo: Optional[Fraction]
    hi: Optional[Fraction]
    line: int


@dataclass
class RawScript:
    decls: list[tuple[str, str, str, int]]            # name, fmt, mode, line
    defs: list[tuple[str, Optional[str], tuple, int]]  # name, rnd-op or None, raw expr, line
    hyps: list[RawAtom]
    goals: list[RawAtom]
    hints: list[tuple]                                 # tagged raw hints
    source: str


class _Parser:
    def __init__(self, tokens: list[Token], source: str):
        self.toks = tokens
        self.i = 0
        self.source = source

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.next()
        if t.kind != kind:
            raise ScriptError(f"expected {kind!r}, found {t.text!r}", t.line, t.col)
        return t

    def fail(self, message: str) -> ScriptError:
        t = self.peek()
        return ScriptError(f"{message} (at {t.text!r})", t.line, t.col)

    # expression grammar: C-like precedence, left associative
    def parse_expr(self) -> tuple:
        node = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            rhs = self.parse_term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def parse_term(self) -> tuple:
        node = self.parse_factor()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            rhs = self.parse_factor()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def parse_factor(self) -> tuple:
        t = self.peek()
        if t.kind == "-":
            self.next()
            return ("neg", self.parse_factor())
        if t.kind == "+":
            self.next()
            return self.parse_factor()
        return self.parse_primary()

    def parse_primary(self) -> tuple:
        t = self.next()
        if t.kind == "num":
            return ("num", t.value)
        if t.kind == "ident":
            if self.peek().kind == "(":
                self.next()
                inner = self.parse_expr()
                self.expect(")")
                return ("call", t.text, inner)
            return ("ident", t.text)
        if t.kind == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if t.kind == "|":
            inner = self.parse_expr()
            self.expect("|")
            return ("abs", inner)
        raise ScriptError(f"expected an expression, found {t.text!r}", t.line, t.col)

    def parse_signed_number(self) -> Fraction:
        neg = False
        while self.peek().kind in ("-", "+"):
            if self.next().kind == "-":
                neg = not neg
        t = self.expect("num")
        return -t.value if neg else t.value

    def parse_atom(self, allow_query: bool) -> RawAtom:
        t = self.peek()
        e = self.parse_expr()
        nxt = self.next()
        if nxt.kind == "ident" and nxt.text == "in":
            if self.peek().kind == "?":
                self.next()
                if not allow_query:
                    raise ScriptError("'in ?' is only allowed in goals", nxt.line, nxt.col)
                return RawAtom(e, "query", None, None, t.line)
            self.expect("[")
            lo = self.parse_signed_number()
            self.expect(",")
            hi = self.parse_signed_number()
            self.expect("]")
            if lo > hi:
                raise ScriptError("interval bounds out of order", nxt.line, nxt.col)
            return RawAtom(e, "range", lo, hi, t.line)
        if nxt.kind == "<=":
            hi = self.parse_signed_number()
            return RawAtom(e, "upper", None, hi, t.line)
        raise ScriptError(f"expected 'in' or '<=', found {nxt.text!r}", nxt.line, nxt.col)

    def parse_property(self) -> tuple[list[RawAtom], list[RawAtom]]:
        self.expect("{")
        hyps: list[RawAtom] = []
        if self.peek().kind != "->":
            hyps.append(self.parse_atom(allow_query=False))
            while self.peek().kind == "/\\":
                self.next()
                hyps.append(self.parse_atom(allow_query=False))
        self.expect("->")
        goals = [self.parse_atom(allow_query=True)]
        while self.peek().kind == "/\\":
            self.next()
            goals.append(self.parse_atom(allow_query=True))
        self.expect("}")
        return hyps, goals

    def parse_script(self) -> RawScript:
        decls, defs, hints = [], [], []
        hyps: Optional[list[RawAtom]] = None
        goals: Optional[list[RawAtom]] = None
        while True:
            t = self.peek()
            if t.kind == "eof":
                break
            if t.kind == "@":
                self.next()
                name = self.expect("ident").text
                self.expect("=")
                family = self.expect("ident").text
                if family != "float":
                    raise ScriptError(f"unknown operator family {family!r}", t.line, t.col)
                self.expect("<")
                fmt = self.expect("ident").text
                self.expect(",")
                mode = self.expect("ident").text
                self.expect(">")
                self.expect(";")
                decls.append((name, fmt, mode, t.line))
                continue
            if t.kind == "{":
                if hyps is not None:
                    raise ScriptError("duplicate property block", t.line, t.col)
                hyps, goals = self.parse_property()
                continue
            if t.kind == "$":
                self.next()
                var = self.expect("ident").text
                kw = self.expect("ident")
                if kw.text != "in":
                    raise ScriptError("expected 'in' after split variable", kw.line, kw.col)
                self.expect("(")
                points = [self.parse_signed_number()]
                while self.peek().kind == ",":
                    self.next()
                    points.append(self.parse_signed_number())
                self.expect(")")
                self.expect(";")
                hints.append(("split", var, points, t.line))
                continue
            # definition: IDENT [IDENT] = expr ;
            if t.kind == "ident" and self.peek(1).kind == "=":
                name = self.next().text
                self.next()
                body = self.parse_expr()
                self.expect(";")
                defs.append((name, None, body, t.line))
                continue
            if t.kind == "ident" and self.peek(1).kind == "ident" and self.peek(2).kind == "=":
                name = self.next().text
                op = self.next().text
                self.next()
                body = self.parse_expr()
                self.expect(";")
                defs.append((name, op, body, t.line))
                continue
            # hint starting with a general expression
            lhs = self.parse_expr()
            nxt = self.next()
            if nxt.kind == "->":
                rhs = self.parse_expr()
                constraints = []
                if self.peek().kind == "{":
                    self.next()
                    while True:
                        ce = self.parse_expr()
                        op = self.expect("<>")
                        z = self.expect("num")
                        if z.value != 0:
                            raise ScriptError("side conditions must compare against 0",
                                              z.line, z.col)
                        constraints.append(ce)
                        if self.peek().kind != ",":
                            break
                        self.next()
                    self.expect("}")
                self.expect(";")
                hints.append(("rewrite", lhs, rhs, constraints, t.line))
            elif nxt.kind == "~":
                rhs = self.parse_expr()
                self.expect(";")
                hints.append(("approx", lhs, rhs, t.line))
            elif nxt.kind == "$":
                var = self.expect("ident").text
                self.expect(";")
                hints.append(("dichotomy", lhs, var, t.line))
            else:
                raise ScriptError(f"expected '->', '~' or '$' after expression, "
                                  f"found {nxt.text!r}", nxt.line, nxt.col)
        if hyps is None or goals is None:
            raise ScriptError("missing property block")
        return RawScript(decls, defs, hyps, goals, hints, self.source)


def parse(text: str) -> RawScript:
    """Parse source text to a raw syntax tree; raises ScriptError with position."""
    return _Parser(tokenize(text), text).parse_script()


# ---------------------------------------------------------------------------
# elaborated script
# ---------------------------------------------------------------------------


@dataclass
class PropAtom:
    """A bound stated in the property block, with exact rational endpoints."""
    expr: Expr
    lo: Optional[Fraction]
    hi: Optional[Fraction]
    line: int = 0

    def is_rel_shape(self) -> tuple[Expr, Expr] | None:
        """(u, v) when the bounded expression is (u-v)/v or |(u-v)/v|."""
        e = self.expr
        if e.kind == E.ABS:
            e = e.children[0]
        if e.kind == E.DIV and e.children[0].kind == E.SUB \
                and e.children[0].children[1] is e.children[1]:
            return e.children[0].children[0], e.children[1]
        return None


@dataclass
class Goal:
    atom: PropAtom
    range_known: bool

    def describe(self, names: dict[int, str]) -> str:
        return format_expr(self.atom.expr, names)


@dataclass
class Hint:
    kind: str  # 'rewrite', 'approx', 'split', 'dichotomy'
    line: int
    lhs: Optional[Expr] = None
    rhs: Optional[Expr] = None
    constraints: list[Expr] = field(default_factory=list)
    variable: Optional[Expr] = None
    points: list[Fraction] = field(default_factory=list)
    target: Optional[Expr] = None


@dataclass
class Script:
    ctx: ExprContext
    rounding_ops: dict[str, FpFormat]
    definitions: list[tuple[str, Expr]]
    hypotheses: list[PropAtom]
    goals: list[Goal]
    hints: list[Hint]
    source: str

    def names(self) -> dict[int, str]:
        """Node id -> first defining name, for printing."""
        out: dict[int, str] = {}
        for name, node in self.definitions:
            out.setdefault(node.id, name)
        return out

    def free_variables(self) -> list[str]:
        defined = {name for name, _ in self.definitions}
        seen: list[str] = []
        roots = [node for _, node in self.definitions]
        roots += [a.expr for a in self.hypotheses] + [g.atom.expr for g in self.goals]
        for h in self.hints:
            roots += [x for x in (h.lhs, h.rhs, h.variable, h.target) if x is not None]
        for root in roots:
            for sub in E.subexpressions(root):
                if sub.kind == E.VAR and sub.payload not in defined \
                        and sub.payload not in seen:
                    seen.append(sub.payload)
        return seen


class _Elaborator:
    def __init__(self, raw: RawScript):
        self.raw = raw
        self.ctx = ExprContext()
        self.ops: dict[str, FpFormat] = {}
        self.env: dict[str, Expr] = {}
        self.free_used: set[str] = set()

    def run(self) -> Script:
        for name, fmt, mode, line in self.raw.decls:
            if name in self.ops:
                raise ScriptError(f"duplicate rounding operator {name!r}", line)
            try:
                self.ops[name] = make_format(fmt, mode)
            except ValueError as exc:
                raise ScriptError(str(exc), line) from None
        definitions: list[tuple[str, Expr]] = []
        for name, op, body, line in self.raw.defs:
            if name in self.env:
                raise ScriptError(f"duplicate definition of {name!r}", line)
            if name in self.ops:
                raise ScriptError(f"{name!r} is a rounding operator", line)
            if name in self.free_used:
                raise ScriptError(f"{name!r} was used before its definition", line)
            self.defining = name
            node = self.build(body, line)
            if op is not None:
                fmt = self.ops.get(op)
                if fmt is None:
                    raise ScriptError(f"unknown rounding operator {op!r}", line)
                node = self.wrap_rounding(op, fmt, body, line)
            self.env[name] = node
            definitions.append((name, node))
        hyps = [self.atom(a, widen=True) for a in self.raw.hyps]
        goals = []
        for a in self.raw.goals:
            if a.form == "query":
                goals.append(Goal(PropAtom(self.build(a.expr, a.line), None, None, a.line),
                                  range_known=False))
            else:
                goals.append(Goal(self.atom(a, widen=False), range_known=True))
        hints = [self.hint(h) for h in self.raw.hints]
        return Script(self.ctx, self.ops, definitions, hyps, goals, hints, self.raw.source)

    def build(self, raw: tuple, line: int) -> Expr:
        tag = raw[0]
        if tag == "num":
            return self.ctx.const(raw[1])
        if tag == "ident":
            name = raw[1]
            if name in self.env:
                return self.env[name]
            if name in self.ops:
                raise ScriptError(f"rounding operator {name!r} used as a value", line)
            if name == getattr(self, "defining", None):
                raise ScriptError(f"recursive definition of {name!r}", line)
            self.free_used.add(name)
            return self.ctx.var(name)
        if tag == "call":
            fmt = self.ops.get(raw[1])
            if fmt is None:
                raise ScriptError(f"unknown rounding operator {raw[1]!r}", line)
            return self.ctx.round(raw[1], fmt, self.build(raw[2], line))
        if tag == "abs":
            return self.ctx.abs(self.build(raw[1], line))
        if tag == "neg":
            return self.ctx.neg(self.build(raw[1], line))
        a = self.build(raw[1], line)
        b = self.build(raw[2], line)
        return getattr(self.ctx, tag)(a, b)

    def wrap_rounding(self, op_name: str, fmt: FpFormat, raw: tuple, line: int) -> Expr:
        """Elaborate `x rnd= e`: every arithmetic operator in e gets rounded."""
        tag = raw[0]
        if tag in ("add", "sub", "mul", "div"):
            a = self.wrap_rounding(op_name, fmt, raw[1], line)
            b = self.wrap_rounding(op_name, fmt, raw[2], line)
            return self.ctx.round(op_name, fmt, getattr(self.ctx, tag)(a, b))
        if tag == "neg":
            return self.ctx.neg(self.wrap_rounding(op_name, fmt, raw[1], line))
        if tag == "abs":
            return self.ctx.abs(self.wrap_rounding(op_name, fmt, raw[1], line))
        return self.build(raw, line)

    def atom(self, a: RawAtom, widen: bool) -> PropAtom:
        node = self.build(a.expr, a.line)
        if a.form == "upper":
            if node.kind != E.ABS:
                raise ScriptError("one-sided bounds are only supported on absolute values",
                                  a.line)
            return PropAtom(node, Fraction(0), a.hi, a.line)
        return PropAtom(node, a.lo, a.hi, a.line)

    def hint(self, raw: tuple) -> Hint:
        tag = raw[0]
        if tag == "rewrite":
            _, lhs, rhs, constraints, line = raw
            return Hint("rewrite", line,
                        lhs=self.build(lhs, line),
                        rhs=self.build(rhs, line),
                        constraints=[self.build(c, line) for c in constraints])
        if tag == "approx":
            _, lhs, rhs, line = raw
            return Hint("approx", line, lhs=self.build(lhs, line),
                        rhs=self.build(rhs, line))
        if tag == "split":
            _, var, points, line = raw
            if sorted(points) != points or len(set(points)) != len(points):
                raise ScriptError("split points must be strictly increasing", line)
            return Hint("split", line, variable=self.build(("ident", var), line),
                        points=points)
        _, target, var, line = raw
        return Hint("dichotomy", line, target=self.build(target, line),
                    variable=self.build(("ident", var), line))


def elaborate(raw: RawScript) -> Script:
    return _Elaborator(raw).run()


def load_script(text: str) -> Script:
    return elaborate(parse(text))


def script_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# printing (round-trip support)
# ---------------------------------------------------------------------------


def _format_atom(a: PropAtom, names: dict[int, str], query: bool = False) -> str:
    text = format_expr(a.expr, names)
    if query:
        return f"{text} in ?"
    return f"{text} in [{format_rational(a.lo)}, {format_rational(a.hi)}]"


def format_script(s: Script) -> str:
    """Surface rendering that re-parses to a structurally identical script."""
    names = s.names()
    lines: list[str] = []
    for name, fmt in s.rounding_ops.items():
        lines.append(f"@{name} = float<{fmt.name},{fmt.mode}>;")
    for name, node in s.definitions:
        inner = dict(names)
        inner.pop(node.id, None)  # do not print a definition as its own name
        lines.append(f"{name} = {format_expr(node, inner)};")
    lines.append("{")
    body = [_format_atom(a, names) for a in s.hypotheses]
    lines.append("    " + "\n /\\ ".join(body) if body else "")
    lines.append("->")
    body = [_format_atom(g.atom, names, query=not g.range_known) for g in s.goals]
    lines.append("    " + "\n /\\ ".join(body))
    lines.append("}")
    for h in s.hints:
        if h.kind == "rewrite":
            text = f"{format_expr(h.lhs, names)} -> {format_expr(h.rhs, names)}"
            if h.constraints:
                conds = ", ".join(f"{format_expr(c, names)} <> 0" for c in h.constraints)
                text += f" {{ {conds} }}"
            lines.append(text + ";")
        elif h.kind == "approx":
            lines.append(f"{format_expr(h.lhs, names)} ~ {format_expr(h.rhs, names)};")
        elif h.kind == "split":
            pts = ", ".join(format_rational(p) for p in h.points)
            lines.append(f"$ {format_expr(h.variable, names)} in ({pts});")
        else:
            lines.append(f"{format_expr(h.target, names)} $ {format_expr(h.variable, names)};")
    return "\n".join(lines) + "\n"


def scripts_equal(a: Script, b: Script) -> bool:
    """Structural equality up to node identity (used by round-trip tests)."""
    mapping: dict[int, int] = {}

    def eq(x: Expr, y: Expr) -> bool:
        if x.id in mapping:
            return mapping[x.id] == y.id
        if x.kind != y.kind or len(x.children) != len(y.children):
            return False
        if x.kind == E.ROUND:
            if x.payload[0] != y.payload[0] or x.round_format != y.round_format:
                return False
        elif x.payload != y.payload:
            return False
        if not all(eq(cx, cy) for cx, cy in zip(x.children, y.children)):
            return False
        mapping[x.id] = y.id
        return True

    if [n for n, _ in a.definitions] != [n for n, _ in b.definitions]:
        return False
    if set(a.rounding_ops) != set(b.rounding_ops):
        return False
    for name in a.rounding_ops:
        if a.rounding_ops[name] != b.rounding_ops[name]:
            return False
    for (_, x), (_, y) in zip(a.definitions, b.definitions):
        if not eq(x, y):
            return False
    if len(a.hypotheses) != len(b.hypotheses) or len(a.goals) != len(b.goals):
        return False
    for x, y in zip(a.hypotheses, b.hypotheses):
        if (x.lo, x.hi) != (y.lo, y.hi) or not eq(x.expr, y.expr):
            return False
    for gx, gy in zip(a.goals, b.goals):
        if gx.range_known != gy.range_known:
            return False
        if (gx.atom.lo, gx.atom.hi) != (gy.atom.lo, gy.atom.hi):
            return False
        if not eq(gx.atom.expr, gy.atom.expr):
            return False
    if len(a.hints) != len(b.hints):
        return False
    for hx, hy in zip(a.hints, b.hints):
        if hx.kind != hy.kind or hx.points != hy.points:
            return False
        for ex, ey in ((hx.lhs, hy.lhs), (hx.rhs, hy.rhs),
                       (hx.variable, hy.variable), (hx.target, hy.target)):
            if (ex is None) != (ey is None):
                return False
            if ex is not None and not eq(ex, ey):
                return False
        if len(hx.constraints) != len(hy.constraints):
            return False
        if not all(eq(cx, cy) for cx, cy in zip(hx.constraints, hy.constraints)):
            return False
    return True
