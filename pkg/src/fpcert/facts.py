"""Predicate vocabulary and the theorem machinery built on it.

Atoms state one of:
  BND(e, I)    -- the value of e lies in the interval I
  FIX(e, k)    -- e is an integer multiple of 2**k
  FLT(e, p)    -- e = m * 2**q with |m| < 2**p
  REL(u, v, I) -- u = v * (1 + eps) for some eps in I (with I.lo > -1)
  NZR(e)       -- e is not zero
  EQL(a, b)    -- a and b denote the same real value
  ABSURD       -- the hypotheses are contradictory

Division is total in this model: x / 0 is defined as 0.  Every rule involving
a quotient is therefore guarded so its conclusion also covers the zero
denominator case, or requires an NZR premise.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import expr as E
from .expr import Expr, ExprContext
from .formats import FpFormat, abs_error_bound, rel_error_bound, round_enclosure
from .numeric import (EMPTY, Dyadic, Interval, iabs, iadd, idiv, imul, ineg,
                      isquare, isub, rel_compose, rel_invert)

__all__ = ["Atom", "Fact", "NOT_APPLICABLE", "propagate", "verify_identity",
           "IdentityResult", "builtin_rewrites", "RewriteRule", "eval_expr",
           "EvalDivisionByZero"]


# ---------------------------------------------------------------------------
# atoms and facts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    kind: str                      # 'bnd', 'fix', 'flt', 'rel', 'nzr', 'eql', 'absurd'
    exprs: tuple = ()
    interval: Optional[Interval] = None
    k: Optional[int] = None

    @staticmethod
    def bnd(e: Expr, i: Interval) -> "Atom":
        return Atom("bnd", (e,), i)

    @staticmethod
    def fix(e: Expr, k: int) -> "Atom":
        return Atom("fix", (e,), None, k)

    @staticmethod
    def flt(e: Expr, p: int) -> "Atom":
        return Atom("flt", (e,), None, p)

    @staticmethod
    def rel(u: Expr, v: Expr, i: Interval) -> "Atom":
        return Atom("rel", (u, v), i)

    @staticmethod
    def nzr(e: Expr) -> "Atom":
        return Atom("nzr", (e,))

    @staticmethod
    def eql(a: Expr, b: Expr) -> "Atom":
        return Atom("eql", (a, b))

    @staticmethod
    def absurd() -> "Atom":
        return Atom("absurd")

    def key(self):
        if self.kind in ("bnd", "fix", "flt", "nzr"):
            return (self.kind, self.exprs[0].id)
        if self.kind in ("rel", "eql"):
            return (self.kind, self.exprs[0].id, self.exprs[1].id)
        return ("absurd",)

    def __repr__(self) -> str:
        ids = ",".join(str(e.id) for e in self.exprs)
        extra = self.interval if self.interval is not None else self.k
        return f"{self.kind.upper()}({ids}{',' if extra is not None else ''}{extra or ''})"


@dataclass
class Fact:
    atom: Atom
    theorem: str
    premises: tuple[int, ...] = ()
    side: tuple = ()
    index: int = -1


class _NotApplicable:
    def __repr__(self):
        return "NOT_APPLICABLE"

    def __bool__(self):
        return False


NOT_APPLICABLE = _NotApplicable()


# ---------------------------------------------------------------------------
# the propagation rule table
# ---------------------------------------------------------------------------

def _mag_le_exp(hi: Dyadic) -> int:
    """Smallest j with |x| <= hi implying |x| < 2**j."""
    return hi.mag()


def _mag_ge_exp(lo: Dyadic) -> int:
    """Largest k with 2**k <= lo (lo > 0)."""
    return lo.mag() - 1 if not lo.is_power_of_two() else lo.e


def propagate(ctx: ExprContext, rule_id: str, premises: list[Atom], wp: int,
              fmt: Optional[FpFormat] = None):
    """Apply one table rule to premise atoms; NOT_APPLICABLE on shape mismatch.

    Interval-valued conclusions are outward-rounded to wp mantissa bits.
    """
    p = premises

    def is_bnd(a):
        return a.kind == "bnd"

    if rule_id in ("bnd_add", "bnd_sub", "bnd_mul", "bnd_div"):
        if len(p) != 2 or not (is_bnd(p[0]) and is_bnd(p[1])):
            return NOT_APPLICABLE
        x, y = p[0].exprs[0], p[1].exprs[0]
        op = rule_id[4:]
        fn = {"add": iadd, "sub": isub, "mul": imul, "div": idiv}[op]
        node = getattr(ctx, op)(x, y)
        if op == "mul" and x is y:
            return Atom.bnd(node, isquare(p[0].interval, wp))
        return Atom.bnd(node, fn(p[0].interval, p[1].interval, wp))

    if rule_id == "bnd_neg":
        if len(p) != 1 or not is_bnd(p[0]):
            return NOT_APPLICABLE
        return Atom.bnd(ctx.neg(p[0].exprs[0]), ineg(p[0].interval))

    if rule_id == "bnd_abs":
        if len(p) != 1 or not is_bnd(p[0]):
            return NOT_APPLICABLE
        return Atom.bnd(ctx.abs(p[0].exprs[0]), iabs(p[0].interval))

    if rule_id in ("fix_add", "fix_sub"):
        if len(p) != 2 or p[0].kind != "fix" or p[1].kind != "fix":
            return NOT_APPLICABLE
        x, y = p[0].exprs[0], p[1].exprs[0]
        node = ctx.add(x, y) if rule_id == "fix_add" else ctx.sub(x, y)
        return Atom.fix(node, min(p[0].k, p[1].k))

    if rule_id == "fix_mul":
        if len(p) != 2 or p[0].kind != "fix" or p[1].kind != "fix":
            return NOT_APPLICABLE
        return Atom.fix(ctx.mul(p[0].exprs[0], p[1].exprs[0]), p[0].k + p[1].k)

    if rule_id == "fix_neg":
        if len(p) != 1 or p[0].kind != "fix":
            return NOT_APPLICABLE
        return Atom.fix(ctx.neg(p[0].exprs[0]), p[0].k)

    if rule_id == "flt_mul":
        if len(p) != 2 or p[0].kind != "flt" or p[1].kind != "flt":
            return NOT_APPLICABLE
        return Atom.flt(ctx.mul(p[0].exprs[0], p[1].exprs[0]), p[0].k + p[1].k)

    if rule_id == "flt_neg":
        if len(p) != 1 or p[0].kind != "flt":
            return NOT_APPLICABLE
        return Atom.flt(ctx.neg(p[0].exprs[0]), p[0].k)

    if rule_id == "flt_of_fix":
        # FIX(x, e) and |x| <= hi  ==>  FLT(x, mag(hi) - e)
        if len(p) != 2 or p[0].kind != "fix" or not is_bnd(p[1]):
            return NOT_APPLICABLE
        x = p[0].exprs[0]
        bexpr = p[1].exprs[0]
        if not (bexpr is x or (bexpr.kind == E.ABS and bexpr.children[0] is x)):
            return NOT_APPLICABLE
        hi = p[1].interval.abs_upper()
        if hi.is_zero():
            return Atom.flt(x, 1)
        bits = _mag_le_exp(hi) - p[0].k
        if bits < 1:
            bits = 1
        return Atom.flt(x, bits)

    if rule_id == "fix_of_flt":
        # FLT(x, p) and |x| >= lo > 0  ==>  FIX(x, k - p + 1) with 2**k <= lo
        if len(p) != 2 or p[0].kind != "flt" or not is_bnd(p[1]):
            return NOT_APPLICABLE
        x = p[0].exprs[0]
        bexpr = p[1].exprs[0]
        if not (bexpr is x or (bexpr.kind == E.ABS and bexpr.children[0] is x)):
            return NOT_APPLICABLE
        lo = p[1].interval.abs_lower()
        if lo.is_zero():
            return NOT_APPLICABLE
        return Atom.fix(x, _mag_ge_exp(lo) - p[0].k + 1)

    if rule_id == "exact_round":
        # representable values round to themselves
        if len(p) != 2 or p[0].kind != "flt" or p[1].kind != "fix" or fmt is None:
            return NOT_APPLICABLE
        x = p[0].exprs[0]
        if p[1].exprs[0] is not x:
            return NOT_APPLICABLE
        if p[0].k > fmt.p or p[1].k < fmt.e_min:
            return NOT_APPLICABLE
        rnode = _find_round(ctx, fmt, x)
        if rnode is None:
            return NOT_APPLICABLE
        return Atom.eql(rnode, x)

    if rule_id == "bnd_round":
        if len(p) != 1 or not is_bnd(p[0]) or fmt is None:
            return NOT_APPLICABLE
        node = _find_round(ctx, fmt, p[0].exprs[0])
        if node is None:
            return NOT_APPLICABLE
        return Atom.bnd(node, round_enclosure(fmt, p[0].interval))

    if rule_id == "rel_compose":
        if len(p) != 2 or p[0].kind != "rel" or p[1].kind != "rel":
            return NOT_APPLICABLE
        if p[0].exprs[1] is not p[1].exprs[0]:
            return NOT_APPLICABLE
        return Atom.rel(p[0].exprs[0], p[1].exprs[1],
                        rel_compose(p[0].interval, p[1].interval, wp))

    if rule_id == "rel_to_bnd":
        # REL(u, v, I) and NZR(v)  ==>  (u-v)/v in I
        if len(p) != 2 or p[0].kind != "rel" or p[1].kind != "nzr":
            return NOT_APPLICABLE
        u, v = p[0].exprs
        if p[1].exprs[0] is not v:
            return NOT_APPLICABLE
        return Atom.bnd(ctx.div(ctx.sub(u, v), v), p[0].interval)

    if rule_id == "bnd_to_rel":
        if len(p) != 2 or not is_bnd(p[0]) or p[1].kind != "nzr":
            return NOT_APPLICABLE
        q = p[0].exprs[0]
        if q.kind != E.DIV or q.children[0].kind != E.SUB:
            return NOT_APPLICABLE
        u, v = q.children[0].children
        if q.children[1] is not v or p[1].exprs[0] is not v:
            return NOT_APPLICABLE
        if p[0].interval.lo <= Dyadic(-1):
            return NOT_APPLICABLE
        return Atom.rel(u, v, p[0].interval)

    if rule_id == "nzr_of_bnd":
        if len(p) != 1 or not is_bnd(p[0]):
            return NOT_APPLICABLE
        if p[0].interval.contains_zero():
            return NOT_APPLICABLE
        return Atom.nzr(p[0].exprs[0])

    return NOT_APPLICABLE


def _find_round(ctx: ExprContext, fmt: FpFormat, x: Expr) -> Optional[Expr]:
    for node in ctx.nodes():
        if node.kind == E.ROUND and node.children[0] is x and node.round_format == fmt:
            return node
    return None


# ---------------------------------------------------------------------------
# built-in decorrelation rewrites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RewriteRule:
    """One decorrelation pattern; the approximate term always comes first."""
    name: str
    approx_first: bool = True   # orientation: least accurate term written first
    needs_nonzero: tuple = ()   # expressions that must be nonzero for validity


def builtin_rewrites(ctx: ExprContext, target: Expr,
                     pairs: list[tuple[Expr, Expr]]) -> list[tuple[RewriteRule, Expr]]:
    """Rewrites of `target` through the approximates-relation.

    Absolute chains u-w -> (u-v)+(v-w), relative chains for (u-w)/w, and
    value substitution u -> v*(1+eps).  Quotient cancellation is deliberately
    not generated automatically; it stays a user hint.
    """
    out: list[tuple[RewriteRule, Expr]] = []
    one = ctx.const(Fraction(1))

    if target.kind == E.SUB:
        a, b = target.children
        if a is b:
            out.append((RewriteRule("chain_abs_self"), ctx.const(Fraction(0))))
            return out
        for u, v in pairs:
            if u is a and v is not b:
                out.append((RewriteRule("chain_abs"),
                            ctx.add(ctx.sub(a, v), ctx.sub(v, b))))
            if v is b and u is not a:
                out.append((RewriteRule("chain_abs"),
                            ctx.add(ctx.sub(a, u), ctx.sub(u, b))))

    if target.kind == E.DIV and target.children[0].kind == E.SUB \
            and target.children[0].children[1] is target.children[1]:
        a = target.children[0].children[0]
        w = target.children[1]
        for u, v in pairs:
            mid = None
            if u is a and v is not w:
                mid = v
            elif v is w and u is not a:
                mid = u
            if mid is None:
                continue
            e1 = ctx.div(ctx.sub(a, mid), mid)
            e2 = ctx.div(ctx.sub(mid, w), w)
            out.append((RewriteRule("chain_rel", needs_nonzero=(mid, w)),
                        ctx.add(ctx.add(e1, e2), ctx.mul(e1, e2))))

    for u, v in pairs:
        if u is target:
            eps = ctx.div(ctx.sub(u, v), v)
            out.append((RewriteRule("subst_rel", needs_nonzero=(v,)),
                        ctx.mul(v, ctx.add(one, eps))))
    return out


# ---------------------------------------------------------------------------
# exact evaluation and the identity checker
# ---------------------------------------------------------------------------


def load_theorem_table() -> dict[str, tuple[str, str]]:
    """The shipped rule table: id -> (conclusion kind, statement)."""
    import importlib.resources
    out: dict[str, tuple[str, str]] = {}
    text = importlib.resources.files(__package__).joinpath("theorems.txt").read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        ident, kind, statement = (part.strip() for part in line.split("|", 2))
        out[ident] = (kind, statement)
    return out


class EvalDivisionByZero(ZeroDivisionError):
    pass


def eval_expr(e: Expr, env: dict[int, Fraction], total_division: bool = True) -> Fraction:
    """Exact evaluation; opaque leaves (variables, rounding applications) read
    their value from env by node id.  x/0 is 0 when total_division, else raises."""
    if e.id in env:
        return env[e.id]
    if e.kind == E.CONST:
        return e.payload
    if e.kind in (E.VAR, E.ROUND):
        raise KeyError(f"no value for opaque node {e!r}")
    vals = [eval_expr(c, env, total_division) for c in e.children]
    if e.kind == E.NEG:
        return -vals[0]
    if e.kind == E.ABS:
        return abs(vals[0])
    if e.kind == E.ADD:
        return vals[0] + vals[1]
    if e.kind == E.SUB:
        return vals[0] - vals[1]
    if e.kind == E.MUL:
        return vals[0] * vals[1]
    if vals[1] == 0:
        if total_division:
            return Fraction(0)
        raise EvalDivisionByZero(f"division by zero in {e!r}")
    return vals[0] / vals[1]


# polynomials: {monomial: coefficient}, monomial = sorted tuple of (var id, power)
_Poly = dict

_TERM_CAP = 50000
_DEGREE_CAP = 128


class NormalizationOverflow(Exception):
    pass


def _pconst(c: Fraction) -> _Poly:
    return {(): c} if c else {}


def _padd(a: _Poly, b: _Poly) -> _Poly:
    out = dict(a)
    for mono, c in b.items():
        s = out.get(mono, Fraction(0)) + c
        if s:
            out[mono] = s
        else:
            out.pop(mono, None)
    return out


def _pneg(a: _Poly) -> _Poly:
    return {m: -c for m, c in a.items()}


def _pmul(a: _Poly, b: _Poly) -> _Poly:
    out: _Poly = {}
    if len(a) * len(b) > _TERM_CAP:
        raise NormalizationOverflow("too many terms")
    for ma, ca in a.items():
        for mb, cb in b.items():
            powers: dict[int, int] = {}
            for var, k in ma:
                powers[var] = powers.get(var, 0) + k
            for var, k in mb:
                powers[var] = powers.get(var, 0) + k
            if sum(powers.values()) > _DEGREE_CAP:
                raise NormalizationOverflow("degree cap exceeded")
            mono = tuple(sorted(powers.items()))
            c = ca * cb
            s = out.get(mono, Fraction(0)) + c
            if s:
                out[mono] = s
            else:
                out.pop(mono, None)
    if len(out) > _TERM_CAP:
        raise NormalizationOverflow("too many terms")
    return out


def _to_rational_function(e: Expr, cache: dict[int, tuple]) -> tuple:
    """(num poly, den poly); opaque nodes become fresh formal variables."""
    hit = cache.get(e.id)
    if hit is not None:
        return hit
    if e.kind == E.CONST:
        rf = (_pconst(e.payload), _pconst(Fraction(1)))
    elif e.kind in (E.VAR, E.ROUND, E.ABS):
        # |x| is treated as opaque: sound for acceptance (a free-variable
        # identity specializes), at worst over-warns
        rf = ({((e.id, 1),): Fraction(1)}, _pconst(Fraction(1)))
    else:
        parts = [_to_rational_function(c, cache) for c in e.children]
        if e.kind == E.NEG:
            rf = (_pneg(parts[0][0]), parts[0][1])
        elif e.kind == E.ADD:
            (n1, d1), (n2, d2) = parts
            rf = (_padd(_pmul(n1, d2), _pmul(n2, d1)), _pmul(d1, d2))
        elif e.kind == E.SUB:
            (n1, d1), (n2, d2) = parts
            rf = (_padd(_pmul(n1, d2), _pneg(_pmul(n2, d1))), _pmul(d1, d2))
        elif e.kind == E.MUL:
            (n1, d1), (n2, d2) = parts
            rf = (_pmul(n1, n2), _pmul(d1, d2))
        elif e.kind == E.DIV:
            (n1, d1), (n2, d2) = parts
            if not n2:
                # division by a syntactic zero: the quotient is zero everywhere
                rf = ({}, _pconst(Fraction(1)))
            else:
                rf = (_pmul(n1, d2), _pmul(d1, n2))
        else:
            raise AssertionError(e.kind)
    cache[e.id] = rf
    return rf


@dataclass
class IdentityResult:
    identity: bool
    probabilistic: bool = False
    witness: Optional[dict[str, Fraction]] = None


def _opaque_leaves(e: Expr) -> list[Expr]:
    return [n for n in E.subexpressions(e) if n.kind in (E.VAR, E.ROUND, E.ABS)]


def _leaf_name(n: Expr) -> str:
    if n.kind == E.VAR:
        return n.payload
    return f"<node {n.id}>"


def _witness_search(lhs: Expr, rhs: Expr, leaves: list[Expr]) -> Optional[dict]:
    rng = random.Random(20140501)
    small = [Fraction(0), Fraction(1), Fraction(-1), Fraction(2), Fraction(1, 2),
             Fraction(-2), Fraction(3), Fraction(-1, 2)]
    trials: list[list[Fraction]] = []
    for base in small:
        trials.append([base] * len(leaves))
    for i, alt in enumerate(small):
        for j in range(len(leaves)):
            pt = [Fraction(i + 1)] * len(leaves)
            pt[j] = alt
            trials.append(pt)
    for _ in range(256):
        trials.append([Fraction(rng.randint(-50, 50), rng.randint(1, 9))
                       for _ in leaves])
    for pt in trials:
        env = {leaf.id: val for leaf, val in zip(leaves, pt)}
        if any(n.kind == E.ABS and val < 0 for n, val in zip(leaves, pt)):
            continue
        try:
            lv = eval_expr(lhs, env, total_division=False)
            rv = eval_expr(rhs, env, total_division=False)
        except EvalDivisionByZero:
            continue
        if lv != rv:
            return {_leaf_name(n): v for n, v in zip(leaves, pt)}
    return None


def verify_identity(lhs: Expr, rhs: Expr,
                    constraints: list[Expr] = ()) -> IdentityResult:
    """Decide lhs = rhs as formal rational functions of the free leaves.

    Rounding applications and absolute values are opaque formal variables.
    Constraints (nonzero side conditions) never change a rational-function
    identity, so they are accepted but unused here.  On normalization
    overflow, falls back to exact evaluation at 32 random points.
    """
    leaves_map: dict[int, Expr] = {}
    for n in _opaque_leaves(lhs) + _opaque_leaves(rhs):
        leaves_map.setdefault(n.id, n)
    leaves = list(leaves_map.values())
    try:
        cache: dict[int, tuple] = {}
        n1, d1 = _to_rational_function(lhs, cache)
        n2, d2 = _to_rational_function(rhs, cache)
        if _padd(_pmul(n1, d2), _pneg(_pmul(n2, d1))) == {}:
            return IdentityResult(True)
        witness = _witness_search(lhs, rhs, leaves)
        return IdentityResult(False, witness=witness)
    except NormalizationOverflow:
        pass
    rng = random.Random(573)
    for _ in range(32):
        tries = 0
        while True:
            env = {n.id: Fraction(rng.randint(-10**6, 10**6), rng.randint(1, 10**3))
                   for n in leaves}
            for n in leaves:
                if n.kind == E.ABS:
                    env[n.id] = abs(env[n.id])
            try:
                lv = eval_expr(lhs, env, total_division=False)
                rv = eval_expr(rhs, env, total_division=False)
                break
            except EvalDivisionByZero:
                tries += 1
                if tries > 64:
                    return IdentityResult(False, probabilistic=True)
        if lv != rv:
            return IdentityResult(
                False, witness={_leaf_name(n): env[n.id] for n in leaves})
    return IdentityResult(True, probabilistic=True)
