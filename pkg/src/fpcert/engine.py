"""Goal-directed saturation over the fact store.

The engine seeds facts from the hypotheses, then repeatedly applies theorem
schemes until nothing improves: structural interval evaluation (forward and
inverse), representability (FIX/FLT) propagation, rounding-operator facts,
relative-error composition through the approximates graph, quotient
decorrelation, and user rewrite hints.  Interval splits solve independent
subproblems whose results are hulled.

Saturation runs in two phases: first strictly, then (in unconstrained mode)
again with underivable nonzero side conditions assumed and logged.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import expr as E
from .expr import Expr, ExprContext
from .facts import Atom, Fact
from .formats import abs_error_bound, rel_error_bound, round_enclosure
from .numeric import (EMPTY, Dyadic, Interval, dyadic_from_rational, iabs,
                      iadd, idiv, imul, ineg, interval_intersect, isquare,
                      isub, rel_compose, rel_invert)
from .syntax import Hint, PropAtom, Script

__all__ = ["Options", "FactStore", "ResourceLimit", "Saturator"]

_ONE_I = Interval(Dyadic(1), Dyadic(1))
_ZERO_I = Interval(Dyadic(0), Dyadic(0))
_MINUS_ONE = Dyadic(-1)


class ResourceLimit(Exception):
    pass


@dataclass
class Options:
    precision: int = 80
    unconstrained: bool = False
    budget: int = 1_000_000
    strict_hints: bool = False
    max_depth: int = 32
    max_created_factor: int = 8  # cap on engine-created nodes vs script size


# ---------------------------------------------------------------------------
# fact store
# ---------------------------------------------------------------------------


class FactStore:
    """Append-only fact log with best-fact memoization per atom key.

    Interval facts only ever shrink; each accepted improvement is a new log
    entry whose premises reference earlier entries, so the log is already in
    topological order for certificate emission.
    """

    def __init__(self, ctx: ExprContext, options: Options):
        self.ctx = ctx
        self.wp = options.precision
        self.options = options
        self.log: list[Fact] = []
        self.best: dict[tuple, int] = {}
        self.rel_keys: list[tuple[Expr, Expr]] = []
        self._rel_key_set: set[tuple[int, int]] = set()
        self.rel_by_first: dict[int, list[tuple[Expr, Expr]]] = {}
        self.eql_pairs: list[tuple[Expr, Expr]] = []
        self.pairs: dict[tuple[int, int], tuple[Expr, Expr]] = {}
        self.assumptions: dict[int, int] = {}  # expr id -> axiom fact index
        self.contradiction: Optional[int] = None
        self.firings = 0
        self.changed = False

    # -- lookups ------------------------------------------------------------

    def _best_atom(self, key) -> Optional[Atom]:
        idx = self.best.get(key)
        return self.log[idx].atom if idx is not None else None

    def bnd(self, e: Expr) -> Optional[Interval]:
        a = self._best_atom(("bnd", e.id))
        return a.interval if a else None

    def fix(self, e: Expr) -> Optional[int]:
        a = self._best_atom(("fix", e.id))
        return a.k if a else None

    def flt(self, e: Expr) -> Optional[int]:
        a = self._best_atom(("flt", e.id))
        return a.k if a else None

    def nzr(self, e: Expr) -> bool:
        return ("nzr", e.id) in self.best

    def rel(self, u: Expr, v: Expr) -> Optional[Interval]:
        a = self._best_atom(("rel", u.id, v.id))
        return a.interval if a else None

    def idx_bnd(self, e: Expr) -> Optional[int]:
        return self.best.get(("bnd", e.id))

    def idx_fix(self, e: Expr) -> Optional[int]:
        return self.best.get(("fix", e.id))

    def idx_flt(self, e: Expr) -> Optional[int]:
        return self.best.get(("flt", e.id))

    def idx_nzr(self, e: Expr) -> Optional[int]:
        return self.best.get(("nzr", e.id))

    def idx_rel(self, u: Expr, v: Expr) -> Optional[int]:
        return self.best.get(("rel", u.id, v.id))

    def eql_members(self, e: Expr) -> list[tuple[Expr, int]]:
        """Nodes recorded equal to e, with the connecting fact index."""
        out = []
        for a, b in self.eql_pairs:
            if a is e:
                out.append((b, self.best[("eql", a.id, b.id)]))
            elif b is e:
                out.append((a, self.best[("eql", a.id, b.id)]))
        return out

    # -- improvement --------------------------------------------------------

    @staticmethod
    def _meaningful(old: Interval, new: Interval) -> bool:
        def mag_class(d: Dyadic):
            return (d.sign, d.mag() if d.m else 0)

        if mag_class(new.lo) != mag_class(old.lo) or mag_class(new.hi) != mag_class(old.hi):
            return True
        wo = old.hi - old.lo
        wn = new.hi - new.lo
        # accept when the width shrinks by at least 2**-10 relatively
        return (wo - wn).scale2(10) >= wo

    def would_improve(self, atom: Atom) -> bool:
        key = atom.key()
        cur = self.best.get(key)
        if cur is None:
            if atom.kind == "rel" and atom.interval.lo <= _MINUS_ONE:
                return False
            return True
        if atom.kind in ("bnd", "rel"):
            old = self.log[cur].atom.interval
            inter = interval_intersect(old, atom.interval)
            if inter is EMPTY:
                return True
            return inter.strictly_inside(old) and self._meaningful(old, inter)
        if atom.kind == "fix":
            return atom.k > self.log[cur].atom.k
        if atom.kind == "flt":
            return atom.k < self.log[cur].atom.k
        return False

    def improve(self, atom: Atom, theorem: str, premises: tuple[int, ...] = (),
                side: tuple = ()) -> Optional[int]:
        """Record the atom if it improves on what is known; index if recorded."""
        self.firings += 1
        if self.firings > self.options.budget:
            raise ResourceLimit(f"rule budget of {self.options.budget} exhausted")
        key = atom.key()
        cur = self.best.get(key)
        if atom.kind in ("bnd", "rel"):
            if cur is not None:
                old = self.log[cur].atom.interval
                inter = interval_intersect(old, atom.interval)
                if inter is EMPTY:
                    idx = self._append(atom, theorem, premises, side)
                    self._append(Atom.absurd(), "absurd_intersect", (cur, idx), ())
                    return idx
                if not inter.strictly_inside(old) or not self._meaningful(old, inter):
                    return None
                atom = Atom(atom.kind, atom.exprs, inter)
                premises = premises + (cur,)
                side = side + ("inter",)
            elif atom.kind == "rel" and atom.interval.lo <= _MINUS_ONE:
                return None  # cannot establish the -1 < lo invariant
        elif atom.kind == "fix":
            if cur is not None and self.log[cur].atom.k >= atom.k:
                return None
        elif atom.kind == "flt":
            if cur is not None and self.log[cur].atom.k <= atom.k:
                return None
        elif cur is not None:  # nzr / eql / absurd are boolean
            return None
        return self._append(atom, theorem, premises, side)

    def _append(self, atom: Atom, theorem: str, premises: tuple[int, ...],
                side: tuple) -> int:
        fact = Fact(atom, theorem, premises, side, len(self.log))
        self.log.append(fact)
        self.best[atom.key()] = fact.index
        self.changed = True
        if atom.kind == "rel":
            u, v = atom.exprs
            if (u.id, v.id) not in self._rel_key_set:
                self._rel_key_set.add((u.id, v.id))
                self.rel_keys.append((u, v))
                self.rel_by_first.setdefault(u.id, []).append((u, v))
            self.add_pair(u, v)
        elif atom.kind == "eql":
            a, b = atom.exprs
            if (a, b) not in self.eql_pairs:
                self.eql_pairs.append((a, b))
        elif atom.kind == "absurd":
            if self.contradiction is None:
                self.contradiction = fact.index
        return fact.index

    def add_pair(self, u: Expr, v: Expr) -> None:
        if u is not v:
            self.pairs.setdefault((u.id, v.id), (u, v))


# ---------------------------------------------------------------------------
# the saturation engine
# ---------------------------------------------------------------------------


class Saturator:
    def __init__(self, script: Script, options: Options, store: FactStore):
        self.script = script
        self.options = options
        self.ctx = script.ctx
        self.store = store
        self.wp = options.precision
        self.assume = False  # phase 2: unconstrained side conditions allowed
        self.node_cap = max(2000, options.max_created_factor * self.ctx.node_count())
        self.hint_fired: set[int] = set()
        self._gen: dict[int, int] = {}
        self._parent_cache: dict[tuple[int, str], list[Expr]] = {}
        self._parent_count = -1

    # -- plumbing -----------------------------------------------------------

    def _can_create(self) -> bool:
        return self.ctx.node_count() < self.node_cap

    def _imp(self, atom, theorem, premises=(), side=()):
        return self.store.improve(atom, theorem, premises, side)

    def _nzr_gate(self, v: Expr) -> Optional[int]:
        """Index of an NZR(v) fact, assuming it (with a log entry) in phase 2."""
        idx = self.store.idx_nzr(v)
        if idx is not None:
            return idx
        if self.assume and self.options.unconstrained:
            idx = self.store._append(Atom.nzr(v), "axiom_nzr", (), ())
            self.store.assumptions[v.id] = idx
            return idx
        return None

    def _parents(self, child: Expr, kind: str) -> list[Expr]:
        if self._parent_count != self.ctx.node_count():
            cache: dict[tuple[int, str], list[Expr]] = {}
            for node in self.ctx.nodes():
                for c in node.children:
                    cache.setdefault((c.id, node.kind), []).append(node)
            self._parent_cache = cache
            self._parent_count = self.ctx.node_count()
        return self._parent_cache.get((child.id, kind), [])

    def _refl(self, e: Expr) -> int:
        idx = self.store.idx_rel(e, e)
        if idx is None:
            self._imp(Atom.rel(e, e, _ZERO_I), "rel_refl")
            idx = self.store.idx_rel(e, e)
        return idx

    # -- seeding ------------------------------------------------------------

    def seed(self, extra_clips: list[tuple[Expr, Interval, tuple]] = ()) -> None:
        st = self.store
        for hyp_index, atom in enumerate(self.script.hypotheses):
            iv = self._atom_interval(atom)
            st.improve(Atom.bnd(atom.expr, iv), "hyp_bnd", (), (hyp_index,))
            shape = atom.is_rel_shape()
            if shape is not None:
                u, v = shape
                lo, hi = iv.lo, iv.hi
                if atom.expr.kind == E.ABS:
                    lo = -hi
                if lo > _MINUS_ONE:
                    st.improve(Atom.rel(u, v, Interval(lo, hi)), "hyp_rel",
                               (), (hyp_index,))
                st.add_pair(u, v)
            e = atom.expr
            if e.kind == E.ABS:
                e = e.children[0]
            if e.kind == E.SUB:  # absolute-error-shaped hypothesis
                st.add_pair(e.children[0], e.children[1])
        for var, clip, side in extra_clips:
            st.improve(Atom.bnd(var, clip), "split_case", (), side)
        for node in self.ctx.nodes():
            if node.kind == E.ROUND:
                st.add_pair(node, node.children[0])

    def _atom_interval(self, atom: PropAtom) -> Interval:
        lo = dyadic_from_rational(atom.lo, self.wp, "down")
        hi = dyadic_from_rational(atom.hi, self.wp, "up")
        return Interval(lo, hi)

    # -- top-level loop -----------------------------------------------------

    def run(self, hints: list[Hint]) -> None:
        rewrites = [h for h in hints if h.kind == "rewrite"]
        for h in hints:
            if h.kind == "approx":
                self.store.add_pair(h.lhs, h.rhs)
        self.assume = False
        self._fixpoint(rewrites)
        if self.options.unconstrained and self.store.contradiction is None:
            self.assume = True
            self._fixpoint(rewrites)

    def _fixpoint(self, rewrites: list[Hint]) -> None:
        while True:
            self.store.changed = False
            for node in list(self.ctx.nodes()):
                self.structural(node)
            for node in list(self.ctx.nodes()):
                if node.kind == E.ROUND:
                    self.rounding(node)
            self.rel_pass()
            self._rel_mul_scan()
            for node in list(self.ctx.nodes()):
                if node.kind == E.DIV:
                    self.division(node)
            self.chain_pass()
            for hint in rewrites:
                self.apply_hint(hint)
            self.eql_pass()
            if not self.store.changed or self.store.contradiction is not None:
                return

    # -- structural rules ----------------------------------------------------

    def structural(self, n: Expr) -> None:
        st = self.store
        kind = n.kind
        if kind == E.CONST:
            if st.idx_bnd(n) is None:
                q: Fraction = n.payload
                lo = dyadic_from_rational(q, self.wp, "down")
                hi = dyadic_from_rational(q, self.wp, "up")
                self._imp(Atom.bnd(n, Interval(lo, hi)), "const_bnd")
                if lo == hi:
                    if lo.is_zero():
                        self._imp(Atom.fix(n, 0), "const_fix")
                        self._imp(Atom.flt(n, 1), "const_flt")
                    else:
                        self._imp(Atom.fix(n, lo.e), "const_fix")
                        self._imp(Atom.flt(n, lo.bit_length()), "const_flt")
            return
        if kind == E.VAR:
            return
        a = n.children[0]
        b = n.children[1] if len(n.children) > 1 else None
        ia = st.bnd(a)
        ib = st.bnd(b) if b is not None else None
        i_n = st.bnd(n)

        if kind == E.NEG:
            if ia is not None:
                self._imp(Atom.bnd(n, ineg(ia)), "bnd_neg", (st.idx_bnd(a),))
            if i_n is not None:
                self._imp(Atom.bnd(a, ineg(i_n)), "bnd_neg_inv", (st.idx_bnd(n),))
            self._mirror_fixflt(n, a, "fix_neg", "flt_neg")
            if st.nzr(a):
                self._imp(Atom.nzr(n), "nzr_neg", (st.idx_nzr(a),))
            if st.nzr(n):
                self._imp(Atom.nzr(a), "nzr_neg_inv", (st.idx_nzr(n),))

        elif kind == E.ABS:
            if ia is not None:
                self._imp(Atom.bnd(n, iabs(ia)), "bnd_abs", (st.idx_bnd(a),))
            if i_n is not None:
                self._imp(Atom.bnd(a, Interval(-i_n.hi, i_n.hi)), "bnd_abs_inv",
                          (st.idx_bnd(n),))
                if ia is not None and ia.lo.sign >= 0:
                    self._imp(Atom.bnd(a, i_n), "abs_refine_pos",
                              (st.idx_bnd(a), st.idx_bnd(n)))
                elif ia is not None and ia.hi.sign <= 0:
                    self._imp(Atom.bnd(a, ineg(i_n)), "abs_refine_neg",
                              (st.idx_bnd(a), st.idx_bnd(n)))
            self._mirror_fixflt(n, a, "fix_abs", "flt_abs")
            if st.nzr(a):
                self._imp(Atom.nzr(n), "nzr_abs", (st.idx_nzr(a),))
            if st.nzr(n):
                self._imp(Atom.nzr(a), "nzr_abs_inv", (st.idx_nzr(n),))

        elif kind in (E.ADD, E.SUB):
            add = kind == E.ADD
            if ia is not None and ib is not None:
                iv = iadd(ia, ib, self.wp) if add else isub(ia, ib, self.wp)
                self._imp(Atom.bnd(n, iv), "bnd_add" if add else "bnd_sub",
                          (st.idx_bnd(a), st.idx_bnd(b)))
            if not add and a is b:
                self._imp(Atom.bnd(n, _ZERO_I), "bnd_sub_zero")
            if i_n is not None:
                if ib is not None:
                    iv = isub(i_n, ib, self.wp) if add else iadd(i_n, ib, self.wp)
                    self._imp(Atom.bnd(a, iv),
                              "bnd_add_inv_l" if add else "bnd_sub_inv_l",
                              (st.idx_bnd(n), st.idx_bnd(b)))
                if ia is not None:
                    iv = isub(i_n, ia, self.wp) if add else isub(ia, i_n, self.wp)
                    self._imp(Atom.bnd(b, iv),
                              "bnd_add_inv_r" if add else "bnd_sub_inv_r",
                              (st.idx_bnd(n), st.idx_bnd(a)))
            fa, fb = st.fix(a), st.fix(b)
            if fa is not None and fb is not None:
                self._imp(Atom.fix(n, min(fa, fb)), "fix_add" if add else "fix_sub",
                          (st.idx_fix(a), st.idx_fix(b)))
            if not add:
                self._sub_rules(n, a, b)

        elif kind == E.MUL:
            if a is b:
                if ia is not None:
                    self._imp(Atom.bnd(n, isquare(ia, self.wp)), "bnd_square",
                              (st.idx_bnd(a),))
            elif ia is not None and ib is not None:
                self._imp(Atom.bnd(n, imul(ia, ib, self.wp)), "bnd_mul",
                          (st.idx_bnd(a), st.idx_bnd(b)))
            if i_n is not None and a is not b:
                if ib is not None and not ib.contains_zero():
                    self._imp(Atom.bnd(a, idiv(i_n, ib, self.wp)), "bnd_mul_inv_l",
                              (st.idx_bnd(n), st.idx_bnd(b)))
                if ia is not None and not ia.contains_zero():
                    self._imp(Atom.bnd(b, idiv(i_n, ia, self.wp)), "bnd_mul_inv_r",
                              (st.idx_bnd(n), st.idx_bnd(a)))
            fa, fb = st.fix(a), st.fix(b)
            if fa is not None and fb is not None:
                self._imp(Atom.fix(n, fa + fb), "fix_mul",
                          (st.idx_fix(a), st.idx_fix(b)))
            pa, pb = st.flt(a), st.flt(b)
            if pa is not None and pb is not None:
                self._imp(Atom.flt(n, pa + pb), "flt_mul",
                          (st.idx_flt(a), st.idx_flt(b)))
            if st.nzr(a) and st.nzr(b):
                self._imp(Atom.nzr(n), "nzr_mul", (st.idx_nzr(a), st.idx_nzr(b)))
            if st.nzr(n):
                self._imp(Atom.nzr(a), "nzr_mul_inv", (st.idx_nzr(n),), ("l",))
                self._imp(Atom.nzr(b), "nzr_mul_inv", (st.idx_nzr(n),), ("r",))

        elif kind == E.ROUND:
            if ia is not None:
                try:
                    self._imp(Atom.bnd(n, round_enclosure(n.round_format, ia)),
                              "bnd_round", (st.idx_bnd(a),))
                except ArithmeticError:
                    pass

        self._fixflt_mag(n)

    def _mirror_fixflt(self, n: Expr, a: Expr, fix_th: str, flt_th: str) -> None:
        st = self.store
        fa = st.fix(a)
        if fa is not None:
            self._imp(Atom.fix(n, fa), fix_th, (st.idx_fix(a),))
        pa = st.flt(a)
        if pa is not None:
            self._imp(Atom.flt(n, pa), flt_th, (st.idx_flt(a),))

    def _fixflt_mag(self, n: Expr) -> None:
        st = self.store
        iv = st.bnd(n)
        if iv is None:
            return
        if not iv.contains_zero():
            self._imp(Atom.nzr(n), "nzr_of_bnd", (st.idx_bnd(n),))
        k = st.fix(n)
        if k is not None:
            hi = iv.abs_upper()
            bits = 1 if hi.is_zero() else max(1, hi.mag() - k)
            self._imp(Atom.flt(n, bits), "flt_of_fix", (st.idx_fix(n), st.idx_bnd(n)))
        p = st.flt(n)
        if p is not None:
            lo = iv.abs_lower()
            if not lo.is_zero():
                j = lo.e if lo.is_power_of_two() else lo.mag() - 1
                self._imp(Atom.fix(n, j - p + 1), "fix_of_flt",
                          (st.idx_flt(n), st.idx_bnd(n)))

    def _sub_rules(self, n: Expr, a: Expr, b: Expr) -> None:
        st = self.store
        # common-addend cancellation: (x+y) - (x+w) = y - w
        if a.kind == E.ADD and b.kind == E.ADD and self._can_create():
            ax, ay = a.children
            bx, by = b.children
            if ax is bx and ay is not by:
                self._imp(Atom.eql(n, self.ctx.sub(ay, by)), "eql_sub_common_l")
            if ay is by and ax is not bx:
                self._imp(Atom.eql(n, self.ctx.sub(ax, bx)), "eql_sub_common_r")
        # value difference through a known relative error: a-b = b*eps
        rel = st.rel(a, b)
        ib = st.bnd(b)
        if rel is not None and ib is not None:
            self._imp(Atom.bnd(n, imul(ib, rel, self.wp)), "bnd_sub_of_rel",
                      (st.idx_rel(a, b), st.idx_bnd(b)))

    # -- rounding-operator facts ----------------------------------------------

    def rounding(self, n: Expr) -> None:
        st = self.store
        f = n.round_format
        x = n.children[0]
        self._imp(Atom.fix(n, f.e_min), "fix_round")
        self._imp(Atom.flt(n, f.p), "flt_round")
        px, kx = st.flt(x), st.fix(x)
        if px is not None and kx is not None and px <= f.p and kx >= f.e_min:
            self._imp(Atom.eql(n, x), "eql_exact_round",
                      (st.idx_flt(x), st.idx_fix(x)))
        ix = st.bnd(x)
        err = self.ctx.lookup(E.SUB, None, (n, x))
        if err is not None and ix is not None:
            self._imp(Atom.bnd(err, abs_error_bound(f, ix)), "abs_err_round",
                      (st.idx_bnd(x),))
        bound = rel_error_bound(f)
        if x.kind in (E.ADD, E.SUB):
            prems = []
            for c in x.children:
                pc, kc = st.flt(c), st.fix(c)
                if pc is None or kc is None or pc > f.p or kc < f.e_min:
                    prems = None
                    break
                prems.extend((st.idx_flt(c), st.idx_fix(c)))
            if prems is not None:
                self._imp(Atom.rel(n, x, bound), "rel_round_add", tuple(prems))
        if ix is not None:
            lo = ix.abs_lower()
            if not lo.is_zero() and lo >= Dyadic.power_of_two(f.smallest_normal_exp()):
                self._imp(Atom.rel(n, x, bound), "rel_round_normal", (st.idx_bnd(x),))

    # -- relative-error machinery ---------------------------------------------

    def rel_pass(self) -> None:
        st = self.store
        for u, v in list(st.rel_keys):
            iv = st.rel(u, v)
            if iv is None:
                continue
            base = st.idx_rel(u, v)
            if iv.lo > _MINUS_ONE:
                self._imp(Atom.rel(v, u, rel_invert(iv, self.wp)), "rel_inv", (base,))
            nu = self.ctx.lookup(E.NEG, None, (u,))
            nv = self.ctx.lookup(E.NEG, None, (v,))
            if nu is not None and nv is not None:
                self._imp(Atom.rel(nu, nv, iv), "rel_neg", (base,))
            for _, w in list(st.rel_by_first.get(v.id, ())):
                i2 = st.rel(v, w)
                if i2 is None or w is u:
                    continue
                self._imp(Atom.rel(u, w, rel_compose(iv, i2, self.wp)),
                          "rel_compose", (base, st.idx_rel(v, w)))
            ivv = st.bnd(v)
            if ivv is not None:
                val = imul(ivv, iadd(_ONE_I, iv, self.wp), self.wp)
                self._imp(Atom.bnd(u, val), "rel_subst_bnd", (base, st.idx_bnd(v)))
            self._rel_add_common(u, v, iv, base)
            q = self._lookup_rel_quotient(u, v)
            if q is not None:
                cand = Atom.bnd(q, iv)
                if st.would_improve(cand):
                    nz = self._nzr_gate(v)
                    if nz is not None:
                        self._imp(cand, "rel_to_bnd", (base, nz))
        # quotient nodes of error shape feed REL facts back
        for q in list(self.ctx.nodes()):
            if q.kind != E.DIV or q.children[0].kind != E.SUB:
                continue
            num, den = q.children
            if num.children[1] is not den:
                continue
            iq = st.bnd(q)
            if iq is None or iq.lo <= _MINUS_ONE:
                continue
            cand = Atom.rel(num.children[0], den, iq)
            if st.would_improve(cand):
                nz = self._nzr_gate(den)
                if nz is not None:
                    self._imp(cand, "bnd_to_rel", (st.idx_bnd(q), nz))
        for a, b in list(st.eql_pairs):
            idx = st.best[("eql", a.id, b.id)]
            self._imp(Atom.rel(a, b, _ZERO_I), "rel_of_eql", (idx,))

    def _rel_add_common(self, x: Expr, y: Expr, ixy: Interval, base: int) -> None:
        """REL(u, v) for u = x (+/-) a, v = y (+/-) a sharing the operand a.

        u - v = +/-(x - y) = +/-(y * eps), so (u-v)/v = +/-(eps * y/v).
        """
        st = self.store
        candidates: list[tuple[Expr, Expr, bool]] = []
        for parent in self._parents(x, E.ADD):
            pa, pb = parent.children
            if pa is x and pb is not x:
                v = self.ctx.lookup(E.ADD, None, (y, pb))
                if v is not None:
                    candidates.append((parent, v, False))
            if pb is x and pa is not x:
                v = self.ctx.lookup(E.ADD, None, (pa, y))
                if v is not None:
                    candidates.append((parent, v, False))
        for parent in self._parents(x, E.SUB):
            pa, pb = parent.children
            if pa is x and pb is not x:
                v = self.ctx.lookup(E.SUB, None, (y, pb))
                if v is not None:
                    candidates.append((parent, v, False))
            if pb is x and pa is not x:
                v = self.ctx.lookup(E.SUB, None, (pa, y))
                if v is not None:
                    candidates.append((parent, v, True))
        for u, v, negate in candidates:
            if u is v:
                continue
            qres = self._quotient(y, v)
            if qres is None:
                continue
            jq, proved, qprem = qres
            prem = (base,) + qprem
            if not proved:
                cand_iv = imul(ineg(ixy) if negate else ixy, jq, self.wp)
                if not st.would_improve(Atom.rel(u, v, cand_iv)):
                    continue
                nz = self._nzr_gate(v)
                if nz is None:
                    continue
                prem += (nz,)
            iv = imul(ineg(ixy) if negate else ixy, jq, self.wp)
            self._imp(Atom.rel(u, v, iv), "rel_add_common", prem,
                      ("neg" if negate else "pos",))

    def _rel_mul_scan(self) -> None:
        """REL congruence for products: REL(a,b), REL(c,d) -> REL(a*c, b*d)."""
        st = self.store
        for u, v in list(st.rel_keys):
            i1 = st.rel(u, v)
            if i1 is None:
                continue
            base = st.idx_rel(u, v)
            for parent in self._parents(u, E.MUL):
                la, lb = parent.children
                for cpos, factor in ((0, la), (1, lb)):
                    if factor is not u:
                        continue
                    other = lb if cpos == 0 else la
                    partner_keys = [(other, other)] + \
                        [(o, p) for o, p in st.rel_by_first.get(other.id, ())]
                    for o_from, o_to in partner_keys:
                        children = (v, o_to) if cpos == 0 else (o_to, v)
                        target = self.ctx.lookup(E.MUL, None, children)
                        if target is None or target is parent:
                            continue
                        if o_from is o_to:
                            oidx = self._refl(other)
                            iv = i1
                        else:
                            i2 = st.rel(o_from, o_to)
                            if i2 is None:
                                continue
                            oidx = st.idx_rel(o_from, o_to)
                            iv = rel_compose(i1, i2, self.wp)
                        prem = (base, oidx) if cpos == 0 else (oidx, base)
                        self._imp(Atom.rel(parent, target, iv), "rel_mul", prem,
                                  (cpos,))

    def _lookup_rel_quotient(self, u: Expr, v: Expr) -> Optional[Expr]:
        num = self.ctx.lookup(E.SUB, None, (u, v))
        if num is None:
            return None
        return self.ctx.lookup(E.DIV, None, (num, v))

    # -- quotient reasoning ----------------------------------------------------

    def division(self, q: Expr) -> None:
        st = self.store
        num, den = q.children
        inum, iden = st.bnd(num), st.bnd(den)
        iq = st.bnd(q)
        if inum is not None and iden is not None and not iden.contains_zero():
            self._imp(Atom.bnd(q, idiv(inum, iden, self.wp)), "bnd_div",
                      (st.idx_bnd(num), st.idx_bnd(den)))
        if iq is not None and not iq.contains_zero():
            self._imp(Atom.nzr(den), "nzr_of_quotient", (st.idx_bnd(q),), ("den",))
            self._imp(Atom.nzr(num), "nzr_of_quotient", (st.idx_bnd(q),), ("num",))
        if st.nzr(num) and st.nzr(den):
            self._imp(Atom.nzr(q), "nzr_div", (st.idx_nzr(num), st.idx_nzr(den)))
        if iq is not None:
            nzden = st.idx_nzr(den)
            if iden is not None and nzden is not None:
                self._imp(Atom.bnd(num, imul(iq, iden, self.wp)), "bnd_div_inv_num",
                          (st.idx_bnd(q), st.idx_bnd(den), nzden))
            if inum is not None and not iq.contains_zero():
                self._imp(Atom.bnd(den, idiv(inum, iq, self.wp)), "bnd_div_inv_den",
                          (st.idx_bnd(num), st.idx_bnd(q)))
        self._qb_candidates(q)
        # relative split of the numerator: (X-Y)/D with REL(X, Y)
        members = [(num, None)] + st.eql_members(num)
        for member, eqidx in members:
            if member.kind != E.SUB:
                continue
            xx, yy = member.children
            irel = st.rel(xx, yy)
            if irel is None:
                continue
            qres = self._quotient(yy, den)
            if qres is None:
                continue
            jq, _, qprem = qres
            prem = (st.idx_rel(xx, yy),) + qprem
            side = ()
            if eqidx is not None:
                prem += (eqidx,)
                side = ("eql", member.id)
            self._imp(Atom.bnd(q, imul(irel, jq, self.wp)), "bnd_div_rel_split",
                      prem, side)
        # numerator substitution: X/D = (V/D)(1 + eps)
        for _, v2 in list(st.rel_by_first.get(num.id, ())):
            irel = st.rel(num, v2)
            if irel is None or v2 is den:
                continue
            qres = self._quotient(v2, den)
            if qres is None:
                continue
            jq, _, qprem = qres
            val = imul(jq, iadd(_ONE_I, irel, self.wp), self.wp)
            self._imp(Atom.bnd(q, val), "bnd_div_subst",
                      (st.idx_rel(num, v2),) + qprem, (v2.id,))
        # direct: A/B with REL(A, B)
        irel = st.rel(num, den)
        if irel is not None:
            cand = Atom.bnd(q, iadd(_ONE_I, irel, self.wp))
            if st.would_improve(cand):
                nz = self._nzr_gate(den)
                if nz is not None:
                    self._imp(cand, "bnd_div_rel_direct", (st.idx_rel(num, den), nz))

    def _quotient(self, y: Expr, v: Expr,
                  gen: int = 1) -> Optional[tuple[Interval, bool, tuple]]:
        """Bound of the total quotient y/v: (interval, v-nonzero-proved, premises).

        The quotient node is materialized on first demand and picked up by the
        division pass on later iterations.
        """
        if y is v:
            nz = self.store.idx_nzr(v)
            if nz is None:
                return None
            return _ONE_I, True, (nz,)
        node = self.ctx.lookup(E.DIV, None, (y, v))
        if node is None:
            if self._can_create():
                node = self.ctx.div(y, v)
                self._gen[node.id] = gen
            return None
        j = self.store.bnd(node)
        if j is None:
            return None
        prem = (self.store.idx_bnd(node),)
        if not j.contains_zero():
            proved = True
        elif self.store.nzr(v):
            proved = True
            prem += (self.store.idx_nzr(v),)
        else:
            proved = False
        return j, proved, prem

    def _qb_candidates(self, q: Expr) -> None:
        """Bound y/v by dividing through one operand of the denominator."""
        st = self.store
        y, v = q.children
        gen = self._gen.get(q.id, 0)
        if gen >= 3:
            return
        if v.kind in (E.ADD, E.SUB):
            a, b = v.children
            pivots = [(a, b, 0)]
            if v.kind == E.ADD:
                pivots.append((b, a, 1))
            for pivot, other, ppos in pivots:
                nz = st.idx_nzr(pivot)
                if nz is None:
                    continue
                q1 = self._quotient(y, pivot, gen + 1)
                q2 = self._quotient(other, pivot, gen + 1)
                if q1 is None or q2 is None:
                    continue
                j1, _, p1 = q1
                j2, _, p2 = q2
                adj = ineg(j2) if v.kind == E.SUB else j2
                denom = iadd(_ONE_I, adj, self.wp)
                if denom.contains_zero():
                    continue
                theorem = ("qb_div_through_sub" if v.kind == E.SUB
                           else "qb_div_through_add")
                prem = (nz,) + p1 + p2
                self._imp(Atom.bnd(q, idiv(j1, denom, self.wp)), theorem, prem,
                          ("pivot", ppos))
                self._imp(Atom.nzr(v), "nzr_div_through", (nz,) + p2,
                          ("pivot", ppos))
        elif v.kind == E.MUL:
            a, b = v.children
            for pivot, other, ppos in ((a, b, 0), (b, a, 1)):
                iother = st.bnd(other)
                if iother is None or iother.contains_zero():
                    continue
                q1 = self._quotient(y, pivot, gen + 1)
                if q1 is None:
                    continue
                j1, _, p1 = q1
                self._imp(Atom.bnd(q, idiv(j1, iother, self.wp)),
                          "qb_div_through_mul", p1 + (st.idx_bnd(other),),
                          ("pivot", ppos))

    # -- built-in decorrelation chains ------------------------------------------

    def chain_pass(self) -> None:
        st = self.store
        pair_list = list(st.pairs.values())
        for node in list(self.ctx.nodes()):
            if node.kind == E.SUB:
                a, b = node.children
                for u, v in pair_list:
                    if u is a and v is not b:
                        self._chain_abs(node, a, v, b)
                    elif v is b and u is not a:
                        self._chain_abs(node, a, u, b)
            elif node.kind == E.DIV and node.children[0].kind == E.SUB \
                    and node.children[0].children[1] is node.children[1]:
                a = node.children[0].children[0]
                w = node.children[1]
                for u, v in pair_list:
                    mid = None
                    if u is a and v is not w:
                        mid = v
                    elif v is w and u is not a:
                        mid = u
                    if mid is not None and mid is not a:
                        self._chain_rel(node, a, mid, w)

    def _chain_abs(self, node: Expr, a: Expr, mid: Expr, b: Expr) -> None:
        if not self._can_create():
            return
        st = self.store
        t1 = self.ctx.sub(a, mid)
        t2 = self.ctx.sub(mid, b)
        i1, i2 = st.bnd(t1), st.bnd(t2)
        if i1 is None or i2 is None:
            return
        self._imp(Atom.bnd(node, iadd(i1, i2, self.wp)), "chain_abs",
                  (st.idx_bnd(t1), st.idx_bnd(t2)), (mid.id,))

    def _chain_rel(self, node: Expr, a: Expr, mid: Expr, w: Expr) -> None:
        if not self._can_create():
            return
        st = self.store
        e1 = self.ctx.div(self.ctx.sub(a, mid), mid)
        e2 = self.ctx.div(self.ctx.sub(mid, w), w)
        i1, i2 = st.bnd(e1), st.bnd(e2)
        if i1 is None or i2 is None:
            return
        cand = Atom.bnd(node, rel_compose(i1, i2, self.wp))
        if not st.would_improve(cand):
            return
        nz1 = self._nzr_gate(mid)
        nz2 = self._nzr_gate(w)
        if nz1 is None or nz2 is None:
            return
        self._imp(cand, "chain_rel", (st.idx_bnd(e1), st.idx_bnd(e2), nz1, nz2),
                  (mid.id,))

    # -- user rewrite hints ------------------------------------------------------

    def apply_hint(self, hint: Hint) -> None:
        st = self.store
        irhs = st.bnd(hint.rhs)
        if irhs is None:
            return
        cand = Atom.bnd(hint.lhs, irhs)
        if not st.would_improve(cand):
            return
        gates: list[int] = []
        for d in self._denominators(hint.lhs) + self._denominators(hint.rhs) \
                + list(hint.constraints):
            nz = self._nzr_gate(d)
            if nz is None:
                return
            if nz not in gates:
                gates.append(nz)
        idx = self._imp(cand, "hint_rewrite",
                        (st.idx_bnd(hint.rhs),) + tuple(gates), (hint.line,))
        if idx is not None:
            self.hint_fired.add(hint.line)

    def _denominators(self, e: Expr) -> list[Expr]:
        out: list[Expr] = []
        for sub in E.subexpressions(e):
            if sub.kind == E.DIV and sub.children[1] not in out:
                out.append(sub.children[1])
        return out

    # -- equality transfer ---------------------------------------------------

    def eql_pass(self) -> None:
        st = self.store
        for a, b in list(st.eql_pairs):
            eq = st.best[("eql", a.id, b.id)]
            for x, y in ((a, b), (b, a)):
                iv = st.bnd(x)
                if iv is not None:
                    self._imp(Atom.bnd(y, iv), "bnd_of_eql", (st.idx_bnd(x), eq))
                k = st.fix(x)
                if k is not None:
                    self._imp(Atom.fix(y, k), "fix_of_eql", (st.idx_fix(x), eq))
                p = st.flt(x)
                if p is not None:
                    self._imp(Atom.flt(y, p), "flt_of_eql", (st.idx_flt(x), eq))
                if st.nzr(x):
                    self._imp(Atom.nzr(y), "nzr_of_eql", (st.idx_nzr(x), eq))
            sub = self.ctx.lookup(E.SUB, None, (a, b))
            if sub is not None:
                self._imp(Atom.bnd(sub, _ZERO_I), "bnd_sub_eql", (eq,))
