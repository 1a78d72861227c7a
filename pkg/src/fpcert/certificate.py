"""Proof certificates: emission and independent exact-arithmetic replay.

A certificate is a line-oriented text file carrying an expression table, one
fact section per subproblem (facts reference earlier facts by local index),
split-coverage data, and the goal records.  The checker re-derives every
fact's validity condition from its premises using exact rational arithmetic
and structural checks only; it never reuses the engine's search machinery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from . import expr as E
from .expr import Expr, ExprContext
from .facts import verify_identity
from .formats import FpFormat, make_format
from .numeric import Dyadic, Interval
from .syntax import Script, load_script, script_hash

__all__ = ["emit", "check", "CheckResult", "HashMismatch", "CertificateError"]


class CertificateError(Exception):
    pass


class HashMismatch(CertificateError):
    pass


@dataclass
class CheckResult:
    status: str                 # 'pass' | 'pass-with-axioms' | 'fail'
    detail: str = ""
    axioms: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return self.status in ("pass", "pass-with-axioms")


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _dy(d: Dyadic) -> str:
    return f"{d.m}b{d.e}"


def _parse_dy(text: str) -> Dyadic:
    m, _, e = text.rpartition("b")
    return Dyadic(int(m), int(e))


def _atom_text(atom) -> str:
    if atom.kind == "bnd":
        return f"bnd {atom.exprs[0].id} {_dy(atom.interval.lo)} {_dy(atom.interval.hi)}"
    if atom.kind in ("fix", "flt"):
        return f"{atom.kind} {atom.exprs[0].id} {atom.k}"
    if atom.kind == "rel":
        return (f"rel {atom.exprs[0].id} {atom.exprs[1].id} "
                f"{_dy(atom.interval.lo)} {_dy(atom.interval.hi)}")
    if atom.kind == "nzr":
        return f"nzr {atom.exprs[0].id}"
    if atom.kind == "eql":
        return f"eql {atom.exprs[0].id} {atom.exprs[1].id}"
    return "absurd"


def _expr_lines(exprs: list[Expr]) -> list[str]:
    lines = []
    for e in sorted(exprs, key=lambda n: n.id):
        if e.kind == E.VAR:
            lines.append(f"expr {e.id} var {e.payload}")
        elif e.kind == E.CONST:
            q: Fraction = e.payload
            lines.append(f"expr {e.id} const {q.numerator}/{q.denominator}")
        elif e.kind == E.ROUND:
            f = e.round_format
            lines.append(f"expr {e.id} round {e.round_name} {f.name} {f.mode} "
                         f"{e.children[0].id}")
        else:
            kids = " ".join(str(c.id) for c in e.children)
            lines.append(f"expr {e.id} {e.kind} {kids}")
    return lines


def emit(bundle) -> str:
    """Serialize the proof of every resolved goal (garbage-free, deterministic)."""
    from .prover import proof_cone

    script = bundle.script
    sections = list(bundle.sections)
    prelim = bundle.prelim
    out: list[str] = ["fpcert-certificate 1",
                      f"script {script_hash(script.source)}",
                      f"precision {bundle.options.precision}",
                      f"unconstrained {1 if bundle.options.unconstrained else 0}"]

    needed_exprs: dict[int, Expr] = {}

    def note_exprs(atom):
        for e in atom.exprs:
            for sub in E.subexpressions(e):
                needed_exprs.setdefault(sub.id, sub)

    section_blocks: list[list[str]] = []
    local_maps: list[dict[int, int]] = []
    all_sections = ([prelim] if prelim is not None else []) + sections

    for sec in all_sections:
        store = sec.store
        if sec is prelim:
            roots = [bundle.base_fact]
        else:
            roots = [i for i in sec.goal_facts if i is not None]
        cone = proof_cone(store, roots)
        local = {gidx: li for li, gidx in enumerate(cone)}
        local_maps.append(local)
        header = f"section {'prelim' if sec is prelim else 'leaf'}"
        for var, clip in sec.clips:
            header += f" clip {var.id} {_dy(clip.lo)} {_dy(clip.hi)}"
            needed_exprs.setdefault(var.id, var)
        lines = [header]
        for gidx in cone:
            fact = store.log[gidx]
            note_exprs(fact.atom)
            prems = ",".join(str(local[p]) for p in fact.premises)
            side = json.dumps(list(fact.side)) if fact.side else "[]"
            lines.append(f"fact {local[gidx]} {fact.theorem} [{prems}] : "
                         f"{_atom_text(fact.atom)} ; {side}")
        if sec is prelim:
            lines.append(f"base-enclosure {local[bundle.base_fact]}")
        section_blocks.append(lines)

    if bundle.split_var is not None:
        needed_exprs.setdefault(bundle.split_var.id, bundle.split_var)

    # goal records reference (section index among leaves, local fact index)
    goal_lines = []
    leaf_offset = 1 if prelim is not None else 0
    for gi, goal in enumerate(script.goals):
        refs = []
        complete = True
        for si, sec in enumerate(sections):
            fidx = sec.goal_facts[gi]
            if fidx is None:
                complete = False
                break
            refs.append(f"{si}:{local_maps[si + leaf_offset][fidx]}")
        if not complete:
            continue
        goal_lines.append(f"goal {gi} {' '.join(refs)}")

    out.extend(_expr_lines(list(needed_exprs.values())))
    if bundle.split_var is not None:
        out.append(f"split {bundle.split_var.id}")
    for block in section_blocks:
        out.extend(block)
    out.extend(goal_lines)
    out.append("end")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# checking
# ---------------------------------------------------------------------------


@dataclass
class _CFact:
    index: int
    theorem: str
    premises: tuple[int, ...]
    kind: str
    exprs: tuple[Expr, ...]
    lo: Optional[Fraction]
    hi: Optional[Fraction]
    k: Optional[int]
    side: list


@dataclass
class _CSection:
    label: str
    clips: list[tuple[Expr, Fraction, Fraction]]
    facts: list[_CFact]
    base_enclosure: Optional[int] = None


class _Checker:
    """Replays one certificate against one script."""

    def __init__(self, script: Script):
        self.script = script
        self.ctx = script.ctx
        self.exprs: dict[int, Expr] = {}
        self.sections: list[_CSection] = []
        self.goals: dict[int, list[tuple[int, int]]] = {}
        self.split_var: Optional[Expr] = None
        self.precision = 80
        self.unconstrained = False
        self.axioms: list[str] = []

    # -- parsing ------------------------------------------------------------

    def parse(self, text: str) -> None:
        lines = text.splitlines()
        if not lines or lines[0].strip() != "fpcert-certificate 1":
            raise CertificateError("bad certificate header")
        if not lines[1].startswith("script "):
            raise CertificateError("missing script hash")
        if lines[1].split()[1] != script_hash(self.script.source):
            raise HashMismatch("certificate does not belong to this script")
        current: Optional[_CSection] = None
        ended = False
        for ln, raw in enumerate(lines[2:], start=3):
            line = raw.strip()
            if not line:
                continue
            if ended:
                raise CertificateError(f"line {ln}: content after end")
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "precision":
                    self.precision = int(parts[1])
                elif tag == "unconstrained":
                    self.unconstrained = parts[1] == "1"
                elif tag == "expr":
                    self._parse_expr(parts)
                elif tag == "split":
                    self.split_var = self.exprs[int(parts[1])]
                elif tag == "section":
                    current = self._parse_section(parts)
                    self.sections.append(current)
                elif tag == "fact":
                    if current is None:
                        raise CertificateError("fact outside a section")
                    current.facts.append(self._parse_fact(line))
                elif tag == "base-enclosure":
                    current.base_enclosure = int(parts[1])
                elif tag == "goal":
                    refs = [(int(a), int(b)) for a, b in
                            (r.split(":") for r in parts[2:])]
                    self.goals[int(parts[1])] = refs
                elif tag == "end":
                    ended = True
                else:
                    raise CertificateError(f"unknown line tag {tag!r}")
            except (IndexError, ValueError, KeyError) as exc:
                raise CertificateError(f"line {ln}: malformed ({exc})") from None
        if not ended:
            raise CertificateError("missing end marker")

    def _parse_expr(self, parts: list[str]) -> None:
        eid = int(parts[1])
        kind = parts[2]
        if kind == "var":
            node = self.ctx.var(parts[3])
        elif kind == "const":
            num, den = parts[3].split("/")
            node = self.ctx.const(Fraction(int(num), int(den)))
        elif kind == "round":
            fmt = make_format(parts[4], parts[5])
            node = self.ctx.round(parts[3], fmt, self.exprs[int(parts[6])])
        elif kind in (E.NEG, E.ABS):
            node = getattr(self.ctx, kind)(self.exprs[int(parts[3])])
        elif kind in (E.ADD, E.SUB, E.MUL, E.DIV):
            node = getattr(self.ctx, kind)(self.exprs[int(parts[3])],
                                           self.exprs[int(parts[4])])
        else:
            raise CertificateError(f"unknown expr kind {kind!r}")
        self.exprs[eid] = node

    def _parse_section(self, parts: list[str]) -> _CSection:
        clips = []
        i = 2
        while i < len(parts):
            if parts[i] != "clip":
                raise CertificateError("malformed section header")
            var = self.exprs[int(parts[i + 1])]
            lo = _parse_dy(parts[i + 2]).to_fraction()
            hi = _parse_dy(parts[i + 3]).to_fraction()
            clips.append((var, lo, hi))
            i += 4
        return _CSection(parts[1], clips, [])

    def _parse_fact(self, line: str) -> _CFact:
        head, _, rest = line.partition(" : ")
        atom_text, _, side_text = rest.partition(" ; ")
        hp = head.split()
        index = int(hp[1])
        theorem = hp[2]
        prem_text = hp[3].strip("[]")
        premises = tuple(int(x) for x in prem_text.split(",")) if prem_text else ()
        ap = atom_text.split()
        kind = ap[0]
        lo = hi = None
        k = None
        if kind == "bnd":
            exprs = (self.exprs[int(ap[1])],)
            lo, hi = _parse_dy(ap[2]).to_fraction(), _parse_dy(ap[3]).to_fraction()
        elif kind in ("fix", "flt"):
            exprs = (self.exprs[int(ap[1])],)
            k = int(ap[2])
        elif kind == "rel":
            exprs = (self.exprs[int(ap[1])], self.exprs[int(ap[2])])
            lo, hi = _parse_dy(ap[3]).to_fraction(), _parse_dy(ap[4]).to_fraction()
        elif kind == "nzr":
            exprs = (self.exprs[int(ap[1])],)
        elif kind == "eql":
            exprs = (self.exprs[int(ap[1])], self.exprs[int(ap[2])])
        elif kind == "absurd":
            exprs = ()
        else:
            raise CertificateError(f"unknown atom kind {kind!r}")
        if lo is not None and lo > hi:
            raise CertificateError(f"fact {index}: inverted interval")
        side = json.loads(side_text) if side_text else []
        return _CFact(index, theorem, premises, kind, exprs, lo, hi, k, side)

    # -- replay ---------------------------------------------------------------

    def run(self) -> CheckResult:
        for si, section in enumerate(self.sections):
            for pos, fact in enumerate(section.facts):
                if fact.index != pos:
                    return CheckResult(
                        "fail", f"section {si}: fact indices out of order")
                try:
                    self._check_fact(section, fact)
                except _Fail as exc:
                    return CheckResult(
                        "fail", f"section {si} fact {fact.index}: {exc}")
                except (IndexError, KeyError, AttributeError) as exc:
                    return CheckResult(
                        "fail", f"section {si} fact {fact.index}: malformed "
                        f"reference ({exc!r})")
        try:
            self._check_split()
            self._check_goals()
        except _Fail as exc:
            return CheckResult("fail", str(exc))
        if self.axioms:
            return CheckResult("pass-with-axioms", axioms=sorted(set(self.axioms)))
        return CheckResult("pass")

    def _check_fact(self, section: _CSection, fact: _CFact) -> None:
        for p in fact.premises:
            if p >= fact.index:
                raise _Fail(f"premise {p} does not precede the fact")
        validator = _VALIDATORS.get(fact.theorem)
        if validator is None:
            raise _Fail(f"unknown theorem {fact.theorem!r}")
        validator(self, section, fact)

    def _prem(self, section: _CSection, fact: _CFact, i: int) -> _CFact:
        return section.facts[fact.premises[i]]

    def _check_split(self) -> None:
        leaves = [s for s in self.sections if s.label == "leaf"]
        prelims = [s for s in self.sections if s.label == "prelim"]
        if self.split_var is None:
            for s in leaves:
                if s.clips:
                    raise _Fail("clips present without a split declaration")
            if len(leaves) != 1 and self.goals:
                raise _Fail("multiple sections without a split declaration")
            return
        if len(prelims) != 1 or prelims[0].base_enclosure is None:
            raise _Fail("split declared but base enclosure section missing")
        base = prelims[0].facts[prelims[0].base_enclosure]
        if base.kind != "bnd" or base.exprs[0] is not self.split_var:
            raise _Fail("base enclosure does not bound the split variable")
        segments = []
        for s in leaves:
            match = [c for c in s.clips if c[0] is self.split_var]
            if len(match) != 1 or len(s.clips) != 1:
                raise _Fail("every leaf must clip exactly the split variable")
            segments.append((match[0][1], match[0][2]))
        segments.sort()
        if segments[0][0] > base.lo or segments[-1][1] < base.hi:
            raise _Fail("split segments do not cover the base enclosure")
        reach = segments[0][1]
        for lo, hi in segments[1:]:
            if lo > reach:
                raise _Fail("gap in split segment coverage")
            reach = max(reach, hi)
        if reach < base.hi:
            raise _Fail("split segments do not reach the base upper bound")

    def _check_goals(self) -> None:
        leaves = [s for s in self.sections if s.label == "leaf"]
        for gi, refs in sorted(self.goals.items()):
            if gi >= len(self.script.goals):
                raise _Fail(f"goal {gi} not in script")
            goal = self.script.goals[gi]
            if len(refs) != len(leaves):
                raise _Fail(f"goal {gi}: expected {len(leaves)} leaf references")
            for si, fi in refs:
                if si >= len(leaves):
                    raise _Fail(f"goal {gi}: bad section reference")
                fact = leaves[si].facts[fi]
                if fact.kind == "absurd":
                    continue  # contradictory case proves anything
                if fact.kind != "bnd" or fact.exprs[0] is not goal.atom.expr:
                    raise _Fail(f"goal {gi}: fact does not bound the goal expression")
                if goal.range_known:
                    if fact.lo < goal.atom.lo or fact.hi > goal.atom.hi:
                        raise _Fail(f"goal {gi}: enclosure exceeds the stated range")


class _Fail(Exception):
    pass


# ---------------------------------------------------------------------------
# validators (exact arithmetic only)
# ---------------------------------------------------------------------------

_VALIDATORS: dict[str, Callable] = {}


def _validator(*names):
    def register(fn):
        for n in names:
            _VALIDATORS[n] = fn
        return fn
    return register


def _iv(f: _CFact) -> tuple[Fraction, Fraction]:
    if f.lo is None:
        raise _Fail(f"premise {f.index} has no interval")
    return f.lo, f.hi


def _require(cond: bool, reason: str) -> None:
    if not cond:
        raise _Fail(reason)


def _contains(fact: _CFact, lo: Fraction, hi: Fraction) -> None:
    _require(fact.lo <= lo and hi <= fact.hi,
             f"claimed interval [{fact.lo}, {fact.hi}] does not contain "
             f"required [{lo}, {hi}]")


def _expect_bnd(p: _CFact, e: Expr) -> tuple[Fraction, Fraction]:
    _require(p.kind == "bnd" and p.exprs[0] is e, "premise shape mismatch")
    return p.lo, p.hi


def _expect_nzr(p: _CFact, e: Expr) -> None:
    _require(p.kind == "nzr" and p.exprs[0] is e, "missing nonzero premise")


def _find_bnd(ck, sec, fact, e: Expr) -> Optional[tuple[Fraction, Fraction]]:
    for pi in fact.premises:
        p = sec.facts[pi]
        if p.kind == "bnd" and p.exprs[0] is e:
            return p.lo, p.hi
    return None


def _has_nzr(sec, fact, e: Expr) -> bool:
    return any(sec.facts[pi].kind == "nzr" and sec.facts[pi].exprs[0] is e
               for pi in fact.premises)


def _mul_hull(a, b) -> tuple[Fraction, Fraction]:
    prods = [x * y for x in a for y in b]
    return min(prods), max(prods)


def _div_hull(a, b) -> tuple[Fraction, Fraction]:
    _require(not (b[0] <= 0 <= b[1]), "division by an interval containing zero")
    quots = [x / y for x in a for y in b]
    return min(quots), max(quots)


def _compose_hull(a, b) -> tuple[Fraction, Fraction]:
    # (1+x)(1+y)-1 over two relative-error intervals (both above -1)
    vals = [(1 + x) * (1 + y) - 1 for x in a for y in b]
    return min(vals), max(vals)


def _maybe_inter(ck, sec, fact, lo, hi) -> tuple[Fraction, Fraction]:
    """Apply the recorded intersection with the previous best fact."""
    if fact.side and fact.side[-1] == "inter":
        prev = sec.facts[fact.premises[-1]]
        _require(prev.kind == fact.kind and prev.exprs == fact.exprs,
                 "intersection premise mismatch")
        lo, hi = max(lo, prev.lo), min(hi, prev.hi)
        _require(lo <= hi, "intersection is empty but no contradiction recorded")
    return lo, hi


def _check_enclosure(ck, sec, fact, lo, hi) -> None:
    lo, hi = _maybe_inter(ck, sec, fact, lo, hi)
    _contains(fact, lo, hi)


# -- seeds --------------------------------------------------------------------


@_validator("hyp_bnd")
def _v_hyp_bnd(ck, sec, fact):
    hyp = ck.script.hypotheses[fact.side[0]]
    _require(fact.exprs[0] is hyp.expr, "hypothesis expression mismatch")
    _check_enclosure(ck, sec, fact, hyp.lo, hyp.hi)


@_validator("hyp_rel")
def _v_hyp_rel(ck, sec, fact):
    hyp = ck.script.hypotheses[fact.side[0]]
    shape = hyp.is_rel_shape()
    _require(shape is not None, "hypothesis is not relative-error shaped")
    _require(fact.exprs == shape, "hypothesis expression mismatch")
    lo, hi = hyp.lo, hyp.hi
    if hyp.expr.kind == E.ABS:
        lo = -hi
    _require(fact.lo > -1, "relative error must stay above -1")
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("split_case")
def _v_split_case(ck, sec, fact):
    for var, lo, hi in sec.clips:
        if var is fact.exprs[0] and fact.lo <= lo and hi <= fact.hi:
            return
    raise _Fail("split case does not match a declared clip")


@_validator("axiom_nzr")
def _v_axiom(ck, sec, fact):
    _require(ck.unconstrained, "assumption in a strict-mode certificate")
    from .expr import format_expr
    ck.axioms.append(format_expr(fact.exprs[0], ck.script.names()) + " <> 0")


@_validator("const_bnd")
def _v_const_bnd(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.CONST, "not a constant")
    _check_enclosure(ck, sec, fact, e.payload, e.payload)


@_validator("const_fix")
def _v_const_fix(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.CONST, "not a constant")
    q: Fraction = e.payload
    if q == 0:
        return
    den = q.denominator
    _require(den & (den - 1) == 0, "constant is not dyadic")
    d = Dyadic(q.numerator, -(den.bit_length() - 1))
    _require(fact.k <= d.e, "FIX exponent too large")


@_validator("const_flt")
def _v_const_flt(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.CONST, "not a constant")
    q: Fraction = e.payload
    if q == 0:
        _require(fact.k >= 1, "FLT width must be positive")
        return
    den = q.denominator
    _require(den & (den - 1) == 0, "constant is not dyadic")
    _require(fact.k >= abs(q.numerator).bit_length(), "FLT width too small")


# -- structural interval rules -------------------------------------------------


@_validator("bnd_neg")
def _v_bnd_neg(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.NEG, "not a negation")
    a = _expect_bnd(ck._prem(sec, fact, 0), e.children[0])
    _check_enclosure(ck, sec, fact, -a[1], -a[0])


@_validator("bnd_neg_inv")
def _v_bnd_neg_inv(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "bnd" and p.exprs[0].kind == E.NEG
             and p.exprs[0].children[0] is fact.exprs[0], "premise shape mismatch")
    _check_enclosure(ck, sec, fact, -p.hi, -p.lo)


@_validator("bnd_abs")
def _v_bnd_abs(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.ABS, "not an absolute value")
    lo, hi = _expect_bnd(ck._prem(sec, fact, 0), e.children[0])
    alo = lo if lo > 0 else (-hi if hi < 0 else Fraction(0))
    ahi = max(abs(lo), abs(hi))
    _check_enclosure(ck, sec, fact, alo, ahi)


@_validator("bnd_abs_inv")
def _v_bnd_abs_inv(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "bnd" and p.exprs[0].kind == E.ABS
             and p.exprs[0].children[0] is fact.exprs[0], "premise shape mismatch")
    _check_enclosure(ck, sec, fact, -p.hi, p.hi)


@_validator("abs_refine_pos")
def _v_abs_refine_pos(ck, sec, fact):
    e = fact.exprs[0]
    a = ck._prem(sec, fact, 0)
    m = ck._prem(sec, fact, 1)
    _expect_bnd(a, e)
    _require(m.kind == "bnd" and m.exprs[0].kind == E.ABS
             and m.exprs[0].children[0] is e, "premise shape mismatch")
    _require(a.lo >= 0, "sign premise not established")
    _check_enclosure(ck, sec, fact, m.lo, m.hi)


@_validator("abs_refine_neg")
def _v_abs_refine_neg(ck, sec, fact):
    e = fact.exprs[0]
    a = ck._prem(sec, fact, 0)
    m = ck._prem(sec, fact, 1)
    _expect_bnd(a, e)
    _require(m.kind == "bnd" and m.exprs[0].kind == E.ABS
             and m.exprs[0].children[0] is e, "premise shape mismatch")
    _require(a.hi <= 0, "sign premise not established")
    _check_enclosure(ck, sec, fact, -m.hi, -m.lo)


@_validator("bnd_add", "bnd_sub")
def _v_bnd_addsub(ck, sec, fact):
    e = fact.exprs[0]
    want = E.ADD if fact.theorem == "bnd_add" else E.SUB
    _require(e.kind == want, "operator mismatch")
    a = _expect_bnd(ck._prem(sec, fact, 0), e.children[0])
    b = _expect_bnd(ck._prem(sec, fact, 1), e.children[1])
    if want == E.ADD:
        _check_enclosure(ck, sec, fact, a[0] + b[0], a[1] + b[1])
    else:
        _check_enclosure(ck, sec, fact, a[0] - b[1], a[1] - b[0])


@_validator("bnd_mul")
def _v_bnd_mul(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.MUL, "not a product")
    a = _expect_bnd(ck._prem(sec, fact, 0), e.children[0])
    b = _expect_bnd(ck._prem(sec, fact, 1), e.children[1])
    lo, hi = _mul_hull(a, b)
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_square")
def _v_bnd_square(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.MUL and e.children[0] is e.children[1], "not a square")
    lo, hi = _expect_bnd(ck._prem(sec, fact, 0), e.children[0])
    alo = lo if lo > 0 else (-hi if hi < 0 else Fraction(0))
    ahi = max(abs(lo), abs(hi))
    _check_enclosure(ck, sec, fact, alo * alo, ahi * ahi)


@_validator("bnd_div")
def _v_bnd_div(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.DIV, "not a quotient")
    a = _expect_bnd(ck._prem(sec, fact, 0), e.children[0])
    b = _expect_bnd(ck._prem(sec, fact, 1), e.children[1])
    lo, hi = _div_hull(a, b)
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_add_inv_l", "bnd_add_inv_r", "bnd_sub_inv_l", "bnd_sub_inv_r")
def _v_bnd_inv(ck, sec, fact):
    e = fact.exprs[0]
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    parent = p.exprs[0]
    _require(p.kind == "bnd" and q.kind == "bnd", "premise shape mismatch")
    th = fact.theorem
    if th == "bnd_add_inv_l":
        _require(parent.kind == E.ADD and parent.children[0] is e
                 and q.exprs[0] is parent.children[1], "shape mismatch")
        lo, hi = p.lo - q.hi, p.hi - q.lo
    elif th == "bnd_add_inv_r":
        _require(parent.kind == E.ADD and parent.children[1] is e
                 and q.exprs[0] is parent.children[0], "shape mismatch")
        lo, hi = p.lo - q.hi, p.hi - q.lo
    elif th == "bnd_sub_inv_l":
        # a = (a-b) + b
        _require(parent.kind == E.SUB and parent.children[0] is e
                 and q.exprs[0] is parent.children[1], "shape mismatch")
        lo, hi = p.lo + q.lo, p.hi + q.hi
    else:
        # b = a - (a-b); premises (bnd(a-b), bnd(a))
        _require(parent.kind == E.SUB and parent.children[1] is e
                 and q.exprs[0] is parent.children[0], "shape mismatch")
        lo, hi = q.lo - p.hi, q.hi - p.lo
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_mul_inv_l", "bnd_mul_inv_r")
def _v_bnd_mul_inv(ck, sec, fact):
    e = fact.exprs[0]
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    parent = p.exprs[0]
    pos = 0 if fact.theorem.endswith("_l") else 1
    _require(p.kind == "bnd" and parent.kind == E.MUL
             and parent.children[pos] is e
             and q.kind == "bnd" and q.exprs[0] is parent.children[1 - pos],
             "shape mismatch")
    lo, hi = _div_hull((p.lo, p.hi), (q.lo, q.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_div_inv_num")
def _v_bnd_div_inv_num(ck, sec, fact):
    e = fact.exprs[0]
    p = ck._prem(sec, fact, 0)
    b = ck._prem(sec, fact, 1)
    parent = p.exprs[0]
    _require(p.kind == "bnd" and parent.kind == E.DIV
             and parent.children[0] is e and b.kind == "bnd"
             and b.exprs[0] is parent.children[1], "shape mismatch")
    _expect_nzr(ck._prem(sec, fact, 2), parent.children[1])
    lo, hi = _mul_hull((p.lo, p.hi), (b.lo, b.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_div_inv_den")
def _v_bnd_div_inv_den(ck, sec, fact):
    e = fact.exprs[0]
    a = ck._prem(sec, fact, 0)
    p = ck._prem(sec, fact, 1)
    parent = p.exprs[0]
    _require(p.kind == "bnd" and parent.kind == E.DIV
             and parent.children[1] is e and a.kind == "bnd"
             and a.exprs[0] is parent.children[0], "shape mismatch")
    lo, hi = _div_hull((a.lo, a.hi), (p.lo, p.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_sub_zero")
def _v_bnd_sub_zero(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.SUB and e.children[0] is e.children[1], "not x - x")
    _check_enclosure(ck, sec, fact, Fraction(0), Fraction(0))


@_validator("bnd_round")
def _v_bnd_round(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.ROUND, "not a rounding application")
    f = e.round_format
    a = ck._prem(sec, fact, 0)
    _expect_bnd(a, e.children[0])
    from .formats import round_value
    lo_d = round_value(f, _fraction_to_dyadic_exact(a.lo))
    hi_d = round_value(f, _fraction_to_dyadic_exact(a.hi))
    _assert_correctly_rounded(f, a.lo, lo_d)
    _assert_correctly_rounded(f, a.hi, hi_d)
    _check_enclosure(ck, sec, fact, lo_d.to_fraction(), hi_d.to_fraction())


def _fraction_to_dyadic_exact(q: Fraction) -> Dyadic:
    den = q.denominator
    _require(den & (den - 1) == 0, "endpoint is not dyadic")
    return Dyadic(q.numerator, -(den.bit_length() - 1))


def _representable(f: FpFormat, y: Dyadic) -> bool:
    return y.m == 0 or (y.bit_length() <= f.p and y.e >= f.e_min)


def _ulp_at(f: FpFormat, y: Dyadic) -> Fraction:
    if y.m == 0:
        return Fraction(2) ** f.e_min
    return Fraction(2) ** max(f.e_min, y.mag() - f.p)


def _assert_correctly_rounded(f: FpFormat, x: Fraction, y: Dyadic) -> None:
    """Independent characterization check: y is round_f(x)."""
    _require(_representable(f, y), "rounded value not representable")
    yq = y.to_fraction()
    if x == yq:
        return
    if f.mode == "dn" or (f.mode == "zr" and x > 0):
        _require(yq < x, "directed rounding on the wrong side")
        succ = yq + _succ_gap(f, y)
        _require(x < succ, "directed rounding skipped a representable value")
        return
    if f.mode == "up" or (f.mode == "zr" and x < 0):
        _require(yq > x, "directed rounding on the wrong side")
        pred = yq - _pred_gap(f, y)
        _require(x > pred, "directed rounding skipped a representable value")
        return
    # nearest, ties to even
    if x > yq:
        gap = _succ_gap(f, y)
        _require(x - yq <= gap / 2, "not the nearest representable value")
        if x - yq == gap / 2:
            _require(_mantissa_even(f, y), "tie not broken toward even")
    else:
        gap = _pred_gap(f, y)
        _require(yq - x <= gap / 2, "not the nearest representable value")
        if yq - x == gap / 2:
            _require(_mantissa_even(f, y), "tie not broken toward even")


def _succ_gap(f: FpFormat, y: Dyadic) -> Fraction:
    """Distance from y to the next representable value above."""
    if y.m == 0:
        return Fraction(2) ** f.e_min
    if y.m > 0:
        return Fraction(2) ** max(f.e_min, y.mag() - f.p)
    # negative: moving up shrinks the magnitude
    if y.is_power_of_two() and y.e > f.e_min:
        return Fraction(2) ** max(f.e_min, y.mag() - f.p - 1)
    return Fraction(2) ** max(f.e_min, y.mag() - f.p)


def _pred_gap(f: FpFormat, y: Dyadic) -> Fraction:
    return _succ_gap(f, -y)


def _mantissa_even(f: FpFormat, y: Dyadic) -> bool:
    if y.m == 0:
        return True
    # scale the canonical mantissa to the format's ulp grid at y's magnitude
    ulp_exp = max(f.e_min, y.mag() - f.p)
    shift = y.e - ulp_exp
    _require(shift >= 0, "value not on the format grid")
    return shift > 0  # odd canonical mantissa is even on the grid iff shifted


@_validator("abs_err_round")
def _v_abs_err_round(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.SUB and e.children[0].kind == E.ROUND
             and e.children[0].children[0] is e.children[1],
             "not a rounding error term")
    f = e.children[0].round_format
    a = ck._prem(sec, fact, 0)
    _expect_bnd(a, e.children[1])
    from .formats import abs_error_bound
    bound = abs_error_bound(f, Interval(_fraction_to_dyadic_exact(a.lo),
                                        _fraction_to_dyadic_exact(a.hi)))
    _check_enclosure(ck, sec, fact, bound.lo.to_fraction(), bound.hi.to_fraction())


# -- FIX / FLT -----------------------------------------------------------------


@_validator("fix_neg", "fix_abs")
def _v_fix_mirror(ck, sec, fact):
    e = fact.exprs[0]
    want = E.NEG if fact.theorem == "fix_neg" else E.ABS
    p = ck._prem(sec, fact, 0)
    _require(e.kind == want and p.kind == "fix" and p.exprs[0] is e.children[0],
             "shape mismatch")
    _require(fact.k <= p.k, "FIX exponent too large")


@_validator("flt_neg", "flt_abs")
def _v_flt_mirror(ck, sec, fact):
    e = fact.exprs[0]
    want = E.NEG if fact.theorem == "flt_neg" else E.ABS
    p = ck._prem(sec, fact, 0)
    _require(e.kind == want and p.kind == "flt" and p.exprs[0] is e.children[0],
             "shape mismatch")
    _require(fact.k >= p.k, "FLT width too small")


@_validator("fix_add", "fix_sub")
def _v_fix_addsub(ck, sec, fact):
    e = fact.exprs[0]
    want = E.ADD if fact.theorem == "fix_add" else E.SUB
    _require(e.kind == want, "operator mismatch")
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "fix" and p.exprs[0] is e.children[0]
             and q.kind == "fix" and q.exprs[0] is e.children[1], "shape mismatch")
    _require(fact.k <= min(p.k, q.k), "FIX exponent too large")


@_validator("fix_mul")
def _v_fix_mul(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.MUL, "not a product")
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "fix" and p.exprs[0] is e.children[0]
             and q.kind == "fix" and q.exprs[0] is e.children[1], "shape mismatch")
    _require(fact.k <= p.k + q.k, "FIX exponent too large")


@_validator("flt_mul")
def _v_flt_mul(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.MUL, "not a product")
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "flt" and p.exprs[0] is e.children[0]
             and q.kind == "flt" and q.exprs[0] is e.children[1], "shape mismatch")
    _require(fact.k >= p.k + q.k, "FLT width too small")


@_validator("flt_of_fix")
def _v_flt_of_fix(ck, sec, fact):
    e = fact.exprs[0]
    p = ck._prem(sec, fact, 0)
    b = ck._prem(sec, fact, 1)
    _require(p.kind == "fix" and p.exprs[0] is e, "shape mismatch")
    _require(b.kind == "bnd" and (b.exprs[0] is e or
             (b.exprs[0].kind == E.ABS and b.exprs[0].children[0] is e)),
             "magnitude premise mismatch")
    hi = max(abs(b.lo), abs(b.hi))
    if hi == 0:
        _require(fact.k >= 1, "FLT width must be positive")
        return
    # smallest j with hi < 2**j
    j = _ceil_log2(hi)
    _require(fact.k >= max(1, j - p.k), "FLT width too small")


@_validator("fix_of_flt")
def _v_fix_of_flt(ck, sec, fact):
    e = fact.exprs[0]
    p = ck._prem(sec, fact, 0)
    b = ck._prem(sec, fact, 1)
    _require(p.kind == "flt" and p.exprs[0] is e, "shape mismatch")
    _require(b.kind == "bnd" and (b.exprs[0] is e or
             (b.exprs[0].kind == E.ABS and b.exprs[0].children[0] is e)),
             "magnitude premise mismatch")
    if b.exprs[0] is e:
        lo = b.lo if b.lo > 0 else (-b.hi if b.hi < 0 else Fraction(0))
    else:
        lo = b.lo
    _require(lo > 0, "no positive magnitude lower bound")
    j = _floor_log2(lo)
    _require(fact.k <= j - p.k + 1, "FIX exponent too large")


def _floor_log2(q: Fraction) -> int:
    # largest j with 2**j <= q (q > 0)
    j = q.numerator.bit_length() - q.denominator.bit_length()
    if Fraction(2) ** j > q:
        j -= 1
    if Fraction(2) ** (j + 1) <= q:
        j += 1
    return j


def _ceil_log2(q: Fraction) -> int:
    j = _floor_log2(q)
    return j + 1 if Fraction(2) ** j < q else j


@_validator("fix_round")
def _v_fix_round(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.ROUND, "not a rounding application")
    _require(fact.k <= e.round_format.e_min, "FIX exponent too large")


@_validator("flt_round")
def _v_flt_round(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.ROUND, "not a rounding application")
    _require(fact.k >= e.round_format.p, "FLT width too small")


# -- EQL ------------------------------------------------------------------------


@_validator("eql_exact_round")
def _v_eql_exact_round(ck, sec, fact):
    r, x = fact.exprs
    _require(r.kind == E.ROUND and r.children[0] is x, "shape mismatch")
    f = r.round_format
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "flt" and p.exprs[0] is x and p.k <= f.p,
             "FLT premise does not fit the format")
    _require(q.kind == "fix" and q.exprs[0] is x and q.k >= f.e_min,
             "FIX premise does not fit the format")


@_validator("eql_sub_common_l", "eql_sub_common_r")
def _v_eql_sub_common(ck, sec, fact):
    n, m = fact.exprs
    _require(n.kind == E.SUB and m.kind == E.SUB, "shape mismatch")
    a, b = n.children
    _require(a.kind == E.ADD and b.kind == E.ADD, "shape mismatch")
    if fact.theorem == "eql_sub_common_l":
        _require(a.children[0] is b.children[0]
                 and m.children[0] is a.children[1]
                 and m.children[1] is b.children[1], "cancellation mismatch")
    else:
        _require(a.children[1] is b.children[1]
                 and m.children[0] is a.children[0]
                 and m.children[1] is b.children[0], "cancellation mismatch")


@_validator("bnd_of_eql")
def _v_bnd_of_eql(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    eq = ck._prem(sec, fact, 1)
    _require(p.kind == "bnd" and eq.kind == "eql", "premise shape mismatch")
    pair = {eq.exprs[0].id, eq.exprs[1].id}
    _require({p.exprs[0].id, fact.exprs[0].id} == pair, "equality does not connect")
    _check_enclosure(ck, sec, fact, p.lo, p.hi)


@_validator("fix_of_eql")
def _v_fix_of_eql(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    eq = ck._prem(sec, fact, 1)
    _require(p.kind == "fix" and eq.kind == "eql", "premise shape mismatch")
    pair = {eq.exprs[0].id, eq.exprs[1].id}
    _require({p.exprs[0].id, fact.exprs[0].id} == pair, "equality does not connect")
    _require(fact.k <= p.k, "FIX exponent too large")


@_validator("flt_of_eql")
def _v_flt_of_eql(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    eq = ck._prem(sec, fact, 1)
    _require(p.kind == "flt" and eq.kind == "eql", "premise shape mismatch")
    pair = {eq.exprs[0].id, eq.exprs[1].id}
    _require({p.exprs[0].id, fact.exprs[0].id} == pair, "equality does not connect")
    _require(fact.k >= p.k, "FLT width too small")


@_validator("nzr_of_eql")
def _v_nzr_of_eql(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    eq = ck._prem(sec, fact, 1)
    _require(p.kind == "nzr" and eq.kind == "eql", "premise shape mismatch")
    pair = {eq.exprs[0].id, eq.exprs[1].id}
    _require({p.exprs[0].id, fact.exprs[0].id} == pair, "equality does not connect")


@_validator("bnd_sub_eql")
def _v_bnd_sub_eql(ck, sec, fact):
    e = fact.exprs[0]
    eq = ck._prem(sec, fact, 0)
    _require(e.kind == E.SUB and eq.kind == "eql", "shape mismatch")
    pair = {eq.exprs[0].id, eq.exprs[1].id}
    _require({e.children[0].id, e.children[1].id} == pair, "equality mismatch")
    _check_enclosure(ck, sec, fact, Fraction(0), Fraction(0))


# -- NZR -------------------------------------------------------------------------


@_validator("nzr_of_bnd")
def _v_nzr_of_bnd(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    _expect_bnd(p, fact.exprs[0])
    _require(p.lo > 0 or p.hi < 0, "interval contains zero")


@_validator("nzr_neg", "nzr_abs")
def _v_nzr_fwd(ck, sec, fact):
    e = fact.exprs[0]
    want = E.NEG if fact.theorem == "nzr_neg" else E.ABS
    _require(e.kind == want, "shape mismatch")
    _expect_nzr(ck._prem(sec, fact, 0), e.children[0])


@_validator("nzr_neg_inv", "nzr_abs_inv")
def _v_nzr_inv(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    want = E.NEG if fact.theorem == "nzr_neg_inv" else E.ABS
    _require(p.kind == "nzr" and p.exprs[0].kind == want
             and p.exprs[0].children[0] is fact.exprs[0], "shape mismatch")


@_validator("nzr_mul")
def _v_nzr_mul(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.MUL, "not a product")
    _expect_nzr(ck._prem(sec, fact, 0), e.children[0])
    _expect_nzr(ck._prem(sec, fact, 1), e.children[1])


@_validator("nzr_mul_inv")
def _v_nzr_mul_inv(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "nzr" and p.exprs[0].kind == E.MUL, "shape mismatch")
    _require(fact.exprs[0] in p.exprs[0].children, "not a factor")


@_validator("nzr_div")
def _v_nzr_div(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.DIV, "not a quotient")
    _expect_nzr(ck._prem(sec, fact, 0), e.children[0])
    _expect_nzr(ck._prem(sec, fact, 1), e.children[1])


@_validator("nzr_of_quotient")
def _v_nzr_of_quotient(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "bnd" and p.exprs[0].kind == E.DIV, "shape mismatch")
    _require(p.lo > 0 or p.hi < 0, "quotient interval contains zero")
    _require(fact.exprs[0] in p.exprs[0].children, "not part of the quotient")


@_validator("nzr_div_through")
def _v_nzr_div_through(ck, sec, fact):
    v = fact.exprs[0]
    _require(v.kind in (E.ADD, E.SUB), "not a sum")
    ppos = fact.side[1]
    pivot = v.children[ppos]
    other = v.children[1 - ppos]
    _expect_nzr(ck._prem(sec, fact, 0), pivot)
    j = ck._prem(sec, fact, 1)
    _require(j.kind == "bnd" and j.exprs[0].kind == E.DIV
             and j.exprs[0].children[0] is other
             and j.exprs[0].children[1] is pivot, "quotient premise mismatch")
    if v.kind == E.ADD:
        lo, hi = 1 + j.lo, 1 + j.hi
    else:
        _require(ppos == 0, "subtraction pivot must be the left operand")
        lo, hi = 1 - j.hi, 1 - j.lo
    _require(lo > 0 or hi < 0, "1 + quotient may be zero")


# -- REL -------------------------------------------------------------------------


@_validator("rel_refl")
def _v_rel_refl(ck, sec, fact):
    _require(fact.exprs[0] is fact.exprs[1], "not reflexive")
    _check_enclosure(ck, sec, fact, Fraction(0), Fraction(0))


@_validator("rel_of_eql")
def _v_rel_of_eql(ck, sec, fact):
    eq = ck._prem(sec, fact, 0)
    _require(eq.kind == "eql" and
             {eq.exprs[0].id, eq.exprs[1].id} ==
             {fact.exprs[0].id, fact.exprs[1].id}, "equality mismatch")
    _check_enclosure(ck, sec, fact, Fraction(0), Fraction(0))


@_validator("rel_neg")
def _v_rel_neg(ck, sec, fact):
    u, v = fact.exprs
    p = ck._prem(sec, fact, 0)
    _require(u.kind == E.NEG and v.kind == E.NEG and p.kind == "rel"
             and p.exprs[0] is u.children[0] and p.exprs[1] is v.children[0],
             "shape mismatch")
    _check_enclosure(ck, sec, fact, p.lo, p.hi)


@_validator("rel_inv")
def _v_rel_inv(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel" and p.exprs[0] is fact.exprs[1]
             and p.exprs[1] is fact.exprs[0], "shape mismatch")
    _require(p.lo > -1, "premise breaks the REL invariant")
    lo = -p.hi / (1 + p.hi)
    hi = -p.lo / (1 + p.lo)
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("rel_compose")
def _v_rel_compose(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "rel" and q.kind == "rel"
             and p.exprs[0] is fact.exprs[0] and p.exprs[1] is q.exprs[0]
             and q.exprs[1] is fact.exprs[1], "composition chain mismatch")
    lo, hi = _compose_hull((p.lo, p.hi), (q.lo, q.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("rel_mul")
def _v_rel_mul(ck, sec, fact):
    u, v = fact.exprs
    _require(u.kind == E.MUL and v.kind == E.MUL, "not products")
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "rel" and q.kind == "rel"
             and p.exprs[0] is u.children[0] and p.exprs[1] is v.children[0]
             and q.exprs[0] is u.children[1] and q.exprs[1] is v.children[1],
             "factor pairing mismatch")
    lo, hi = _compose_hull((p.lo, p.hi), (q.lo, q.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("rel_div")
def _v_rel_div(ck, sec, fact):
    u, v = fact.exprs
    _require(u.kind == E.DIV and v.kind == E.DIV, "not quotients")
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "rel" and q.kind == "rel"
             and p.exprs[0] is u.children[0] and p.exprs[1] is v.children[0]
             and q.exprs[0] is u.children[1] and q.exprs[1] is v.children[1],
             "factor pairing mismatch")
    _has_nzr(sec, fact, u.children[1])
    _require(_has_nzr(sec, fact, u.children[1]) and
             _has_nzr(sec, fact, v.children[1]), "missing nonzero premises")
    vals = [(1 + a) / (1 + b) - 1 for a in (p.lo, p.hi) for b in (q.lo, q.hi)]
    _check_enclosure(ck, sec, fact, min(vals), max(vals))


@_validator("rel_add_common")
def _v_rel_add_common(ck, sec, fact):
    u, v = fact.exprs
    _require(u.kind == v.kind and u.kind in (E.ADD, E.SUB), "shape mismatch")
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel", "first premise must be a REL fact")
    x, y = p.exprs
    negate = False
    if u.kind == E.ADD:
        if u.children[0] is x and v.children[0] is y \
                and u.children[1] is v.children[1]:
            pass
        elif u.children[1] is x and v.children[1] is y \
                and u.children[0] is v.children[0]:
            pass
        else:
            raise _Fail("no common addend")
    else:
        if u.children[0] is x and v.children[0] is y \
                and u.children[1] is v.children[1]:
            pass
        elif u.children[1] is x and v.children[1] is y \
                and u.children[0] is v.children[0]:
            negate = True
        else:
            raise _Fail("no common operand")
    # weight premise: a bound on y / v
    j = None
    for pi in fact.premises[1:]:
        cand = sec.facts[pi]
        if cand.kind == "bnd" and cand.exprs[0].kind == E.DIV \
                and cand.exprs[0].children[0] is y and cand.exprs[0].children[1] is v:
            j = (cand.lo, cand.hi)
            break
    _require(j is not None, "missing weight premise")
    _require((not (j[0] <= 0 <= j[1])) or _has_nzr(sec, fact, v),
             "denominator may be zero")
    i = (-p.hi, -p.lo) if negate else (p.lo, p.hi)
    lo, hi = _mul_hull(i, j)
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("rel_round_add")
def _v_rel_round_add(ck, sec, fact):
    u, x = fact.exprs
    _require(u.kind == E.ROUND and u.children[0] is x, "shape mismatch")
    _require(x.kind in (E.ADD, E.SUB), "operand is not an addition")
    f = u.round_format
    prems = [ck._prem(sec, fact, i) for i in range(len(fact.premises))]
    for c in x.children:
        ok_flt = any(p.kind == "flt" and p.exprs[0] is c and p.k <= f.p
                     for p in prems)
        ok_fix = any(p.kind == "fix" and p.exprs[0] is c and p.k >= f.e_min
                     for p in prems)
        _require(ok_flt and ok_fix, "operand not representable in the format")
    _check_rel_round_bound(ck, sec, fact, f)


def _check_rel_round_bound(ck, sec, fact, f: FpFormat) -> None:
    k = -f.p if f.mode == "ne" else 1 - f.p
    b = Fraction(2) ** k
    _check_enclosure(ck, sec, fact, -b, b)


@_validator("rel_round_normal")
def _v_rel_round_normal(ck, sec, fact):
    u, x = fact.exprs
    _require(u.kind == E.ROUND and u.children[0] is x, "shape mismatch")
    f = u.round_format
    p = ck._prem(sec, fact, 0)
    _expect_bnd(p, x)
    lo = p.lo if p.lo > 0 else (-p.hi if p.hi < 0 else Fraction(0))
    _require(lo >= Fraction(2) ** f.smallest_normal_exp(),
             "operand magnitude below the normal range")
    _check_rel_round_bound(ck, sec, fact, f)


@_validator("rel_to_bnd")
def _v_rel_to_bnd(ck, sec, fact):
    q = fact.exprs[0]
    _require(q.kind == E.DIV and q.children[0].kind == E.SUB
             and q.children[0].children[1] is q.children[1], "not an error quotient")
    u = q.children[0].children[0]
    v = q.children[1]
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel" and p.exprs[0] is u and p.exprs[1] is v,
             "premise mismatch")
    _expect_nzr(ck._prem(sec, fact, 1), v)
    _check_enclosure(ck, sec, fact, p.lo, p.hi)


@_validator("bnd_to_rel")
def _v_bnd_to_rel(ck, sec, fact):
    u, v = fact.exprs
    p = ck._prem(sec, fact, 0)
    q = p.exprs[0]
    _require(p.kind == "bnd" and q.kind == E.DIV and q.children[0].kind == E.SUB
             and q.children[0].children[0] is u
             and q.children[0].children[1] is v and q.children[1] is v,
             "premise is not the matching error quotient")
    _require(p.lo > -1, "cannot establish the REL invariant")
    _expect_nzr(ck._prem(sec, fact, 1), v)
    _check_enclosure(ck, sec, fact, p.lo, p.hi)


@_validator("rel_subst_bnd")
def _v_rel_subst_bnd(ck, sec, fact):
    u = fact.exprs[0]
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel" and p.exprs[0] is u, "premise mismatch")
    v = p.exprs[1]
    b = _expect_bnd(ck._prem(sec, fact, 1), v)
    lo, hi = _mul_hull(b, (1 + p.lo, 1 + p.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_sub_of_rel")
def _v_bnd_sub_of_rel(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.SUB, "not a difference")
    u, v = e.children
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel" and p.exprs[0] is u and p.exprs[1] is v,
             "premise mismatch")
    b = _expect_bnd(ck._prem(sec, fact, 1), v)
    lo, hi = _mul_hull(b, (p.lo, p.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_div_rel_split")
def _v_bnd_div_rel_split(ck, sec, fact):
    q = fact.exprs[0]
    _require(q.kind == E.DIV, "not a quotient")
    num, den = q.children
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel", "first premise must be a REL fact")
    x, y = p.exprs
    member = num
    if fact.side and fact.side[0] == "eql":
        eq = next((sec.facts[pi] for pi in fact.premises
                   if sec.facts[pi].kind == "eql"), None)
        _require(eq is not None, "missing equality premise")
        pair = {eq.exprs[0].id, eq.exprs[1].id}
        _require(num.id in pair, "equality does not involve the numerator")
        member = eq.exprs[0] if eq.exprs[1] is num else eq.exprs[1]
    _require(member.kind == E.SUB and member.children[0] is x
             and member.children[1] is y, "numerator is not the error of the REL")
    if y is den:
        _require(_has_nzr(sec, fact, den), "missing nonzero premise")
        j = (Fraction(1), Fraction(1))
    else:
        j = _find_bnd(ck, sec, fact, ck.ctx.div(y, den))
        _require(j is not None, "missing weight premise")
    lo, hi = _mul_hull((p.lo, p.hi), j)
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_div_subst")
def _v_bnd_div_subst(ck, sec, fact):
    q = fact.exprs[0]
    _require(q.kind == E.DIV, "not a quotient")
    num, den = q.children
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel" and p.exprs[0] is num, "premise mismatch")
    v = p.exprs[1]
    if v is den:
        _require(_has_nzr(sec, fact, den), "missing nonzero premise")
        j = (Fraction(1), Fraction(1))
    else:
        j = _find_bnd(ck, sec, fact, ck.ctx.div(v, den))
        _require(j is not None, "missing weight premise")
    lo, hi = _mul_hull(j, (1 + p.lo, 1 + p.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("bnd_div_rel_direct")
def _v_bnd_div_rel_direct(ck, sec, fact):
    q = fact.exprs[0]
    _require(q.kind == E.DIV, "not a quotient")
    num, den = q.children
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "rel" and p.exprs[0] is num and p.exprs[1] is den,
             "premise mismatch")
    _require(_has_nzr(sec, fact, den), "missing nonzero premise")
    _check_enclosure(ck, sec, fact, 1 + p.lo, 1 + p.hi)


@_validator("qb_div_through_add", "qb_div_through_sub")
def _v_qb_div_through(ck, sec, fact):
    q = fact.exprs[0]
    _require(q.kind == E.DIV, "not a quotient")
    y, v = q.children
    want = E.ADD if fact.theorem.endswith("add") else E.SUB
    _require(v.kind == want, "denominator shape mismatch")
    ppos = fact.side[1]
    if want == E.SUB:
        _require(ppos == 0, "subtraction pivot must be the left operand")
    pivot = v.children[ppos]
    other = v.children[1 - ppos]
    _require(_has_nzr(sec, fact, pivot), "missing pivot nonzero premise")
    j1 = _quotient_premise(ck, sec, fact, y, pivot)
    j2 = _quotient_premise(ck, sec, fact, other, pivot)
    if want == E.SUB:
        j2 = (-j2[1], -j2[0])
    d = (1 + j2[0], 1 + j2[1])
    _require(not (d[0] <= 0 <= d[1]), "1 + quotient may be zero")
    lo, hi = _div_hull(j1, d)
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("qb_div_through_mul")
def _v_qb_div_through_mul(ck, sec, fact):
    q = fact.exprs[0]
    _require(q.kind == E.DIV, "not a quotient")
    y, v = q.children
    _require(v.kind == E.MUL, "denominator is not a product")
    ppos = fact.side[1]
    pivot = v.children[ppos]
    other = v.children[1 - ppos]
    j1 = _quotient_premise(ck, sec, fact, y, pivot)
    b = _find_bnd(ck, sec, fact, other)
    _require(b is not None, "missing factor bound")
    lo, hi = _div_hull(j1, b)
    _check_enclosure(ck, sec, fact, lo, hi)


def _quotient_premise(ck, sec, fact, y: Expr, pivot: Expr):
    if y is pivot:
        _require(_has_nzr(sec, fact, pivot), "missing pivot nonzero premise")
        return (Fraction(1), Fraction(1))
    j = _find_bnd(ck, sec, fact, ck.ctx.div(y, pivot))
    _require(j is not None, f"missing quotient premise")
    return j


@_validator("chain_abs")
def _v_chain_abs(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.SUB, "not a difference")
    u, w = e.children
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "bnd" and q.kind == "bnd", "premise shape mismatch")
    t1, t2 = p.exprs[0], q.exprs[0]
    _require(t1.kind == E.SUB and t2.kind == E.SUB
             and t1.children[0] is u and t2.children[1] is w
             and t1.children[1] is t2.children[0], "chain does not connect")
    _check_enclosure(ck, sec, fact, p.lo + q.lo, p.hi + q.hi)


@_validator("chain_rel")
def _v_chain_rel(ck, sec, fact):
    e = fact.exprs[0]
    _require(e.kind == E.DIV and e.children[0].kind == E.SUB
             and e.children[0].children[1] is e.children[1],
             "not an error quotient")
    u = e.children[0].children[0]
    w = e.children[1]
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == "bnd" and q.kind == "bnd", "premise shape mismatch")

    def error_parts(node: Expr):
        _require(node.kind == E.DIV and node.children[0].kind == E.SUB
                 and node.children[0].children[1] is node.children[1],
                 "premise is not an error quotient")
        return node.children[0].children[0], node.children[1]

    a1, mid1 = error_parts(p.exprs[0])
    mid2, w2 = error_parts(q.exprs[0])
    _require(a1 is u and w2 is w and mid1 is mid2, "chain does not connect")
    _require(_has_nzr(sec, fact, mid1) and _has_nzr(sec, fact, w),
             "missing nonzero premises")
    lo, hi = _compose_hull((p.lo, p.hi), (q.lo, q.hi))
    _check_enclosure(ck, sec, fact, lo, hi)


@_validator("hint_rewrite")
def _v_hint_rewrite(ck, sec, fact):
    line = fact.side[0]
    hint = next((h for h in ck.script.hints
                 if h.kind == "rewrite" and h.line == line), None)
    _require(hint is not None, "no such rewrite hint in the script")
    _require(fact.exprs[0] is hint.lhs, "conclusion is not the hint's left side")
    p = ck._prem(sec, fact, 0)
    _expect_bnd(p, hint.rhs)
    # every denominator on either side, and every explicit constraint,
    # must be covered by a nonzero premise
    dens = []
    for side_expr in (hint.lhs, hint.rhs):
        for sub in E.subexpressions(side_expr):
            if sub.kind == E.DIV and sub.children[1] not in dens:
                dens.append(sub.children[1])
    for d in dens + list(hint.constraints):
        _require(_has_nzr(sec, fact, d),
                 "denominator not covered by a nonzero premise")
    result = verify_identity(hint.lhs, hint.rhs, hint.constraints)
    if not result.identity:
        raise _Fail("rewrite hint is not an identity")
    if result.probabilistic:
        ck.axioms.append(f"hint at line {line} only probabilistically checked")
    _check_enclosure(ck, sec, fact, p.lo, p.hi)


@_validator("absurd_intersect")
def _v_absurd(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    q = ck._prem(sec, fact, 1)
    _require(p.kind == q.kind and p.kind in ("bnd", "rel"), "premise shape mismatch")
    _require(all(a is b for a, b in zip(p.exprs, q.exprs)),
             "premises bound different expressions")
    _require(p.lo > q.hi or q.lo > p.hi, "premise intervals are not disjoint")


@_validator("ex_falso")
def _v_ex_falso(ck, sec, fact):
    p = ck._prem(sec, fact, 0)
    _require(p.kind == "absurd", "premise is not a contradiction")


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def check(cert_text: str, script: Script) -> CheckResult:
    """Replay a certificate against a script; raises HashMismatch when the
    certificate belongs to a different script."""
    ck = _Checker(script)
    try:
        ck.parse(cert_text)
    except HashMismatch:
        raise
    except CertificateError as exc:
        return CheckResult("fail", str(exc))
    return ck.run()


def check_texts(cert_text: str, script_text: str) -> CheckResult:
    return check(cert_text, load_script(script_text))
