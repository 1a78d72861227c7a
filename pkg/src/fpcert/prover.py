"""Drive saturation over whole scripts: splits, dichotomy, goal verdicts.

Interval-split hints turn one problem into independent subproblems whose
per-goal enclosures are hulled back together; a dichotomy hint grows that
split adaptively until its target goal holds on every piece.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import expr as E
from .engine import FactStore, Options, ResourceLimit, Saturator
from .expr import Expr, format_expr
from .facts import verify_identity
from .numeric import Dyadic, Interval, dyadic_from_rational, interval_hull
from .syntax import Goal, Hint, Script, ScriptError

__all__ = ["prove", "explain", "Report", "GoalResult", "ProofBundle", "Section",
           "HintRejected"]


class HintRejected(Exception):
    """A rewrite hint failed the identity check under --strict-hints."""


@dataclass
class GoalResult:
    goal: Goal
    status: str                      # proved | computed | unproved | contradiction
    enclosure: Optional[Interval]
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class Section:
    label: str
    clips: list[tuple[Expr, Interval]]
    store: FactStore
    goal_facts: list[Optional[int]]


@dataclass
class ProofBundle:
    script: Script
    options: Options
    sections: list[Section]            # leaf sections, in deterministic order
    prelim: Optional[Section]          # derives the split base enclosure
    split_var: Optional[Expr]
    base_fact: Optional[int]


@dataclass
class Report:
    script: Script
    results: list[GoalResult]
    hint_warnings: list[str]
    assumption_warnings: list[str]
    unused_hint_warnings: list[str]
    hypothesis_echo: list[tuple[str, Interval]]
    bundle: Optional[ProofBundle]
    resource_limited: Optional[str] = None

    def all_resolved(self) -> bool:
        return all(r.status in ("proved", "computed", "contradiction")
                   for r in self.results)


# ---------------------------------------------------------------------------


def _check_hints(script: Script, options: Options) -> list[str]:
    warnings = []
    names = script.names()
    for hint in script.hints:
        if hint.kind != "rewrite":
            continue
        result = verify_identity(hint.lhs, hint.rhs, hint.constraints)
        if result.identity:
            continue
        text = (f"hint at line {hint.line} "
                f"({format_expr(hint.lhs, names)} -> {format_expr(hint.rhs, names)})"
                f" is not a proven identity; it must be reviewed by hand")
        if result.witness:
            assign = ", ".join(f"{k} = {v}" for k, v in sorted(result.witness.items()))
            text += f" (differs at {assign})"
        if options.strict_hints:
            raise HintRejected(text)
        warnings.append("Warning: " + text)
    return warnings


class _LeafRunner:
    def __init__(self, script: Script, options: Options):
        self.script = script
        self.options = options
        self.budget_left = options.budget
        self.hints_fired: set[int] = set()
        self.names = script.names()

    def run(self, clips: list[tuple[Expr, Interval]],
            strict: bool = False) -> Section:
        import dataclasses
        opts = dataclasses.replace(self.options, budget=self.budget_left,
                                   unconstrained=self.options.unconstrained
                                   and not strict)
        store = FactStore(self.script.ctx, opts)
        sat = Saturator(self.script, opts, store)
        sat.seed([(var, iv, ()) for var, iv in clips])
        sat.run(self.script.hints)
        self.budget_left -= store.firings
        if self.budget_left <= 0:
            raise ResourceLimit("rule budget exhausted across subproblems")
        self.hints_fired |= sat.hint_fired
        goal_facts = [self._goal_fact(store, g) for g in self.script.goals]
        label = "leaf" if clips else "base"
        return Section(label, clips, store, goal_facts)

    def _goal_fact(self, store: FactStore, goal: Goal) -> Optional[int]:
        if store.contradiction is not None:
            return store.contradiction
        return store.idx_bnd(goal.atom.expr)


def _goal_status(store: FactStore, goal: Goal) -> tuple[str, Optional[Interval]]:
    if store.contradiction is not None:
        return "contradiction", None
    iv = store.bnd(goal.atom.expr)
    if iv is None:
        return "unproved", None
    if not goal.range_known:
        return "computed", iv
    lo_ok = iv.lo.cmp_fraction(goal.atom.lo.numerator, goal.atom.lo.denominator) >= 0
    hi_ok = iv.hi.cmp_fraction(goal.atom.hi.numerator, goal.atom.hi.denominator) <= 0
    if lo_ok and hi_ok:
        return "proved", iv
    return "unproved", iv


def _split_segments(base: Interval, points: list, wp: int) -> list[Interval]:
    cuts = []
    for p in points:
        d = dyadic_from_rational(p, wp, "down")
        if base.lo < d < base.hi:
            cuts.append(d)
    bounds = [base.lo] + cuts + [base.hi]
    return [Interval(a, b) for a, b in zip(bounds, bounds[1:])]


def explain(store: FactStore, goal: Goal, names: dict[int, str]) -> list[str]:
    """Which named parts of an unproved goal have no enclosure."""
    out = []
    for node in E.subexpressions(goal.atom.expr):
        if store.bnd(node) is not None:
            continue
        if node.id in names:
            out.append(f"no enclosure for {names[node.id]}")
        elif node.kind == E.VAR:
            out.append(f"no enclosure for free variable {node.payload}")
    return out


def prove(script: Script, options: Options) -> Report:
    """Answer the property block; returns verdicts, warnings, and proof data."""
    hint_warnings = _check_hints(script, options)
    names = script.names()

    split_hints = [h for h in script.hints if h.kind in ("split", "dichotomy")]
    split_vars = []
    for h in split_hints:
        if h.variable not in split_vars:
            split_vars.append(h.variable)
    if len(split_vars) > 1:
        raise ScriptError("splitting on more than one variable is not supported")
    dicho = next((h for h in script.hints if h.kind == "dichotomy"), None)
    if dicho is not None:
        target_goals = [i for i, g in enumerate(script.goals)
                        if g.atom.expr is dicho.target]
        if not target_goals:
            raise ScriptError(f"dichotomy target at line {dicho.line} "
                              f"does not match any goal")
        if not script.goals[target_goals[0]].range_known:
            raise ScriptError("dichotomy requires a goal with a known range")

    runner = _LeafRunner(script, options)
    report_kwargs = dict(script=script, hint_warnings=hint_warnings)

    try:
        # with split hints the base run only derives the variable's base
        # enclosure, which never needs assumed side conditions
        base_section = runner.run([], strict=bool(split_vars))
        sections: list[Section]
        prelim: Optional[Section] = None
        split_var: Optional[Expr] = None
        base_fact: Optional[int] = None

        if split_vars and base_section.store.contradiction is None:
            var = split_vars[0]
            base_iv = base_section.store.bnd(var)
            if base_iv is None:
                hint_warnings.append(
                    f"Warning: split variable {format_expr(var, names)} has no "
                    f"enclosure; splitting hints ignored.")
                sections = [base_section]
            else:
                prelim = base_section
                split_var = var
                base_fact = base_section.store.idx_bnd(var)
                points: list = []
                for h in script.hints:
                    if h.kind == "split":
                        points.extend(p for p in h.points if p not in points)
                points.sort()
                segments = _split_segments(base_iv, points, options.precision)
                sections = []
                for seg in segments:
                    sections.extend(
                        _solve_segment(runner, script, var, seg, dicho, options))
        else:
            sections = [base_section]
            if split_vars:
                prelim = None
    except ResourceLimit as exc:
        empty = [GoalResult(g, "unproved", None, [str(exc)]) for g in script.goals]
        return Report(results=empty, assumption_warnings=[],
                      unused_hint_warnings=[], hypothesis_echo=[], bundle=None,
                      resource_limited=str(exc), **report_kwargs)

    results = _merge(script, sections, names)
    unused = []
    for h in script.hints:
        if h.kind == "rewrite" and h.line not in runner.hints_fired:
            unused.append(f"Warning: hint at line {h.line} was never used.")
    assumption_warnings = [
        f"Warning: assuming {text} <> 0 (unconstrained mode)."
        for text in _used_assumptions(sections, names)]
    echo_store = prelim.store if prelim is not None else sections[0].store
    echo = _hypothesis_echo(script, echo_store, names)
    bundle = ProofBundle(script, options, sections, prelim, split_var, base_fact)
    return Report(results=results, assumption_warnings=assumption_warnings,
                  unused_hint_warnings=unused, hypothesis_echo=echo,
                  bundle=bundle, **report_kwargs)


def _solve_segment(runner: _LeafRunner, script: Script, var: Expr, seg: Interval,
                   dicho: Optional[Hint], options: Options,
                   depth: int = 0) -> list[Section]:
    section = runner.run([(var, seg)])
    if dicho is None:
        return [section]
    target_idx = next(i for i, g in enumerate(script.goals)
                      if g.atom.expr is dicho.target)
    status, _ = _goal_status(section.store, script.goals[target_idx])
    if status in ("proved", "contradiction"):
        return [section]
    if depth >= options.max_depth:
        section.goal_facts[target_idx] = None  # leaf is stuck; report it
        section.label = f"stuck[{seg.lo}, {seg.hi}]"
        return [section]
    mid = (seg.lo + seg.hi).scale2(-1).round(options.precision, "down")
    if mid <= seg.lo or mid >= seg.hi:
        section.label = f"stuck[{seg.lo}, {seg.hi}]"
        return [section]
    left = _solve_segment(runner, script, var, Interval(seg.lo, mid), dicho,
                          options, depth + 1)
    right = _solve_segment(runner, script, var, Interval(mid, seg.hi), dicho,
                           options, depth + 1)
    return left + right


def proof_cone(store: FactStore, roots: list[int]) -> list[int]:
    """Transitive premises of the given fact indices, in index order."""
    seen: set[int] = set()
    stack = [i for i in roots if i is not None]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        stack.extend(store.log[i].premises)
    return sorted(seen)


def _used_assumptions(sections: list[Section], names: dict[int, str]) -> list[str]:
    """Assumed side conditions that actually appear in some goal's proof."""
    out: list[str] = []
    for sec in sections:
        roots = [i for i in sec.goal_facts if i is not None]
        for i in proof_cone(sec.store, roots):
            fact = sec.store.log[i]
            if fact.theorem == "axiom_nzr":
                text = format_expr(fact.atom.exprs[0], names)
                if text not in out:
                    out.append(text)
    return sorted(out)


def _merge(script: Script, sections: list[Section],
           names: dict[int, str]) -> list[GoalResult]:
    results = []
    for gi, goal in enumerate(script.goals):
        portions = [(s, *_goal_status(s.store, goal)) for s in sections]
        live = [(s, st, iv) for (s, st, iv) in portions if st != "contradiction"]
        if not live:
            results.append(GoalResult(goal, "contradiction", None))
            continue
        if any(st == "unproved" for (_, st, _) in live):
            bad = next(s for (s, st, _) in live if st == "unproved")
            diags = explain(bad.store, goal, names)
            stuck = [s.label for s, st, _ in live
                     if st == "unproved" and s.label.startswith("stuck")]
            diags.extend(f"dichotomy depth limit reached on {lbl[5:]}"
                         for lbl in stuck)
            results.append(GoalResult(goal, "unproved", None, diags))
            continue
        hull = None
        for _, _, iv in live:
            if iv is not None:
                hull = iv if hull is None else interval_hull(hull, iv)
        status = "computed" if not goal.range_known else "proved"
        results.append(GoalResult(goal, status, hull))
    return results


def _hypothesis_echo(script: Script, store: FactStore,
                     names: dict[int, str]) -> list[tuple[str, Interval]]:
    out = []
    for atom in script.hypotheses:
        iv = store.bnd(atom.expr)
        if iv is not None:
            out.append((format_expr(atom.expr, names), iv))
    return out
