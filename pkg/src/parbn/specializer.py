"""Evidence-driven specialization of decision lists.

A source-to-source transformation: for every CPD-query, the decision list
is rewritten against the static part of the state KB (the evidence) so
that the query returns the same answer with less work.  Per query and
clause, the body is grounded compactly, each ground literal is resolved
against the evidence, and the result is simplified by boolean propagation
(plus interval reasoning on count constraints).  A clause body that ends
up true turns the clause into a fact and discards the rest of the list; a
false body drops the clause.  If nothing changed across a whole list, the
query falls back to the original decision list instead of keeping a
grounded copy (grounding without simplification only bloats code).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable

import numpy as np

from .evaluator import (
    Bindings,
    all_vars,
    apply_cpd,
    head_bindings,
    positive_vars,
    resolve,
    split_components,
    var_domains,
)
from .model import (
    FALSE,
    TRUE,
    And,
    BodyFormula,
    CategoricalDistribution,
    Clause,
    CountConstraint,
    CPDQuery,
    DecisionList,
    Evidence,
    FalseF,
    GroundRV,
    Literal,
    Model,
    Or,
    TrueF,
    Var,
    compare,
    cpd_queries_for,
)
from .rng import SplitMix64
from .statekb import init_from_evidence


class SpecializationError(Exception):
    pass


@dataclass(frozen=True)
class SpecializedProgram:
    """Per-CPD-query ground decision lists, with per-query fallback to the
    original model's lists (`None` entries)."""

    model: Model
    lists: dict[CPDQuery, DecisionList | None]
    t_spec: float
    evidence: Evidence | None = None

    def decision_list_for(self, q: CPDQuery) -> DecisionList:
        try:
            dlist = self.lists[q]
        except KeyError:
            raise SpecializationError(f"no specialized entry for {q}") from None
        if dlist is None:
            return self.model.cpds[q.parrv]
        return dlist

    def is_specialized(self, q: CPDQuery) -> bool:
        return self.lists.get(q) is not None

    def clause_count(self) -> int:
        total = 0
        for q, dlist in self.lists.items():
            total += len(dlist or self.model.cpds[q.parrv])
        return total


class _EvidenceView:
    """Evidence indexed for O(1) literal resolution."""

    __slots__ = ("model", "index", "codes", "obs_code")

    def __init__(self, model: Model, evidence: Evidence):
        self.model = model
        self.index = model.rv_index
        self.codes = model.state_codes
        self.obs_code = np.full(len(model.rvs), -1, dtype=np.int64)
        for rv, state in evidence.assignments.items():
            idx = self.index.get(rv)
            if idx is None:
                raise SpecializationError(f"evidence for unknown RV {rv}")
            code = self.codes[rv.parrv].get(state)
            if code is None:
                raise SpecializationError(f"evidence state {state!r} not in range of {rv.parrv}")
            self.obs_code[idx] = code


def _substitute_literal(lit: Literal, bind: Bindings) -> Literal:
    if not bind:
        return lit
    args = tuple(resolve(t, bind) for t in lit.args)
    state = resolve(lit.state, bind)
    if args == lit.args and state == lit.state:
        return lit
    return Literal(lit.positive, lit.predicate, args, state)


def substitute(body: BodyFormula, bind: Bindings) -> BodyFormula:
    """Replace bound variables by their constants throughout a formula."""
    if isinstance(body, (TrueF, FalseF)):
        return body
    if isinstance(body, Literal):
        return _substitute_literal(body, bind)
    if isinstance(body, CountConstraint):
        goal = body.goal
        if goal is not None:
            inner = dict(bind)
            inner.pop(body.counted_var, None)
            goal = _substitute_literal(goal, inner)
        disjuncts = tuple(
            _substitute_literal(d, bind) if isinstance(d, Literal) else d
            for d in body.disjuncts
        )
        if goal is body.goal and disjuncts == body.disjuncts:
            return body
        return CountConstraint(body.counted_var, goal, disjuncts, body.offset, body.cmp, body.bound)
    if isinstance(body, And):
        return And(tuple(substitute(p, bind) for p in body.parts))
    if isinstance(body, Or):
        return Or(tuple(substitute(p, bind) for p in body.parts))
    raise TypeError(f"cannot substitute in {body!r}")


# -- step 1: compact grounding ----------------------------------------------


def ground_body(body: BodyFormula, model: Model, bind: Bindings | None = None) -> BodyFormula:
    """Ground every free variable occurring in state literals.

    State-argument variables range over the predicate's range, parameter
    variables over their populations.  A single literal with free variables
    becomes a disjunction of its groundings; a conjunction is decomposed
    into variable-connected components first, each grounded independently,
    giving the compact nested form.  Negated literals with free variables
    ground to a conjunction of negated ground literals (the dual
    quantifier), and count goals ground to the explicit disjunct-list form.
    """
    if bind is None:
        bind = {}
    if isinstance(body, (TrueF, FalseF)):
        return body
    if isinstance(body, Or):
        return Or(tuple(ground_body(p, model, bind) for p in body.parts))
    parts = body.parts if isinstance(body, And) else (body,)
    grounded: list[BodyFormula] = []
    for comp in split_components(parts, bind):
        grounded.append(_ground_component(comp, model, bind))
    if len(grounded) == 1:
        return grounded[0]
    return And(tuple(grounded))


def _component_evars(parts: Iterable[BodyFormula], bind: Bindings) -> list[Var]:
    evars: list[Var] = []
    for p in parts:
        for v in positive_vars(p):
            if v not in bind and v not in evars:
                evars.append(v)
    return evars


def _ground_component(parts: list[BodyFormula], model: Model, bind: Bindings) -> BodyFormula:
    evars = _component_evars(parts, bind)
    if not evars:
        # Singleton component: no shared existential variables.
        assert len(parts) == 1
        return _ground_atom(parts[0], model, bind)
    domains = var_domains(And(tuple(parts)), model, set(evars))
    alts: list[BodyFormula] = []
    for combo in product(*(domains[v] for v in evars)):
        b2 = dict(bind)
        b2.update(zip(evars, combo))
        ground_parts = [_ground_atom(p, model, b2) for p in parts]
        alts.append(ground_parts[0] if len(ground_parts) == 1 else And(tuple(ground_parts)))
    if not alts:
        return FALSE
    return Or(tuple(alts))


def _ground_atom(atom: BodyFormula, model: Model, bind: Bindings) -> BodyFormula:
    if isinstance(atom, (TrueF, FalseF)):
        return atom
    if isinstance(atom, Literal):
        lit = _substitute_literal(atom, bind)
        free = [v for v in all_vars(lit)]
        if not free:
            return lit
        if lit.positive:
            raise SpecializationError(f"positive literal {lit} left unbound during grounding")
        # Negation-only variables: universal inside the negation.
        domains = var_domains(lit.negate(), model, set(free))
        negs: list[BodyFormula] = []
        for combo in product(*(domains[v] for v in free)):
            b2 = dict(bind)
            b2.update(zip(free, combo))
            negs.append(_substitute_literal(lit, b2))
        if not negs:
            return TRUE
        return And(tuple(negs))
    if isinstance(atom, CountConstraint):
        if atom.goal is None:
            return substitute(atom, bind)
        counted = atom.counted_var
        assert counted is not None
        inner = dict(bind)
        inner.pop(counted, None)
        goal = _substitute_literal(atom.goal, inner)
        leftover = [v for v in all_vars(goal) if v != counted]
        if leftover:
            raise SpecializationError(f"count goal {goal} has unbound variables {leftover}")
        domains = var_domains(goal, model, {counted})
        disjuncts = tuple(
            _substitute_literal(goal, {counted: c}) for c in domains[counted]
        )
        return CountConstraint(None, None, disjuncts, 0, atom.cmp, atom.bound)
    if isinstance(atom, (And, Or)):
        return ground_body(atom, model, bind)
    raise TypeError(f"cannot ground {atom!r}")


# -- step 2: literal specialization -----------------------------------------


def specialize_literal(lit: Literal, model: Model, evidence: Evidence) -> BodyFormula:
    """Resolve one ground literal against the evidence: true/false when the
    RV is observed (or non-existent), unchanged when it is unobserved; the
    roles of true and false are reversed for negated literals."""
    ev = _EvidenceView(model, evidence)
    return _specialize_literal_fast(lit, ev)


def _specialize_literal_fast(lit: Literal, ev: _EvidenceView) -> BodyFormula:
    idx = ev.index.get((lit.predicate, lit.args))
    if idx is None:
        return FALSE if lit.positive else TRUE
    code = ev.obs_code[idx]
    if code < 0:
        return lit
    want = ev.codes[lit.predicate].get(lit.state)
    holds = want is not None and code == want
    if lit.positive:
        return TRUE if holds else FALSE
    return FALSE if holds else TRUE


def specialize_literals(body: BodyFormula, model: Model, evidence: Evidence) -> BodyFormula:
    ev = _EvidenceView(model, evidence)
    out, _ = _specialize_literals_fast(body, ev)
    return out


def _specialize_literals_fast(body: BodyFormula, ev: _EvidenceView) -> tuple[BodyFormula, bool]:
    if isinstance(body, (TrueF, FalseF)):
        return body, False
    if isinstance(body, Literal):
        out = _specialize_literal_fast(body, ev)
        return out, out is not body
    if isinstance(body, CountConstraint):
        changed = False
        disjuncts = []
        for d in body.disjuncts:
            if isinstance(d, Literal):
                nd = _specialize_literal_fast(d, ev)
                changed |= nd is not d
                disjuncts.append(nd)
            else:
                disjuncts.append(d)
        if not changed:
            return body, False
        return (
            CountConstraint(None, None, tuple(disjuncts), body.offset, body.cmp, body.bound),
            True,
        )
    if isinstance(body, (And, Or)):
        changed = False
        parts = []
        for p in body.parts:
            np_, ch = _specialize_literals_fast(p, ev)
            changed |= ch
            parts.append(np_)
        if not changed:
            return body, False
        ctor = And if isinstance(body, And) else Or
        return ctor(tuple(parts)), True
    raise TypeError(f"cannot specialize {body!r}")


# -- step 3: simplification --------------------------------------------------


def simplify_body(body: BodyFormula) -> BodyFormula:
    """Bottom-up boolean propagation: true absorbs a disjunction, false a
    conjunction, resolved leaves are dropped, singletons unwrap, and count
    constraints absorb resolved disjuncts into the offset before interval
    resolution against the bound."""
    out, _ = _simplify(body)
    return out


def _count_interval(cmp: str, bound: int, lo: int, hi: int) -> BodyFormula | None:
    """Resolve a count whose value is known to lie in [lo, hi]."""
    sat = [compare(cmp, c, bound) for c in range(lo, hi + 1)]
    if all(sat):
        return TRUE
    if not any(sat):
        return FALSE
    return None


def _simplify(body: BodyFormula) -> tuple[BodyFormula, bool]:
    if isinstance(body, (TrueF, FalseF, Literal)):
        return body, False
    if isinstance(body, CountConstraint):
        if body.goal is not None:
            return body, False
        changed = False
        offset = body.offset
        kept: list[BodyFormula] = []
        for d in body.disjuncts:
            if isinstance(d, TrueF):
                offset += 1
                changed = True
            elif isinstance(d, FalseF):
                changed = True
            else:
                kept.append(d)
        resolved = _count_interval(body.cmp, body.bound, offset, offset + len(kept))
        if resolved is not None:
            return resolved, True
        if not changed:
            return body, False
        return CountConstraint(None, None, tuple(kept), offset, body.cmp, body.bound), True
    if isinstance(body, (And, Or)):
        is_and = isinstance(body, And)
        changed = False
        kept = []
        for p in body.parts:
            sp, ch = _simplify(p)
            changed |= ch
            if isinstance(sp, TrueF):
                if not is_and:
                    return TRUE, True
                changed = True
            elif isinstance(sp, FalseF):
                if is_and:
                    return FALSE, True
                changed = True
            else:
                kept.append(sp)
        if not kept:
            return (TRUE, True) if is_and else (FALSE, True)
        if len(kept) == 1:
            # Unwrapping a singleton is not a change on its own (the guard
            # compares modulo this trivial wrapper).
            return kept[0], changed
        if not changed:
            return body, False
        return (And if is_and else Or)(tuple(kept)), True
    raise TypeError(f"cannot simplify {body!r}")


# -- per-clause and per-list specialization ----------------------------------


def specialize_body(
    body: BodyFormula,
    model: Model,
    evidence: Evidence,
    bind: Bindings | None = None,
) -> BodyFormula:
    """Ground, specialize, simplify; returns the (head-bound) original body
    unchanged when no literal resolved and nothing simplified, avoiding
    code explosion from grounding alone."""
    ev = _EvidenceView(model, evidence)
    out, _ = _specialize_body_fast(body, model, ev, bind or {})
    return out


def _specialize_body_fast(
    body: BodyFormula, model: Model, ev: _EvidenceView, bind: Bindings
) -> tuple[BodyFormula, bool]:
    """Returns (specialized-or-substituted body, changed flag)."""
    fast = _try_ground_conjunction(body, model, ev, bind)
    if fast is not None:
        return fast
    b1 = ground_body(body, model, bind)
    b2, ch2 = _specialize_literals_fast(b1, ev)
    b3, ch3 = _simplify(b2)
    if not (ch2 or ch3):
        return substitute(body, bind), False
    return b3, True


def _try_ground_conjunction(
    body: BodyFormula, model: Model, ev: _EvidenceView, bind: Bindings
) -> tuple[BodyFormula, bool] | None:
    """Fused fast path for the dominant shape: a conjunction of literals
    that are ground once head variables are bound.  Returns None when the
    body needs the general pipeline."""
    if isinstance(body, TrueF) or isinstance(body, FalseF):
        return body, False
    parts = body.parts if isinstance(body, And) else (body,)
    resolved: list[Literal] = []
    replaced = False
    for p in parts:
        if not isinstance(p, Literal):
            return None
        lit = _substitute_literal(p, bind)
        if any(True for _ in _iter_literal_vars(lit)):
            return None
        out = _specialize_literal_fast(lit, ev)
        if isinstance(out, FalseF):
            return FALSE, True
        if isinstance(out, TrueF):
            replaced = True
        else:
            resolved.append(out)  # type: ignore[arg-type]
    if not resolved:
        return TRUE, True
    combined: BodyFormula = resolved[0] if len(resolved) == 1 else And(tuple(resolved))
    if replaced:
        return combined, True
    return combined, False


def _iter_literal_vars(lit: Literal):
    for t in lit.args:
        if isinstance(t, Var):
            yield t
    if isinstance(lit.state, Var):
        yield lit.state


def spec_decision_list(
    dlist: DecisionList, q: CPDQuery, model: Model, evidence: Evidence
) -> DecisionList | None:
    """Specialize one decision list against one query; None means the
    original list is kept (nothing changed for this query)."""
    ev = _EvidenceView(model, evidence)
    return _spec_decision_list_fast(dlist, q, model, ev)


def _spec_decision_list_fast(
    dlist: DecisionList, q: CPDQuery, model: Model, ev: _EvidenceView
) -> DecisionList | None:
    head = tuple(q.params)
    out: list[Clause] = []
    changed = False
    last = len(dlist.clauses) - 1
    for ci, clause in enumerate(dlist.clauses):
        bind = head_bindings(clause.head_params, q)
        if bind is None:
            changed = True  # head constants disagree: clause can never fire for q
            continue
        spec, ch = _specialize_body_fast(clause.body, model, ev, bind)
        if isinstance(spec, TrueF):
            out.append(Clause(head, clause.distribution, TRUE))
            changed |= ch or ci != last
            break
        if isinstance(spec, FalseF):
            changed = True
            continue
        out.append(Clause(head, clause.distribution, spec))
        changed |= ch
    if not out:
        raise SpecializationError(f"decision list for {q} exhausted (not total)")
    if not changed:
        return None
    return DecisionList(tuple(out))


def specialize(model: Model, evidence: Evidence) -> SpecializedProgram:
    """Specialize every decision list with respect to every CPD-query.

    Wall time is recorded as t_spec; the output preserves sampling
    behavior exactly (see verify_equivalence).
    """
    t0 = time.perf_counter()
    ev = _EvidenceView(model, evidence)
    lists: dict[CPDQuery, DecisionList | None] = {}
    for name in model.parrvs:
        dlist = model.cpds[name]
        for q in cpd_queries_for(name, model):
            lists[q] = _spec_decision_list_fast(dlist, q, model, ev)
    t_spec = time.perf_counter() - t0
    return SpecializedProgram(model=model, lists=lists, t_spec=t_spec, evidence=evidence)


# -- verification -------------------------------------------------------------


@dataclass
class EquivalenceReport:
    n_trials: int
    n_queries: int
    mismatches: list[tuple[int, CPDQuery, CategoricalDistribution, CategoricalDistribution]] = field(
        default_factory=list
    )

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def __str__(self) -> str:
        if self.ok:
            return f"equivalent over {self.n_trials} trials x {self.n_queries} queries"
        t, q, d1, d2 = self.mismatches[0]
        return f"mismatch at trial {t} for {q}: original {d1.entries} != specialized {d2.entries}"


def verify_equivalence(
    model: Model,
    specialized: SpecializedProgram,
    n_trials: int = 1000,
    seed: int = 0,
    evidence: Evidence | None = None,
) -> EquivalenceReport:
    """Check the central guarantee: for random states of the unobserved RVs
    (evidence fixed), every CPD-query answers identically under the
    original and the specialized program.  Stops at the first mismatch."""
    if evidence is None:
        evidence = specialized.evidence
    if evidence is None:
        raise SpecializationError("verify_equivalence needs the evidence the program was built from")
    kb = init_from_evidence(model, evidence)
    unobs = [(model.rv_index[rv], len(model.range_of(rv.parrv))) for rv in model.rvs if not kb.observed[model.rv_index[rv]]]
    queries = [q for name in model.parrvs for q in cpd_queries_for(name, model)]
    rng = SplitMix64(seed)
    report = EquivalenceReport(n_trials=n_trials, n_queries=len(queries))
    for trial in range(n_trials):
        for idx, k in unobs:
            kb.states[idx] = rng.next_below(k)
        for q in queries:
            d1 = apply_cpd(kb, model, q)
            d2 = apply_cpd(kb, specialized, q)
            if d1 is not d2 and d1 != d2:
                report.mismatches.append((trial, q, d1, d2))
                return report
    return report


def referenced_rvs(dlist: DecisionList) -> set[GroundRV]:
    """Ground RVs referenced by any literal or count disjunct of a (ground)
    decision list; used by the no-observed-references invariant check."""
    out: set[GroundRV] = set()

    def walk(f: BodyFormula) -> None:
        if isinstance(f, Literal):
            if f.is_ground():
                out.add(f.rv())
        elif isinstance(f, CountConstraint):
            for d in f.disjuncts:
                if isinstance(d, Literal) and d.is_ground():
                    out.add(d.rv())
            if f.goal is not None and f.goal.is_ground():
                out.add(f.goal.rv())
        elif isinstance(f, (And, Or)):
            for p in f.parts:
                walk(p)

    for clause in dlist.clauses:
        walk(clause.body)
    return out
