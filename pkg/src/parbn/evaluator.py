"""Reference evaluator for decision-list CPD queries against a state KB.

Body semantics are declarative and order-independent: variables with at
least one positive occurrence (in a positive literal or a count goal) are
existentially quantified over the conjunction; variables occurring only
under negation are universally quantified inside their own literal
(negation as failure over a finite domain).  A conjunction is evaluated by
splitting it into variable-connected components, so its truth value agrees
by construction with the compact grounding the specializer produces.

This module is the bottleneck the specializer exists to relieve: each call
re-derives everything from the current KB states, with no caching between
calls.
"""

from __future__ import annotations

from itertools import product
from typing import Iterable

from .model import (
    And,
    BodyFormula,
    CategoricalDistribution,
    CountConstraint,
    CPDQuery,
    DecisionList,
    FalseF,
    Literal,
    Model,
    Or,
    Term,
    TrueF,
    Var,
    compare,
)
from .statekb import UNINITIALIZED, StateKB, UninitializedRead

# A binding maps body variables to constants.
Bindings = dict[Var, str]


class EvaluationError(Exception):
    pass


def resolve(term: Term, bind: Bindings) -> Term:
    if isinstance(term, Var):
        return bind.get(term, term)
    return term


def literal_vars(lit: Literal) -> Iterable[Var]:
    for t in lit.args:
        if isinstance(t, Var):
            yield t
    if isinstance(lit.state, Var):
        yield lit.state


def positive_vars(part: BodyFormula) -> set[Var]:
    """Variables with a positive occurrence in one conjunct: these are the
    existentially quantified variables of the enclosing conjunction."""
    if isinstance(part, Literal):
        return set(literal_vars(part)) if part.positive else set()
    if isinstance(part, CountConstraint):
        if part.goal is None:
            return set()
        vs = set(literal_vars(part.goal))
        vs.discard(part.counted_var)
        return vs
    if isinstance(part, (And, Or)):
        out: set[Var] = set()
        for p in part.parts:
            out |= positive_vars(p)
        return out
    return set()


def all_vars(part: BodyFormula) -> set[Var]:
    if isinstance(part, Literal):
        return set(literal_vars(part))
    if isinstance(part, CountConstraint):
        vs: set[Var] = set()
        if part.goal is not None:
            vs = set(literal_vars(part.goal))
            vs.discard(part.counted_var)
        return vs
    if isinstance(part, (And, Or)):
        out: set[Var] = set()
        for p in part.parts:
            out |= all_vars(p)
        return out
    return set()


def var_domains(body: BodyFormula, model: Model, only: set[Var] | None = None) -> dict[Var, tuple[str, ...]]:
    """Domain of each variable from the positions it occupies: population
    members for parameter positions, the range for state positions.  A
    variable used in several positions gets the intersection, keeping the
    order of the first position's domain."""
    domains: dict[Var, tuple[str, ...]] = {}

    def note(v: Var, domain: tuple[str, ...]) -> None:
        if only is not None and v not in only:
            return
        if v in domains:
            keep = set(domain)
            domains[v] = tuple(c for c in domains[v] if c in keep)
        else:
            domains[v] = domain

    def walk_literal(lit: Literal) -> None:
        decl = model.parrvs[lit.predicate]
        for pos, t in enumerate(lit.args):
            if isinstance(t, Var):
                note(t, model.populations[decl.param_types[pos]].members)
        if isinstance(lit.state, Var):
            note(lit.state, decl.range)

    def walk(f: BodyFormula) -> None:
        if isinstance(f, Literal):
            walk_literal(f)
        elif isinstance(f, CountConstraint):
            if f.goal is not None:
                walk_literal(f.goal)
        elif isinstance(f, (And, Or)):
            for p in f.parts:
                walk(p)

    walk(body)
    if only is not None:
        for v in only:
            domains.setdefault(v, ())
    return domains


def split_components(parts: tuple[BodyFormula, ...], bind: Bindings) -> list[list[BodyFormula]]:
    """Group conjuncts connected through shared existential variables.

    Conjuncts without free existential variables stay as singletons; order
    follows each component's first conjunct.
    """
    n = len(parts)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            # Keep the smaller index as root so components order naturally.
            parent[max(ra, rb)] = min(ra, rb)

    seen_at: dict[Var, int] = {}
    for i, p in enumerate(parts):
        for v in positive_vars(p):
            if v in bind:
                continue
            if v in seen_at:
                union(seen_at[v], i)
            else:
                seen_at[v] = i
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    return [[parts[i] for i in comps[root]] for root in sorted(comps)]


def _truth(kb: StateKB, pred: str, args: tuple[str, ...], state: str, positive: bool) -> bool:
    idx = kb._index.get((pred, args))
    if idx is None:
        return not positive
    code = kb.states[idx]
    if code == UNINITIALIZED:
        raise UninitializedRead(f"{pred}{args} read before initialization")
    want = kb._codes[pred].get(state)
    holds = want is not None and code == want
    return holds if positive else not holds


def _resolved_literal(lit: Literal, bind: Bindings) -> tuple[tuple[str, ...], str, list[Var]]:
    """Resolve a literal's terms; returns (args, state, remaining free vars).
    Unresolved positions carry empty strings and are reported as free."""
    free: list[Var] = []
    args = []
    for t in lit.args:
        r = resolve(t, bind)
        if isinstance(r, Var):
            if r not in free:
                free.append(r)
            args.append("")
        else:
            args.append(r)
    state = resolve(lit.state, bind)
    if isinstance(state, Var):
        if state not in free:
            free.append(state)
        state = ""
    return tuple(args), state, free


def _eval_literal(kb: StateKB, lit: Literal, bind: Bindings) -> bool:
    args, state, free = _resolved_literal(lit, bind)
    if not free:
        return _truth(kb, lit.predicate, args, state, lit.positive)
    # Existential over the remaining free variables; for a negated literal
    # these are universal inside the negation (no grounding may satisfy the
    # positive literal).
    domains = var_domains(lit, kb.model, set(free))
    order = [v for v in free]
    any_true = False
    for combo in product(*(domains[v] for v in order)):
        b2 = dict(bind)
        b2.update(zip(order, combo))
        a2, s2, rest = _resolved_literal(lit, b2)
        if rest:
            raise EvaluationError(f"unresolvable variables in {lit}")
        if _truth(kb, lit.predicate, a2, s2, True):
            any_true = True
            break
    return any_true if lit.positive else not any_true


def eval_count(kb: StateKB, cc: CountConstraint, bind: Bindings) -> bool:
    """Solution count of the goal (plus satisfied ground disjuncts, plus the
    absorbed offset) compared against the bound."""
    count = cc.offset
    if cc.goal is not None:
        goal = cc.goal
        counted = cc.counted_var
        assert counted is not None
        base = dict(bind)
        base.pop(counted, None)
        _, _, free = _resolved_literal(goal, base)
        if [v for v in free if v != counted]:
            raise EvaluationError(
                f"count goal {goal} has unbound variables besides {counted}"
            )
        domains = var_domains(goal, kb.model, {counted})
        for c in domains[counted]:
            base[counted] = c
            args, state, _ = _resolved_literal(goal, base)
            if _truth(kb, goal.predicate, args, state, True):
                count += 1
    for d in cc.disjuncts:
        if isinstance(d, TrueF):
            count += 1
        elif isinstance(d, FalseF):
            pass
        elif isinstance(d, Literal):
            args, state, free = _resolved_literal(d, bind)
            if free:
                raise EvaluationError(f"count disjunct {d} is not ground")
            if _truth(kb, d.predicate, args, state, d.positive):
                count += 1
        else:
            raise EvaluationError(f"bad count disjunct {d!r}")
    return compare(cc.cmp, count, cc.bound)


def eval_body(kb: StateKB, body: BodyFormula, bind: Bindings | None = None) -> bool:
    """Truth of a clause body under the current KB states and bindings."""
    if bind is None:
        bind = {}
    if isinstance(body, TrueF):
        return True
    if isinstance(body, FalseF):
        return False
    if isinstance(body, Literal):
        return _eval_literal(kb, body, bind)
    if isinstance(body, CountConstraint):
        return eval_count(kb, body, bind)
    if isinstance(body, Or):
        return any(eval_body(kb, p, bind) for p in body.parts)
    if isinstance(body, And):
        for comp in split_components(body.parts, bind):
            if not _eval_component(kb, comp, bind):
                return False
        return True
    raise EvaluationError(f"cannot evaluate {body!r}")


def _eval_component(kb: StateKB, parts: list[BodyFormula], bind: Bindings) -> bool:
    evars: list[Var] = []
    for p in parts:
        for v in positive_vars(p):
            if v not in bind and v not in evars:
                evars.append(v)
    if not evars:
        return all(eval_body(kb, p, bind) for p in parts)
    domains = var_domains(And(tuple(parts)), kb.model, set(evars))
    for combo in product(*(domains[v] for v in evars)):
        b2 = dict(bind)
        b2.update(zip(evars, combo))
        if all(eval_body(kb, p, b2) for p in parts):
            return True
    return False


def head_bindings(clause_head: tuple[Term, ...], q: CPDQuery) -> Bindings | None:
    """Bind head variables to the query constants; None if a head constant
    disagrees with the query (the clause does not apply)."""
    bind: Bindings = {}
    for t, c in zip(clause_head, q.params):
        if isinstance(t, Var):
            prev = bind.get(t)
            if prev is not None and prev != c:
                return None
            bind[t] = c
        elif t != c:
            return None
    return bind


def decision_list_for(program, q: CPDQuery) -> DecisionList:
    """Look up the decision list answering q, for a Model or a specialized
    program (which may fall back to the original list per query)."""
    lookup = getattr(program, "decision_list_for", None)
    if lookup is not None:
        return lookup(q)
    dlist = program.cpds.get(q.parrv)
    if dlist is None:
        raise EvaluationError(f"no decision list for {q.parrv}")
    return dlist


def apply_cpd(kb: StateKB, program, q: CPDQuery) -> CategoricalDistribution:
    """Answer one CPD-query: walk q's decision list in order and return the
    distribution of the first clause whose body holds."""
    dlist = decision_list_for(program, q)
    for clause in dlist.clauses:
        bind = head_bindings(clause.head_params, q)
        if bind is None:
            continue
        if eval_body(kb, clause.body, bind):
            return clause.distribution
    raise EvaluationError(f"no clause of {q.parrv} applies to {q} (decision list not total)")
