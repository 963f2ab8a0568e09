"""Shared fixtures: the university example, the rain/wet pair, and a
seeded random-model generator used by equivalence and engine tests."""

from __future__ import annotations

import pytest

from parbn.model import (
    And,
    CategoricalDistribution,
    Clause,
    CountConstraint,
    DecisionList,
    Literal,
    Model,
    ParRVDecl,
    Population,
    TRUE,
    Var,
)
from parbn.parser import parse_model
from parbn.rng import SplitMix64

UNIVERSITY = """
% university example: two students, five courses
population student = { s1, s2 }.
population course = { c1, c2, c3, c4, c5 }.

parrv level(course) states { intro, advanced }.
parrv iq(student) states { high, low }.
parrv grade(student, course) states { a, b, c }.
parrv graduates(student) states { yes, no }.

cpd level(_) ~ [intro:0.4, advanced:0.6].
cpd iq(_) ~ [high:0.5, low:0.5].
cpd grade(S,C) ~ [a:0.7, b:0.2, c:0.1] :- iq(S,high), level(C,intro).
cpd grade(S,C) ~ [a:0.2, b:0.2, c:0.6] :- iq(S,low), level(C,advanced).
cpd grade(_,_) ~ [a:0.3, b:0.4, c:0.3].
cpd graduates(S) ~ [yes:0.2, no:0.8] :- grade(S,_,c).
cpd graduates(S) ~ [yes:0.5, no:0.5] :- count(C, grade(S,C,a)) < 2.
cpd graduates(_) ~ [yes:0.9, no:0.1].
"""

RAINWET = """
population unit = { u }.
parrv rain(unit) states { y, n }.
parrv wet(unit) states { y, n }.
cpd rain(_) ~ [y:0.3, n:0.7].
cpd wet(U) ~ [y:0.9, n:0.1] :- rain(U,y).
cpd wet(_) ~ [y:0.2, n:0.8].
"""


@pytest.fixture(scope="session")
def university() -> Model:
    return parse_model(UNIVERSITY, "university.pbn")


@pytest.fixture(scope="session")
def rainwet() -> Model:
    return parse_model(RAINWET, "rainwet.pbn")


def random_model(seed: int, n_pop: int = 3, n_parrvs: int = 4) -> Model:
    """A small random layered model: bodies only reference earlier parRVs,
    so the result is acyclic by construction.  Bodies mix ground and
    free-variable literals, negation, and count constraints."""
    rng = SplitMix64(seed)
    members = tuple(f"e{i}" for i in range(1, n_pop + 1))
    pop = Population("thing", members)
    parrvs: dict[str, ParRVDecl] = {}
    cpds: dict[str, DecisionList] = {}
    names = [f"p{i}" for i in range(n_parrvs)]
    for li, name in enumerate(names):
        arity = rng.next_below(2) if li else 1  # roots vary; keep small
        k = 2 + rng.next_below(2)
        states = tuple(f"v{j}" for j in range(k))
        decl = ParRVDecl(name, ("thing",) * arity, states)
        parrvs[name] = decl

        def rand_dist() -> CategoricalDistribution:
            raw = [1 + rng.next_below(9) for _ in states]
            total = float(sum(raw))
            return CategoricalDistribution(tuple((s, r / total) for s, r in zip(states, raw)))

        def rand_term(head_vars):
            c = rng.next_below(3)
            if c == 0 and head_vars:
                return head_vars[rng.next_below(len(head_vars))]
            if c == 1:
                return Var(f"F{rng.next_below(2)}")
            return members[rng.next_below(len(members))]

        def rand_literal(head_vars) -> Literal:
            earlier = names[: li] or None
            if earlier is None:
                raise IndexError
            pred = earlier[rng.next_below(len(earlier))]
            pdecl = parrvs[pred]
            args = tuple(rand_term(head_vars) for _ in pdecl.param_types)
            if rng.next_below(4) == 0:
                state = Var("G0")
            else:
                state = pdecl.range[rng.next_below(len(pdecl.range))]
            return Literal(rng.next_below(4) != 0, pred, args, state)

        clauses = []
        head_vars = tuple(Var(f"X{j}") for j in range(arity))
        n_clauses = 1 + rng.next_below(3) if li else 1
        for _ in range(n_clauses - 1):
            n_atoms = 1 + rng.next_below(2)
            atoms = []
            for _ in range(n_atoms):
                if li and rng.next_below(4) == 0:
                    cv = Var("Cnt")
                    pred = names[rng.next_below(li)]
                    pdecl = parrvs[pred]
                    if pdecl.param_types:
                        args = tuple(
                            cv if i == 0 else rand_term(head_vars)
                            for i in range(len(pdecl.param_types))
                        )
                        state = pdecl.range[rng.next_below(len(pdecl.range))]
                        goal = Literal(True, pred, args, state)
                        atoms.append(
                            CountConstraint(cv, goal, (), 0, ("<", "<=", "=", ">=", ">")[rng.next_below(5)], rng.next_below(n_pop + 1))
                        )
                        continue
                atoms.append(rand_literal(head_vars))
            body = atoms[0] if len(atoms) == 1 else And(tuple(atoms))
            clauses.append(Clause(head_vars, rand_dist(), body))
        clauses.append(Clause(head_vars, rand_dist(), TRUE))
        cpds[name] = DecisionList(tuple(clauses))
    return Model({"thing": pop}, parrvs, cpds)
