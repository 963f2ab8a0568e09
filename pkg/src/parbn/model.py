"""Model vocabulary: populations, parameterized RVs, decision-list CPDs.

A parameterized RV (parRV) is a random-variable template with typed
parameters; grounding every parameter over its population yields the
ground RVs of the network.  Each parRV carries exactly one decision list:
an ordered set of clauses where the first clause whose body holds fires,
with a final unconditional clause guaranteeing totality.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Union

PROB_TOLERANCE = 1e-9

COMPARATORS = ("<", "<=", "=", ">=", ">")

_CMP_FN = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def compare(cmp: str, left: int, right: int) -> bool:
    """Apply a count comparator ('<', '<=', '=', '>=', '>')."""
    return _CMP_FN[cmp](left, right)


class Var(NamedTuple):
    """A logic variable (uppercase or underscore-led in the surface syntax)."""

    name: str

    def __str__(self) -> str:
        return self.name


# Terms are either constants (plain strings) or variables.
Term = Union[str, Var]


def is_var(term: Term) -> bool:
    return isinstance(term, Var)


class GroundRV(NamedTuple):
    """One ground random variable: a parRV name plus constant parameters."""

    parrv: str
    params: tuple[str, ...]

    def __str__(self) -> str:
        if not self.params:
            return self.parrv
        return f"{self.parrv}({','.join(self.params)})"


# A CPD-query asks for the distribution of one ground RV given the current
# state KB; there is exactly one per ground RV, so the two share a shape.
CPDQuery = GroundRV


@dataclass(frozen=True)
class Population:
    """The finite, ordered set of constants inhabiting one parameter type."""

    type_name: str
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError(f"population {self.type_name} is empty")
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"population {self.type_name} has duplicate members")


@dataclass(frozen=True)
class ParRVDecl:
    """Declaration of a parameterized RV: typed parameters and a state range."""

    name: str
    param_types: tuple[str, ...]
    range: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.range)) != len(self.range) or len(self.range) < 2:
            raise ValueError(f"parrv {self.name} needs >= 2 distinct states")

    @property
    def arity(self) -> int:
        return len(self.param_types)


@dataclass(frozen=True)
class CategoricalDistribution:
    """Ordered (state, probability) pairs, in the parRV's range order."""

    entries: tuple[tuple[str, float], ...]

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.entries)

    @property
    def probs(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.entries)

    def prob_of(self, state: str) -> float:
        for s, p in self.entries:
            if s == state:
                return p
        raise KeyError(state)

    def total(self) -> float:
        return sum(p for _, p in self.entries)

    def is_normalized(self, tol: float = PROB_TOLERANCE) -> bool:
        return abs(self.total() - 1.0) <= tol


class BodyFormula:
    """Base of the clause-body IR."""

    __slots__ = ()


@dataclass(frozen=True)
class TrueF(BodyFormula):
    def __repr__(self) -> str:
        return "TrueF"


@dataclass(frozen=True)
class FalseF(BodyFormula):
    def __repr__(self) -> str:
        return "FalseF"


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class Literal(BodyFormula):
    """A state literal: predicate(args..., state), possibly negated.

    `args` hold the parameter terms; `state` is the trailing state term.
    """

    positive: bool
    predicate: str
    args: tuple[Term, ...]
    state: Term

    def negate(self) -> Literal:
        return Literal(not self.positive, self.predicate, self.args, self.state)

    def is_ground(self) -> bool:
        return not isinstance(self.state, Var) and all(
            not isinstance(a, Var) for a in self.args
        )

    def rv(self) -> GroundRV:
        """The ground RV this literal refers to (ground literals only)."""
        return GroundRV(self.predicate, self.args)  # type: ignore[arg-type]

    def __str__(self) -> str:
        terms = ",".join(str(t) for t in (*self.args, self.state))
        atom = f"{self.predicate}({terms})"
        return atom if self.positive else f"not {atom}"


@dataclass(frozen=True)
class CountConstraint(BodyFormula):
    """Compares the number of solutions of a goal against an integer bound.

    Pre-grounding form: `goal` is a positive literal containing
    `counted_var` and `disjuncts` is empty.  Post-grounding form: the
    counted variable has been expanded into `disjuncts` (a tuple of ground
    literals, transiently TrueF/FalseF mid-specialization) and the
    absorbed true disjuncts live in `offset`.
    """

    counted_var: Var | None
    goal: Literal | None
    disjuncts: tuple[BodyFormula, ...]
    offset: int
    cmp: str
    bound: int

    def is_grounded(self) -> bool:
        return self.goal is None

    def __str__(self) -> str:
        if self.goal is not None:
            return f"count({self.counted_var}, {self.goal}) {self.cmp} {self.bound}"
        inner = " ; ".join(str(d) for d in self.disjuncts)
        off = f"+{self.offset}" if self.offset else ""
        return f"count{{{inner}}}{off} {self.cmp} {self.bound}"


@dataclass(frozen=True)
class And(BodyFormula):
    parts: tuple[BodyFormula, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("empty conjunction")


@dataclass(frozen=True)
class Or(BodyFormula):
    parts: tuple[BodyFormula, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("empty disjunction")


@dataclass(frozen=True)
class Clause:
    """One decision-list clause: head terms, a distribution, and a body."""

    head_params: tuple[Term, ...]
    distribution: CategoricalDistribution
    body: BodyFormula


@dataclass(frozen=True)
class DecisionList:
    """Ordered clauses for one parRV; the first clause whose body holds fires."""

    clauses: tuple[Clause, ...]

    def __post_init__(self) -> None:
        if not self.clauses:
            raise ValueError("empty decision list")

    def is_total(self) -> bool:
        return isinstance(self.clauses[-1].body, TrueF)

    def __len__(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True)
class Model:
    """A parameterized Bayesian network: populations, parRVs, and CPDs."""

    populations: dict[str, Population]
    parrvs: dict[str, ParRVDecl]
    cpds: dict[str, DecisionList]

    @cached_property
    def rvs(self) -> tuple[GroundRV, ...]:
        return tuple(enumerate_rvs(self))

    @cached_property
    def rv_index(self) -> dict[GroundRV, int]:
        return {rv: i for i, rv in enumerate(self.rvs)}

    @cached_property
    def state_codes(self) -> dict[str, dict[str, int]]:
        """Per parRV: state constant -> integer code in range order."""
        return {
            name: {s: i for i, s in enumerate(decl.range)}
            for name, decl in self.parrvs.items()
        }

    def population_of(self, parrv: str, position: int) -> tuple[str, ...]:
        return self.populations[self.parrvs[parrv].param_types[position]].members

    def range_of(self, parrv: str) -> tuple[str, ...]:
        return self.parrvs[parrv].range

    def has_rv(self, rv: GroundRV) -> bool:
        decl = self.parrvs.get(rv.parrv)
        if decl is None or len(rv.params) != decl.arity:
            return False
        return all(
            c in self.populations[t].members
            for c, t in zip(rv.params, decl.param_types)
        )


@dataclass(frozen=True)
class Evidence:
    """Observed values: one state constant per observed ground RV."""

    assignments: dict[GroundRV, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.assignments)

    def __contains__(self, rv: GroundRV) -> bool:
        return rv in self.assignments


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, message: str) -> None:
        self.violations.append(Violation(kind, message))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(str(v) for v in self.violations)


def enumerate_rvs(model: Model) -> list[GroundRV]:
    """All ground RVs: parRV declaration order, then lexicographic over the
    declared population member order (rightmost parameter varies fastest).

    Deterministic; repeated calls yield identical orderings.
    """
    out: list[GroundRV] = []
    for name, decl in model.parrvs.items():
        pops = []
        for t in decl.param_types:
            members = model.populations[t].members
            if not members:
                raise ValueError(f"population {t} is empty")
            pops.append(members)
        for combo in itertools.product(*pops):
            out.append(GroundRV(name, combo))
    return out


def cpd_queries_for(parrv: str, model: Model) -> list[CPDQuery]:
    """One CPD-query per grounding of `parrv`, in enumerate_rvs order."""
    if parrv not in model.parrvs:
        raise KeyError(f"unknown parRV: {parrv}")
    decl = model.parrvs[parrv]
    pops = [model.populations[t].members for t in decl.param_types]
    return [GroundRV(parrv, combo) for combo in itertools.product(*pops)]


def _formula_literals(body: BodyFormula) -> Iterable[Literal]:
    if isinstance(body, Literal):
        yield body
    elif isinstance(body, CountConstraint):
        if body.goal is not None:
            yield body.goal
        for d in body.disjuncts:
            if isinstance(d, Literal):
                yield d
    elif isinstance(body, (And, Or)):
        for p in body.parts:
            yield from _formula_literals(p)


def validate_model(model: Model) -> ValidationReport:
    """Static checks; an empty report means the model is well-formed.

    Flags: missing/non-total decision lists, unnormalized distributions,
    unknown predicates or population members, arity mismatches, and count
    bodies whose counted variable does not occur in the goal.
    """
    report = ValidationReport()
    for name, decl in model.parrvs.items():
        for t in decl.param_types:
            if t not in model.populations:
                report.add("unknown-population", f"parrv {name}: population {t} not declared")
        if name not in model.cpds:
            report.add("missing-cpd", f"parrv {name} has no decision list")
    for name in model.cpds:
        if name not in model.parrvs:
            report.add("unknown-parrv", f"decision list for undeclared parRV {name}")

    for name, dlist in model.cpds.items():
        decl = model.parrvs.get(name)
        if decl is None:
            continue
        if not dlist.is_total():
            report.add(
                "not-total",
                f"decision list for {name} is not total: last clause body must be true",
            )
        for ci, clause in enumerate(dlist.clauses, start=1):
            where = f"{name} clause {ci}"
            if len(clause.head_params) != decl.arity:
                report.add("arity", f"{where}: head arity {len(clause.head_params)} != {decl.arity}")
            else:
                for pos, term in enumerate(clause.head_params):
                    if not isinstance(term, Var) and term not in model.populations[decl.param_types[pos]].members:
                        report.add("unknown-member", f"{where}: head constant {term} not in population {decl.param_types[pos]}")
            head_vars = {t for t in clause.head_params if isinstance(t, Var)}
            if len(head_vars) != sum(1 for t in clause.head_params if isinstance(t, Var)):
                report.add("head-vars", f"{where}: repeated head variable")
            if not clause.distribution.is_normalized():
                report.add(
                    "unnormalized",
                    f"{where}: distribution sums to {clause.distribution.total():.10g}",
                )
            dstates = clause.distribution.states
            if set(dstates) != set(decl.range) or len(dstates) != len(decl.range):
                report.add("range", f"{where}: distribution states {dstates} do not match range {decl.range}")
            _validate_body(model, clause.body, where, report)
    return report


def _validate_body(model: Model, body: BodyFormula, where: str, report: ValidationReport) -> None:
    if isinstance(body, CountConstraint) and body.goal is not None:
        if body.counted_var is None or body.counted_var not in (
            *body.goal.args,
            body.goal.state,
        ):
            report.add("count", f"{where}: counted variable missing from count goal")
    if isinstance(body, (And, Or)):
        for p in body.parts:
            _validate_body(model, p, where, report)
        return
    for lit in _formula_literals(body):
        decl = model.parrvs.get(lit.predicate)
        if decl is None:
            report.add("unknown-parrv", f"{where}: body predicate {lit.predicate} not declared")
            continue
        if len(lit.args) != decl.arity:
            report.add("arity", f"{where}: {lit.predicate} used with {len(lit.args)} params, declared {decl.arity}")
            continue
        for pos, term in enumerate(lit.args):
            if not isinstance(term, Var) and term not in model.populations[decl.param_types[pos]].members:
                report.add("unknown-member", f"{where}: {term} not in population {decl.param_types[pos]}")
        if not isinstance(lit.state, Var) and lit.state not in decl.range:
            report.add("range", f"{where}: state {lit.state} not in range of {lit.predicate}")
