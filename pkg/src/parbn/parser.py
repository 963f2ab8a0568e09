"""Surface syntax for models, evidence files, and specialized programs.

Model grammar (`.pbn`, UTF-8, `%` comments to end of line)::

    population course = { c1, c2, c3 }.
    parrv grade(student, course) states { a, b, c }.
    cpd grade(S,C) ~ [a:0.7, b:0.2, c:0.1] :- iq(S,high), level(C,intro).
    cpd graduates(S) ~ [yes:0.5, no:0.5] :- count(C, grade(S,C,a)) < 2.

Bodies are conjunctions of atoms: a literal, `not` literal, or a count
constraint.  Variables start with an uppercase letter or underscore;
constants are lowercase.  The trailing term of a literal is the state.
Declarations must precede use.

Specialized programs reuse the grammar and add: `spec` clauses with ground
heads (accumulating, in order, into one decision list per CPD-query),
`use_original <rv>.` fallback markers, `;` disjunction, grounded
`count{lit ; ...}+offset CMP int` forms, and `true`/`false` body atoms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import (
    FALSE,
    TRUE,
    And,
    BodyFormula,
    CategoricalDistribution,
    Clause,
    CountConstraint,
    DecisionList,
    Evidence,
    FalseF,
    GroundRV,
    Literal,
    Model,
    Or,
    ParRVDecl,
    Population,
    Term,
    TrueF,
    Var,
    cpd_queries_for,
)
from .specializer import SpecializedProgram

RESERVED = {
    "population", "parrv", "states", "cpd", "spec", "use_original",
    "not", "count", "true", "false",
}

_MAX_NESTING = 200

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>%[^\n]*)
    | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
    | (?P<ident>[a-z][A-Za-z0-9_]*)
    | (?P<var>[A-Z_][A-Za-z0-9_]*)
    | (?P<punct>:-|<=|>=|[(){}\[\],;.:~=<>+])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(Exception):
    """Syntax or reference error, carrying a 1-based source position."""

    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


@dataclass
class _Token:
    kind: str  # ident | var | num | punct | eof
    value: str
    line: int
    col: int


def _tokenize(text: str, filename: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {text[pos]!r}",
                SourceSpan(filename, line, pos - line_start + 1),
            )
        kind = m.lastgroup
        value = m.group()
        if kind in ("ws", "comment"):
            nl = value.count("\n")
            if nl:
                line += nl
                line_start = pos + value.rindex("\n") + 1
        else:
            tokens.append(_Token(kind, value, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    """Recursive-descent parser over the token stream.

    Builds model tables incrementally, so every name reference is resolved
    against what has been declared so far.
    """

    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.tokens = _tokenize(text, filename)
        self.i = 0
        self.populations: dict[str, Population] = {}
        self.parrvs: dict[str, ParRVDecl] = {}
        self.cpd_clauses: dict[str, list[Clause]] = {}
        self.spec_clauses: dict[GroundRV, list[Clause]] = {}
        self.use_original: list[GroundRV] = []
        self._fresh = 0
        self._depth = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def span(self, tok: _Token | None = None) -> SourceSpan:
        t = tok or self.peek()
        return SourceSpan(self.filename, t.line, t.col)

    def error(self, message: str, tok: _Token | None = None) -> ParseError:
        return ParseError(message, self.span(tok))

    def expect(self, kind: str, value: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            got = tok.value if tok.kind != "eof" else "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.advance()

    def accept(self, kind: str, value: str | None = None) -> _Token | None:
        tok = self.peek()
        if tok.kind == kind and (value is None or tok.value == value):
            return self.advance()
        return None

    # -- statements --------------------------------------------------------

    def parse_program(self, allow_specialized: bool) -> None:
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind != "ident":
                raise self.error("expected a statement keyword")
            if tok.value == "population":
                self.parse_population()
            elif tok.value == "parrv":
                self.parse_parrv()
            elif tok.value == "cpd":
                self.parse_cpd(specialized=False)
            elif tok.value == "spec":
                if not allow_specialized:
                    raise self.error("'spec' clause is only valid in specialized program files")
                self.parse_cpd(specialized=True)
            elif tok.value == "use_original":
                if not allow_specialized:
                    raise self.error("'use_original' is only valid in specialized program files")
                self.parse_use_original()
            else:
                raise self.error(f"unknown statement {tok.value!r}")

    def parse_population(self) -> None:
        self.expect("ident", "population")
        name_tok = self.expect("ident")
        self.check_fresh_name(name_tok)
        self.expect("punct", "=")
        self.expect("punct", "{")
        members = self.parse_ident_list("}")
        self.expect("punct", ".")
        if len(set(members)) != len(members):
            raise self.error(f"population {name_tok.value} has duplicate members", name_tok)
        self.populations[name_tok.value] = Population(name_tok.value, tuple(members))

    def parse_parrv(self) -> None:
        self.expect("ident", "parrv")
        name_tok = self.expect("ident")
        self.check_fresh_name(name_tok)
        param_types: list[str] = []
        if self.accept("punct", "("):
            while True:
                t = self.expect("ident")
                if t.value not in self.populations:
                    raise self.error(f"undeclared population {t.value!r}", t)
                param_types.append(t.value)
                if not self.accept("punct", ","):
                    break
            self.expect("punct", ")")
        self.expect("ident", "states")
        self.expect("punct", "{")
        states = self.parse_ident_list("}")
        self.expect("punct", ".")
        if len(states) < 2 or len(set(states)) != len(states):
            raise self.error(f"parrv {name_tok.value} needs >= 2 distinct states", name_tok)
        self.parrvs[name_tok.value] = ParRVDecl(name_tok.value, tuple(param_types), tuple(states))
        self.cpd_clauses.setdefault(name_tok.value, [])

    def parse_cpd(self, specialized: bool) -> None:
        self.advance()  # 'cpd' or 'spec'
        name_tok = self.expect("ident")
        decl = self.parrvs.get(name_tok.value)
        if decl is None:
            raise self.error(f"undeclared parRV {name_tok.value!r}", name_tok)
        head_params: list[Term] = []
        if self.accept("punct", "("):
            while True:
                head_params.append(self.parse_term())
                if not self.accept("punct", ","):
                    break
            self.expect("punct", ")")
        if len(head_params) != decl.arity:
            raise self.error(
                f"head of {decl.name} has {len(head_params)} parameters, declared {decl.arity}",
                name_tok,
            )
        self.expect("punct", "~")
        dist = self.parse_distribution(decl)
        body: BodyFormula = TRUE
        if self.accept("punct", ":-"):
            body = self.parse_disjunction()
        self.expect("punct", ".")
        clause = Clause(tuple(head_params), dist, body)
        if specialized:
            if any(isinstance(t, Var) for t in head_params):
                raise self.error("'spec' clause heads must be ground", name_tok)
            q = GroundRV(name_tok.value, tuple(head_params))  # type: ignore[arg-type]
            self.spec_clauses.setdefault(q, []).append(clause)
        else:
            self.cpd_clauses.setdefault(name_tok.value, []).append(clause)

    def parse_use_original(self) -> None:
        self.expect("ident", "use_original")
        rv = self.parse_ground_atom()
        self.expect("punct", ".")
        self.use_original.append(rv)

    # -- pieces ------------------------------------------------------------

    def check_fresh_name(self, tok: _Token) -> None:
        if tok.value in RESERVED:
            raise self.error(f"{tok.value!r} is a reserved word", tok)
        if tok.value in self.populations or tok.value in self.parrvs:
            raise self.error(f"duplicate declaration of {tok.value!r}", tok)

    def parse_ident_list(self, closer: str) -> list[str]:
        items = [self.expect("ident").value]
        while self.accept("punct", ","):
            items.append(self.expect("ident").value)
        self.expect("punct", closer)
        return items

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == "ident":
            self.advance()
            return tok.value
        if tok.kind == "var":
            self.advance()
            if tok.value == "_":
                self._fresh += 1
                return Var(f"_G{self._fresh}")
            return Var(tok.value)
        raise self.error("expected a constant or variable")

    def parse_ground_atom(self) -> GroundRV:
        name_tok = self.expect("ident")
        params: list[str] = []
        if self.accept("punct", "("):
            while True:
                params.append(self.expect("ident").value)
                if not self.accept("punct", ","):
                    break
            self.expect("punct", ")")
        return GroundRV(name_tok.value, tuple(params))

    def parse_distribution(self, decl: ParRVDecl) -> CategoricalDistribution:
        open_tok = self.expect("punct", "[")
        seen: dict[str, float] = {}
        while True:
            s = self.expect("ident")
            self.expect("punct", ":")
            p = self.expect("num")
            if s.value not in decl.range:
                raise self.error(f"state {s.value!r} not in range of {decl.name}", s)
            if s.value in seen:
                raise self.error(f"state {s.value!r} listed twice", s)
            seen[s.value] = float(p.value)
            if not self.accept("punct", ","):
                break
        self.expect("punct", "]")
        if set(seen) != set(decl.range):
            missing = [s for s in decl.range if s not in seen]
            raise self.error(f"distribution misses states {missing} of {decl.name}", open_tok)
        # Canonical entry order is the declared range order.
        return CategoricalDistribution(tuple((s, seen[s]) for s in decl.range))

    def parse_disjunction(self) -> BodyFormula:
        self._depth += 1
        if self._depth > _MAX_NESTING:
            raise self.error("body nesting too deep")
        try:
            parts = [self.parse_conjunction()]
            while self.accept("punct", ";"):
                parts.append(self.parse_conjunction())
        finally:
            self._depth -= 1
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_conjunction(self) -> BodyFormula:
        parts = [self.parse_atom()]
        while self.accept("punct", ","):
            parts.append(self.parse_atom())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_atom(self) -> BodyFormula:
        tok = self.peek()
        if tok.kind == "punct" and tok.value == "(":
            self.advance()
            inner = self.parse_disjunction()
            self.expect("punct", ")")
            return inner
        if tok.kind != "ident":
            raise self.error("expected a body atom")
        if tok.value == "true":
            self.advance()
            return TRUE
        if tok.value == "false":
            self.advance()
            return FALSE
        if tok.value == "not":
            self.advance()
            lit = self.parse_literal()
            return lit.negate()
        if tok.value == "count":
            return self.parse_count()
        return self.parse_literal()

    def parse_literal(self) -> Literal:
        name_tok = self.expect("ident")
        decl = self.parrvs.get(name_tok.value)
        if decl is None:
            raise self.error(f"undeclared parRV {name_tok.value!r} in body", name_tok)
        self.expect("punct", "(")
        terms = [self.parse_term()]
        while self.accept("punct", ","):
            terms.append(self.parse_term())
        self.expect("punct", ")")
        if len(terms) != decl.arity + 1:
            raise self.error(
                f"{decl.name} takes {decl.arity} parameters plus a state, found {len(terms)} terms",
                name_tok,
            )
        state = terms[-1]
        if not isinstance(state, Var) and state not in decl.range:
            raise self.error(f"state {state!r} not in range of {decl.name}", name_tok)
        return Literal(True, decl.name, tuple(terms[:-1]), state)

    def parse_count(self) -> CountConstraint:
        name_tok = self.expect("ident", "count")
        if self.accept("punct", "{"):
            disjuncts: list[Literal] = []
            if not (self.peek().kind == "punct" and self.peek().value == "}"):
                disjuncts.append(self.parse_literal())
                while self.accept("punct", ";"):
                    disjuncts.append(self.parse_literal())
            self.expect("punct", "}")
            offset = 0
            if self.accept("punct", "+"):
                offset = self.parse_int()
            cmp = self.parse_comparator()
            bound = self.parse_int()
            for d in disjuncts:
                if not d.is_ground():
                    raise self.error("grounded count disjuncts must be ground", name_tok)
            return CountConstraint(None, None, tuple(disjuncts), offset, cmp, bound)
        self.expect("punct", "(")
        var_tok = self.expect("var")
        counted = Var(var_tok.value)
        self.expect("punct", ",")
        goal = self.parse_literal()
        self.expect("punct", ")")
        cmp = self.parse_comparator()
        bound = self.parse_int()
        if counted not in (*goal.args, goal.state):
            raise self.error(f"counted variable {counted} does not occur in the goal", var_tok)
        return CountConstraint(counted, goal, (), 0, cmp, bound)

    def parse_comparator(self) -> str:
        tok = self.peek()
        if tok.kind == "punct" and tok.value in ("<", "<=", "=", ">=", ">"):
            self.advance()
            return tok.value
        raise self.error("expected a comparator (<, <=, =, >=, >)")

    def parse_int(self) -> int:
        tok = self.expect("num")
        if "." in tok.value or "e" in tok.value or "E" in tok.value:
            raise self.error("expected an integer", tok)
        return int(tok.value)

    # -- results -----------------------------------------------------------

    def build_model(self) -> Model:
        if not self.populations:
            raise ParseError("no populations declared", SourceSpan(self.filename, 1, 1))
        cpds = {
            name: DecisionList(tuple(clauses))
            for name, clauses in self.cpd_clauses.items()
            if clauses
        }
        return Model(dict(self.populations), dict(self.parrvs), cpds)


def parse_model(text: str, filename: str = "<string>") -> Model:
    """Parse a `.pbn` model file.  Raises ParseError with a source span."""
    p = _Parser(text, filename)
    p.parse_program(allow_specialized=False)
    return p.build_model()


def parse_specialized(text: str, filename: str = "<specialized>") -> SpecializedProgram:
    """Parse a specialized program file (extended syntax)."""
    p = _Parser(text, filename)
    p.parse_program(allow_specialized=True)
    model = p.build_model()
    lists: dict[GroundRV, DecisionList | None] = {}
    for q, clauses in p.spec_clauses.items():
        if not model.has_rv(q):
            raise ParseError(f"spec clause for unknown RV {q}", SourceSpan(filename, 1, 1))
        lists[q] = DecisionList(tuple(clauses))
    for q in p.use_original:
        if not model.has_rv(q):
            raise ParseError(f"use_original names unknown RV {q}", SourceSpan(filename, 1, 1))
        if q in lists:
            raise ParseError(f"{q} has both spec clauses and use_original", SourceSpan(filename, 1, 1))
        lists[q] = None
    for name in model.parrvs:
        for q in cpd_queries_for(name, model):
            if q not in lists:
                raise ParseError(
                    f"specialized program covers no decision list for {q}",
                    SourceSpan(filename, 1, 1),
                )
    return SpecializedProgram(model=model, lists=lists, t_spec=0.0)


def parse_evidence(text: str, model: Model, filename: str = "<evidence>") -> Evidence:
    """Parse a `.ev` evidence file: `rv(args)=state.` lines."""
    p = _Parser(text, filename)
    assignments: dict[GroundRV, str] = {}
    while p.peek().kind != "eof":
        tok = p.peek()
        rv = p.parse_ground_atom()
        p.expect("punct", "=")
        state_tok = p.expect("ident")
        p.expect("punct", ".")
        if not model.has_rv(rv):
            raise ParseError(f"unknown RV {rv}", p.span(tok))
        if state_tok.value not in model.range_of(rv.parrv):
            raise ParseError(
                f"state {state_tok.value!r} not in range of {rv.parrv}", p.span(state_tok)
            )
        if rv in assignments:
            raise ParseError(f"duplicate assignment to {rv}", p.span(tok))
        assignments[rv] = state_tok.value
    return Evidence(assignments)


# -- serialization ---------------------------------------------------------


def _term_text(t: Term) -> str:
    return str(t)


def _head_text(name: str, params: tuple[Term, ...]) -> str:
    if not params:
        return name
    return f"{name}({','.join(_term_text(t) for t in params)})"


def _dist_text(dist: CategoricalDistribution) -> str:
    return "[" + ", ".join(f"{s}:{p!r}" for s, p in dist.entries) + "]"


def _body_text(body: BodyFormula, *, inside_and: bool = False) -> str:
    if isinstance(body, TrueF):
        return "true"
    if isinstance(body, FalseF):
        return "false"
    if isinstance(body, (Literal, CountConstraint)):
        return str(body)
    if isinstance(body, And):
        return ", ".join(_body_text(p, inside_and=True) for p in body.parts)
    if isinstance(body, Or):
        inner = " ; ".join(_body_text(p) for p in body.parts)
        return f"({inner})" if inside_and else inner
    raise TypeError(f"cannot serialize {body!r}")


def _clause_text(keyword: str, name: str, clause: Clause) -> str:
    head = _head_text(name, clause.head_params)
    text = f"{keyword} {head} ~ {_dist_text(clause.distribution)}"
    if not isinstance(clause.body, TrueF):
        text += f" :- {_body_text(clause.body, inside_and=True)}"
    return text + "."


def serialize_model(model: Model) -> str:
    lines: list[str] = []
    for pop in model.populations.values():
        lines.append(f"population {pop.type_name} = {{ {', '.join(pop.members)} }}.")
    lines.append("")
    for decl in model.parrvs.values():
        params = f"({','.join(decl.param_types)})" if decl.param_types else ""
        lines.append(f"parrv {decl.name}{params} states {{ {', '.join(decl.range)} }}.")
    for name, dlist in model.cpds.items():
        lines.append("")
        for clause in dlist.clauses:
            lines.append(_clause_text("cpd", name, clause))
    return "\n".join(lines) + "\n"


def serialize_specialized(sp: SpecializedProgram) -> str:
    lines = [serialize_model(sp.model)]
    for name in sp.model.parrvs:
        header_done = False
        for q in cpd_queries_for(name, sp.model):
            dlist = sp.lists.get(q)
            if not header_done:
                lines.append(f"% specialized decision lists for {name}")
                header_done = True
            if dlist is None:
                lines.append(f"use_original {q}.")
            else:
                for clause in dlist.clauses:
                    lines.append(_clause_text("spec", name, clause))
    return "\n".join(lines) + "\n"


def serialize_program(program: Model | SpecializedProgram) -> str:
    """Render a model or specialized program; parse_model/parse_specialized
    round-trip the result to a structurally identical program."""
    if isinstance(program, SpecializedProgram):
        return serialize_specialized(program)
    return serialize_model(program)


def serialize_evidence(evidence: Evidence) -> str:
    return "".join(f"{rv} = {state}.\n" for rv, state in evidence.assignments.items())
