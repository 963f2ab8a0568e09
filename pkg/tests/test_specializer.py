"""Specializer: literal resolution, compact grounding, simplification,
per-list processing, and the equivalence guarantee."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parbn.evaluator import apply_cpd, eval_body
from parbn.model import (
    And,
    CountConstraint,
    Evidence,
    FALSE,
    FalseF,
    GroundRV,
    Literal,
    Or,
    TRUE,
    TrueF,
    Var,
    cpd_queries_for,
)
from parbn.parser import parse_evidence, parse_model
from parbn.rng import SplitMix64
from parbn.specializer import (
    ground_body,
    referenced_rvs,
    simplify_body,
    spec_decision_list,
    specialize,
    specialize_body,
    specialize_literal,
    specialize_literals,
    verify_equivalence,
)
from parbn.statekb import init_from_evidence

from conftest import random_model

S1C1_A = Literal(True, "grade", ("s1", "c1"), "a")


# -- literal specialization: the full truth table -----------------------------


def test_positive_literal_consistent_evidence(university):
    ev = parse_evidence("grade(s1,c1)=a.", university)
    assert specialize_literal(S1C1_A, university, ev) == TRUE


def test_positive_literal_inconsistent_evidence(university):
    ev = parse_evidence("grade(s1,c1)=b.", university)
    assert specialize_literal(S1C1_A, university, ev) == FALSE


def test_positive_literal_unobserved_unchanged(university):
    ev = Evidence({})
    assert specialize_literal(S1C1_A, university, ev) is S1C1_A


def test_positive_literal_nonexistent_rv(university):
    lit = Literal(True, "grade", ("s9", "c1"), "a")
    assert specialize_literal(lit, university, Evidence({})) == FALSE


def test_negative_literal_consistent_evidence(university):
    ev = parse_evidence("grade(s1,c1)=a.", university)
    assert specialize_literal(S1C1_A.negate(), university, ev) == FALSE


def test_negative_literal_inconsistent_evidence(university):
    ev = parse_evidence("grade(s1,c1)=b.", university)
    assert specialize_literal(S1C1_A.negate(), university, ev) == TRUE


def test_negative_literal_unobserved_unchanged(university):
    neg = S1C1_A.negate()
    assert specialize_literal(neg, university, Evidence({})) is neg


def test_negative_literal_nonexistent_rv(university):
    lit = Literal(False, "grade", ("s9", "c1"), "a")
    assert specialize_literal(lit, university, Evidence({})) == TRUE


# -- compact grounding ---------------------------------------------------------


def test_ground_single_free_literal(university):
    body = Literal(True, "grade", ("s1", Var("C")), "a")
    grounded = ground_body(body, university)
    assert grounded == Or(
        tuple(Literal(True, "grade", ("s1", c), "a") for c in ("c1", "c2", "c3", "c4", "c5"))
    )


def test_ground_keeps_independent_components_nested(university):
    # p, q(X) grounds to p AND (q(x1) ; ... ; q(xn)), not a DNF blowup
    body = And(
        (
            Literal(True, "iq", ("s1",), "high"),
            Literal(True, "level", (Var("C"),), "intro"),
        )
    )
    grounded = ground_body(body, university)
    assert isinstance(grounded, And) and len(grounded.parts) == 2
    assert grounded.parts[0] == Literal(True, "iq", ("s1",), "high")
    assert grounded.parts[1] == Or(
        tuple(Literal(True, "level", (c,), "intro") for c in ("c1", "c2", "c3", "c4", "c5"))
    )


def test_ground_connected_component_is_joint(university):
    body = And(
        (
            Literal(True, "grade", ("s1", Var("C")), "a"),
            Literal(True, "level", (Var("C"),), "intro"),
        )
    )
    grounded = ground_body(body, university)
    assert isinstance(grounded, Or) and len(grounded.parts) == 5
    first = grounded.parts[0]
    assert first == And(
        (Literal(True, "grade", ("s1", "c1"), "a"), Literal(True, "level", ("c1",), "intro"))
    )


def test_ground_negated_free_literal_is_conjunction(university):
    body = Literal(False, "iq", (Var("S"),), "high")
    grounded = ground_body(body, university)
    assert grounded == And(
        (Literal(False, "iq", ("s1",), "high"), Literal(False, "iq", ("s2",), "high"))
    )


def test_ground_count_to_disjunct_list(university):
    body = CountConstraint(
        Var("C"), Literal(True, "grade", ("s1", Var("C")), "a"), (), 0, "<", 2
    )
    grounded = ground_body(body, university)
    assert isinstance(grounded, CountConstraint)
    assert grounded.goal is None and grounded.offset == 0
    assert grounded.cmp == "<" and grounded.bound == 2
    assert grounded.disjuncts == tuple(
        Literal(True, "grade", ("s1", c), "a") for c in ("c1", "c2", "c3", "c4", "c5")
    )


def test_ground_state_variable_over_range(university):
    body = Literal(True, "iq", ("s1",), Var("L"))
    grounded = ground_body(body, university)
    assert grounded == Or(
        (Literal(True, "iq", ("s1",), "high"), Literal(True, "iq", ("s1",), "low"))
    )


def test_ground_respects_head_bindings(university):
    body = Literal(True, "iq", (Var("S"),), "high")
    grounded = ground_body(body, university, {Var("S"): "s2"})
    assert grounded == Literal(True, "iq", ("s2",), "high")


# -- simplification ------------------------------------------------------------


def test_simplify_or_domination():
    lit = S1C1_A
    assert simplify_body(Or((TRUE, lit))) == TRUE
    assert simplify_body(Or((FALSE, lit))) == lit
    assert simplify_body(Or((FALSE, FALSE))) == FALSE


def test_simplify_and_domination():
    lit = S1C1_A
    assert simplify_body(And((FALSE, lit))) == FALSE
    assert simplify_body(And((TRUE, lit))) == lit
    assert simplify_body(And((TRUE, TRUE))) == TRUE


def test_simplify_count_absorbs_resolved_disjuncts():
    g1 = Literal(True, "grade", ("s1", "c1"), "a")
    g3 = Literal(True, "grade", ("s1", "c3"), "a")
    cc = CountConstraint(None, None, (g1, TRUE, g3, FALSE, TRUE), 0, "<", 2)
    # two true disjuncts absorb into the offset; count >= 2 always, < 2 never
    assert simplify_body(cc) == FALSE


def test_simplify_count_residual():
    g1 = Literal(True, "grade", ("s1", "c1"), "a")
    g3 = Literal(True, "grade", ("s1", "c3"), "a")
    cc = CountConstraint(None, None, (g1, TRUE, g3, FALSE), 0, "<", 2)
    out = simplify_body(cc)
    assert out == CountConstraint(None, None, (g1, g3), 1, "<", 2)


def test_simplify_count_vacuous_bound():
    lit = Literal(True, "grade", ("s1", "c1"), "a")
    assert simplify_body(CountConstraint(None, None, (lit,), 0, ">=", 0)) == TRUE
    assert simplify_body(CountConstraint(None, None, (lit,), 0, ">", 1)) == FALSE


def test_simplify_unwraps_singletons():
    lit = S1C1_A
    assert simplify_body(Or((lit,))) is lit
    assert simplify_body(And((lit,))) is lit


def _tiny_formula_model():
    return parse_model(
        """
        population p = { x1, x2, x3, x4, x5, x6 }.
        parrv f(p) states { a, b }.
        parrv g(p) states { a, b, c }.
        cpd f(_) ~ [a:0.5, b:0.5].
        cpd g(_) ~ [a:0.3, b:0.3, c:0.4].
        """
    )


_FORMULA_MODEL = _tiny_formula_model()


def _formulas(depth: int):
    members = _FORMULA_MODEL.populations["p"].members
    lits = st.builds(
        Literal,
        st.booleans(),
        st.sampled_from(["f", "g"]),
        st.tuples(st.sampled_from(members)),
        st.sampled_from(["a", "b", "c"]),
    )
    leaves = st.one_of(st.just(TRUE), st.just(FALSE), lits)
    counts = st.builds(
        lambda disj, off, cmp, bound: CountConstraint(None, None, tuple(disj), off, cmp, bound),
        st.lists(st.one_of(lits, st.just(TRUE), st.just(FALSE)), max_size=5),
        st.integers(0, 3),
        st.sampled_from(["<", "<=", "=", ">=", ">"]),
        st.integers(0, 6),
    )
    return st.recursive(
        st.one_of(leaves, counts),
        lambda kids: st.one_of(
            st.builds(lambda ps: And(tuple(ps)), st.lists(kids, min_size=1, max_size=3)),
            st.builds(lambda ps: Or(tuple(ps)), st.lists(kids, min_size=1, max_size=3)),
        ),
        max_leaves=12,
    )


@settings(max_examples=300, deadline=None)
@given(_formulas(depth=5), st.integers(0, 2**32))
def test_simplify_soundness(formula, seed):
    """eval(simplify(F)) == eval(F) for random formulas and KB states.

    Literals whose state is outside the predicate's range are legal here;
    they are simply false (no current state equals them).
    """
    model = _FORMULA_MODEL
    rng = SplitMix64(seed)
    kb = init_from_evidence(model, Evidence({}))
    for rv in model.rvs:
        states = model.range_of(rv.parrv)
        kb.set_state(rv, states[rng.next_below(len(states))])
    assert eval_body(kb, simplify_body(formula), {}) == eval_body(kb, formula, {})


# -- per-list specialization -----------------------------------------------------


def test_example_graduates_becomes_fact(university):
    """Evidence of one 'c' grade resolves the first clause to a fact and
    discards the rest of the list."""
    ev = parse_evidence("grade(s1,c2)=c.", university)
    out = spec_decision_list(
        university.cpds["graduates"], GroundRV("graduates", ("s1",)), university, ev
    )
    assert out is not None and len(out) == 1
    clause = out.clauses[0]
    assert clause.head_params == ("s1",)
    assert isinstance(clause.body, TrueF)
    assert clause.distribution.entries == (("yes", 0.2), ("no", 0.8))


def test_first_clause_false_drops_it(university):
    ev = parse_evidence("iq(s1)=low. level(c1)=intro.", university)
    out = spec_decision_list(
        university.cpds["grade"], GroundRV("grade", ("s1", "c1")), university, ev
    )
    # clause 1 (high,intro) false, clause 2 (low,advanced) false, default fires
    assert out is not None and len(out) == 1
    assert out.clauses[0].distribution.probs == (0.3, 0.4, 0.3)


def test_partially_resolved_clause_is_retained(university):
    ev = parse_evidence("level(c1)=intro.", university)
    out = spec_decision_list(
        university.cpds["grade"], GroundRV("grade", ("s1", "c1")), university, ev
    )
    # clause 1 keeps its unresolved iq literal, clause 2 is evidence-false
    # and dropped, the default becomes the closing fact
    assert out is not None and len(out) == 2
    assert out.clauses[0].body == Literal(True, "iq", ("s1",), "high")
    assert isinstance(out.clauses[1].body, TrueF)


def test_empty_evidence_returns_use_original(university):
    sp = specialize(university, Evidence({}))
    assert all(v is None for v in sp.lists.values())


def test_full_evidence_all_facts(university, rainwet):
    """Under full evidence every query is answered by a single
    unconditional clause.  Lists that were already one unconditional
    clause stay use-original (nothing changed), which is the same fact."""
    ev = parse_evidence("rain(u)=y. wet(u)=n.", rainwet)
    sp = specialize(rainwet, ev)
    for q in sp.lists:
        effective = sp.decision_list_for(q)
        assert len(effective) == 1
        assert isinstance(effective.clauses[0].body, TrueF)
    # wet has a literal-bearing clause, so it really was rewritten
    assert sp.lists[GroundRV("wet", ("u",))] is not None


def test_grade_queries_become_facts_under_parent_evidence(university):
    ev = parse_evidence(
        "iq(s1)=high. iq(s2)=low. level(c1)=intro. level(c2)=advanced. "
        "level(c3)=intro. level(c4)=advanced. level(c5)=intro.",
        university,
    )
    sp = specialize(university, ev)
    for q in cpd_queries_for("grade", university):
        dlist = sp.lists[q]
        assert dlist is not None and len(dlist) == 1
        assert isinstance(dlist.clauses[0].body, TrueF)


def test_no_evidence_about_body_returns_original_not_grounded(university):
    """Grounding without specialization is avoided (code-explosion guard)."""
    body = Literal(True, "grade", ("s1", Var("C")), "a")
    out = specialize_body(body, university, Evidence({}))
    assert out is body


def test_partially_observed_existential_specializes(university):
    ev = parse_evidence("grade(s1,c1)=a.", university)
    body = Literal(True, "grade", ("s1", Var("C")), "a")
    assert specialize_body(body, university, ev) == TRUE
    ev2 = parse_evidence(
        "grade(s1,c1)=b. grade(s1,c2)=b. grade(s1,c3)=b. grade(s1,c4)=b.", university
    )
    out = specialize_body(body, university, ev2)
    assert out == Literal(True, "grade", ("s1", "c5"), "a")


def test_specialize_body_resolves_against_contrary_evidence(university):
    ev = parse_evidence("iq(s1)=low.", university)
    body = Literal(True, "iq", (Var("S"),), "high")
    assert specialize_body(body, university, ev, {Var("S"): "s1"}) == FALSE


def test_monotone_shrinkage(university):
    rng = SplitMix64(3)
    for seed in range(6):
        ev = _random_evidence(university, 0.5, seed)
        sp = specialize(university, ev)
        for q, dlist in sp.lists.items():
            original = university.cpds[q.parrv]
            if dlist is not None:
                assert len(dlist) <= len(original)


def test_specialized_lists_reference_only_unobserved(university):
    ev = _random_evidence(university, 0.6, 11)
    sp = specialize(university, ev)
    kb = init_from_evidence(university, ev)
    for q, dlist in sp.lists.items():
        if dlist is None:
            continue
        for rv in referenced_rvs(dlist):
            assert not kb.is_observed(rv), f"{q}: specialized body references observed {rv}"


def test_idempotence(university):
    """Re-specializing the specialized lists against the same evidence is a
    fixed point (modulo the use-original marker for unchanged lists)."""
    ev = _random_evidence(university, 0.5, 29)
    sp = specialize(university, ev)
    for q, dlist in sp.lists.items():
        if dlist is None:
            continue
        again = spec_decision_list(dlist, q, university, ev)
        assert again is None or again == dlist


def _random_evidence(model, fraction, seed):
    rng = SplitMix64(seed)
    assignments = {}
    for rv in model.rvs:
        if rng.uniform() < fraction:
            states = model.range_of(rv.parrv)
            assignments[rv] = states[rng.next_below(len(states))]
    return Evidence(assignments)


def test_verify_equivalence_university(university):
    ev = _random_evidence(university, 0.5, 41)
    sp = specialize(university, ev)
    report = verify_equivalence(university, sp, n_trials=500, seed=1)
    assert report.ok, str(report)


@pytest.mark.parametrize("seed", range(8))
def test_verify_equivalence_random_models(seed):
    model = random_model(seed, n_pop=3, n_parrvs=4)
    ev = _random_evidence(model, 0.4, seed + 100)
    sp = specialize(model, ev)
    report = verify_equivalence(model, sp, n_trials=300, seed=seed)
    assert report.ok, f"model seed {seed}: {report}"


def test_specialize_records_wall_time(university):
    sp = specialize(university, Evidence({}))
    assert sp.t_spec >= 0.0
