"""Synthetic model and evidence generation for tests and benchmarks.

The family mirrors a university schema scaled over student/course
population sizes: course levels and student IQs feed per-(student, course)
grades, and per-student graduation depends on grades through an
existential literal and a count constraint.  An optional honors layer adds
a second count-constraint parRV (deeper network, heavier bodies).  All
distributions are strictly positive, so Gibbs chains are ergodic.

Evidence is drawn by forward-sampling one joint state and revealing a
subset of it: either a random fraction (missing-data scenario) or
everything except one class parRV (classification scenario).
"""

from __future__ import annotations

from dataclasses import dataclass

from .dependency import build_dependency_graph, topological_order
from .model import Evidence, Model
from .parser import parse_model, serialize_evidence
from .rng import SplitMix64
from .sampling import forward_sample
from .statekb import init_from_evidence


@dataclass(frozen=True)
class ScenarioSpec:
    """missing:<f> keeps a random fraction f of RVs unobserved;
    class:<parrv> keeps every grounding of one parRV unobserved."""

    kind: str  # "missing" | "class"
    fraction: float | None = None
    class_parrv: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "missing":
            if self.fraction is None or not (0.0 < self.fraction < 1.0):
                raise ValueError("missing scenario needs a fraction in (0, 1)")
        elif self.kind == "class":
            if not self.class_parrv:
                raise ValueError("class scenario needs a parRV name")
        else:
            raise ValueError(f"unknown scenario kind {self.kind!r}")

    @property
    def param(self) -> str:
        if self.kind == "missing":
            return f"{self.fraction:g}"
        return str(self.class_parrv)

    @classmethod
    def parse(cls, text: str) -> "ScenarioSpec":
        kind, _, arg = text.partition(":")
        if kind == "missing":
            return cls("missing", fraction=float(arg))
        if kind == "class":
            return cls("class", class_parrv=arg)
        raise ValueError(f"bad scenario {text!r}; expected missing:<f> or class:<parrv>")


def university_text(students: int, courses: int, honors: bool = False) -> str:
    """Deterministic source text for the scaled university model."""
    if students < 1 or courses < 1:
        raise ValueError("sizes must be >= 1")
    sts = ", ".join(f"s{i}" for i in range(1, students + 1))
    crs = ", ".join(f"c{i}" for i in range(1, courses + 1))
    a_low = max(2, courses // 8)
    lines = [
        f"population student = {{ {sts} }}.",
        f"population course = {{ {crs} }}.",
        "",
        "parrv level(course) states { intro, advanced }.",
        "parrv iq(student) states { high, low }.",
        "parrv grade(student, course) states { a, b, c }.",
        "parrv graduates(student) states { yes, no }.",
    ]
    if honors:
        lines.append("parrv honors(student) states { yes, no }.")
    lines += [
        "",
        "cpd level(_) ~ [intro:0.55, advanced:0.45].",
        "cpd iq(_) ~ [high:0.5, low:0.5].",
        "cpd grade(S,C) ~ [a:0.55, b:0.4, c:0.05] :- iq(S,high), level(C,intro).",
        "cpd grade(S,C) ~ [a:0.4, b:0.5, c:0.1] :- iq(S,high), level(C,advanced).",
        "cpd grade(S,C) ~ [a:0.35, b:0.55, c:0.1] :- iq(S,low), level(C,intro).",
        "cpd grade(_,_) ~ [a:0.2, b:0.6, c:0.2].",
        f"cpd graduates(S) ~ [yes:0.35, no:0.65] :- count(C, grade(S,C,a)) < {a_low}.",
        "cpd graduates(S) ~ [yes:0.55, no:0.45] :- grade(S,_,c).",
        "cpd graduates(_) ~ [yes:0.9, no:0.1].",
    ]
    if honors:
        a_high = max(3, courses // 4)
        lines += [
            f"cpd honors(S) ~ [yes:0.7, no:0.3] :- count(C, grade(S,C,a)) >= {a_high}, graduates(S,yes).",
            f"cpd honors(S) ~ [yes:0.3, no:0.7] :- count(C, grade(S,C,a)) >= {a_high}.",
            "cpd honors(_) ~ [yes:0.05, no:0.95].",
        ]
    return "\n".join(lines) + "\n"


def university_model(students: int, courses: int, honors: bool = False) -> Model:
    return parse_model(university_text(students, courses, honors), "<generated>")


def full_joint_sample(model: Model, rng: SplitMix64, topo=None) -> dict:
    """One forward sample of every RV, as {GroundRV: state}."""
    kb = init_from_evidence(model, Evidence({}))
    if topo is None:
        topo = topological_order(build_dependency_graph(model))
    forward_sample(kb, model, topo, rng)
    return {rv: kb.get_state(rv) for rv in model.rvs}


def _is_root_parrv(model: Model, name: str) -> bool:
    from .model import TrueF

    return all(isinstance(c.body, TrueF) for c in model.cpds[name].clauses)


def scenario_evidence(model: Model, scenario: ScenarioSpec, seed: int, topo=None) -> Evidence:
    """Draw one joint state and reveal the scenario's observed part."""
    rng = SplitMix64(seed)
    joint = full_joint_sample(model, rng, topo)
    rvs = list(model.rvs)
    if scenario.kind == "missing":
        n_unobs = round(scenario.fraction * len(rvs))
        order = list(range(len(rvs)))
        # Fisher-Yates with the deterministic stream.
        for i in range(len(order) - 1, 0, -1):
            j = rng.next_below(i + 1)
            order[i], order[j] = order[j], order[i]
        unobserved = {rvs[i] for i in order[:n_unobs]}
    else:
        name = scenario.class_parrv
        if name not in model.parrvs:
            raise ValueError(f"unknown class parRV {name!r}")
        if _is_root_parrv(model, name):
            raise ValueError(f"class parRV {name!r} is a root; prediction of roots is not benchmarked")
        unobserved = {rv for rv in rvs if rv.parrv == name}
    return Evidence({rv: joint[rv] for rv in rvs if rv not in unobserved})


def generate_files(
    students: int,
    courses: int,
    scenario: ScenarioSpec,
    seed: int,
    prefix: str,
    honors: bool = False,
) -> tuple[str, str]:
    """Write <prefix>.pbn and <prefix>.ev; byte-identical for equal inputs."""
    text = university_text(students, courses, honors)
    model = parse_model(text, f"{prefix}.pbn")
    evidence = scenario_evidence(model, scenario, seed)
    model_path = f"{prefix}.pbn"
    ev_path = f"{prefix}.ev"
    with open(model_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(ev_path, "w", encoding="utf-8") as fh:
        fh.write(serialize_evidence(evidence))
    return model_path, ev_path
