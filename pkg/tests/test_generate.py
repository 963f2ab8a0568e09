"""Synthetic model/evidence generation: sizes, determinism, scenarios."""

import pytest

from parbn.generate import ScenarioSpec, generate_files, scenario_evidence, university_model
from parbn.model import validate_model
from parbn.parser import parse_evidence, parse_model


def test_small_university_size():
    model = university_model(2, 5)
    assert len(model.rvs) == 19


def test_bench_scale_size():
    model = university_model(50, 40)
    assert len(model.rvs) == 40 + 50 + 2000 + 50  # level + iq + grade + graduates


def test_honors_layer_adds_one_parrv_per_student():
    base = university_model(10, 10)
    deep = university_model(10, 10, honors=True)
    assert len(deep.rvs) == len(base.rvs) + 10
    assert "honors" in deep.parrvs


def test_generated_models_validate():
    for s, c, h in ((1, 1, False), (3, 7, False), (5, 5, True)):
        report = validate_model(university_model(s, c, h))
        assert report.ok, str(report)


def test_generation_is_deterministic(tmp_path):
    sc = ScenarioSpec("missing", fraction=0.3)
    p1 = generate_files(4, 6, sc, seed=9, prefix=str(tmp_path / "one"))
    p2 = generate_files(4, 6, sc, seed=9, prefix=str(tmp_path / "two"))
    assert open(p1[0]).read() == open(p2[0]).read()
    assert open(p1[1]).read() == open(p2[1]).read()
    p3 = generate_files(4, 6, sc, seed=10, prefix=str(tmp_path / "three"))
    assert open(p1[1]).read() != open(p3[1]).read()


def test_missing_scenario_fraction():
    model = university_model(5, 8)
    n = len(model.rvs)
    for f in (0.1, 0.25, 0.5):
        ev = scenario_evidence(model, ScenarioSpec("missing", fraction=f), seed=3)
        assert len(ev.assignments) == n - round(f * n)
        # values lie in range
        for rv, state in ev.assignments.items():
            assert state in model.range_of(rv.parrv)


def test_class_scenario_unobserves_whole_parrv():
    model = university_model(4, 6)
    ev = scenario_evidence(model, ScenarioSpec("class", class_parrv="graduates"), seed=3)
    observed = set(ev.assignments)
    for rv in model.rvs:
        if rv.parrv == "graduates":
            assert rv not in observed
        else:
            assert rv in observed


def test_class_scenario_rejects_roots():
    model = university_model(4, 6)
    with pytest.raises(ValueError, match="root"):
        scenario_evidence(model, ScenarioSpec("class", class_parrv="iq"), seed=3)


def test_scenario_parse():
    sc = ScenarioSpec.parse("missing:0.15")
    assert sc.kind == "missing" and sc.fraction == 0.15 and sc.param == "0.15"
    sc = ScenarioSpec.parse("class:graduates")
    assert sc.kind == "class" and sc.class_parrv == "graduates"
    with pytest.raises(ValueError):
        ScenarioSpec.parse("bogus:1")
    with pytest.raises(ValueError):
        ScenarioSpec("missing", fraction=1.5)


def test_generated_files_parse_back(tmp_path):
    sc = ScenarioSpec("class", class_parrv="grade")
    model_path, ev_path = generate_files(3, 4, sc, seed=1, prefix=str(tmp_path / "m"))
    model = parse_model(open(model_path).read(), model_path)
    ev = parse_evidence(open(ev_path).read(), model, ev_path)
    assert validate_model(model).ok
    assert all(rv.parrv != "grade" for rv in ev.assignments)
