"""Benchmark harness rows, CSV discipline, and the CLI surface."""

import csv
import os

import pytest
from click.testing import CliRunner

from parbn.bench import CSV_COLUMNS, read_csv, run_benchmark, run_scenario, write_csv
from parbn.cli import main
from parbn.generate import ScenarioSpec, university_model, scenario_evidence
from parbn.parser import parse_evidence, parse_model, parse_specialized

from conftest import RAINWET, UNIVERSITY


@pytest.fixture(scope="module")
def bench_rows():
    model = university_model(6, 10)
    sc = ScenarioSpec("missing", fraction=0.3)
    return run_scenario(model, sc, n_samples=300, reps=2, seed=4)


def test_bench_report_fields(bench_rows):
    for r in bench_rows:
        assert r.scenario == "missing" and r.param == "0.3"
        assert r.rv_count == 6 * 10 + 6 + 10 + 6
        assert r.n_samples == 300
        assert r.t_spec >= 0 and r.t_sample_spec > 0 and r.t_sample_orig > 0
        assert r.speedup > 0
        assert r.speedup == pytest.approx(r.t_sample_orig / (r.t_spec + r.t_sample_spec))
        assert 0 <= r.overhead_fraction < 1
    assert bench_rows[0].seed != bench_rows[1].seed


def test_csv_append_safe(tmp_path, bench_rows):
    path = str(tmp_path / "out.csv")
    write_csv(path, bench_rows[:1])
    write_csv(path, bench_rows[1:])
    rows = read_csv(path)
    assert len(rows) == 2
    with open(path) as fh:
        header = fh.readline().strip()
    assert header == ",".join(CSV_COLUMNS)
    assert sum(1 for line in open(path) if line.startswith("scenario")) == 1


def test_evidence_file_benchmark(tmp_path):
    model = university_model(4, 6)
    ev = scenario_evidence(model, ScenarioSpec("missing", fraction=0.25), seed=8)
    rep = run_benchmark(model, ev, n_samples=200, seed=8)
    assert rep.scenario == "evidence"


# -- CLI -----------------------------------------------------------------------


@pytest.fixture()
def files(tmp_path):
    model_path = tmp_path / "uni.pbn"
    model_path.write_text(UNIVERSITY)
    ev_path = tmp_path / "uni.ev"
    ev_path.write_text("iq(s1)=high. level(c1)=intro. grade(s2,c2)=c.\n")
    return str(model_path), str(ev_path), tmp_path


def test_cli_validate_ok(files):
    model_path, _, _ = files
    result = CliRunner().invoke(main, ["validate", model_path])
    assert result.exit_code == 0, result.output
    assert "acyclic" in result.output


def test_cli_validate_missing_default(tmp_path):
    bad = UNIVERSITY.replace("cpd graduates(_) ~ [yes:0.9, no:0.1].\n", "")
    path = tmp_path / "bad.pbn"
    path.write_text(bad)
    result = CliRunner().invoke(main, ["validate", str(path)])
    assert result.exit_code == 1
    assert "not total" in result.output


def test_cli_validate_cycle(tmp_path):
    path = tmp_path / "cyclic.pbn"
    path.write_text(
        """
        population p = { x }.
        parrv a(p) states { t, f }.
        parrv b(p) states { t, f }.
        cpd a(P) ~ [t:0.9, f:0.1] :- b(P, t).
        cpd a(_) ~ [t:0.5, f:0.5].
        cpd b(P) ~ [t:0.9, f:0.1] :- a(P, t).
        cpd b(_) ~ [t:0.5, f:0.5].
        """
    )
    result = CliRunner().invoke(main, ["validate", str(path)])
    assert result.exit_code == 1
    assert "cycle" in result.output


def test_cli_specialize(files):
    model_path, ev_path, tmp_path = files
    out = str(tmp_path / "spec.pbn")
    result = CliRunner().invoke(main, ["specialize", model_path, ev_path, "-o", out])
    assert result.exit_code == 0, result.output
    assert "t_spec" in result.output and "clauses" in result.output
    sp = parse_specialized(open(out).read())
    assert sp.model == parse_model(UNIVERSITY)


def test_cli_specialize_empty_evidence_marks_unchanged(files, tmp_path):
    model_path, _, _ = files
    empty = tmp_path / "empty.ev"
    empty.write_text("")
    out = str(tmp_path / "spec0.pbn")
    result = CliRunner().invoke(main, ["specialize", model_path, str(empty), "-o", out])
    assert result.exit_code == 0, result.output
    text = open(out).read()
    assert "use_original" in text


def test_cli_sample_byte_identical_with_specialization(files):
    model_path, ev_path, _ = files
    base = ["sample", model_path, ev_path, "-t", "graduates(s1)", "-t", "iq(s2)",
            "-n", "2000", "--seed", "17"]
    r1 = CliRunner().invoke(main, base)
    r2 = CliRunner().invoke(main, base + ["--specialize"])
    assert r1.exit_code == 0 and r2.exit_code == 0
    assert r1.stdout == r2.stdout
    assert "t_spec" in r2.stderr


def test_cli_sample_observed_target_is_point_mass(files):
    model_path, ev_path, _ = files
    result = CliRunner().invoke(
        main, ["sample", model_path, ev_path, "-t", "iq(s1)", "-n", "50"]
    )
    assert result.exit_code == 0
    assert "iq(s1) high 1.000000" in result.stdout


def test_cli_sample_unknown_target(files):
    model_path, ev_path, _ = files
    result = CliRunner().invoke(main, ["sample", model_path, ev_path, "-t", "iq(s9)", "-n", "10"])
    assert result.exit_code == 2


def test_cli_gen_deterministic(tmp_path):
    args = ["gen", "--students", "3", "--courses", "4", "--scenario", "missing:0.2", "--seed", "5"]
    r1 = CliRunner().invoke(main, args + ["-o", str(tmp_path / "a")])
    r2 = CliRunner().invoke(main, args + ["-o", str(tmp_path / "b")])
    assert r1.exit_code == 0 and r2.exit_code == 0
    assert (tmp_path / "a.pbn").read_text() == (tmp_path / "b.pbn").read_text()
    assert (tmp_path / "a.ev").read_text() == (tmp_path / "b.ev").read_text()


def test_cli_gen_rejects_bad_scenario(tmp_path):
    result = CliRunner().invoke(
        main,
        ["gen", "--students", "2", "--courses", "2", "--scenario", "missing:1.5",
         "-o", str(tmp_path / "x")],
    )
    assert result.exit_code == 2


def test_cli_bench_writes_csv_and_figures(tmp_path):
    gen = CliRunner().invoke(
        main,
        ["gen", "--students", "4", "--courses", "6", "--scenario", "missing:0.3",
         "--seed", "3", "-o", str(tmp_path / "m")],
    )
    assert gen.exit_code == 0
    csv_path = str(tmp_path / "bench.csv")
    result = CliRunner().invoke(
        main,
        ["bench", str(tmp_path / "m.pbn"), "missing:0.3", "-n", "200", "--reps", "2",
         "--seed", "1", "-o", csv_path],
    )
    assert result.exit_code == 0, result.output
    rows = read_csv(csv_path)
    assert len(rows) == 2
    assert set(rows[0]) == set(CSV_COLUMNS)
    # a single-fraction CSV yields the runtime figure only
    assert "speedup" in result.output


def test_cli_bench_with_evidence_file(files, tmp_path):
    model_path, ev_path, _ = files
    csv_path = str(tmp_path / "bench_ev.csv")
    result = CliRunner().invoke(
        main, ["bench", model_path, ev_path, "-n", "150", "--reps", "1", "--seed", "2",
               "-o", csv_path, "--no-plot"],
    )
    assert result.exit_code == 0, result.output
    rows = read_csv(csv_path)
    assert rows[0]["scenario"] == "evidence"


def test_cli_report_renders_figures(tmp_path):
    model = university_model(4, 6)
    rows = []
    for f in (0.2, 0.4):
        rows += run_scenario(model, ScenarioSpec("missing", fraction=f), 150, 2, 1)
    csv_path = str(tmp_path / "multi.csv")
    write_csv(csv_path, rows)
    result = CliRunner().invoke(main, ["report", csv_path, "-o", str(tmp_path / "figs")])
    assert result.exit_code == 0, result.output
    written = [l for l in result.output.splitlines() if l.startswith("figure:")]
    assert written
    for line in written:
        assert os.path.exists(line.split(": ", 1)[1])
