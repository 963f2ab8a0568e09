"""Command-line front end.

Subcommands: validate, specialize, sample, gen, bench, report.
Exit codes: 0 ok, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .bench import run_benchmark, run_scenario, write_csv
from .dependency import build_dependency_graph, check_acyclic
from .generate import ScenarioSpec, generate_files
from .model import Evidence, GroundRV, Model, validate_model
from .parser import ParseError, parse_evidence, parse_model, serialize_program
from .report import render_report
from .sampling import SamplerConfig, run_gibbs
from .specializer import specialize
from .statekb import init_from_evidence

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class ValidationFailure(Exception):
    pass


def _fail(code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _load_model(path: str) -> Model:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(EXIT_RUNTIME, f"cannot read {path}: {exc}")
    try:
        return parse_model(text, path)
    except ParseError as exc:
        _fail(EXIT_VALIDATION, str(exc))


def _load_evidence(path: str, model: Model) -> Evidence:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(EXIT_RUNTIME, f"cannot read {path}: {exc}")
    try:
        return parse_evidence(text, model, path)
    except ParseError as exc:
        _fail(EXIT_VALIDATION, str(exc))


def _validated(model: Model) -> None:
    report = validate_model(model)
    if not report.ok:
        _fail(EXIT_VALIDATION, str(report))
    cycle = check_acyclic(build_dependency_graph(model))
    if cycle is not None:
        _fail(EXIT_VALIDATION, "dependency cycle: " + " -> ".join(str(rv) for rv in cycle))


def _parse_rv(text: str, model: Model) -> GroundRV:
    name, _, rest = text.partition("(")
    params: tuple[str, ...] = ()
    if rest:
        if not rest.endswith(")"):
            _fail(EXIT_RUNTIME, f"bad RV syntax {text!r}")
        params = tuple(p.strip() for p in rest[:-1].split(",") if p.strip())
    rv = GroundRV(name.strip(), params)
    if not model.has_rv(rv):
        _fail(EXIT_RUNTIME, f"unknown target RV {text!r}")
    return rv


@click.group()
def main() -> None:
    """Parameterized Bayesian networks: Gibbs sampling with an
    evidence-driven decision-list specializer."""


@main.command()
@click.argument("model_path", metavar="MODEL")
def validate(model_path: str) -> None:
    """Check a model file: well-formedness and acyclicity."""
    model = _load_model(model_path)
    _validated(model)
    n = len(model.rvs)
    click.echo(f"ok: {len(model.parrvs)} parRVs, {n} ground RVs, acyclic")


@main.command(name="specialize")
@click.argument("model_path", metavar="MODEL")
@click.argument("evidence_path", metavar="EVIDENCE")
@click.option("-o", "--out", "out_path", required=True, help="output .pbn path")
def specialize_cmd(model_path: str, evidence_path: str, out_path: str) -> None:
    """Specialize all decision lists against an evidence file."""
    model = _load_model(model_path)
    _validated(model)
    evidence = _load_evidence(evidence_path, model)
    sp = specialize(model, evidence)
    try:
        Path(out_path).write_text(serialize_program(sp), encoding="utf-8")
    except OSError as exc:
        _fail(EXIT_RUNTIME, f"cannot write {out_path}: {exc}")
    before = sum(
        len(model.cpds[q.parrv]) for q in sp.lists
    )
    after = sp.clause_count()
    n_spec = sum(1 for v in sp.lists.values() if v is not None)
    click.echo(
        f"t_spec: {sp.t_spec:.6f}s; queries: {len(sp.lists)} ({n_spec} specialized, "
        f"{len(sp.lists) - n_spec} unchanged); clauses: {before} -> {after}"
    )


@main.command()
@click.argument("model_path", metavar="MODEL")
@click.argument("evidence_path", metavar="EVIDENCE")
@click.option("-t", "--target", "targets", multiple=True, required=True, help="target RV, e.g. grade(s1,c1)")
@click.option("-n", "n_samples", type=int, default=10000, show_default=True)
@click.option("--burn-in", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--specialize", "use_spec", is_flag=True, help="specialize before sampling")
def sample(model_path, evidence_path, targets, n_samples, burn_in, seed, use_spec) -> None:
    """Estimate marginals of target RVs by Gibbs sampling."""
    model = _load_model(model_path)
    _validated(model)
    evidence = _load_evidence(evidence_path, model)
    rvs = [_parse_rv(t, model) for t in targets]
    graph = build_dependency_graph(model)
    program = model
    if use_spec:
        program = specialize(model, evidence)
        click.echo(f"t_spec: {program.t_spec:.6f}s", err=True)
    kb = init_from_evidence(model, evidence)
    try:
        result = run_gibbs(kb, program, graph, SamplerConfig(n_samples, burn_in, seed), rvs)
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"sampling failed: {exc}")
    click.echo(f"t_sample: {result.t_sample:.6f}s", err=True)
    for est in result.estimates:
        for state in model.range_of(est.rv.parrv):
            click.echo(f"{est.rv} {state} {est.estimate(state):.6f}")


@main.command()
@click.option("--students", type=int, required=True)
@click.option("--courses", type=int, required=True)
@click.option("--scenario", "scenario_text", required=True, help="missing:<f> or class:<parrv>")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", "prefix", required=True, help="output path prefix")
@click.option("--honors", is_flag=True, help="add the honors layer (deeper model)")
def gen(students, courses, scenario_text, seed, prefix, honors) -> None:
    """Generate a scaled university model plus scenario evidence."""
    try:
        scenario = ScenarioSpec.parse(scenario_text)
        model_path, ev_path = generate_files(students, courses, scenario, seed, prefix, honors)
    except (ValueError, OSError) as exc:
        _fail(EXIT_RUNTIME, str(exc))
    click.echo(f"wrote {model_path} and {ev_path}")


@main.command()
@click.argument("model_path", metavar="MODEL")
@click.argument("ev_or_scenario", metavar="EVIDENCE|missing:<f>|class:<parrv>")
@click.option("-n", "n_samples", type=int, default=10000, show_default=True)
@click.option("--reps", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", "csv_path", required=True, help="output CSV (append-safe)")
@click.option("--plot/--no-plot", default=True, show_default=True, help="render figures next to the CSV")
def bench(model_path, ev_or_scenario, n_samples, reps, seed, csv_path, plot) -> None:
    """Benchmark sampling with vs. without specialization.

    Every row passes an exact sequence-identity check before it is
    reported.  EVIDENCE may be a .ev file or a scenario spec; scenario
    repetitions redraw the evidence, evidence-file repetitions reseed only.
    """
    model = _load_model(model_path)
    _validated(model)
    try:
        if ":" in ev_or_scenario and ev_or_scenario.split(":", 1)[0] in ("missing", "class"):
            scenario = ScenarioSpec.parse(ev_or_scenario)
            reports = run_scenario(model, scenario, n_samples, reps, seed)
        else:
            evidence = _load_evidence(ev_or_scenario, model)
            stem = Path(ev_or_scenario).name
            reports = [
                run_benchmark(model, evidence, n_samples, seed + rep, scenario="evidence", param=stem)
                for rep in range(reps)
            ]
    except Exception as exc:
        _fail(EXIT_RUNTIME, f"benchmark failed: {exc}")
    write_csv(csv_path, reports)
    for r in reports:
        click.echo(
            f"{r.scenario}:{r.param} seed={r.seed} speedup={r.speedup:.2f} "
            f"overhead={r.overhead_fraction:.3f} (orig {r.t_sample_orig:.3f}s, "
            f"spec {r.t_spec:.3f}+{r.t_sample_spec:.3f}s)"
        )
    if plot:
        for path in render_report(csv_path):
            click.echo(f"figure: {path}")


@main.command(name="report")
@click.argument("csv_path", metavar="CSV")
@click.option("-o", "--out-dir", default=None, help="directory for figures (default: beside the CSV)")
def report_cmd(csv_path, out_dir) -> None:
    """Render figures from an accumulated bench CSV."""
    try:
        written = render_report(csv_path, out_dir)
    except OSError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    if not written:
        click.echo("no figures rendered (empty or single-group CSV)", err=True)
    for path in written:
        click.echo(f"figure: {path}")


if __name__ == "__main__":
    main()
