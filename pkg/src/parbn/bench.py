"""Benchmark harness: times sampling with and without specialization and
emits CSV rows, each gated on an exact sequence-identity check.

Per repetition: run the sampler on the original program (t_sample_orig),
specialize (t_spec), rerun on the specialized program (t_sample_spec), and
require that both runs produced the identical draw stream before reporting
    speedup = t_sample_orig / (t_spec + t_sample_spec).

Runs are single-chain and single-threaded; timings wrap the sweep loop
only (program loading, graph building, and plan compilation stay outside).
At benchmark scale the identity gate compares a 64-bit rolling hash of the
(RV, state) draw stream plus the draw count, final KB states, and target
tallies; the acceptance tests additionally compare full streams on
desk-scale models.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, fields

import numpy as np

from .dependency import DependencyGraph, build_dependency_graph, topological_order
from .engine import CompiledProgram, compile_program, ensure_warm
from .generate import ScenarioSpec, scenario_evidence
from .model import Evidence, Model
from .sampling import GibbsResult, SamplerConfig, run_gibbs
from .specializer import specialize
from .statekb import init_from_evidence

CSV_COLUMNS = (
    "scenario",
    "param",
    "rv_count",
    "n_samples",
    "t_spec",
    "t_sample_spec",
    "t_sample_orig",
    "speedup",
    "overhead_fraction",
    "seed",
)


class SequenceIdentityError(AssertionError):
    """The specialized run diverged from the original run's draw stream."""


@dataclass(frozen=True)
class BenchReport:
    scenario: str
    param: str
    rv_count: int
    n_samples: int
    t_spec: float
    t_sample_spec: float
    t_sample_orig: float
    speedup: float
    overhead_fraction: float
    seed: int

    def row(self) -> list[str]:
        return [str(getattr(self, f.name)) for f in fields(self)]


def _check_identity(orig: GibbsResult, spec: GibbsResult, context: str) -> None:
    if (
        orig.n_draws != spec.n_draws
        or orig.stream_hash != spec.stream_hash
        or not np.array_equal(orig.final_states, spec.final_states)
    ):
        raise SequenceIdentityError(
            f"specialized run diverged from original ({context}): "
            f"draws {orig.n_draws}/{spec.n_draws}, "
            f"hash {orig.stream_hash:#x}/{spec.stream_hash:#x}"
        )
    if orig.stream is not None and spec.stream is not None:
        if not np.array_equal(orig.stream, spec.stream):
            raise SequenceIdentityError(f"draw streams differ ({context})")


def run_benchmark(
    model: Model,
    evidence: Evidence,
    n_samples: int,
    seed: int,
    scenario: str = "evidence",
    param: str = "",
    graph: DependencyGraph | None = None,
    compiled_orig: CompiledProgram | None = None,
    burn_in: int = 0,
) -> BenchReport:
    """One benchmark repetition; raises SequenceIdentityError on divergence."""
    ensure_warm()
    if graph is None:
        graph = build_dependency_graph(model)
    if compiled_orig is None:
        compiled_orig = compile_program(model)
    config = SamplerConfig(n_samples=n_samples, burn_in=burn_in, seed=seed)

    kb = init_from_evidence(model, evidence)
    res_orig = run_gibbs(kb, model, graph, config, targets=[], compiled=compiled_orig)

    sp = specialize(model, evidence)
    compiled_spec = compile_program(sp)
    kb = init_from_evidence(model, evidence)
    res_spec = run_gibbs(kb, sp, graph, config, targets=[], compiled=compiled_spec)

    _check_identity(res_orig, res_spec, f"{scenario}:{param} seed={seed}")

    t_spec = sp.t_spec
    total_spec = t_spec + res_spec.t_sample
    return BenchReport(
        scenario=scenario,
        param=param,
        rv_count=len(model.rvs),
        n_samples=n_samples,
        t_spec=t_spec,
        t_sample_spec=res_spec.t_sample,
        t_sample_orig=res_orig.t_sample,
        speedup=res_orig.t_sample / total_spec,
        overhead_fraction=t_spec / total_spec,
        seed=seed,
    )


def run_scenario(
    model: Model,
    scenario: ScenarioSpec,
    n_samples: int,
    reps: int,
    seed: int,
    graph: DependencyGraph | None = None,
    compiled_orig: CompiledProgram | None = None,
) -> list[BenchReport]:
    """reps repetitions, each with fresh scenario evidence and its own seed."""
    if graph is None:
        graph = build_dependency_graph(model)
    if compiled_orig is None:
        compiled_orig = compile_program(model)
    topo = topological_order(graph)
    out = []
    for rep in range(reps):
        rep_seed = seed + rep
        evidence = scenario_evidence(model, scenario, rep_seed, topo)
        out.append(
            run_benchmark(
                model,
                evidence,
                n_samples,
                rep_seed,
                scenario=scenario.kind,
                param=scenario.param,
                graph=graph,
                compiled_orig=compiled_orig,
            )
        )
    return out


def write_csv(path: str, reports: list[BenchReport]) -> None:
    """Append rows, writing the header only when the file is new/empty."""
    need_header = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if need_header:
            writer.writerow(CSV_COLUMNS)
        for rep in reports:
            writer.writerow(rep.row())


def read_csv(path: str) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
