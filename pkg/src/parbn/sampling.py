"""Sampling-based inference: forward initialization, Gibbs sweeps, marginal
estimation, and the exact-enumeration oracle used to test them.

One sweep resamples every unobserved RV once, in canonical order, from its
full conditional (its own CPD times the CPDs of its children, renormalized).
Each resample consumes exactly one uniform draw via inverse CDF, so the
stream of draws is comparable between the original and the specialized
program: equal CPD answers imply an identical (RV, state) draw sequence.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import engine
from .dependency import DependencyGraph, topological_order
from .engine import CompiledProgram, DeterministicConflict, compile_program
from .evaluator import EvaluationError, apply_cpd
from .model import CategoricalDistribution, Evidence, GroundRV, Model, cpd_queries_for
from .rng import SplitMix64
from .specializer import SpecializedProgram
from .statekb import StateKB, init_from_evidence

STATE_SPACE_GUARD = 10_000_000


@dataclass(frozen=True)
class SamplerConfig:
    """n_samples sweeps after burn_in; the scan order is always canonical."""

    n_samples: int
    burn_in: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")


@dataclass
class MarginalEstimate:
    rv: GroundRV
    counts: dict[str, int]
    n_samples: int

    def estimate(self, state: str) -> float:
        return self.counts[state] / self.n_samples

    def distribution(self) -> CategoricalDistribution:
        return CategoricalDistribution(
            tuple((s, c / self.n_samples) for s, c in self.counts.items())
        )


@dataclass
class GibbsResult:
    estimates: list[MarginalEstimate]
    t_sample: float
    n_draws: int
    stream_hash: int
    stream: np.ndarray | None = None
    final_states: np.ndarray | None = None


def draw_from(dist: CategoricalDistribution, rng: SplitMix64) -> str:
    """Inverse-CDF draw over entries in range order; exactly one uniform."""
    u = rng.uniform()
    cum = 0.0
    for state, p in dist.entries:
        cum += p
        if u < cum:
            return state
    return dist.entries[-1][0]


def forward_sample(kb: StateKB, program, topo_order: Sequence[GroundRV], rng: SplitMix64) -> None:
    """Initialize every unobserved RV, in topological order, by sampling its
    CPD given the (already set) states of its parents."""
    for rv in topo_order:
        if kb.is_observed(rv):
            continue
        dist = apply_cpd(kb, program, rv)
        kb.set_state(rv, draw_from(dist, rng))


def gibbs_psample(kb: StateKB, program, graph: DependencyGraph, rv: GroundRV) -> CategoricalDistribution:
    """Full conditional for one unobserved RV: prior CPD times each child's
    CPD at the child's current state, for every candidate state, normalized.
    The KB is restored before returning."""
    if kb.is_observed(rv):
        raise EvaluationError(f"{rv} is observed; it is never resampled")
    idx = kb.model.rv_index[rv]
    states = kb.model.range_of(rv.parrv)
    prior = apply_cpd(kb, program, rv)
    w = list(prior.probs)
    saved = kb.states[idx]
    children = sorted(graph.children[rv], key=kb.model.rv_index.get)
    for child in children:
        s_child = kb.states[kb.model.rv_index[child]]
        for u in range(len(states)):
            kb.states[idx] = u
            d = apply_cpd(kb, program, child)
            w[u] *= d.entries[s_child][1]
    kb.states[idx] = saved
    total = 0.0
    for x in w:
        total += x
    if total <= 0.0:
        raise DeterministicConflict(f"all full-conditional weights are zero for {rv}")
    return CategoricalDistribution(tuple((s, x / total) for s, x in zip(states, w)))


def _status_check(status: int, context: str) -> None:
    if status == -1:
        raise DeterministicConflict(f"all full-conditional weights are zero ({context})")
    if status == -2:
        raise EvaluationError(f"no clause applied during {context} (decision list not total)")


def run_gibbs(
    kb: StateKB,
    program,
    graph: DependencyGraph,
    config: SamplerConfig,
    targets: Sequence[GroundRV],
    capture_stream: bool = False,
    compiled: CompiledProgram | None = None,
) -> GibbsResult:
    """Run burn_in + n_samples Gibbs sweeps over the unobserved RVs.

    If the KB still has uninitialized RVs they are forward-sampled first
    (topological order), drawing from the same seeded stream.  Target
    states are tallied once per sweep after burn-in.  t_sample covers the
    sweep loop only.
    """
    model = kb.model
    for t in targets:
        if t not in model.rv_index:
            raise KeyError(f"unknown target RV {t}")
    engine.ensure_warm()
    cp = compiled if compiled is not None else compile_program(program, model)
    child_list, child_start, child_count = engine.build_child_arrays(model, graph.children)
    unobs = np.array(
        [i for i, rv in enumerate(model.rvs) if not kb.observed[i]], dtype=np.int64
    )
    rng_state = np.array([config.seed & ((1 << 64) - 1)], dtype=np.uint64)
    hash_state = np.array([engine._FNV_OFFSET], dtype=np.uint64)

    needs_forward = bool((kb.states[unobs] == -1).any()) if len(unobs) else False
    topo_unobs = np.array(
        [model.rv_index[rv] for rv in topological_order(graph) if not kb.observed[model.rv_index[rv]]],
        dtype=np.int64,
    ) if needs_forward else np.zeros(0, dtype=np.int64)

    n_draws = len(topo_unobs) + (config.burn_in + config.n_samples) * len(unobs)
    stream = np.zeros(2 * n_draws if capture_stream else 0, dtype=np.int64)

    st = kb.states
    targets_arr = np.array([model.rv_index[t] for t in targets], dtype=np.int64)
    tallies = np.zeros((len(targets), max(cp.max_k, 1)), dtype=np.int64)
    w = np.zeros(max(cp.max_k, 1), dtype=np.float64)

    status, cursor = engine.forward_pass(
        st, cp.k_arr, cp.code, cp.cl_body, cp.cl_dist, cp.q_start, cp.q_count,
        cp.dists, topo_unobs, rng_state, hash_state, stream, 0,
    )
    _status_check(status, "forward initialization")

    t0 = time.perf_counter()
    status, cursor = engine.gibbs_sweeps(
        st, cp.k_arr, cp.code, cp.cl_body, cp.cl_dist, cp.q_start, cp.q_count,
        cp.dists, child_list, child_start, child_count, unobs, targets_arr,
        tallies, config.n_samples, config.burn_in, rng_state, hash_state,
        stream, cursor, w,
    )
    t_sample = time.perf_counter() - t0
    _status_check(status, "Gibbs sweeps")

    estimates = []
    for ti, t in enumerate(targets):
        states = model.range_of(t.parrv)
        counts = {s: int(tallies[ti, ci]) for ci, s in enumerate(states)}
        estimates.append(MarginalEstimate(t, counts, config.n_samples))
    return GibbsResult(
        estimates=estimates,
        t_sample=t_sample,
        n_draws=n_draws,
        stream_hash=int(hash_state[0]),
        stream=stream.copy() if capture_stream else None,
        final_states=st.copy(),
    )


def exact_marginals(
    model: Model,
    evidence: Evidence,
    targets: Sequence[GroundRV],
) -> list[CategoricalDistribution]:
    """Exact conditionals by brute-force enumeration over all joint states
    of the unobserved RVs, each weighted by the product of every RV's CPD
    row.  Desk-scale oracle; guarded against state-space blowups."""
    kb = init_from_evidence(model, evidence)
    unobs = [(i, len(model.range_of(rv.parrv))) for i, rv in enumerate(model.rvs) if not kb.observed[i]]
    space = 1
    for _, k in unobs:
        space *= k
        if space > STATE_SPACE_GUARD:
            raise ValueError(f"joint state space exceeds guard ({STATE_SPACE_GUARD})")
    for t in targets:
        if t not in model.rv_index:
            raise KeyError(f"unknown target RV {t}")

    queries = [q for name in model.parrvs for q in cpd_queries_for(name, model)]
    qidx = [model.rv_index[q] for q in queries]
    target_idx = [model.rv_index[t] for t in targets]
    acc = [
        np.zeros(len(model.range_of(t.parrv)), dtype=np.float64) for t in targets
    ]

    for combo in itertools.product(*(range(k) for _, k in unobs)):
        for (i, _), c in zip(unobs, combo):
            kb.states[i] = c
        weight = 1.0
        for q, i in zip(queries, qidx):
            dist = apply_cpd(kb, model, q)
            weight *= dist.entries[kb.states[i]][1]
            if weight == 0.0:
                break
        if weight > 0.0:
            for ti, i in enumerate(target_idx):
                acc[ti][kb.states[i]] += weight

    out = []
    for ti, t in enumerate(targets):
        total = float(acc[ti].sum())
        if total <= 0.0:
            raise ValueError(f"evidence has zero probability; no conditional for {t}")
        states = model.range_of(t.parrv)
        out.append(CategoricalDistribution(tuple((s, float(acc[ti][ci] / total)) for ci, s in enumerate(states))))
    return out
