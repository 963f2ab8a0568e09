"""Ground parent/child graph: acyclicity checking, topological order, and
the child sets Gibbs needs for Markov-blanket resampling.

Parents are collected from the compact grounding of every clause body of a
query's decision list, ignoring which clauses are reachable.  That is a
conservative over-approximation: extra edges only add constant factors to
the Gibbs full conditional, which cancel on normalization.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .evaluator import head_bindings
from .model import (
    And,
    BodyFormula,
    CountConstraint,
    GroundRV,
    Literal,
    Model,
    Or,
    cpd_queries_for,
)
from .specializer import ground_body


class CyclicModelError(Exception):
    def __init__(self, cycle: list[GroundRV]):
        super().__init__("dependency cycle: " + " -> ".join(str(rv) for rv in cycle))
        self.cycle = cycle


@dataclass
class DependencyGraph:
    model: Model
    parents: dict[GroundRV, set[GroundRV]]
    children: dict[GroundRV, set[GroundRV]]

    def dump(self) -> str:
        """`parent -> child` edge lines in canonical order, for debugging."""
        lines = []
        for parent in self.model.rvs:
            for child in sorted(self.children[parent], key=self.model.rv_index.get):
                lines.append(f"{parent} -> {child}")
        return "\n".join(lines) + ("\n" if lines else "")


def _collect_rvs(body: BodyFormula, model: Model, out: set[GroundRV]) -> None:
    if isinstance(body, Literal):
        if body.is_ground():
            rv = body.rv()
            if model.has_rv(rv):
                out.add(rv)
    elif isinstance(body, CountConstraint):
        for d in body.disjuncts:
            _collect_rvs(d, model, out)
    elif isinstance(body, (And, Or)):
        for p in body.parts:
            _collect_rvs(p, model, out)


def build_dependency_graph(model: Model) -> DependencyGraph:
    """parents(rv) = ground RVs referenced by the grounding of any clause
    body of rv's decision list (head bound to rv)."""
    parents: dict[GroundRV, set[GroundRV]] = {rv: set() for rv in model.rvs}
    children: dict[GroundRV, set[GroundRV]] = {rv: set() for rv in model.rvs}
    for name in model.parrvs:
        dlist = model.cpds[name]
        for q in cpd_queries_for(name, model):
            refs: set[GroundRV] = set()
            for clause in dlist.clauses:
                bind = head_bindings(clause.head_params, q)
                if bind is None:
                    continue
                grounded = ground_body(clause.body, model, bind)
                _collect_rvs(grounded, model, refs)
            parents[q] = refs
            for p in refs:
                children[p].add(q)
    return DependencyGraph(model, parents, children)


def check_acyclic(graph: DependencyGraph) -> list[GroundRV] | None:
    """None when acyclic; otherwise a concrete cycle [a, ..., a]."""
    WHITE, GRAY, BLACK = 0, 1, 2
    index = graph.model.rv_index
    color = {rv: WHITE for rv in graph.model.rvs}
    for start in graph.model.rvs:
        if color[start] != WHITE:
            continue
        color[start] = GRAY
        path = [start]
        iters = [iter(sorted(graph.children[start], key=index.get))]
        while iters:
            advanced = False
            for child in iters[-1]:
                if color[child] == GRAY:
                    i = path.index(child)
                    return path[i:] + [child]
                if color[child] == WHITE:
                    color[child] = GRAY
                    path.append(child)
                    iters.append(iter(sorted(graph.children[child], key=index.get)))
                    advanced = True
                    break
            if not advanced:
                color[path.pop()] = BLACK
                iters.pop()
    return None


def topological_order(graph: DependencyGraph) -> list[GroundRV]:
    """Every RV after all its parents; ties broken by canonical RV order."""
    index = graph.model.rv_index
    indegree = {rv: len(graph.parents[rv]) for rv in graph.model.rvs}
    ready = [index[rv] for rv, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    rvs = graph.model.rvs
    out: list[GroundRV] = []
    while ready:
        rv = rvs[heapq.heappop(ready)]
        out.append(rv)
        for child in graph.children[rv]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, index[child])
    if len(out) != len(rvs):
        cycle = check_acyclic(graph)
        raise CyclicModelError(cycle or [])
    return out


def children_of(graph: DependencyGraph, rv: GroundRV) -> set[GroundRV]:
    try:
        return graph.children[rv]
    except KeyError:
        raise KeyError(f"unknown RV {rv}") from None
