"""The state KB: current value of every ground RV, split into a static part
(the evidence, frozen at init) and a dynamic part (the unobserved RVs the
sampler keeps rewriting).

States are stored as a dense int array indexed by the canonical RV order,
so reads and writes in the sampler's inner loop are O(1).  Unobserved RVs
start out with an explicit "uninitialized" marker so that reads before
forward initialization fail loudly instead of returning an arbitrary state.
"""

from __future__ import annotations

import numpy as np

from .model import Evidence, GroundRV, Literal, Model

UNINITIALIZED = -1


class KBError(Exception):
    pass


class UninitializedRead(KBError):
    pass


class ObservedWrite(KBError):
    pass


class StateKB:
    """Single-owner mutable store; one sampling chain per instance."""

    __slots__ = ("model", "states", "observed", "_index", "_codes", "_ranges")

    def __init__(self, model: Model):
        self.model = model
        n = len(model.rvs)
        self.states = np.full(n, UNINITIALIZED, dtype=np.int64)
        self.observed = np.zeros(n, dtype=bool)
        self._index = model.rv_index
        self._codes = model.state_codes
        self._ranges = {name: decl.range for name, decl in model.parrvs.items()}

    def _idx(self, rv: GroundRV) -> int:
        idx = self._index.get(rv)
        if idx is None:
            raise KeyError(f"unknown RV {rv}")
        return idx

    def get_state(self, rv: GroundRV) -> str:
        code = self.states[self._idx(rv)]
        if code == UNINITIALIZED:
            raise UninitializedRead(f"{rv} read before initialization")
        return self._ranges[rv.parrv][code]

    def set_state(self, rv: GroundRV, state: str) -> None:
        idx = self._idx(rv)
        if self.observed[idx]:
            raise ObservedWrite(f"{rv} is observed; its state is part of the evidence")
        code = self._codes[rv.parrv].get(state)
        if code is None:
            raise KBError(f"state {state!r} not in range of {rv.parrv}")
        self.states[idx] = code

    def is_observed(self, rv: GroundRV) -> bool:
        return bool(self.observed[self._idx(rv)])

    def is_initialized(self, rv: GroundRV) -> bool:
        return self.states[self._idx(rv)] != UNINITIALIZED

    def truth_of(self, lit: Literal) -> bool:
        """Truth of a ground state literal against the current states.

        A literal over a non-existent RV is false when positive and true
        when negated.
        """
        idx = self._index.get(GroundRV(lit.predicate, lit.args))
        if idx is None:
            return not lit.positive
        code = self.states[idx]
        if code == UNINITIALIZED:
            raise UninitializedRead(
                f"{GroundRV(lit.predicate, lit.args)} read before initialization"
            )
        want = self._codes[lit.predicate].get(lit.state)
        holds = want is not None and code == want
        return holds if lit.positive else not holds

    def dump(self) -> str:
        """One `rv = state` line per RV in canonical order (`?` = uninitialized)."""
        lines = []
        for rv, idx in self._index.items():
            code = self.states[idx]
            text = "?" if code == UNINITIALIZED else self._ranges[rv.parrv][code]
            lines.append(f"{rv} = {text}")
        return "\n".join(lines) + "\n"

    def copy(self) -> StateKB:
        kb = StateKB.__new__(StateKB)
        kb.model = self.model
        kb.states = self.states.copy()
        kb.observed = self.observed.copy()
        kb._index = self._index
        kb._codes = self._codes
        kb._ranges = self._ranges
        return kb


def init_from_evidence(model: Model, evidence: Evidence) -> StateKB:
    """Fresh KB with observed RVs pinned to their evidence values and every
    unobserved RV left uninitialized (pending forward sampling)."""
    kb = StateKB(model)
    for rv, state in evidence.assignments.items():
        idx = kb._idx(rv)
        code = kb._codes[rv.parrv].get(state)
        if code is None:
            raise KBError(f"evidence state {state!r} not in range of {rv.parrv}")
        kb.states[idx] = code
        kb.observed[idx] = True
    return kb
