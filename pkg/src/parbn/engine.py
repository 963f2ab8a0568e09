"""Compiled execution engine for the sampling inner loop.

Decision lists are compiled, per CPD-query, into flat integer plans: every
literal becomes an (rv index, state code) test against a dense state
array, existential disjunctions and count constraints become explicit scan
segments.  One tight bytecode interpreter evaluates plans; it is JIT
compiled with numba when available and runs as plain Python otherwise
(bit-for-bit the same results, only slower).

Plan compilation is part of loading a program and sits outside all timed
regions, symmetrically for original and specialized programs.  The engine
consumes exactly one uniform draw per resampled RV through the same
SplitMix64 stream as the interpreted code paths, which is what makes draw
sequences comparable across programs and engines.

Body plan layout (int64 stream)::

    body      := n_components, component*            (n_components < 0 -> false)
    component := 0, unit | 1, or_len, n_alts, alt*
    alt       := alt_len, n_units, unit*
    unit      := 0, rv, code, positive               (literal test)
               | 1, seg_len, n_disj, offset, cmp, bound, (rv, code, positive)*
               | 2, value                            (constant)
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .evaluator import head_bindings
from .model import (
    And,
    BodyFormula,
    COMPARATORS,
    CountConstraint,
    FalseF,
    GroundRV,
    Literal,
    Model,
    Or,
    TrueF,
    cpd_queries_for,
)
from .specializer import SpecializedProgram, ground_body

try:  # pragma: no cover - exercised implicitly by every engine test
    import numba

    NUMBA_ENABLED = True

    def _jit(fn):
        return numba.njit(cache=True, fastmath=False)(fn)

except ImportError:  # pragma: no cover
    NUMBA_ENABLED = False

    def _jit(fn):
        return fn


U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_SH30 = U64(30)
_SH27 = U64(27)
_SH31 = U64(31)
_SH11 = U64(11)
_DOUBLE_UNIT = 1.0 / 9007199254740992.0
_FNV_OFFSET = U64(0xCBF29CE484222325)
_FNV_PRIME = U64(0x100000001B3)
_SH8 = U64(8)

_CMP_CODE = {c: i for i, c in enumerate(COMPARATORS)}


class EngineError(Exception):
    pass


class DeterministicConflict(EngineError):
    """All full-conditional weights were zero for some RV (non-ergodic)."""


@_jit
def rng_uniform(rng_state):
    rng_state[0] = rng_state[0] + _GAMMA
    z = rng_state[0]
    z = (z ^ (z >> _SH30)) * _MIX1
    z = (z ^ (z >> _SH27)) * _MIX2
    z = z ^ (z >> _SH31)
    return (z >> _SH11) * _DOUBLE_UNIT


@_jit
def _eval_unit(code, pos, st):
    tag = code[pos]
    if tag == 0:
        ok = st[code[pos + 1]] == code[pos + 2]
        if code[pos + 3] == 0:
            ok = not ok
        return ok, pos + 4
    elif tag == 1:
        seg_len = code[pos + 1]
        n = code[pos + 2]
        cnt = code[pos + 3]
        cmpc = code[pos + 4]
        bound = code[pos + 5]
        p = pos + 6
        for _ in range(n):
            hit = st[code[p]] == code[p + 1]
            if code[p + 2] == 0:
                hit = not hit
            if hit:
                cnt += 1
            p += 3
        if cmpc == 0:
            ok = cnt < bound
        elif cmpc == 1:
            ok = cnt <= bound
        elif cmpc == 2:
            ok = cnt == bound
        elif cmpc == 3:
            ok = cnt >= bound
        else:
            ok = cnt > bound
        return ok, pos + 2 + seg_len
    else:
        return code[pos + 1] == 1, pos + 2


@_jit
def _eval_body(code, off, st):
    n_comps = code[off]
    if n_comps < 0:
        return False
    pos = off + 1
    for _ in range(n_comps):
        tag = code[pos]
        if tag == 0:
            ok, pos = _eval_unit(code, pos + 1, st)
            if not ok:
                return False
        else:
            or_len = code[pos + 1]
            n_alts = code[pos + 2]
            p = pos + 3
            sat = False
            for _a in range(n_alts):
                alt_len = code[p]
                nu = code[p + 1]
                q = p + 2
                good = True
                for _u in range(nu):
                    ok, q = _eval_unit(code, q, st)
                    if not ok:
                        good = False
                        break
                if good:
                    sat = True
                    break
                p += 1 + alt_len
            if not sat:
                return False
            pos = pos + 2 + or_len
    return True


@_jit
def _apply_plan(code, cl_body, cl_dist, q_start, q_count, qid, st):
    start = q_start[qid]
    for row in range(start, start + q_count[qid]):
        if _eval_body(code, cl_body[row], st):
            return cl_dist[row]
    return -1


@_jit
def forward_pass(
    st,
    k_arr,
    code,
    cl_body,
    cl_dist,
    q_start,
    q_count,
    dists,
    topo_unobs,
    rng_state,
    hash_state,
    stream_out,
    cursor,
):
    capture = stream_out.shape[0] > 0
    for i in range(topo_unobs.shape[0]):
        rv = topo_unobs[i]
        off = _apply_plan(code, cl_body, cl_dist, q_start, q_count, rv, st)
        if off < 0:
            return -2, cursor
        k = k_arr[rv]
        u01 = rng_uniform(rng_state)
        pick = k - 1
        cum = 0.0
        for u in range(k):
            cum += dists[off + u]
            if u01 < cum:
                pick = u
                break
        st[rv] = pick
        h = hash_state[0] ^ ((U64(rv) << _SH8) | U64(pick))
        hash_state[0] = h * _FNV_PRIME
        if capture:
            stream_out[cursor] = rv
            stream_out[cursor + 1] = pick
            cursor += 2
    return 0, cursor


@_jit
def gibbs_sweeps(
    st,
    k_arr,
    code,
    cl_body,
    cl_dist,
    q_start,
    q_count,
    dists,
    child_list,
    child_start,
    child_count,
    unobs,
    targets,
    tallies,
    n_samples,
    burn_in,
    rng_state,
    hash_state,
    stream_out,
    cursor,
    w,
):
    capture = stream_out.shape[0] > 0
    for sweep in range(burn_in + n_samples):
        for ui in range(unobs.shape[0]):
            rv = unobs[ui]
            k = k_arr[rv]
            own = _apply_plan(code, cl_body, cl_dist, q_start, q_count, rv, st)
            if own < 0:
                return -2, cursor
            for u in range(k):
                w[u] = dists[own + u]
            saved = st[rv]
            for ci in range(child_count[rv]):
                child = child_list[child_start[rv] + ci]
                s_child = st[child]
                for u in range(k):
                    st[rv] = u
                    coff = _apply_plan(code, cl_body, cl_dist, q_start, q_count, child, st)
                    if coff < 0:
                        return -2, cursor
                    w[u] *= dists[coff + s_child]
            st[rv] = saved
            total = 0.0
            for u in range(k):
                total += w[u]
            if total <= 0.0:
                return -1, cursor
            u01 = rng_uniform(rng_state)
            pick = k - 1
            cum = 0.0
            for u in range(k):
                cum += w[u] / total
                if u01 < cum:
                    pick = u
                    break
            st[rv] = pick
            h = hash_state[0] ^ ((U64(rv) << _SH8) | U64(pick))
            hash_state[0] = h * _FNV_PRIME
            if capture:
                stream_out[cursor] = rv
                stream_out[cursor + 1] = pick
                cursor += 2
        if sweep >= burn_in:
            for t in range(targets.shape[0]):
                tallies[t, st[targets[t]]] += 1
    return 0, cursor


# -- plan compilation --------------------------------------------------------


def _flatten_and(f: BodyFormula, out: list[BodyFormula]) -> None:
    if isinstance(f, And):
        for p in f.parts:
            _flatten_and(p, out)
    else:
        out.append(f)


class _PlanBuilder:
    def __init__(self, model: Model):
        self.model = model
        self.index = model.rv_index
        self.codes = model.state_codes
        self.out: list[int] = []

    def literal_unit(self, lit: Literal) -> list[int]:
        idx = self.index.get((lit.predicate, lit.args))
        if idx is None:
            return [2, 0 if lit.positive else 1]
        code = self.codes[lit.predicate].get(lit.state)
        if code is None:
            return [2, 0 if lit.positive else 1]
        return [0, idx, code, 1 if lit.positive else 0]

    def count_unit(self, cc: CountConstraint) -> list[int]:
        if cc.goal is not None:
            raise EngineError(f"count {cc} not grounded before compilation")
        offset = cc.offset
        trips: list[int] = []
        n = 0
        for d in cc.disjuncts:
            if isinstance(d, TrueF):
                offset += 1
                continue
            if isinstance(d, FalseF):
                continue
            assert isinstance(d, Literal)
            idx = self.index.get((d.predicate, d.args))
            code = self.codes[d.predicate].get(d.state) if idx is not None else None
            if idx is None or code is None:
                # Non-existent RV: the positive test never holds.
                if not d.positive:
                    offset += 1
                continue
            trips += [idx, code, 1 if d.positive else 0]
            n += 1
        seg_len = 4 + 3 * n
        return [1, seg_len, n, offset, _CMP_CODE[cc.cmp], cc.bound] + trips

    def dnf(self, f: BodyFormula) -> list[list[list[int]]] | None:
        """Disjunctive normal form as alternation of unit lists; None means
        the formula is constant-true, [] constant-false."""
        if isinstance(f, TrueF):
            return None
        if isinstance(f, FalseF):
            return []
        if isinstance(f, Literal):
            return [[self.literal_unit(f)]]
        if isinstance(f, CountConstraint):
            return [[self.count_unit(f)]]
        if isinstance(f, Or):
            alts: list[list[list[int]]] = []
            for p in f.parts:
                sub = self.dnf(p)
                if sub is None:
                    return None
                alts.extend(sub)
            return alts
        if isinstance(f, And):
            combos: list[list[list[int]]] = [[]]
            for p in f.parts:
                sub = self.dnf(p)
                if sub is None:
                    continue
                if not sub:
                    return []
                combos = [c + alt for c in combos for alt in sub]
            return combos
        raise EngineError(f"cannot compile {f!r}")

    def emit_body(self, body: BodyFormula) -> int:
        """Append one body plan; returns its offset."""
        off = len(self.out)
        conjuncts: list[BodyFormula] = []
        _flatten_and(body, conjuncts)
        comps: list[list[int]] = []
        for c in conjuncts:
            if isinstance(c, TrueF):
                continue
            if isinstance(c, FalseF):
                self.out.append(-1)
                return off
            if isinstance(c, Literal):
                comps.append([0] + self.literal_unit(c))
            elif isinstance(c, CountConstraint):
                comps.append([0] + self.count_unit(c))
            elif isinstance(c, Or):
                alts = self.dnf(c)
                if alts is None:
                    continue
                if not alts:
                    self.out.append(-1)
                    return off
                encoded: list[int] = []
                trivially_true = False
                for alt in alts:
                    units = [i for u in alt for i in u]
                    if not alt:
                        trivially_true = True
                        break
                    encoded += [1 + len(units), len(alt)] + units
                if trivially_true:
                    continue
                comps.append([1, 1 + len(encoded), len(alts)] + encoded)
            else:
                raise EngineError(f"cannot compile conjunct {c!r}")
        self.out.append(len(comps))
        for comp in comps:
            self.out.extend(comp)
        return off


@dataclass
class CompiledProgram:
    """A program lowered to flat arrays, ready for the bytecode interpreter."""

    model: Model
    n_rvs: int
    k_arr: np.ndarray
    code: np.ndarray
    cl_body: np.ndarray
    cl_dist: np.ndarray
    q_start: np.ndarray
    q_count: np.ndarray
    dists: np.ndarray
    max_k: int

    def apply(self, states: np.ndarray, qid: int) -> np.ndarray:
        """Distribution (as a probs array) for one query id; used by tests
        to cross-check the interpreter against the reference evaluator."""
        off = _apply_plan(
            self.code, self.cl_body, self.cl_dist, self.q_start, self.q_count, qid, states
        )
        if off < 0:
            raise EngineError(f"no clause applies to query {self.model.rvs[qid]}")
        k = self.k_arr[qid]
        return self.dists[off : off + k]


def compile_program(program: Model | SpecializedProgram, model: Model | None = None) -> CompiledProgram:
    """Lower a model or specialized program to per-query plans.

    For every CPD-query the decision list (or per-query ground list) is
    head-bound, compact-grounded, and encoded; specialized programs simply
    produce shorter plans.
    """
    if model is None:
        model = program.model if isinstance(program, SpecializedProgram) else program
    assert model is not None
    builder = _PlanBuilder(model)
    n_rvs = len(model.rvs)
    k_arr = np.zeros(n_rvs, dtype=np.int64)
    q_start = np.zeros(n_rvs, dtype=np.int64)
    q_count = np.zeros(n_rvs, dtype=np.int64)
    cl_body: list[int] = []
    cl_dist: list[int] = []
    dists: list[float] = []
    max_k = 0

    specialized = program if isinstance(program, SpecializedProgram) else None
    for name in model.parrvs:
        k = len(model.range_of(name))
        max_k = max(max_k, k)
        for q in cpd_queries_for(name, model):
            qid = model.rv_index[q]
            k_arr[qid] = k
            if specialized is not None:
                dlist = specialized.decision_list_for(q)
            else:
                dlist = model.cpds[name]
            q_start[qid] = len(cl_body)
            rows = 0
            for clause in dlist.clauses:
                bind = head_bindings(clause.head_params, q)
                if bind is None:
                    continue
                grounded = ground_body(clause.body, model, bind)
                cl_body.append(builder.emit_body(grounded))
                cl_dist.append(len(dists))
                dists.extend(clause.distribution.probs)
                rows += 1
            q_count[qid] = rows
    return CompiledProgram(
        model=model,
        n_rvs=n_rvs,
        k_arr=k_arr,
        code=np.array(builder.out, dtype=np.int64),
        cl_body=np.array(cl_body, dtype=np.int64),
        cl_dist=np.array(cl_dist, dtype=np.int64),
        q_start=q_start,
        q_count=q_count,
        dists=np.array(dists, dtype=np.float64),
        max_k=max_k,
    )


def build_child_arrays(model: Model, children: dict[GroundRV, set[GroundRV]]):
    """Flattened child adjacency in canonical order: (list, start, count)."""
    index = model.rv_index
    n = len(model.rvs)
    child_start = np.zeros(n, dtype=np.int64)
    child_count = np.zeros(n, dtype=np.int64)
    flat: list[int] = []
    for rv in model.rvs:
        idx = index[rv]
        child_start[idx] = len(flat)
        kids = sorted(index[c] for c in children.get(rv, ()))
        child_count[idx] = len(kids)
        flat.extend(kids)
    return np.array(flat, dtype=np.int64), child_start, child_count


_warmed = False


def ensure_warm() -> None:
    """Force JIT compilation on a toy problem so timed regions never pay
    for it.  No-op after the first call (and cheap without numba)."""
    global _warmed
    if _warmed:
        return
    st = np.zeros(2, dtype=np.int64)
    k_arr = np.array([2, 2], dtype=np.int64)
    # one query with a single unconditional clause each
    code = np.array([0, 0], dtype=np.int64)
    cl_body = np.array([0, 1], dtype=np.int64)
    cl_dist = np.array([0, 2], dtype=np.int64)
    q_start = np.array([0, 1], dtype=np.int64)
    q_count = np.array([1, 1], dtype=np.int64)
    dists = np.array([0.5, 0.5, 0.3, 0.7], dtype=np.float64)
    child_list = np.array([1], dtype=np.int64)
    child_start = np.array([0, 1], dtype=np.int64)
    child_count = np.array([1, 0], dtype=np.int64)
    unobs = np.array([0, 1], dtype=np.int64)
    targets = np.array([0], dtype=np.int64)
    tallies = np.zeros((1, 2), dtype=np.int64)
    rng_state = np.array([1], dtype=np.uint64)
    hash_state = np.array([_FNV_OFFSET], dtype=np.uint64)
    empty_stream = np.zeros(0, dtype=np.int64)
    w = np.zeros(2, dtype=np.float64)
    status, cursor = forward_pass(
        st, k_arr, code, cl_body, cl_dist, q_start, q_count, dists,
        unobs, rng_state, hash_state, empty_stream, 0,
    )
    assert status == 0
    status, cursor = gibbs_sweeps(
        st, k_arr, code, cl_body, cl_dist, q_start, q_count, dists,
        child_list, child_start, child_count, unobs, targets, tallies,
        3, 1, rng_state, hash_state, empty_stream, cursor, w,
    )
    assert status == 0
    _warmed = True
