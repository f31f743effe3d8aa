"""Least-fixpoint evaluation of grounded systems and whole programs."""
from __future__ import annotations

import collections
import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from .ast import Program, Stratum, classify_linear, is_cast_free, stratify, validate, ValidationError
from .ground import (
    DEFAULT_BUDGET,
    EvaluationError,
    GroundedSystem,
    active_domain_restrict,
    eval_monomial,
    ground,
    ico_apply,
)
from .pops import Cmp, Pops, PopsError
from .store import Database, Mode, Relation, Schema

log = logging.getLogger(__name__)

SATURATE = 2**63
DEFAULT_HARD_LIMIT = 10_000


class Status(enum.Enum):
    CONVERGED = "converged"
    CAP_EXCEEDED = "cap_exceeded"


class MonotonicityError(AssertionError):
    """The naive sequence failed to be increasing; indicates a non-monotone system."""


class UnsupportedEngine(Exception):
    pass


class DivergenceError(Exception):
    def __init__(self, stratum: int, solution: "Solution", message: str):
        self.stratum = stratum
        self.solution = solution
        self.result = None
        super().__init__(message)


@dataclass(frozen=True)
class IterationCap:
    """Bound on the number of steps before the fixpoint is reached.

    ``value`` is ``None`` when no theorem applies (Unbounded).  The engine
    performs at most ``value + 1`` applications: one more than the bound to
    observe that the sequence has stopped changing.
    """

    value: int | None
    provenance: str
    saturated: bool = False

    @property
    def unbounded(self) -> bool:
        return self.value is None

    def __str__(self):
        if self.value is None:
            return "unbounded" + (" (astronomical, >=2^63)" if self.saturated else "") + f" [{self.provenance}]"
        return f"{self.value} [{self.provenance}]"


@dataclass
class Solution:
    assignment: tuple
    iterations: int
    status: Status
    engine: str = "naive"
    trace: list = field(default_factory=list)  # list of (t, assignment)
    cap: IterationCap | None = None
    ops: int = 0
    diff: list = field(default_factory=list)  # divergence report
    deltas: list = field(default_factory=list)  # semi-naive: (t, {var: delta})

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def stable_at(self) -> int | None:
        """Smallest t with R_t = R_{t+1}, i.e. the step at which the fixpoint was reached."""
        if not self.converged:
            return None
        return max(self.iterations - 1, 0)


# ---------------------------------------------------------------------------
# caps


def _saturating_geometric(base: int, n: int) -> int | None:
    """sum_{i=1..n} base^i, or None on 64-bit overflow."""
    total, term = 0, 1
    for _ in range(n):
        term *= base
        total += term
        if total >= SATURATE:
            return None
    return total


def compute_cap(system: GroundedSystem, linear: bool | None = None, user_cap: int | None = None) -> IterationCap:
    """Minimum over the convergence bounds that apply to ``system``."""
    N = system.N
    if linear is None:
        linear = system.is_linear()
    pops = system.pops_set()
    cands: list[tuple[int, str]] = []
    saturated = False
    has_fn = system.has_functions()
    single = len(pops) == 1
    ps = [p.known_stability_p for p in pops]
    if single and not has_fn and ps[0] is not None:
        p = ps[0]
        P = pops[0]
        if p == 0 and P.strict_times:
            cands.append((N, "0-stable: at most N steps"))
        if linear and P.name.startswith("trop_p("):
            cands.append(((p + 1) * N, "linear trop_p: matrix stability (p+1)N-1, plus one step"))
        g = _saturating_geometric(p + 1 if linear else p + 2, N)
        if g is None:
            saturated = True
        else:
            cands.append((g, f"{'linear ' if linear else ''}p-stable geometric bound, p={p}"))
    ranks = [p.rank for p in pops]
    if pops and all(r is not None for r in ranks):
        k = max(ranks)
        cands.append((k * N, f"rank {k}: at most k*N steps"))
    if user_cap is not None:
        if not cands or user_cap < min(c[0] for c in cands):
            cands.append((user_cap, "user cap"))
    if not cands:
        return IterationCap(None, "no stability or rank bound applies", saturated)
    v, prov = min(cands, key=lambda c: c[0])
    return IterationCap(v, prov)


def _limit(cap: IterationCap) -> int:
    return DEFAULT_HARD_LIMIT if cap.value is None else cap.value


# ---------------------------------------------------------------------------
# naive evaluation


def _changed(system: GroundedSystem, old: Sequence, new: Sequence) -> list[int]:
    return [k for k in range(system.N) if old[k] != new[k]]


def format_trace_line(system: GroundedSystem, t: int, old: Sequence | None, new: Sequence) -> str:
    ks = range(system.N) if old is None else _changed(system, old, new)
    parts = [f"{system.label(k)}={system.pops[k].format(new[k])}" for k in ks]
    return " ".join([f"t={t}"] + parts)


def _diff(system: GroundedSystem, old: Sequence, new: Sequence, limit: int = 20) -> list[str]:
    out = []
    for k in _changed(system, old, new)[:limit]:
        p = system.pops[k]
        out.append(f"{system.label(k)}: {p.format(old[k])} -> {p.format(new[k])}")
    return out


def naive_eval(
    system: GroundedSystem,
    cap: IterationCap | int | None = None,
    trace: str = "off",
    check_monotone: bool = True,
) -> Solution:
    """Iterate R_t = ICO(R_{t-1}) from the all-bottom vector.

    ``iterations`` is the first t with R_t = R_{t-1}.  ``trace`` is ``off``,
    ``summary`` (last 16 assignments) or ``full``.
    """
    if cap is None:
        cap = compute_cap(system)
    elif isinstance(cap, int):
        cap = IterationCap(cap, "explicit")
    limit = _limit(cap)
    cur = system.bottom()
    hist = collections.deque(maxlen=None if trace == "full" else 16) if trace != "off" else None
    if hist is not None:
        hist.append((0, cur))
    t = 0
    while t < limit + 1:
        t += 1
        try:
            nxt = ico_apply(system, cur)
        except EvaluationError as e:
            raise EvaluationError(f"iteration {t}: {e}", e.var, t) from e
        if hist is not None:
            hist.append((t, nxt))
        if nxt == cur:
            return Solution(nxt, t, Status.CONVERGED, "naive", list(hist or []), cap)
        if check_monotone:
            for k in _changed(system, cur, nxt):
                if system.pops[k].cmp(cur[k], nxt[k]) is not Cmp.LESS:
                    raise MonotonicityError(
                        f"iteration {t}: {system.label(k)} moved from {system.pops[k].format(cur[k])} "
                        f"to {system.pops[k].format(nxt[k])}, which is not an increase"
                    )
        prev, cur = cur, nxt
    return Solution(cur, t, Status.CAP_EXCEEDED, "naive", list(hist or []), cap, diff=_diff(system, prev, cur))


# ---------------------------------------------------------------------------
# semi-naive evaluation


def seminaive_eligible(system: GroundedSystem) -> str | None:
    """None if eligible, else the reason it is not."""
    for p in system.pops_set():
        if not p.has_minus:
            return f"{p.name} is not a distributive dioid"
    if system.has_functions():
        return "the system contains cast or function factors"
    return None


def seminaive_eval(system: GroundedSystem, cap: IterationCap | int | None = None, trace: str = "off") -> Solution:
    """Differential evaluation over distributive dioids.

    Each monomial c * x_{i1} * ... * x_{im} (repeated variables listed once
    per occurrence) contributes sum_j c * new_{i1..i(j-1)} * delta_{ij} *
    old_{i(j+1)..im}; the difference with the current value gives the next
    delta.  Constant monomials only matter in the first step.
    """
    reason = seminaive_eligible(system)
    if reason:
        raise UnsupportedEngine(f"semi-naive evaluation unavailable: {reason}")
    if cap is None:
        cap = compute_cap(system)
    elif isinstance(cap, int):
        cap = IterationCap(cap, "explicit")
    limit = _limit(cap)
    N = system.N
    occ = []  # per var: list of (coeff, [occurrence vars])
    consts = []
    for k, poly in enumerate(system.polys):
        rows, cs = [], []
        for m in poly:
            vs = [f.var for f in m.factors for _ in range(f.mult)]
            if vs:
                rows.append((m.coeff, vs))
            else:
                cs.append(m.coeff)
        occ.append(rows)
        consts.append(cs)
    # which monomials read var i: only those need re-evaluation when delta_i != 0
    readers: dict[int, set] = collections.defaultdict(set)
    for k, rows in enumerate(occ):
        for r in rows:
            for v in r[1]:
                readers[v].add(k)

    bot = system.bottom()
    hist = collections.deque(maxlen=None if trace == "full" else 16) if trace != "off" else None
    if hist is not None:
        hist.append((0, bot))
    # t = 1: full application
    R1 = ico_apply(system, bot)
    for k in range(N):
        p = system.pops[k]
        for c in consts[k]:
            if not p.leq(c, R1[k]):
                raise MonotonicityError(f"constant term of {system.label(k)} is not below R_1")
    delta = {k: system.pops[k].minus(R1[k], bot[k]) for k in range(N)}
    delta = {k: d for k, d in delta.items() if d != system.pops[k].zero}
    old, new = bot, R1
    deltas_log = [(1, dict(delta))]
    if hist is not None:
        hist.append((1, R1))
    t = 1
    if not delta:
        return Solution(new, 1, Status.CONVERGED, "seminaive", list(hist or []), cap, deltas=deltas_log)
    ops = 0
    while t < limit + 1:
        t += 1
        targets = set()
        for v in delta:
            targets |= readers.get(v, set())
        nd = {}
        for k in sorted(targets):
            p = system.pops[k]
            acc = p.zero
            for coeff, vs in occ[k]:
                if not any(v in delta for v in vs):
                    continue
                for j, vj in enumerate(vs):
                    if vj not in delta:
                        continue
                    term = coeff
                    for i, vi in enumerate(vs):
                        if i < j:
                            x = new[vi]
                        elif i == j:
                            x = delta[vj]
                        else:
                            x = old[vi]
                        term = p.mul(term, x)
                        ops += 1
                    acc = p.add(acc, term)
                    ops += 1
            d = p.minus(acc, new[k])
            if d != p.zero:
                nd[k] = d
        deltas_log.append((t, dict(nd)))
        if not nd:
            return Solution(new, t, Status.CONVERGED, "seminaive", list(hist or []), cap, ops=ops, deltas=deltas_log)
        upd = list(new)
        for k, d in nd.items():
            upd[k] = system.pops[k].add(new[k], d)
        old, new, delta = new, tuple(upd), nd
        if hist is not None:
            hist.append((t, new))
    return Solution(
        new, t, Status.CAP_EXCEEDED, "seminaive", list(hist or []), cap, ops=ops, diff=_diff(system, old, new),
        deltas=deltas_log,
    )


# ---------------------------------------------------------------------------
# whole programs


@dataclass
class RunOptions:
    engine: str = "auto"  # auto | naive | seminaive | linear
    max_iters: int | None = None
    trace: str = "off"  # off | summary | full
    budget: int = DEFAULT_BUDGET
    restrict: bool = True
    linear_p: int | None = None
    threads: int = 1


@dataclass
class StratumResult:
    stratum: Stratum
    system: GroundedSystem
    solution: Solution
    linear: bool
    cap: IterationCap
    seconds: float = 0.0  # wall time of the solve, reported apart from op counts


@dataclass
class RunResult:
    strata: list
    relations: dict  # IDB name -> Relation

    @property
    def converged(self) -> bool:
        return all(s.solution.converged for s in self.strata)


def choose_engine(program: Program, stratum: Stratum, system: GroundedSystem, requested: str, linear_p=None) -> str:
    from .linear import linear_eligible

    if requested == "auto":
        if linear_eligible(system, linear_p) is None:
            return "linear"
        if seminaive_eligible(system) is None:
            return "seminaive"
        return "naive"
    if requested == "linear":
        why = linear_eligible(system, linear_p)
        if why:
            raise UnsupportedEngine(f"linear solver unavailable for stratum {stratum.index}: {why}")
    if requested == "seminaive":
        why = seminaive_eligible(system)
        if why:
            raise UnsupportedEngine(f"semi-naive unavailable for stratum {stratum.index}: {why}")
    return requested


def solve_system(system: GroundedSystem, engine: str, cap: IterationCap, trace: str = "off", linear_p=None) -> Solution:
    if engine == "naive":
        return naive_eval(system, cap, trace)
    if engine == "seminaive":
        return seminaive_eval(system, cap, trace)
    if engine == "linear":
        from .linear import linear_lfp

        return linear_lfp(system, linear_p)
    raise ValueError(f"unknown engine {engine!r}")


def solution_relations(program: Program, stratum: Stratum, system: GroundedSystem, sol: Solution, domains) -> dict:
    rels = {}
    for name in stratum.idbs:
        d = program.rel_decls[name]
        rels[name] = Relation(Schema(name, d.domains, program.pops_of(name).name, "idb"), domains)
    for k, (name, key) in enumerate(system.vars):
        rels[name].put_combine(key, sol.assignment[k], Mode.REPLACE)
    for r in rels.values():
        r.freeze()
    return rels


def run_program(program: Program, db: Database, options: RunOptions | None = None) -> RunResult:
    """Evaluate all strata in order; raises DivergenceError on a cap overrun."""
    options = options or RunOptions()
    diags = [d for d in validate(program, {k: v.elements for k, v in db.domains.items()}) if d.severity == "error"]
    if diags:
        raise ValidationError(diags)
    relations = dict(db.relations)
    results = []
    out_rels = {}
    for stratum in stratify(program):
        system = ground(program, stratum, db.domains, relations, options.budget)
        if options.restrict:
            system = active_domain_restrict(system)
        for n in system.notices:
            log.info("stratum %d: %s", stratum.index, n)
        linear = classify_linear(program, stratum) and is_cast_free(program, stratum)
        cap = compute_cap(system, system.is_linear(), options.max_iters)
        engine = choose_engine(program, stratum, system, options.engine, options.linear_p)
        t0 = time.perf_counter()
        sol = solve_system(system, engine, cap, options.trace, options.linear_p)
        results.append(StratumResult(stratum, system, sol, linear, cap, time.perf_counter() - t0))
        rels = solution_relations(program, stratum, system, sol, db.domains)
        relations.update(rels)
        out_rels.update(rels)
        if not sol.converged:
            err = DivergenceError(
                stratum.index,
                sol,
                f"stratum {stratum.index} ({', '.join(stratum.idbs)}) did not converge within "
                f"{sol.iterations} iterations (cap {cap})",
            )
            err.result = RunResult(results, out_rels)
            raise err
    return RunResult(results, out_rels)
