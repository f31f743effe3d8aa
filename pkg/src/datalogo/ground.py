"""Grounding of a stratum into a polynomial fixpoint system.

The grounded system has one variable per ground IDB atom of the stratum and,
per variable, a list of monomials ``coeff * x_i^m * f(x_j) ...``.  Relations
outside the stratum (EDBs and lower strata) are folded into coefficients.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .ast import (
    Body,
    Cases,
    CastAtom,
    CondRel,
    Const,
    EqAtom,
    FlatProduct,
    FnApp,
    KeyFn,
    KeyValue,
    Literal,
    Program,
    RelAtom,
    Rule,
    Stratum,
    Var,
    _conjuncts,
    cond_vars,
    eval_cond,
    factor_atom,
    flatten,
    function_for,
    term_vars,
    var_domains,
)
from .pops import Pops, PopsError, UnaryFunction
from .store import DomainTable, Relation, format_key

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**7


class GroundingError(Exception):
    pass


class GroundingBudgetError(GroundingError):
    pass


class MissingBranchError(GroundingError):
    pass


class EvaluationError(Exception):
    def __init__(self, msg, var: int | None = None, iteration: int | None = None):
        self.var, self.iteration = var, iteration
        super().__init__(msg)


@dataclass(frozen=True)
class Factor:
    var: int
    mult: int = 1
    fn: UnaryFunction | None = None


@dataclass(frozen=True)
class GroundMonomial:
    coeff: Any
    factors: tuple = ()

    @property
    def degree(self) -> int:
        return sum(f.mult for f in self.factors)


@dataclass
class GroundedSystem:
    vars: list  # of (relation name, key tuple)
    pops: list  # per-var Pops
    polys: list  # per-var list of GroundMonomial
    relations: dict = field(default_factory=dict)
    notices: list = field(default_factory=list)
    dropped: list = field(default_factory=list)  # (rel, key) removed by restriction

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.vars)}

    @property
    def N(self) -> int:
        return len(self.vars)

    @property
    def monomial_count(self) -> int:
        return sum(len(p) for p in self.polys)

    def label(self, k: int) -> str:
        rel, key = self.vars[k]
        return f"{rel}(" + ",".join(format_key(c) for c in key) + ")"

    def bottom(self) -> tuple:
        return tuple(p.bot for p in self.pops)

    def pops_set(self) -> list[Pops]:
        out = []
        for p in self.pops:
            if p not in out:
                out.append(p)
        return out

    def has_functions(self) -> bool:
        return any(f.fn is not None for poly in self.polys for m in poly for f in m.factors)

    def is_linear(self) -> bool:
        return all(m.degree <= 1 for poly in self.polys for m in poly)

    def dump(self) -> str:
        return "\n".join(self.dump_lines()) + ("\n" if self.vars else "")

    def dump_lines(self) -> list[str]:
        lines = []
        for k, poly in enumerate(self.polys):
            pops = self.pops[k]
            if not poly:
                rhs = pops.format(pops.zero)
            else:
                terms = []
                for m in poly:
                    parts = [pops.format(m.coeff)]
                    for f in m.factors:
                        x = f"x_{f.var + 1}"
                        if f.fn is not None:
                            # the Boolean indicator cast prints as cast[bool]
                            lab = "bool" if f.fn.name == "cast" else f.fn.label
                            x = f"cast[{lab}]({x})"
                        if f.mult > 1:
                            x += f"^{f.mult}"
                        parts.append(x)
                    terms.append(" * ".join(parts))
                rhs = " + ".join(terms)
            lines.append(f"x_{k + 1}: {self.label(k)} = {rhs}")
        return lines

    def stats(self) -> dict:
        return {"N": self.N, "monomials": self.monomial_count}


# ---------------------------------------------------------------------------
# evaluation of monomials


def eval_monomial(pops: Pops, m: GroundMonomial, assignment: Sequence) -> Any:
    v = m.coeff
    for f in m.factors:
        x = assignment[f.var]
        if f.fn is not None:
            x = f.fn(x)
        for _ in range(f.mult):
            v = pops.mul(v, x)
    return v


def eval_poly(pops: Pops, poly: list, assignment: Sequence) -> Any:
    acc = pops.zero
    for m in poly:
        acc = pops.add(acc, eval_monomial(pops, m, assignment))
    return acc


def ico_apply(system: GroundedSystem, assignment: Sequence) -> tuple:
    """One application of the immediate consequence operator."""
    if len(assignment) != system.N:
        raise ValueError(f"assignment has {len(assignment)} entries, system has {system.N} variables")
    out = []
    for k, poly in enumerate(system.polys):
        try:
            out.append(eval_poly(system.pops[k], poly, assignment))
        except PopsError as e:
            raise EvaluationError(f"{system.label(k)}: {e}", var=k) from e
    return tuple(out)


# ---------------------------------------------------------------------------
# grounding


class _Ctx:
    def __init__(self, program: Program, stratum: Stratum, domains: dict[str, DomainTable], relations: dict, budget: int):
        self.program = program
        self.decls = program.rel_decls
        self.members = set(stratum.idbs)
        self.domains = domains
        self.relations = relations
        self.budget = budget
        self.produced = 0
        self.visited = 0
        self._lit_cache: dict = {}

    def dom(self, name: str) -> DomainTable:
        try:
            return self.domains[name]
        except KeyError:
            raise GroundingError(f"domain {name} is unknown (declare it or load data that mentions it)") from None

    def key_of(self, atom: RelAtom, env: dict) -> tuple | None:
        d = self.decls[atom.name]
        out = []
        for t, dn in zip(atom.args, d.domains):
            if isinstance(t, Var):
                out.append(env[t.name])
            elif isinstance(t, Const):
                out.append(t.value)
            else:
                out.append(self.dom(dn).clamp(env[t.var.name] + t.offset))
        return tuple(out)

    def rel(self, name: str) -> Relation:
        try:
            return self.relations[name]
        except KeyError:
            raise GroundingError(f"relation {name} has no data loaded") from None

    def rel_value(self, atom: RelAtom, env: dict):
        r = self.rel(atom.name)
        return r.entries.get(self.key_of(atom, env), r.pops.bot)

    def literal(self, pops: Pops, text: str):
        k = (pops.name, text)
        if k not in self._lit_cache:
            self._lit_cache[k] = pops.parse(text)
        return self._lit_cache[k]


def _term_value(t, env):
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, Const):
        return t.value
    return env[t.var.name] + t.offset


def ground(
    program: Program,
    stratum: Stratum,
    domains: dict[str, DomainTable],
    relations: dict[str, Relation],
    budget: int = DEFAULT_BUDGET,
) -> GroundedSystem:
    """Expand every rule of ``stratum`` over its domains.

    ``relations`` holds the EDBs and the already solved lower-stratum IDBs.
    """
    ctx = _Ctx(program, stratum, domains, relations, budget)
    vars_, pops_ = [], []
    for name in stratum.idbs:
        d = program.rel_decls[name]
        p = program.pops_of(name)
        for key in itertools.product(*(ctx.dom(dn).elements for dn in d.domains)):
            vars_.append((name, key))
            pops_.append(p)
    index = {v: i for i, v in enumerate(vars_)}
    acc: list[dict] = [dict() for _ in vars_]
    for rule in stratum.rules:
        _ground_rule(ctx, rule, index, acc)
    polys = []
    for k, d in enumerate(acc):
        p = pops_[k]
        mons = [GroundMonomial(c, fs) for fs, c in d.items() if not (p.absorbing and c == p.zero)]
        mons.sort(key=lambda m: tuple((f.var, f.mult, f.fn.label if f.fn else "") for f in m.factors))
        polys.append(mons)
    sys_ = GroundedSystem(vars_, pops_, polys, relations=dict(relations))
    log.debug("grounded stratum %s: N=%d monomials=%d", stratum.idbs, sys_.N, sys_.monomial_count)
    return sys_


def _ground_rule(ctx: _Ctx, rule: Rule, index: dict, acc: list):
    program = ctx.program
    head = rule.head
    hd = ctx.decls[head.name]
    rule_pops = program.pops_of(head.name)
    head_vars = rule.head_vars
    if isinstance(rule.body, Cases):
        hdom = {}
        for t, dn in zip(head.args, hd.domains):
            if isinstance(t, Var):
                hdom.setdefault(t.name, dn)
        branches = rule.body.branches
        for combo in itertools.product(*(ctx.dom(hdom[v]).elements for v in head_vars)):
            env = dict(zip(head_vars, combo))
            hits = [b for b in branches if eval_cond(b.cond, env)]
            key = tuple(env[t.name] if isinstance(t, Var) else t.value for t in head.args)
            label = f"{head.name}(" + ",".join(format_key(c) for c in key) + ")"
            if len(hits) > 1:
                raise GroundingError(f"several case branches match {label}")
            if hits:
                body = hits[0].body
            elif rule.body.else_ is not None:
                body = rule.body.else_
            else:
                raise MissingBranchError(f"no case branch matches {label} and there is no else")
            _ground_body(ctx, rule, body, rule_pops, env, index, acc)
    else:
        _ground_body(ctx, rule, rule.body, rule_pops, {}, index, acc)


def _ground_body(ctx: _Ctx, rule: Rule, body: Body, rule_pops: Pops, env0: dict, index: dict, acc: list):
    head = rule.head
    for fp in flatten(body, rule.head_vars):
        dmap = var_domains(ctx.program, rule, fp)
        for env in _search(ctx, rule, fp, rule_pops, dmap, dict(env0)):
            key = tuple(env[t.name] if isinstance(t, Var) else t.value for t in head.args)
            k = index.get((head.name, key))
            if k is None:
                continue
            mono = _monomial(ctx, fp, rule_pops, env, index)
            if mono is None:
                continue
            coeff, fkey = mono
            ctx.produced += 1
            if ctx.produced > ctx.budget:
                raise GroundingBudgetError(
                    f"grounding produced more than {ctx.budget} monomials; raise the budget or restrict the program"
                )
            d = acc[k]
            d[fkey] = rule_pops.add(d[fkey], coeff) if fkey in d else coeff


def _monomial(ctx: _Ctx, fp: FlatProduct, pops: Pops, env: dict, index: dict):
    coeff = pops.one
    facs: dict[tuple, int] = {}
    for f in fp.factors:
        if isinstance(f, EqAtom):
            continue
        if isinstance(f, Literal):
            coeff = pops.mul(coeff, ctx.literal(pops, f.text))
        elif isinstance(f, KeyValue):
            coeff = pops.mul(coeff, pops.from_number(_term_value(f.term, env)))
        else:
            atom = factor_atom(f)
            fn = None if isinstance(f, RelAtom) else function_for(ctx.program, f, pops)
            key = ctx.key_of(atom, env)
            if atom.name in ctx.members:
                k = index[(atom.name, key)]
                fk = (k, fn)
                facs[fk] = facs.get(fk, 0) + 1
            else:
                r = ctx.rel(atom.name)
                v = r.entries.get(key, r.pops.bot)
                coeff = pops.mul(coeff, v if fn is None else fn(v))
        if pops.absorbing and coeff == pops.zero:
            return None
    factors = tuple(
        sorted((Factor(k, m, fn) for (k, fn), m in facs.items()), key=lambda x: (x.var, x.fn.label if x.fn else ""))
    )
    return coeff, factors


def _vanishes_when_absent(ctx: _Ctx, f, pops: Pops) -> bool:
    """True if a missing (bottom) entry for ``f`` makes the whole product vanish."""
    atom = factor_atom(f)
    if atom is None or atom.name in ctx.members or not pops.absorbing:
        return False
    src = ctx.program.pops_of(atom.name)
    if isinstance(f, RelAtom):
        return src.bot == pops.zero
    fn = function_for(ctx.program, f, pops)
    try:
        return fn(src.bot) == pops.zero
    except PopsError:
        return False


def _search(ctx: _Ctx, rule: Rule, fp: FlatProduct, pops: Pops, dmap: dict, env: dict):
    """Enumerate bindings of all variables of ``fp`` that satisfy its checks."""
    all_vars = list(rule.head_vars) + [b.var for b in fp.binders]
    ranges: dict[str, Iterable] = {}
    dom_of: dict[str, DomainTable | None] = {}
    for b in fp.binders:
        if b.lo is not None:
            ranges[b.var] = range(b.lo, b.hi + 1)
    for v in all_vars:
        dn = dmap.get(v)
        dom_of[v] = ctx.dom(dn) if dn is not None else None
        if v not in ranges:
            if dom_of[v] is None:
                raise GroundingError(f"cannot determine the domain of {v} in a rule for {rule.head.name}")
            ranges[v] = dom_of[v].elements

    def in_range(v, val):
        r = ranges[v]
        if isinstance(r, range):
            return isinstance(val, int) and val in r
        d = dom_of[v]
        return val in d if d is not None else True

    # constraints: (vars, kind, payload)
    cons = []
    for f in fp.factors:
        if isinstance(f, EqAtom):
            cons.append((term_vars(f.left) | term_vars(f.right), "eq", f))
        elif _vanishes_when_absent(ctx, f, pops):
            a = factor_atom(f)
            cons.append((set().union(*[term_vars(t) for t in a.args]) if a.args else set(), "atom", a))
    for g in fp.guards:
        for c in _conjuncts(g):
            if isinstance(c, CondRel):
                a = c.atom
                cons.append((set().union(*[term_vars(t) for t in a.args]) if a.args else set(), "guard", a))
            else:
                cons.append((cond_vars(c), "cond", c))

    def truth(atom, e):
        v = ctx.rel_value(atom, e)
        return v is True or (v is not False and v != ctx.rel(atom.name).pops.bot and v != ctx.rel(atom.name).pops.zero)

    def holds(kind, payload, e) -> bool:
        if kind == "eq":
            return _term_value(payload.left, e) == _term_value(payload.right, e)
        if kind == "atom":
            r = ctx.rel(payload.name)
            return ctx.key_of(payload, e) in r.entries
        if kind == "guard":
            return truth(payload, e)
        return eval_cond(payload, e, truth)

    def rec(e: dict, pending: list):
        ctx.visited += 1
        if ctx.visited > 20 * ctx.budget:
            raise GroundingBudgetError(f"grounding enumeration exceeded {20 * ctx.budget} steps")
        # run every check whose variables are bound
        rest = []
        for c in pending:
            if c[0] <= e.keys():
                if not holds(c[1], c[2], e):
                    return
            else:
                rest.append(c)
        unbound = [v for v in all_vars if v not in e]
        if not unbound:
            yield dict(e)
            return
        # equality that pins one variable
        for vs, kind, payload in rest:
            if kind != "eq":
                continue
            for a, b in ((payload.left, payload.right), (payload.right, payload.left)):
                if isinstance(a, Var) and a.name not in e and term_vars(b) <= e.keys():
                    val = _term_value(b, e)
                    if isinstance(b, KeyFn) and dom_of.get(b.var.name) is not None and dom_of[b.var.name].is_int_range:
                        val = dom_of[b.var.name].clamp(val)
                    if in_range(a.name, val):
                        e[a.name] = val
                        yield from rec(e, rest)
                        del e[a.name]
                    return
        # sparse relation scan
        best = None
        for c in rest:
            vs, kind, payload = c
            if kind not in ("atom", "guard"):
                continue
            if any(isinstance(t, KeyFn) and t.var.name not in e for t in payload.args):
                continue
            n = len(ctx.rel(payload.name).entries)
            if best is None or n < best[0]:
                best = (n, c)
        if best is not None:
            _, (vs, kind, atom) = best
            r = ctx.rel(atom.name)
            d = ctx.decls[atom.name]
            for key, val in list(r.entries.items()):
                if kind == "guard" and not (val is True or (val is not False and val != r.pops.zero)):
                    continue
                newly = []
                ok = True
                for t, dn, kv in zip(atom.args, d.domains, key):
                    if isinstance(t, Var):
                        if t.name in e:
                            if e[t.name] != kv:
                                ok = False
                                break
                        elif in_range(t.name, kv):
                            e[t.name] = kv
                            newly.append(t.name)
                        else:
                            ok = False
                            break
                    elif isinstance(t, Const):
                        if t.value != kv:
                            ok = False
                            break
                    else:
                        if ctx.dom(dn).clamp(e[t.var.name] + t.offset) != kv:
                            ok = False
                            break
                if ok:
                    yield from rec(e, rest)
                for v in newly:
                    del e[v]
            return
        v = unbound[0]
        for val in ranges[v]:
            e[v] = val
            yield from rec(e, rest)
        del e[v]

    yield from rec(env, cons)


# ---------------------------------------------------------------------------
# active-domain restriction


def active_domain_restrict(system: GroundedSystem) -> GroundedSystem:
    """Drop variables that provably stay at bottom in the least fixpoint.

    Requires strict multiplication in every POPS and strict functions, so
    that a product containing a bottom factor is bottom.  Otherwise the
    system is returned unchanged with a notice.
    """
    for p in system.pops_set():
        if not p.strict_times:
            system.notices.append(f"active-domain restriction refused: {p.name} has non-strict multiplication")
            return system
    for poly in system.polys:
        for m in poly:
            for f in m.factors:
                if f.fn is not None:
                    src = system.pops[f.var]
                    if f.fn(src.bot) != _target_bot(f.fn, system, m):
                        system.notices.append(f"active-domain restriction refused: {f.fn.label} is not strict")
                        return system
    N = system.N
    live = [False] * N
    changed = True
    while changed:
        changed = False
        for k in range(N):
            if live[k]:
                continue
            p = system.pops[k]
            poly = system.polys[k]
            if not poly:
                ok = p.zero != p.bot
            else:
                ok = any(m.coeff != p.bot and all(live[f.var] for f in m.factors) for m in poly)
            if ok:
                live[k] = True
                changed = True
    keep = [k for k in range(N) if live[k]]
    if len(keep) == N:
        return system
    remap = {old: new for new, old in enumerate(keep)}
    polys = []
    for old in keep:
        p = system.pops[old]
        d: dict = {}
        for m in system.polys[old]:
            if all(f.var in remap for f in m.factors):
                fs = tuple(Factor(remap[f.var], f.mult, f.fn) for f in m.factors)
                c = m.coeff
            else:
                if p.bot == p.zero:
                    continue
                fs, c = (), p.bot
            d[fs] = p.add(d[fs], c) if fs in d else c
        polys.append([GroundMonomial(c, fs) for fs, c in d.items()])
    out = GroundedSystem(
        [system.vars[k] for k in keep],
        [system.pops[k] for k in keep],
        polys,
        relations=system.relations,
        notices=list(system.notices),
        dropped=list(system.dropped) + [system.vars[k] for k in range(N) if not live[k]],
    )
    out.notices.append(f"active-domain restriction dropped {N - len(keep)} of {N} variables")
    return out


def _target_bot(fn: UnaryFunction, system: GroundedSystem, m) -> Any:
    from .pops import get_pops

    return get_pops(fn.target).bot


def system_from_polys(pops: Pops | Sequence[Pops], polys: list, labels: Sequence | None = None) -> GroundedSystem:
    """Build a system directly from monomial lists (handy for tests and tools).

    ``polys[k]`` is a list of ``(coeff, [var, ...])`` or ``GroundMonomial``.
    """
    n = len(polys)
    plist = list(pops) if isinstance(pops, (list, tuple)) else [pops] * n
    out = []
    for k, poly in enumerate(polys):
        mons = []
        for m in poly:
            if isinstance(m, GroundMonomial):
                mons.append(m)
                continue
            coeff, vs = m
            cnt: dict = {}
            for v in vs:
                cnt[v] = cnt.get(v, 0) + 1
            mons.append(GroundMonomial(coeff, tuple(Factor(v, c) for v, c in sorted(cnt.items()))))
        out.append(mons)
    vars_ = [("x", (i + 1,)) for i in range(n)] if labels is None else [(l, ()) for l in labels]
    return GroundedSystem(vars_, plist, out)
