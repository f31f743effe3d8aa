"""Program representation, validation, stratification and linearity checks.

Nodes are frozen dataclasses.  Every node carries a ``span`` that is
excluded from equality, so two programs compare equal when they have the
same structure regardless of layout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Union

from .pops import BOOL, Pops, PopsError, UnknownFunction, get_pops, make_function


@dataclass(frozen=True)
class SourceSpan:
    start: int = 0  # byte offsets
    end: int = 0
    line: int = 1
    col: int = 1
    end_line: int = 1
    end_col: int = 1

    def __str__(self):
        return f"{self.line}:{self.col}"


NOSPAN = SourceSpan()


def _span():
    return field(default=NOSPAN, compare=False, repr=False)


# ---------------------------------------------------------------------------
# key terms


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Const:
    value: Union[str, int]
    span: SourceSpan = _span()


@dataclass(frozen=True)
class KeyFn:
    """Successor/predecessor arithmetic ``var + offset`` on an integer domain."""

    var: Var
    offset: int
    span: SourceSpan = _span()


Term = Union[Var, Const, KeyFn]


@dataclass(frozen=True)
class Arith:
    """Signed sum of key terms used inside conditions, e.g. ``c1 + c2 - 1``."""

    parts: tuple  # of (sign, Var | Const)
    span: SourceSpan = _span()

    def vars(self) -> set[str]:
        return {t.name for _, t in self.parts if isinstance(t, Var)}


# ---------------------------------------------------------------------------
# conditions


@dataclass(frozen=True)
class CondCmp:
    op: str
    left: Arith
    right: Arith
    span: SourceSpan = _span()


@dataclass(frozen=True)
class CondRel:
    atom: "RelAtom"
    span: SourceSpan = _span()


@dataclass(frozen=True)
class CondNot:
    item: "Cond"
    span: SourceSpan = _span()


@dataclass(frozen=True)
class CondAnd:
    items: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class CondOr:
    items: tuple
    span: SourceSpan = _span()


Cond = Union[CondCmp, CondRel, CondNot, CondAnd, CondOr]


# ---------------------------------------------------------------------------
# rule bodies


@dataclass(frozen=True)
class RelAtom:
    name: str
    args: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class EqAtom:
    left: Term
    right: Term
    span: SourceSpan = _span()


@dataclass(frozen=True)
class CastAtom:
    """``[R(...)]``: the Boolean indicator cast of a Bool relation."""

    atom: RelAtom
    span: SourceSpan = _span()


@dataclass(frozen=True)
class FnApp:
    name: str
    param: str | None
    atom: RelAtom
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Literal:
    text: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class KeyValue:
    """A key term used as a value of the rule's POPS."""

    term: Term
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Binder:
    var: str
    lo: int | None = None
    hi: int | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class SumExpr:
    binders: tuple
    body: "Body"
    guard: Cond | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Prod:
    factors: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Body:
    terms: tuple  # of Prod
    span: SourceSpan = _span()


Atomic = Union[RelAtom, EqAtom, CastAtom, FnApp, Literal, KeyValue]


@dataclass(frozen=True)
class Branch:
    cond: Cond
    body: Body
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Cases:
    branches: tuple
    else_: Body | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Rule:
    head: RelAtom
    body: Union[Body, Cases]
    span: SourceSpan = _span()

    @property
    def head_vars(self) -> list[str]:
        out = []
        for a in self.head.args:
            if isinstance(a, Var) and a.name not in out:
                out.append(a.name)
        return out


# ---------------------------------------------------------------------------
# declarations


@dataclass(frozen=True)
class DomainDecl:
    name: str
    elements: tuple | None = None
    lo: int | None = None
    hi: int | None = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class RelDecl:
    kind: str  # "edb" | "idb"
    name: str
    domains: tuple
    pops: str  # as written (alias or POPS name)
    span: SourceSpan = _span()


@dataclass(frozen=True)
class PopsDecl:
    name: str
    pops: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Program:
    items: tuple
    span: SourceSpan = _span()

    @property
    def rules(self) -> list[Rule]:
        return [i for i in self.items if isinstance(i, Rule)]

    @property
    def rel_decls(self) -> dict[str, RelDecl]:
        return {i.name: i for i in self.items if isinstance(i, RelDecl)}

    @property
    def domain_decls(self) -> dict[str, DomainDecl]:
        return {i.name: i for i in self.items if isinstance(i, DomainDecl)}

    @property
    def aliases(self) -> dict[str, str]:
        return {i.name: i.pops for i in self.items if isinstance(i, PopsDecl)}

    def resolve_pops(self, name: str) -> Pops:
        seen = set()
        al = self.aliases
        while name in al and name not in seen:
            seen.add(name)
            name = al[name]
        return get_pops(name)

    def pops_of(self, rel: str) -> Pops:
        return self.resolve_pops(self.rel_decls[rel].pops)

    @property
    def edbs(self) -> list[str]:
        return [d.name for d in self.rel_decls.values() if d.kind == "edb"]

    @property
    def idbs(self) -> list[str]:
        return [d.name for d in self.rel_decls.values() if d.kind == "idb"]

    def rules_for(self, rel: str) -> list[Rule]:
        return [r for r in self.rules if r.head.name == rel]

    def constants(self) -> set:
        """All key constants mentioned anywhere in rules."""
        out = set()
        for r in self.rules:
            for node in walk(r):
                if isinstance(node, Const):
                    out.add(node.value)
        return out


# ---------------------------------------------------------------------------
# generic traversal


def children(node) -> Iterator:
    if isinstance(node, (Var, Const, Literal, Binder, DomainDecl, RelDecl, PopsDecl)):
        return iter(())
    if isinstance(node, KeyFn):
        return iter((node.var,))
    if isinstance(node, Arith):
        return iter(t for _, t in node.parts)
    if isinstance(node, CondCmp):
        return iter((node.left, node.right))
    if isinstance(node, (CondRel, CastAtom)):
        return iter((node.atom,))
    if isinstance(node, CondNot):
        return iter((node.item,))
    if isinstance(node, (CondAnd, CondOr)):
        return iter(node.items)
    if isinstance(node, RelAtom):
        return iter(node.args)
    if isinstance(node, EqAtom):
        return iter((node.left, node.right))
    if isinstance(node, FnApp):
        return iter((node.atom,))
    if isinstance(node, KeyValue):
        return iter((node.term,))
    if isinstance(node, SumExpr):
        return iter(node.binders + (node.body,) + ((node.guard,) if node.guard is not None else ()))
    if isinstance(node, Prod):
        return iter(node.factors)
    if isinstance(node, Body):
        return iter(node.terms)
    if isinstance(node, Branch):
        return iter((node.cond, node.body))
    if isinstance(node, Cases):
        return iter(node.branches + ((node.else_,) if node.else_ is not None else ()))
    if isinstance(node, Rule):
        return iter((node.head, node.body))
    if isinstance(node, Program):
        return iter(node.items)
    raise TypeError(f"not an AST node: {node!r}")


def walk(node) -> Iterator:
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(list(children(n))))


def term_vars(t) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, KeyFn):
        return {t.var.name}
    return set()


def cond_vars(c) -> set[str]:
    return {n.name for n in walk(c) if isinstance(n, Var)}


def cond_atoms(c) -> list[RelAtom]:
    return [n.atom for n in walk(c) if isinstance(n, CondRel)]


# ---------------------------------------------------------------------------
# substitution and flattening


def _subst_term(t, m: dict[str, str]):
    if isinstance(t, Var) and t.name in m:
        return replace(t, name=m[t.name])
    if isinstance(t, KeyFn) and t.var.name in m:
        return replace(t, var=replace(t.var, name=m[t.var.name]))
    return t


def substitute(node, m: dict[str, str]):
    """Rename variables according to ``m`` (binders of nested sums included)."""
    if not m:
        return node
    if isinstance(node, (Var, KeyFn, Const)):
        return _subst_term(node, m)
    if isinstance(node, Arith):
        return replace(node, parts=tuple((s, _subst_term(t, m)) for s, t in node.parts))
    if isinstance(node, RelAtom):
        return replace(node, args=tuple(_subst_term(a, m) for a in node.args))
    if isinstance(node, EqAtom):
        return replace(node, left=_subst_term(node.left, m), right=_subst_term(node.right, m))
    if isinstance(node, (CastAtom, FnApp, CondRel)):
        return replace(node, atom=substitute(node.atom, m))
    if isinstance(node, KeyValue):
        return replace(node, term=_subst_term(node.term, m))
    if isinstance(node, Literal):
        return node
    if isinstance(node, CondCmp):
        return replace(node, left=substitute(node.left, m), right=substitute(node.right, m))
    if isinstance(node, CondNot):
        return replace(node, item=substitute(node.item, m))
    if isinstance(node, (CondAnd, CondOr)):
        return replace(node, items=tuple(substitute(i, m) for i in node.items))
    if isinstance(node, Binder):
        return replace(node, var=m.get(node.var, node.var))
    if isinstance(node, SumExpr):
        return replace(
            node,
            binders=tuple(substitute(b, m) for b in node.binders),
            body=substitute(node.body, m),
            guard=None if node.guard is None else substitute(node.guard, m),
        )
    if isinstance(node, Prod):
        return replace(node, factors=tuple(substitute(f, m) for f in node.factors))
    if isinstance(node, Body):
        return replace(node, terms=tuple(substitute(t, m) for t in node.terms))
    raise TypeError(f"cannot substitute in {node!r}")


@dataclass(frozen=True)
class FlatProduct:
    """One product of atomic factors after distributing nested sums."""

    binders: tuple  # of Binder
    guards: tuple  # of Cond
    factors: tuple  # of Atomic


def flatten(body: Body, scope: Iterable[str] = ()) -> list[FlatProduct]:
    """Distribute nested sums so that the body becomes a sum of products.

    Bound variables that would clash with a variable already in scope are
    renamed to ``name#k``.
    """
    counter = itertools.count(1)
    return _flat_body(body, set(scope), counter)


def _fresh(name: str, used: set[str], counter) -> str:
    base = name.split("#")[0]
    while True:
        cand = f"{base}#{next(counter)}"
        if cand not in used:
            return cand


def _flat_body(body: Body, scope: set[str], counter) -> list[FlatProduct]:
    out = []
    for prod in body.terms:
        out.extend(_flat_prod(prod, scope, counter))
    return out


def _flat_prod(prod: Prod, scope: set[str], counter) -> list[FlatProduct]:
    acc = [FlatProduct((), (), ())]
    for f in prod.factors:
        if isinstance(f, SumExpr):
            parts = _flat_sum(f, scope | {b.var for fp in acc for b in fp.binders}, counter)
        elif isinstance(f, Body):
            parts = _flat_body(f, scope | {b.var for fp in acc for b in fp.binders}, counter)
        else:
            parts = [FlatProduct((), (), (f,))]
        new = []
        for a in acc:
            for p in parts:
                # rename p's binders away from a's binders
                clash = {b.var for b in p.binders} & {b.var for b in a.binders}
                if clash:
                    used = scope | {b.var for b in a.binders} | {b.var for b in p.binders}
                    m = {}
                    for v in clash:
                        m[v] = _fresh(v, used | set(m.values()), counter)
                    p = FlatProduct(
                        tuple(substitute(b, m) for b in p.binders),
                        tuple(substitute(g, m) for g in p.guards),
                        tuple(substitute(x, m) for x in p.factors),
                    )
                new.append(FlatProduct(a.binders + p.binders, a.guards + p.guards, a.factors + p.factors))
        acc = new
    return acc


def _flat_sum(s: SumExpr, scope: set[str], counter) -> list[FlatProduct]:
    m = {}
    for b in s.binders:
        if b.var in scope:
            m[b.var] = _fresh(b.var, scope | set(m.values()), counter)
    if m:
        s = substitute(s, m)
    inner = _flat_body(s.body, scope | {b.var for b in s.binders}, counter)
    guards = (s.guard,) if s.guard is not None else ()
    return [FlatProduct(s.binders + fp.binders, guards + fp.guards, fp.factors) for fp in inner]


def rule_branches(rule: Rule) -> list[tuple[Cond | None, Body]]:
    if isinstance(rule.body, Cases):
        out = [(b.cond, b.body) for b in rule.body.branches]
        if rule.body.else_ is not None:
            out.append((None, rule.body.else_))
        return out
    return [(None, rule.body)]


def factor_atom(f) -> RelAtom | None:
    if isinstance(f, RelAtom):
        return f
    if isinstance(f, (CastAtom, FnApp)):
        return f.atom
    return None


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: SourceSpan = NOSPAN

    def __str__(self):
        return f"{self.span}: {self.severity}[{self.code}]: {self.message}"


class ValidationError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class StratificationError(Exception):
    pass


def function_for(program: Program, f, rule_pops: Pops):
    """Resolve the interpreted function of a cast or function factor."""
    if isinstance(f, CastAtom):
        return make_function("cast", target=rule_pops)
    return make_function(f.name, f.param, target=rule_pops)


def var_domains(program: Program, rule: Rule, fp: FlatProduct, diags: list | None = None) -> dict[str, str | None]:
    """Domain name of every variable of a flat product (None: explicit integer range only)."""
    decls = program.rel_decls
    out: dict[str, str | None] = {}
    hd = decls.get(rule.head.name)
    atoms = []
    if hd is not None:
        atoms.append(rule.head)
    for f in fp.factors:
        a = factor_atom(f)
        if a is not None:
            atoms.append(a)
    for g in fp.guards:
        atoms.extend(cond_atoms(g))
    for a in atoms:
        d = decls.get(a.name)
        if d is None or len(d.domains) != len(a.args):
            continue
        for t, dom in zip(a.args, d.domains):
            for v in term_vars(t):
                if v in out and out[v] != dom and diags is not None:
                    diags.append(
                        Diagnostic("error", "domain", f"variable {v} is used with domains {out[v]} and {dom}", a.span)
                    )
                out.setdefault(v, dom)
    for b in fp.binders:
        if b.var not in out:
            out[b.var] = None
    return out


# ---------------------------------------------------------------------------
# validation


_CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")


def validate(program: Program, known_domains: dict | None = None) -> list[Diagnostic]:
    """Type, safety, domain and case checks.  Returns diagnostics (empty if valid).

    ``known_domains`` maps domain names to element collections for domains
    that are not declared in the program (e.g. inferred from data).
    """
    diags: list[Diagnostic] = []
    decls = program.rel_decls
    ddecls = program.domain_decls
    known_domains = known_domains or {}

    def err(code, msg, span):
        diags.append(Diagnostic("error", code, msg, span))

    # declarations
    seen_rel = {}
    for it in program.items:
        if isinstance(it, RelDecl):
            if it.name in seen_rel:
                err("decl", f"relation {it.name} declared twice", it.span)
            seen_rel[it.name] = it
            try:
                program.resolve_pops(it.pops)
            except KeyError:
                err("pops", f"unknown POPS {it.pops!r} for {it.name}", it.span)
        elif isinstance(it, DomainDecl):
            if it.lo is not None and it.hi is not None and it.lo > it.hi:
                err("domain", f"empty integer range {it.lo}..{it.hi} for domain {it.name}", it.span)
            if it.elements is not None and len(set(it.elements)) != len(it.elements):
                err("domain", f"domain {it.name} lists a constant twice", it.span)
    if diags:
        return diags

    def dom_elems(name):
        d = ddecls.get(name)
        if d is not None:
            return range(d.lo, d.hi + 1) if d.elements is None else d.elements
        return known_domains.get(name)

    def is_int_dom(name):
        d = ddecls.get(name)
        return d is not None and d.elements is None

    for it in program.rules:
        _validate_rule(program, it, err, dom_elems, is_int_dom)
    for name, d in decls.items():
        if d.kind == "idb" and not program.rules_for(name):
            diags.append(Diagnostic("warning", "norules", f"IDB {name} has no rules; it is constantly bottom", d.span))
    if not any(d.severity == "error" for d in diags):
        try:
            stratify(program)
        except StratificationError as e:
            err("strata", str(e), NOSPAN)
    return diags


def _validate_rule(program: Program, rule: Rule, err, dom_elems, is_int_dom):
    decls = program.rel_decls
    head = rule.head
    hd = decls.get(head.name)
    if hd is None:
        err("undeclared", f"relation {head.name} is not declared", head.span)
        return
    if hd.kind != "idb":
        err("head", f"{head.name} is an EDB and cannot appear in a rule head", head.span)
        return
    if len(head.args) != len(hd.domains):
        err("arity", f"{head.name} has arity {len(hd.domains)}, head uses {len(head.args)}", head.span)
        return
    rule_pops = program.pops_of(head.name)
    head_vars = set(rule.head_vars)
    for t, dname in zip(head.args, hd.domains):
        if isinstance(t, Const):
            _check_const(t, dname, dom_elems, err)
        elif isinstance(t, KeyFn):
            err("head", "key arithmetic is not allowed in rule heads", t.span)

    def check_atom(a: RelAtom, bound: set[str]):
        d = decls.get(a.name)
        if d is None:
            err("undeclared", f"relation {a.name} is not declared", a.span)
            return None
        if len(a.args) != len(d.domains):
            err("arity", f"{a.name} has arity {len(d.domains)}, used with {len(a.args)}", a.span)
            return None
        for t, dname in zip(a.args, d.domains):
            if isinstance(t, Const):
                _check_const(t, dname, dom_elems, err)
            elif isinstance(t, KeyFn):
                if not is_int_dom(dname):
                    err("keyfn", f"key arithmetic on {t.var.name} needs an integer-range domain, {dname} is not", t.span)
                if t.var.name not in bound:
                    err("unbound", f"variable {t.var.name} is not bound", t.span)
            elif isinstance(t, Var) and t.name not in bound:
                err("unbound", f"variable {t.name} is not bound", t.span)
        return d

    def check_cond(c, bound: set[str], allow_atoms: bool):
        for n in walk(c):
            if isinstance(n, CondRel):
                if not allow_atoms:
                    err("case", "case conditions may only compare key variables", n.span)
                d = check_atom(n.atom, bound)
                if d is not None and program.pops_of(n.atom.name) != BOOL:
                    err("type", f"condition atom {n.atom.name} must be Bool", n.span)
            elif isinstance(n, CondCmp):
                for side in (n.left, n.right):
                    for s, t in side.parts:
                        if isinstance(t, Var) and t.name not in bound:
                            err("unbound", f"variable {t.name} is not bound", t.span)
                        if len(side.parts) > 1 and isinstance(t, Const) and not isinstance(t.value, int):
                            err("arith", f"cannot do arithmetic on symbolic constant {t.value!r}", t.span)

    # collect all flat products across branches
    for cond, body in rule_branches(rule):
        if cond is not None:
            check_cond(cond, head_vars, allow_atoms=False)
        try:
            flats = flatten(body, head_vars)
        except RecursionError:
            err("depth", "rule body is nested too deeply", rule.span)
            continue
        for fp in flats:
            bound = set(head_vars) | {b.var for b in fp.binders}
            dmap = var_domains(program, rule, fp, diags=None)
            for b in fp.binders:
                if b.lo is not None:
                    dn = dmap.get(b.var)
                    if dn is not None:
                        if not is_int_dom(dn):
                            err("range", f"explicit range on {b.var} needs an integer domain, {dn} is not", b.span)
                        else:
                            el = dom_elems(dn)
                            if b.lo < el[0] or b.hi > el[-1]:
                                err("range", f"range {b.lo}..{b.hi} of {b.var} lies outside domain {dn}", b.span)
                elif dmap.get(b.var) is None:
                    err("domain", f"cannot infer a domain for {b.var}; use it in an atom or give a range", b.span)
            for g in fp.guards:
                check_cond(g, bound, allow_atoms=True)
            for f in fp.factors:
                _check_factor(program, f, rule_pops, bound, check_atom, err, dmap, dom_elems)
            # safety
            covered = _covered(fp, cond, head_vars)
            for v in rule.head_vars:
                if v not in covered:
                    err(
                        "safety",
                        f"head variable {v} of {head.name} does not occur in an atom of every product",
                        fp.factors[0].span if fp.factors else body.span,
                    )
    if isinstance(rule.body, Cases):
        _check_cases(program, rule, err, dom_elems)


def _check_const(t: Const, dname: str, dom_elems, err):
    el = dom_elems(dname)
    if el is not None and t.value not in el:
        err("const", f"constant {t.value!r} is not in domain {dname}", t.span)


def _check_factor(program, f, rule_pops, bound, check_atom, err, dmap, dom_elems=None):
    decls = program.rel_decls
    if isinstance(f, RelAtom):
        d = check_atom(f, bound)
        if d is not None:
            p = program.pops_of(f.name)
            if p != rule_pops:
                err(
                    "type",
                    f"{f.name} has type {p.name} but the rule is over {rule_pops.name}; wrap it in a cast or function",
                    f.span,
                )
    elif isinstance(f, (CastAtom, FnApp)):
        d = check_atom(f.atom, bound)
        if d is None:
            return
        src = program.pops_of(f.atom.name)
        try:
            fn = function_for(program, f, rule_pops)
        except (UnknownFunction, PopsError, ValueError) as e:
            err("function", e.args[0] if e.args else str(e), f.span)
            return
        if not fn.accepts(src) or get_pops(fn.target) != rule_pops:
            err(
                "type",
                f"{fn.label} maps {fn.source} to {fn.target}; used from {src.name} into a {rule_pops.name} rule",
                f.span,
            )
    elif isinstance(f, EqAtom):
        for t in (f.left, f.right):
            for v in term_vars(t):
                if v not in bound:
                    err("unbound", f"variable {v} is not bound", f.span)
        if dom_elems is not None:
            for a, b in ((f.left, f.right), (f.right, f.left)):
                if isinstance(a, Var) and isinstance(b, Const) and dmap.get(a.name):
                    _check_const(b, dmap[a.name], dom_elems, err)
    elif isinstance(f, Literal):
        try:
            rule_pops.parse(f.text)
        except (PopsError, ValueError) as e:
            err("literal", f"literal {f.text} is not a {rule_pops.name} value: {e}", f.span)
    elif isinstance(f, KeyValue):
        t = f.term
        if isinstance(t, Const) and not isinstance(t.value, int):
            err("keyvalue", f"symbolic constant {t.value!r} cannot be used as a value", f.span)
        elif isinstance(t, Var):
            if t.name not in bound:
                err("unbound", f"{t.name} is neither a bound variable nor a value literal", f.span)
            else:
                dn = dmap.get(t.name)
                ddecl = program.domain_decls.get(dn) if dn else None
                if dn is not None and (ddecl is None or ddecl.elements is not None):
                    err("keyvalue", f"variable {t.name} ranges over symbolic domain {dn}; only integers are values", f.span)
        try:
            rule_pops.from_number(0)
        except PopsError:
            err("keyvalue", f"key values cannot be used in a {rule_pops.name} rule", f.span)


def _covered(fp: FlatProduct, case_cond, head_vars: set[str]) -> set[str]:
    """Variables pinned by a relational atom or by an equality chain to one."""
    cov: set[str] = set()
    eqs: list[tuple[set[str], set[str]]] = []  # (lhs vars, rhs vars) equalities
    for f in fp.factors:
        a = factor_atom(f)
        if a is not None:
            for t in a.args:
                cov |= term_vars(t)
        elif isinstance(f, EqAtom):
            eqs.append((term_vars(f.left), term_vars(f.right)))
    conds = list(fp.guards) + ([case_cond] if case_cond is not None else [])
    for c in conds:
        for conj in _conjuncts(c):
            if isinstance(conj, CondRel):
                for t in conj.atom.args:
                    cov |= term_vars(t)
            elif isinstance(conj, CondCmp) and conj.op == "=":
                eqs.append((conj.left.vars(), conj.right.vars()))
    changed = True
    while changed:
        changed = False
        for l, r in eqs:
            # a single unknown on one side is determined by the other side
            for a, b in ((l, r), (r, l)):
                if len(a - cov) == 1 and len(a) == 1 and b <= cov:
                    cov |= a
                    changed = True
    return cov


def _conjuncts(c) -> list:
    if isinstance(c, CondAnd):
        out = []
        for i in c.items:
            out.extend(_conjuncts(i))
        return out
    return [c]


def eval_arith(a: Arith, env: dict):
    total = 0
    for sign, t in a.parts:
        v = env[t.name] if isinstance(t, Var) else t.value
        if len(a.parts) == 1:
            return v
        total += sign * v
    return total


def eval_cond(c, env: dict, rel_truth=None) -> bool:
    """Evaluate a condition; ``rel_truth(atom, env)`` decides relation tests."""
    if isinstance(c, CondCmp):
        l, r = eval_arith(c.left, env), eval_arith(c.right, env)
        if c.op == "=":
            return l == r
        if c.op == "!=":
            return l != r
        if isinstance(l, str) or isinstance(r, str):
            l, r = str(l), str(r)
        return {"<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r}[c.op]
    if isinstance(c, CondNot):
        return not eval_cond(c.item, env, rel_truth)
    if isinstance(c, CondAnd):
        return all(eval_cond(i, env, rel_truth) for i in c.items)
    if isinstance(c, CondOr):
        return any(eval_cond(i, env, rel_truth) for i in c.items)
    if isinstance(c, CondRel):
        if rel_truth is None:
            raise ValueError("relation test outside grounding")
        return rel_truth(c.atom, env)
    raise TypeError(f"not a condition: {c!r}")


_MAX_CASE_ENUM = 200_000


def _check_cases(program: Program, rule: Rule, err, dom_elems):
    hd = program.rel_decls[rule.head.name]
    vars_ = rule.head_vars
    pos = {}
    for t, dn in zip(rule.head.args, hd.domains):
        if isinstance(t, Var):
            pos.setdefault(t.name, dn)
    elems = [dom_elems(pos[v]) for v in vars_]
    if any(e is None for e in elems):
        return
    total = 1
    for e in elems:
        total *= len(e)
    if total > _MAX_CASE_ENUM:
        return
    branches = rule.body.branches
    has_else = rule.body.else_ is not None
    for combo in itertools.product(*elems):
        env = dict(zip(vars_, combo))
        try:
            hits = [i for i, b in enumerate(branches) if eval_cond(b.cond, env)]
        except (KeyError, ValueError, TypeError):
            return
        if len(hits) > 1:
            err("case", f"case branches {hits[0] + 1} and {hits[1] + 1} overlap at {_fmt_env(env)}", rule.span)
            return
        if not hits and not has_else:
            err("case", f"no case branch matches {_fmt_env(env)} and there is no else", rule.span)
            return


def _fmt_env(env):
    return ", ".join(f"{k}={v}" for k, v in env.items())


# ---------------------------------------------------------------------------
# stratification


@dataclass(frozen=True)
class Stratum:
    index: int
    idbs: tuple
    rules: tuple

    def pops(self, program: Program) -> list[Pops]:
        out = []
        for r in self.idbs:
            p = program.pops_of(r)
            if p not in out:
                out.append(p)
        return out


def dependencies(program: Program) -> dict[str, list[tuple[str, bool]]]:
    """Edges head -> (body IDB, forcing) where forcing edges need a lower stratum."""
    idbs = set(program.idbs)
    deps: dict[str, list[tuple[str, bool]]] = {r: [] for r in program.idbs}
    for rule in program.rules:
        h = rule.head.name
        if h not in deps:
            continue
        rule_pops = program.pops_of(h)
        for node in walk(rule.body):
            if isinstance(node, RelAtom):
                continue
            if isinstance(node, CondRel) and node.atom.name in idbs:
                deps[h].append((node.atom.name, True))
            elif isinstance(node, (CastAtom, FnApp)) and node.atom.name in idbs:
                try:
                    fn = function_for(program, node, rule_pops)
                    forcing = not fn.monotone
                except PopsError:
                    forcing = True
                deps[h].append((node.atom.name, forcing))
        # plain atoms (not wrapped)
        for node in _plain_atoms(rule.body):
            if node.name in idbs:
                deps[h].append((node.name, False))
    return deps


def _plain_atoms(node) -> list[RelAtom]:
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, RelAtom):
            out.append(n)
        elif isinstance(n, (CastAtom, FnApp, CondRel, Cond.__args__)):
            continue
        else:
            stack.extend(children(n))
    return out


def stratify(program: Program) -> list[Stratum]:
    """Strongly connected components of the IDB dependency graph, dependencies first."""
    deps = dependencies(program)
    order = list(deps)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comps: list[list[str]] = []
    counter = itertools.count()

    # iterative Tarjan
    for root in order:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = next(counter)
                stack.append(v)
                on_stack.add(v)
            succ = [w for w, _ in deps[v]]
            recursed = False
            while i < len(succ):
                w = succ[i]
                i += 1
                if w not in index:
                    work.append((v, i))
                    work.append((w, 0))
                    recursed = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if recursed:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp, key=order.index))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    strata = []
    for k, comp in enumerate(comps):
        members = set(comp)
        for h in comp:
            for w, forcing in deps[h]:
                if forcing and w in members:
                    raise StratificationError(
                        f"{h} depends on {w} through a non-monotone function or condition inside one recursive component"
                    )
        rules = tuple(r for r in program.rules if r.head.name in members)
        strata.append(Stratum(k, tuple(comp), rules))
    return strata


def classify_linear(program: Program, stratum: Stratum) -> bool:
    """True iff every product references at most one IDB occurrence of the stratum."""
    members = set(stratum.idbs)
    for rule in stratum.rules:
        for _, body in rule_branches(rule):
            for fp in flatten(body, rule.head_vars):
                n = 0
                for f in fp.factors:
                    a = factor_atom(f)
                    if a is not None and a.name in members:
                        n += 1
                if n > 1:
                    return False
    return True


def is_cast_free(program: Program, stratum: Stratum) -> bool:
    members = set(stratum.idbs)
    for rule in stratum.rules:
        for node in walk(rule.body):
            if isinstance(node, (CastAtom, FnApp)) and node.atom.name in members:
                return False
    return True
