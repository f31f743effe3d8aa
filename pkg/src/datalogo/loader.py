"""Loading EDB directories and locating bundled example programs."""
from __future__ import annotations

import logging
import os
from importlib import resources

from .ast import Const, EqAtom, Program, RelAtom, walk
from .store import Database, DomainTable, Relation, Schema, load_table

log = logging.getLogger(__name__)


def bundled(name: str = "") -> str:
    """Filesystem path of a bundled program or data directory."""
    base = resources.files("datalogo") / "programs"
    return str(base / name) if name else str(base)


def _program_constants_by_domain(program: Program) -> dict[str, set]:
    decls = program.rel_decls
    out: dict[str, set] = {}
    for r in program.rules:
        for node in walk(r):
            if isinstance(node, RelAtom) and node.name in decls:
                for t, dn in zip(node.args, decls[node.name].domains):
                    if isinstance(t, Const):
                        out.setdefault(dn, set()).add(t.value)
    return out


def declared_domains(program: Program) -> dict[str, DomainTable]:
    out = {}
    for d in program.domain_decls.values():
        if d.elements is None:
            out[d.name] = DomainTable(d.name, int_range=(d.lo, d.hi))
        else:
            out[d.name] = DomainTable(d.name, d.elements)
    return out


def load_database(program: Program, edb_dir: str | None = None, relations: dict | None = None) -> Database:
    """Read ``<edb_dir>/<Name>.csv`` (or ``.tsv``) for every EDB of the program.

    Declared domains are closed: unknown constants are errors.  Domains that
    are not declared are inferred from the data plus the program's constants.
    Missing files give empty relations.
    """
    domains = declared_domains(program)
    inferred = set()
    for d in program.rel_decls.values():
        for dn in d.domains:
            if dn not in domains:
                domains[dn] = DomainTable(dn)
                inferred.add(dn)
    consts = _program_constants_by_domain(program)
    for dn in sorted(inferred):
        for c in sorted(consts.get(dn, ()), key=str):
            domains[dn].add(c)
    db = Database(domains)
    for name in program.edbs:
        d = program.rel_decls[name]
        schema = Schema(name, d.domains, program.pops_of(name).name, "edb")
        if relations and name in relations:
            db.relations[name] = relations[name]
            continue
        path = None
        if edb_dir:
            for ext in (".csv", ".tsv"):
                cand = os.path.join(edb_dir, name + ext)
                if os.path.exists(cand):
                    path = cand
                    break
        if path is None:
            log.warning("no data file for EDB %s; using an empty relation", name)
            db.relations[name] = Relation(schema, domains)
        else:
            db.relations[name] = load_table(path, schema, domains, closed=False, open_domains=inferred)
    for dn in sorted(inferred):
        log.info("inferred domain %s = %s", dn, domains[dn].elements)
    for r in db.relations.values():
        r.freeze()
    return db
