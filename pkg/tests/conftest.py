import pytest

from datalogo.ast import stratify
from datalogo.ground import active_domain_restrict, ground
from datalogo.loader import bundled, load_database
from datalogo.parser import parse, parse_file


def load(program, data=None, relations=None):
    """Parse a bundled program (by name) or program text and load its EDBs."""
    p = parse_file(bundled(program)) if program.endswith(".dl") else parse(program)
    db = load_database(p, bundled(data) if data else None, relations)
    return p, db


def grounded(program, data=None, restrict=False, stratum=0, relations=None):
    p, db = load(program, data, relations)
    st = stratify(p)[stratum]
    sys_ = ground(p, st, db.domains, db.relations)
    return active_domain_restrict(sys_) if restrict else sys_


@pytest.fixture
def fig1_edges():
    return [("a", "b", 1), ("b", "a", 2), ("a", "c", 5), ("b", "c", 3), ("c", "d", 4)]


def graph_db(program_text, edges, rel="E", value=None):
    """Load a program with no data files, then fill ``rel`` from an edge list."""
    from datalogo.store import Relation, Schema

    p, db = load(program_text)
    d = p.rel_decls[rel]
    r = Relation(Schema(rel, d.domains, p.pops_of(rel).name, "edb"), db.domains)
    P = r.pops
    for e in edges:
        v = value(e) if value else P.from_number(e[2]) if len(e) > 2 else P.one
        r.put_combine(tuple(e[:2]), v)
    db.relations[rel] = r.freeze()
    return p, db


def graph_header(nodes, pops, idb_sig="(node)", extra=""):
    return (
        "domain node = {" + ", ".join(nodes) + "}.\n"
        f"edb E(node, node): {pops}.\n"
        f"idb L{idb_sig}: {pops}.\n" + extra
    )


def random_graph(rng, n, p_edge=0.3, wmax=9, weighted=True):
    nodes = [f"n{i}" for i in range(n)]
    edges = []
    for u in nodes:
        for v in nodes:
            if rng.random() < p_edge:
                edges.append((u, v, rng.randint(0, wmax)) if weighted else (u, v))
    return nodes, edges


def random_system(rng, pops, n, linear=True, density=0.3, const_p=0.4):
    """A random polynomial system over one POPS, as accepted by system_from_polys."""
    from datalogo.ground import system_from_polys

    polys = []
    for _ in range(n):
        poly = []
        if rng.random() < const_p:
            poly.append((pops.sample(rng), []))
        for i in range(n):
            if rng.random() < density:
                if linear or rng.random() < 0.5:
                    poly.append((pops.sample(rng), [i]))
                else:
                    poly.append((pops.sample(rng), [i, rng.randrange(n)]))
        polys.append(poly)
    return system_from_polys(pops, polys)
