import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graph_db, graph_header, grounded, load
from datalogo.ast import stratify
from datalogo.ground import (
    GroundingBudgetError,
    MissingBranchError,
    active_domain_restrict,
    ground,
    ico_apply,
    system_from_polys,
)
from datalogo.engine import naive_eval
from datalogo.pops import BOT, INF, TROPPLUS, Tri

SSSP_DUMP = """\
x_1: L(a) = 0 + 2 * x_2
x_2: L(b) = 1 * x_1
x_3: L(c) = 5 * x_1 + 3 * x_2
x_4: L(d) = 4 * x_3
"""


def test_sssp_grounding_golden():
    s = grounded("sssp.dl", "fig1")
    assert s.dump() == SSSP_DUMP
    assert s.stats() == {"N": 4, "monomials": 6}


def test_subpart_grounding():
    s = grounded("parts_real.dl", "fig2")
    lines = s.dump_lines()
    assert lines[0] == "x_1: T(a) = 1 + 1 * x_2 + 1 * x_3"
    assert lines[3] == "x_4: T(d) = 10"


def test_false_equality_gives_empty_sums():
    src = graph_header(["a", "b"], "tropplus") + "L(x) :- [x = a] * [x = b] * E(x, x)."
    p, db = graph_db(src, [("a", "a", 1)])
    s = ground(p, stratify(p)[0], db.domains, db.relations)
    assert s.polys == [[], []]
    assert s.dump_lines() == ["x_1: L(a) = inf", "x_2: L(b) = inf"]


def test_ico_examples():
    s = grounded("sssp.dl", "fig1")
    assert ico_apply(s, s.bottom()) == (0, INF, INF, INF)
    c = system_from_polys(TROPPLUS, [[(7, [])]])
    assert ico_apply(c, (3,)) == (7,) and ico_apply(c, (INF,)) == (7,)
    w = grounded("winmove.dl", "wm")
    assert ico_apply(w, w.bottom()) == (Tri.U,) * 5 + (Tri.F,)


def test_cast_dump_and_coefficients():
    s = grounded("company.dl", "company", restrict=True)
    assert "x_3: CV(c1,c2,c3) = 3/10 * cast[bool](x_15)" in s.dump_lines()


def test_window_sum_folds_edb_terms():
    s = grounded("window_sum.dl", "vec")
    assert s.dump_lines()[2] == "x_3: W(2) = 2 + 1 * x_2"


def test_restriction_drops_isolated_node():
    src = graph_header(["a", "b", "c", "d", "z"], "tropplus") + "L(x) :- [x = a] + sum(y){ L(y) * E(y, x) }."
    edges = [("a", "b", 1), ("b", "a", 2), ("a", "c", 5), ("b", "c", 3), ("c", "d", 4)]
    p, db = graph_db(src, edges)
    full = ground(p, stratify(p)[0], db.domains, db.relations)
    small = active_domain_restrict(full)
    assert ("L", ("z",)) in small.dropped and small.N == 4
    a, b = naive_eval(full).assignment, naive_eval(small).assignment
    assert b == tuple(a[full.index[v]] for v in small.vars)


def test_restriction_refused_for_three():
    w = grounded("winmove.dl", "wm")
    r = active_domain_restrict(w)
    assert r is w
    assert any("refused" in n for n in r.notices)


def test_restriction_with_no_facts():
    src = graph_header(["a", "b"], "tropplus") + "L(x) :- sum(y){ L(y) * E(y, x) } + E(x, x)."
    p, db = graph_db(src, [])
    r = active_domain_restrict(ground(p, stratify(p)[0], db.domains, db.relations))
    assert r.N == 0


def test_missing_branch_and_budget():
    src = "domain idx = 0..3. edb V(idx): real_bot. idb W(idx): real_bot.\nW(i) :- case i < 2 : V(i)."
    p, db = load(src)
    with pytest.raises(MissingBranchError, match=r"W\(2\)"):
        ground(p, stratify(p)[0], db.domains, db.relations)
    p, db = load("apsp.dl", "fig1")
    with pytest.raises(GroundingBudgetError):
        ground(p, stratify(p)[0], db.domains, db.relations, budget=5)


def test_lower_strata_become_coefficients():
    s = grounded("apsp_extract.dl", "fig1_costs", stratum=0)
    assert s.pops_set()[0].name == "bool"
    p, db = load("apsp_extract.dl", "fig1_costs")
    st0, st1 = stratify(p)
    from datalogo.engine import solution_relations

    s0 = ground(p, st0, db.domains, db.relations)
    rels = dict(db.relations)
    rels.update(solution_relations(p, st0, s0, naive_eval(s0), db.domains))
    s1 = ground(p, st1, db.domains, rels)
    assert not any(m.factors for poly in s1.polys for m in poly)


# --- properties --------------------------------------------------------------


def _trop_values(draw_rng, n):
    return tuple(draw_rng.choice([INF, 0, 1, 2, 3, 5, 8]) for _ in range(n))


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_ico_is_monotone(rng):
    s = grounded("apsp.dl", "fig1")
    A = _trop_values(rng, s.N)
    C = _trop_values(rng, s.N)
    B = tuple(TROPPLUS.add(a, c) for a, c in zip(A, C))  # A below B pointwise
    FA, FB = ico_apply(s, A), ico_apply(s, B)
    assert all(TROPPLUS.leq(x, y) for x, y in zip(FA, FB))


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 4))
def test_grounding_matches_direct_enumeration(rng, n):
    # direct evaluation of T(x,y) = E(x,y) + min_z T(x,z) + E(z,y) on dictionaries
    nodes = [f"n{i}" for i in range(n)]
    edges = [(u, v, rng.randint(0, 9)) for u in nodes for v in nodes if rng.random() < 0.5]
    src = graph_header(nodes, "tropplus", "(node, node)") + "L(x, y) :- E(x, y) + sum(z){ L(x, z) * E(z, y) }."
    p, db = graph_db(src, edges)
    s = ground(p, stratify(p)[0], db.domains, db.relations)
    E = {(u, v): w for u, v, w in edges}
    T = {(x, y): rng.choice([INF, 0, 2, 7]) for x in nodes for y in nodes}
    direct = {}
    for x in nodes:
        for y in nodes:
            best = E.get((x, y), INF)
            for z in nodes:
                best = min(best, T[(x, z)] + E.get((z, y), INF))
            direct[(x, y)] = best
    out = ico_apply(s, tuple(T[v[1]] for v in s.vars))
    assert {v[1]: out[k] for k, v in enumerate(s.vars)} == direct


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False))
def test_restriction_preserves_fixpoint(rng):
    nodes = [f"n{i}" for i in range(5)]
    edges = [(u, v, rng.randint(0, 5)) for u in nodes for v in nodes if rng.random() < 0.25]
    src = graph_header(nodes, "tropplus") + "L(x) :- [x = n0] + sum(y){ L(y) * E(y, x) }."
    p, db = graph_db(src, edges)
    full = ground(p, stratify(p)[0], db.domains, db.relations)
    small = active_domain_restrict(full)
    a, b = naive_eval(full).assignment, naive_eval(small).assignment
    assert b == tuple(a[full.index[v]] for v in small.vars)
    assert all(a[full.index[v]] == INF for v in small.dropped)


def test_lifted_restriction_keeps_bottom_semantics():
    s = grounded("parts_real.dl", "fig2")
    r = active_domain_restrict(s)
    full = naive_eval(s).assignment
    part = naive_eval(r).assignment
    assert part == tuple(full[s.index[v]] for v in r.vars)
    assert all(full[s.index[v]] is BOT for v in r.dropped)
