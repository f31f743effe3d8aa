import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grounded, random_graph
from datalogo.oracle import (
    INF,
    OracleError,
    alternating_sequence,
    brute_fixpoint,
    dijkstra,
    k_lowest_walks,
    reach,
    transitive_closure,
    well_founded_winmove,
)

WM_EDGES = [("a", "b"), ("b", "a"), ("b", "c"), ("c", "d"), ("e", "f")]


def test_dijkstra_fig1(fig1_edges):
    assert dijkstra(fig1_edges, "a") == {"a": 0, "b": 1, "c": 4, "d": 8}
    assert dijkstra(fig1_edges, "d")["a"] == INF
    with pytest.raises(OracleError):
        dijkstra([("a", "b", -1)], "a")


def test_k_lowest_fig1(fig1_edges):
    got = k_lowest_walks(fig1_edges, "a", 2)
    assert got == {"a": (0, 3), "b": (1, 4), "c": (4, 5), "d": (8, 9)}
    assert k_lowest_walks([], "a", 3) == {"a": (0, INF, INF)}


def test_reach_and_closure():
    edges = [("a", "b"), ("b", "c"), ("d", "d")]
    assert reach(edges, "a") == {"a", "b", "c"}
    assert transitive_closure(edges) == {("a", "b"), ("a", "c"), ("b", "c"), ("d", "d")}


def test_well_founded_winmove():
    wf = well_founded_winmove(WM_EDGES)
    assert wf == {"a": None, "b": None, "c": True, "d": False, "e": True, "f": False}
    seq = alternating_sequence(WM_EDGES)
    assert seq[0] == {n: False for n in "abcdef"}


def test_brute_matches_sssp_table():
    sol = brute_fixpoint(grounded("sssp.dl", "fig1"))
    assert sol.converged and sol.iterations == 5
    assert sol.history[3] == (0, 1, 4, 9)


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 6), st.integers(1, 3))
def test_k_lowest_first_entry_is_dijkstra(rng, n, k):
    nodes, edges = random_graph(rng, n)
    walks = k_lowest_walks(edges, nodes[0], k, nodes)
    dist = dijkstra(edges, nodes[0], nodes)
    assert {v: w[0] for v, w in walks.items()} == dist
    assert all(list(w) == sorted(w) for w in walks.values())


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 7))
def test_closure_agrees_with_reach(rng, n):
    nodes, edges = random_graph(rng, n, weighted=False)
    tc = transitive_closure(edges, nodes)
    for s in nodes:
        one_step = {v for u, v in edges if u == s}
        want = set().union(*(reach(edges, v, nodes) for v in one_step)) if one_step else set()
        assert {t for x, t in tc if x == s} == want
