"""Independent reference implementations used to cross-check the engine.

Nothing here imports the engine, linear solver or semiring code paths;
the graph oracles work on plain numbers and the fixpoint iterator only
reads the grounded system's data.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable

INF = math.inf


class OracleError(ValueError):
    pass


def _adj(edges: Iterable[tuple], nodes: Iterable | None = None):
    adj: dict = {}
    for e in edges:
        u, v = e[0], e[1]
        w = e[2] if len(e) > 2 else 1
        if w < 0:
            raise OracleError(f"negative weight {w} on edge {u}->{v}")
        adj.setdefault(u, []).append((v, w))
        adj.setdefault(v, [])
    for n in nodes or ():
        adj.setdefault(n, [])
    return adj


def dijkstra(edges: Iterable[tuple], src, nodes: Iterable | None = None) -> dict:
    """Single-source shortest distances; unreachable nodes map to inf."""
    adj = _adj(edges, nodes)
    adj.setdefault(src, [])
    dist = {n: INF for n in adj}
    dist[src] = 0
    heap = [(0, 0, src)]
    tick = 1
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, tick, v))
                tick += 1
    return dist


def k_lowest_walks(edges: Iterable[tuple], src, k: int, nodes: Iterable | None = None) -> dict:
    """Costs of the k cheapest walks from ``src`` to every node, padded with inf.

    Best-first search over walks; each node is settled at most k times, which
    is enough because every prefix of one of the k cheapest walks to v is
    among the k cheapest walks to its endpoint.
    """
    if k < 1:
        raise OracleError("k must be at least 1")
    adj = _adj(edges, nodes)
    adj.setdefault(src, [])
    found = {n: [] for n in adj}
    heap = [(0, 0, src)]
    tick = 1
    while heap:
        d, _, u = heapq.heappop(heap)
        if len(found[u]) >= k:
            continue
        found[u].append(d)
        for v, w in adj[u]:
            if len(found[v]) < k:
                heapq.heappush(heap, (d + w, tick, v))
                tick += 1
    return {n: tuple(c + [INF] * (k - len(c))) for n, c in found.items()}


def reach(edges: Iterable[tuple], src, nodes: Iterable | None = None) -> set:
    """Nodes reachable from ``src`` by a walk of length >= 0 (BFS)."""
    adj = _adj(edges, nodes)
    seen = {src}
    q = deque([src])
    while q:
        u = q.popleft()
        for v, _ in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                q.append(v)
    return seen


def transitive_closure(edges: Iterable[tuple], nodes: Iterable | None = None) -> set:
    """Pairs (x, y) joined by a walk of length >= 1."""
    edges = list(edges)
    adj = _adj(edges, nodes)
    out = set()
    for s in adj:
        seen = set()
        q = deque(v for v, _ in adj[s])
        while q:
            u = q.popleft()
            if u in seen:
                continue
            seen.add(u)
            q.extend(v for v, _ in adj[u])
        out |= {(s, t) for t in seen}
    return out


@dataclass
class BruteSolution:
    assignment: tuple
    iterations: int
    converged: bool
    history: list


def brute_fixpoint(system, cap: int = 10_000) -> BruteSolution:
    """Plain Kleene iteration from bottom, written independently of the engine."""
    n = len(system.vars)
    cur = tuple(system.pops[k].bot for k in range(n))
    history = [cur]
    for t in range(1, cap + 2):
        nxt = []
        for k in range(n):
            P = system.pops[k]
            total = P.zero
            for mono in system.polys[k]:
                val = mono.coeff
                for fac in mono.factors:
                    x = cur[fac.var]
                    if fac.fn is not None:
                        x = fac.fn.fn(x)
                    for _ in range(fac.mult):
                        val = P.mul(val, x)
                total = P.add(total, val)
            nxt.append(total)
        nxt = tuple(nxt)
        history.append(nxt)
        if nxt == cur:
            return BruteSolution(nxt, t, True, history)
        cur = nxt
    return BruteSolution(cur, cap + 1, False, history)


def well_founded_winmove(edges: Iterable[tuple], nodes: Iterable | None = None) -> dict:
    """Well-founded model of Win(x) :- E(x,y), not Win(y) by alternating fixpoints.

    Returns a map node -> True / False / None (None is undefined).
    The sequence I_0 = all false, I_{i+1}(x) = exists y: E(x,y) and not I_i(y)
    alternates between underestimates (even i) and overestimates (odd i).
    """
    adj = _adj(edges, nodes)
    ns = sorted(adj, key=str)
    seq = alternating_sequence(edges, nodes)
    # even indices underestimate, odd indices overestimate the true atoms
    last = len(seq) - 1
    under = seq[last] if last % 2 == 0 else seq[last - 1]
    over = seq[last - 1] if last % 2 == 0 else seq[last]
    out = {}
    for n in ns:
        if under[n]:
            out[n] = True
        elif not over[n]:
            out[n] = False
        else:
            out[n] = None
    return out


def alternating_sequence(edges: Iterable[tuple], nodes: Iterable | None = None, max_steps: int = 10_000) -> list:
    """I_0, I_1, ... until both the even and the odd subsequences are stable."""
    adj = _adj(edges, nodes)
    cur = {n: False for n in adj}
    seq = [cur]
    for _ in range(max_steps):
        nxt = {x: any(not cur[y] for y, _ in adj[x]) for x in adj}
        seq.append(nxt)
        if len(seq) >= 4 and seq[-1] == seq[-3] and seq[-2] == seq[-4]:
            break
        cur = nxt
    return seq
