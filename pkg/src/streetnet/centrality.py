"""Node centrality: PageRank by power iteration and betweenness centrality
via Brandes' accumulation over single-source shortest paths.

Betweenness runs on the simple directed projection (parallel edges collapse
to their minimum length; self-loops are dropped, as they lie on no shortest
path). The default implementation is a numba-compiled kernel parallelized
across source nodes; ``exact=True`` switches to a pure-Python variant using
rational arithmetic, which is bit-exact for oracle comparisons on small
graphs.
"""

from __future__ import annotations

import heapq
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import DisconnectedWarning, EmptyNetwork, NonConvergence
from .graph import StreetGraph


class PageRankResult(NamedTuple):
    max_value: float
    min_value: float
    values: dict


class BetweennessResult(NamedTuple):
    max_value: float
    values: dict
    reachable_pair_fraction: float


def pagerank(g: StreetGraph, damping: float = 0.85, tol: float = 1e-9, max_iter: int = 1000) -> PageRankResult:
    """Power-iteration PageRank on the directed multigraph.

    Parallel edges contribute proportionally to out-weight; dangling nodes
    redistribute their rank uniformly. Converged when the L1 change drops
    below ``tol``; the returned vector sums to 1 within 1e-9.
    """
    nodes = sorted(g.nodes)
    n = len(nodes)
    if n == 0:
        raise EmptyNetwork("pagerank requires at least one node")
    index = {node: i for i, node in enumerate(nodes)}
    src = np.array([index[g.edges[eid].u] for eid in sorted(g.edges)], dtype=np.int64)
    dst = np.array([index[g.edges[eid].v] for eid in sorted(g.edges)], dtype=np.int64)
    outdeg = np.bincount(src, minlength=n).astype(float)
    dangling = outdeg == 0.0
    safe_out = np.where(dangling, 1.0, outdeg)

    x = np.full(n, 1.0 / n)
    err = np.inf
    for _ in range(max_iter):
        contrib = x / safe_out
        flow = np.bincount(dst, weights=contrib[src], minlength=n) if len(src) else np.zeros(n)
        x_new = (1.0 - damping) / n + damping * (flow + x[dangling].sum() / n)
        err = float(np.abs(x_new - x).sum())
        x = x_new
        if err < tol:
            break
    else:
        raise NonConvergence(f"pagerank did not converge in {max_iter} iterations (residual {err:.3e})", residual=err)
    values = dict(zip(nodes, x.tolist()))
    return PageRankResult(max_value=float(x.max()), min_value=float(x.min()), values=values)


def _simple_projection(g: StreetGraph, weighted: bool):
    """Sorted node list plus CSR out- and in-adjacency with min edge weights."""
    nodes = sorted(g.nodes)
    index = {node: i for i, node in enumerate(nodes)}
    best: dict[tuple[int, int], float] = {}
    for e in g.edges.values():
        if e.is_self_loop:
            continue
        key = (index[e.u], index[e.v])
        w = e.length_m if weighted else 1.0
        cur = best.get(key)
        if cur is None or w < cur:
            best[key] = w
    n = len(nodes)
    m = len(best)
    fwd = sorted(best.items())
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.empty(m, dtype=np.int64)
    weights = np.empty(m, dtype=np.float64)
    for k, ((u, v), w) in enumerate(fwd):
        indptr[u + 1] += 1
        indices[k] = v
        weights[k] = w
    np.cumsum(indptr, out=indptr)
    rev = sorted(((v, u, w) for (u, v), w in best.items()))
    rindptr = np.zeros(n + 1, dtype=np.int64)
    rindices = np.empty(m, dtype=np.int64)
    rweights = np.empty(m, dtype=np.float64)
    for k, (v, u, w) in enumerate(rev):
        rindptr[v + 1] += 1
        rindices[k] = u
        rweights[k] = w
    np.cumsum(rindptr, out=rindptr)
    return nodes, indptr, indices, weights, rindptr, rindices, rweights


@njit(nogil=True, cache=True)
def _brandes_chunk(indptr, indices, weights, rindptr, rindices, rweights, sources, n):  # pragma: no cover
    bc = np.zeros(n)
    reached = 0
    dist = np.empty(n)
    sigma = np.zeros(n)
    delta = np.zeros(n)
    order = np.empty(n, dtype=np.int64)
    settled = np.zeros(n, dtype=np.uint8)
    cap = len(indices) + n + 1
    heap_d = np.empty(cap)
    heap_v = np.empty(cap, dtype=np.int64)

    for si in range(len(sources)):
        s = sources[si]
        for i in range(n):
            dist[i] = np.inf
            sigma[i] = 0.0
            delta[i] = 0.0
            settled[i] = 0
        dist[s] = 0.0
        heap_d[0] = 0.0
        heap_v[0] = s
        hsize = 1
        norder = 0
        while hsize > 0:
            d = heap_d[0]
            v = heap_v[0]
            hsize -= 1
            heap_d[0] = heap_d[hsize]
            heap_v[0] = heap_v[hsize]
            i = 0
            while True:
                left = 2 * i + 1
                right = left + 1
                smallest = i
                if left < hsize and heap_d[left] < heap_d[smallest]:
                    smallest = left
                if right < hsize and heap_d[right] < heap_d[smallest]:
                    smallest = right
                if smallest == i:
                    break
                heap_d[i], heap_d[smallest] = heap_d[smallest], heap_d[i]
                heap_v[i], heap_v[smallest] = heap_v[smallest], heap_v[i]
                i = smallest
            if settled[v] == 1 or d > dist[v]:
                continue
            settled[v] = 1
            order[norder] = v
            norder += 1
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                nd = d + weights[j]
                if nd < dist[w]:
                    dist[w] = nd
                    heap_d[hsize] = nd
                    heap_v[hsize] = w
                    i = hsize
                    hsize += 1
                    while i > 0:
                        parent = (i - 1) // 2
                        if heap_d[parent] <= heap_d[i]:
                            break
                        heap_d[i], heap_d[parent] = heap_d[parent], heap_d[i]
                        heap_v[i], heap_v[parent] = heap_v[parent], heap_v[i]
                        i = parent
        reached += norder - 1
        sigma[s] = 1.0
        for oi in range(norder):
            w = order[oi]
            if w == s:
                continue
            acc = 0.0
            for j in range(rindptr[w], rindptr[w + 1]):
                v = rindices[j]
                if dist[v] + rweights[j] == dist[w]:
                    acc += sigma[v]
            sigma[w] = acc
        for oi in range(norder - 1, -1, -1):
            w = order[oi]
            if w != s:
                bc[w] += delta[w]
            coeff = (1.0 + delta[w]) / sigma[w]
            for j in range(rindptr[w], rindptr[w + 1]):
                v = rindices[j]
                if dist[v] + rweights[j] == dist[w]:
                    delta[v] += sigma[v] * coeff
    return bc, reached


def _betweenness_exact(adj_out, adj_in, n):
    """Brandes with Fraction arithmetic: exact for any float or int weights."""
    bc = [Fraction(0)] * n
    reached = 0
    for s in range(n):
        dist: dict[int, Fraction] = {s: Fraction(0)}
        sigma = {s: 1}
        settled: list[int] = []
        done = set()
        heap = [(Fraction(0), s)]
        while heap:
            d, v = heapq.heappop(heap)
            if v in done or d > dist[v]:
                continue
            done.add(v)
            settled.append(v)
            for w, wt in adj_out[v]:
                nd = d + wt
                if w not in dist or nd < dist[w]:
                    dist[w] = nd
                    heapq.heappush(heap, (nd, w))
        reached += len(settled) - 1
        for w in settled:
            if w == s:
                continue
            sigma[w] = sum(sigma[v] for v, wt in adj_in[w] if v in done and dist[v] + wt == dist[w])
        delta = {v: Fraction(0) for v in settled}
        for w in reversed(settled):
            if w != s:
                bc[w] += delta[w]
            coeff = (1 + delta[w]) / sigma[w]
            for v, wt in adj_in[w]:
                if v in done and dist[v] + wt == dist[w]:
                    delta[v] += sigma[v] * coeff
    return bc, reached


def betweenness(
    g: StreetGraph,
    weighted_by_length: bool = True,
    *,
    threads: int | None = None,
    exact: bool = False,
) -> BetweennessResult:
    """Node betweenness centrality, normalized by (n-1)(n-2).

    Each value is the share of ordered source-target pairs whose shortest
    paths pass through the node (endpoints excluded). Shortest paths are
    length-weighted by default; pass ``weighted_by_length=False`` for
    hop-count paths. On graphs where some pairs are unreachable a
    DisconnectedWarning is issued and the reachable-pair fraction reported.
    """
    n = g.node_count
    if n < 3:
        raise EmptyNetwork("betweenness requires at least 3 nodes")
    nodes, indptr, indices, weights, rindptr, rindices, rweights = _simple_projection(g, weighted_by_length)
    norm = (n - 1) * (n - 2)

    if exact:
        adj_out = [[] for _ in range(n)]
        adj_in = [[] for _ in range(n)]
        for u in range(n):
            for j in range(indptr[u], indptr[u + 1]):
                wt = Fraction(float(weights[j]))
                adj_out[u].append((int(indices[j]), wt))
                adj_in[int(indices[j])].append((u, wt))
        raw, reached = _betweenness_exact(adj_out, adj_in, n)
        values = {node: raw[i] / norm for i, node in enumerate(nodes)}
        max_value = max(values.values())
    else:
        sources = np.arange(n, dtype=np.int64)
        threads = threads or min(os.cpu_count() or 1, 8)
        if threads <= 1 or n < 256:
            bc, reached = _brandes_chunk(indptr, indices, weights, rindptr, rindices, rweights, sources, n)
        else:
            chunks = np.array_split(sources, threads * 4)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(
                    pool.map(
                        lambda c: _brandes_chunk(indptr, indices, weights, rindptr, rindices, rweights, c, n),
                        chunks,
                    )
                )
            bc = np.zeros(n)
            reached = 0
            for part_bc, part_reached in parts:  # fixed order: deterministic float sums
                bc += part_bc
                reached += part_reached
        bc = bc / norm
        values = {node: float(bc[i]) for i, node in enumerate(nodes)}
        max_value = float(bc.max())

    fraction = reached / (n * (n - 1))
    if fraction < 1.0:
        warnings.warn(
            f"graph is not strongly connected: {fraction:.3f} of ordered pairs reachable",
            DisconnectedWarning,
            stacklevel=2,
        )
    return BetweennessResult(max_value=max_value, values=values, reachable_pair_fraction=fraction)
