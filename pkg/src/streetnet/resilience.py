"""Connectivity-based resilience measures.

Per-pair node connectivity is the maximum number of internally node-disjoint
directed paths, computed as max-flow on the node-split transform: every node
except the endpoints becomes an in/out half joined by a unit-capacity arc,
and every edge a unit-capacity arc. Average node connectivity (ANC) averages
this over ordered pairs, exactly for small graphs and by seeded pair
sampling for large ones.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import ZeroBaseAnc
from .graph import StreetGraph, add_reverse_twins

DEFAULT_SAMPLE_LIMIT = 50_000


@dataclass(frozen=True)
class AncResult:
    value: float
    mode: str  # "exact" or "sampled"
    pairs_evaluated: int  # unordered pairs; each is evaluated in both directions
    std_error: Optional[float] = None


@njit(nogil=True, cache=True)
def _maxflow_pairs(head, nxt, to, cap0, n2, pairs):  # pragma: no cover
    """Dinic max-flow for each (source, sink) row of ``pairs``; unit capacities."""
    out = np.empty(len(pairs), dtype=np.int64)
    cap = np.empty_like(cap0)
    level = np.empty(n2, dtype=np.int64)
    iters = np.empty(n2, dtype=np.int64)
    queue = np.empty(n2, dtype=np.int64)
    path = np.empty(n2, dtype=np.int64)

    for p in range(len(pairs)):
        s = pairs[p, 0]
        t = pairs[p, 1]
        cap[:] = cap0
        flow = 0
        while True:
            for i in range(n2):
                level[i] = -1
            qh, qt = 0, 0
            queue[qt] = s
            qt += 1
            level[s] = 0
            while qh < qt:
                v = queue[qh]
                qh += 1
                e = head[v]
                while e != -1:
                    w = to[e]
                    if cap[e] > 0 and level[w] == -1:
                        level[w] = level[v] + 1
                        queue[qt] = w
                        qt += 1
                    e = nxt[e]
            if level[t] == -1:
                break
            for i in range(n2):
                iters[i] = head[i]
            while True:
                v = s
                depth = 0
                found = False
                while True:
                    if v == t:
                        found = True
                        break
                    advanced = False
                    e = iters[v]
                    while e != -1:
                        if cap[e] > 0 and level[to[e]] == level[v] + 1:
                            iters[v] = e
                            path[depth] = e
                            depth += 1
                            v = to[e]
                            advanced = True
                            break
                        e = nxt[e]
                        iters[v] = e
                    if not advanced:
                        if depth == 0:
                            break
                        level[v] = -1  # dead end in this phase
                        depth -= 1
                        e = path[depth]
                        parent = to[e ^ 1]
                        iters[parent] = nxt[e]
                        v = parent
                if not found:
                    break
                for i in range(depth):
                    e = path[i]
                    cap[e] -= 1
                    cap[e ^ 1] += 1
                flow += 1
        out[p] = flow
    return out


class _SplitFlowNetwork:
    """Static node-split flow network shared by all (s, t) queries.

    Node x maps to halves 2x (in) and 2x+1 (out); queries run from the
    source's out-half to the sink's in-half, so the endpoint's own internal
    arcs never constrain the flow.
    """

    def __init__(self, g: StreetGraph):
        self.nodes = sorted(g.nodes)
        self.index = {node: i for i, node in enumerate(self.nodes)}
        n = len(self.nodes)
        self.n2 = 2 * n
        arc_to: list[int] = []
        arc_cap: list[int] = []
        arc_nxt: list[int] = []
        head = [-1] * self.n2

        def add(u: int, v: int) -> None:
            # forward arc and its residual twin sit at indices e and e^1
            arc_to.append(v)
            arc_cap.append(1)
            arc_nxt.append(head[u])
            head[u] = len(arc_to) - 1
            arc_to.append(u)
            arc_cap.append(0)
            arc_nxt.append(head[v])
            head[v] = len(arc_to) - 1

        for i in range(n):
            add(2 * i, 2 * i + 1)
        for eid in sorted(g.edges):
            e = g.edges[eid]
            if e.is_self_loop:
                continue
            add(2 * self.index[e.u] + 1, 2 * self.index[e.v])

        self.head = np.array(head, dtype=np.int64)
        self.nxt = np.array(arc_nxt, dtype=np.int64)
        self.to = np.array(arc_to, dtype=np.int64)
        self.cap = np.array(arc_cap, dtype=np.int64)

    def connectivity_many(self, pairs: np.ndarray, threads: int = 1) -> np.ndarray:
        """Max internally-disjoint paths for each (source, sink) node-id pair."""
        halves = np.empty_like(pairs)
        for r in range(len(pairs)):
            halves[r, 0] = 2 * self.index[pairs[r, 0]] + 1
            halves[r, 1] = 2 * self.index[pairs[r, 1]]
        if threads <= 1 or len(halves) < 64:
            return _maxflow_pairs(self.head, self.nxt, self.to, self.cap, self.n2, halves)
        chunks = np.array_split(halves, threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _maxflow_pairs(self.head, self.nxt, self.to, self.cap, self.n2, c), chunks))
        return np.concatenate(parts)


def node_connectivity(g: StreetGraph, s: int, t: int) -> int:
    """Maximum number of internally node-disjoint directed paths from s to t.

    Returns 0 when t is unreachable from s.
    """
    if s == t:
        raise ValueError("node connectivity requires two distinct nodes")
    net = _SplitFlowNetwork(g)
    return int(net.connectivity_many(np.array([[s, t]], dtype=np.int64))[0])


def _sample_unordered_pairs(n: int, count: int, seed: int) -> np.ndarray:
    """Uniform unordered index pairs without replacement, deterministic by seed."""
    rng = np.random.default_rng(seed)
    total = n * (n - 1) // 2
    if count >= total:
        return np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64)
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < count:
        draw = rng.integers(0, n, size=(count, 2))
        for a, b in draw:
            if a == b:
                continue
            pair = (int(min(a, b)), int(max(a, b)))
            if pair not in chosen:
                chosen.add(pair)
                if len(chosen) == count:
                    break
    return np.array(sorted(chosen), dtype=np.int64)


def average_node_connectivity(
    g: StreetGraph,
    sample_limit: int = DEFAULT_SAMPLE_LIMIT,
    seed: int = 0,
    threads: int | None = None,
) -> AncResult:
    """Mean node connectivity over ordered node pairs.

    Exact when n(n-1) fits within ``sample_limit``; otherwise a uniform
    sample of unordered pairs (each evaluated in both directions) up to the
    limit, with a reported standard error. Deterministic for a given seed.
    """
    nodes = sorted(g.nodes)
    n = len(nodes)
    if n < 2:
        raise ValueError("average node connectivity requires at least 2 nodes")
    threads = threads or min(os.cpu_count() or 1, 8)
    exact = n * (n - 1) <= sample_limit
    if exact:
        idx_pairs = np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64)
    else:
        idx_pairs = _sample_unordered_pairs(n, max(1, sample_limit // 2), seed)
    node_arr = np.array(nodes, dtype=np.int64)
    ordered = np.empty((2 * len(idx_pairs), 2), dtype=np.int64)
    ordered[0::2, 0] = node_arr[idx_pairs[:, 0]]
    ordered[0::2, 1] = node_arr[idx_pairs[:, 1]]
    ordered[1::2, 0] = node_arr[idx_pairs[:, 1]]
    ordered[1::2, 1] = node_arr[idx_pairs[:, 0]]

    net = _SplitFlowNetwork(g)
    kappa = net.connectivity_many(ordered, threads=threads)
    value = float(kappa.mean())
    std_error = None
    if not exact and len(idx_pairs) > 1:
        pair_means = (kappa[0::2] + kappa[1::2]) / 2.0
        std_error = float(pair_means.std(ddof=1) / np.sqrt(len(pair_means)))
    return AncResult(
        value=value,
        mode="exact" if exact else "sampled",
        pairs_evaluated=len(idx_pairs),
        std_error=std_error,
    )


def oneway_conversion_gain(
    g: StreetGraph,
    sample_limit: int = DEFAULT_SAMPLE_LIMIT,
    seed: int = 0,
    threads: int | None = None,
) -> float:
    """Relative ANC increase from making every street bidirectional.

    Both ANC runs use the same mode, seed, and sample budget, so an
    already-bidirectional graph comes out at exactly 0.
    """
    base = average_node_connectivity(g, sample_limit=sample_limit, seed=seed, threads=threads)
    if base.value == 0.0:
        raise ZeroBaseAnc("baseline ANC is zero; relative gain undefined")
    augmented = average_node_connectivity(
        add_reverse_twins(g), sample_limit=sample_limit, seed=seed, threads=threads
    )
    return augmented.value / base.value - 1.0
