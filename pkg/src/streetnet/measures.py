"""Per-network metric and topological measures.

One MeasureReport is one row of the corpus-level table: counts, lengths,
densities, node-type proportions, circuity, degree statistics, clustering,
PageRank extremes, maximum betweenness centrality, and (optionally) average
node connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

from .centrality import betweenness, pagerank
from .errors import EmptyNetwork, NoQualifyingEdges
from .geo import haversine_m
from .graph import StreetGraph

# Zero-length edges are kept in counts but cannot contribute to circuity.
_MIN_EDGE_WEIGHT_M = 1e-12


@dataclass
class MeasureReport:
    """The full measure vector for one street network.

    Field names double as the JSON keys and CSV column headers.
    """

    n: int
    m: int
    area_km2: float
    intersection_count: int
    node_density_per_km2: float
    intersection_density_per_km2: float
    edge_density_km_per_km2: float
    street_density_km_per_km2: float
    total_edge_length_km: float
    total_street_length_km: float
    street_segment_count: int
    avg_edge_length_m: float
    avg_street_segment_length_m: float
    avg_circuity: Optional[float]
    avg_node_degree: float
    avg_streets_per_node: float
    prop_deadends: float
    prop_3way: float
    prop_4way: float
    self_loop_proportion: float
    avg_clustering_coefficient: float
    avg_weighted_clustering_coefficient: float
    avg_neighborhood_degree: float
    avg_weighted_neighborhood_degree: float
    avg_degree_centrality: float
    max_pagerank: float
    min_pagerank: float
    max_betweenness_centrality: float
    avg_node_connectivity: Optional[float] = None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, d: dict) -> "MeasureReport":
        return cls(**{f.name: d.get(f.name) for f in fields(cls)})


def metric_measures(g: StreetGraph, area_km2: float) -> dict:
    """Counts, lengths, densities, and node-type proportions.

    Streets (as opposed to directed edges) are measured on the undirected
    view: each twin pair is one street. Intersections are nodes with at
    least 2 streets; dead-ends have exactly 1.
    """
    n, m = g.node_count, g.edge_count
    if n == 0 or m == 0:
        raise EmptyNetwork("cannot measure an empty network")
    if area_km2 <= 0:
        raise ValueError(f"area must be positive, got {area_km2}")
    if len(g.streets_per_node) < n:
        raise ValueError("streets_per_node not computed; run compute_streets_per_node first")

    total_edge_m = g.total_length_m()
    street_edges = list(g.undirected_edges())
    total_street_m = sum(e.length_m for e in street_edges)
    street_count = len(street_edges)
    spn = [g.streets_per_node[node] for node in g.nodes]
    intersection_count = sum(1 for c in spn if c >= 2)
    self_loops = sum(1 for e in g.edges.values() if e.is_self_loop)

    return {
        "n": n,
        "m": m,
        "area_km2": area_km2,
        "intersection_count": intersection_count,
        "node_density_per_km2": n / area_km2,
        "intersection_density_per_km2": intersection_count / area_km2,
        "edge_density_km_per_km2": total_edge_m / 1000.0 / area_km2,
        "street_density_km_per_km2": total_street_m / 1000.0 / area_km2,
        "total_edge_length_km": total_edge_m / 1000.0,
        "total_street_length_km": total_street_m / 1000.0,
        "street_segment_count": street_count,
        "avg_edge_length_m": total_edge_m / m,
        "avg_street_segment_length_m": total_street_m / street_count,
        "avg_streets_per_node": sum(spn) / n,
        "prop_deadends": sum(1 for c in spn if c == 1) / n,
        "prop_3way": sum(1 for c in spn if c == 3) / n,
        "prop_4way": sum(1 for c in spn if c == 4) / n,
        "self_loop_proportion": self_loops / m,
    }


def avg_circuity(g: StreetGraph) -> float:
    """Sum of edge lengths over sum of endpoint great-circle distances.

    The ratio of sums, not the mean of per-edge ratios. Self-loops and edges
    whose endpoints coincide are excluded from both sums.
    """
    length_sum = 0.0
    gc_sum = 0.0
    for e in g.edges.values():
        if e.is_self_loop:
            continue
        gc = haversine_m(g.nodes[e.u], g.nodes[e.v])
        if gc == 0.0:
            continue
        length_sum += e.length_m
        gc_sum += gc
    if gc_sum == 0.0:
        raise NoQualifyingEdges("every edge is a self-loop or has zero great-circle length")
    return length_sum / gc_sum


def degree_measures(g: StreetGraph) -> dict:
    """Average degree, degree centrality, and (weighted) neighborhood degree."""
    n = g.node_count
    if n < 2:
        raise EmptyNetwork("degree centrality requires at least 2 nodes")
    degrees = {node: g.degree(node) for node in g.nodes}

    nbr_deg_sum = 0.0
    weighted_nbr_deg_sum = 0.0
    for node in g.nodes:
        nbrs = g.neighbors(node)
        if not nbrs:
            continue
        nbr_deg_sum += sum(degrees[v] for v in nbrs) / len(nbrs)
        weights = {v: 1.0 / max(_shortest_connecting_length(g, node, v), _MIN_EDGE_WEIGHT_M) for v in nbrs}
        total_w = sum(weights.values())
        weighted_nbr_deg_sum += sum(w * degrees[v] for v, w in weights.items()) / total_w

    return {
        "avg_node_degree": sum(degrees.values()) / n,
        "avg_degree_centrality": sum(degrees.values()) / n / (n - 1),
        "avg_neighborhood_degree": nbr_deg_sum / n,
        "avg_weighted_neighborhood_degree": weighted_nbr_deg_sum / n,
    }


def _shortest_connecting_length(g: StreetGraph, u: int, v: int) -> float:
    best = float("inf")
    for e in g.out_edges(u):
        if e.v == v and e.length_m < best:
            best = e.length_m
    for e in g.in_edges(u):
        if e.u == v and e.length_m < best:
            best = e.length_m
    return best


def _simple_undirected_adjacency(g: StreetGraph) -> dict[int, dict[int, float]]:
    """Undirected simple projection: min connecting length per node pair, no self-loops."""
    adj: dict[int, dict[int, float]] = {node: {} for node in g.nodes}
    for e in g.edges.values():
        if e.is_self_loop:
            continue
        for a, b in ((e.u, e.v), (e.v, e.u)):
            cur = adj[a].get(b)
            if cur is None or e.length_m < cur:
                adj[a][b] = e.length_m
    return adj


def clustering(g: StreetGraph) -> tuple[float, float]:
    """Average clustering coefficient and its length-weighted variant.

    Computed on the undirected simple projection. The weighted form is the
    geometric-mean triangle formulation with edge lengths scaled by the
    maximum length in the projection so weights stay in (0, 1].
    """
    if g.node_count == 0:
        return 0.0, 0.0
    adj = _simple_undirected_adjacency(g)
    max_len = max((l for nbrs in adj.values() for l in nbrs.values()), default=0.0)

    cc_sum = 0.0
    wcc_sum = 0.0
    for node, nbrs in adj.items():
        k = len(nbrs)
        if k < 2:
            continue
        nbr_list = list(nbrs)
        links = 0
        w_triangles = 0.0
        for i, v in enumerate(nbr_list):
            for w in nbr_list[i + 1 :]:
                lvw = adj[v].get(w)
                if lvw is None:
                    continue
                links += 1
                if max_len > 0:
                    w_triangles += (nbrs[v] / max_len * nbrs[w] / max_len * lvw / max_len) ** (1.0 / 3.0)
        cc_sum += 2.0 * links / (k * (k - 1))
        wcc_sum += 2.0 * w_triangles / (k * (k - 1))
    n = g.node_count
    return cc_sum / n, wcc_sum / n


def compute_measures(
    g: StreetGraph,
    area_km2: float,
    *,
    pagerank_damping: float = 0.85,
    betweenness_weighted: bool = True,
    betweenness_threads: int | None = None,
    anc: Optional["object"] = None,
) -> MeasureReport:
    """Assemble the full MeasureReport for a simplified, truncated graph.

    ``anc`` is an already-computed AncResult (or None to leave the field
    unset); connectivity is expensive enough that the caller decides.
    """
    out = metric_measures(g, area_km2)
    out.update(degree_measures(g))
    try:
        out["avg_circuity"] = avg_circuity(g)
    except NoQualifyingEdges:
        out["avg_circuity"] = None
    cc, wcc = clustering(g)
    out["avg_clustering_coefficient"] = cc
    out["avg_weighted_clustering_coefficient"] = wcc

    pr = pagerank(g, damping=pagerank_damping)
    out["max_pagerank"] = pr.max_value
    out["min_pagerank"] = pr.min_value

    if g.node_count >= 3:
        bt = betweenness(g, weighted_by_length=betweenness_weighted, threads=betweenness_threads)
        out["max_betweenness_centrality"] = bt.max_value
    else:
        out["max_betweenness_centrality"] = 0.0

    out["avg_node_connectivity"] = anc.value if anc is not None else None
    return MeasureReport(**out)
