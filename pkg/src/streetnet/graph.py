"""Primal directed street multigraph: construction from OSM ways, topology
simplification, streets-per-node counting, truncation, and the undirected
projection.

Nodes are OSM node ids; edges are directed, with parallel edges and
self-loops allowed. A bidirectional street is stored as two directed edges
that point at each other through ``reversed_twin``; a one-way street has no
twin. Each graph instance is treated as immutable once a pipeline stage has
produced it (streets-per-node counts are filled in by their own stage).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptyNetwork, MalformedInput
from .geo import GeoPoint, Polygon, boundary_contains_many, haversine_m
from .osm import RawOsmData

_ONEWAY_FORWARD = {"yes", "true", "1"}
_ONEWAY_REVERSE = {"-1"}


@dataclass(frozen=True)
class Edge:
    """One directed street segment with its full polyline geometry."""

    edge_id: int
    u: int
    v: int
    length_m: float
    geometry: tuple[GeoPoint, ...]
    oneway: bool
    reversed_twin: int | None = None

    @property
    def is_self_loop(self) -> bool:
        return self.u == self.v


@dataclass(frozen=True)
class NodeTypeHistogram:
    """How many nodes have 0, 1, 2, ... physical streets emanating from them."""

    counts: dict[int, int]

    @property
    def total_nodes(self) -> int:
        return sum(self.counts.values())

    def proportion(self, streets: int) -> float:
        total = self.total_nodes
        return self.counts.get(streets, 0) / total if total else 0.0


class StreetGraph:
    """Spatially embedded directed multigraph with twin bookkeeping."""

    def __init__(
        self,
        nodes: dict[int, GeoPoint],
        edges: dict[int, Edge],
        *,
        way_endpoints: frozenset[int] = frozenset(),
        streets_per_node: dict[int, int] | None = None,
        simplified: bool = False,
        undirected: bool = False,
    ):
        self.nodes = dict(nodes)
        self.edges = dict(edges)
        self.way_endpoints = frozenset(way_endpoints)
        self.streets_per_node: dict[int, int] = dict(streets_per_node or {})
        self.simplified = simplified
        self.undirected = undirected
        self._out: dict[int, list[int]] = {n: [] for n in self.nodes}
        self._in: dict[int, list[int]] = {n: [] for n in self.nodes}
        for eid in sorted(self.edges):
            e = self.edges[eid]
            self._out[e.u].append(eid)
            self._in[e.v].append(eid)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StreetGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.edges == other.edges
            and self.way_endpoints == other.way_endpoints
            and self.streets_per_node == other.streets_per_node
            and self.simplified == other.simplified
            and self.undirected == other.undirected
        )

    __hash__ = None  # mutable container semantics

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def out_edges(self, node: int) -> list[Edge]:
        return [self.edges[eid] for eid in self._out[node]]

    def in_edges(self, node: int) -> list[Edge]:
        return [self.edges[eid] for eid in self._in[node]]

    def degree(self, node: int) -> int:
        """In-degree plus out-degree; a self-loop contributes 2."""
        return len(self._out[node]) + len(self._in[node])

    def neighbors(self, node: int) -> set[int]:
        """Distinct adjacent nodes in either direction, excluding the node itself."""
        nbrs = {self.edges[eid].v for eid in self._out[node]}
        nbrs.update(self.edges[eid].u for eid in self._in[node])
        nbrs.discard(node)
        return nbrs

    def has_self_loop(self, node: int) -> bool:
        return any(self.edges[eid].v == node for eid in self._out[node])

    def total_length_m(self) -> float:
        return sum(e.length_m for e in self.edges.values())

    def undirected_edges(self) -> Iterator[Edge]:
        """One edge per physical street: each twin pair yields its lower-id member."""
        for eid in sorted(self.edges):
            e = self.edges[eid]
            if e.reversed_twin is None or e.edge_id < e.reversed_twin:
                yield e

    def next_edge_id(self) -> int:
        return max(self.edges, default=-1) + 1


def _way_direction(tags: dict[str, str]) -> str:
    oneway = tags.get("oneway")
    if oneway in _ONEWAY_FORWARD:
        return "forward"
    if oneway in _ONEWAY_REVERSE:
        return "reverse"
    if oneway is None and tags.get("junction") == "roundabout":
        return "forward"
    return "both"


def build_graph(data: RawOsmData) -> StreetGraph:
    """Turn filtered, resolved OSM ways into the directed multigraph.

    Every consecutive ref pair of a way becomes a directed edge; two-way ways
    also emit the reversed twin. Nodes not referenced by any retained way are
    dropped. Raises EmptyNetwork when no edges result.
    """
    edges: dict[int, Edge] = {}
    nodes: dict[int, GeoPoint] = {}
    way_endpoints: set[int] = set()
    next_id = 0
    for way in data.ways:
        direction = _way_direction(way.tags)
        refs = way.node_refs
        way_endpoints.add(refs[0])
        way_endpoints.add(refs[-1])
        for a, b in zip(refs[:-1], refs[1:]):
            if a == b:
                continue  # zero-information degenerate pair
            try:
                loc_a, loc_b = data.nodes[a].location, data.nodes[b].location
            except KeyError as exc:
                raise MalformedInput(f"way {way.id} references missing node {exc}; resolve the data first") from exc
            nodes[a], nodes[b] = loc_a, loc_b
            length = haversine_m(loc_a, loc_b)
            if direction == "forward":
                edges[next_id] = Edge(next_id, a, b, length, (loc_a, loc_b), oneway=True)
                next_id += 1
            elif direction == "reverse":
                edges[next_id] = Edge(next_id, b, a, length, (loc_b, loc_a), oneway=True)
                next_id += 1
            else:
                edges[next_id] = Edge(next_id, a, b, length, (loc_a, loc_b), oneway=False, reversed_twin=next_id + 1)
                edges[next_id + 1] = Edge(next_id + 1, b, a, length, (loc_b, loc_a), oneway=False, reversed_twin=next_id)
                next_id += 2
    if not edges:
        raise EmptyNetwork("no edges after graph construction")
    return StreetGraph(nodes, edges, way_endpoints=frozenset(way_endpoints & nodes.keys()))


def _is_endpoint(g: StreetGraph, node: int) -> bool:
    """Endpoint rules: a node survives simplification iff any of these hold.

    (a) its distinct-neighbor set (ignoring direction, excluding itself) has
        size != 2;
    (b) it has a self-loop;
    (c) its in/out edges form neither a one-way through-path (in=1, out=1)
        nor a two-way through-path (in=2, out=2 as two twin pairs);
    (d) it is the first or last node of a retained way.
    """
    if g.has_self_loop(node):
        return True
    if len(g.neighbors(node)) != 2:
        return True
    if node in g.way_endpoints:
        return True
    ins = g.in_edges(node)
    outs = g.out_edges(node)
    if len(ins) == 1 and len(outs) == 1:
        # distinct-neighbor size 2 already guarantees a through one-way path
        return False
    if len(ins) == 2 and len(outs) == 2:
        twin_of_out = {e.reversed_twin for e in outs}
        if None in twin_of_out:
            return True
        return twin_of_out != {e.edge_id for e in ins}
    return True


def _walk_chain(g: StreetGraph, first: Edge, stop_nodes: set[int]) -> list[Edge]:
    """Follow interstitial nodes from ``first`` until a stop node is reached."""
    path = [first]
    while path[-1].v not in stop_nodes:
        prev = path[-1]
        nxt = None
        for e in g.out_edges(prev.v):
            if prev.reversed_twin is not None and e.edge_id == prev.reversed_twin:
                continue
            nxt = e
            break
        if nxt is None:  # defensive: malformed interstitial pattern
            raise MalformedInput(f"dead interstitial walk at node {prev.v}")
        path.append(nxt)
    return path


def _merge_chain(path: list[Edge], next_id: int) -> tuple[list[Edge], int]:
    """Build the merged edge (and its reversed twin for two-way chains)."""
    geometry: list[GeoPoint] = list(path[0].geometry)
    for e in path[1:]:
        geometry.extend(e.geometry[1:])
    length = sum(e.length_m for e in path)
    u, v = path[0].u, path[-1].v
    if path[0].reversed_twin is None:
        return [Edge(next_id, u, v, length, tuple(geometry), oneway=True)], next_id + 1
    fwd = Edge(next_id, u, v, length, tuple(geometry), oneway=False, reversed_twin=next_id + 1)
    rev = Edge(next_id + 1, v, u, length, tuple(reversed(geometry)), oneway=False, reversed_twin=next_id)
    return [fwd, rev], next_id + 2


def simplify(g: StreetGraph) -> StreetGraph:
    """Remove interstitial nodes, merging their edge chains into single edges.

    Merged edges keep the concatenated polyline geometry and the summed
    length, so total directed length is conserved. Self-contained rings with
    no endpoint collapse to self-loops anchored at their smallest node id.
    Idempotent: simplifying a simplified graph returns an equal graph.
    """
    endpoints = {n for n in g.nodes if _is_endpoint(g, n)}
    consumed: set[int] = set()
    merged: list[Edge] = []
    next_id = g.next_edge_id()

    def consume(path: list[Edge]) -> None:
        nonlocal next_id
        consumed.update(e.edge_id for e in path)
        if path[0].reversed_twin is not None:
            consumed.update(e.reversed_twin for e in path)
        new_edges, next_id = _merge_chain(path, next_id)
        merged.extend(new_edges)

    for node in sorted(endpoints):
        for e in g.out_edges(node):
            if e.edge_id in consumed or e.v in endpoints:
                continue
            consume(_walk_chain(g, e, endpoints))

    # leftover pure rings: anchor each at its smallest node id
    anchors: set[int] = set()
    for node in sorted(set(g.nodes) - endpoints):
        for e in g.out_edges(node):
            if e.edge_id in consumed:
                continue
            anchors.add(node)
            consume(_walk_chain(g, e, endpoints | {node}))

    retained = endpoints | anchors
    nodes = {n: g.nodes[n] for n in retained}
    edges = {e.edge_id: e for e in g.edges.values() if e.edge_id not in consumed}
    edges.update({e.edge_id: e for e in merged})
    return StreetGraph(
        nodes,
        edges,
        way_endpoints=g.way_endpoints & retained,
        streets_per_node={n: c for n, c in g.streets_per_node.items() if n in retained},
        simplified=True,
    )


def compute_streets_per_node(g: StreetGraph) -> NodeTypeHistogram:
    """Count physical streets emanating from each node and store them on the graph.

    A twin pair counts once, a one-way edge once, and a self-loop twice (both
    of its ends emanate from the node).
    """
    counts = {n: 0 for n in g.nodes}
    for e in g.undirected_edges():
        if e.is_self_loop:
            counts[e.u] += 2
        else:
            counts[e.u] += 1
            counts[e.v] += 1
    g.streets_per_node.update(counts)
    return NodeTypeHistogram(counts=dict(Counter(counts.values())))


def truncate(g: StreetGraph, boundary: Polygon | Sequence[Polygon]) -> StreetGraph:
    """Clip the graph to a boundary polygon (or multi-part boundary).

    Keeps nodes whose location is inside (boundary points count as inside)
    and edges whose both endpoints survive. Streets-per-node values computed
    before truncation are preserved, so peripheral intersections keep their
    true street counts.
    """
    polys = [boundary] if isinstance(boundary, Polygon) else list(boundary)
    node_ids = sorted(g.nodes)
    lats = np.array([g.nodes[n].lat for n in node_ids])
    lons = np.array([g.nodes[n].lon for n in node_ids])
    inside = boundary_contains_many(polys, lats, lons)
    keep = {n for n, ok in zip(node_ids, inside) if ok}
    if not keep:
        raise EmptyNetwork("no nodes inside the boundary")
    nodes = {n: g.nodes[n] for n in keep}
    edges = {eid: e for eid, e in g.edges.items() if e.u in keep and e.v in keep}
    # a twin whose partner edge was dropped cannot happen: twins share endpoints
    return StreetGraph(
        nodes,
        edges,
        way_endpoints=g.way_endpoints & keep,
        streets_per_node={n: c for n, c in g.streets_per_node.items() if n in keep},
        simplified=g.simplified,
        undirected=g.undirected,
    )


def to_undirected(g: StreetGraph) -> StreetGraph:
    """Collapse each twin pair to one edge; one-way edges pass through as-is.

    The result's total length is the undirected "street length" of the
    network. Twin bookkeeping no longer applies to the output.
    """
    edges = {}
    for e in g.undirected_edges():
        edges[e.edge_id] = Edge(e.edge_id, e.u, e.v, e.length_m, e.geometry, oneway=e.oneway, reversed_twin=None)
    return StreetGraph(
        dict(g.nodes),
        edges,
        way_endpoints=g.way_endpoints,
        streets_per_node=dict(g.streets_per_node),
        simplified=g.simplified,
        undirected=True,
    )


def add_reverse_twins(g: StreetGraph) -> StreetGraph:
    """Give every one-way edge a reversed twin (used for the one-way
    conversion comparison). Graphs that are already fully bidirectional come
    back structurally unchanged."""
    edges = dict(g.edges)
    next_id = g.next_edge_id()
    for eid in sorted(g.edges):
        e = g.edges[eid]
        if e.reversed_twin is not None:
            continue
        edges[eid] = Edge(e.edge_id, e.u, e.v, e.length_m, e.geometry, oneway=False, reversed_twin=next_id)
        edges[next_id] = Edge(next_id, e.v, e.u, e.length_m, tuple(reversed(e.geometry)), oneway=False, reversed_twin=eid)
        next_id += 1
    return StreetGraph(
        dict(g.nodes),
        edges,
        way_endpoints=g.way_endpoints,
        streets_per_node=dict(g.streets_per_node),
        simplified=g.simplified,
    )


def structurally_equal(a: StreetGraph, b: StreetGraph) -> bool:
    """Equality up to edge ids: same nodes and the same multiset of edges
    (endpoints, length, geometry, oneway, and twin pairing structure)."""

    def signature(g: StreetGraph) -> tuple:
        sig = []
        for e in g.edges.values():
            twin = None
            if e.reversed_twin is not None:
                t = g.edges[e.reversed_twin]
                twin = (t.u, t.v, t.length_m)
            sig.append((e.u, e.v, e.length_m, tuple((p.lat, p.lon) for p in e.geometry), e.oneway, twin))
        return (dict(g.nodes), sorted(sig))

    sig_a, sig_b = signature(a), signature(b)
    return sig_a[0] == sig_b[0] and sig_a[1] == sig_b[1]
