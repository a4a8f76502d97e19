"""Lossless GraphML serialization for street graphs.

Node keys: lat, lon, streets_per_node. Edge keys: edge_id, length_m, oneway,
geometry (space-separated "lon,lat" polyline), reversed_twin. Graph-level
keys carry the simplified flag and the retained way-endpoint set so that
import(export(g)) reconstructs an identical graph at full float precision
(floats are written in shortest round-trip form).
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape

from .errors import MalformedInput
from .geo import GeoPoint
from .graph import Edge, StreetGraph

_NS = "http://graphml.graphdrawing.org/xmlns"

_KEYS = [
    # (key id, domain, name, type)
    ("d_lat", "node", "lat", "double"),
    ("d_lon", "node", "lon", "double"),
    ("d_spn", "node", "streets_per_node", "int"),
    ("d_eid", "edge", "edge_id", "long"),
    ("d_len", "edge", "length_m", "double"),
    ("d_one", "edge", "oneway", "boolean"),
    ("d_geo", "edge", "geometry", "string"),
    ("d_twin", "edge", "reversed_twin", "long"),
    ("d_simp", "graph", "simplified", "boolean"),
    ("d_wep", "graph", "way_endpoints", "string"),
]


def _geometry_str(geometry: tuple[GeoPoint, ...]) -> str:
    return " ".join(f"{repr(p.lon)},{repr(p.lat)}" for p in geometry)


def _parse_geometry(text: str) -> tuple[GeoPoint, ...]:
    points = []
    for token in text.split():
        lon_s, lat_s = token.split(",")
        points.append(GeoPoint(lat=float(lat_s), lon=float(lon_s)))
    return tuple(points)


def export_graphml(g: StreetGraph) -> bytes:
    """Serialize to a GraphML 1.0 document (UTF-8 bytes), deterministically:
    nodes sorted by id, edges by edge id."""
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<graphml xmlns="{_NS}">',
    ]
    for key_id, domain, name, att_type in _KEYS:
        lines.append(f'  <key id="{key_id}" for="{domain}" attr.name="{name}" attr.type="{att_type}"/>')
    edgedefault = "undirected" if g.undirected else "directed"
    lines.append(f'  <graph edgedefault="{edgedefault}">')
    lines.append(f'    <data key="d_simp">{"true" if g.simplified else "false"}</data>')
    lines.append(f'    <data key="d_wep">{" ".join(str(n) for n in sorted(g.way_endpoints))}</data>')
    for node in sorted(g.nodes):
        loc = g.nodes[node]
        lines.append(f'    <node id="{node}">')
        lines.append(f'      <data key="d_lat">{repr(loc.lat)}</data>')
        lines.append(f'      <data key="d_lon">{repr(loc.lon)}</data>')
        if node in g.streets_per_node:
            lines.append(f'      <data key="d_spn">{g.streets_per_node[node]}</data>')
        lines.append("    </node>")
    for eid in sorted(g.edges):
        e = g.edges[eid]
        lines.append(f'    <edge source="{e.u}" target="{e.v}">')
        lines.append(f'      <data key="d_eid">{e.edge_id}</data>')
        lines.append(f'      <data key="d_len">{repr(e.length_m)}</data>')
        lines.append(f'      <data key="d_one">{"true" if e.oneway else "false"}</data>')
        lines.append(f'      <data key="d_geo">{escape(_geometry_str(e.geometry))}</data>')
        if e.reversed_twin is not None:
            lines.append(f'      <data key="d_twin">{e.reversed_twin}</data>')
        lines.append("    </edge>")
    lines.append("  </graph>")
    lines.append("</graphml>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def import_graphml(data: bytes) -> StreetGraph:
    """Rebuild a StreetGraph from a document produced by export_graphml."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedInput(f"invalid GraphML: {exc}") from exc
    if root.tag not in (f"{{{_NS}}}graphml", "graphml"):
        raise MalformedInput(f"not a GraphML document (root {root.tag!r})")

    def q(tag):
        return f"{{{_NS}}}{tag}" if root.tag.startswith("{") else tag

    key_names = {}
    for key in root.findall(q("key")):
        key_names[key.attrib["id"]] = key.attrib.get("attr.name", key.attrib["id"])

    graph_el = root.find(q("graph"))
    if graph_el is None:
        raise MalformedInput("GraphML document has no <graph> element")

    def data_of(el) -> dict[str, str]:
        out = {}
        for d in el.findall(q("data")):
            name = key_names.get(d.attrib.get("key"), d.attrib.get("key"))
            out[name] = d.text or ""
        return out

    graph_data = data_of(graph_el)
    simplified = graph_data.get("simplified", "false") == "true"
    wep_text = graph_data.get("way_endpoints", "")
    way_endpoints = frozenset(int(t) for t in wep_text.split()) if wep_text.strip() else frozenset()
    undirected = graph_el.attrib.get("edgedefault") == "undirected"

    nodes: dict[int, GeoPoint] = {}
    streets_per_node: dict[int, int] = {}
    for node_el in graph_el.findall(q("node")):
        node_id = int(node_el.attrib["id"])
        nd = data_of(node_el)
        try:
            nodes[node_id] = GeoPoint(lat=float(nd["lat"]), lon=float(nd["lon"]))
        except (KeyError, ValueError) as exc:
            raise MalformedInput(f"node {node_id} missing or bad lat/lon: {exc}") from exc
        if "streets_per_node" in nd:
            streets_per_node[node_id] = int(nd["streets_per_node"])

    edges: dict[int, Edge] = {}
    for edge_el in graph_el.findall(q("edge")):
        ed = data_of(edge_el)
        try:
            eid = int(ed["edge_id"])
            edge = Edge(
                edge_id=eid,
                u=int(edge_el.attrib["source"]),
                v=int(edge_el.attrib["target"]),
                length_m=float(ed["length_m"]),
                geometry=_parse_geometry(ed["geometry"]),
                oneway=ed["oneway"] == "true",
                reversed_twin=int(ed["reversed_twin"]) if "reversed_twin" in ed else None,
            )
        except (KeyError, ValueError) as exc:
            raise MalformedInput(f"bad edge element: {exc}") from exc
        edges[eid] = edge

    return StreetGraph(
        nodes,
        edges,
        way_endpoints=way_endpoints,
        streets_per_node=streets_per_node,
        simplified=simplified,
        undirected=undirected,
    )
