"""Parse raw OpenStreetMap data (XML or Overpass JSON) and filter it to the
drivable public network.

Both parsers produce identical RawOsmData for the same underlying data, so
downstream stages never care which wire format a site came from. Relations
are ignored entirely.
"""

from __future__ import annotations

import gzip
import json
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field, replace

from .errors import MalformedInput
from .geo import GeoPoint

# Conventional drive filter: the set is configurable because OSM tagging
# practice varies and no single list is canonical.
DEFAULT_INCLUDE_HIGHWAY = frozenset(
    {
        "motorway",
        "motorway_link",
        "trunk",
        "trunk_link",
        "primary",
        "primary_link",
        "secondary",
        "secondary_link",
        "tertiary",
        "tertiary_link",
        "unclassified",
        "residential",
        "living_street",
        "road",
    }
)

DEFAULT_EXCLUDE_HIGHWAY = frozenset(
    {
        "footway",
        "path",
        "cycleway",
        "pedestrian",
        "steps",
        "track",
        "bridleway",
        "corridor",
        "construction",
        "proposed",
        "abandoned",
        "platform",
        "raceway",
    }
)

DEFAULT_EXCLUDE_ACCESS = frozenset({"private", "no"})


@dataclass(frozen=True)
class OsmNode:
    id: int
    location: GeoPoint
    tags: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class OsmWay:
    id: int
    node_refs: tuple[int, ...]
    tags: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class RawOsmData:
    """Parsed nodes and ways, keyed and ordered as they appeared in the input."""

    nodes: dict[int, OsmNode]
    ways: tuple[OsmWay, ...]
    provenance: str = ""


@dataclass(frozen=True)
class WayFilter:
    """Which ways count as the drivable public network."""

    include_highway_tags: frozenset[str] = DEFAULT_INCLUDE_HIGHWAY
    exclude_highway_tags: frozenset[str] = DEFAULT_EXCLUDE_HIGHWAY
    exclude_access_values: frozenset[str] = DEFAULT_EXCLUDE_ACCESS
    include_service_roads: bool = False

    def __post_init__(self):
        overlap = self.include_highway_tags & self.exclude_highway_tags
        if overlap:
            raise ValueError(f"include and exclude highway sets overlap: {sorted(overlap)}")


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def parse_osm_xml(data: bytes, provenance: str = "") -> RawOsmData:
    """Parse an OSM v0.6 XML document (optionally gzip-compressed).

    Captures every <node> and <way> with their <tag> children; relations are
    skipped. Raises MalformedInput with line/column context for broken XML,
    including truncated files.
    """
    data = _maybe_gunzip(data)
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise MalformedInput(f"invalid OSM XML at line {line}, column {col}: {exc.msg}") from exc
    if root.tag != "osm":
        raise MalformedInput(f"expected <osm> root element, found <{root.tag}>")

    nodes: dict[int, OsmNode] = {}
    ways: list[OsmWay] = []
    for el in root:
        if el.tag == "node":
            try:
                node_id = int(el.attrib["id"])
                lat = float(el.attrib["lat"])
                lon = float(el.attrib["lon"])
            except (KeyError, ValueError) as exc:
                raise MalformedInput(f"node element missing or bad id/lat/lon: {exc}") from exc
            try:
                location = GeoPoint(lat=lat, lon=lon)
            except ValueError as exc:
                raise MalformedInput(f"node {node_id}: {exc}") from exc
            nodes[node_id] = OsmNode(id=node_id, location=location, tags=_xml_tags(el))
        elif el.tag == "way":
            try:
                way_id = int(el.attrib["id"])
            except (KeyError, ValueError) as exc:
                raise MalformedInput(f"way element missing or bad id: {exc}") from exc
            refs = []
            for nd in el.findall("nd"):
                try:
                    refs.append(int(nd.attrib["ref"]))
                except (KeyError, ValueError) as exc:
                    raise MalformedInput(f"way {way_id} has a bad <nd> ref: {exc}") from exc
            ways.append(OsmWay(id=way_id, node_refs=tuple(refs), tags=_xml_tags(el)))
        # relations and metadata elements are ignored
    return RawOsmData(nodes=nodes, ways=tuple(ways), provenance=provenance)


def _xml_tags(el) -> dict[str, str]:
    tags = {}
    for tag in el.findall("tag"):
        k = tag.attrib.get("k")
        v = tag.attrib.get("v")
        if k is not None and v is not None:
            tags[k] = v
    return tags


def parse_overpass_json(data: bytes | str, provenance: str = "") -> RawOsmData:
    """Parse an Overpass API JSON response (top-level "elements" array).

    Elements of unknown type (e.g. "relation") are skipped silently.
    """
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid Overpass JSON: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("elements"), list):
        raise MalformedInput("Overpass JSON must be an object with an 'elements' array")

    nodes: dict[int, OsmNode] = {}
    ways: list[OsmWay] = []
    for el in obj["elements"]:
        etype = el.get("type")
        if etype == "node":
            try:
                node_id = int(el["id"])
                location = GeoPoint(lat=float(el["lat"]), lon=float(el["lon"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedInput(f"node element missing or bad id/lat/lon: {exc}") from exc
            nodes[node_id] = OsmNode(id=node_id, location=location, tags=_json_tags(el))
        elif etype == "way":
            try:
                way_id = int(el["id"])
                refs = tuple(int(r) for r in el.get("nodes", []))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedInput(f"way element missing or bad id/refs: {exc}") from exc
            ways.append(OsmWay(id=way_id, node_refs=refs, tags=_json_tags(el)))
    return RawOsmData(nodes=nodes, ways=tuple(ways), provenance=provenance)


def _json_tags(el) -> dict[str, str]:
    tags = el.get("tags") or {}
    return {str(k): str(v) for k, v in tags.items()}


def resolve(data: RawOsmData) -> tuple[RawOsmData, int]:
    """Drop way refs that point at missing nodes.

    Returns the cleaned data and the number of dropped refs. Ways left with
    fewer than two refs are dropped as well (each of their surviving refs
    still counts toward the total).
    """
    dropped = 0
    ways = []
    for way in data.ways:
        refs = tuple(r for r in way.node_refs if r in data.nodes)
        dropped += len(way.node_refs) - len(refs)
        if len(refs) >= 2:
            ways.append(way if refs == way.node_refs else replace(way, node_refs=refs))
    return RawOsmData(nodes=data.nodes, ways=tuple(ways), provenance=data.provenance), dropped


def filter_drivable(data: RawOsmData, way_filter: WayFilter | None = None) -> tuple[RawOsmData, Counter]:
    """Keep only ways that form the drivable public street network.

    A way is retained when its highway tag is in the include set (or is
    "service" while include_service_roads is on), is not in the exclude set,
    its access tag is not excluded, and it is not an area. Nodes no longer
    referenced by any retained way are pruned.

    Returns the filtered data plus dropped-way counts keyed by reason.
    """
    f = way_filter or WayFilter()
    dropped: Counter = Counter()
    kept: list[OsmWay] = []
    for way in data.ways:
        highway = way.tags.get("highway")
        if highway is None:
            dropped["no_highway_tag"] += 1
            continue
        if highway in f.exclude_highway_tags:
            dropped["excluded_highway"] += 1
            continue
        if highway == "service" and not f.include_service_roads:
            dropped["service_road"] += 1
            continue
        if highway not in f.include_highway_tags and highway != "service":
            dropped["not_in_include_set"] += 1
            continue
        if way.tags.get("access") in f.exclude_access_values:
            dropped["excluded_access"] += 1
            continue
        if way.tags.get("area") == "yes":
            dropped["area"] += 1
            continue
        kept.append(way)

    referenced = {ref for way in kept for ref in way.node_refs}
    nodes = {nid: node for nid, node in data.nodes.items() if nid in referenced}
    return RawOsmData(nodes=nodes, ways=tuple(kept), provenance=data.provenance), dropped
