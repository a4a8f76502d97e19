#!/usr/bin/env python3
"""Generate the committed test fixture corpus: synthetic small-town OSM
extracts (Overpass JSON, plain and gzipped OSM XML), boundary GeoJSON files,
and an example corpus manifest.

Deterministic: running it again reproduces byte-identical files.
"""

from __future__ import annotations

import gzip
import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

EARTH_RADIUS_M = 6_371_009.0
DEG_PER_M = 180.0 / (math.pi * EARTH_RADIUS_M)


def town_elements(index: int, k: int, block_m: float, rng: random.Random):
    """One synthetic town: a k x k grid plus spurs, a curvy road, one-way
    rows, and non-drivable clutter. Returns (elements, bounds)."""
    lat0 = 0.05 * index
    lon0 = 0.03 * index
    dlat = block_m * DEG_PER_M
    dlon = block_m * DEG_PER_M / math.cos(math.radians(lat0))
    base_id = 1_000_000 * (index + 1)

    def nid(r, c):
        return base_id + r * 1000 + c

    nodes = {}
    for r in range(k):
        for c in range(k):
            nodes[nid(r, c)] = (lat0 + r * dlat, lon0 + c * dlon)

    ways = []
    way_id = base_id
    for r in range(k):
        way_id += 1
        tags = {"highway": "residential", "name": f"East Street {r}"}
        if r != 0 and r != k - 1 and rng.random() < 0.25:
            tags["oneway"] = "yes" if r % 2 else "-1"
        ways.append((way_id, [nid(r, c) for c in range(k)], tags))
    for c in range(k):
        way_id += 1
        tags = {"highway": "residential", "name": f"North Street {c}"}
        ways.append((way_id, [nid(r, c) for r in range(k)], tags))

    # dead-end spurs off interior nodes
    extra_id = base_id + 500_000
    for _ in range(max(1, k // 3)):
        r = rng.randrange(1, k - 1)
        c = rng.randrange(1, k - 1)
        extra_id += 1
        spur_len = rng.uniform(0.3, 0.6) * block_m
        angle = rng.uniform(0, 2 * math.pi)
        lat = nodes[nid(r, c)][0] + spur_len * math.sin(angle) * DEG_PER_M
        lon = nodes[nid(r, c)][1] + spur_len * math.cos(angle) * DEG_PER_M / math.cos(math.radians(lat0))
        nodes[extra_id] = (lat, lon)
        way_id += 1
        ways.append((way_id, [nid(r, c), extra_id], {"highway": "residential", "name": "Cul de sac"}))

    # a curvy connector with interstitial bend nodes (simplified away later)
    r0, c0 = 0, 0
    r1, c1 = k - 1, k - 1
    bend_refs = [nid(r0, c0)]
    steps = 4
    for s in range(1, steps):
        t = s / steps
        wiggle = 0.35 * math.sin(3.0 * math.pi * t)
        lat = lat0 + (r0 + t * (r1 - r0)) * dlat + wiggle * dlat
        lon = lon0 + (c0 + t * (c1 - c0)) * dlon
        extra_id += 1
        nodes[extra_id] = (lat, lon)
        bend_refs.append(extra_id)
    bend_refs.append(nid(r1, c1))
    way_id += 1
    ways.append((way_id, bend_refs, {"highway": "tertiary", "name": "Winding Way"}))

    # clutter that the drivable filter must drop
    way_id += 1
    ways.append((way_id, [nid(0, 0), nid(0, 1)], {"highway": "footway"}))
    way_id += 1
    ways.append((way_id, [nid(1, 0), nid(1, 1)], {"highway": "service", "service": "alley"}))
    way_id += 1
    ways.append((way_id, [nid(0, 0), nid(1, 1)], {"highway": "residential", "access": "private"}))

    elements = []
    for node_id in sorted(nodes):
        lat, lon = nodes[node_id]
        elements.append({"type": "node", "id": node_id, "lat": round(lat, 9), "lon": round(lon, 9)})
    for wid, refs, tags in ways:
        elements.append({"type": "way", "id": wid, "nodes": refs, "tags": tags})
    bounds = (lat0, lon0, lat0 + (k - 1) * dlat, lon0 + (k - 1) * dlon)
    return elements, bounds


def to_overpass_json(elements) -> str:
    return json.dumps({"version": 0.6, "generator": "synthetic-town", "elements": elements}, indent=1) + "\n"


def to_osm_xml(elements) -> str:
    lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6" generator="synthetic-town">']
    for el in elements:
        if el["type"] == "node":
            lines.append(f'  <node id="{el["id"]}" lat="{el["lat"]}" lon="{el["lon"]}"/>')
        else:
            lines.append(f'  <way id="{el["id"]}">')
            for ref in el["nodes"]:
                lines.append(f'    <nd ref="{ref}"/>')
            for k, v in el.get("tags", {}).items():
                lines.append(f'    <tag k="{k}" v="{v}"/>')
            lines.append("  </way>")
    lines.append("</osm>")
    return "\n".join(lines) + "\n"


def boundary_geojson(bounds, margin_blocks: float, block_m: float, lat0: float) -> str:
    """Rectangle boundary pulled inward (negative margin) or pushed outward."""
    lat_min, lon_min, lat_max, lon_max = bounds
    dm = margin_blocks * block_m * DEG_PER_M
    dml = dm / math.cos(math.radians(lat0))
    ring = [
        [lon_min + dml, lat_min + dm],
        [lon_max - dml, lat_min + dm],
        [lon_max - dml, lat_max - dm],
        [lon_min + dml, lat_max - dm],
        [lon_min + dml, lat_min + dm],
    ]
    return json.dumps({"type": "Polygon", "coordinates": [ring]}, indent=1) + "\n"


def main() -> None:
    corpus_dir = FIXTURES / "corpus"
    boundary_dir = FIXTURES / "boundaries"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    boundary_dir.mkdir(parents=True, exist_ok=True)

    # 12 towns spanning a wide size range so corpus regressions have signal
    specs = [
        (0, 4, 95.0),
        (1, 5, 120.0),
        (2, 6, 100.0),
        (3, 7, 150.0),
        (4, 8, 110.0),
        (5, 9, 90.0),
        (6, 10, 130.0),
        (7, 11, 105.0),
        (8, 12, 160.0),
        (9, 13, 100.0),
        (10, 14, 140.0),
        (11, 16, 115.0),
    ]
    sites = []
    for index, k, block in specs:
        rng = random.Random(9000 + index)
        elements, bounds = town_elements(index, k, block, rng)
        name = f"town{index:02d}"
        # vary the wire format to exercise every parser path
        if index % 4 == 1:
            (corpus_dir / f"{name}.osm").write_text(to_osm_xml(elements))
            source = f"corpus/{name}.osm"
        elif index % 4 == 2:
            (corpus_dir / f"{name}.osm.gz").write_bytes(
                gzip.compress(to_osm_xml(elements).encode(), mtime=0)
            )
            source = f"corpus/{name}.osm.gz"
        else:
            (corpus_dir / f"{name}.json").write_text(to_overpass_json(elements))
            source = f"corpus/{name}.json"
        # boundary trims half a block inside the outer ring: truncation drops
        # the outermost intersections but keeps their neighbors' street counts
        (boundary_dir / f"{name}.geojson").write_text(
            boundary_geojson(bounds, 0.5, block, 0.05 * index)
        )
        sites.append({"site_id": name, "boundary": f"boundaries/{name}.geojson", "source": source})

    # golden town: all two-way 6x6 grid at 100 m, boundary beyond the grid
    rng = random.Random(77)
    elements, bounds = town_elements(20, 6, 100.0, rng)
    elements = [
        el
        for el in elements
        if el["type"] == "node" or el.get("tags", {}).get("oneway") is None
    ]
    (corpus_dir / "golden.json").write_text(to_overpass_json(elements))
    (boundary_dir / "golden.geojson").write_text(boundary_geojson(bounds, -1.0, 100.0, 0.05 * 20))

    # poisoned fixture: truncated JSON that must fail parsing
    (corpus_dir / "poisoned.json").write_text('{"version": 0.6, "elements": [{"type": "node", "id": 1,')

    manifest = {
        "output_dir": "out",
        "options": {
            "anc": "off",
            "betweenness": "length",
            "pagerank_damping": 0.85,
            "sample_limit": 50000,
            "seed": 0,
            "parallelism": 2,
            "buffer_m": 500.0,
        },
        "sites": sites,
    }
    (FIXTURES / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(sites)} towns + golden + poisoned under {FIXTURES}")


if __name__ == "__main__":
    main()
