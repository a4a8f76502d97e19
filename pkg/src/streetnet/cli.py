"""Command-line interface.

Subcommands mirror the pipeline stages: ``fetch`` (boundary -> cached raw
OSM), ``build`` (raw -> GraphML), ``measure`` (GraphML or raw -> measure
JSON), ``fit`` (GraphML -> ranked distribution fits), ``batch`` (manifest ->
full corpus outputs), and ``stats`` (measures.csv -> summary.csv +
regression.json).

Exit codes: 0 success, 1 partial site failures in batch, 2 usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import distfit, pipeline
from .errors import StreetnetError
from .geo import boundary_area_km2, buffer_boundary, load_geojson_boundary
from .graph import build_graph, compute_streets_per_node, simplify, to_undirected, truncate
from .graphml import export_graphml, import_graphml
from .measures import MeasureReport, compute_measures
from .osm import WayFilter, filter_drivable, resolve
from .overpass import DEFAULT_ENDPOINT, ENDPOINT_ENV_VAR, OverpassClient, build_query
from .resilience import average_node_connectivity


def _add_client_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint", default=None, help=f"Overpass endpoint (or set {ENDPOINT_ENV_VAR})")
    p.add_argument("--cache-dir", default="overpass_cache", help="response cache directory")
    p.add_argument("--timeout-s", type=float, default=180.0)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--offline", action="store_true", help="serve from cache only, never hit the network")


def _client(args) -> OverpassClient:
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV_VAR) or DEFAULT_ENDPOINT
    return OverpassClient(
        endpoint=endpoint,
        cache_dir=args.cache_dir,
        timeout_s=args.timeout_s,
        retries=args.retries,
        offline=args.offline,
    )


def _way_filter(args) -> WayFilter:
    return WayFilter(include_service_roads=args.include_service_roads)


def _load_boundary(path: str):
    return load_geojson_boundary(Path(path).read_bytes())


def _prepare_graph(args, require_boundary_for_truncate: bool = True):
    """Load a graph from --input: GraphML passes through, raw OSM runs the
    build pipeline (with truncation when a boundary is supplied)."""
    data = Path(args.input).read_bytes()
    head = data.lstrip()[:200]
    if head.startswith(b"<?xml") and b"graphml" in head or head.startswith(b"<graphml"):
        return import_graphml(data)
    raw = pipeline.load_raw_file(args.input)
    raw, _ = resolve(raw)
    raw, _ = filter_drivable(raw, _way_filter(args))
    g = simplify(build_graph(raw))
    compute_streets_per_node(g)
    if getattr(args, "boundary", None):
        g = truncate(g, _load_boundary(args.boundary))
    return g


def cmd_fetch(args) -> int:
    boundary = _load_boundary(args.boundary)
    buffered = buffer_boundary(boundary, args.buffer_m) if args.buffer_m > 0 else boundary
    client = _client(args)
    way_filter = _way_filter(args)
    query = build_query(buffered, way_filter, timeout_s=int(args.timeout_s))
    body = client.fetch_raw(query)
    if args.output:
        Path(args.output).write_bytes(body)
    raw = client.fetch(buffered, way_filter)
    print(f"fetched {len(raw.nodes)} nodes, {len(raw.ways)} ways ({client.stats['cache_hits']} cache hits)")
    return 0


def cmd_build(args) -> int:
    raw = pipeline.load_raw_file(args.input)
    raw, dropped_refs = resolve(raw)
    raw, dropped_ways = filter_drivable(raw, _way_filter(args))
    g = simplify(build_graph(raw))
    compute_streets_per_node(g)
    if args.boundary:
        g = truncate(g, _load_boundary(args.boundary))
    Path(args.output).write_bytes(export_graphml(g))
    print(
        f"built graph: {g.node_count} nodes, {g.edge_count} edges "
        f"(dropped {dropped_refs} refs, {sum(dropped_ways.values())} ways)"
    )
    return 0


def cmd_measure(args) -> int:
    g = _prepare_graph(args)
    if args.area_km2 is not None:
        area = args.area_km2
    elif args.boundary:
        area = boundary_area_km2(_load_boundary(args.boundary))
    else:
        print("error: measure requires --area-km2 or --boundary", file=sys.stderr)
        return 2
    anc = None
    if args.anc != "off":
        n = g.node_count
        limit = n * (n - 1) if args.anc == "exact" else args.sample_limit
        anc = average_node_connectivity(g, sample_limit=limit, seed=args.seed)
    report = compute_measures(
        g,
        area,
        pagerank_damping=args.pagerank_damping,
        betweenness_weighted=args.betweenness == "length",
        anc=anc,
    )
    payload = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(payload)
    else:
        print(payload, end="")
    return 0


def cmd_fit(args) -> int:
    g = _prepare_graph(args)
    segments = [e.length_m for e in to_undirected(g).edges.values() if e.length_m > 0]
    if len(segments) < distfit.MIN_SAMPLES:
        print(f"error: only {len(segments)} street segments; need {distfit.MIN_SAMPLES}", file=sys.stderr)
        return 2
    fits = distfit.best_fit(segments)
    lines = ["family,k,log_likelihood,aic,converged,params"]
    for f in fits:
        params = ";".join(f"{k}={repr(v)}" for k, v in f.params.items())
        lines.append(f"{f.family},{f.k},{repr(f.log_likelihood)},{repr(f.aic)},{str(f.converged).lower()},{params}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    print(f"best fit: {fits[0].family} (aic {fits[0].aic:.2f})", file=sys.stderr)
    return 0


def cmd_batch(args) -> int:
    summary, exit_code = pipeline.run_corpus(args.manifest)
    print(f"sites ok: {summary.sites_ok}, failed: {summary.sites_failed}")
    if summary.regression:
        print(f"L-vs-n regression: r^2 = {summary.regression.r_squared:.4f}")
    return exit_code


def cmd_stats(args) -> int:
    rows = _read_measures_csv(Path(args.measures))
    results = [pipeline.SiteResult(site_id=sid, status="ok", report=rep) for sid, rep in rows]
    summary = pipeline.summarize_corpus(results)
    outdir = Path(args.output_dir)
    pipeline.write_corpus_outputs(outdir, results, summary)
    # measures.csv would be a copy of the input; remove to keep stats outputs minimal
    (outdir / "measures.csv").unlink(missing_ok=True)
    (outdir / "fits.csv").unlink(missing_ok=True)
    print(f"wrote {outdir / 'summary.csv'} and {outdir / 'regression.json'}")
    return 0


def _read_measures_csv(path: Path) -> list[tuple[str, MeasureReport]]:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    if header[0] != "site_id":
        raise StreetnetError("measures.csv must start with a site_id column")
    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split(",")
        record = {}
        for name, cell in zip(header[1:], cells[1:]):
            if cell == "":
                record[name] = None
            elif name in ("n", "m", "intersection_count", "street_segment_count"):
                record[name] = int(cell)
            else:
                record[name] = float(cell)
        out.append((cells[0], MeasureReport.from_dict(record)))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streetnet", description="Street network analysis from OpenStreetMap data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download (and cache) raw OSM data for a boundary")
    p.add_argument("--boundary", required=True, help="GeoJSON boundary file")
    p.add_argument("--buffer-m", type=float, default=500.0)
    p.add_argument("--include-service-roads", action="store_true")
    p.add_argument("-o", "--output", help="also write the raw Overpass JSON here")
    _add_client_args(p)
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("build", help="build a simplified street graph from raw OSM data")
    p.add_argument("--input", required=True, help="raw OSM XML (.gz ok) or Overpass JSON")
    p.add_argument("--boundary", help="GeoJSON boundary to truncate to")
    p.add_argument("--include-service-roads", action="store_true")
    p.add_argument("-o", "--output", required=True, help="output GraphML path")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("measure", help="compute the measure report for a network")
    p.add_argument("--input", required=True, help="GraphML or raw OSM input")
    p.add_argument("--boundary", help="GeoJSON boundary (for area and truncation of raw input)")
    p.add_argument("--area-km2", type=float, help="area override when no boundary is given")
    p.add_argument("--include-service-roads", action="store_true")
    p.add_argument("--betweenness", choices=("length", "hops"), default="length")
    p.add_argument("--anc", choices=("off", "exact", "sampled"), default="off")
    p.add_argument("--sample-limit", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pagerank-damping", type=float, default=0.85)
    p.add_argument("-o", "--output", help="write the report JSON here (default: stdout)")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("fit", help="fit candidate distributions to street segment lengths")
    p.add_argument("--input", required=True, help="GraphML or raw OSM input")
    p.add_argument("--boundary", help="GeoJSON boundary (raw input only)")
    p.add_argument("--include-service-roads", action="store_true")
    p.add_argument("-o", "--output", help="write ranked fits CSV here (default: stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("batch", help="run a whole corpus manifest")
    p.add_argument("--manifest", required=True, help="corpus manifest JSON")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("stats", help="recompute summary.csv and regression.json from measures.csv")
    p.add_argument("--measures", required=True, help="measures.csv from a batch run")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StreetnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
