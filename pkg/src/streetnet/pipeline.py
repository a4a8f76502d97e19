"""Batch orchestration: per-site pipeline (buffer, fetch, filter, build,
simplify, count streets, truncate, measure, persist) and corpus-level
aggregation into summary tables, the length-vs-nodes regression, and the
distribution-fit breakdown.

All outputs are deterministic for a fixed manifest, cache, and seed: sites
are processed in a bounded thread pool but aggregated in sorted site order,
and every float is written in shortest round-trip form.
"""

from __future__ import annotations

import json
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import distfit
from .errors import StreetnetError
from .geo import Polygon, boundary_area_km2, buffer_boundary, load_geojson_boundary
from .graph import StreetGraph, build_graph, compute_streets_per_node, simplify, to_undirected, truncate
from .graphml import export_graphml
from .measures import MeasureReport, compute_measures
from .osm import RawOsmData, WayFilter, filter_drivable, parse_osm_xml, parse_overpass_json, resolve
from .overpass import DEFAULT_ENDPOINT, ENDPOINT_ENV_VAR, OverpassClient
from .resilience import AncResult, average_node_connectivity

OVERPASS_SOURCE = "overpass"
MIN_FIT_SAMPLES = distfit.MIN_SAMPLES


@dataclass(frozen=True)
class SiteSpec:
    """One study site: a boundary plus how to obtain its raw OSM data."""

    site_id: str
    boundary: tuple[Polygon, ...]
    buffer_m: float = 500.0
    way_filter: WayFilter = field(default_factory=WayFilter)
    source: str = OVERPASS_SOURCE  # "overpass" or a path to a raw OSM file


@dataclass(frozen=True)
class CorpusOptions:
    anc_mode: str = "off"  # off | exact | sampled
    betweenness_mode: str = "length"  # length | hops
    pagerank_damping: float = 0.85
    sample_limit: int = 50_000
    seed: int = 0
    parallelism: Optional[int] = None  # None: one worker per CPU
    endpoint: Optional[str] = None
    offline: bool = False
    cache_dir: Optional[str] = None
    timeout_s: float = 180.0
    retries: int = 3

    def resolved_endpoint(self) -> str:
        return self.endpoint or os.environ.get(ENDPOINT_ENV_VAR) or DEFAULT_ENDPOINT


@dataclass
class SiteResult:
    site_id: str
    status: str  # "ok" | "error"
    report: Optional[MeasureReport] = None
    best_family: Optional[str] = None
    stage: Optional[str] = None
    error: Optional[str] = None


@dataclass
class CorpusSummary:
    """Per-measure summary statistics plus regression and fit breakdown."""

    measures: dict[str, Optional[distfit.StatsSummary]]
    regression: Optional[distfit.RegressionResult]
    fit_breakdown: dict[str, float]
    sites_ok: int
    sites_failed: int


def load_manifest(path: str | Path):
    """Read a corpus manifest JSON file.

    Returns (sites, options, output_dir). Site boundary values may be a path
    to a GeoJSON file (relative to the manifest) or an inline GeoJSON object;
    site source is "overpass" or a raw OSM file path.
    """
    path = Path(path)
    obj = json.loads(path.read_text())
    base = path.parent
    opts_in = obj.get("options", {})
    options = CorpusOptions(
        anc_mode=opts_in.get("anc", "off"),
        betweenness_mode=opts_in.get("betweenness", "length"),
        pagerank_damping=float(opts_in.get("pagerank_damping", 0.85)),
        sample_limit=int(opts_in.get("sample_limit", 50_000)),
        seed=int(opts_in.get("seed", 0)),
        parallelism=opts_in.get("parallelism"),
        endpoint=opts_in.get("endpoint"),
        offline=bool(opts_in.get("offline", False)),
        cache_dir=str(base / opts_in["cache_dir"]) if opts_in.get("cache_dir") else None,
        timeout_s=float(opts_in.get("timeout_s", 180.0)),
        retries=int(opts_in.get("retries", 3)),
    )
    if options.anc_mode not in ("off", "exact", "sampled"):
        raise ValueError(f"manifest option anc must be off/exact/sampled, got {options.anc_mode!r}")
    if options.betweenness_mode not in ("length", "hops"):
        raise ValueError(f"manifest option betweenness must be length/hops, got {options.betweenness_mode!r}")

    default_filter = {
        "include_service_roads": bool(opts_in.get("include_service_roads", False)),
    }
    default_buffer = float(opts_in.get("buffer_m", 500.0))

    sites = []
    seen_ids = set()
    for entry in obj.get("sites", []):
        site_id = str(entry["site_id"])
        if site_id in seen_ids:
            raise ValueError(f"duplicate site_id {site_id!r} in manifest")
        seen_ids.add(site_id)
        boundary_value = entry["boundary"]
        if isinstance(boundary_value, str):
            boundary = load_geojson_boundary((base / boundary_value).read_bytes())
        else:
            boundary = load_geojson_boundary(boundary_value)
        filter_kwargs = dict(default_filter)
        filter_kwargs.update(entry.get("filter", {}))
        way_filter = _build_filter(filter_kwargs)
        source = entry.get("source", OVERPASS_SOURCE)
        if source != OVERPASS_SOURCE:
            source = str(base / source)
        sites.append(
            SiteSpec(
                site_id=site_id,
                boundary=tuple(boundary),
                buffer_m=float(entry.get("buffer_m", default_buffer)),
                way_filter=way_filter,
                source=source,
            )
        )
    if not sites:
        raise ValueError("manifest contains no sites")
    output_dir = base / obj.get("output_dir", "out")
    return sites, options, output_dir


def _build_filter(kwargs: dict) -> WayFilter:
    allowed = {}
    if "include_highway_tags" in kwargs:
        allowed["include_highway_tags"] = frozenset(kwargs["include_highway_tags"])
    if "exclude_highway_tags" in kwargs:
        allowed["exclude_highway_tags"] = frozenset(kwargs["exclude_highway_tags"])
    if "exclude_access_values" in kwargs:
        allowed["exclude_access_values"] = frozenset(kwargs["exclude_access_values"])
    allowed["include_service_roads"] = bool(kwargs.get("include_service_roads", False))
    return WayFilter(**allowed)


def load_raw_file(path: str | Path) -> RawOsmData:
    """Read a raw OSM file, sniffing Overpass JSON vs OSM XML (optionally gzipped)."""
    data = Path(path).read_bytes()
    gzipped = data[:2] == b"\x1f\x8b"
    if not gzipped and data.lstrip()[:1] == b"{":
        return parse_overpass_json(data, provenance=str(path))
    return parse_osm_xml(data, provenance=str(path))


def run_site(
    spec: SiteSpec,
    options: CorpusOptions | None = None,
    output_dir: str | Path | None = None,
    client: OverpassClient | None = None,
    betweenness_threads: int | None = None,
) -> tuple[StreetGraph, MeasureReport]:
    """Execute the full pipeline for one site and persist its artifacts.

    Stages, in order: buffer the boundary, fetch or load raw data, filter to
    the drivable network, build the graph, simplify, count streets per node,
    truncate to the original boundary, compute measures. Artifacts land in
    ``output_dir/site_id/``: graph.graphml, nodes.csv, edges.csv,
    measures.json, fits.json (when enough segments), status.json.
    """
    options = options or CorpusOptions()
    if client is None and spec.source == OVERPASS_SOURCE:
        client = OverpassClient(
            endpoint=options.resolved_endpoint(),
            cache_dir=options.cache_dir,
            timeout_s=options.timeout_s,
            retries=options.retries,
            offline=options.offline,
        )

    buffered = buffer_boundary(spec.boundary, spec.buffer_m) if spec.buffer_m > 0 else list(spec.boundary)
    if spec.source == OVERPASS_SOURCE:
        raw = client.fetch(buffered, spec.way_filter)
    else:
        raw = load_raw_file(spec.source)
    raw, _dropped_refs = resolve(raw)
    raw, _dropped_ways = filter_drivable(raw, spec.way_filter)

    g = build_graph(raw)
    g = simplify(g)
    compute_streets_per_node(g)
    g = truncate(g, spec.boundary)

    anc = _compute_anc(g, options)
    report = compute_measures(
        g,
        boundary_area_km2(spec.boundary),
        pagerank_damping=options.pagerank_damping,
        betweenness_weighted=options.betweenness_mode == "length",
        betweenness_threads=betweenness_threads,
        anc=anc,
    )

    if output_dir is not None:
        persist_site(Path(output_dir) / spec.site_id, g, report)
    return g, report


def _compute_anc(g: StreetGraph, options: CorpusOptions) -> Optional[AncResult]:
    if options.anc_mode == "off":
        return None
    if options.anc_mode == "exact":
        n = g.node_count
        return average_node_connectivity(g, sample_limit=n * (n - 1), seed=options.seed)
    return average_node_connectivity(g, sample_limit=options.sample_limit, seed=options.seed)


def _fmt(value) -> str:
    """Shortest round-trip text for CSV cells; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def persist_site(site_dir: Path, g: StreetGraph, report: MeasureReport) -> None:
    site_dir.mkdir(parents=True, exist_ok=True)
    (site_dir / "graph.graphml").write_bytes(export_graphml(g))

    node_lines = ["id,lat,lon,streets_per_node"]
    for node in sorted(g.nodes):
        loc = g.nodes[node]
        node_lines.append(f"{node},{_fmt(loc.lat)},{_fmt(loc.lon)},{_fmt(g.streets_per_node.get(node))}")
    _write_text(site_dir / "nodes.csv", "\n".join(node_lines) + "\n")

    edge_lines = ["edge_id,u,v,length_m,oneway,reversed_twin,geometry"]
    for eid in sorted(g.edges):
        e = g.edges[eid]
        geom = " ".join(f"{_fmt(p.lon)} {_fmt(p.lat)}" for p in e.geometry)
        edge_lines.append(
            f"{e.edge_id},{e.u},{e.v},{_fmt(e.length_m)},{str(e.oneway).lower()},{_fmt(e.reversed_twin)},{geom}"
        )
    _write_text(site_dir / "edges.csv", "\n".join(edge_lines) + "\n")

    _write_text(site_dir / "measures.json", json.dumps(report.to_dict(), indent=2) + "\n")

    segments = [e.length_m for e in to_undirected(g).edges.values() if e.length_m > 0]
    if len(segments) >= MIN_FIT_SAMPLES:
        fits = distfit.best_fit(segments)
        payload = [
            {
                "family": f.family,
                "params": f.params,
                "log_likelihood": f.log_likelihood,
                "k": f.k,
                "aic": f.aic,
                "converged": f.converged,
            }
            for f in fits
        ]
        _write_text(site_dir / "fits.json", json.dumps(payload, indent=2) + "\n")

    _write_text(site_dir / "status.json", json.dumps({"status": "ok"}, indent=2) + "\n")


def _run_site_guarded(spec: SiteSpec, options: CorpusOptions, output_dir: Path, client, threads) -> SiteResult:
    try:
        _, report = run_site(spec, options, output_dir, client=client, betweenness_threads=threads)
        best_family = _best_family_of(output_dir / spec.site_id)
        return SiteResult(site_id=spec.site_id, status="ok", report=report, best_family=best_family)
    except Exception as exc:  # crash isolation: a failing site must not abort the batch
        site_dir = output_dir / spec.site_id
        site_dir.mkdir(parents=True, exist_ok=True)
        stage = exc.__class__.__name__
        detail = str(exc) if isinstance(exc, StreetnetError) else traceback.format_exc(limit=3)
        _write_text(site_dir / "status.json", json.dumps({"status": "error", "stage": stage, "error": str(exc)}, indent=2) + "\n")
        return SiteResult(site_id=spec.site_id, status="error", stage=stage, error=detail)


def _best_family_of(site_dir: Path) -> Optional[str]:
    fits_path = site_dir / "fits.json"
    if not fits_path.exists():
        return None
    fits = json.loads(fits_path.read_text())
    for f in fits:
        if f.get("converged"):
            return f["family"]
    return None


def run_corpus(manifest_path: str | Path) -> tuple[CorpusSummary, int]:
    """Run every site of a manifest and aggregate the corpus outputs.

    Writes measures.csv (one row per successful site), summary.csv (one
    row of summary statistics per measure), regression.json (total street
    length vs node count), and fits.csv (share of sites best fit by each
    family). Returns the summary and a process exit code: 0 for full
    success, 1 when any site failed.
    """
    sites, options, output_dir = load_manifest(manifest_path)
    output_dir.mkdir(parents=True, exist_ok=True)

    workers = options.parallelism or os.cpu_count() or 1
    betweenness_threads = 1 if workers > 1 else None
    client = OverpassClient(
        endpoint=options.resolved_endpoint(),
        cache_dir=options.cache_dir,
        timeout_s=options.timeout_s,
        retries=options.retries,
        offline=options.offline,
    )

    if workers <= 1:
        results = [_run_site_guarded(s, options, output_dir, client, betweenness_threads) for s in sites]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda s: _run_site_guarded(s, options, output_dir, client, betweenness_threads), sites)
            )
    results.sort(key=lambda r: r.site_id)

    ok = [r for r in results if r.status == "ok"]
    summary = summarize_corpus(ok)
    write_corpus_outputs(output_dir, results, summary)
    exit_code = 0 if len(ok) == len(results) else 1
    return summary, exit_code


def summarize_corpus(results: list[SiteResult]) -> CorpusSummary:
    """Aggregate successful site reports into the corpus summary."""
    reports = [r.report for r in results if r.report is not None]
    measures: dict[str, Optional[distfit.StatsSummary]] = {}
    for name in MeasureReport.field_names():
        values = [getattr(rep, name) for rep in reports]
        values = [v for v in values if v is not None]
        measures[name] = distfit.summarize(values) if values else None

    regression = None
    ns = [rep.n for rep in reports]
    lengths = [rep.total_street_length_km for rep in reports]
    if len(ns) >= 3 and min(ns) != max(ns):
        regression = distfit.linear_regression(ns, lengths)

    families = [r.best_family for r in results if r.best_family]
    breakdown = {}
    if families:
        for family in sorted(set(families)):
            breakdown[family] = 100.0 * families.count(family) / len(families)

    failed = sum(1 for r in results if r.status != "ok")
    return CorpusSummary(
        measures=measures,
        regression=regression,
        fit_breakdown=breakdown,
        sites_ok=len(reports),
        sites_failed=failed,
    )


def write_corpus_outputs(output_dir: Path, results: list[SiteResult], summary: CorpusSummary) -> None:
    fields = MeasureReport.field_names()
    lines = ["site_id," + ",".join(fields)]
    for r in results:
        if r.status != "ok" or r.report is None:
            continue
        rep = r.report.to_dict()
        lines.append(r.site_id + "," + ",".join(_fmt(rep[f]) for f in fields))
    _write_text(output_dir / "measures.csv", "\n".join(lines) + "\n")

    lines = ["measure,mu,sigma,min,median,max,dispersion"]
    for name in fields:
        s = summary.measures.get(name)
        if s is None:
            lines.append(f"{name},,,,,,")
        else:
            lines.append(
                f"{name},{_fmt(s.mu)},{_fmt(s.sigma)},{_fmt(s.min)},{_fmt(s.median)},{_fmt(s.max)},{_fmt(s.dispersion)}"
            )
    _write_text(output_dir / "summary.csv", "\n".join(lines) + "\n")

    reg = summary.regression
    _write_text(
        output_dir / "regression.json",
        json.dumps(
            {
                "slope": reg.slope if reg else None,
                "intercept": reg.intercept if reg else None,
                "r_squared": reg.r_squared if reg else None,
            },
            indent=2,
        )
        + "\n",
    )

    lines = ["family,percent_best"]
    for family, pct in sorted(summary.fit_breakdown.items()):
        lines.append(f"{family},{_fmt(pct)}")
    _write_text(output_dir / "fits.csv", "\n".join(lines) + "\n")
