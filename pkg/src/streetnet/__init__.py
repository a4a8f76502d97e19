"""streetnet: build, measure, and batch-analyze drivable street networks
from OpenStreetMap data.

The pipeline for one study site: buffer the boundary polygon, download (or
load) the raw OSM nodes and ways inside it, filter to the drivable public
network, construct the primal directed multigraph, simplify its topology so
nodes are intersections or dead-ends, count streets per node, truncate to
the original boundary, then compute metric, topological, and resilience
measures. Corpus runs batch this over many sites and aggregate summary
statistics, the street-length-vs-nodes regression, and AIC-ranked segment
length distribution fits.
"""

from .distfit import FitResult, RegressionResult, StatsSummary, best_fit, fit_family, linear_regression, summarize
from .geo import GeoPoint, LocalProjection, Polygon, buffer_polygon, contains, haversine_m, polygon_area_km2
from .graph import (
    Edge,
    NodeTypeHistogram,
    StreetGraph,
    add_reverse_twins,
    build_graph,
    compute_streets_per_node,
    simplify,
    to_undirected,
    truncate,
)
from .graphml import export_graphml, import_graphml
from .measures import MeasureReport, avg_circuity, clustering, compute_measures, degree_measures, metric_measures
from .centrality import betweenness, pagerank
from .osm import OsmNode, OsmWay, RawOsmData, WayFilter, filter_drivable, parse_osm_xml, parse_overpass_json, resolve
from .overpass import OverpassClient, build_query
from .pipeline import CorpusOptions, CorpusSummary, SiteSpec, load_manifest, run_corpus, run_site
from .resilience import AncResult, average_node_connectivity, node_connectivity, oneway_conversion_gain

__version__ = "0.1.0"
