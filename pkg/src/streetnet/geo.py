"""Geodesic and planar-approximation geometry primitives.

All distances use a spherical Earth with mean radius ``EARTH_RADIUS_M``.
Areas, buffers, and point-in-polygon tests are computed on a local
tangent-plane (equirectangular) projection centered on the polygon, which
is accurate to well under 0.1% for study sites up to ~100 km across.

Conventions:
  - rings are implicitly closed: the first vertex is NOT repeated at the end;
  - points on a polygon's boundary (outer ring or hole ring) count as inside;
  - longitude 180 normalizes to -180.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import shapely.geometry

from .errors import DegeneratePolygon, MalformedInput

EARTH_RADIUS_M = 6_371_009.0  # mean Earth radius, meters
METERS_PER_DEGREE = EARTH_RADIUS_M * math.pi / 180.0

# Points within this projected distance of a ring are treated as boundary
# points (and therefore inside). Must stay far below 1 mm so that points
# deliberately placed just outside an edge are classified as outside.
BOUNDARY_EPS_M = 1e-6

# Round-join discretization: segments per 90 degrees of arc.
BUFFER_ARC_SEGMENTS = 8

_POINT_CHUNK = 4096  # rows per block in vectorized point-in-polygon tests


@dataclass(frozen=True)
class GeoPoint:
    """A WGS-ish coordinate on the sphere, degrees. lat in [-90, 90]."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            object.__setattr__(self, "lon", (self.lon + 180.0) % 360.0 - 180.0)
        elif self.lon == 180.0:
            object.__setattr__(self, "lon", -180.0)


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters.

    Symmetric and non-negative; exact 0 for identical coordinates.
    """
    if a.lat == b.lat and a.lon == b.lon:
        return 0.0
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular tangent-plane projection around a fixed origin.

    x is meters east of the origin, y meters north. Exactly invertible, so
    round-trip error is limited only by float rounding (nanometers), far
    inside the 0.01 m contract.
    """

    origin: GeoPoint
    m_per_deg_lat: float
    m_per_deg_lon: float

    @classmethod
    def centered_on(cls, origin: GeoPoint) -> "LocalProjection":
        return cls(
            origin=origin,
            m_per_deg_lat=METERS_PER_DEGREE,
            m_per_deg_lon=METERS_PER_DEGREE * math.cos(math.radians(origin.lat)),
        )

    def project(self, pt: GeoPoint) -> tuple[float, float]:
        dlon = (pt.lon - self.origin.lon + 180.0) % 360.0 - 180.0
        return dlon * self.m_per_deg_lon, (pt.lat - self.origin.lat) * self.m_per_deg_lat

    def unproject(self, x: float, y: float) -> GeoPoint:
        return GeoPoint(
            lat=self.origin.lat + y / self.m_per_deg_lat,
            lon=self.origin.lon + x / self.m_per_deg_lon,
        )

    def project_ring(self, ring: Sequence[GeoPoint]) -> np.ndarray:
        """Project a ring to an (n, 2) float array of x, y meters."""
        lats = np.array([p.lat for p in ring])
        lons = np.array([p.lon for p in ring])
        dlon = (lons - self.origin.lon + 180.0) % 360.0 - 180.0
        return np.column_stack((dlon * self.m_per_deg_lon, (lats - self.origin.lat) * self.m_per_deg_lat))


def _normalize_ring(points: Iterable[GeoPoint]) -> tuple[GeoPoint, ...]:
    """Strip explicit closure and consecutive duplicates; require >= 3 distinct vertices."""
    pts = list(points)
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    deduped: list[GeoPoint] = []
    for p in pts:
        if not deduped or p != deduped[-1]:
            deduped.append(p)
    if len(deduped) >= 2 and deduped[0] == deduped[-1]:
        deduped.pop()
    if len(set((p.lat, p.lon) for p in deduped)) < 3:
        raise DegeneratePolygon(f"ring has {len(deduped)} distinct vertices, need at least 3")
    return tuple(deduped)


@dataclass(frozen=True)
class Polygon:
    """A boundary polygon: one exterior ring plus optional hole rings.

    Rings are implicitly closed and stored without the repeated last vertex.
    """

    exterior: tuple[GeoPoint, ...]
    holes: tuple[tuple[GeoPoint, ...], ...] = ()

    def __init__(self, exterior: Iterable[GeoPoint], holes: Iterable[Iterable[GeoPoint]] = ()):
        object.__setattr__(self, "exterior", _normalize_ring(exterior))
        object.__setattr__(self, "holes", tuple(_normalize_ring(h) for h in holes))

    @property
    def centroid(self) -> GeoPoint:
        """Mean of the exterior vertices; used as a projection origin only."""
        return GeoPoint(
            lat=sum(p.lat for p in self.exterior) / len(self.exterior),
            lon=sum(p.lon for p in self.exterior) / len(self.exterior),
        )

    def projection(self) -> LocalProjection:
        return LocalProjection.centered_on(self.centroid)

    def validate(self) -> "Polygon":
        """Raise DegeneratePolygon if the exterior ring self-intersects."""
        proj = self.projection()
        xy = proj.project_ring(self.exterior)
        if _ring_self_intersects(xy):
            raise DegeneratePolygon("exterior ring is self-intersecting")
        return self


def _orient(ax, ay, bx, by, px, py):
    """Signed orientation of p relative to segment a->b (vectorized)."""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _ring_self_intersects(xy: np.ndarray) -> bool:
    """True if any two non-adjacent edges of the closed ring intersect."""
    n = len(xy)
    ax, ay = xy[:, 0], xy[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    for i in range(n - 2):
        # skip the two segments adjacent to segment i (wraparound-aware)
        j = np.arange(i + 2, n if i > 0 else n - 1)
        if len(j) == 0:
            continue
        d1 = _orient(ax[i], ay[i], bx[i], by[i], ax[j], ay[j])
        d2 = _orient(ax[i], ay[i], bx[i], by[i], bx[j], by[j])
        d3 = _orient(ax[j], ay[j], bx[j], by[j], ax[i], ay[i])
        d4 = _orient(ax[j], ay[j], bx[j], by[j], bx[i], by[i])
        proper = (d1 * d2 < 0) & (d3 * d4 < 0)
        if proper.any():
            return True
        # touching or collinear contact between non-adjacent segments
        touch = (d1 == 0) | (d2 == 0) | (d3 == 0) | (d4 == 0)
        if touch.any():
            idx = j[touch]
            if _any_segment_contact(xy, i, idx):
                return True
    return False


def _any_segment_contact(xy, i, js) -> bool:
    """Exact check for contact between segment i and candidate segments js."""
    n = len(xy)
    a, b = xy[i], xy[(i + 1) % n]
    for j in js:
        c, d = xy[j], xy[(j + 1) % n]
        if _segments_touch(a, b, c, d):
            return True
    return False


def _segments_touch(a, b, c, d) -> bool:
    def on_seg(p, q, r):
        # collinear r within bbox of p..q
        return (
            min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
            and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])
        )

    d1 = _orient(a[0], a[1], b[0], b[1], c[0], c[1])
    d2 = _orient(a[0], a[1], b[0], b[1], d[0], d[1])
    d3 = _orient(c[0], c[1], d[0], d[1], a[0], a[1])
    d4 = _orient(c[0], c[1], d[0], d[1], b[0], b[1])
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and on_seg(a, b, c):
        return True
    if d2 == 0 and on_seg(a, b, d):
        return True
    if d3 == 0 and on_seg(c, d, a):
        return True
    if d4 == 0 and on_seg(c, d, b):
        return True
    return False


def _shoelace_area_m2(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * abs(float(np.sum(x * y2 - x2 * y)))


def polygon_area_km2(p: Polygon) -> float:
    """Area of the exterior minus holes, in km², on the local tangent plane."""
    proj = p.projection()
    area_m2 = _shoelace_area_m2(proj.project_ring(p.exterior))
    for hole in p.holes:
        area_m2 -= _shoelace_area_m2(proj.project_ring(hole))
    if area_m2 <= 0.0:
        raise DegeneratePolygon(f"polygon area is {area_m2 / 1e6} km², must be positive")
    return area_m2 / 1e6


def _to_shapely(p: Polygon, proj: LocalProjection) -> shapely.geometry.Polygon:
    return shapely.geometry.Polygon(
        shell=proj.project_ring(p.exterior),
        holes=[proj.project_ring(h) for h in p.holes],
    )


def _from_shapely(geom, proj: LocalProjection) -> list[Polygon]:
    if geom.is_empty:
        return []
    parts = geom.geoms if geom.geom_type == "MultiPolygon" else [geom]
    out = []
    for part in parts:
        exterior = [proj.unproject(x, y) for x, y in part.exterior.coords]
        holes = [[proj.unproject(x, y) for x, y in ring.coords] for ring in part.interiors]
        out.append(Polygon(exterior, holes))
    return out


def buffer_polygon(p: Polygon, dist_m: float) -> Polygon:
    """Outward buffer by dist_m meters with round joins (8 segments per 90°).

    The result strictly contains the input polygon.
    """
    if dist_m <= 0:
        raise ValueError(f"buffer distance must be positive, got {dist_m}")
    proj = p.projection()
    shape = _to_shapely(p, proj)
    if not shape.is_valid:
        raise DegeneratePolygon("cannot buffer an invalid polygon")
    buffered = shape.buffer(dist_m, quad_segs=BUFFER_ARC_SEGMENTS)
    parts = _from_shapely(buffered, proj)
    if len(parts) != 1:
        raise DegeneratePolygon("buffering did not produce a single polygon")
    return parts[0]


def buffer_boundary(polygons: Sequence[Polygon], dist_m: float) -> list[Polygon]:
    """Buffer each part of a (multi-part) boundary and union the results."""
    if dist_m <= 0:
        raise ValueError(f"buffer distance must be positive, got {dist_m}")
    if not polygons:
        raise DegeneratePolygon("empty boundary")
    proj = polygons[0].projection()
    union = shapely.union_all([_to_shapely(p, proj).buffer(dist_m, quad_segs=BUFFER_ARC_SEGMENTS) for p in polygons])
    return _from_shapely(union, proj)


def boundary_area_km2(polygons: Sequence[Polygon]) -> float:
    """Total area of a multi-part boundary (parts assumed disjoint)."""
    return sum(polygon_area_km2(p) for p in polygons)


class PreparedPolygon:
    """Projected rings of one polygon, for fast repeated point-in-polygon tests."""

    def __init__(self, polygon: Polygon):
        self.polygon = polygon
        self.proj = polygon.projection()
        self._exterior = self.proj.project_ring(polygon.exterior)
        self._holes = [self.proj.project_ring(h) for h in polygon.holes]
        ext = self._exterior
        self._bbox = (
            ext[:, 0].min() - BOUNDARY_EPS_M,
            ext[:, 1].min() - BOUNDARY_EPS_M,
            ext[:, 0].max() + BOUNDARY_EPS_M,
            ext[:, 1].max() + BOUNDARY_EPS_M,
        )

    def contains_many(self, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
        """Vectorized containment test. Boundary points (of any ring) are inside."""
        dlon = (np.asarray(lons, dtype=float) - self.proj.origin.lon + 180.0) % 360.0 - 180.0
        px = dlon * self.proj.m_per_deg_lon
        py = (np.asarray(lats, dtype=float) - self.proj.origin.lat) * self.proj.m_per_deg_lat
        out = np.zeros(len(px), dtype=bool)
        x0, y0, x1, y1 = self._bbox
        cand = (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)
        idx = np.nonzero(cand)[0]
        for start in range(0, len(idx), _POINT_CHUNK):
            block = idx[start : start + _POINT_CHUNK]
            out[block] = self._contains_block(px[block], py[block])
        return out

    def contains(self, pt: GeoPoint) -> bool:
        return bool(self.contains_many(np.array([pt.lat]), np.array([pt.lon]))[0])

    def _contains_block(self, px, py):
        on_edge = _near_ring(self._exterior, px, py, BOUNDARY_EPS_M)
        for hole in self._holes:
            on_edge |= _near_ring(hole, px, py, BOUNDARY_EPS_M)
        inside = _crossings_odd(self._exterior, px, py)
        for hole in self._holes:
            inside &= ~_crossings_odd(hole, px, py)
        return inside | on_edge


def _crossings_odd(ring: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Even-odd ray casting (ray toward +x) for a block of points."""
    ax, ay = ring[:, 0], ring[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    y = py[:, None]
    x = px[:, None]
    straddles = (ay[None, :] > y) != (by[None, :] > y)
    dy = by - ay
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (y - ay[None, :]) / dy[None, :]
        cross_x = ax[None, :] + t * (bx - ax)[None, :]
    hits = straddles & (x < cross_x)
    return (hits.sum(axis=1) % 2).astype(bool)


def _near_ring(ring: np.ndarray, px: np.ndarray, py: np.ndarray, eps: float) -> np.ndarray:
    """True where a point lies within eps of any segment of the ring."""
    ax, ay = ring[:, 0], ring[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    seg_len2 = np.where(seg_len2 == 0.0, 1.0, seg_len2)
    rx = px[:, None] - ax[None, :]
    ry = py[:, None] - ay[None, :]
    t = np.clip((rx * dx[None, :] + ry * dy[None, :]) / seg_len2[None, :], 0.0, 1.0)
    d2 = (rx - t * dx[None, :]) ** 2 + (ry - t * dy[None, :]) ** 2
    return (d2 <= eps * eps).any(axis=1)


def contains(p: Polygon, pt: GeoPoint) -> bool:
    """Point-in-polygon with boundary points counting as inside; holes are outside."""
    return PreparedPolygon(p).contains(pt)


def boundary_contains_many(polygons: Sequence[Polygon], lats, lons) -> np.ndarray:
    """Union containment over a multi-part boundary."""
    lats = np.asarray(lats, dtype=float)
    lons = np.asarray(lons, dtype=float)
    out = np.zeros(len(lats), dtype=bool)
    for p in polygons:
        remaining = ~out
        if not remaining.any():
            break
        out[remaining] = PreparedPolygon(p).contains_many(lats[remaining], lons[remaining])
    return out


def _ring_from_coords(coords) -> list[GeoPoint]:
    try:
        return [GeoPoint(lat=float(c[1]), lon=float(c[0])) for c in coords]
    except (TypeError, IndexError, ValueError) as exc:
        raise MalformedInput(f"bad GeoJSON ring coordinates: {exc}") from exc


def _polygons_from_geometry(geom) -> list[Polygon]:
    gtype = geom.get("type")
    if gtype == "Polygon":
        rings = geom.get("coordinates", [])
        if not rings:
            raise MalformedInput("GeoJSON Polygon has no rings")
        return [Polygon(_ring_from_coords(rings[0]), [_ring_from_coords(r) for r in rings[1:]]).validate()]
    if gtype == "MultiPolygon":
        out = []
        for part in geom.get("coordinates", []):
            if not part:
                raise MalformedInput("GeoJSON MultiPolygon part has no rings")
            out.append(Polygon(_ring_from_coords(part[0]), [_ring_from_coords(r) for r in part[1:]]).validate())
        if not out:
            raise MalformedInput("GeoJSON MultiPolygon is empty")
        return out
    raise MalformedInput(f"unsupported GeoJSON geometry type: {gtype!r}")


def load_geojson_boundary(source: str | bytes | dict) -> list[Polygon]:
    """Read a boundary from GeoJSON text or a decoded object.

    Accepts Polygon, MultiPolygon, Feature, or FeatureCollection. A
    MultiPolygon (or multiple features) is treated as the union of its parts.
    """
    if isinstance(source, (str, bytes)):
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"invalid GeoJSON: {exc}") from exc
    else:
        obj = source
    if not isinstance(obj, dict):
        raise MalformedInput("GeoJSON root must be an object")
    gtype = obj.get("type")
    if gtype == "FeatureCollection":
        polys: list[Polygon] = []
        for feature in obj.get("features", []):
            geometry = feature.get("geometry")
            if geometry:
                polys.extend(_polygons_from_geometry(geometry))
        if not polys:
            raise MalformedInput("FeatureCollection contains no polygonal geometry")
        return polys
    if gtype == "Feature":
        geometry = obj.get("geometry")
        if not geometry:
            raise MalformedInput("Feature has no geometry")
        return _polygons_from_geometry(geometry)
    return _polygons_from_geometry(obj)
