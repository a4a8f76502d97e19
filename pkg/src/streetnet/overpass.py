"""Overpass API client: one query per site, content-addressed response cache,
retry with exponential backoff, and per-endpoint request serialization.

The cache is keyed by the SHA-256 of the query text; each entry stores the
raw response bytes next to a metadata file carrying the content checksum, so
corrupted entries are detected and refetched.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from pathlib import Path
from typing import Sequence

import requests

from .errors import HttpError, MalformedInput, OverpassError, RateLimited, Timeout
from .geo import Polygon
from .osm import RawOsmData, WayFilter, parse_overpass_json

DEFAULT_ENDPOINT = "https://overpass-api.de/api/interpreter"
ENDPOINT_ENV_VAR = "STREETNET_OVERPASS_ENDPOINT"

# Overpass usage policy: keep one in-flight request per endpoint by default.
_endpoint_locks: dict[tuple[str, int], threading.Semaphore] = {}
_locks_guard = threading.Lock()


def _endpoint_semaphore(endpoint: str, concurrency: int) -> threading.Semaphore:
    with _locks_guard:
        key = (endpoint, concurrency)
        if key not in _endpoint_locks:
            _endpoint_locks[key] = threading.Semaphore(concurrency)
        return _endpoint_locks[key]


def _poly_clause(polygon: Polygon) -> str:
    coords = " ".join(f"{repr(p.lat)} {repr(p.lon)}" for p in polygon.exterior)
    return f'(poly:"{coords}")'


def build_query(boundary: Sequence[Polygon], way_filter: WayFilter | None = None, timeout_s: int = 180) -> str:
    """Overpass QL selecting drivable-candidate ways within the boundary
    polygon(s) plus all their member nodes.

    Hole rings cannot be expressed in an Overpass poly filter; the extra data
    they admit is removed later by truncation.
    """
    f = way_filter or WayFilter()
    tags = set(f.include_highway_tags)
    if f.include_service_roads:
        tags.add("service")
    regex = "|".join(sorted(tags))
    clauses = "\n".join(f'  way["highway"~"^({regex})$"]{_poly_clause(p)};' for p in boundary)
    return f"[out:json][timeout:{timeout_s}];\n(\n{clauses}\n);\n(._;>;);\nout body;\n"


class OverpassClient:
    """HTTP client for the Overpass interpreter endpoint.

    Retries transient failures (429 and 5xx) with exponential backoff,
    honoring Retry-After. All successful responses land in the cache; a
    cached query never touches the network again. ``stats`` counts requests,
    retries, and cache hits for observability and tests.
    """

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        cache_dir: str | Path | None = None,
        timeout_s: float = 180.0,
        retries: int = 3,
        backoff_base_s: float = 1.0,
        offline: bool = False,
        max_concurrency: int = 1,
    ):
        self.endpoint = endpoint
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_base_s = backoff_base_s
        self.offline = offline
        self.max_concurrency = max_concurrency
        self.stats = {"requests": 0, "retries": 0, "cache_hits": 0}

    # -- cache ---------------------------------------------------------

    def _cache_paths(self, query: str) -> tuple[Path, Path] | None:
        if self.cache_dir is None:
            return None
        digest = hashlib.sha256(query.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json", self.cache_dir / f"{digest}.meta.json"

    def _cache_read(self, query: str) -> bytes | None:
        paths = self._cache_paths(query)
        if paths is None:
            return None
        body_path, meta_path = paths
        if not body_path.exists() or not meta_path.exists():
            return None
        try:
            meta = json.loads(meta_path.read_text())
            body = body_path.read_bytes()
        except (OSError, json.JSONDecodeError):
            return None
        if hashlib.sha256(body).hexdigest() != meta.get("sha256"):
            return None  # corrupted entry: refetch
        return body

    def _cache_write(self, query: str, body: bytes) -> None:
        paths = self._cache_paths(query)
        if paths is None:
            return
        body_path, meta_path = paths
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        body_path.write_bytes(body)
        meta_path.write_text(
            json.dumps(
                {"sha256": hashlib.sha256(body).hexdigest(), "endpoint": self.endpoint, "bytes": len(body)},
                indent=2,
            )
            + "\n"
        )

    # -- fetching ------------------------------------------------------

    def fetch_raw(self, query: str) -> bytes:
        """Raw response bytes for a query, from cache when possible."""
        cached = self._cache_read(query)
        if cached is not None:
            self.stats["cache_hits"] += 1
            return cached
        if self.offline:
            raise OverpassError("offline mode and query not in cache")
        body = self._request_with_retries(query)
        self._cache_write(query, body)
        return body

    def fetch(self, boundary: Sequence[Polygon], way_filter: WayFilter | None = None) -> RawOsmData:
        """Fetch and parse the street network within a boundary."""
        query = build_query(boundary, way_filter, timeout_s=int(self.timeout_s))
        body = self.fetch_raw(query)
        try:
            return parse_overpass_json(body, provenance=f"overpass:{hashlib.sha256(query.encode()).hexdigest()[:12]}")
        except MalformedInput:
            # a corrupt body that happened to pass the checksum must not poison future runs
            paths = self._cache_paths(query)
            if paths is not None:
                for p in paths:
                    p.unlink(missing_ok=True)
            raise

    def _request_with_retries(self, query: str) -> bytes:
        sem = _endpoint_semaphore(self.endpoint, self.max_concurrency)
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt > 0:
                self.stats["retries"] += 1
            with sem:
                self.stats["requests"] += 1
                try:
                    resp = requests.post(self.endpoint, data={"data": query}, timeout=self.timeout_s)
                except requests.Timeout as exc:
                    last_error = Timeout(f"request timed out after {self.timeout_s}s")
                    last_error.__cause__ = exc
                    continue
                except requests.RequestException as exc:
                    last_error = OverpassError(f"request failed: {exc}")
                    last_error.__cause__ = exc
                    continue
            if resp.status_code == 200:
                return resp.content
            if resp.status_code == 429 or resp.status_code >= 500:
                retry_after = _parse_retry_after(resp.headers.get("Retry-After"))
                wait = retry_after if retry_after is not None else self.backoff_base_s * (2.0**attempt)
                last_error = (
                    RateLimited(f"rate limited (HTTP {resp.status_code})", retry_after=retry_after)
                    if resp.status_code == 429
                    else HttpError(resp.status_code, resp.text)
                )
                if attempt < self.retries:
                    time.sleep(wait)
                continue
            raise HttpError(resp.status_code, resp.text)
        assert last_error is not None
        raise last_error


def _parse_retry_after(value: str | None) -> float | None:
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None
