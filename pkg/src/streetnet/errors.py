"""Exception and warning types shared across the package."""


class StreetnetError(Exception):
    """Base class for all errors raised by this package."""


class DegeneratePolygon(StreetnetError):
    """Polygon is invalid: too few distinct vertices, self-intersecting, or zero/negative area."""


class MalformedInput(StreetnetError):
    """Raw OSM input (XML or Overpass JSON) could not be parsed."""


class EmptyNetwork(StreetnetError):
    """No usable graph remains after construction, filtering, or truncation."""


class NoQualifyingEdges(StreetnetError):
    """Circuity is undefined: every edge is a self-loop or has zero great-circle length."""


class NonConvergence(StreetnetError):
    """Iterative solver failed to converge within its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ZeroBaseAnc(StreetnetError):
    """One-way conversion gain is undefined because the baseline ANC is zero."""


class InsufficientSamples(StreetnetError):
    """Too few (or non-positive) samples for a distribution fit."""


class EmptyInput(StreetnetError):
    """Summary statistics require at least one value."""


class DegenerateInput(StreetnetError):
    """Regression input is unusable (mismatched lengths, too short, or constant x)."""


class OverpassError(StreetnetError):
    """Base class for Overpass API client failures."""


class HttpError(OverpassError):
    """Overpass returned a non-success HTTP status."""

    def __init__(self, status, body_excerpt=""):
        super().__init__(f"HTTP {status}: {body_excerpt[:200]}")
        self.status = status
        self.body_excerpt = body_excerpt[:500]


class Timeout(OverpassError):
    """Overpass request timed out after all retries."""


class RateLimited(OverpassError):
    """Overpass rate limit hit and retries were exhausted."""

    def __init__(self, message, retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


class DisconnectedWarning(UserWarning):
    """Betweenness was computed on a graph where not all ordered pairs are reachable."""
