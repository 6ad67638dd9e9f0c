"""Planar geometry kernel used by every stage of the pipeline.

All coordinates are planar meters in a projected grid; no spherical
math anywhere. Boolean operations, containment and distance queries
are delegated to shapely (GEOS), Voronoi diagrams to scipy's Qhull
wrapper. The types here are immutable value objects that validate at
construction: invalid rings are rejected, never repaired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely
import shapely.geometry as sgeom
from scipy.spatial import QhullError, Voronoi as _Voronoi
from shapely.validation import explain_validity

from .errors import GeometryError

# Area below this (m^2) counts as degenerate in validity checks and in
# boolean-result filtering.
AREA_TOLERANCE = 1e-6


@dataclass(frozen=True, order=True)
class Point2:
    """A point in planar meter coordinates."""

    x: float
    y: float

    def __post_init__(self) -> None:
        # coerce so numpy scalars never leak into hashing or JSON output
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite coordinate ({self.x}, {self.y})")

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Polyline:
    """An open chain of at least two vertices with positive length.

    Consecutive vertices must be distinct; a closed loop is expressed
    by repeating the first vertex at the end.
    """

    vertices: tuple[Point2, ...]

    def __post_init__(self) -> None:
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 2:
            raise GeometryError("polyline needs at least two vertices")
        for i, (a, b) in enumerate(zip(verts, verts[1:])):
            if a == b:
                raise GeometryError(f"repeated consecutive vertex at {i}")

    @cached_property
    def length(self) -> float:
        return sum(a.distance_to(b) for a, b in zip(self.vertices, self.vertices[1:]))

    @property
    def start(self) -> Point2:
        return self.vertices[0]

    @property
    def end(self) -> Point2:
        return self.vertices[-1]

    def to_shapely(self) -> sgeom.LineString:
        return sgeom.LineString([v.as_tuple() for v in self.vertices])

    def sample_points(self, interval: float) -> list[Point2]:
        """Vertices plus evenly spaced fill so gaps never exceed interval."""
        if interval <= 0:
            raise GeometryError("sampling interval must be positive")
        out: list[Point2] = []
        for a, b in zip(self.vertices, self.vertices[1:]):
            out.append(a)
            pieces = math.ceil(a.distance_to(b) / interval)
            for k in range(1, pieces):
                t = k / pieces
                out.append(Point2(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t))
        out.append(self.vertices[-1])
        return out


def _ring_area(ring: Sequence[Point2]) -> float:
    """Signed shoelace area; positive for counterclockwise rings."""
    total = 0.0
    n = len(ring)
    for i in range(n):
        a = ring[i]
        b = ring[(i + 1) % n]
        total += a.x * b.y - b.x * a.y
    return total / 2.0


def _normalize_ring(ring: Sequence[Point2], index: int, clockwise: bool) -> tuple[Point2, ...]:
    verts = list(ring)
    if len(verts) >= 2 and verts[0] == verts[-1]:
        verts = verts[:-1]
    if len(verts) < 3:
        raise GeometryError(f"ring {index}: needs at least three distinct vertices")
    for i in range(len(verts)):
        if verts[i] == verts[(i + 1) % len(verts)]:
            raise GeometryError(f"ring {index}: repeated consecutive vertex at {i}")
    closed = [v.as_tuple() for v in verts] + [verts[0].as_tuple()]
    if not sgeom.LineString(closed).is_simple:
        raise GeometryError(f"ring {index}: self-intersecting")
    area = _ring_area(verts)
    if abs(area) <= AREA_TOLERANCE:
        raise GeometryError(f"ring {index}: area {abs(area):g} below tolerance")
    if clockwise == (area > 0):
        verts.reverse()
    return tuple(verts)


@dataclass(frozen=True)
class Polygon:
    """A simple polygon with optional holes.

    The exterior ring is stored counterclockwise and every hole
    clockwise; input rings in the opposite winding are reversed, which
    changes representation but not the point set. Anything else that is
    wrong with a ring (self-intersection, degenerate area, a hole
    outside the exterior) raises GeometryError.
    """

    exterior: tuple[Point2, ...]
    holes: tuple[tuple[Point2, ...], ...] = ()

    def __post_init__(self) -> None:
        ext = _normalize_ring(tuple(self.exterior), 0, clockwise=False)
        hls = tuple(
            _normalize_ring(tuple(h), i + 1, clockwise=True)
            for i, h in enumerate(self.holes)
        )
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", hls)
        shape = self.to_shapely()
        if not shape.is_valid:
            raise GeometryError(f"invalid polygon: {explain_validity(shape)}")

    @cached_property
    def _shape(self) -> sgeom.Polygon:
        shell = [v.as_tuple() for v in self.exterior]
        holes = [[v.as_tuple() for v in h] for h in self.holes]
        poly = sgeom.Polygon(shell, holes)
        shapely.prepare(poly)
        return poly

    def to_shapely(self) -> sgeom.Polygon:
        return self._shape

    @cached_property
    def _boundary(self):
        boundary = self._shape.boundary
        shapely.prepare(boundary)
        return boundary

    @property
    def area(self) -> float:
        return self._shape.area

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return self._shape.bounds

    def rings(self) -> list[tuple[Point2, ...]]:
        return [self.exterior, *self.holes]

    def representative_point(self) -> Point2:
        p = self._shape.representative_point()
        return Point2(p.x, p.y)

    @classmethod
    def from_shapely(cls, shape: sgeom.Polygon) -> "Polygon":
        ext = tuple(Point2(x, y) for x, y in shape.exterior.coords[:-1])
        holes = tuple(
            tuple(Point2(x, y) for x, y in ring.coords[:-1])
            for ring in shape.interiors
        )
        return cls(ext, holes)


@dataclass(frozen=True)
class MultiPolygon:
    """Zero or more polygons whose interiors are pairwise disjoint."""

    parts: tuple[Polygon, ...] = ()

    def __post_init__(self) -> None:
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        for i in range(len(parts)):
            bi = parts[i].bounds
            for j in range(i + 1, len(parts)):
                bj = parts[j].bounds
                if bi[0] > bj[2] or bj[0] > bi[2] or bi[1] > bj[3] or bj[1] > bi[3]:
                    continue
                inter = parts[i].to_shapely().intersection(parts[j].to_shapely())
                if inter.area > AREA_TOLERANCE:
                    raise GeometryError(f"parts {i} and {j} overlap")

    @property
    def area(self) -> float:
        return sum(p.area for p in self.parts)

    def to_shapely(self) -> sgeom.base.BaseGeometry:
        return shapely.union_all([p.to_shapely() for p in self.parts])

    @classmethod
    def from_shapely(cls, shape) -> "MultiPolygon":
        return cls(tuple(_polygon_parts(shape)))


def _polygon_parts(shape) -> list[Polygon]:
    """Polygonal content of any GEOS result, sorted for determinism."""
    raw: list[sgeom.Polygon] = []
    if shape.is_empty:
        pass
    elif shape.geom_type == "Polygon":
        raw.append(shape)
    elif shape.geom_type == "MultiPolygon":
        raw.extend(shape.geoms)
    elif shape.geom_type == "GeometryCollection":
        for g in shape.geoms:
            raw.extend(_polygon_parts(g))
    raw = [p for p in raw if p.area > AREA_TOLERANCE]
    raw.sort(key=lambda p: (p.bounds[0], p.bounds[1], p.bounds[2], p.bounds[3]))
    return [Polygon.from_shapely(p) for p in raw]


def point_in_polygon(point: Point2, polygon: Polygon) -> bool:
    """True when the point lies inside or on the boundary."""
    return bool(shapely.intersects_xy(polygon.to_shapely(), point.x, point.y))


def point_in_multipolygon(point: Point2, area: MultiPolygon) -> bool:
    return any(point_in_polygon(point, p) for p in area.parts)


def distance_to_boundary(point: Point2, polygon: Polygon) -> float:
    """Distance from an interior (or boundary) point to the nearest ring."""
    if not point_in_polygon(point, polygon):
        raise GeometryError(f"point ({point.x}, {point.y}) lies outside the polygon")
    return float(polygon._boundary.distance(sgeom.Point(point.x, point.y)))


def polygon_difference(a: Polygon, b: MultiPolygon) -> MultiPolygon:
    """Subtract b from a; result parts are disjoint and may carry holes."""
    if not b.parts:
        return MultiPolygon((a,))
    try:
        result = a.to_shapely().difference(b.to_shapely())
    except shapely.errors.GEOSException as exc:  # pragma: no cover - inputs prevalidated
        raise GeometryError(f"difference failed: {exc}") from exc
    return MultiPolygon.from_shapely(result)


def polygon_intersection(a: Polygon, b: MultiPolygon) -> MultiPolygon:
    """Common area of a and b as a disjoint part collection."""
    if not b.parts:
        return MultiPolygon(())
    try:
        result = a.to_shapely().intersection(b.to_shapely())
    except shapely.errors.GEOSException as exc:  # pragma: no cover - inputs prevalidated
        raise GeometryError(f"intersection failed: {exc}") from exc
    return MultiPolygon.from_shapely(result)


def polygons_intersect(a: Polygon, b: Polygon) -> bool:
    return bool(a.to_shapely().intersects(b.to_shapely()))


def union_polygons(polygons: Iterable[Polygon]) -> MultiPolygon:
    """Union possibly overlapping polygons into a disjoint collection."""
    shapes = [p.to_shapely() for p in polygons]
    if not shapes:
        return MultiPolygon(())
    return MultiPolygon.from_shapely(shapely.union_all(shapes))


def densify_ring(ring: Sequence[Point2], interval: float) -> list[Point2]:
    """One traversal of a ring with extra vertices so edge gaps stay <= interval.

    Original vertices are always retained; the closing vertex is not
    repeated at the end.
    """
    if interval <= 0:
        raise GeometryError("densify interval must be positive")
    out: list[Point2] = []
    n = len(ring)
    for i in range(n):
        a = ring[i]
        b = ring[(i + 1) % n]
        out.append(a)
        pieces = math.ceil(a.distance_to(b) / interval)
        for k in range(1, pieces):
            t = k / pieces
            out.append(Point2(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t))
    return out


def densify_boundary(polygon: Polygon, interval: float) -> list[Point2]:
    """All rings of the polygon densified at the given interval."""
    out: list[Point2] = []
    for ring in polygon.rings():
        out.extend(densify_ring(ring, interval))
    return out


@dataclass(frozen=True)
class VoronoiEdge:
    """One edge of a Voronoi diagram.

    start_index/end_index are diagram vertex ids usable for topology
    building; an end_index of -1 marks a ray that was clipped to a
    finite endpoint well outside the site bounding box.
    """

    start: Point2
    end: Point2
    start_index: int
    end_index: int
    site_a: int
    site_b: int
    clipped: bool = False


def voronoi(sites: Sequence[Point2]) -> list[VoronoiEdge]:
    """Voronoi diagram edges for a set of generating sites.

    Every point of every edge is equidistant to the edge's two sites
    and no other site is closer. Unbounded ridges are clipped far
    outside the site bounding box so the diagram is representable;
    clipped edges are flagged.
    """
    if len(sites) < 3:
        raise GeometryError("voronoi needs at least three sites")
    coords = np.array([[p.x, p.y] for p in sites], dtype=float)
    try:
        vor = _Voronoi(coords)
    except QhullError as exc:
        raise GeometryError(f"degenerate site configuration: {exc}") from exc

    span = coords.max(axis=0) - coords.min(axis=0)
    reach = 2.0 * math.hypot(span[0], span[1]) + 1.0
    center = coords.mean(axis=0)

    edges: list[VoronoiEdge] = []
    for (pa, pb), (va, vb) in zip(vor.ridge_points, vor.ridge_vertices):
        pa, pb, va, vb = int(pa), int(pb), int(va), int(vb)
        if va >= 0 and vb >= 0:
            a = vor.vertices[va]
            b = vor.vertices[vb]
            edges.append(
                VoronoiEdge(Point2(a[0], a[1]), Point2(b[0], b[1]), va, vb, pa, pb)
            )
            continue
        # One endpoint at infinity: walk along the perpendicular
        # bisector away from the site cloud and cut the ray there.
        known = vb if va < 0 else va
        tangent = coords[pb] - coords[pa]
        norm = np.hypot(tangent[0], tangent[1])
        if norm == 0:
            continue
        tangent /= norm
        normal = np.array([-tangent[1], tangent[0]])
        midpoint = (coords[pa] + coords[pb]) / 2.0
        if np.dot(midpoint - center, normal) < 0:
            normal = -normal
        origin = vor.vertices[known]
        far = origin + normal * reach
        edges.append(
            VoronoiEdge(
                Point2(origin[0], origin[1]),
                Point2(far[0], far[1]),
                known,
                -1,
                pa,
                pb,
                clipped=True,
            )
        )
    return edges


def simplify_polyline(line: Polyline, tolerance: float) -> Polyline:
    """Douglas-Peucker simplification keeping both endpoints.

    A tolerance of zero returns the input unchanged.
    """
    if tolerance < 0:
        raise GeometryError("simplify tolerance must be nonnegative")
    if tolerance == 0 or len(line.vertices) <= 2:
        return line
    verts = line.vertices
    keep = [False] * len(verts)
    keep[0] = keep[-1] = True
    stack = [(0, len(verts) - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        worst = -1.0
        worst_i = -1
        for i in range(lo + 1, hi):
            d = _point_segment_distance(verts[i], verts[lo], verts[hi])
            if d > worst:
                worst = d
                worst_i = i
        if worst > tolerance:
            keep[worst_i] = True
            stack.append((lo, worst_i))
            stack.append((worst_i, hi))
    kept = [v for v, k in zip(verts, keep) if k]
    return Polyline(tuple(kept))


def _point_segment_distance(p: Point2, a: Point2, b: Point2) -> float:
    ax, ay = b.x - a.x, b.y - a.y
    px, py = p.x - a.x, p.y - a.y
    seg_sq = ax * ax + ay * ay
    if seg_sq == 0:
        return math.hypot(px, py)
    t = max(0.0, min(1.0, (px * ax + py * ay) / seg_sq))
    return math.hypot(px - t * ax, py - t * ay)


def buffer_polyline(line: Polyline, radius: float) -> Polygon:
    """Round-capped buffer of a polyline, as a single polygon."""
    if radius <= 0:
        raise GeometryError("buffer radius must be positive")
    shape = line.to_shapely().buffer(radius)
    return Polygon.from_shapely(shape)
