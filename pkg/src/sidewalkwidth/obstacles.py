"""Turn static obstacle points into footprint polygons and merge registries.

Detected obstacles come from planar proximity clustering followed by a
concave hull per cluster. Registry obstacles (trees, waste containers,
terraces) arrive as vector features: point records become regular
16-gons with the recorded radius, terrace polygons are taken verbatim.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import shapely
import shapely.geometry as sgeom
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import ValidationError
from .geom import Point2, Polygon
from .io import FeatureCollection

logger = logging.getLogger(__name__)

# Half-width for degenerate (collinear) clusters, m.
_LINE_FALLBACK_HALFWIDTH = 0.05
_CIRCLE_SIDES = 16


class ObstacleSource(Enum):
    DETECTED = "detected"
    TREE = "tree"
    CONTAINER = "container"
    TERRACE = "terrace"


@dataclass(frozen=True)
class ObstacleFootprint:
    footprint: Polygon
    source: ObstacleSource


@dataclass(frozen=True)
class ClusterParams:
    """Planar clustering and hull settings.

    eps is the neighbor distance that connects two points, min_points
    the smallest cluster worth keeping, hull_alpha the concavity scale
    of the footprint hull, and min_footprint_area drops slivers.
    """

    eps: float = 0.3
    min_points: int = 10
    hull_alpha: float = 0.5
    min_footprint_area: float = 0.01

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValidationError("eps must be positive")
        if self.min_points < 3:
            raise ValidationError("min_points must be at least 3")
        if self.hull_alpha <= 0:
            raise ValidationError("hull_alpha must be positive")
        if self.min_footprint_area <= 0:
            raise ValidationError("min_footprint_area must be positive")


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def cluster_points(points: np.ndarray, params: ClusterParams) -> list[np.ndarray]:
    """Connected components of the planar eps-neighbor graph.

    Two points connect when their x, y distance is at most eps; only
    components with at least min_points members are returned, ordered
    by centroid (x, then y).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"cluster input must be (N, 3), got {pts.shape}")
    if len(pts) == 0:
        return []
    tree = cKDTree(pts[:, :2])
    uf = _UnionFind(len(pts))
    for i, j in tree.query_pairs(params.eps):
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for i in range(len(pts)):
        groups.setdefault(uf.find(i), []).append(i)
    clusters = [pts[idx] for idx in groups.values() if len(idx) >= params.min_points]
    clusters.sort(key=lambda c: (c[:, 0].mean(), c[:, 1].mean()))
    logger.debug("clustered %d points into %d clusters", len(pts), len(clusters))
    return clusters


def _collinear_footprint(xy: np.ndarray) -> Polygon:
    """Thin buffered-line footprint for clusters without planar extent."""
    order = np.lexsort((xy[:, 1], xy[:, 0]))
    first = xy[order[0]]
    last = xy[order[-1]]
    if np.allclose(first, last):
        shape = sgeom.Point(first).buffer(_LINE_FALLBACK_HALFWIDTH)
    else:
        shape = sgeom.LineString([first, last]).buffer(_LINE_FALLBACK_HALFWIDTH)
    return Polygon.from_shapely(shape)


def _alpha_union(xy: np.ndarray, alpha: float):
    """Union of Delaunay triangles with circumradius at most alpha."""
    tri = Delaunay(xy)
    keep = []
    for simplex in tri.simplices:
        a, b, c = xy[simplex]
        la = np.linalg.norm(b - c)
        lb = np.linalg.norm(a - c)
        lc = np.linalg.norm(a - b)
        area2 = abs(
            (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        )
        if area2 <= 0:
            continue
        circumradius = la * lb * lc / (2.0 * area2)
        if circumradius <= alpha:
            keep.append(sgeom.Polygon(xy[simplex]))
    if not keep:
        return None
    return shapely.union_all(keep)


def footprint_of_cluster(cluster: np.ndarray, hull_alpha: float) -> Polygon:
    """Concave hull of a cluster's planar projection.

    The hull must be a single polygon containing every cluster point;
    when the concavity scale is too tight for that, it is doubled a few
    times and the convex hull is the final fallback. Collinear clusters
    degrade to a thin buffered line.
    """
    pts = np.asarray(cluster, dtype=float)
    if len(pts) < 3:
        raise ValidationError("footprint needs at least three points")
    if hull_alpha <= 0:
        raise ValidationError("hull_alpha must be positive")
    xy = pts[:, :2]
    try:
        hull = _try_alpha_hull(xy, hull_alpha)
    except QhullError:
        return _collinear_footprint(xy)
    if hull is None:
        return _collinear_footprint(xy)
    return hull


def _try_alpha_hull(xy: np.ndarray, alpha: float) -> Polygon | None:
    for _ in range(6):
        union = _alpha_union(xy, alpha)
        if union is not None and union.geom_type == "Polygon" and union.area > 0:
            if bool(np.all(shapely.intersects_xy(union, xy[:, 0], xy[:, 1]))):
                return Polygon.from_shapely(union)
        alpha *= 2.0
    convex = sgeom.MultiPoint(xy).convex_hull
    if convex.geom_type != "Polygon" or convex.area <= 0:
        return None
    return Polygon.from_shapely(convex)


def _regular_polygon(center: Point2, radius: float) -> Polygon:
    verts = []
    for k in range(_CIRCLE_SIDES):
        angle = 2.0 * math.pi * k / _CIRCLE_SIDES
        verts.append(
            Point2(center.x + radius * math.cos(angle), center.y + radius * math.sin(angle))
        )
    return Polygon(tuple(verts))


def _circle_footprints(
    collection: FeatureCollection,
    radius_key: str,
    source: ObstacleSource,
    label: str,
) -> list[ObstacleFootprint]:
    out = []
    for i, feature in enumerate(collection.features):
        if not isinstance(feature.geometry, Point2):
            raise ValidationError(f"{label} feature {i}: expected a point geometry")
        radius = feature.properties.get(radius_key)
        if radius is None:
            raise ValidationError(f"{label} feature {i}: missing {radius_key}")
        if not isinstance(radius, (int, float)) or radius <= 0:
            raise ValidationError(
                f"{label} feature {i}: {radius_key} must be a positive number"
            )
        out.append(
            ObstacleFootprint(
                _regular_polygon(feature.geometry, float(radius)), source
            )
        )
    return out


def registry_footprints(
    trees: FeatureCollection,
    containers: FeatureCollection,
    terraces: FeatureCollection,
) -> list[ObstacleFootprint]:
    """Footprints from the three municipal registries.

    Trees and containers are point records with crown_radius_m and
    base_radius_m; each becomes a regular 16-gon. Terrace polygons are
    used as-is.
    """
    out = _circle_footprints(trees, "crown_radius_m", ObstacleSource.TREE, "tree")
    out.extend(
        _circle_footprints(containers, "base_radius_m", ObstacleSource.CONTAINER, "container")
    )
    for i, feature in enumerate(terraces.features):
        geom = feature.geometry
        if isinstance(geom, Polygon):
            out.append(ObstacleFootprint(geom, ObstacleSource.TERRACE))
        elif hasattr(geom, "parts"):
            for part in geom.parts:
                out.append(ObstacleFootprint(part, ObstacleSource.TERRACE))
        else:
            raise ValidationError(f"terrace feature {i}: expected a polygon geometry")
    return out


def build_obstacle_set(
    static_points: np.ndarray,
    trees: FeatureCollection,
    containers: FeatureCollection,
    terraces: FeatureCollection,
    params: ClusterParams,
) -> list[ObstacleFootprint]:
    """Detected footprints from static points followed by registry ones.

    Detected footprints below min_footprint_area are dropped.
    Overlapping footprints are all kept; merging happens later, at
    subtraction time.
    """
    detected = []
    for cluster in cluster_points(static_points, params):
        footprint = footprint_of_cluster(cluster, params.hull_alpha)
        if footprint.area < params.min_footprint_area:
            continue
        detected.append(ObstacleFootprint(footprint, ObstacleSource.DETECTED))
    registry = registry_footprints(trees, containers, terraces)
    logger.debug(
        "obstacle set: %d detected + %d registry footprints",
        len(detected),
        len(registry),
    )
    return detected + registry
