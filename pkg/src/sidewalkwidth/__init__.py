"""Obstacle-aware sidewalk width estimation from street-level point clouds.

The package turns two survey epochs of point clouds plus sidewalk
polygons into width categories: static obstacles are detected by
cylinder-based change detection, their footprints subtracted from the
sidewalks, and width-penalized routes over the remaining area label
every major path segment with the narrowest width a pedestrian cannot
avoid.
"""

from .centerline import CenterlineParams, PathSegment, prune, segmentize, skeletonize
from .changedet import (
    ChangeStatus,
    CorePointResult,
    M3C2Params,
    estimate_normal,
    filter_static,
    m3c2_distance,
    select_core_points,
)
from .config import PipelineConfig
from .errors import (
    ConfigError,
    GeometryError,
    ParseError,
    SidewalkWidthError,
    ValidationError,
)
from .geom import (
    MultiPolygon,
    Point2,
    Polygon,
    Polyline,
    densify_boundary,
    distance_to_boundary,
    point_in_polygon,
    polygon_difference,
    simplify_polyline,
    voronoi,
)
from .ground import BandParams, clip_to_polygon, extract_band
from .io import (
    ElevationGrid,
    Feature,
    FeatureCollection,
    PointCloud,
    read_elevation_grid,
    read_features,
    read_point_cloud,
    write_features,
    write_point_cloud,
)
from .obstacles import (
    ClusterParams,
    ObstacleFootprint,
    ObstacleSource,
    build_obstacle_set,
    cluster_points,
    footprint_of_cluster,
    registry_footprints,
)
from .widthmap import (
    MajorPathRecord,
    RouteParams,
    WidthCategory,
    WidthGraph,
    WidthStats,
    build_graph,
    categorize,
    compare_stats,
    map_to_major,
    penalty,
    shortest_route,
)

__version__ = "0.1.0"
