"""Split point clouds into ground, obstacle band and unknown layers.

Heights are measured against the elevation raster: a point within
ground_tolerance of the local surface is ground, one between the
tolerance and max_height above it belongs to the obstacle band, and
anything higher (or implausibly far below the surface) is discarded.
Points without a usable elevation stay unknown.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import shapely

from .errors import ValidationError
from .geom import Polygon
from .io import ElevationGrid, PointCloud

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandParams:
    """Vertical band limits in meters above the ground surface."""

    ground_tolerance: float = 0.05
    max_height: float = 2.0

    def __post_init__(self) -> None:
        if not 0 < self.ground_tolerance < self.max_height:
            raise ValidationError(
                "band requires 0 < ground_tolerance < max_height, got "
                f"{self.ground_tolerance} and {self.max_height}"
            )


class BandResult(NamedTuple):
    obstacle: PointCloud
    ground: PointCloud
    unknown: PointCloud


def clip_to_polygon(cloud: PointCloud, polygon: Polygon) -> PointCloud:
    """Points whose x, y falls inside the polygon, boundary included."""
    if len(cloud) == 0:
        return cloud
    mask = shapely.intersects_xy(
        polygon.to_shapely(), cloud.points[:, 0], cloud.points[:, 1]
    )
    return cloud.subset(mask)


def extract_band(
    cloud: PointCloud, grid: ElevationGrid, params: BandParams
) -> BandResult:
    """Partition a cloud by height above the elevation surface.

    Every input point lands in exactly one of: obstacle band, ground,
    unknown, or the implicit discard pile (too high, or below the
    surface by more than the tolerance).
    """
    surface = grid.elevation_at_many(cloud.xy)
    height = cloud.z - surface

    unknown = np.isnan(surface)
    ground = ~unknown & (height >= -params.ground_tolerance) & (
        height <= params.ground_tolerance
    )
    obstacle = ~unknown & (height > params.ground_tolerance) & (
        height <= params.max_height
    )
    kept = int(unknown.sum() + ground.sum() + obstacle.sum())
    if kept < len(cloud):
        logger.debug(
            "band extraction discarded %d of %d points", len(cloud) - kept, len(cloud)
        )
    return BandResult(
        obstacle=cloud.subset(obstacle),
        ground=cloud.subset(ground),
        unknown=cloud.subset(unknown),
    )
