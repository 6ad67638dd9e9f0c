"""Shared fixtures: polygons, synthetic point-cloud scenes, pipeline configs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from sidewalkwidth.config import PipelineConfig
from sidewalkwidth.geom import Point2, Polygon
from sidewalkwidth.io import (
    ElevationGrid,
    Feature,
    FeatureCollection,
    PointCloud,
    write_elevation_grid,
    write_features,
    write_point_cloud,
)


def rect(x0: float, y0: float, x1: float, y1: float) -> Polygon:
    return Polygon((Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)))


def taper_polygon() -> Polygon:
    """30 m corridor, half-width 2.0 pinched linearly to 0.5 at x = 15."""
    bottom = [(0, -2), (10, -2), (15, -0.5), (20, -2), (30, -2)]
    top = [(30, 2), (20, 2), (15, 0.5), (10, 2), (0, 2)]
    return Polygon(tuple(Point2(x, y) for x, y in bottom + top))


def plane_points(
    x0: float,
    x1: float,
    y0: float,
    y1: float,
    spacing: float,
    z: float = 0.0,
    noise: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    xs = np.arange(x0, x1 + spacing / 2, spacing)
    ys = np.arange(y0, y1 + spacing / 2, spacing)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(z))])
    if noise > 0:
        rng = np.random.RandomState(seed)
        pts[:, 2] += rng.uniform(-noise, noise, len(pts))
    return pts


def box_points(
    cx: float,
    cy: float,
    half: float,
    height: float,
    spacing: float,
    z_floor: float = 0.15,
) -> np.ndarray:
    """Scanned box: four walls (from z_floor up) plus the top face."""
    line = np.arange(-half, half + spacing / 2, spacing)
    levels = np.arange(z_floor, height + spacing / 2, spacing)
    pts = []
    for offset in line:
        for z in levels:
            pts.append([cx + offset, cy - half, z])
            pts.append([cx + offset, cy + half, z])
            pts.append([cx - half, cy + offset, z])
            pts.append([cx + half, cy + offset, z])
    gx, gy = np.meshgrid(cx + line, cy + line)
    top = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(height))])
    return np.vstack([np.array(pts), top])


def flat_grid(x0: float, y0: float, x1: float, y1: float, cell: float = 0.5) -> ElevationGrid:
    ncols = int(np.ceil((x1 - x0) / cell))
    nrows = int(np.ceil((y1 - y0) / cell))
    return ElevationGrid(Point2(x0, y0), cell, np.zeros((nrows, ncols)))


def polygon_feature(poly: Polygon, **props) -> Feature:
    return Feature(poly, dict(props))


def write_scene(
    tmp_path: Path,
    sidewalks: list[tuple[str, Polygon]],
    points_a: np.ndarray,
    points_b: np.ndarray,
    grid: ElevationGrid,
    trees: FeatureCollection | None = None,
    containers: FeatureCollection | None = None,
    terraces: FeatureCollection | None = None,
    config_extra: dict | None = None,
) -> PipelineConfig:
    """Write a complete input scene and return its pipeline config."""
    walks = FeatureCollection(
        [polygon_feature(poly, id=sid) for sid, poly in sidewalks]
    )
    write_features(walks, tmp_path / "sidewalks.geojson")
    write_point_cloud(PointCloud(points_a, "a"), tmp_path / "epoch_a.swpc")
    write_point_cloud(PointCloud(points_b, "b"), tmp_path / "epoch_b.swpc")
    write_elevation_grid(grid, tmp_path / "elevation.asc")
    paths = {
        "sidewalks": str(tmp_path / "sidewalks.geojson"),
        "cloud_epoch_a": str(tmp_path / "epoch_a.swpc"),
        "cloud_epoch_b": str(tmp_path / "epoch_b.swpc"),
        "elevation": str(tmp_path / "elevation.asc"),
        "output_dir": str(tmp_path / "out"),
    }
    for name, collection in (
        ("trees", trees),
        ("containers", containers),
        ("terraces", terraces),
    ):
        if collection is not None:
            target = tmp_path / f"{name}.geojson"
            write_features(collection, target)
            paths[name] = str(target)
    data = {"paths": paths}
    if config_extra:
        data.update(config_extra)
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(data, indent=2))
    return PipelineConfig.from_file(config_path)


def corridor_scene(tmp_path: Path, with_box: bool) -> PipelineConfig:
    """30 x 4 m corridor, optionally with a 2 x 2 m box mid-corridor.

    The box leaves a 1.0 m passage on either side of it.
    """
    walk = rect(0, 0, 30, 4)
    ground = plane_points(0, 30, 0, 4, spacing=0.15)
    parts = [ground]
    if with_box:
        parts.append(box_points(15, 2, half=1.0, height=1.0, spacing=0.08))
    cloud = np.vstack(parts)
    grid = flat_grid(-2, -2, 32, 6)
    return write_scene(
        tmp_path,
        [("walk", walk)],
        cloud,
        cloud.copy(),
        grid,
        config_extra={"centerline": {"deadend_min_length": 3.0}},
    )


CITY_SIDEWALKS = [
    ("sw000", (0.0, 0.0, 24.0, 3.0)),
    ("sw001", (0.0, 6.0, 24.0, 9.0)),
    ("sw002", (0.0, 12.0, 24.0, 15.0)),
    ("sw003", (30.0, 0.0, 54.0, 3.0)),
    ("sw004", (30.0, 6.0, 54.0, 9.0)),
    ("sw005", (30.0, 12.0, 54.0, 15.0)),
]

# (cx, cy) of boxes present in both epochs: nine detected obstacles.
CITY_STATIC_BOXES = [
    (6.0, 1.5),
    (16.0, 1.2),
    (8.0, 7.5),
    (18.0, 7.8),
    (6.0, 13.5),
    (36.0, 1.5),
    (46.0, 1.8),
    (36.0, 7.5),
    (40.0, 13.5),
]

# Present only in epoch A; change detection must drop them.
CITY_TRANSIENT_BOXES = [(20.0, 1.5), (50.0, 1.5)]


def city_block_scene(tmp_path: Path, workers: int = 1) -> PipelineConfig:
    """Six sidewalks, nine detected boxes, three registry obstacles."""
    sidewalks = [(sid, rect(*bounds)) for sid, bounds in CITY_SIDEWALKS]
    ground = [
        plane_points(x0, x1, y0, y1, spacing=0.2)
        for _, (x0, y0, x1, y1) in CITY_SIDEWALKS
    ]
    static = [
        box_points(cx, cy, half=0.4, height=1.0, spacing=0.1)
        for cx, cy in CITY_STATIC_BOXES
    ]
    transient = [
        box_points(cx, cy, half=0.4, height=1.0, spacing=0.1)
        for cx, cy in CITY_TRANSIENT_BOXES
    ]
    points_a = np.vstack(ground + static + transient)
    points_b = np.vstack(ground + static)
    grid = flat_grid(-2, -2, 56, 17)
    trees = FeatureCollection(
        [Feature(Point2(46.0, 7.5), {"crown_radius_m": 0.8})]
    )
    containers = FeatureCollection(
        [Feature(Point2(46.0, 13.5), {"base_radius_m": 0.6})]
    )
    terraces = FeatureCollection([Feature(rect(18.0, 12.3, 20.0, 14.0), {})])
    return write_scene(
        tmp_path,
        sidewalks,
        points_a,
        points_b,
        grid,
        trees=trees,
        containers=containers,
        terraces=terraces,
        config_extra={"workers": workers},
    )


@pytest.fixture
def unit_square() -> Polygon:
    return rect(0, 0, 1, 1)


@pytest.fixture
def holed_polygon() -> Polygon:
    """10 x 10 square with a 4 x 4 hole from (3, 3) to (7, 7)."""
    return Polygon(
        (Point2(0, 0), Point2(10, 0), Point2(10, 10), Point2(0, 10)),
        ((Point2(3, 3), Point2(7, 3), Point2(7, 7), Point2(3, 7)),),
    )
