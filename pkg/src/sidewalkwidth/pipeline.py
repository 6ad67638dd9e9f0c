"""End-to-end orchestration: extract obstacles, compute widths, aggregate.

The unit of work is one sidewalk polygon; stages communicate only
through their output files, so width computation never touches the raw
point clouds. All per-sidewalk results are merged in stable id order,
which keeps every output byte-identical across runs and worker counts.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import centerline as cl
from . import changedet, ground, obstacles, widthmap
from .config import PipelineConfig
from .errors import ValidationError
from .geom import (
    MultiPolygon,
    Polygon,
    Polyline,
    polygon_difference,
    polygons_intersect,
    union_polygons,
)
from .io import (
    Feature,
    FeatureCollection,
    PointCloud,
    read_elevation_grid,
    read_features,
    read_point_cloud,
    write_features,
)

logger = logging.getLogger(__name__)

OBSTACLES_FILE = "obstacles.geojson"
SEGMENTS_FULL_FILE = "segments_full.geojson"
SEGMENTS_FREE_FILE = "segments_free.geojson"
RECORDS_FILE = "major_records.geojson"
STATS_JSON_FILE = "stats.json"
STATS_TEXT_FILE = "stats.txt"

COVERAGE_SOURCE = "coverage"


@dataclass(frozen=True)
class Sidewalk:
    id: str
    polygon: Polygon


def load_sidewalks(path: str | Path) -> list[Sidewalk]:
    """Sidewalk polygons sorted by id; ids come from the id property."""
    collection = read_features(path)
    walks = []
    for i, feature in enumerate(collection.features):
        geom = feature.geometry
        if not isinstance(geom, Polygon):
            raise ValidationError(f"sidewalk feature {i}: expected a polygon")
        sid = feature.properties.get("id")
        sid = str(sid) if sid is not None else f"sw{i:03d}"
        walks.append(Sidewalk(sid, geom))
    walks.sort(key=lambda w: w.id)
    ids = [w.id for w in walks]
    if len(set(ids)) != len(ids):
        raise ValidationError("sidewalk ids are not unique")
    return walks


def _read_registry(path: str | None) -> FeatureCollection:
    if path is None:
        return FeatureCollection()
    return read_features(path)


def _map_sidewalks(func, walks, workers: int):
    if workers > 1 and len(walks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, walks))
    return [func(w) for w in walks]


def extract_obstacles(config: PipelineConfig) -> FeatureCollection:
    """Detect static obstacles per sidewalk and merge registry footprints.

    Writes obstacles.geojson: one polygon feature per footprint with a
    source property, plus one point feature per sidewalk recording
    whether the scans covered it at all.
    """
    config.require_inputs("sidewalks", "elevation")
    if config.paths.cloud_epoch_a is None or config.paths.cloud_epoch_b is None:
        raise ValidationError("change detection requires two epochs")
    config.require_inputs("cloud_epoch_a", "cloud_epoch_b")

    walks = load_sidewalks(config.paths.sidewalks)
    cloud_a = read_point_cloud(config.paths.cloud_epoch_a)
    cloud_b = read_point_cloud(config.paths.cloud_epoch_b)
    grid = read_elevation_grid(config.paths.elevation)
    trees = _read_registry(config.paths.trees)
    containers = _read_registry(config.paths.containers)
    terraces = _read_registry(config.paths.terraces)
    logger.info(
        "extracting obstacles: %d sidewalks, %d + %d cloud points",
        len(walks),
        len(cloud_a),
        len(cloud_b),
    )

    def process(walk: Sidewalk):
        clip_a = ground.clip_to_polygon(cloud_a, walk.polygon)
        clip_b = ground.clip_to_polygon(cloud_b, walk.polygon)
        covered = len(clip_a) > 0 and len(clip_b) > 0
        band_a = ground.extract_band(clip_a, grid, config.band)
        band_b = ground.extract_band(clip_b, grid, config.band)
        static = PointCloud(np.empty((0, 3)), clip_a.epoch_label)
        if len(band_a.obstacle) > 0 and len(band_b.obstacle) > 0:
            static = changedet.filter_static(
                band_a.obstacle, band_b.obstacle, config.m3c2
            )
        detected = obstacles.build_obstacle_set(
            static.points,
            FeatureCollection(),
            FeatureCollection(),
            FeatureCollection(),
            config.cluster,
        )
        logger.info(
            "sidewalk %s: clip %d/%d, band %d/%d, static %d, footprints %d",
            walk.id,
            len(clip_a),
            len(clip_b),
            len(band_a.obstacle),
            len(band_b.obstacle),
            len(static),
            len(detected),
        )
        return walk, covered, detected

    results = _map_sidewalks(process, walks, config.workers)

    features = []
    for walk, covered, detected in results:
        for fp in detected:
            features.append(
                Feature(
                    fp.footprint,
                    {"source": fp.source.value, "sidewalk_id": walk.id},
                )
            )
        features.append(
            Feature(
                walk.polygon.representative_point(),
                {
                    "source": COVERAGE_SOURCE,
                    "sidewalk_id": walk.id,
                    "covered": covered,
                },
            )
        )
    for fp in obstacles.registry_footprints(trees, containers, terraces):
        features.append(Feature(fp.footprint, {"source": fp.source.value}))

    collection = FeatureCollection(features)
    out_dir = Path(config.paths.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_features(collection, out_dir / OBSTACLES_FILE)
    logger.info("wrote %d obstacle features", len(collection))
    return collection


def _load_obstacle_file(
    path: Path,
) -> tuple[list[Polygon], dict[str, bool]]:
    collection = read_features(path)
    footprints: list[Polygon] = []
    coverage: dict[str, bool] = {}
    sources = {s.value for s in obstacles.ObstacleSource}
    for i, feature in enumerate(collection.features):
        source = feature.properties.get("source")
        if source == COVERAGE_SOURCE:
            sid = feature.properties.get("sidewalk_id")
            if sid is not None:
                coverage[str(sid)] = bool(feature.properties.get("covered"))
            continue
        if source not in sources:
            raise ValidationError(f"obstacle feature {i}: unknown source {source!r}")
        geom = feature.geometry
        if isinstance(geom, Polygon):
            footprints.append(geom)
        elif isinstance(geom, MultiPolygon):
            footprints.extend(geom.parts)
        else:
            raise ValidationError(f"obstacle feature {i}: expected a polygon")
    return footprints, coverage


@dataclass
class SidewalkWidths:
    sidewalk: Sidewalk
    major: list[cl.PathSegment]
    detailed: list[cl.PathSegment]
    records: list[widthmap.MajorPathRecord]


def compute_widths(
    config: PipelineConfig,
) -> tuple[FeatureCollection, FeatureCollection, FeatureCollection]:
    """Width segments and records for every sidewalk.

    Consumes the obstacle file (never the raw clouds): major segments
    come from the full polygon, detailed segments from the polygon with
    intersecting obstacle footprints subtracted. A sidewalk without
    scan coverage keeps its major segments but every free category is
    unknown.
    """
    config.require_inputs("sidewalks")
    obstacle_path = Path(config.paths.output_dir) / OBSTACLES_FILE
    if not obstacle_path.exists():
        raise ValidationError(f"obstacle file not found: {obstacle_path}")
    walks = load_sidewalks(config.paths.sidewalks)
    footprints, coverage = _load_obstacle_file(obstacle_path)
    logger.info(
        "computing widths: %d sidewalks, %d obstacle footprints",
        len(walks),
        len(footprints),
    )

    def process(walk: Sidewalk) -> SidewalkWidths:
        major_paths = cl.prune(
            cl.skeletonize(walk.polygon, config.centerline), config.centerline
        )
        major = cl.segmentize(
            major_paths, walk.polygon, config.centerline, id_prefix=f"{walk.id}:full"
        )
        if not major:
            logger.warning("degenerate sidewalk skipped: %s", walk.id)
            return SidewalkWidths(walk, [], [], [])
        hitting = [fp for fp in footprints if polygons_intersect(fp, walk.polygon)]
        free_area = (
            walk.polygon
            if not hitting
            else _subtract(walk.polygon, hitting)
        )
        detailed_paths = cl.prune(
            cl.skeletonize(free_area, config.centerline), config.centerline
        )
        detailed = cl.segmentize(
            detailed_paths, free_area, config.centerline, id_prefix=f"{walk.id}:free"
        )
        graph = widthmap.build_graph(detailed, config.routing)
        if coverage.get(walk.id, True):
            records = widthmap.map_to_major(
                major, graph, walk.polygon, config.routing
            )
        else:
            records = [
                widthmap.MajorPathRecord(
                    id=seg.id,
                    geometry=seg.geometry,
                    full_width_m=seg.min_width,
                    full_category=widthmap.categorize(seg.min_width),
                    free_category=widthmap.WidthCategory.UNKNOWN,
                )
                for seg in major
            ]
        logger.info(
            "sidewalk %s: %d major, %d detailed segments, %d obstacles applied",
            walk.id,
            len(major),
            len(detailed),
            len(hitting),
        )
        return SidewalkWidths(walk, major, detailed, records)

    results = _map_sidewalks(process, walks, config.workers)

    full_fc = FeatureCollection(
        [_segment_feature(seg) for r in results for seg in r.major]
    )
    free_fc = FeatureCollection(
        [_segment_feature(seg) for r in results for seg in r.detailed]
    )
    records_fc = FeatureCollection(
        [_record_feature(rec) for r in results for rec in r.records]
    )
    out_dir = Path(config.paths.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_features(full_fc, out_dir / SEGMENTS_FULL_FILE)
    write_features(free_fc, out_dir / SEGMENTS_FREE_FILE)
    write_features(records_fc, out_dir / RECORDS_FILE)
    logger.info(
        "wrote %d major segments, %d detailed segments, %d records",
        len(full_fc),
        len(free_fc),
        len(records_fc),
    )
    return full_fc, free_fc, records_fc


def _subtract(polygon: Polygon, hitting: list[Polygon]) -> MultiPolygon:
    return polygon_difference(polygon, union_polygons(hitting))


def _segment_feature(seg: cl.PathSegment) -> Feature:
    return Feature(seg.geometry, {"id": seg.id, "min_width_m": seg.min_width})


def _record_feature(rec: widthmap.MajorPathRecord) -> Feature:
    return Feature(
        rec.geometry,
        {
            "id": rec.id,
            "full_width_m": rec.full_width_m,
            "full_category": rec.full_category.label,
            "free_category": rec.free_category.label,
            "route_node_ids": ",".join(str(n) for n in rec.route_node_ids),
        },
    )


def records_from_features(collection: FeatureCollection) -> list[widthmap.MajorPathRecord]:
    records = []
    for i, feature in enumerate(collection.features):
        geom = feature.geometry
        if not isinstance(geom, Polyline):
            raise ValidationError(f"record feature {i}: expected a polyline")
        props = feature.properties
        try:
            full = widthmap.WidthCategory.from_label(str(props["full_category"]))
            free = widthmap.WidthCategory.from_label(str(props["free_category"]))
        except KeyError as exc:
            raise ValidationError(f"record feature {i}: missing {exc}") from exc
        route = tuple(
            int(n) for n in str(props.get("route_node_ids", "")).split(",") if n
        )
        records.append(
            widthmap.MajorPathRecord(
                id=str(props.get("id", f"rec{i:03d}")),
                geometry=geom,
                full_width_m=float(props.get("full_width_m", 0.0)),
                full_category=full,
                free_category=free,
                route_node_ids=route,
            )
        )
    return records


def compute_stats(records_path: str | Path, out_dir: str | Path) -> widthmap.WidthStats:
    """Aggregate a records file into stats.txt and stats.json."""
    collection = read_features(records_path)
    records = records_from_features(collection)
    stats = widthmap.compare_stats(records)
    _write_stats(stats, Path(out_dir))
    return stats


def _write_stats(stats: widthmap.WidthStats, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / STATS_JSON_FILE).write_text(
        json.dumps(stats.to_json_dict(), sort_keys=True, indent=2) + "\n"
    )
    (out_dir / STATS_TEXT_FILE).write_text(stats.to_text())


def run(config: PipelineConfig) -> dict[str, Path]:
    """Full pipeline: obstacles, widths, stats.

    An empty sidewalk collection still succeeds and writes empty
    artifacts (stats record zero segments).
    """
    out_dir = Path(config.paths.output_dir)
    extract_obstacles(config)
    _, _, records_fc = compute_widths(config)
    if records_fc.features:
        compute_stats(out_dir / RECORDS_FILE, out_dir)
    else:
        logger.warning("no records produced; writing empty stats")
        (out_dir / STATS_JSON_FILE).write_text(
            json.dumps({"record_count": 0}, sort_keys=True, indent=2) + "\n"
        )
        (out_dir / STATS_TEXT_FILE).write_text("records: 0\n")
    return {
        "obstacles": out_dir / OBSTACLES_FILE,
        "segments_full": out_dir / SEGMENTS_FULL_FILE,
        "segments_free": out_dir / SEGMENTS_FREE_FILE,
        "records": out_dir / RECORDS_FILE,
        "stats_json": out_dir / STATS_JSON_FILE,
        "stats_text": out_dir / STATS_TEXT_FILE,
    }
