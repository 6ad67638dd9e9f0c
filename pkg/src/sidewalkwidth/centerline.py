"""Centerlines of sidewalk polygons via Voronoi skeletons.

The boundary of each polygon is densified and fed to a Voronoi
builder; diagram edges that stay strictly inside the polygon and
separate different boundary stretches approximate the medial axis.
Short dead-end branches are pruned, the survivors simplified, and the
result cut into segments no longer than a configured maximum, each
annotated with twice the smallest sampled clearance to the boundary.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import shapely

from .errors import ValidationError
from .geom import (
    MultiPolygon,
    Point2,
    Polygon,
    Polyline,
    densify_ring,
    distance_to_boundary,
    point_in_polygon,
    simplify_polyline,
    voronoi,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CenterlineParams:
    """Skeleton extraction and segmentation settings, all meters."""

    densify_interval: float = 0.3
    simplify_tolerance: float = 0.2
    deadend_min_length: float = 1.5
    max_segment_length: float = 10.0

    def __post_init__(self) -> None:
        if self.densify_interval <= 0:
            raise ValidationError("densify_interval must be positive")
        if self.simplify_tolerance < 0:
            raise ValidationError("simplify_tolerance must be nonnegative")
        if self.deadend_min_length < 0:
            raise ValidationError("deadend_min_length must be nonnegative")
        if self.max_segment_length <= 0:
            raise ValidationError("max_segment_length must be positive")


@dataclass(frozen=True)
class PathSegment:
    """A piece of centerline with its narrowest sampled width."""

    id: str
    geometry: Polyline
    min_width: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("segment id must be nonempty")
        if self.min_width < 0:
            raise ValidationError("min_width must be nonnegative")


def _area_parts(area: Polygon | MultiPolygon) -> list[Polygon]:
    if isinstance(area, Polygon):
        return [area]
    return list(area.parts)


def skeletonize(
    area: Polygon | MultiPolygon, params: CenterlineParams
) -> list[Polyline]:
    """Approximate medial axis of each polygon part.

    Returns junction-to-junction polylines (closed loops around holes
    come back with the first vertex repeated at the end). A part too
    thin to produce any interior Voronoi structure yields nothing but a
    warning.
    """
    paths: list[Polyline] = []
    for part in _area_parts(area):
        part_paths = _skeletonize_polygon(part, params)
        if not part_paths:
            logger.warning(
                "empty skeleton for polygon near (%.1f, %.1f)",
                part.bounds[0],
                part.bounds[1],
            )
        paths.extend(part_paths)
    return paths


def _skeletonize_polygon(polygon: Polygon, params: CenterlineParams) -> list[Polyline]:
    sites: list[Point2] = []
    site_ring: list[tuple[int, int, int]] = []  # ring id, position, ring size
    seen: dict[tuple[float, float], int] = {}
    for ring_id, ring in enumerate(polygon.rings()):
        densified = densify_ring(ring, params.densify_interval)
        size = len(densified)
        for pos, pt in enumerate(densified):
            key = (round(pt.x, 9), round(pt.y, 9))
            if key in seen:
                continue
            seen[key] = len(sites)
            sites.append(pt)
            site_ring.append((ring_id, pos, size))
    if len(sites) < 3:
        return []
    edges = voronoi(sites)

    shape = polygon.to_shapely()
    vertex_coords: dict[int, Point2] = {}
    for e in edges:
        if e.clipped:
            continue
        vertex_coords.setdefault(e.start_index, e.start)
        vertex_coords.setdefault(e.end_index, e.end)
    if not vertex_coords:
        return []
    vids = sorted(vertex_coords)
    xs = [vertex_coords[v].x for v in vids]
    ys = [vertex_coords[v].y for v in vids]
    inside_flags = shapely.contains_xy(shape, xs, ys)
    inside = {v: bool(flag) for v, flag in zip(vids, inside_flags)}

    kept: list[tuple[int, int]] = []
    for e in edges:
        if e.clipped:
            continue
        if not (inside[e.start_index] and inside[e.end_index]):
            continue
        ring_a, pos_a, size_a = site_ring[e.site_a]
        ring_b, pos_b, _ = site_ring[e.site_b]
        if ring_a == ring_b:
            gap = abs(pos_a - pos_b)
            if gap == 1 or gap == size_a - 1:
                continue  # neighbors on the same boundary stretch
        if e.start_index == e.end_index:
            continue
        if vertex_coords[e.start_index] == vertex_coords[e.end_index]:
            continue
        kept.append((e.start_index, e.end_index))
    return _chain_edges(kept, vertex_coords)


def _chain_edges(
    edges: list[tuple[int, int]], coords: dict[int, Point2]
) -> list[Polyline]:
    """Merge edges into maximal polylines through degree-2 vertices."""
    adjacency: dict[int, list[tuple[int, int]]] = {}
    for eid, (u, v) in enumerate(edges):
        adjacency.setdefault(u, []).append((v, eid))
        adjacency.setdefault(v, []).append((u, eid))
    for entries in adjacency.values():
        entries.sort()
    degree = {v: len(entries) for v, entries in adjacency.items()}
    used: set[int] = set()
    chains: list[list[int]] = []

    def walk(start: int, first_next: int, first_eid: int) -> list[int]:
        chain = [start, first_next]
        used.add(first_eid)
        prev_eid = first_eid
        current = first_next
        while degree[current] == 2 and current != start:
            nxt = None
            for other, eid in adjacency[current]:
                if eid != prev_eid:
                    nxt = (other, eid)
                    break
            if nxt is None or nxt[1] in used:
                break
            used.add(nxt[1])
            chain.append(nxt[0])
            prev_eid = nxt[1]
            current = nxt[0]
        return chain

    for v in sorted(adjacency):
        if degree[v] == 2:
            continue
        for other, eid in adjacency[v]:
            if eid not in used:
                chains.append(walk(v, other, eid))
    # Anything left over forms closed loops of degree-2 vertices.
    for eid, (u, v) in enumerate(edges):
        if eid in used:
            continue
        anchor = min(
            (w for w in (u, v)), key=lambda w: coords[w]
        )
        first = min(
            (entry for entry in adjacency[anchor] if entry[1] not in used),
            key=lambda entry: coords[entry[0]],
        )
        chains.append(walk(anchor, first[0], first[1]))

    paths = []
    for chain in chains:
        pts = [coords[v] for v in chain]
        deduped = [pts[0]]
        for p in pts[1:]:
            if p != deduped[-1]:
                deduped.append(p)
        if len(deduped) < 2:
            continue
        if deduped[-1] < deduped[0]:
            deduped.reverse()
        paths.append(Polyline(tuple(deduped)))
    paths.sort(key=lambda pl: (pl.start, pl.end, pl.length))
    return paths


def _endpoint_key(p: Point2) -> tuple[float, float]:
    return (round(p.x, 9), round(p.y, 9))


def prune(paths: list[Polyline], params: CenterlineParams) -> list[Polyline]:
    """Drop short dead-end branches.

    A branch is a dead end when one of its endpoints touches nothing
    else; removal iterates because cutting one branch can expose the
    next. Surviving branches keep their full vertex chains so that
    width sampling downstream sees the skeleton, not shortcut chords.
    """
    current = list(paths)
    while True:
        degree: Counter = Counter()
        for pl in current:
            degree[_endpoint_key(pl.start)] += 1
            degree[_endpoint_key(pl.end)] += 1
        keep = []
        removed = 0
        for pl in current:
            is_leaf = (
                degree[_endpoint_key(pl.start)] == 1
                or degree[_endpoint_key(pl.end)] == 1
            )
            if is_leaf and pl.length < params.deadend_min_length:
                removed += 1
            else:
                keep.append(pl)
        current = keep
        if removed == 0:
            break
    return current


def _split_at_junctions(paths: list[Polyline]) -> list[Polyline]:
    endpoint_keys = set()
    for pl in paths:
        endpoint_keys.add(_endpoint_key(pl.start))
        endpoint_keys.add(_endpoint_key(pl.end))
    out = []
    for pl in paths:
        piece = [pl.vertices[0]]
        for v in pl.vertices[1:-1]:
            piece.append(v)
            if _endpoint_key(v) in endpoint_keys:
                out.append(Polyline(tuple(piece)))
                piece = [v]
        piece.append(pl.vertices[-1])
        out.append(Polyline(tuple(piece)))
    return out


def _split_equal(pl: Polyline, max_length: float) -> list[Polyline]:
    total = pl.length
    pieces = math.ceil(total / max_length)
    if pieces <= 1:
        return [pl]
    step = total / pieces
    out = []
    current = [pl.vertices[0]]
    walked = 0.0
    next_cut = step
    for a, b in zip(pl.vertices, pl.vertices[1:]):
        seg_len = a.distance_to(b)
        while next_cut < walked + seg_len - 1e-12 and len(out) < pieces - 1:
            t = (next_cut - walked) / seg_len
            cut = Point2(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
            if cut != current[-1]:
                current.append(cut)
            if len(current) >= 2:
                out.append(Polyline(tuple(current)))
            current = [cut]
            next_cut += step
        walked += seg_len
        if b != current[-1]:
            current.append(b)
    if len(current) >= 2:
        out.append(Polyline(tuple(current)))
    return out


def _clearance(p: Point2, parts: list[Polygon]) -> float:
    for poly in parts:
        if point_in_polygon(p, poly):
            return distance_to_boundary(p, poly)
    return 0.0


def segmentize(
    paths: list[Polyline],
    area: Polygon | MultiPolygon,
    params: CenterlineParams,
    id_prefix: str = "seg",
) -> list[PathSegment]:
    """Cut paths at junctions and into bounded-length pieces.

    Over-long pieces are divided into equal-length parts. Each segment
    carries min_width: twice the smallest clearance to the area
    boundary, sampled at most densify_interval apart along it; samples
    that fall outside the area count as zero clearance. Clearance is
    sampled before the output geometry is simplified: a shortcut chord
    may cut a corner the skeleton steers around, which would understate
    the passable width. Simplification preserves endpoints, so segment
    connectivity is unchanged.
    """
    parts = _area_parts(area)
    segments = []
    counter = 0
    for pl in _split_at_junctions(paths):
        for piece in _split_equal(pl, params.max_segment_length):
            samples = piece.sample_points(params.densify_interval)
            clearance = min(_clearance(p, parts) for p in samples)
            segments.append(
                PathSegment(
                    id=f"{id_prefix}:{counter:03d}",
                    geometry=simplify_polyline(piece, params.simplify_tolerance),
                    min_width=2.0 * clearance,
                )
            )
            counter += 1
    return segments
