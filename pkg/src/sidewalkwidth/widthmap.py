"""Width categories, penalized routing, and full-vs-free statistics.

Widths fall into four bins with closed lower edges (0.9, 1.8 and 2.9 m
boundaries) plus an explicit unknown. Routing weights an edge by its
length times a penalty that grows exponentially as the category gets
narrower, so a route prefers a long comfortable detour over a short
squeeze. Each major path segment is then labeled with the narrowest
category its best obstacle-aware route passes through.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from enum import Enum

from .centerline import PathSegment
from .errors import ValidationError
from .geom import (
    MultiPolygon,
    Point2,
    Polygon,
    Polyline,
    buffer_polyline,
    point_in_polygon,
)

logger = logging.getLogger(__name__)

_THRESHOLDS = (0.9, 1.8, 2.9)


class WidthCategory(Enum):
    """Sidewalk width bins; values are the serialized labels."""

    LT_090 = "<0.9"
    W090_180 = "0.9-1.8"
    W180_290 = "1.8-2.9"
    GT_290 = ">2.9"
    UNKNOWN = "unknown"

    @property
    def label(self) -> str:
        return self.value

    @property
    def rank(self) -> int:
        """Position from narrowest (0) to widest (3); unknown has none."""
        if self is WidthCategory.UNKNOWN:
            raise ValidationError("unknown category has no rank")
        return _RANKS[self]

    @classmethod
    def from_label(cls, label: str) -> "WidthCategory":
        for cat in cls:
            if cat.value == label:
                return cat
        raise ValidationError(f"unknown width category label {label!r}")


_RANKS = {
    WidthCategory.LT_090: 0,
    WidthCategory.W090_180: 1,
    WidthCategory.W180_290: 2,
    WidthCategory.GT_290: 3,
}

KNOWN_CATEGORIES = (
    WidthCategory.LT_090,
    WidthCategory.W090_180,
    WidthCategory.W180_290,
    WidthCategory.GT_290,
)


def categorize(width: float) -> WidthCategory:
    """Bin a width in meters; lower bin edges are inclusive."""
    if not width >= 0:
        raise ValidationError(f"width must be nonnegative, got {width}")
    if width < _THRESHOLDS[0]:
        return WidthCategory.LT_090
    if width < _THRESHOLDS[1]:
        return WidthCategory.W090_180
    if width < _THRESHOLDS[2]:
        return WidthCategory.W180_290
    return WidthCategory.GT_290


def penalty(category: WidthCategory, base: float = 10.0) -> float:
    """Routing weight multiplier; one category narrower costs base times more."""
    if base <= 1:
        raise ValidationError(f"penalty base must exceed 1, got {base}")
    return float(base) ** (len(KNOWN_CATEGORIES) - 1 - category.rank)


def min_category(categories) -> WidthCategory:
    cats = list(categories)
    if not cats:
        raise ValidationError("min_category needs at least one category")
    return min(cats, key=lambda c: c.rank)


@dataclass(frozen=True)
class RouteParams:
    """Graph construction and major-segment mapping settings."""

    penalty_base: float = 10.0
    node_snap_tolerance: float = 0.05
    endpoint_snap_radius: float = 5.0
    corridor_buffer_radius: float = 8.0

    def __post_init__(self) -> None:
        if self.penalty_base <= 1:
            raise ValidationError("penalty_base must exceed 1")
        if self.node_snap_tolerance <= 0:
            raise ValidationError("node_snap_tolerance must be positive")
        if self.endpoint_snap_radius <= 0:
            raise ValidationError("endpoint_snap_radius must be positive")
        if self.corridor_buffer_radius <= 0:
            raise ValidationError("corridor_buffer_radius must be positive")


@dataclass(frozen=True)
class GraphEdge:
    u: int
    v: int
    length: float
    category: WidthCategory
    weight: float

    def other(self, node: int) -> int:
        return self.v if node == self.u else self.u


@dataclass
class WidthGraph:
    """Undirected routing graph over detailed path segments."""

    nodes: dict[int, Point2]
    edges: list[GraphEdge]

    def adjacency(self) -> dict[int, list[GraphEdge]]:
        adj: dict[int, list[GraphEdge]] = {nid: [] for nid in self.nodes}
        for edge in self.edges:
            adj[edge.u].append(edge)
            adj[edge.v].append(edge)
        return adj


class _SnapIndex:
    """Grid hash that snaps nearby endpoints to one node id."""

    def __init__(self, tolerance: float) -> None:
        self.tolerance = tolerance
        self.cells: dict[tuple[int, int], list[int]] = {}
        self.points: list[Point2] = []

    def _cell(self, p: Point2) -> tuple[int, int]:
        return (int(p.x // self.tolerance), int(p.y // self.tolerance))

    def snap(self, p: Point2) -> int:
        cx, cy = self._cell(p)
        best: tuple[float, int] | None = None
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for nid in self.cells.get((cx + dx, cy + dy), ()):
                    d = p.distance_to(self.points[nid])
                    if d <= self.tolerance and (best is None or (d, nid) < best):
                        best = (d, nid)
        if best is not None:
            return best[1]
        nid = len(self.points)
        self.points.append(p)
        self.cells.setdefault((cx, cy), []).append(nid)
        return nid


def build_graph(
    segments: list[PathSegment], params: RouteParams
) -> WidthGraph:
    """One edge per segment; endpoints within the snap tolerance merge.

    Edge weight is length times the penalty of the segment's width
    category. Segments that collapse onto a single node are skipped.
    """
    index = _SnapIndex(params.node_snap_tolerance)
    edges = []
    for seg in segments:
        u = index.snap(seg.geometry.start)
        v = index.snap(seg.geometry.end)
        if u == v:
            logger.debug("segment %s collapsed to one node, skipped", seg.id)
            continue
        category = categorize(seg.min_width)
        weight = seg.geometry.length * penalty(category, params.penalty_base)
        edges.append(GraphEdge(u, v, seg.geometry.length, category, weight))
    nodes = {nid: pt for nid, pt in enumerate(index.points)}
    return WidthGraph(nodes=nodes, edges=edges)


def shortest_route(
    graph: WidthGraph, start: int, goal: int, allowed: set[int]
) -> list[GraphEdge] | None:
    """Minimum-weight route between two nodes within an allowed set.

    Among equal-weight optima the route whose node-id sequence is
    lexicographically smallest wins, which makes the result
    deterministic. Returns None when no route exists and an empty list
    when start equals goal.
    """
    for node in (start, goal):
        if node not in graph.nodes:
            raise ValidationError(f"node {node} not in graph")
        if node not in allowed:
            raise ValidationError(f"node {node} not in allowed set")
    if start == goal:
        return []
    adjacency = graph.adjacency()
    counter = 0
    heap: list[tuple[float, tuple[int, ...], int, list[GraphEdge]]] = [
        (0.0, (start,), counter, [])
    ]
    settled: set[int] = set()
    while heap:
        weight, path, _, edges = heapq.heappop(heap)
        node = path[-1]
        if node in settled:
            continue
        settled.add(node)
        if node == goal:
            return edges
        for edge in adjacency[node]:
            nxt = edge.other(node)
            if nxt in settled or nxt not in allowed:
                continue
            counter += 1
            heapq.heappush(
                heap, (weight + edge.weight, path + (nxt,), counter, edges + [edge])
            )
    return None


def route_weight(route: list[GraphEdge]) -> float:
    return sum(edge.weight for edge in route)


@dataclass(frozen=True)
class MajorPathRecord:
    """A major path segment with its full and obstacle-free categories.

    The free category is UNKNOWN when no route could be established;
    when known it never exceeds the full category, because an
    obstacle-free passage cannot be wider than the sidewalk it crosses.
    """

    id: str
    geometry: Polyline
    full_width_m: float
    full_category: WidthCategory
    free_category: WidthCategory
    route_node_ids: tuple[int, ...] = ()


def map_to_major(
    major: list[PathSegment],
    graph: WidthGraph,
    area: Polygon | MultiPolygon,
    params: RouteParams,
) -> list[MajorPathRecord]:
    """Label each major segment with its best obstacle-aware category.

    Candidate nodes live inside a buffer around the segment and inside
    the sidewalk area; the segment endpoints snap to the nearest such
    nodes within the snap radius. The free category is the narrowest
    category along the penalized route between them.
    """
    if isinstance(area, Polygon):
        in_area = lambda p: point_in_polygon(p, area)  # noqa: E731
    else:
        parts = list(area.parts)
        in_area = lambda p: any(point_in_polygon(p, poly) for poly in parts)  # noqa: E731

    records = []
    for seg in major:
        full_cat = categorize(seg.min_width)
        corridor = buffer_polyline(seg.geometry, params.corridor_buffer_radius)
        allowed = {
            nid
            for nid, pt in graph.nodes.items()
            if point_in_polygon(pt, corridor) and in_area(pt)
        }
        start = _nearest_allowed(graph, allowed, seg.geometry.start, params)
        goal = _nearest_allowed(graph, allowed, seg.geometry.end, params)
        free_cat = WidthCategory.UNKNOWN
        node_ids: tuple[int, ...] = ()
        if start is not None and goal is not None and start != goal:
            route = shortest_route(graph, start, goal, allowed)
            if route:
                free_cat = min_category(edge.category for edge in route)
                if free_cat.rank > full_cat.rank:
                    free_cat = full_cat
                node_ids = _route_nodes(route, start)
        records.append(
            MajorPathRecord(
                id=seg.id,
                geometry=seg.geometry,
                full_width_m=seg.min_width,
                full_category=full_cat,
                free_category=free_cat,
                route_node_ids=node_ids,
            )
        )
    return records


def _nearest_allowed(
    graph: WidthGraph, allowed: set[int], target: Point2, params: RouteParams
) -> int | None:
    best: tuple[float, int] | None = None
    for nid in allowed:
        d = target.distance_to(graph.nodes[nid])
        if d <= params.endpoint_snap_radius and (best is None or (d, nid) < best):
            best = (d, nid)
    return None if best is None else best[1]


def _route_nodes(route: list[GraphEdge], start: int) -> tuple[int, ...]:
    nodes = [start]
    for edge in route:
        nodes.append(edge.other(nodes[-1]))
    return tuple(nodes)


@dataclass
class WidthStats:
    """Length-weighted comparison of full and obstacle-free categories.

    cross_table_m maps (full label, free label) to meters; free labels
    include "unknown". full_pct covers every record; free_pct and
    full_given_free_pct cover only records with a known free category.
    """

    record_count: int
    total_length_m: float
    known_length_m: float
    cross_table_m: dict[tuple[str, str], float]
    full_pct: dict[str, float]
    free_pct: dict[str, float]
    unknown_pct: float
    full_given_free_pct: dict[tuple[str, str], float]

    def to_json_dict(self) -> dict:
        cross = {
            full.label: {
                free.label: self.cross_table_m[(full.label, free.label)]
                for free in WidthCategory
            }
            for full in KNOWN_CATEGORIES
        }
        lookup = {}
        for full in KNOWN_CATEGORIES:
            for free in KNOWN_CATEGORIES:
                lookup.setdefault(free.label, {})[full.label] = self.full_given_free_pct[
                    (free.label, full.label)
                ]
        return {
            "record_count": self.record_count,
            "total_length_m": self.total_length_m,
            "known_length_m": self.known_length_m,
            "cross_table_m": cross,
            "full_pct": self.full_pct,
            "free_pct": self.free_pct,
            "unknown_pct": self.unknown_pct,
            "full_given_free_pct": lookup,
        }

    def to_text(self) -> str:
        labels = [c.label for c in KNOWN_CATEGORIES]
        free_labels = labels + [WidthCategory.UNKNOWN.label]
        lines = []
        lines.append(f"records: {self.record_count}")
        lines.append(f"total length: {self.total_length_m:.1f} m")
        lines.append(
            f"known free length: {self.known_length_m:.1f} m"
            f" ({100.0 - self.unknown_pct:.1f}%)"
        )
        lines.append("")
        header = "full \\ free".ljust(12) + "".join(l.rjust(10) for l in free_labels)
        lines.append(header)
        for full in labels:
            row = full.ljust(12)
            for free in free_labels:
                row += f"{self.cross_table_m[(full, free)]:10.1f}"
            lines.append(row)
        lines.append("")
        lines.append("share of length per category (full / free, known only):")
        for label in labels:
            lines.append(
                f"  {label:>8}: {self.full_pct[label]:5.1f}% / {self.free_pct[label]:5.1f}%"
            )
        lines.append(f"  unknown free share: {self.unknown_pct:.1f}%")
        return "\n".join(lines) + "\n"


def compare_stats(records: list[MajorPathRecord]) -> WidthStats:
    """Aggregate records into the full-vs-free cross table.

    Percentages are length-weighted. Records with an unknown free
    category contribute to the table and the unknown share but are
    excluded from the known-category percentages.
    """
    if not records:
        raise ValidationError("no records to aggregate")
    cross: dict[tuple[str, str], float] = {
        (full.label, free.label): 0.0
        for full in KNOWN_CATEGORIES
        for free in WidthCategory
    }
    total = 0.0
    known = 0.0
    full_lengths = {c.label: 0.0 for c in KNOWN_CATEGORIES}
    free_lengths = {c.label: 0.0 for c in KNOWN_CATEGORIES}
    for rec in records:
        length = rec.geometry.length
        total += length
        cross[(rec.full_category.label, rec.free_category.label)] += length
        full_lengths[rec.full_category.label] += length
        if rec.free_category is not WidthCategory.UNKNOWN:
            known += length
            free_lengths[rec.free_category.label] += length
    full_pct = {
        label: (100.0 * v / total if total > 0 else 0.0)
        for label, v in full_lengths.items()
    }
    free_pct = {
        label: (100.0 * v / known if known > 0 else 0.0)
        for label, v in free_lengths.items()
    }
    unknown_pct = 100.0 * (total - known) / total if total > 0 else 0.0
    conditional: dict[tuple[str, str], float] = {}
    for free in KNOWN_CATEGORIES:
        column = sum(cross[(full.label, free.label)] for full in KNOWN_CATEGORIES)
        for full in KNOWN_CATEGORIES:
            share = 100.0 * cross[(full.label, free.label)] / column if column > 0 else 0.0
            conditional[(free.label, full.label)] = share
    return WidthStats(
        record_count=len(records),
        total_length_m=total,
        known_length_m=known,
        cross_table_m=cross,
        full_pct=full_pct,
        free_pct=free_pct,
        unknown_pct=unknown_pct,
        full_given_free_pct=conditional,
    )
