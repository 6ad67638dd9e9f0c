"""Two-epoch change detection over obstacle-band point clouds.

Distances between epochs are measured per core point: both clouds are
intersected with a cylinder around the core, the member points are
projected onto the cylinder axis, and the change is the difference of
the mean axial offsets. A level of detection built from the per-epoch
spread and the registration error separates real change from noise.
Cylinders with too few members in either epoch stay undetermined.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .io import PointCloud

logger = logging.getLogger(__name__)

VERTICAL = np.array([0.0, 0.0, 1.0])


class ChangeStatus(Enum):
    STATIC = "static"
    CHANGED = "changed"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class M3C2Params:
    """Geometry and thresholds for cylinder-based change detection.

    Attributes:
        core_subsample: grid cell side used to pick core points, m.
        normal_radius: neighborhood radius for normal estimation, m.
        cylinder_radius: cylinder radius around each core, m.
        cylinder_halfdepth: half the cylinder extent along its axis, m.
        registration_error: co-registration uncertainty added to the
            level of detection, m.
        min_points_per_cylinder: fewer members in either epoch makes
            the core undetermined.
        static_threshold: absolute distance below which a determined
            core counts as static, m.
        normal_mode: "vertical" uses a fixed up axis for every core;
            "estimated" fits a local plane per core.
    """

    core_subsample: float = 0.3
    normal_radius: float = 0.5
    cylinder_radius: float = 0.5
    cylinder_halfdepth: float = 2.0
    registration_error: float = 0.02
    min_points_per_cylinder: int = 4
    static_threshold: float = 0.1
    normal_mode: str = "vertical"

    def __post_init__(self) -> None:
        for name in (
            "core_subsample",
            "normal_radius",
            "cylinder_radius",
            "cylinder_halfdepth",
            "static_threshold",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.registration_error < 0:
            raise ValidationError("registration_error must be nonnegative")
        if self.min_points_per_cylinder < 2:
            raise ValidationError("min_points_per_cylinder must be at least 2")
        if self.normal_mode not in ("vertical", "estimated"):
            raise ValidationError(f"unknown normal_mode {self.normal_mode!r}")


@dataclass(frozen=True)
class CorePointResult:
    """Outcome of change detection at one core point.

    distance and lod are NaN when the status is UNDETERMINED; normal is
    always a unit vector with nonnegative z (or positive first nonzero
    component when horizontal).
    """

    core: np.ndarray
    normal: np.ndarray
    distance: float
    lod: float
    status: ChangeStatus
    points_a: int
    points_b: int


def select_core_points(cloud: PointCloud, spacing: float) -> np.ndarray:
    """One core point per occupied cubic grid cell of side spacing.

    The representative of a cell is the member point closest to the
    cell centroid, so every input point lies within sqrt(3) * spacing
    of some core.
    """
    if spacing <= 0:
        raise ValidationError("core spacing must be positive")
    if len(cloud) == 0:
        return np.empty((0, 3), dtype=float)
    pts = cloud.points
    cells = np.floor(pts / spacing).astype(np.int64)
    order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    cells_sorted = cells[order]
    boundaries = np.any(np.diff(cells_sorted, axis=0) != 0, axis=1)
    starts = np.concatenate(([0], np.nonzero(boundaries)[0] + 1, [len(pts)]))
    cores = []
    for lo, hi in zip(starts[:-1], starts[1:]):
        idx = order[lo:hi]
        centroid = (cells_sorted[lo] + 0.5) * spacing
        offsets = pts[idx] - centroid
        best = idx[np.argmin(np.einsum("ij,ij->i", offsets, offsets))]
        cores.append(pts[best])
    return np.array(cores, dtype=float)


def _orient(normal: np.ndarray) -> np.ndarray:
    """Flip so z is positive, falling back to x then y for horizontal normals."""
    for component in (normal[2], normal[0], normal[1]):
        if component > 0:
            return normal
        if component < 0:
            return -normal
    return normal


def estimate_normal(
    core: np.ndarray, cloud: PointCloud, radius: float
) -> np.ndarray | None:
    """Surface normal at a core from its neighborhood, or None.

    The normal is the smallest-variance direction of the neighbors
    within radius; fewer than three neighbors (or a fully degenerate
    neighborhood) leaves it undetermined.
    """
    if radius <= 0:
        raise ValidationError("normal radius must be positive")
    diffs = cloud.points - np.asarray(core, dtype=float)
    dist_sq = np.einsum("ij,ij->i", diffs, diffs)
    neighbors = cloud.points[dist_sq <= radius * radius]
    if len(neighbors) < 3:
        return None
    centered = neighbors - neighbors.mean(axis=0)
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    normal = eigvecs[:, 0]
    norm = np.linalg.norm(normal)
    if norm == 0 or not np.isfinite(norm):
        return None
    return _orient(normal / norm)


def _cylinder_members(
    core: np.ndarray,
    normal: np.ndarray,
    points: np.ndarray,
    candidates: np.ndarray,
    params: M3C2Params,
) -> np.ndarray:
    """Axial offsets of candidate points that fall inside the cylinder."""
    diffs = points[candidates] - core
    axial = diffs @ normal
    radial = diffs - np.outer(axial, normal)
    radial_sq = np.einsum("ij,ij->i", radial, radial)
    inside = (np.abs(axial) <= params.cylinder_halfdepth) & (
        radial_sq <= params.cylinder_radius**2
    )
    return axial[inside]


def m3c2_distance(
    core: np.ndarray,
    normal: np.ndarray,
    cloud_a: PointCloud,
    cloud_b: PointCloud,
    params: M3C2Params,
    tree_a: cKDTree | None = None,
    tree_b: cKDTree | None = None,
) -> CorePointResult:
    """Change distance at one core point between two epochs.

    Returns the mean axial offset of epoch B minus epoch A, the level
    of detection (1.96 * combined standard error plus the registration
    error), and the resulting status.
    """
    core = np.asarray(core, dtype=float)
    normal = np.asarray(normal, dtype=float)
    if tree_a is None:
        tree_a = cKDTree(cloud_a.points)
    if tree_b is None:
        tree_b = cKDTree(cloud_b.points)
    reach = math.hypot(params.cylinder_radius, params.cylinder_halfdepth)
    cand_a = np.array(sorted(tree_a.query_ball_point(core, reach)), dtype=int)
    cand_b = np.array(sorted(tree_b.query_ball_point(core, reach)), dtype=int)
    axial_a = _cylinder_members(core, normal, cloud_a.points, cand_a, params)
    axial_b = _cylinder_members(core, normal, cloud_b.points, cand_b, params)
    na, nb = len(axial_a), len(axial_b)
    if na < params.min_points_per_cylinder or nb < params.min_points_per_cylinder:
        return CorePointResult(
            core, normal, float("nan"), float("nan"), ChangeStatus.UNDETERMINED, na, nb
        )
    distance = float(np.mean(axial_b) - np.mean(axial_a))
    var_a = float(np.var(axial_a, ddof=1))
    var_b = float(np.var(axial_b, ddof=1))
    lod = 1.96 * math.sqrt(var_a / na + var_b / nb) + params.registration_error
    if abs(distance) > max(lod, params.static_threshold):
        status = ChangeStatus.CHANGED
    else:
        status = ChangeStatus.STATIC
    return CorePointResult(core, normal, distance, lod, status, na, nb)


def run_change_detection(
    cloud_a: PointCloud, cloud_b: PointCloud, params: M3C2Params
) -> list[CorePointResult]:
    """Core selection, normals and cylinder distances for two epochs."""
    if len(cloud_a) == 0 or len(cloud_b) == 0:
        raise ValidationError("change detection requires two epochs")
    cores = select_core_points(cloud_a, params.core_subsample)
    tree_a = cKDTree(cloud_a.points)
    tree_b = cKDTree(cloud_b.points)
    results = []
    for core in cores:
        if params.normal_mode == "vertical":
            normal = VERTICAL
        else:
            normal = estimate_normal(core, cloud_a, params.normal_radius)
            if normal is None:
                results.append(
                    CorePointResult(
                        core,
                        VERTICAL,
                        float("nan"),
                        float("nan"),
                        ChangeStatus.UNDETERMINED,
                        0,
                        0,
                    )
                )
                continue
        results.append(
            m3c2_distance(core, normal, cloud_a, cloud_b, params, tree_a, tree_b)
        )
    counts = {status: 0 for status in ChangeStatus}
    for r in results:
        counts[r.status] += 1
    logger.debug(
        "change detection: %d cores (%d static, %d changed, %d undetermined)",
        len(results),
        counts[ChangeStatus.STATIC],
        counts[ChangeStatus.CHANGED],
        counts[ChangeStatus.UNDETERMINED],
    )
    return results


def filter_static(
    obstacles_a: PointCloud, obstacles_b: PointCloud, params: M3C2Params
) -> PointCloud:
    """Epoch-A points attributed to a static core point.

    A point survives when its nearest core lies within
    core_subsample * sqrt(3) and that core's status is STATIC; points
    attributed to changed or undetermined cores are dropped.
    """
    results = run_change_detection(obstacles_a, obstacles_b, params)
    cores = np.array([r.core for r in results])
    static = np.array([r.status is ChangeStatus.STATIC for r in results])
    tree = cKDTree(cores)
    dist, nearest = tree.query(obstacles_a.points)
    keep = (dist <= params.core_subsample * math.sqrt(3.0)) & static[nearest]
    kept = obstacles_a.subset(keep)
    logger.debug(
        "static filter kept %d of %d epoch-%s points",
        len(kept),
        len(obstacles_a),
        obstacles_a.epoch_label,
    )
    return kept
