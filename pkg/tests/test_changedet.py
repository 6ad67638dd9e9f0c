"""Change detection: core selection, cylinder distances, static filter."""

import math

import numpy as np
import pytest

from sidewalkwidth.changedet import (
    ChangeStatus,
    M3C2Params,
    estimate_normal,
    filter_static,
    m3c2_distance,
    run_change_detection,
    select_core_points,
)
from sidewalkwidth.errors import ValidationError
from sidewalkwidth.io import PointCloud
from conftest import box_points, plane_points
from oracles import cylinder_change, occupied_cell_count


def cloud(points, label="a"):
    return PointCloud(np.asarray(points, dtype=float), label)


def test_params_validation():
    with pytest.raises(ValidationError):
        M3C2Params(core_subsample=0.0)
    with pytest.raises(ValidationError):
        M3C2Params(registration_error=-0.1)
    with pytest.raises(ValidationError):
        M3C2Params(min_points_per_cylinder=1)
    with pytest.raises(ValidationError):
        M3C2Params(normal_mode="sideways")


class TestCoreSelection:
    def test_one_core_per_occupied_cell(self):
        rng = np.random.default_rng(47)
        pts = rng.uniform(0, 5, (800, 3))
        cores = select_core_points(cloud(pts), 0.4)
        assert len(cores) == occupied_cell_count(pts, 0.4)

    def test_every_point_near_a_core(self):
        rng = np.random.default_rng(53)
        pts = rng.uniform(0, 3, (300, 3))
        spacing = 0.5
        cores = select_core_points(cloud(pts), spacing)
        for p in pts:
            d = np.min(np.linalg.norm(cores - p, axis=1))
            assert d <= spacing * math.sqrt(3.0) + 1e-12

    def test_core_is_cell_member(self):
        pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2], [1.1, 0.1, 0.1]])
        cores = select_core_points(cloud(pts), 1.0)
        assert len(cores) == 2
        for c in cores:
            assert any(np.array_equal(c, p) for p in pts)

    def test_order_independent(self):
        rng = np.random.default_rng(59)
        pts = rng.uniform(0, 4, (200, 3))
        shuffled = pts[rng.permutation(len(pts))]
        a = select_core_points(cloud(pts), 0.3)
        b = select_core_points(cloud(shuffled), 0.3)
        assert np.array_equal(a, b)

    def test_empty_cloud(self):
        assert select_core_points(cloud(np.empty((0, 3))), 0.3).shape == (0, 3)

    def test_bad_spacing(self):
        with pytest.raises(ValidationError):
            select_core_points(cloud(np.zeros((1, 3))), 0.0)


class TestNormals:
    def test_flat_plane_gives_vertical(self):
        pts = plane_points(0, 2, 0, 2, spacing=0.2, noise=0.01, seed=1)
        normal = estimate_normal(np.array([1.0, 1.0, 0.0]), cloud(pts), 0.6)
        assert abs(normal[2]) > 0.99
        assert normal[2] > 0  # oriented upward

    def test_wall_gives_horizontal(self):
        xs, zs = np.meshgrid(np.arange(0, 2, 0.1), np.arange(0, 2, 0.1))
        pts = np.column_stack([xs.ravel(), np.zeros(xs.size), zs.ravel()])
        normal = estimate_normal(np.array([1.0, 0.0, 1.0]), cloud(pts), 0.5)
        assert abs(normal[1]) > 0.99

    def test_too_few_neighbors(self):
        pts = np.array([[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]])
        assert estimate_normal(np.zeros(3), cloud(pts), 0.5) is None


class TestCylinderDistance:
    def params(self):
        return M3C2Params(
            cylinder_radius=0.4, cylinder_halfdepth=1.0, min_points_per_cylinder=4
        )

    def test_matches_oracle_on_random_clouds(self):
        rng = np.random.default_rng(61)
        params = self.params()
        pts_a = rng.uniform(0, 3, (400, 3))
        pts_b = rng.uniform(0, 3, (350, 3))
        ca, cb = cloud(pts_a, "a"), cloud(pts_b, "b")
        cores = select_core_points(ca, 0.8)
        normal = np.array([0.0, 0.0, 1.0])
        for core in cores:
            got = m3c2_distance(core, normal, ca, cb, params)
            d, lod, na, nb = cylinder_change(
                core,
                normal,
                pts_a,
                pts_b,
                params.cylinder_radius,
                params.cylinder_halfdepth,
                params.registration_error,
                params.min_points_per_cylinder,
            )
            assert (got.points_a, got.points_b) == (na, nb)
            if math.isnan(d):
                assert got.status is ChangeStatus.UNDETERMINED
                assert math.isnan(got.distance) and math.isnan(got.lod)
            else:
                assert got.distance == pytest.approx(d, abs=1e-12)
                assert got.lod == pytest.approx(lod, abs=1e-12)

    def test_lod_at_least_registration_error(self):
        rng = np.random.default_rng(67)
        params = M3C2Params(registration_error=0.03)
        pts = rng.uniform(0, 2, (500, 3))
        results = run_change_detection(cloud(pts, "a"), cloud(pts + 0.01, "b"), params)
        determined = [r for r in results if r.status is not ChangeStatus.UNDETERMINED]
        assert determined
        for r in determined:
            assert r.lod >= params.registration_error

    def test_swapping_epochs_negates_distance(self):
        rng = np.random.default_rng(71)
        pts_a = rng.uniform(0, 2, (300, 3))
        pts_b = pts_a + rng.normal(0, 0.02, pts_a.shape)
        ca, cb = cloud(pts_a, "a"), cloud(pts_b, "b")
        core = np.array([1.0, 1.0, 1.0])
        normal = np.array([0.0, 0.0, 1.0])
        fwd = m3c2_distance(core, normal, ca, cb, M3C2Params())
        rev = m3c2_distance(core, normal, cb, ca, M3C2Params())
        assert fwd.distance == -rev.distance
        assert fwd.lod == rev.lod

    def test_undetermined_on_sparse_epoch(self):
        pts_a = plane_points(0, 1, 0, 1, spacing=0.1)
        pts_b = np.array([[0.5, 0.5, 0.0]])
        result = m3c2_distance(
            np.array([0.5, 0.5, 0.0]),
            np.array([0.0, 0.0, 1.0]),
            cloud(pts_a, "a"),
            cloud(pts_b, "b"),
            self.params(),
        )
        assert result.status is ChangeStatus.UNDETERMINED
        assert math.isnan(result.distance)


class TestRunChangeDetection:
    def test_identical_epochs_all_static(self):
        pts = plane_points(0, 3, 0, 3, spacing=0.1, noise=0.02, seed=2)
        results = run_change_detection(cloud(pts, "a"), cloud(pts, "b"), M3C2Params())
        assert results
        assert all(r.status is ChangeStatus.STATIC for r in results)

    def test_shifted_epoch_all_changed(self):
        pts = plane_points(0, 3, 0, 3, spacing=0.1, noise=0.02, seed=3)
        shifted = pts + np.array([0.0, 0.0, 0.5])
        results = run_change_detection(
            cloud(pts, "a"), cloud(shifted, "b"), M3C2Params(static_threshold=0.1)
        )
        determined = [r for r in results if r.status is not ChangeStatus.UNDETERMINED]
        assert determined
        assert all(r.status is ChangeStatus.CHANGED for r in determined)

    def test_estimated_normals_on_plane(self):
        pts = plane_points(0, 2, 0, 2, spacing=0.1)
        results = run_change_detection(
            cloud(pts, "a"), cloud(pts, "b"), M3C2Params(normal_mode="estimated")
        )
        for r in results:
            if r.status is ChangeStatus.UNDETERMINED:
                continue
            assert abs(r.normal[2]) > 0.99
            assert r.status is ChangeStatus.STATIC

    def test_empty_epoch_rejected(self):
        empty = cloud(np.empty((0, 3)))
        full = cloud(np.zeros((1, 3)))
        with pytest.raises(ValidationError, match="requires two epochs"):
            run_change_detection(full, empty, M3C2Params())


class TestFilterStatic:
    def test_transient_dropped_persistent_kept(self):
        persistent = box_points(2, 2, half=0.5, height=1.0, spacing=0.1)
        transient = box_points(6, 6, half=0.5, height=1.0, spacing=0.1)
        a = cloud(np.vstack([persistent, transient]), "a")
        b = cloud(persistent, "b")
        kept = filter_static(a, b, M3C2Params())
        kept_near_persistent = np.sum(kept.points[:, 0] < 4)
        kept_near_transient = np.sum(kept.points[:, 0] >= 4)
        assert kept_near_persistent >= 0.95 * len(persistent)
        assert kept_near_transient <= 0.05 * len(transient)
