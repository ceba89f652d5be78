import numpy as np
import pytest

from skyshot.mapping.grid import ChangeSet, GridSpec, OccupancyGrid, update_grid
from skyshot.mapping.sdf import (
    MapSnapshot,
    SignedDistanceField,
    distance_gradient,
    signed_distance,
)

from oracles import brute_force_distance_field, scratch_border_mask

TRUNC = 10.0


def fresh(dims=(16, 16, 16)):
    spec = GridSpec(dims=dims)
    return OccupancyGrid(spec), SignedDistanceField(spec, truncation=TRUNC)


def assert_matches_brute_force(grid, sdf):
    border = scratch_border_mask(grid.values, grid.spec.t_free, grid.spec.t_occ)
    assert np.array_equal(sdf.border, border)
    expected = brute_force_distance_field(border, grid.spec.voxel_size, TRUNC)
    assert np.array_equal(sdf.magnitude, expected)


class TestIncrementalField:
    def test_single_border_insertion(self):
        grid, sdf = fresh()
        center = np.array([8, 8, 8])
        grid.values[tuple(center)] = 255
        changes = ChangeSet([int(grid.spec.flatten(center))], [])
        sdf.apply_changes(grid, changes)
        assert_matches_brute_force(grid, sdf)
        assert sdf.magnitude[8, 8, 8] == 0.0
        assert sdf.magnitude[8, 8, 9] == 1.0
        assert sdf.magnitude[9, 9, 8] == pytest.approx(np.sqrt(2.0))

    def test_removing_only_border_restores_truncation(self):
        grid, sdf = fresh()
        center = np.array([8, 8, 8])
        grid.values[tuple(center)] = 255
        flat = int(grid.spec.flatten(center))
        sdf.apply_changes(grid, ChangeSet([flat], []))
        grid.values[tuple(center)] = 127  # unknown again, no free neighbors
        sdf.apply_changes(grid, ChangeSet([], [flat]))
        assert np.all(sdf.magnitude == TRUNC)
        assert np.all(sdf.nearest == -1)
        assert not sdf.border.any()

    def test_random_rays_match_brute_force_exactly(self):
        rng = np.random.default_rng(2)
        grid, sdf = fresh(dims=(20, 20, 14))
        spec = grid.spec
        for _ in range(80):
            sensor = rng.uniform(spec.origin + 0.5, spec.upper - 0.5)
            point = rng.uniform(spec.origin + 0.5, spec.upper - 0.5)
            changes = update_grid(grid, sensor, point, bool(rng.random() < 0.7))
            sdf.apply_changes(grid, changes)
        assert_matches_brute_force(grid, sdf)

    def test_nearest_labels_point_at_live_borders(self):
        rng = np.random.default_rng(9)
        grid, sdf = fresh(dims=(14, 14, 14))
        spec = grid.spec
        for _ in range(60):
            sensor = rng.uniform(spec.origin + 0.5, spec.upper - 0.5)
            point = rng.uniform(spec.origin + 0.5, spec.upper - 0.5)
            sdf.apply_changes(grid, update_grid(grid, sensor, point,
                                                bool(rng.random() < 0.7)))
        resolved = sdf.nearest[sdf.magnitude < TRUNC]
        assert np.all(resolved >= 0)
        assert np.all(sdf.border.reshape(-1)[resolved])

    def test_version_counts_updates(self):
        grid, sdf = fresh()
        v0 = sdf.version
        sdf.apply_changes(grid, ChangeSet())
        assert sdf.version == v0  # empty changeset is a no-op
        center = np.array([4, 4, 4])
        grid.values[tuple(center)] = 255
        sdf.apply_changes(grid, ChangeSet([int(grid.spec.flatten(center))], []))
        assert sdf.version == v0 + 1

    def test_snapshot_isolated_from_later_updates(self):
        grid, sdf = fresh()
        center = np.array([4, 4, 4])
        grid.values[tuple(center)] = 255
        sdf.apply_changes(grid, ChangeSet([int(grid.spec.flatten(center))], []))
        snap = sdf.snapshot(grid)
        before = snap.magnitude.copy()
        other = np.array([10, 10, 10])
        grid.values[tuple(other)] = 255
        sdf.apply_changes(grid, ChangeSet([int(grid.spec.flatten(other))], []))
        assert np.array_equal(snap.magnitude, before)
        assert snap.version < sdf.version
        # snapshot duck-types both query arguments
        assert signed_distance(snap, snap, np.array([4.5, 4.5, 4.5])) == 0.0


class TestQueries:
    def make_world(self):
        grid, sdf = fresh()
        grid.values[:] = 0
        grid.values[8, 8, 8] = 255
        sdf.rebuild(grid)
        return grid, sdf

    def test_fully_free_map_reads_truncation(self):
        grid, sdf = fresh()
        grid.values[:] = 0
        sdf.rebuild(grid)
        pts = np.array([[1.0, 2.0, 3.0], [8.0, 8.0, 8.0]])
        assert np.allclose(signed_distance(sdf, grid, pts), TRUNC)

    def test_border_center_is_zero(self):
        grid, sdf = self.make_world()
        assert signed_distance(sdf, grid, np.array([8.5, 8.5, 8.5])) == 0.0

    def test_occupied_adjacent_to_free_is_negative_small(self):
        grid, sdf = self.make_world()
        value = signed_distance(sdf, grid, np.array([8.5, 8.5, 8.5]))
        assert value <= 0.0
        assert abs(value) <= grid.spec.voxel_size

    def test_sign_from_occupancy_class(self):
        grid, sdf = self.make_world()
        inside = signed_distance(sdf, grid, np.array([8.5, 8.5, 8.5]))
        outside = signed_distance(sdf, grid, np.array([4.5, 8.5, 8.5]))
        assert inside <= 0.0
        assert outside > 0.0

    def test_out_of_bounds_reads_far_free(self):
        grid, sdf = self.make_world()
        assert signed_distance(sdf, grid, np.array([-50.0, 0.0, 0.0])) == TRUNC

    def test_magnitude_continuous_across_faces(self):
        grid, sdf = self.make_world()
        xs = np.linspace(2.0, 7.4, 400)
        pts = np.stack([xs, np.full_like(xs, 8.5), np.full_like(xs, 8.5)], axis=1)
        vals = signed_distance(sdf, grid, pts)
        steps = np.abs(np.diff(vals))
        assert steps.max() < 2.5 * (xs[1] - xs[0])

    def test_gradient_matches_finite_differences_by_construction(self):
        grid, sdf = self.make_world()
        rng = np.random.default_rng(4)
        pts = rng.uniform(2.0, 14.0, (50, 3))
        grad = distance_gradient(sdf, grid, pts)
        h = grid.spec.voxel_size
        for ax in range(3):
            offset = np.zeros(3)
            offset[ax] = h
            expected = (signed_distance(sdf, grid, pts + offset)
                        - signed_distance(sdf, grid, pts - offset)) / (2 * h)
            assert np.allclose(grad[:, ax], expected, atol=1e-12)

    def test_gradient_points_away_from_obstacle(self):
        grid, sdf = self.make_world()
        # obstacle on the -x side of the probe point
        grad = distance_gradient(sdf, grid, np.array([11.5, 8.5, 8.5]))
        assert grad[0] > 0.0

    def test_free_map_gradient_zero(self):
        grid, sdf = fresh()
        grid.values[:] = 0
        sdf.rebuild(grid)
        grad = distance_gradient(sdf, grid, np.array([8.0, 8.0, 8.0]))
        assert np.allclose(grad, 0.0)
