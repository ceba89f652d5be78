import math

import numpy as np
import pytest

from skyshot.core import (
    BoundaryCondition,
    TimeGrid,
    Trajectory,
    build_diff_operators,
    heading_for,
    wrap_angle,
)


def line_waypoints(grid, p0, velocity):
    t = grid.waypoint_times()[:, None]
    return np.asarray(p0) + t * np.asarray(velocity)


class TestDiffOperators:
    def test_unit_speed_line_velocities(self):
        grid = TimeGrid(horizon=3.0, count=4)  # dt = 1
        bc = BoundaryCondition([0, 0, 0])
        ops = build_diff_operators(grid, bc)
        wp = np.array([[1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        vel = ops.derivatives(wp, 1)
        assert np.allclose(vel, [[1, 0, 0], [1, 0, 0], [1, 0, 0]])

    def test_half_step_doubles_velocities(self):
        bc = BoundaryCondition([0, 0, 0])
        wp = np.array([[1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        full = build_diff_operators(TimeGrid(3.0, 4), bc).derivatives(wp, 1)
        half = build_diff_operators(TimeGrid(1.5, 4), bc).derivatives(wp, 1)
        assert np.allclose(half, 2.0 * full)

    def test_gram_matrices_match_dense_product_oracle(self):
        grid = TimeGrid(horizon=4.5, count=10)
        bc = BoundaryCondition([1.0, -2.0, 3.0], [0.5, 0, 0], [0, 0.1, 0])
        ops = build_diff_operators(grid, bc)
        for d in (1, 2, 3):
            K = ops.K[d]
            dense = np.einsum("ki,kj->ij", K, K)
            assert np.allclose(ops.A[d], dense, atol=1e-12)
            assert np.allclose(ops.b[d], np.einsum("ki,kj->ij", K, ops.e[d]),
                               atol=1e-12)

    def test_first_order_structure(self):
        grid = TimeGrid(horizon=2.0, count=5)
        ops = build_diff_operators(grid, BoundaryCondition([0, 0, 0]))
        K1 = ops.K[1]
        dt = grid.step
        assert np.allclose(np.diag(K1), 1.0 / dt)
        assert np.allclose(np.diag(K1, k=-1), -1.0 / dt)
        assert np.allclose(np.triu(K1, k=1), 0.0)

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValueError):
            TimeGrid(horizon=1.0, count=2)
        with pytest.raises(ValueError):
            TimeGrid(horizon=0.0, count=5)

    def test_smooth_metric_positive_definite_random_grids(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            count = int(rng.integers(3, 40))
            horizon = float(rng.uniform(0.5, 20.0))
            grid = TimeGrid(horizon, count)
            ops = build_diff_operators(grid, BoundaryCondition(rng.normal(size=3)))
            eigmin = np.linalg.eigvalsh(ops.A_total).min()
            assert eigmin > 0.0
            assert np.allclose(ops.A_total, ops.A_total.T)

    def test_constant_velocity_line_has_zero_higher_derivatives(self):
        grid = TimeGrid(horizon=5.0, count=11)
        v = np.array([1.3, -0.4, 0.2])
        bc = BoundaryCondition([2.0, 1.0, -1.0], v, [0, 0, 0])
        ops = build_diff_operators(grid, bc)
        wp = line_waypoints(grid, bc.position, v)
        assert np.allclose(ops.derivatives(wp, 2), 0.0, atol=1e-12)
        assert np.allclose(ops.derivatives(wp, 3), 0.0, atol=1e-11)


class TestHeading:
    def grid(self):
        return TimeGrid(horizon=2.0, count=3)

    def test_quarter_turn(self):
        grid = self.grid()
        traj = Trajectory(grid, [[0, 0, 10], [0, 0, 10]])
        actor = np.array([[1, 1, 0]] * grid.count)
        headings = heading_for(traj, actor)
        assert np.allclose(headings, math.pi / 4)

    def test_pointing_along_negative_x(self):
        grid = self.grid()
        traj = Trajectory(grid, [[5, 0, 10], [5, 0, 10]])
        actor = np.array([[0, 0, 0]] * grid.count)
        assert np.allclose(heading_for(traj, actor), math.pi)

    def test_directly_above_holds_previous(self):
        grid = TimeGrid(horizon=3.0, count=4)
        traj = Trajectory(grid, [[0, 0, 10], [2, 2, 10], [0, 0, 10]])
        actor = np.array([[2, 2, 0]] * grid.count)
        headings = heading_for(traj, actor)
        assert headings[0] == pytest.approx(math.pi / 4)
        # waypoint 1 is right above the actor: carry the previous heading
        assert headings[1] == pytest.approx(headings[0])

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        grid = TimeGrid(horizon=4.0, count=9)
        for _ in range(20):
            wp = rng.normal(0, 5, (grid.waypoint_count, 3))
            actor = rng.normal(0, 5, (grid.count, 3))
            shift = rng.normal(0, 50, 3)
            base = heading_for(Trajectory(grid, wp), actor)
            moved = heading_for(Trajectory(grid, wp + shift), actor + shift)
            assert np.allclose(base, moved)


class TestAngles:
    def test_wrap_angle_range(self):
        rng = np.random.default_rng(0)
        angles = rng.uniform(-50, 50, 1000)
        wrapped = wrap_angle(angles)
        assert np.all(wrapped > -math.pi)
        assert np.all(wrapped <= math.pi)
        assert np.allclose(np.sin(wrapped), np.sin(angles), atol=1e-9)
        assert np.allclose(np.cos(wrapped), np.cos(angles), atol=1e-9)

    def test_wrap_angle_boundary(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
