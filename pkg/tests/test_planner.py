import math

import numpy as np
import pytest

from skyshot.core import (
    BoundaryCondition,
    CostWeights,
    ShotParams,
    TimeGrid,
    Trajectory,
    build_diff_operators,
)
from skyshot.costs import occlusion, shot_path
from skyshot.forecast import ActorForecast, ActorMeasurement
from skyshot.mapping.grid import GridSpec, OccupancyGrid
from skyshot.mapping.sdf import SignedDistanceField
from skyshot.planner import (
    PlannerConfig,
    PlanningError,
    PlanningSession,
    PlanResult,
    WorldModel,
    boundary_after,
    optimize,
    warm_start,
)
from skyshot.mapping.heightmap import HeightMap
from skyshot.sim.worlds import gen_sphere_world


def empty_world(dims=(40, 40, 20)):
    grid = OccupancyGrid(GridSpec(dims=dims))
    grid.values[:] = 0
    sdf = SignedDistanceField(grid.spec, truncation=10.0)
    sdf.rebuild(grid)
    return grid, sdf


def straight_actor(tgrid, start=(8.0, 20.0, 0.0), velocity=(1.0, 0.0, 0.0)):
    times = tgrid.times()
    positions = np.asarray(start) + times[:, None] * np.asarray(velocity)
    return ActorForecast(tgrid, times, positions, np.zeros(len(times)))


def quadratic_config(**kwargs):
    defaults = dict(
        weights=CostWeights(0.0, 0.0, 1.0),
        shot=ShotParams(6.0, math.pi, math.radians(80.0)),
        step_gain=1.0,
        eps_curvature=1e-18,
        eps_decrease=1e-16,
        max_iters=50,
    )
    defaults.update(kwargs)
    return PlannerConfig(**defaults)


class TestOptimize:
    def closed_form(self, tgrid, bc, actor, cfg):
        ops = build_diff_operators(tgrid, bc)
        target = shot_path(actor, cfg.shot)
        lam = cfg.weights.lambda_shot
        A = ops.A_total + lam * np.eye(tgrid.waypoint_count)
        b = ops.b_total + lam * (-target.waypoints)
        return -np.linalg.solve(A, b)

    def test_pure_quadratic_reaches_closed_form(self):
        grid, sdf = empty_world()
        tgrid = TimeGrid(10.0, 26)
        bc = BoundaryCondition([5.0, 5.0, 5.0], [0.5, 0.0, 0.0])
        actor = straight_actor(tgrid)
        cfg = quadratic_config()
        init = shot_path(actor, cfg.shot)
        result = optimize(init, bc, actor, sdf, grid, cfg)
        expected = self.closed_form(tgrid, bc, actor, cfg)
        assert np.abs(result.trajectory.waypoints - expected).max() < 1e-6
        assert result.factorizations == 1

    def test_newton_step_converges_in_one_iteration(self):
        grid, sdf = empty_world()
        tgrid = TimeGrid(8.0, 21)
        bc = BoundaryCondition([5.0, 5.0, 5.0])
        actor = straight_actor(tgrid)
        cfg = quadratic_config(max_iters=2)
        init = shot_path(actor, cfg.shot)
        result = optimize(init, bc, actor, sdf, grid, cfg)
        expected = self.closed_form(tgrid, bc, actor, cfg)
        assert np.abs(result.trajectory.waypoints - expected).max() < 1e-9

    def test_starting_at_minimizer_stops_immediately(self):
        grid, sdf = empty_world()
        tgrid = TimeGrid(8.0, 21)
        bc = BoundaryCondition([5.0, 5.0, 5.0])
        actor = straight_actor(tgrid)
        cfg = quadratic_config(eps_curvature=1e-9)
        expected = self.closed_form(tgrid, bc, actor, cfg)
        result = optimize(Trajectory(tgrid, expected), bc, actor, sdf, grid, cfg)
        assert result.iterations == 1
        assert np.allclose(result.trajectory.waypoints, expected)

    def test_descends_in_clutter(self):
        world = gen_sphere_world(15, seed=5)
        tgrid = TimeGrid(10.0, 26)
        actor = straight_actor(tgrid, start=(-15.0, 0.0, 0.0),
                               velocity=(1.2, 0.0, 0.0))
        cfg = PlannerConfig(
            weights=CostWeights(100.0, 4.0, 1.0),
            shot=ShotParams(12.0, math.pi / 2.0, math.radians(78.0)),
            step_gain=2.0,
            max_iters=40,
        )
        init = shot_path(actor, cfg.shot)
        bc = BoundaryCondition(init.waypoints[0])
        result = optimize(init, bc, actor, world.sdf, world.grid, cfg)
        from skyshot.costs import total_cost

        ops = build_diff_operators(tgrid, bc)
        init_report = total_cost(init, actor, cfg.shot, cfg.weights, world.sdf,
                                 world.grid, ops, cfg.eps_obs)
        assert result.report.total <= init_report.total + 1e-12

    def test_deterministic(self):
        world = gen_sphere_world(10, seed=2)
        tgrid = TimeGrid(8.0, 21)
        actor = straight_actor(tgrid, start=(-10.0, 0.0, 0.0))
        cfg = PlannerConfig(
            weights=CostWeights(50.0, 3.0, 1.0),
            shot=ShotParams(10.0, math.pi / 2.0, math.radians(78.0)),
        )
        init = shot_path(actor, cfg.shot)
        bc = BoundaryCondition(init.waypoints[0])
        a = optimize(init, bc, actor, world.sdf, world.grid, cfg)
        b = optimize(init, bc, actor, world.sdf, world.grid, cfg)
        assert np.array_equal(a.trajectory.waypoints, b.trajectory.waypoints)
        assert a.report.total == b.report.total

    def test_corrupt_map_raises_named_error(self):
        grid, sdf = empty_world()
        sdf.magnitude[5, 5, 5] = np.nan
        tgrid = TimeGrid(8.0, 21)
        actor = straight_actor(tgrid, start=(5.0, 12.0, 0.0))
        cfg = PlannerConfig(
            weights=CostWeights(1.0, 1.0, 1.0),
            shot=ShotParams(6.0, math.pi / 2.0, math.radians(80.0)),
        )
        wp = np.tile(np.array([5.5, 5.5, 5.5]), (tgrid.waypoint_count, 1))
        wp += np.linspace(0, 1, tgrid.waypoint_count)[:, None]
        with pytest.raises(PlanningError):
            optimize(Trajectory(tgrid, wp), BoundaryCondition([5.0, 5.0, 5.0]),
                     actor, sdf, grid, cfg)


class TestWarmStart:
    def make_result(self, tgrid, waypoints, bc):
        report = None
        return PlanResult(
            trajectory=Trajectory(tgrid, waypoints),
            headings=np.zeros(tgrid.waypoint_count),
            report=report,
            iterations=1,
            wall_time=0.0,
            factorizations=1,
            time=0.0,
            bc=bc,
        )

    def test_straight_line_extends_straight(self):
        tgrid = TimeGrid(5.0, 11)
        v = np.array([2.0, 1.0, 0.0])
        bc = BoundaryCondition([0.0, 0.0, 5.0], v)
        wp = bc.position + tgrid.waypoint_times()[:, None] * v
        prev = self.make_result(tgrid, wp, bc)
        shifted = warm_start(prev, 2 * tgrid.step)
        expected = bc.position + (tgrid.waypoint_times()[:, None]
                                  + 2 * tgrid.step) * v
        assert np.allclose(shifted.waypoints, expected, atol=1e-9)

    def test_circular_arc_stays_on_circle(self):
        tgrid = TimeGrid(5.0, 11)
        radius, omega = 12.0, 0.25
        t = tgrid.waypoint_times()
        wp = np.stack([radius * np.cos(omega * t), radius * np.sin(omega * t),
                       np.full_like(t, 4.0)], axis=1)
        bc = BoundaryCondition([radius, 0.0, 4.0])
        prev = self.make_result(tgrid, wp, bc)
        shifted = warm_start(prev, 3 * tgrid.step)
        ts = t + 3 * tgrid.step
        expected = np.stack([radius * np.cos(omega * ts),
                             radius * np.sin(omega * ts),
                             np.full_like(ts, 4.0)], axis=1)
        assert np.abs(shifted.waypoints - expected).max() < 1e-6 * radius

    def test_zero_elapsed_identity(self):
        tgrid = TimeGrid(5.0, 11)
        rng = np.random.default_rng(0)
        wp = rng.normal(0, 5, (tgrid.waypoint_count, 3))
        prev = self.make_result(tgrid, wp, BoundaryCondition(rng.normal(size=3)))
        assert np.array_equal(warm_start(prev, 0.0).waypoints, wp)

    def test_two_waypoints_fall_back_to_straight_line(self):
        tgrid = TimeGrid(2.0, 3)
        bc = BoundaryCondition([0.0, 0.0, 0.0])
        wp = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        prev = self.make_result(tgrid, wp, bc)
        shifted = warm_start(prev, tgrid.step)
        assert np.allclose(shifted.waypoints, [[2.0, 0, 0], [3.0, 0, 0]])

    def test_elapsed_out_of_range_rejected(self):
        tgrid = TimeGrid(5.0, 11)
        wp = np.zeros((tgrid.waypoint_count, 3))
        prev = self.make_result(tgrid, wp, BoundaryCondition([0, 0, 0]))
        with pytest.raises(ValueError):
            warm_start(prev, 5.0)

    def test_boundary_state_after_flying(self):
        tgrid = TimeGrid(5.0, 11)
        v = np.array([1.0, -0.5, 0.0])
        bc = BoundaryCondition([2.0, 2.0, 6.0], v)
        wp = bc.position + tgrid.waypoint_times()[:, None] * v
        prev = self.make_result(tgrid, wp, bc)
        after = boundary_after(prev, 4 * tgrid.step)
        assert np.allclose(after.position, bc.position + 4 * tgrid.step * v)
        assert np.allclose(after.velocity, v)
        assert np.allclose(after.acceleration, 0.0, atol=1e-9)


class TestPlanCycle:
    def session(self, cfg, tgrid, start):
        return PlanningSession(cfg, tgrid, BoundaryCondition(start), "person",
                               filter_kwargs={"meas_sigma": 1e-6,
                                              "accel_sigma": 1e-4})

    def world_model(self):
        grid, sdf = empty_world()
        hm = HeightMap(grid.spec.dims[:2], origin=grid.spec.origin[:2],
                       cell_size=1.0)
        return WorldModel(sdf, grid, hm)

    def test_cold_start_initializes_at_shot_path(self):
        tgrid = TimeGrid(6.0, 13)
        cfg = PlannerConfig(
            weights=CostWeights(0.0, 0.0, 1.0),
            shot=ShotParams(5.0, math.pi, math.radians(80.0)),
            max_iters=1,
            eps_curvature=1e30,  # stop immediately: returned plan == init
        )
        session = self.session(cfg, tgrid, [0.0, 0.0, 5.0])
        world = self.world_model()
        m = ActorMeasurement(0.0, (10.0, 10.0, 0.0), 0.3)
        result = session.plan_cycle([m], world, 0.0)
        expected = shot_path(session.forecast(world.hm), cfg.shot)
        assert np.allclose(result.trajectory.waypoints, expected.waypoints)

    def test_stationary_actor_converges_to_orbit_point(self):
        tgrid = TimeGrid(6.0, 13)
        cfg = PlannerConfig(
            weights=CostWeights(0.0, 0.0, 1.0),
            shot=ShotParams(5.0, math.pi, math.radians(90.0)),
            step_gain=1.0,
            max_iters=60,
        )
        session = self.session(cfg, tgrid, [0.0, 0.0, 0.0])
        world = self.world_model()
        actor_pos = np.array([20.0, 20.0, 0.0])
        result = None
        for k in range(6):
            m = ActorMeasurement(float(k), actor_pos, 0.0)
            result = session.plan_cycle([m], world, float(k))
        orbit = actor_pos + np.array([-5.0, 0.0, 0.0])
        assert np.linalg.norm(result.trajectory.waypoints[-1] - orbit) < 0.3

    def test_wall_scene_beats_shot_path_on_occlusion(self):
        grid = OccupancyGrid(GridSpec(dims=(40, 40, 20)))
        grid.values[:] = 0
        grid.values[:, 18:20, :10] = 255
        sdf = SignedDistanceField(grid.spec, truncation=10.0)
        sdf.rebuild(grid)
        hm = HeightMap(grid.spec.dims[:2], origin=grid.spec.origin[:2],
                       cell_size=1.0)
        world = WorldModel(sdf, grid, hm)
        tgrid = TimeGrid(8.0, 21)
        cfg = PlannerConfig(
            weights=CostWeights(50.0, 6.0, 1.0),
            shot=ShotParams(12.0, math.pi / 2.0, math.radians(75.0)),
            step_gain=4.0,
            max_iters=200,
            eps_decrease=1e-9,
        )
        offset = 12.0 * np.array([0.0, math.sin(math.radians(75.0)),
                                  math.cos(math.radians(75.0))])
        start = np.array([3.2, 12.0, 0.0]) + offset
        session = self.session(cfg, tgrid, start)
        session.observe(ActorMeasurement(0.0, (2.0, 12.0, 0.0), 0.0))
        m = ActorMeasurement(1.0, (3.2, 12.0, 0.0), 0.0)
        result = session.plan_cycle([m], world, 1.0)
        actor = session.forecast(world.hm)
        init = shot_path(actor, cfg.shot)
        ops = build_diff_operators(tgrid, result.bc)
        init_occ, _ = occlusion(init, actor, sdf, grid, ops, cfg.eps_obs)
        final_occ, _ = occlusion(result.trajectory, actor, sdf, grid, ops,
                                 cfg.eps_obs)
        assert init_occ > 0.0
        assert final_occ < init_occ
