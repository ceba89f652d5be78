"""Actor state filtering and motion forecasting.

Two filters cover the two actor types: a linear constant-velocity Kalman
filter for people (no kinematic constraints, planar motion) and an extended
Kalman filter with a constant-speed / constant-curvature bicycle state
[x, y, psi, v, kappa] for vehicles.  Both forecast over the planner's time
grid; the actor's z is read from the terrain height map at each forecast
sample.

Filter states are immutable values: updates return new states, so a state
can be handed across threads but never shared mutably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from skyshot.core import Pose, TimeGrid, wrap_angle
from skyshot.mapping.heightmap import HeightMap

SPEED_EPS = 1e-9


@dataclass(frozen=True)
class ActorMeasurement:
    time: float
    position: np.ndarray
    heading: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3).copy()
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class ActorForecast:
    """Uniformly sampled predicted actor poses over the planner's time grid."""

    grid: TimeGrid
    times: np.ndarray
    positions: np.ndarray
    headings: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).copy()
        if len(times) != self.grid.count:
            raise ValueError(
                f"forecast needs {self.grid.count} samples, got {len(times)}"
            )
        positions = np.asarray(self.positions, dtype=float).reshape(len(times), 3).copy()
        headings = wrap_angle(np.asarray(self.headings, dtype=float).reshape(len(times)))
        for arr in (times, positions, headings):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "headings", headings)

    def __len__(self) -> int:
        return len(self.times)

    def pose_at(self, index: int) -> Pose:
        return Pose(self.positions[index], float(self.headings[index]))


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def _joseph_update(mean, cov, innovation, H, R):
    S = H @ cov @ H.T + R
    K = cov @ H.T @ np.linalg.inv(S)
    mean = mean + K @ innovation
    ikh = np.eye(len(mean)) - K @ H
    cov = _symmetrize(ikh @ cov @ ikh.T + K @ R @ K.T)
    return mean, cov


# -- person: linear constant-velocity filter ---------------------------------


@dataclass(frozen=True)
class PersonFilterState:
    """[x, y, vx, vy] with covariance; z is terrain-following."""

    time: float
    mean: np.ndarray
    cov: np.ndarray
    accel_sigma: float = 1.0
    meas_sigma: float = 0.5
    last_heading: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(4).copy()
        cov = np.asarray(self.cov, dtype=float).reshape(4, 4).copy()
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def pose(self) -> Pose:
        vx, vy = self.mean[2], self.mean[3]
        heading = (
            math.atan2(vy, vx)
            if math.hypot(vx, vy) > SPEED_EPS
            else self.last_heading
        )
        return Pose(np.array([self.mean[0], self.mean[1], 0.0]), heading)


def kf_init(
    m: ActorMeasurement,
    accel_sigma: float = 1.0,
    meas_sigma: float = 0.5,
    velocity_prior_sigma: float = 5.0,
) -> PersonFilterState:
    """Adopt the first measurement's position; velocity stays at the prior."""
    mean = np.array([m.position[0], m.position[1], 0.0, 0.0])
    cov = np.diag(
        [meas_sigma**2, meas_sigma**2, velocity_prior_sigma**2, velocity_prior_sigma**2]
    )
    return PersonFilterState(
        time=m.time,
        mean=mean,
        cov=cov,
        accel_sigma=accel_sigma,
        meas_sigma=meas_sigma,
        last_heading=m.heading if m.heading is not None else 0.0,
    )


def _cv_transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = dt
    F[1, 3] = dt
    return F


def _cv_process_noise(dt: float, accel_sigma: float) -> np.ndarray:
    # piecewise white-noise acceleration, per axis
    q11 = dt**4 / 4.0
    q12 = dt**3 / 2.0
    q22 = dt**2
    Q = np.zeros((4, 4))
    for pos, vel in ((0, 2), (1, 3)):
        Q[pos, pos] = q11
        Q[pos, vel] = Q[vel, pos] = q12
        Q[vel, vel] = q22
    return Q * accel_sigma**2


def kf_update(state: PersonFilterState, m: ActorMeasurement) -> PersonFilterState:
    """Constant-velocity predict over the elapsed time, then position correct."""
    if m.time < state.time:
        raise ValueError(
            f"measurement time {m.time} precedes filter time {state.time}"
        )
    dt = m.time - state.time
    F = _cv_transition(dt)
    mean = F @ state.mean
    cov = _symmetrize(F @ state.cov @ F.T + _cv_process_noise(dt, state.accel_sigma))

    H = np.zeros((2, 4))
    H[0, 0] = H[1, 1] = 1.0
    R = np.eye(2) * state.meas_sigma**2
    innovation = m.position[:2] - H @ mean
    mean, cov = _joseph_update(mean, cov, innovation, H, R)

    return replace(
        state,
        time=m.time,
        mean=mean,
        cov=cov,
        last_heading=m.heading if m.heading is not None else state.last_heading,
    )


def kf_forecast(
    state: PersonFilterState, grid: TimeGrid, hm: HeightMap
) -> ActorForecast:
    """Extrapolate at constant velocity; z from terrain, heading from velocity."""
    times = state.time + grid.times()
    x, y, vx, vy = state.mean
    offsets = grid.times()
    xs = x + vx * offsets
    ys = y + vy * offsets
    zs = hm.height_at(np.stack([xs, ys], axis=1))
    heading = (
        math.atan2(vy, vx) if math.hypot(vx, vy) > SPEED_EPS else state.last_heading
    )
    return ActorForecast(
        grid=grid,
        times=times,
        positions=np.stack([xs, ys, zs], axis=1),
        headings=np.full(grid.count, heading),
    )


# -- vehicle: bicycle EKF -----------------------------------------------------


@dataclass(frozen=True)
class VehicleFilterState:
    """[x, y, psi, v, kappa] with covariance; arc-exact transition."""

    time: float
    mean: np.ndarray
    cov: np.ndarray
    sigma_v: float = 0.5
    sigma_kappa: float = 0.05
    meas_sigma: float = 0.5
    heading_sigma: float = 0.2

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(5).copy()
        cov = np.asarray(self.cov, dtype=float).reshape(5, 5).copy()
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def pose(self) -> Pose:
        return Pose(np.array([self.mean[0], self.mean[1], 0.0]), float(self.mean[2]))


def ekf_init(
    m: ActorMeasurement,
    sigma_v: float = 0.5,
    sigma_kappa: float = 0.05,
    meas_sigma: float = 0.5,
    heading_sigma: float = 0.2,
) -> VehicleFilterState:
    mean = np.array(
        [m.position[0], m.position[1], m.heading if m.heading is not None else 0.0,
         0.0, 0.0]
    )
    heading_var = heading_sigma**2 if m.heading is not None else math.pi**2
    cov = np.diag([meas_sigma**2, meas_sigma**2, heading_var, 25.0, 0.25])
    return VehicleFilterState(
        time=m.time,
        mean=mean,
        cov=cov,
        sigma_v=sigma_v,
        sigma_kappa=sigma_kappa,
        meas_sigma=meas_sigma,
        heading_sigma=heading_sigma,
    )


_KAPPA_EPS = 1e-9


def _arc_step(x, y, psi, v, kappa, dt):
    """Closed-form constant speed / constant curvature motion over dt."""
    theta = v * kappa * dt
    psi1 = psi + theta
    if abs(kappa) > _KAPPA_EPS:
        x1 = x + (math.sin(psi1) - math.sin(psi)) / kappa
        y1 = y - (math.cos(psi1) - math.cos(psi)) / kappa
    else:
        x1 = x + v * math.cos(psi) * dt
        y1 = y + v * math.sin(psi) * dt
    return x1, y1, psi1


def _arc_jacobian(psi, v, kappa, dt) -> np.ndarray:
    theta = v * kappa * dt
    psi1 = psi + theta
    F = np.eye(5)
    if abs(kappa) > _KAPPA_EPS:
        F[0, 2] = (math.cos(psi1) - math.cos(psi)) / kappa
        F[0, 3] = math.cos(psi1) * dt
        F[0, 4] = (math.cos(psi1) * v * dt * kappa - (math.sin(psi1) - math.sin(psi))) / kappa**2
        F[1, 2] = (math.sin(psi1) - math.sin(psi)) / kappa
        F[1, 3] = math.sin(psi1) * dt
        F[1, 4] = (math.sin(psi1) * v * dt * kappa + (math.cos(psi1) - math.cos(psi))) / kappa**2
    else:
        F[0, 2] = -v * math.sin(psi) * dt
        F[0, 3] = math.cos(psi) * dt
        F[0, 4] = -0.5 * v**2 * dt**2 * math.sin(psi)
        F[1, 2] = v * math.cos(psi) * dt
        F[1, 3] = math.sin(psi) * dt
        F[1, 4] = 0.5 * v**2 * dt**2 * math.cos(psi)
    F[2, 3] = kappa * dt
    F[2, 4] = v * dt
    return F


def _bicycle_process_noise(state: VehicleFilterState, dt: float) -> np.ndarray:
    # small position/heading jitter keeps the covariance well conditioned
    jitter = 1e-4
    return np.diag(
        [jitter * dt, jitter * dt, jitter * dt,
         state.sigma_v**2 * dt, state.sigma_kappa**2 * dt]
    )


def ekf_update(state: VehicleFilterState, m: ActorMeasurement) -> VehicleFilterState:
    """Arc-exact predict with Jacobian covariance propagation, then correct
    with position (and heading when the measurement carries one)."""
    if m.time < state.time:
        raise ValueError(
            f"measurement time {m.time} precedes filter time {state.time}"
        )
    dt = m.time - state.time
    x, y, psi, v, kappa = state.mean
    x1, y1, psi1 = _arc_step(x, y, psi, v, kappa, dt)
    mean = np.array([x1, y1, psi1, v, kappa])
    F = _arc_jacobian(psi, v, kappa, dt)
    cov = _symmetrize(F @ state.cov @ F.T + _bicycle_process_noise(state, dt))

    if m.heading is None:
        H = np.zeros((2, 5))
        H[0, 0] = H[1, 1] = 1.0
        R = np.eye(2) * state.meas_sigma**2
        innovation = m.position[:2] - mean[:2]
    else:
        H = np.zeros((3, 5))
        H[0, 0] = H[1, 1] = H[2, 2] = 1.0
        R = np.diag([state.meas_sigma**2, state.meas_sigma**2,
                     state.heading_sigma**2])
        innovation = np.array(
            [m.position[0] - mean[0], m.position[1] - mean[1],
             wrap_angle(m.heading - mean[2])]
        )
    mean, cov = _joseph_update(mean, cov, innovation, H, R)
    mean = mean.copy()
    mean[3] = max(mean[3], 0.0)
    return replace(state, time=m.time, mean=mean, cov=cov)


def ekf_forecast(
    state: VehicleFilterState, grid: TimeGrid, hm: HeightMap
) -> ActorForecast:
    """Roll the bicycle arc forward over the grid; z from terrain."""
    x, y, psi, v, kappa = state.mean
    times = state.time + grid.times()
    xs = np.empty(grid.count)
    ys = np.empty(grid.count)
    psis = np.empty(grid.count)
    for i, t in enumerate(grid.times()):
        xs[i], ys[i], psis[i] = _arc_step(x, y, psi, v, kappa, float(t))
    zs = hm.height_at(np.stack([xs, ys], axis=1))
    return ActorForecast(
        grid=grid,
        times=times,
        positions=np.stack([xs, ys, zs], axis=1),
        headings=psis,
    )


# -- file formats --------------------------------------------------------------


def read_measurements_csv(path) -> list:
    """Read ``t,x,y,z[,psi]`` lines into measurements."""
    import csv as _csv

    out = []
    with open(path, newline="") as fh:
        for row in _csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            t, x, y, z = (float(v) for v in row[:4])
            heading = float(row[4]) if len(row) > 4 and row[4] != "" else None
            out.append(ActorMeasurement(time=t, position=(x, y, z), heading=heading))
    return out


def write_forecast_csv(path, forecast: ActorForecast) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["t", "x", "y", "z", "psi"])
        for t, p, h in zip(forecast.times, forecast.positions, forecast.headings):
            writer.writerow([repr(float(t)), repr(float(p[0])), repr(float(p[1])),
                             repr(float(p[2])), repr(float(h))])
