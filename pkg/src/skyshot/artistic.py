"""Hand-crafted aesthetic reward and a contextual action-value shot selector.

The reward scores each synthesized frame on tilt angle and actor presence,
averages frames into a step reward, and discounts by how long the current
shot type has been held (ideal: two consecutive 6 s steps).  The selector
learns a linear action-value function over a compact context: a 9x9
actor-centered elevation patch, the current shot type, and the consecutive
count, trained by temporal-difference updates on an experience replay
buffer.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

TILT_OPT_DEG = 15.0
TILT_TOL_DEG = 10.0
PRESENCE_MIN = 0.05
PRESENCE_MAX = 0.10
BAD_FRAME_REWARD = -0.5
CRASH_REWARD = -1.0

IDEAL_SHOT_COUNT = 2
DISCOUNT_CURVE = 0.15
DISCOUNT_FLOOR = 0.1

SHOT_TYPES = ("left", "right", "front", "back")
SHOT_YAWS = (math.pi / 2.0, -math.pi / 2.0, 0.0, math.pi)

PATCH_SIZE = 9
FEATURE_DIM = PATCH_SIZE * PATCH_SIZE + len(SHOT_TYPES) + 1
PATCH_HEIGHT_SCALE = 10.0
COUNT_SCALE = 5.0


@dataclass(frozen=True)
class FrameSample:
    """One synthesized camera frame: tilt (degrees), presence ratio, visible."""

    tilt_deg: float
    presence: float
    visible: bool


def frame_reward(frame: FrameSample) -> float:
    """1 at the ideal tilt, linear to 0 at +-10 deg, -0.5 beyond; presence
    out of [0.05, 0.10] or a hidden actor forces -0.5."""
    if not frame.visible:
        return BAD_FRAME_REWARD
    if not PRESENCE_MIN <= frame.presence <= PRESENCE_MAX:
        return BAD_FRAME_REWARD
    offset = abs(frame.tilt_deg - TILT_OPT_DEG)
    if offset > TILT_TOL_DEG:
        return BAD_FRAME_REWARD
    return 1.0 - offset / TILT_TOL_DEG


def step_reward(frames) -> float:
    """Mean frame reward over one control step; no frames counts as lost."""
    frames = list(frames)
    if not frames:
        return BAD_FRAME_REWARD
    return sum(frame_reward(f) for f in frames) / len(frames)


def duration_discount(count: int) -> float:
    """Repetition discount: peaks at two consecutive steps, falls off
    quadratically, floored at 0.1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return max(DISCOUNT_FLOOR, 1.0 - DISCOUNT_CURVE * (count - IDEAL_SHOT_COUNT) ** 2)


def art_reward(r_step: float, alpha: float, crashed: bool) -> float:
    """Discount positive step rewards, amplify negative ones; crash is -1."""
    if crashed:
        return CRASH_REWARD
    if r_step >= 0:
        return r_step * alpha
    return r_step / alpha


@dataclass(frozen=True)
class ShotContext:
    """Learner observation: local elevation, current shot, consecutive count.

    The patch is a 9x9 grid of terrain heights relative to the actor's cell,
    aligned with the actor's heading (row axis ahead, column axis left).
    """

    patch: np.ndarray
    shot_type: int
    count: int

    def __post_init__(self):
        patch = np.asarray(self.patch, dtype=float).reshape(PATCH_SIZE, PATCH_SIZE).copy()
        patch.setflags(write=False)
        object.__setattr__(self, "patch", patch)
        if not 0 <= self.shot_type < len(SHOT_TYPES):
            raise ValueError(f"shot_type must be 0..3, got {self.shot_type}")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    def features(self) -> np.ndarray:
        patch = np.clip(self.patch / PATCH_HEIGHT_SCALE, -1.0, 1.0).ravel()
        onehot = np.zeros(len(SHOT_TYPES))
        onehot[self.shot_type] = 1.0
        return np.concatenate([patch, onehot, [self.count / COUNT_SCALE]])


class QFunction:
    """Linear action-value function over the context features.

    Evaluation is deterministic; ties in the argmax resolve to the lowest
    action index.  TD updates are projection steps (normalized by |phi|^2),
    so with lr=1 and gamma=0 a single update pins Q(c, a) to the reward.
    """

    def __init__(self, learning_rate: float = 0.2, gamma: float = 0.9,
                 epsilon: float = 0.1):
        self.weights = np.zeros((len(SHOT_TYPES), FEATURE_DIM))
        self.learning_rate = float(learning_rate)
        self.gamma = float(gamma)
        self.epsilon = float(epsilon)

    def values(self, ctx: ShotContext) -> np.ndarray:
        return self.weights @ ctx.features()

    def best_action(self, ctx: ShotContext) -> int:
        return int(np.argmax(self.values(ctx)))

    def td_update(self, ctx: ShotContext, action: int, target: float) -> None:
        phi = ctx.features()
        error = target - float(self.weights[action] @ phi)
        norm = float(phi @ phi)
        if norm > 0:
            self.weights[action] += self.learning_rate * error * phi / norm

    def save(self, path) -> None:
        payload = {
            "weights": self.weights.tolist(),
            "learning_rate": self.learning_rate,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "QFunction":
        with open(path) as fh:
            payload = json.load(fh)
        q = cls(payload["learning_rate"], payload["gamma"], payload["epsilon"])
        weights = np.asarray(payload["weights"], dtype=float)
        if weights.shape != q.weights.shape:
            raise ValueError(f"stored weights have shape {weights.shape}")
        q.weights = weights
        return q


def select_shot(q: QFunction, ctx: ShotContext, explore: bool,
                rng: np.random.Generator | None = None) -> int:
    """Greedy action, or epsilon-greedy when exploring."""
    if explore:
        if rng is None:
            raise ValueError("exploration requires a generator")
        if rng.random() < q.epsilon:
            return int(rng.integers(len(SHOT_TYPES)))
    return q.best_action(ctx)


def shot_yaw(action: int) -> float:
    """Relative yaw fed to the shot parameters for a discrete shot type."""
    return SHOT_YAWS[action]


@dataclass(frozen=True)
class Transition:
    context: ShotContext
    action: int
    reward: float
    next_context: ShotContext
    terminal: bool = False


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling."""

    def __init__(self, capacity: int = 2000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self._items: deque = deque(maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self._items)

    def add(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, batch: int, rng: np.random.Generator) -> list:
        idx = rng.integers(len(self._items), size=batch)
        return [self._items[int(i)] for i in idx]


def q_update(q: QFunction, buffer: ReplayBuffer, batch: int,
             rng: np.random.Generator) -> QFunction:
    """One replay pass: pull a uniform batch and take TD steps toward
    r + gamma * max_a' Q(c', a') (episode-final transitions toward r alone).
    Empty buffer is a no-op."""
    if len(buffer) == 0:
        return q
    for tr in buffer.sample(batch, rng):
        bootstrap = 0.0 if tr.terminal else float(np.max(q.values(tr.next_context)))
        q.td_update(tr.context, tr.action, tr.reward + q.gamma * bootstrap)
    return q
