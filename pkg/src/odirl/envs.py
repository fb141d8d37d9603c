"""Paired source/target environments with identical state/action spaces.

The two members of a pair share the initial-state distribution and differ
only in transition dynamics: the point maze grows a longer wall in the
target domain, the link chain gets actuators masked off. Ground-truth
reward is for evaluation curves only; no learning code reads it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

SOURCE = "source"
TARGET = "target"
_WALL_EPS = 1e-9


@dataclass
class EnvSpec:
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    horizon: int
    goal: np.ndarray | None = None

    def __post_init__(self):
        self.action_low = np.asarray(self.action_low, dtype=np.float64)
        self.action_high = np.asarray(self.action_high, dtype=np.float64)
        if self.state_dim < 1 or self.action_dim < 1:
            raise ValueError("state_dim and action_dim must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (np.all(np.isfinite(self.action_low)) and np.all(np.isfinite(self.action_high))):
            raise ValueError("action bounds must be finite")
        if self.goal is not None:
            self.goal = np.asarray(self.goal, dtype=np.float64)


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    done: bool
    domain_tag: str
    gt_reward: float


@dataclass
class Trajectory:
    transitions: list[Transition] = field(default_factory=list)
    log_probs: np.ndarray | None = None

    def __len__(self):
        return len(self.transitions)

    def states(self) -> np.ndarray:
        return np.array([t.s for t in self.transitions])

    def actions(self) -> np.ndarray:
        return np.array([t.a for t in self.transitions])

    def next_states(self) -> np.ndarray:
        return np.array([t.s_next for t in self.transitions])

    def dones(self) -> np.ndarray:
        return np.array([t.done for t in self.transitions], dtype=bool)

    def gt_return(self) -> float:
        return float(sum(t.gt_reward for t in self.transitions))


def stack_transitions(transitions) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(states, actions, next_states, dones) arrays for a list of transitions."""
    s = np.array([t.s for t in transitions])
    a = np.array([t.a for t in transitions])
    sn = np.array([t.s_next for t in transitions])
    d = np.array([t.done for t in transitions], dtype=bool)
    return s, a, sn, d


# ---------------------------------------------------------------------------
# Point maze
# ---------------------------------------------------------------------------

@dataclass
class PointMazeConfig:
    wall_x: float = 0.5
    wall_length: float = 0.5          # fraction of arena height, hanging from the top
    wall_half_width: float = 0.02
    start_region: tuple = (0.06, 0.50, 0.14, 0.60)   # xlo, ylo, xhi, yhi
    goal_region: tuple = (0.78, 0.43, 1.0, 0.67)
    goal: tuple = (0.9, 0.55)
    goal_radius: float = 0.1
    noise_std: float = 0.01
    action_scale: float = 0.08
    horizon: int = 80

    def validate(self) -> None:
        if not 0.0 < self.wall_length <= 1.0:
            raise ValueError("wall_length must be in (0, 1]")
        xlo, xhi = self.wall_x - self.wall_half_width, self.wall_x + self.wall_half_width
        if not (0.0 < xlo and xhi < 1.0):
            raise ValueError("wall must lie strictly inside the arena horizontally")
        wall = self.wall_box()
        for name, box in (("start_region", self.start_region), ("goal_region", self.goal_region)):
            if _boxes_overlap(box, wall):
                raise ValueError(f"{name} overlaps the wall")
        if self.noise_std < 0 or self.action_scale <= 0 or self.goal_radius <= 0:
            raise ValueError("noise_std, action_scale, goal_radius must be valid")

    def wall_box(self) -> tuple:
        """(xlo, ylo, xhi, yhi) of the wall rectangle; hangs from the top edge."""
        return (
            self.wall_x - self.wall_half_width,
            1.0 - self.wall_length,
            self.wall_x + self.wall_half_width,
            1.0,
        )


def _boxes_overlap(a: tuple, b: tuple) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _point_in_box(p: np.ndarray, box: tuple) -> bool:
    return box[0] < p[0] < box[2] and box[1] < p[1] < box[3]


def _segment_box_entry(p0: np.ndarray, p1: np.ndarray, box: tuple) -> float | None:
    """Earliest t in [0, 1] where p0 + t*(p1-p0) is inside the closed box."""
    d = p1 - p0
    tmin, tmax = 0.0, 1.0
    for axis, (lo, hi) in enumerate(((box[0], box[2]), (box[1], box[3]))):
        if abs(d[axis]) < 1e-300:
            if not (lo <= p0[axis] <= hi):
                return None
        else:
            t1 = (lo - p0[axis]) / d[axis]
            t2 = (hi - p0[axis]) / d[axis]
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
            if tmin > tmax:
                return None
    return tmin


class PointMazeEnv:
    """Position-controlled point mass in the unit square with one wall.

    State is the (x, y) position; actions are bounded displacements with
    additive Gaussian noise. Motion is truncated where the displacement
    segment first meets the wall rectangle or the arena boundary.
    """

    def __init__(self, config: PointMazeConfig, domain_tag: str, seed: int):
        config.validate()
        self.config = config
        self.domain_tag = domain_tag
        self.rng = np.random.default_rng(seed)
        a = config.action_scale
        self.spec = EnvSpec(
            state_dim=2,
            action_dim=2,
            action_low=np.array([-a, -a]),
            action_high=np.array([a, a]),
            horizon=config.horizon,
            goal=np.asarray(config.goal, dtype=np.float64),
        )

    def reset(self) -> np.ndarray:
        xlo, ylo, xhi, yhi = self.config.start_region
        return np.array([self.rng.uniform(xlo, xhi), self.rng.uniform(ylo, yhi)])

    def step(self, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, bool]:
        state = np.asarray(state, dtype=np.float64)
        if not np.all(np.isfinite(state)):
            raise ValueError("non-finite state: simulator diverged")
        a = np.clip(np.asarray(action, dtype=np.float64), self.spec.action_low, self.spec.action_high)
        move = a.copy()
        if self.config.noise_std > 0:
            move += self.rng.normal(0.0, self.config.noise_std, size=2)
        # Clamp to the arena first: motion that would leave the square slides
        # along its boundary, and the slid path must still respect the wall
        # (the wall reaches the top edge, so the edge is not a corridor).
        proposed = np.clip(state + move, 0.0, 1.0)
        wall = self.config.wall_box()
        t_hit = _segment_box_entry(state, proposed, wall)
        if t_hit is not None:
            # Stop at the wall face, nudged outward so states stay strictly outside.
            t_hit = max(0.0, t_hit - _WALL_EPS / max(np.linalg.norm(proposed - state), 1e-12))
            proposed = state + t_hit * (proposed - state)
        nxt = proposed
        if _point_in_box(nxt, wall):  # numerical corner case guard
            nxt = self._project_out(nxt, wall)
        done = bool(np.linalg.norm(nxt - self.spec.goal) <= self.config.goal_radius)
        return nxt, done

    @staticmethod
    def _project_out(p: np.ndarray, box: tuple) -> np.ndarray:
        gaps = [
            (p[0] - box[0], 0, box[0] - _WALL_EPS),
            (box[2] - p[0], 0, box[2] + _WALL_EPS),
            (p[1] - box[1], 1, box[1] - _WALL_EPS),
            (box[3] - p[1], 1, box[3] + _WALL_EPS),
        ]
        gap, axis, value = min(gaps, key=lambda g: g[0])
        out = p.copy()
        out[axis] = value
        return out

    def ground_truth_reward(self, state: np.ndarray) -> float:
        state = np.asarray(state, dtype=np.float64)
        if not np.all(np.isfinite(state)):
            raise ValueError("non-finite state")
        return -float(np.linalg.norm(state - self.spec.goal))

    def is_success(self, state: np.ndarray) -> bool:
        return bool(np.linalg.norm(np.asarray(state) - self.spec.goal) <= self.config.goal_radius)


# ---------------------------------------------------------------------------
# Link chain
# ---------------------------------------------------------------------------

@dataclass
class LinkChainConfig:
    num_joints: int = 3
    torque_limit: float = 1.0
    disabled_mask: tuple = (False, False, False)
    dt: float = 0.05
    damping: float = 0.8
    torque_gain: float = 4.0
    vel_limit: float = 8.0
    init_angle_range: float = 0.1
    init_vel_range: float = 0.05
    goal_angles: tuple = (1.1, -0.6, 0.9)
    success_radius: float = 0.25
    gt_variant: str = "distance"      # "distance" | "forward_velocity"
    horizon: int = 60

    def validate(self) -> None:
        if self.num_joints < 1:
            raise ValueError("num_joints must be positive")
        if len(self.disabled_mask) != self.num_joints:
            raise ValueError("disabled_mask length must equal num_joints")
        if len(self.goal_angles) != self.num_joints:
            raise ValueError("goal_angles length must equal num_joints")
        if self.gt_variant not in ("distance", "forward_velocity"):
            raise ValueError("gt_variant must be 'distance' or 'forward_velocity'")
        if self.torque_limit <= 0 or self.dt <= 0:
            raise ValueError("torque_limit and dt must be positive")


def _chain_tip(angles: np.ndarray) -> np.ndarray:
    """Planar forward kinematics for unit total length, equal links."""
    n = angles.shape[-1]
    cum = np.cumsum(angles, axis=-1)
    link = 1.0 / n
    x = link * np.sum(np.cos(cum), axis=-1)
    y = link * np.sum(np.sin(cum), axis=-1)
    return np.stack([x, y], axis=-1)


class LinkChainEnv:
    """Torque-controlled planar joint chain; masked actuators produce zero torque.

    Each joint integrates a damped second-order servo; the task reward is
    defined on the chain tip via forward kinematics.
    """

    def __init__(self, config: LinkChainConfig, domain_tag: str, seed: int):
        config.validate()
        self.config = config
        self.domain_tag = domain_tag
        self.rng = np.random.default_rng(seed)
        n = config.num_joints
        lim = config.torque_limit
        self.mask = np.asarray(config.disabled_mask, dtype=bool)
        self.goal_tip = _chain_tip(np.asarray(config.goal_angles, dtype=np.float64))
        self.spec = EnvSpec(
            state_dim=2 * n,
            action_dim=n,
            action_low=np.full(n, -lim),
            action_high=np.full(n, lim),
            horizon=config.horizon,
            goal=self.goal_tip,
        )

    def reset(self) -> np.ndarray:
        n = self.config.num_joints
        angles = self.rng.uniform(-self.config.init_angle_range, self.config.init_angle_range, n)
        vels = self.rng.uniform(-self.config.init_vel_range, self.config.init_vel_range, n)
        return np.concatenate([angles, vels])

    def step(self, state: np.ndarray, action: np.ndarray) -> tuple[np.ndarray, bool]:
        state = np.asarray(state, dtype=np.float64)
        if not np.all(np.isfinite(state)):
            raise ValueError("non-finite state: simulator diverged")
        n = self.config.num_joints
        a = np.clip(np.asarray(action, dtype=np.float64), self.spec.action_low, self.spec.action_high)
        a = np.where(self.mask, 0.0, a)
        angles, vels = state[:n], state[n:]
        accel = self.config.torque_gain * a - self.config.damping * vels
        new_vels = np.clip(vels + self.config.dt * accel, -self.config.vel_limit, self.config.vel_limit)
        new_angles = angles + self.config.dt * new_vels
        return np.concatenate([new_angles, new_vels]), False

    def ground_truth_reward(self, state: np.ndarray) -> float:
        state = np.asarray(state, dtype=np.float64)
        if not np.all(np.isfinite(state)):
            raise ValueError("non-finite state")
        n = self.config.num_joints
        angles, vels = state[:n], state[n:]
        if self.config.gt_variant == "forward_velocity":
            cum = np.cumsum(angles)
            cum_vel = np.cumsum(vels)
            return float(-np.sum(np.sin(cum) * cum_vel) / n)  # d/dt of tip x
        return -float(np.linalg.norm(_chain_tip(angles) - self.goal_tip))

    def is_success(self, state: np.ndarray) -> bool:
        n = self.config.num_joints
        tip = _chain_tip(np.asarray(state, dtype=np.float64)[:n])
        return bool(np.linalg.norm(tip - self.goal_tip) <= self.config.success_radius)


def make_pointmaze_pair(
    base: PointMazeConfig,
    source_wall_length: float,
    target_wall_length: float,
    source_seed: int,
    target_seed: int,
) -> tuple[PointMazeEnv, PointMazeEnv]:
    if not target_wall_length > source_wall_length:
        raise ValueError("target wall must be longer than source wall")
    src = PointMazeEnv(replace(base, wall_length=source_wall_length), SOURCE, source_seed)
    tgt = PointMazeEnv(replace(base, wall_length=target_wall_length), TARGET, target_seed)
    return src, tgt


def make_linkchain_pair(
    base: LinkChainConfig,
    target_disabled_mask,
    source_seed: int,
    target_seed: int,
) -> tuple[LinkChainEnv, LinkChainEnv]:
    mask = tuple(bool(m) for m in target_disabled_mask)
    if not any(mask):
        raise ValueError("target disabled_mask needs at least one disabled actuator")
    n = base.num_joints
    src = LinkChainEnv(replace(base, disabled_mask=tuple([False] * n)), SOURCE, source_seed)
    tgt = LinkChainEnv(replace(base, disabled_mask=mask), TARGET, target_seed)
    return src, tgt


# ---------------------------------------------------------------------------
# Rollouts and trajectory CSV
# ---------------------------------------------------------------------------

def rollout(policy, env, horizon: int, rng: np.random.Generator | None = None,
            deterministic: bool = False) -> Trajectory:
    """Collect up to `horizon` transitions from one episode.

    Stops early when the environment reports done. Each transition carries
    the env's domain tag and the evaluation-only ground-truth reward of the
    state it lands in.
    """
    traj = Trajectory()
    log_probs = []
    state = env.reset()
    for _ in range(horizon):
        if deterministic:
            action = policy.act_deterministic(state)
            logp = policy.log_prob(state[None, :], action[None, :])[0]
        else:
            action, logp = policy.sample_action(state, rng)
            logp = policy.log_prob(state[None, :], action[None, :])[0]
        nxt, done = env.step(state, action)
        traj.transitions.append(
            Transition(
                s=state.copy(),
                a=np.asarray(action, dtype=np.float64).copy(),
                s_next=nxt.copy(),
                done=done,
                domain_tag=env.domain_tag,
                gt_reward=env.ground_truth_reward(nxt),
            )
        )
        log_probs.append(float(logp))
        state = nxt
        if done:
            break
    traj.log_probs = np.array(log_probs)
    return traj


def trajectory_header(state_dim: int, action_dim: int) -> list[str]:
    cols = [f"s_{i}" for i in range(state_dim)]
    cols += [f"a_{i}" for i in range(action_dim)]
    cols += [f"s_next_{i}" for i in range(state_dim)]
    cols += ["done", "domain_tag"]
    return cols


def write_trajectory_csv(path, trajectories) -> None:
    """Dump transitions as CSV with the s_*, a_*, s_next_*, done, domain_tag layout."""
    trajs = trajectories if isinstance(trajectories, (list, tuple)) else [trajectories]
    first = trajs[0].transitions[0]
    header = trajectory_header(first.s.shape[0], first.a.shape[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for traj in trajs:
            for t in traj.transitions:
                row = [format(v, ".17g") for v in t.s]
                row += [format(v, ".17g") for v in t.a]
                row += [format(v, ".17g") for v in t.s_next]
                row += [int(t.done), t.domain_tag]
                writer.writerow(row)
