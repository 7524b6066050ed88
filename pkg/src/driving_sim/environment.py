"""Deterministic 2D driving environment

The ego vehicle follows a kinematic bicycle model on a multi-lane road with
lane-following traffic and static accident obstacles. Each step returns the
49-dimensional observation, the dense-plus-terminal reward and a sparse cost
(+1 for a collision, +1 for leaving the road).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.config.config import CHECKPOINT_NORMALIZER, CHECKPOINT_SLOTS, LIDAR_RAYS, OBSERVATION_DIM
from src.driving_sim.lidar import lidar_scan
from src.driving_sim.traffic import ObstacleField, TrafficState, advance_traffic, populate_traffic
from src.utils.errors import EpisodeTerminatedError
from src.utils.seeding import make_rng

logger = logging.getLogger(__name__)

EGO_BLOCK = slice(LIDAR_RAYS, LIDAR_RAYS + 9)
CHECKPOINT_BLOCK = slice(LIDAR_RAYS + 9, OBSERVATION_DIM)

# Declared bounds per observation slot
OBSERVATION_LOW = np.concatenate([
    np.zeros(LIDAR_RAYS),
    np.array([-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0]),
    np.zeros(CHECKPOINT_SLOTS),
])
OBSERVATION_HIGH = np.ones(OBSERVATION_DIM)


class EpisodeStatus(str, Enum):
    RUNNING = "running"
    SUCCESS = "success"
    DEPARTURE = "lane-departure"
    MAX_STEPS = "max-steps"


@dataclass(frozen=True)
class RewardTerms:
    """Per-step reward components before weighting"""
    distance: float
    speed: float
    yaw: float
    steering: float
    terminal: float


@dataclass(frozen=True)
class StepInfo:
    collision: bool
    departure: bool
    progress: float
    lateral: float
    x: float
    y: float
    heading: float
    speed: float
    steering: float
    terms: RewardTerms


@dataclass(frozen=True)
class StepOutcome:
    observation: np.ndarray
    reward: float
    cost: int
    feasible: bool
    status: EpisodeStatus
    info: StepInfo

    @property
    def done(self):
        return self.status is not EpisodeStatus.RUNNING


@dataclass
class WorldState:
    """Mutable simulation state owned by one DrivingEnv"""
    x: float
    y: float
    heading: float
    speed: float
    steering: float
    yaw_rate: float
    progress: float
    lateral: float
    traffic: TrafficState
    obstacles: ObstacleField
    prev_action: np.ndarray = field(default_factory=lambda: np.zeros(2))
    step_count: int = 0
    status: EpisodeStatus = EpisodeStatus.RUNNING


def wrap_angle(angle):
    """Wrap to [-pi, pi)"""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def heading_rate(speed, steering, wheelbase):
    """Kinematic bicycle yaw rate (v / L) * tan(delta)"""
    return speed / wheelbase * math.tan(steering)


def acceleration_from_command(command, accel_min, accel_max):
    """Map a command in [-1, 1] to [accel_min, accel_max] with 0 -> 0"""
    return command * accel_max if command >= 0.0 else -command * accel_min


def bicycle_step(x, y, heading, speed, steering, acceleration, dt, wheelbase, max_speed):
    """One explicit-Euler step of the kinematic bicycle model

    Position and heading advance with the speed at the start of the step; the
    speed is then updated and clipped to [0, max_speed].

    Returns:
        tuple: (x, y, heading, speed, yaw_rate)
    """
    rate = heading_rate(speed, steering, wheelbase)
    x = x + speed * math.cos(heading) * dt
    y = y + speed * math.sin(heading) * dt
    heading = heading + rate * dt
    speed = min(max(speed + acceleration * dt, 0.0), max_speed)
    return x, y, heading, speed, rate


def compute_reward(terms, env_config):
    """Weighted dense reward plus the unweighted terminal reward"""
    return (env_config.reward_distance * terms.distance
            + env_config.reward_speed * terms.speed
            + env_config.reward_yaw * terms.yaw
            + env_config.reward_steering * terms.steering
            + terms.terminal)


def is_infeasible(cost):
    """A state is infeasible exactly when the step that reached it cost something

    Collisions and road departures both cost 1, so either makes the reached
    state infeasible. Works elementwise on cost arrays.
    """
    return np.asarray(cost) > 0


def detect_collision(world, road_map, ego_radius):
    """True when the ego disc touches a traffic vehicle or an obstacle disc"""
    ego = np.array([world.x, world.y])
    obstacles = world.obstacles
    if len(obstacles):
        gaps = np.hypot(obstacles.centers[:, 0] - ego[0], obstacles.centers[:, 1] - ego[1])
        if np.any(gaps <= obstacles.radii + ego_radius):
            return True
    traffic = world.traffic
    if traffic.active_count:
        x, y, heading = traffic.poses(road_map)
        rel_x, rel_y = ego[0] - x, ego[1] - y
        local_x = rel_x * np.cos(heading) + rel_y * np.sin(heading)
        local_y = -rel_x * np.sin(heading) + rel_y * np.cos(heading)
        out_x = local_x - np.clip(local_x, -traffic.half_length, traffic.half_length)
        out_y = local_y - np.clip(local_y, -traffic.half_width, traffic.half_width)
        if np.any(out_x * out_x + out_y * out_y <= ego_radius * ego_radius):
            return True
    return False


def build_observation(world, road_map, env_config):
    """Assemble the 49-dimensional observation

    Layout: 30 lidar readings, 9 ego-state slots, 10 checkpoint distances.
    Ego slots: steering / max_steering, heading error to the road tangent / pi,
    yaw rate (rad/s, clipped), v / v_max, left and right edge distance / road
    half width, previous steer and acceleration commands, offset from the
    nearest lane center / lane width.
    """
    lidar = lidar_scan(world, road_map, env_config.lidar_range)

    _, _, tangent = road_map.point_at(world.progress)
    half_width = road_map.half_width
    lane_center = road_map.lane_offsets[road_map.lane_of(world.lateral)]
    ego_block = np.array([
        world.steering / env_config.max_steering,
        wrap_angle(world.heading - float(tangent)) / math.pi,
        np.clip(world.yaw_rate, -1.0, 1.0),
        world.speed / env_config.max_speed,
        np.clip((half_width - world.lateral) / half_width, 0.0, 1.0),
        np.clip((half_width + world.lateral) / half_width, 0.0, 1.0),
        world.prev_action[0],
        world.prev_action[1],
        np.clip((world.lateral - lane_center) / road_map.lane_width, -1.0, 1.0),
    ])

    checkpoint_block = np.zeros(CHECKPOINT_SLOTS)
    first = int(np.searchsorted(road_map.checkpoints, world.progress - 1e-6, side="left"))
    upcoming = road_map.checkpoint_points[first:first + CHECKPOINT_SLOTS]
    if len(upcoming):
        distances = np.hypot(upcoming[:, 0] - world.x, upcoming[:, 1] - world.y)
        checkpoint_block[:len(upcoming)] = np.clip(distances / CHECKPOINT_NORMALIZER, 0.0, 1.0)

    return np.concatenate([lidar, ego_block, checkpoint_block])


class DrivingEnv:
    """One driving episode at a time on a fixed road map

    Args:
        road_map (RoadMap): the road to drive
        env_config (EnvConfig): vehicle, sensor and reward constants
        traffic_config (TrafficConfig): traffic density, accidents and behavior
        seed (int): traffic placement and lane-change seed
    """

    def __init__(self, road_map, env_config, traffic_config, seed=0):
        self.road_map = road_map
        self.env_config = env_config
        self.traffic_config = traffic_config
        self.seed = int(seed)
        self.world = None
        self._rng = None
        self.logger = logging.getLogger(__name__)

    def reset(self, seed=None):
        """Start a new episode at the route start in the middle lane

        Returns:
            numpy.ndarray: the initial observation
        """
        if seed is not None:
            self.seed = int(seed)
        traffic, obstacles = populate_traffic(
            self.road_map, self.traffic_config.density, self.traffic_config.accident_prob, self.seed,
            speed=self.traffic_config.speed, spawn_clearance=self.traffic_config.spawn_clearance)
        self._rng = make_rng(self.seed, 1)
        lateral = float(self.road_map.lane_offsets[self.road_map.lane_count // 2])
        x, y, heading = self.road_map.point_at(0.0, lateral)
        self.world = WorldState(x=float(x), y=float(y), heading=float(heading), speed=0.0, steering=0.0,
                                yaw_rate=0.0, progress=0.0, lateral=lateral, traffic=traffic, obstacles=obstacles)
        return self.observe()

    def observe(self):
        return build_observation(self.world, self.road_map, self.env_config)

    def step(self, action):
        """Advance the episode by one control step

        Args:
            action (array-like): [steer_cmd, accel_cmd], clipped to [-1, 1]

        Returns:
            StepOutcome: next observation, reward, cost, feasibility and status

        Raises:
            EpisodeTerminatedError: if the episode has not been reset or has ended
        """
        world = self.world
        if world is None or world.status is not EpisodeStatus.RUNNING:
            raise EpisodeTerminatedError("step() called on a terminated episode; call reset() first")
        cfg = self.env_config
        command = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        steering = float(command[0]) * cfg.max_steering
        acceleration = acceleration_from_command(float(command[1]), cfg.accel_min, cfg.accel_max)
        previous_progress, previous_heading = world.progress, world.heading

        world.x, world.y, world.heading, world.speed, world.yaw_rate = bicycle_step(
            world.x, world.y, world.heading, world.speed, steering, acceleration,
            cfg.dt, cfg.wheelbase, cfg.max_speed)
        world.steering = steering
        world.prev_action = command.copy()

        ego_lane = int(self.road_map.lane_of(world.lateral))
        advance_traffic(world.traffic, world.obstacles, self.road_map, previous_progress, ego_lane,
                        cfg.dt, self.traffic_config, self._rng)

        world.progress, world.lateral, _ = self.road_map.project(world.x, world.y)
        collision = detect_collision(world, self.road_map, cfg.ego_radius)
        departure = abs(world.lateral) > self.road_map.half_width
        success = (not departure) and world.progress >= self.road_map.route_length
        cost = int(collision) + int(departure)

        terminal = cfg.departure_reward if departure else (cfg.success_reward if success else 0.0)
        terms = RewardTerms(
            distance=world.progress - previous_progress,
            speed=world.speed / cfg.max_speed,
            yaw=abs(wrap_angle(world.heading - previous_heading)),
            steering=abs(steering) / cfg.max_steering,
            terminal=terminal,
        )
        reward = compute_reward(terms, cfg)

        world.step_count += 1
        if departure:
            world.status = EpisodeStatus.DEPARTURE
        elif success:
            world.status = EpisodeStatus.SUCCESS
        elif world.step_count >= cfg.max_steps:
            world.status = EpisodeStatus.MAX_STEPS

        info = StepInfo(collision=collision, departure=departure, progress=world.progress, lateral=world.lateral,
                        x=world.x, y=world.y, heading=world.heading, speed=world.speed, steering=steering,
                        terms=terms)
        if world.status is not EpisodeStatus.RUNNING:
            self.logger.debug(f"Episode ended: {world.status.value} after {world.step_count} steps")
        return StepOutcome(observation=self.observe(), reward=float(reward), cost=cost,
                           feasible=not is_infeasible(cost), status=world.status, info=info)
