"""Traffic vehicles and accident obstacles"""

import logging
from dataclasses import dataclass

import numpy as np

from src.config.config import SPAWN_CLEARANCE, TRAFFIC_SPEED

logger = logging.getLogger(__name__)

VEHICLE_HALF_LENGTH = 2.25  # m
VEHICLE_HALF_WIDTH = 0.9  # m
MIN_VEHICLE_GAP = 2 * VEHICLE_HALF_LENGTH + 2.0  # m between centers at placement
LATERAL_SPEED = 1.0  # m/s while changing lanes


@dataclass
class TrafficState:
    """Lane-following vehicles stored as parallel arrays (one entry per vehicle)"""
    s: np.ndarray
    lane: np.ndarray
    offset: np.ndarray
    speed: np.ndarray
    target_speed: np.ndarray
    active: np.ndarray
    half_length: float = VEHICLE_HALF_LENGTH
    half_width: float = VEHICLE_HALF_WIDTH

    def __len__(self):
        return int(self.s.shape[0])

    @property
    def active_count(self):
        return int(np.count_nonzero(self.active))

    def poses(self, road_map):
        """(x, y, heading) arrays of the active vehicles"""
        idx = np.flatnonzero(self.active)
        return road_map.point_at(self.s[idx], self.offset[idx])


@dataclass
class ObstacleField:
    """Static accident discs: centers (K, 2), radii (K,), route position s and lane"""
    centers: np.ndarray
    radii: np.ndarray
    s: np.ndarray
    lane: np.ndarray

    def __len__(self):
        return int(self.radii.shape[0])

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64))


def _segment_starts(road_map):
    starts = np.cumsum([0.0] + [seg.arc_length for seg in road_map.segments])
    return starts[:-1], starts[1:]


def populate_traffic(road_map, density, accident_prob, seed, speed=TRAFFIC_SPEED, spawn_clearance=SPAWN_CLEARANCE):
    """Place traffic vehicles and accident clusters on a map

    Vehicle counts per lane are Poisson with mean density * route km, spread
    uniformly behind the spawn clearance with a minimum center gap. Each map
    segment independently receives an accident cluster of 2-4 discs in a
    random lane with probability accident_prob.

    Args:
        road_map (RoadMap): the road
        density (float): vehicles per km per lane, >= 0
        accident_prob (float): accident probability per segment, in [0, 1]
        seed (int): placement seed
        speed (float): mean vehicle target speed in m/s
        spawn_clearance (float): route length kept free in front of the ego spawn

    Returns:
        tuple: (TrafficState, ObstacleField)
    """
    rng = np.random.default_rng(int(seed))
    route_length = road_map.route_length
    lane_offsets = road_map.lane_offsets
    region = route_length - spawn_clearance

    s_list, lane_list = [], []
    for lane in range(road_map.lane_count):
        count = int(rng.poisson(density * route_length / 1000.0))
        if region <= 0.0 or count == 0:
            continue
        capacity = int(region // MIN_VEHICLE_GAP) + 1
        count = min(count, capacity)
        slack = max(region - (count - 1) * MIN_VEHICLE_GAP, 0.0)
        positions = spawn_clearance + np.sort(rng.uniform(0.0, slack, size=count)) + np.arange(count) * MIN_VEHICLE_GAP
        s_list.append(positions)
        lane_list.append(np.full(count, lane, dtype=np.int64))
    if s_list:
        s = np.concatenate(s_list)
        lanes = np.concatenate(lane_list)
    else:
        s = np.zeros(0)
        lanes = np.zeros(0, dtype=np.int64)
    target_speed = speed * rng.uniform(0.8, 1.2, size=s.shape[0])
    traffic = TrafficState(s=s, lane=lanes, offset=lane_offsets[lanes], speed=target_speed.copy(),
                           target_speed=target_speed, active=np.ones(s.shape[0], dtype=bool))

    centers, radii, obstacle_s, obstacle_lanes = [], [], [], []
    seg_starts, seg_ends = _segment_starts(road_map)
    for seg_start, seg_end in zip(seg_starts, seg_ends):
        if rng.random() >= accident_prob:
            continue
        low = max(seg_start, spawn_clearance + 10.0)
        if seg_end <= low:
            continue
        anchor = rng.uniform(low, seg_end)
        lane = int(rng.integers(road_map.lane_count))
        for _ in range(int(rng.integers(2, 5))):
            disc_s = anchor + rng.uniform(-2.0, 2.0)
            lateral = lane_offsets[lane] + rng.uniform(-0.2, 0.2) * road_map.lane_width
            x, y, _ = road_map.point_at(disc_s, lateral)
            centers.append([float(x), float(y)])
            radii.append(float(rng.uniform(0.3, 0.6)))
            obstacle_s.append(disc_s)
            obstacle_lanes.append(lane)
    if centers:
        obstacles = ObstacleField(np.array(centers), np.array(radii), np.array(obstacle_s),
                                  np.array(obstacle_lanes, dtype=np.int64))
    else:
        obstacles = ObstacleField.empty()
    logger.debug(f"Populated {len(traffic)} vehicles and {len(obstacles)} obstacle discs (seed={seed})")
    return traffic, obstacles


def _agent_ahead(s, lane, other_s, other_lane, gap):
    """Boolean per vehicle: some other agent in the same lane within (0, gap] ahead"""
    if other_s.size == 0 or s.size == 0:
        return np.zeros(s.shape[0], dtype=bool)
    ahead = other_s[None, :] - s[:, None]
    same_lane = other_lane[None, :] == lane[:, None]
    return np.any(same_lane & (ahead > 0.0) & (ahead <= gap), axis=1)


def _lane_clear(i, target_lane, traffic, obstacles, gap):
    others = traffic.active & (traffic.lane == target_lane)
    others[i] = False
    if np.any(np.abs(traffic.s[others] - traffic.s[i]) < gap):
        return False
    blocking = obstacles.lane == target_lane
    return not np.any(np.abs(obstacles.s[blocking] - traffic.s[i]) < gap)


def advance_traffic(traffic, obstacles, road_map, ego_s, ego_lane, dt, traffic_config, rng=None):
    """Move every active vehicle one lane-following step (in place)

    A vehicle brakes at gap_deceleration while any agent (vehicle, obstacle or
    the ego) is within gap_distance ahead in its lane, otherwise it accelerates
    back toward its target speed. Vehicles past the destination are removed.
    """
    idx = np.flatnonzero(traffic.active)
    if idx.size == 0:
        return traffic
    gap = traffic_config.gap_distance
    s, lane = traffic.s[idx], traffic.lane[idx]

    if traffic_config.lane_change_prob > 0.0 and rng is not None and road_map.lane_count > 1:
        draws = rng.random(idx.size)
        directions = rng.choice(np.array([-1, 1]), size=idx.size)
        for k in np.flatnonzero(draws < traffic_config.lane_change_prob):
            target = int(lane[k] + directions[k])
            if 0 <= target < road_map.lane_count and _lane_clear(idx[k], target, traffic, obstacles, gap):
                traffic.lane[idx[k]] = target
        lane = traffic.lane[idx]

    blocked = _agent_ahead(s, lane, s, lane, gap)
    blocked |= _agent_ahead(s, lane, obstacles.s, obstacles.lane, gap)
    blocked |= _agent_ahead(s, lane, np.array([ego_s]), np.array([ego_lane]), gap)

    speed = traffic.speed[idx]
    braking = np.maximum(speed - traffic_config.gap_deceleration * dt, 0.0)
    cruising = np.minimum(speed + traffic_config.acceleration * dt, traffic.target_speed[idx])
    speed = np.where(blocked, braking, cruising)
    traffic.speed[idx] = speed
    traffic.s[idx] = s + speed * dt

    lane_center = road_map.lane_offsets[lane]
    shift = np.clip(lane_center - traffic.offset[idx], -LATERAL_SPEED * dt, LATERAL_SPEED * dt)
    traffic.offset[idx] = traffic.offset[idx] + shift
    traffic.active[idx] = traffic.s[idx] <= road_map.route_length
    return traffic
