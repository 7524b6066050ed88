"""Road maps composed of straight and arc segments

A map is a multi-lane road around a centerline route. The route is sampled as
a dense polyline with exact arc-length parameterization, and checkpoints are
placed along it at a fixed spacing.
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

# Polyline sampling step along the route (m)
ROUTE_RESOLUTION = 1.0

_LAYOUT_TOKEN = re.compile(r"^(?:S(?P<length>[0-9.eE+-]+)|A(?P<radius>[0-9.eE+-]+):(?P<sweep>[0-9.eE+-]+))$")


@dataclass(frozen=True)
class Segment:
    """One road element: a straight of `length` m or an arc of `radius` m and signed `sweep` rad"""
    kind: str
    length: float = 0.0
    radius: float = 0.0
    sweep: float = 0.0

    @property
    def arc_length(self):
        if self.kind == "straight":
            return self.length
        return self.radius * abs(self.sweep)


@dataclass(frozen=True)
class RoadMap:
    """A generated road with its route polyline and checkpoints

    Lateral offsets are measured from the route centerline, positive to the
    left. Lane i has its center at lane_offsets[i]; the middle lane sits on the
    centerline for an odd lane count.
    """
    segments: Tuple[Segment, ...]
    lane_count: int
    lane_width: float
    points: np.ndarray
    headings: np.ndarray
    arc_lengths: np.ndarray
    checkpoints: np.ndarray
    checkpoint_points: np.ndarray

    @property
    def route_length(self):
        return float(self.arc_lengths[-1])

    @property
    def destination(self):
        return self.points[-1].copy()

    @property
    def half_width(self):
        return 0.5 * self.lane_count * self.lane_width

    @property
    def lane_offsets(self):
        return (np.arange(self.lane_count) - 0.5 * (self.lane_count - 1)) * self.lane_width

    def lane_of(self, lateral):
        """Index of the lane whose center is nearest to the lateral offset(s)"""
        offsets = self.lane_offsets
        lateral = np.asarray(lateral, dtype=np.float64)
        return np.argmin(np.abs(lateral[..., None] - offsets), axis=-1)

    def point_at(self, s, lateral=0.0):
        """Position and heading at route arc length s (extrapolated past both ends)

        Args:
            s (float or array): arc length(s) in m
            lateral (float or array): offset(s) from the centerline, positive left

        Returns:
            tuple: (x, y, heading) arrays broadcast to the shape of s
        """
        s = np.asarray(s, dtype=np.float64)
        clipped = np.clip(s, 0.0, self.route_length)
        heading = np.interp(clipped, self.arc_lengths, self.headings)
        x = np.interp(clipped, self.arc_lengths, self.points[:, 0])
        y = np.interp(clipped, self.arc_lengths, self.points[:, 1])
        extra = s - clipped
        x = x + extra * np.cos(heading) - lateral * np.sin(heading)
        y = y + extra * np.sin(heading) + lateral * np.cos(heading)
        return x, y, heading

    def project(self, x, y):
        """Project a point onto the route

        Returns:
            tuple: (arc length s, signed lateral offset, tangent heading). The
            first and last polyline pieces are extended so points before the
            start or past the destination get s < 0 or s > route_length.
        """
        p = np.array([x, y], dtype=np.float64)
        a = self.points[:-1]
        edge = self.points[1:] - a
        length_sq = np.einsum("ij,ij->i", edge, edge)
        t = np.einsum("ij,ij->i", p - a, edge) / length_sq
        lower = np.zeros_like(t)
        upper = np.ones_like(t)
        lower[0] = -np.inf
        upper[-1] = np.inf
        t = np.clip(t, lower, upper)
        foot = a + t[:, None] * edge
        delta = p - foot
        dist_sq = np.einsum("ij,ij->i", delta, delta)
        i = int(np.argmin(dist_sq))
        s = self.arc_lengths[i] + t[i] * (self.arc_lengths[i + 1] - self.arc_lengths[i])
        tangent = self.headings[i] + min(max(t[i], 0.0), 1.0) * (self.headings[i + 1] - self.headings[i])
        cross = edge[i, 0] * delta[i, 1] - edge[i, 1] * delta[i, 0]
        lateral = math.copysign(math.sqrt(dist_sq[i]), cross)
        return float(s), float(lateral), float(tangent)

    def boundaries(self):
        """Left and right outer road edges as polylines, each (N, 2)"""
        normal = np.stack([-np.sin(self.headings), np.cos(self.headings)], axis=1)
        return self.points + self.half_width * normal, self.points - self.half_width * normal


def parse_layout(layout):
    """Parse an explicit layout such as 'S150,A80:0.8,S170' into segments

    'S<length>' is a straight, 'A<radius>:<sweep>' an arc with signed sweep in
    radians (positive turns left).
    """
    segments = []
    for token in (t.strip() for t in layout.split(",")):
        if not token:
            continue
        match = _LAYOUT_TOKEN.match(token)
        if match is None:
            raise ConfigError(f"malformed map layout element '{token}'")
        try:
            if match.group("length") is not None:
                segment = Segment("straight", length=float(match.group("length")))
            else:
                segment = Segment("arc", radius=float(match.group("radius")), sweep=float(match.group("sweep")))
        except ValueError:
            raise ConfigError(f"malformed number in map layout element '{token}'")
        if segment.arc_length <= 0.0:
            raise ConfigError(f"map layout element '{token}' has zero length")
        segments.append(segment)
    if not segments:
        raise ConfigError("map layout has no segments")
    return segments


def _random_segments(map_config, rng):
    count = int(rng.integers(map_config.min_segments, map_config.max_segments + 1))
    target_length = float(rng.uniform(map_config.min_length, map_config.max_length))
    # First element is a straight so the ego spawns on a straight
    kinds = ["straight"] + ["arc" if rng.random() < 0.5 and map_config.max_sweep > 0.0 else "straight"
                            for _ in range(count - 1)]
    arcs = []
    for kind in kinds:
        if kind == "arc":
            radius = float(rng.uniform(map_config.min_radius, map_config.max_radius))
            sweep = float(rng.uniform(0.25, 1.0) * map_config.max_sweep) * (1.0 if rng.random() < 0.5 else -1.0)
            arcs.append((radius, sweep))
    arc_total = sum(r * abs(w) for r, w in arcs)
    if arc_total > 0.6 * target_length:
        scale = 0.6 * target_length / arc_total
        arcs = [(r, w * scale) for r, w in arcs]
        arc_total *= scale
    straight_weights = rng.uniform(0.5, 1.5, size=kinds.count("straight"))
    straight_lengths = (target_length - arc_total) * straight_weights / straight_weights.sum()

    segments, arc_iter, straight_iter = [], iter(arcs), iter(straight_lengths)
    for kind in kinds:
        if kind == "arc":
            radius, sweep = next(arc_iter)
            segments.append(Segment("arc", radius=radius, sweep=sweep))
        else:
            segments.append(Segment("straight", length=float(next(straight_iter))))
    return segments


def _sample_route(segments):
    points = [np.zeros(2)]
    headings = [0.0]
    arc_lengths = [0.0]
    position, heading, s = np.zeros(2), 0.0, 0.0
    for segment in segments:
        steps = max(1, int(math.ceil(segment.arc_length / ROUTE_RESOLUTION)))
        if segment.kind == "straight":
            direction = np.array([math.cos(heading), math.sin(heading)])
            for i in range(1, steps + 1):
                points.append(position + direction * segment.length * i / steps)
                headings.append(heading)
                arc_lengths.append(s + segment.length * i / steps)
        else:
            turn = math.copysign(1.0, segment.sweep)
            center = position + turn * segment.radius * np.array([-math.sin(heading), math.cos(heading)])
            for i in range(1, steps + 1):
                phi = segment.sweep * i / steps
                points.append(center + turn * segment.radius * np.array([math.sin(heading + phi),
                                                                          -math.cos(heading + phi)]))
                headings.append(heading + phi)
                arc_lengths.append(s + segment.arc_length * i / steps)
            heading += segment.sweep
        position = points[-1]
        s += segment.arc_length
    return np.array(points), np.array(headings), np.array(arc_lengths)


def build_map(map_config, seed):
    """Generate a road map

    Args:
        map_config (MapConfig): segment count, radius, sweep and length ranges, or an
            explicit layout string that overrides random generation
        seed (int): generation seed; the same seed yields an identical map

    Returns:
        RoadMap: connected road with checkpoints every map_config.checkpoint_spacing m

    Raises:
        ConfigError: when the map_config cannot produce a map
    """
    if map_config.layout:
        segments = parse_layout(map_config.layout)
    else:
        if map_config.min_segments < 1 or map_config.max_segments < map_config.min_segments:
            raise ConfigError(f"invalid segment count range [{map_config.min_segments}, {map_config.max_segments}]")
        if map_config.min_length <= 0.0 or map_config.max_length < map_config.min_length:
            raise ConfigError(f"invalid route length range [{map_config.min_length}, {map_config.max_length}]")
        segments = _random_segments(map_config, np.random.default_rng(int(seed)))

    points, headings, arc_lengths = _sample_route(segments)
    route_length = arc_lengths[-1]
    spacing = map_config.checkpoint_spacing
    checkpoints = np.arange(1, int(math.floor(route_length / spacing + 1e-9)) + 1) * spacing
    checkpoints = checkpoints[checkpoints < route_length - 1e-9]
    checkpoints = np.append(checkpoints, route_length)
    cx = np.interp(checkpoints, arc_lengths, points[:, 0])
    cy = np.interp(checkpoints, arc_lengths, points[:, 1])

    road_map = RoadMap(
        segments=tuple(segments),
        lane_count=int(map_config.lane_count),
        lane_width=float(map_config.lane_width),
        points=points,
        headings=headings,
        arc_lengths=arc_lengths,
        checkpoints=checkpoints,
        checkpoint_points=np.stack([cx, cy], axis=1),
    )
    logger.debug(f"Built map seed={seed} with {len(segments)} segments, route {route_length:.1f} m")
    return road_map


def build_map_pool(map_config, evaluation=False):
    """Build the training or the unseen evaluation map pool

    Training map i uses seed map_config.seed + i; evaluation map i uses
    map_config.seed + map_config.eval_seed_offset + i, so the two pools never share a seed
    while eval_seed_offset >= train_maps.

    Returns:
        list: RoadMap objects in pool order
    """
    if evaluation:
        first, count = map_config.seed + map_config.eval_seed_offset, map_config.eval_maps
    else:
        first, count = map_config.seed, map_config.train_maps
    pool = [build_map(map_config, first + i) for i in range(count)]
    logger.info(f"Built {'evaluation' if evaluation else 'training'} pool of {count} maps (seeds {first}..{first + count - 1})")
    return pool
