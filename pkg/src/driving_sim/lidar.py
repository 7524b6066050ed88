"""2D lidar ray casting against discs, oriented boxes and road edges"""

import numpy as np

from src.config.config import LIDAR_RAYS


def ray_directions(heading, n_rays=LIDAR_RAYS):
    """Unit vectors at equal spacing over 360 degrees; ray 0 points along heading"""
    angles = heading + 2.0 * np.pi * np.arange(n_rays) / n_rays
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def ray_circle_distances(origin, directions, centers, radii):
    """Nearest hit distance per ray against a set of discs (inf when none)

    A ray starting inside a disc reads 0.
    """
    if len(radii) == 0:
        return np.full(directions.shape[0], np.inf)
    rel = np.asarray(centers) - origin
    b = directions @ rel.T
    c = np.einsum("ij,ij->i", rel, rel) - np.asarray(radii) ** 2
    disc = b * b - c[None, :]
    with np.errstate(invalid="ignore"):
        t = b - np.sqrt(disc)
    hit = (disc >= 0.0) & (t >= 0.0)
    distances = np.where(hit, t, np.inf)
    distances = np.where(c[None, :] <= 0.0, 0.0, distances)
    return distances.min(axis=1)


def ray_box_distances(origin, directions, centers, headings, half_length, half_width):
    """Nearest hit distance per ray against oriented rectangles (slab test)"""
    if len(centers) == 0:
        return np.full(directions.shape[0], np.inf)
    cos_h, sin_h = np.cos(headings), np.sin(headings)
    rel = origin - np.asarray(centers)
    ox = rel[:, 0] * cos_h + rel[:, 1] * sin_h
    oy = -rel[:, 0] * sin_h + rel[:, 1] * cos_h
    dx = directions[:, :1] * cos_h + directions[:, 1:] * sin_h
    dy = -directions[:, :1] * sin_h + directions[:, 1:] * cos_h
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        dx = np.where(dx == 0.0, 1e-300, dx)
        dy = np.where(dy == 0.0, 1e-300, dy)
        tx1, tx2 = (-half_length - ox) / dx, (half_length - ox) / dx
        ty1, ty2 = (-half_width - oy) / dy, (half_width - oy) / dy
        t_near = np.maximum(np.minimum(tx1, tx2), np.minimum(ty1, ty2))
        t_far = np.minimum(np.maximum(tx1, tx2), np.maximum(ty1, ty2))
    hit = (t_near <= t_far) & (t_far >= 0.0)
    return np.where(hit, np.maximum(t_near, 0.0), np.inf).min(axis=1)


def ray_segment_distances(origin, directions, starts, ends):
    """Nearest hit distance per ray against line segments"""
    if len(starts) == 0:
        return np.full(directions.shape[0], np.inf)
    edge = ends - starts
    w = starts - origin
    d_x, d_y = directions[:, :1], directions[:, 1:]
    denom = d_x * edge[:, 1] - d_y * edge[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0] * edge[:, 1] - w[:, 1] * edge[:, 0]) / denom
        u = (w[:, 0] * d_y - w[:, 1] * d_x) / denom
    hit = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    return np.where(hit, t, np.inf).min(axis=1)


def nearby_boundary_segments(road_map, origin, reach):
    """Road-edge segments with an endpoint within reach of origin"""
    starts, ends = [], []
    for edge in road_map.boundaries():
        dist = np.hypot(edge[:, 0] - origin[0], edge[:, 1] - origin[1])
        near = dist <= reach
        keep = near[:-1] | near[1:]
        starts.append(edge[:-1][keep])
        ends.append(edge[1:][keep])
    return np.concatenate(starts), np.concatenate(ends)


def lidar_scan(world, road_map, lidar_range, n_rays=LIDAR_RAYS):
    """Normalized lidar distances around the ego vehicle

    Args:
        world (WorldState): ego pose, traffic and obstacles
        road_map (RoadMap): road whose outer edges also reflect rays
        lidar_range (float): maximum detection distance in m

    Returns:
        numpy.ndarray: n_rays readings in [0, 1]; 1.0 means nothing within range
    """
    origin = np.array([world.x, world.y])
    directions = ray_directions(world.heading, n_rays)
    distances = np.full(n_rays, np.inf)

    obstacles = world.obstacles
    if len(obstacles):
        distances = np.minimum(distances, ray_circle_distances(origin, directions, obstacles.centers, obstacles.radii))
    traffic = world.traffic
    if traffic.active_count:
        x, y, heading = traffic.poses(road_map)
        distances = np.minimum(distances, ray_box_distances(
            origin, directions, np.stack([x, y], axis=1), heading, traffic.half_length, traffic.half_width))
    starts, ends = nearby_boundary_segments(road_map, origin, lidar_range + road_map.half_width + 2.0)
    distances = np.minimum(distances, ray_segment_distances(origin, directions, starts, ends))
    return np.clip(distances, 0.0, lidar_range) / lidar_range
