import dataclasses
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from src.config.run_config import MapConfig, TrafficConfig
from src.driving_sim.road_map import build_map
from src.driving_sim.traffic import ObstacleField, TrafficState, advance_traffic, populate_traffic


@pytest.fixture
def road():
    """Create a 400 m road with three segments"""
    return build_map(MapConfig(layout="S150,A80:0.8,S186"), seed=0)


def single_vehicle(s, lane, speed, road):
    return TrafficState(s=np.array([s]), lane=np.array([lane]), offset=road.lane_offsets[[lane]].copy(),
                        speed=np.array([speed]), target_speed=np.array([speed]), active=np.array([True]))


def test_no_traffic_and_no_accidents(road):
    """Test that zero density and zero accident probability give an empty world"""
    traffic, obstacles = populate_traffic(road, 0.0, 0.0, seed=1)
    assert len(traffic) == 0
    assert len(obstacles) == 0


def test_population_is_seeded(road):
    """Test identical placement for identical seeds"""
    first = populate_traffic(road, 12.0, 0.8, seed=3)
    again = populate_traffic(road, 12.0, 0.8, seed=3)
    np.testing.assert_array_equal(first[0].s, again[0].s)
    np.testing.assert_array_equal(first[1].centers, again[1].centers)


def test_vehicles_respect_spawn_clearance_and_spacing(road):
    """Test placement stays ahead of the ego spawn with a minimum gap per lane"""
    traffic, _ = populate_traffic(road, 40.0, 0.0, seed=2, spawn_clearance=20.0)
    assert len(traffic) > 0
    assert np.all(traffic.s >= 20.0)
    for lane in range(road.lane_count):
        positions = np.sort(traffic.s[traffic.lane == lane])
        if positions.size > 1:
            assert np.min(np.diff(positions)) >= 6.5 - 1e-9


def test_certain_accidents_place_clusters(road):
    """Test one cluster of 2-4 small discs per segment when accident_prob is 1"""
    _, obstacles = populate_traffic(road, 0.0, 1.0, seed=5)
    assert 2 * len(road.segments) <= len(obstacles) <= 4 * len(road.segments)
    assert np.all((obstacles.radii >= 0.3) & (obstacles.radii <= 0.6))
    assert np.all(obstacles.s >= 30.0 - 2.0)


def test_vehicle_brakes_behind_obstacle(road):
    """Test gap keeping against an accident cluster in the same lane"""
    traffic = single_vehicle(50.0, 1, 8.0, road)
    obstacles = ObstacleField(np.array([[55.0, 0.0]]), np.array([0.5]), np.array([55.0]), np.array([1]))
    advance_traffic(traffic, obstacles, road, ego_s=-100.0, ego_lane=0, dt=0.1, traffic_config=TrafficConfig())
    assert traffic.speed[0] == pytest.approx(8.0 - 3.0 * 0.1)
    assert traffic.s[0] == pytest.approx(50.0 + traffic.speed[0] * 0.1)


def test_vehicle_accelerates_toward_target(road):
    """Test cruising toward the target speed when the lane ahead is clear"""
    traffic = single_vehicle(50.0, 1, 8.0, road)
    traffic.speed[0] = 5.0
    advance_traffic(traffic, ObstacleField.empty(), road, ego_s=-100.0, ego_lane=1, dt=0.1,
                    traffic_config=TrafficConfig())
    assert traffic.speed[0] == pytest.approx(5.1)


def test_vehicle_brakes_behind_ego(road):
    """Test that the ego counts as an agent for gap keeping"""
    traffic = single_vehicle(50.0, 1, 8.0, road)
    advance_traffic(traffic, ObstacleField.empty(), road, ego_s=58.0, ego_lane=1, dt=0.1,
                    traffic_config=TrafficConfig())
    assert traffic.speed[0] < 8.0


def test_vehicle_leaves_at_destination(road):
    """Test deactivation past the end of the route"""
    traffic = single_vehicle(road.route_length - 0.1, 0, 8.0, road)
    advance_traffic(traffic, ObstacleField.empty(), road, ego_s=0.0, ego_lane=1, dt=0.1,
                    traffic_config=TrafficConfig())
    assert traffic.active_count == 0


def test_lane_change_moves_gradually(road):
    """Test that a forced lane change shifts the lane and moves laterally at 1 m/s"""
    traffic = single_vehicle(100.0, 1, 8.0, road)
    config = dataclasses.replace(TrafficConfig(), lane_change_prob=1.0)
    advance_traffic(traffic, ObstacleField.empty(), road, ego_s=0.0, ego_lane=1, dt=0.1,
                    traffic_config=config, rng=np.random.default_rng(0))
    assert traffic.lane[0] in (0, 2)
    assert abs(traffic.offset[0]) == pytest.approx(0.1)


def test_mean_vehicle_count_matches_density():
    """Test 12 vehicles per km per lane on a 1 km three-lane road averages 36 over 1000 seeds"""
    road = build_map(MapConfig(layout="S1000"), seed=0)
    counts = [len(populate_traffic(road, 12.0, 0.0, seed=seed)[0]) for seed in range(1000)]
    assert abs(np.mean(counts) - 36.0) < 3 * np.sqrt(36.0 / 1000)
