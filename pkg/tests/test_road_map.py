import dataclasses
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from src.config.run_config import MapConfig
from src.driving_sim.road_map import build_map, build_map_pool, parse_layout
from src.utils.errors import ConfigError


@pytest.fixture
def straight_map():
    """Create a 200 m straight three-lane road"""
    return build_map(MapConfig(layout="S200"), seed=0)


def test_straight_layout_geometry(straight_map):
    """Test route length, lanes and checkpoints of a straight"""
    assert straight_map.route_length == pytest.approx(200.0)
    np.testing.assert_allclose(straight_map.checkpoints, [50.0, 100.0, 150.0, 200.0])
    np.testing.assert_allclose(straight_map.lane_offsets, [-3.5, 0.0, 3.5])
    assert straight_map.half_width == pytest.approx(5.25)
    np.testing.assert_allclose(straight_map.destination, [200.0, 0.0], atol=1e-12)


def test_quarter_arc_geometry():
    """Test that a left quarter circle ends at (R, R) facing north"""
    road = build_map(MapConfig(layout=f"A50:{math.pi / 2!r}"), seed=0)
    assert road.route_length == pytest.approx(25.0 * math.pi)
    np.testing.assert_allclose(road.destination, [50.0, 50.0], atol=1e-9)
    assert road.headings[-1] == pytest.approx(math.pi / 2)


def test_project_and_point_at_agree(straight_map):
    """Test projection of an offset point and its inverse"""
    s, lateral, tangent = straight_map.project(100.0, 1.0)
    assert s == pytest.approx(100.0)
    assert lateral == pytest.approx(1.0)
    assert tangent == pytest.approx(0.0)
    x, y, heading = straight_map.point_at(100.0, -2.0)
    assert (float(x), float(y), float(heading)) == pytest.approx((100.0, -2.0, 0.0))


def test_project_on_curve_recovers_offset():
    """Test projection on an arc returns the lateral offset used to place the point"""
    road = build_map(MapConfig(layout="S50,A80:0.8,S50"), seed=0)
    x, y, _ = road.point_at(80.0, 2.0)
    s, lateral, _ = road.project(float(x), float(y))
    assert s == pytest.approx(80.0, abs=0.05)
    assert lateral == pytest.approx(2.0, abs=0.05)


def test_project_extends_past_destination(straight_map):
    """Test that points past the end get s beyond the route length"""
    s, lateral, _ = straight_map.project(205.0, 0.5)
    assert s == pytest.approx(205.0)
    assert lateral == pytest.approx(0.5)


def test_lane_of(straight_map):
    """Test nearest-lane lookup"""
    assert int(straight_map.lane_of(0.2)) == 1
    assert int(straight_map.lane_of(3.0)) == 2
    assert int(straight_map.lane_of(-4.0)) == 0


@pytest.mark.parametrize("layout", ["", "X100", "S", "A80", "S0", "S100,,Q"])
def test_parse_layout_rejects_malformed(layout):
    """Test layout syntax errors"""
    with pytest.raises(ConfigError):
        parse_layout(layout)


def test_parse_layout_elements():
    """Test straights and signed arcs"""
    segments = parse_layout("S150, A80:-0.8 ,S170")
    assert [s.kind for s in segments] == ["straight", "arc", "straight"]
    assert segments[1].sweep == -0.8
    assert sum(s.arc_length for s in segments) == pytest.approx(384.0)


def test_random_maps_are_seeded_and_in_range():
    """Test that generation is deterministic and respects the configured ranges"""
    map_config = MapConfig()
    first = build_map(map_config, seed=4)
    again = build_map(map_config, seed=4)
    other = build_map(map_config, seed=5)
    np.testing.assert_array_equal(first.points, again.points)
    assert not np.array_equal(first.points[:50], other.points[:50]) or first.route_length != other.route_length
    for seed in range(10):
        road = build_map(map_config, seed)
        assert map_config.min_length - 1e-6 <= road.route_length <= map_config.max_length + 1e-6
        assert map_config.min_segments <= len(road.segments) <= map_config.max_segments
        assert road.segments[0].kind == "straight"
        assert road.checkpoints[-1] == pytest.approx(road.route_length)


def test_map_pools_use_disjoint_seeds():
    """Test that evaluation maps differ from every training map"""
    map_config = dataclasses.replace(MapConfig(), train_maps=3, eval_maps=3)
    train = build_map_pool(map_config)
    unseen = build_map_pool(map_config, evaluation=True)
    assert len(train) == len(unseen) == 3
    for eval_map in unseen:
        assert all(eval_map.route_length != m.route_length or not np.array_equal(eval_map.points, m.points)
                   for m in train)
