"""Configuration defaults for the LSTC safe-driving training system"""

import math
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Project directories
PROJECT_ROOT = Path(__file__).parent.parent.parent
SRC_DIR = PROJECT_ROOT / "src"
DATA_DIR = PROJECT_ROOT / "data"
CONFIGS_DIR = PROJECT_ROOT / "configs"
OUTPUT_DATA_DIR = Path(os.getenv("LSTC_OUTPUT_DIR", str(DATA_DIR / "output")))

# Logging
LOG_LEVEL = os.getenv("LSTC_LOG_LEVEL", "INFO")
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Run
DEFAULT_SEED = 0
DEFAULT_MODE = "lstc"
RUN_MODES = ("lstc", "ppo", "ppo-lag")
TOTAL_TRAINING_STEPS = 1_000_000  # desk scale; the full-size budget is 1e7
CHECKPOINT_EVERY = 5  # epochs
ROLLOUT_WORKERS = 1

# Networks (policy, value, cost value and validation nets share the hidden shape)
HIDDEN_LAYERS = 2
HIDDEN_SIZE = 64
HIDDEN_ACTIVATION = "tanh"
LOG_STD_INIT = math.log(0.5)

# PPO
GAMMA = 0.99
GAE_LAMBDA = 0.95
CLIP_EPSILON = 0.2
BATCH_SIZE = 20000
MINIBATCH_SIZE = 2000
UPDATE_EPOCHS = 10
VALIDATION_EPOCHS = 10
POLICY_LR = 3e-4
VALUE_LR = 3e-4
COST_VALUE_LR = 3e-4
VALIDATION_LR = 3e-4
ENTROPY_COEF = 0.0
WINDOW_LENGTH = 5

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

# Lagrange multipliers
LAMBDA_LONG_INIT = 0.1
LAMBDA_SHORT_INIT = 0.5
LAMBDA_LONG_LR = 0.025
LAMBDA_SHORT_LR = 0.01
COST_LIMIT = 1.0
LAMBDA_MAX = 100.0
MULTIPLIER_UPDATE_MODES = ("projected", "gated")
DEFAULT_MULTIPLIER_UPDATE_MODE = "projected"

# Vehicle and simulation
OBSERVATION_DIM = 49
ACTION_DIM = 2
LIDAR_RAYS = 30
LIDAR_RANGE = 50.0  # m
CHECKPOINT_SLOTS = 10
CHECKPOINT_NORMALIZER = 500.0  # m
TIME_STEP = 0.1  # s
MAX_STEERING = 0.6  # rad
ACCEL_MIN = -5.0  # m/s^2
ACCEL_MAX = 3.0  # m/s^2
WHEELBASE = 2.5  # m
EGO_RADIUS = 1.0  # m
MAX_SPEED = 80.0 / 3.6  # m/s
MAX_EPISODE_STEPS = 1000

# Reward coefficients (distance, speed, yaw, steering) and terminal rewards
REWARD_DISTANCE_COEF = 1.0
REWARD_SPEED_COEF = 0.1
REWARD_YAW_COEF = -0.4
REWARD_STEERING_COEF = -0.4
SUCCESS_REWARD = 10.0
DEPARTURE_REWARD = -5.0

# Road maps
LANE_COUNT = 3
LANE_WIDTH = 3.5  # m
CHECKPOINT_SPACING = 50.0  # m
MIN_SEGMENTS = 3
MAX_SEGMENTS = 6
MIN_ARC_RADIUS = 40.0  # m
MAX_ARC_RADIUS = 120.0  # m
MAX_ARC_SWEEP = math.pi / 3  # rad
MIN_ROUTE_LENGTH = 300.0  # m
MAX_ROUTE_LENGTH = 600.0  # m
TRAIN_MAPS = 20
EVAL_MAPS = 20
MAP_SEED = 0
EVAL_MAP_SEED_OFFSET = 10000

# Traffic
TRAFFIC_DENSITY = 12.0  # vehicles per km per lane
ACCIDENT_PROB = 0.8  # per map segment
TRAFFIC_SPEED = 30.0 / 3.6  # m/s
GAP_DISTANCE = 10.0  # m
GAP_DECELERATION = 3.0  # m/s^2
TRAFFIC_ACCELERATION = 1.0  # m/s^2
LANE_CHANGE_PROB = 0.0  # per vehicle per step
SPAWN_CLEARANCE = 20.0  # m of route kept free in front of the ego spawn

# Evaluation
EVAL_GROUP_SIZE = 20
EVAL_REPEATS = 10
EVAL_SEED = 12345

# Output artifacts
METRICS_FILENAME = "metrics.csv"
CHECKPOINT_DIRNAME = "checkpoints"
FINAL_CHECKPOINT_NAME = "final.ckpt"
RESOLVED_CONFIG_NAME = "config.ini"
PLOTS_DIRNAME = "plots"
EVAL_SUMMARY_NAME = "eval_summary.csv"
EVAL_SUMMARY_TEXT_NAME = "eval_summary.txt"
EVAL_RECORDS_NAME = "eval_episodes.csv"
TRAJECTORY_DIRNAME = "trajectories"
BUFFER_DUMP_DIRNAME = "buffers"

# Dashboard settings
DASHBOARD_TITLE = "LSTC Safe Driving - Training Dashboard"
DASHBOARD_DESCRIPTION = "Episode reward, success rate, episode cost, feasible state rate, multipliers and losses per epoch"
