"""
Main script - Entry point for training, evaluation, trajectory export and plotting

Examples:
    python run_pipeline.py train --config configs/desk_400m.ini --seed 1 --out data/output/lstc_seed1
    python run_pipeline.py eval --checkpoint data/output/lstc_seed1/checkpoints/final.ckpt
    python run_pipeline.py export-traj --checkpoint data/output/lstc_seed1/checkpoints/final.ckpt --episodes 3
    python run_pipeline.py plot --metrics data/output/lstc_seed1/metrics.csv
"""
import sys

from src.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
