"""Command-line verbs: train, eval, export-traj, plot

Every command returns a process exit status: 0 on success, 2 for
configuration problems, 1 for any other failure.
"""

import argparse
import dataclasses
import logging
from pathlib import Path

import pandas as pd

from src.config.config import (
    BUFFER_DUMP_DIRNAME,
    CHECKPOINT_DIRNAME,
    EVAL_RECORDS_NAME,
    EVAL_SUMMARY_NAME,
    EVAL_SUMMARY_TEXT_NAME,
    FINAL_CHECKPOINT_NAME,
    METRICS_FILENAME,
    PLOTS_DIRNAME,
    RESOLVED_CONFIG_NAME,
    RUN_MODES,
    TRAJECTORY_DIRNAME,
)
from src.config.run_config import load_config, serialize_config, with_overrides
from src.driving_sim.road_map import build_map_pool
from src.evaluation.evaluator import PolicyEvaluator, format_comparison_table, write_summaries
from src.lstc.trainer import LSTCTrainer, init_agent_state
from src.persistence.checkpoint import load_checkpoint, save_checkpoint
from src.persistence.metrics import MetricsLog
from src.utils.errors import ConfigError, EpochAbortedError, LSTCError
from src.utils.io_utils import atomic_write_csv, atomic_write_text
from src.utils.logging_utils import setup_logging
from src.visualization.dashboard_generator import DashboardGenerator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def _resolve_train_config(args):
    """Configuration for a training run, taken from the checkpoint when resuming"""
    if args.checkpoint:
        checkpoint = load_checkpoint(args.checkpoint)
        run_config = checkpoint.run_config
        if args.seed is not None and args.seed != run_config.run.seed:
            raise ConfigError(f"--seed {args.seed} differs from the checkpoint seed {run_config.run.seed}")
        if args.mode is not None and args.mode != run_config.run.mode:
            raise ConfigError(f"--mode {args.mode} differs from the checkpoint mode {run_config.run.mode}")
        return with_overrides(run_config, output_dir=args.out), checkpoint.state
    run_config = with_overrides(load_config(args.config), seed=args.seed, mode=args.mode, output_dir=args.out)
    return run_config, None


def cmd_train(args):
    """Train until the configured step budget, writing metrics and checkpoints"""
    run_config, state = _resolve_train_config(args)
    output_dir = Path(run_config.run.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(output_dir / RESOLVED_CONFIG_NAME, serialize_config(run_config))

    maps = build_map_pool(run_config.map)
    trainer = LSTCTrainer(run_config, maps)
    if state is None:
        state = init_agent_state(run_config)
    metrics = MetricsLog(output_dir / METRICS_FILENAME)
    metrics.start(resume_epoch=state.epoch)
    checkpoint_dir = output_dir / CHECKPOINT_DIRNAME
    logger.info(f"Training mode '{run_config.run.mode}' seed {run_config.run.seed} from epoch {state.epoch} "
                f"({state.steps}/{run_config.run.total_steps} steps)")

    def on_epoch(new_state, report):
        metrics.append(report)
        if args.dump_buffer and trainer.last_buffer is not None:
            trainer.last_buffer.dump_csv(output_dir / BUFFER_DUMP_DIRNAME / f"epoch_{report.epoch:04d}.csv")
        if report.epoch % run_config.run.checkpoint_every == 0:
            save_checkpoint(checkpoint_dir / f"epoch_{report.epoch:04d}.ckpt", new_state, run_config)

    try:
        state, reports = trainer.train(state, run_config.run.total_steps, on_epoch=on_epoch)
    except EpochAbortedError as e:
        if e.state is not None:
            path = checkpoint_dir / f"epoch_{e.state.epoch:04d}.ckpt"
            save_checkpoint(path, e.state, run_config)
            logger.error(f"Saved the last completed epoch to {path}; resume from it with --checkpoint")
        raise
    save_checkpoint(checkpoint_dir / FINAL_CHECKPOINT_NAME, state, run_config)
    logger.info(f"Training finished after {state.epoch} epochs ({len(reports)} this run); outputs in {output_dir}")
    return EXIT_OK


def _eval_config(args, checkpoint_config):
    run_config = load_config(args.config) if args.config else checkpoint_config
    if args.seed is not None:
        run_config = dataclasses.replace(run_config, eval=dataclasses.replace(run_config.eval, seed=args.seed))
    return run_config


def cmd_eval(args):
    """Evaluate one or more checkpoints on the unseen map pool"""
    # Every checkpoint is loaded before anything is written
    checkpoints = [(Path(path), load_checkpoint(path)) for path in args.checkpoint]
    run_config = _eval_config(args, checkpoints[0][1].run_config)
    output_dir = Path(args.out or run_config.run.output_dir)

    evaluator = PolicyEvaluator(build_map_pool(run_config.map, evaluation=True), run_config.env, run_config.traffic)
    summaries = []
    for path, checkpoint in checkpoints:
        label = f"{checkpoint.run_config.run.mode}:{path.stem}"
        summary = evaluator.evaluate(checkpoint.state.policy, run_config.eval.group_size, run_config.eval.repeats,
                                     run_config.eval.seed)
        summaries.append((label, summary))

    output_dir.mkdir(parents=True, exist_ok=True)
    write_summaries(summaries, output_dir / EVAL_SUMMARY_NAME, output_dir / EVAL_SUMMARY_TEXT_NAME)
    records = []
    for label, summary in summaries:
        frame = summary.records.copy()
        frame.insert(0, "method", label)
        records.append(frame)
    atomic_write_csv(pd.concat(records, ignore_index=True), output_dir / EVAL_RECORDS_NAME)
    print(format_comparison_table(summaries))
    return EXIT_OK


def cmd_export_traj(args):
    """Export per-step trajectories of a checkpoint's policy on one evaluation map"""
    checkpoint = load_checkpoint(args.checkpoint)
    run_config = _eval_config(args, checkpoint.run_config)
    maps = build_map_pool(run_config.map, evaluation=True)
    if not 0 <= args.map_index < len(maps):
        raise ConfigError(f"--map-index must lie in [0, {len(maps) - 1}], got {args.map_index}")
    output_dir = Path(args.out or run_config.run.output_dir) / TRAJECTORY_DIRNAME
    evaluator = PolicyEvaluator(maps, run_config.env, run_config.traffic)
    paths = evaluator.export_trajectories(checkpoint.state.policy, maps[args.map_index], args.episodes,
                                          run_config.eval.seed, output_dir)
    logger.info(f"Exported {len(paths)} trajectories to {output_dir}")
    return EXIT_OK


def cmd_plot(args):
    """Render training curves from a metrics CSV"""
    output_dir = Path(args.out) if args.out else Path(args.metrics).parent / PLOTS_DIRNAME
    paths = DashboardGenerator(output_dir).generate_from_csv(args.metrics)
    logger.info(f"Wrote {len(paths)} figures to {output_dir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(description="Safe driving policy training with long- and short-term constraints")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("--config", type=str, default=None, help="Run configuration file (defaults when omitted)")
        sub.add_argument("--seed", type=int, default=None, help="Override the run (or evaluation) seed")
        sub.add_argument("--out", type=str, default=None, help="Output directory")
        sub.add_argument("--mode", type=str, choices=RUN_MODES, default=None, help="Training mode")

    train = subparsers.add_parser("train", help="Train a policy")
    common(train)
    train.add_argument("--checkpoint", type=str, default=None, help="Resume from this checkpoint")
    train.add_argument("--dump-buffer", action="store_true", help="Write each epoch's rollout buffer as CSV")
    train.set_defaults(handler=cmd_train)

    evaluate = subparsers.add_parser("eval", help="Evaluate checkpoints on unseen maps")
    common(evaluate)
    evaluate.add_argument("--checkpoint", type=str, nargs="+", required=True, help="Checkpoint file(s)")
    evaluate.set_defaults(handler=cmd_eval)

    export = subparsers.add_parser("export-traj", help="Export per-step trajectories as CSV")
    common(export)
    export.add_argument("--checkpoint", type=str, required=True, help="Checkpoint file")
    export.add_argument("--episodes", type=int, default=5, help="Number of episodes to export")
    export.add_argument("--map-index", type=int, default=0, help="Evaluation map to drive on")
    export.set_defaults(handler=cmd_export_traj)

    plot = subparsers.add_parser("plot", help="Plot training curves from a metrics CSV")
    common(plot)
    plot.add_argument("--metrics", type=str, required=True, help="Metrics CSV written by train")
    plot.set_defaults(handler=cmd_plot)
    return parser


def main(argv=None):
    """Parse arguments, run the chosen command and map failures to exit codes"""
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except (LSTCError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
