"""Versioned binary checkpoints

Layout: 8 magic bytes, a little-endian u32 format version, then an
uncompressed npz payload of named float64/int64 arrays. The run configuration
text and a small JSON metadata block are stored as uint8 arrays inside the
payload. Random streams are derived from (seed, epoch), so the epoch counter
and the seed are all a resumed run needs to continue bit-identically.
"""

import io
import json
import logging
import struct
import zipfile
from dataclasses import dataclass

import numpy as np

from src.config.run_config import parse_config_text, serialize_config
from src.lstc.lagrange import LagrangeState
from src.lstc.trainer import AgentState
from src.nn_core.mlp import export_params, import_params
from src.utils.errors import CheckpointFormatError, CheckpointVersionError, LSTCError
from src.utils.io_utils import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"LSTCCKPT"
FORMAT_VERSION = 1
HEADER = struct.Struct("<8sI")
NETWORKS = ("policy", "value", "cost_value", "validation")


@dataclass(frozen=True)
class Checkpoint:
    state: AgentState
    run_config: object
    version: int = FORMAT_VERSION


def _text_array(text):
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8)


def _array_text(array):
    return bytes(np.asarray(array, dtype=np.uint8)).decode("utf-8")


def encode_checkpoint(state, run_config):
    """Serialize an agent state and its configuration to bytes"""
    arrays = {}
    for name in NETWORKS:
        for key, array in export_params(getattr(state, name)):
            arrays[f"{name}/{key}"] = array
    lagrange = state.lagrange
    arrays["lagrange/values"] = np.array([lagrange.lambda_long, lagrange.lambda_short], dtype=np.float64)
    meta = {
        "epoch": int(state.epoch),
        "steps": int(state.steps),
        "seed": int(run_config.run.seed),
        "mode": run_config.run.mode,
        "long_enabled": lagrange.long_enabled,
        "short_enabled": lagrange.short_enabled,
    }
    arrays["meta"] = _text_array(json.dumps(meta, sort_keys=True))
    arrays["config"] = _text_array(serialize_config(run_config))

    payload = io.BytesIO()
    np.savez(payload, **arrays)
    return HEADER.pack(MAGIC, FORMAT_VERSION) + payload.getvalue()


def decode_checkpoint(data):
    """Parse checkpoint bytes

    Raises:
        CheckpointFormatError: when the data is not a readable checkpoint
        CheckpointVersionError: when the format version is not supported
    """
    if len(data) < HEADER.size:
        raise CheckpointFormatError("file too short to be a checkpoint")
    magic, version = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointFormatError("missing checkpoint magic bytes")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(version, FORMAT_VERSION)
    try:
        with np.load(io.BytesIO(data[HEADER.size:]), allow_pickle=False) as npz:
            arrays = {key: npz[key] for key in npz.files}
        meta = json.loads(_array_text(arrays["meta"]))
        run_config = parse_config_text(_array_text(arrays["config"]))
        networks = {}
        for name in NETWORKS:
            prefix = f"{name}/"
            networks[name] = import_params({key[len(prefix):]: value for key, value in arrays.items()
                                            if key.startswith(prefix)})
        lambda_long, lambda_short = (float(v) for v in arrays["lagrange/values"])
    except (KeyError, ValueError, OSError, zipfile.BadZipFile, UnicodeDecodeError) as e:
        raise CheckpointFormatError(f"corrupt checkpoint payload: {e}")
    except LSTCError as e:
        raise CheckpointFormatError(f"corrupt checkpoint payload: {e}")

    lagrange = LagrangeState.from_config(run_config.lagrange, meta["mode"])
    lagrange = LagrangeState(
        lambda_long=lambda_long, lambda_short=lambda_short,
        lambda_long_lr=lagrange.lambda_long_lr, lambda_short_lr=lagrange.lambda_short_lr,
        cost_limit=lagrange.cost_limit, lambda_max=lagrange.lambda_max, update_mode=lagrange.update_mode,
        long_enabled=bool(meta["long_enabled"]), short_enabled=bool(meta["short_enabled"]))
    state = AgentState(policy=networks["policy"], value=networks["value"], cost_value=networks["cost_value"],
                       validation=networks["validation"], lagrange=lagrange, epoch=int(meta["epoch"]),
                       steps=int(meta["steps"]))
    return Checkpoint(state=state, run_config=run_config, version=version)


def save_checkpoint(path, state, run_config):
    """Write a checkpoint atomically

    Returns:
        Path: the written file
    """
    path = atomic_write_bytes(path, encode_checkpoint(state, run_config))
    logger.info(f"Saved checkpoint for epoch {state.epoch} ({state.steps} steps) to {path}")
    return path


def load_checkpoint(path):
    """Read a checkpoint file

    Returns:
        Checkpoint: agent state and the run configuration it was trained with
    """
    with open(path, "rb") as handle:
        data = handle.read()
    checkpoint = decode_checkpoint(data)
    logger.info(f"Loaded checkpoint {path} at epoch {checkpoint.state.epoch}")
    return checkpoint
