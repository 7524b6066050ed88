"""Metrics CSV: one row per training epoch"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from src.utils.errors import MetricsFormatError
from src.utils.io_utils import atomic_write_csv

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ["epoch", "steps", "ep_reward", "ep_cost", "success_rate", "feasible_rate",
                   "lambda_l", "lambda_s", "loss_pi", "loss_v", "loss_vc", "loss_B"]
INTEGER_COLUMNS = ("epoch", "steps")


def read_metrics(path):
    """Load and validate a metrics CSV

    Raises:
        MetricsFormatError: on missing columns, empty files or a malformed row
            (row numbers count data rows from 1)
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise MetricsFormatError("metrics file is empty")
    except pd.errors.ParserError as e:
        raise MetricsFormatError(f"cannot parse metrics file: {e}")
    missing = [column for column in METRICS_COLUMNS if column not in frame.columns]
    if missing:
        raise MetricsFormatError(f"missing columns {missing}")
    if frame.empty:
        raise MetricsFormatError("metrics file has no rows")

    frame = frame[METRICS_COLUMNS]
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna() | ~np.isfinite(numeric.to_numpy(dtype=np.float64))
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        column = METRICS_COLUMNS[col]
        raise MetricsFormatError(f"invalid value '{frame.iloc[row, col]}' in column '{column}'", row=int(row) + 1)
    for column in INTEGER_COLUMNS:
        numeric[column] = numeric[column].astype(np.int64)
    return numeric


class MetricsLog:
    """Appends EpochReport rows to a CSV, rewriting the file atomically each time

    Args:
        path (str or Path): CSV location
    """

    def __init__(self, path):
        self.path = Path(path)
        self.logger = logging.getLogger(__name__)
        self.rows = []

    def start(self, resume_epoch=0):
        """Begin logging, keeping only rows up to resume_epoch of an existing file"""
        self.rows = []
        if resume_epoch > 0 and self.path.exists():
            existing = read_metrics(self.path)
            # Kept rows are carried over as their original text
            raw = pd.read_csv(self.path, dtype=str, keep_default_na=False)[METRICS_COLUMNS]
            kept = raw[(existing["epoch"] <= resume_epoch).to_numpy()]
            self.rows = kept.to_dict(orient="records")
            dropped = len(existing) - len(kept)
            if dropped:
                self.logger.info(f"Truncated {dropped} metrics rows after epoch {resume_epoch}")
        self._flush()

    def append(self, report):
        self.rows.append(report.to_metrics_row())
        self._flush()

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=METRICS_COLUMNS)

    def _flush(self):
        atomic_write_csv(self.to_frame(), self.path)
