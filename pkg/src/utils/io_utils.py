"""Atomic file writing helpers"""

import os
import tempfile
from pathlib import Path


def atomic_write_bytes(path, data):
    """Write bytes to path via a temporary file and rename

    Args:
        path (str or Path): destination file
        data (bytes): content

    Returns:
        Path: the destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return path


def atomic_write_text(path, text):
    """Write UTF-8 text atomically"""
    return atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_csv(df, path):
    """Write a DataFrame as CSV (no index) atomically"""
    return atomic_write_text(path, df.to_csv(index=False, lineterminator="\n"))
