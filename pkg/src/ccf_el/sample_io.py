"""CSV ingestion and export of sample paths.

Files have a ``t,x`` header (``t,x1,x2`` for bivariate data) and one row per observation with consecutive integer
``t``. Line numbers in errors count the header as line 1.
"""

import logging
import os
from typing import Union

import numpy as np
import pandas as pd

from .errors import DataError, GapError, ParseError
from .models import MONTHLY
from .types import SamplePath

_logger = logging.getLogger(__name__)

HEADERS = {1: ["t", "x"], 2: ["t", "x1", "x2"]}
FLOAT_FORMAT = "%.17g"

PathLike = Union[str, os.PathLike]


def _line(index: int) -> int:
    return int(index) + 2


def ingest_csv(path: PathLike, delta: float = MONTHLY) -> SamplePath:
    if not os.path.exists(path):
        raise DataError(f"Input file {path} does not exist")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as err:
        raise ParseError(f"Unreadable CSV file {path}: {err}")

    columns = [c.strip() for c in frame.columns]
    if columns not in HEADERS.values():
        raise ParseError(f"Expected header 't,x' or 't,x1,x2', got {','.join(columns)}", line=1)
    frame.columns = columns

    checked = frame.apply(pd.to_numeric, errors="coerce")
    bad = checked.isna().any(axis=1) | ~np.isfinite(checked.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        index = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"Non numeric value in {frame.iloc[index].tolist()}", line=_line(index))
    # exact decimal to double conversion, so written paths read back unchanged
    numeric = frame.astype(float)

    t = numeric["t"].to_numpy(dtype=float)
    not_integer = t != np.round(t)
    if not_integer.any():
        index = int(np.flatnonzero(not_integer)[0])
        raise ParseError(f"t must be an integer, got {frame['t'].iloc[index]}", line=_line(index))
    steps = np.diff(t)
    if np.any(steps <= 0):
        index = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise ParseError(f"t must be strictly increasing, got {t[index - 1]:g} then {t[index]:g}", line=_line(index))
    if np.any(steps > 1):
        index = int(np.flatnonzero(steps > 1)[0]) + 1
        raise GapError(f"missing t={t[index - 1] + 1:g} (next t is {t[index]:g})", line=_line(index))

    if len(frame) < 2:
        raise DataError(f"{path} holds {len(frame)} observation(s), at least two are needed")
    observations = numeric[columns[1:]].to_numpy(dtype=float)
    observations = observations[:, 0] if observations.shape[1] == 1 else observations
    _logger.info(f"Read {len(frame)} observations from {path}")
    return SamplePath(observations, delta)


def write_csv(path: PathLike, data: SamplePath):
    columns = HEADERS[data.dim]
    values = data.observations.reshape(data.n, -1)
    frame = pd.DataFrame(values, columns=columns[1:])
    frame.insert(0, "t", np.arange(1, data.n + 1))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    _logger.info(f"Wrote {data.n} observations to {path}")


def summary_statistics(data: SamplePath) -> dict:
    """Mean and SD of the levels and of the one-step differences, per coordinate"""
    values = data.observations.reshape(data.n, -1)
    diffs = np.diff(values, axis=0)
    return {
        "n": data.n,
        "mean": values.mean(axis=0).tolist(),
        "sd": values.std(axis=0, ddof=1).tolist(),
        "diff_mean": diffs.mean(axis=0).tolist(),
        "diff_sd": diffs.std(axis=0, ddof=1).tolist(),
    }
