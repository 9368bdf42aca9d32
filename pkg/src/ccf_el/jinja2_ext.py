import math
from numbers import Real

import numpy as np
import pandas as pd


def _is_missing(value) -> bool:
    return value is None or (isinstance(value, Real) and not math.isfinite(value))


def num(value, digits: int = 3):
    """Fixed point with ``digits`` decimals, ``-`` for missing values"""
    if _is_missing(value):
        return "-"
    return f"{value:.{digits}f}"


def se(value, digits: int = 3):
    """Standard error in parentheses, as in estimate tables"""
    if _is_missing(value):
        return "(-)"
    return f"({value:.{digits}f})"


def pvalue(value):
    if _is_missing(value):
        return "-"
    if value < 0.001:
        return "<0.001"
    return f"{value:.3f}"


def decision(reject):
    return "reject" if reject else "do not reject"


def markdown_table(frame: pd.DataFrame, digits: int = 4):
    """Pipe table of a data frame, floats rounded to ``digits`` significant digits"""
    cells = frame.replace([np.inf, -np.inf], np.nan)
    cells = cells.astype(object).where(cells.notna(), None)
    return cells.to_markdown(index=False, floatfmt=f".{digits}g", missingval="-")


def is_missing(value):
    return _is_missing(value)


def add_filters(env):
    for fn in [num, se, pvalue, decision, markdown_table]:
        env.filters[fn.__name__] = fn


def add_tests(env):
    for test_name, fn in {"missing": is_missing}.items():
        env.tests[test_name] = fn
