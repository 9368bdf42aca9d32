"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`CcfElError`. The ``exit_code`` attribute is what
the command line returns when the error escapes a command: 2 for configuration problems, 3 for bad input data and 4
for numerical failures.
"""

from typing import Optional


class CcfElError(RuntimeError):
    exit_code = 1


class ConfigError(CcfElError):
    exit_code = 2


class ParameterError(ConfigError, ValueError):
    """Parameter vector outside the model's admissible region"""


class DataError(CcfElError):
    exit_code = 3


class DomainError(DataError):
    """State outside the state space of the model"""


class ParseError(DataError):
    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GapError(ParseError):
    pass


class NumericalError(CcfElError):
    exit_code = 4


class ConvexHullError(NumericalError):
    """The origin is not inside the convex hull of the residual vectors"""


class MaxIterError(NumericalError):
    pass


class FeasibilityError(NumericalError):
    pass


class DegenerateError(NumericalError):
    pass


class OptimizerError(NumericalError):
    pass


class SingularError(NumericalError):
    pass


class SparseNeighborhoodError(NumericalError):
    pass


class BootstrapError(NumericalError):
    pass


class StudyError(NumericalError):
    """Too many failed replicates in a Monte-Carlo study"""
