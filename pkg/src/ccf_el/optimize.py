"""Derivative-free minimization shared by the EL and likelihood estimators.

Parameters are rescaled by the size of the starting point so the Nelder-Mead tolerances are relative. Any parameter
vector outside the model's admissible region, or where the objective cannot be evaluated, is mapped to ``+inf``.
"""

import logging
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy import optimize

from .errors import DegenerateError, DomainError, OptimizerError, ParameterError

_logger = logging.getLogger(__name__)

XATOL = 1e-6
FATOL = 1e-8
MAX_ITERATIONS = 2000
MIN_SCALE = 1e-3
RESTARTS = 1


class Minimum(NamedTuple):
    theta: np.ndarray
    value: float
    converged: bool
    iterations: int
    trace: List[float]


def barrier(objective: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    """``objective`` with inadmissible points sent to ``+inf``"""

    def wrapped(theta):
        try:
            value = float(objective(theta))
        except (ParameterError, DomainError, DegenerateError) as err:
            _logger.debug(f"Barrier at {theta}: {err}")
            return np.inf
        return value if np.isfinite(value) else np.inf

    return wrapped


def minimize_barrier(
    objective: Callable[[np.ndarray], float],
    theta_init,
    xatol: float = XATOL,
    fatol: float = FATOL,
    max_iter: int = MAX_ITERATIONS,
    restarts: int = RESTARTS,
) -> Minimum:
    """Nelder-Mead with a barrier, restarted from the best vertex.

    Raises :class:`OptimizerError` when the starting point is inadmissible or when no run converges.
    """
    theta_init = np.asarray(theta_init, dtype=float)
    scale = np.maximum(np.abs(theta_init), MIN_SCALE)
    guarded = barrier(objective)
    trace: List[float] = []
    best = {"value": np.inf}

    def scaled(z):
        value = guarded(z * scale)
        if value < best["value"]:
            best["value"] = value
        return value

    def record(_):
        trace.append(best["value"])
        _logger.debug(f"Iteration {len(trace)}: objective {best['value']:.10g}")

    if not np.isfinite(scaled(np.ones_like(theta_init))):
        raise OptimizerError(f"Objective is not finite at the starting point {theta_init}")

    z = np.ones_like(theta_init)
    converged = False
    iterations = 0
    value = np.inf
    for attempt in range(restarts + 1):
        result = optimize.minimize(
            scaled,
            z,
            method="Nelder-Mead",
            callback=record,
            options={"xatol": xatol, "fatol": fatol, "maxiter": max_iter, "maxfev": 4 * max_iter},
        )
        iterations += int(result.nit)
        if result.fun <= value:
            z, value = result.x, float(result.fun)
        converged = converged or bool(result.success)
        _logger.debug(f"Nelder-Mead run {attempt + 1}: {result.message} value={result.fun:.10g}")

    if not converged:
        raise OptimizerError(f"Nelder-Mead did not converge in {max_iter} iterations (restarted {restarts} time(s))")
    return Minimum(z * scale, value, converged, iterations, trace)


def finite_difference_hessian(func: Callable[[np.ndarray], float], theta, rel_step: float = 1e-4) -> np.ndarray:
    """Central difference Hessian with steps relative to ``|theta|``"""
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    steps = rel_step * np.maximum(np.abs(theta), MIN_SCALE)
    hessian = np.empty((p, p))
    f0 = func(theta)
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = steps[i]
        hessian[i, i] = (func(theta + ei) - 2 * f0 + func(theta - ei)) / steps[i] ** 2
        for j in range(i):
            ej = np.zeros(p)
            ej[j] = steps[j]
            value = (
                func(theta + ei + ej) - func(theta + ei - ej) - func(theta - ei + ej) + func(theta - ei - ej)
            ) / (4 * steps[i] * steps[j])
            hessian[i, j] = hessian[j, i] = value
    return hessian


def standard_errors(hessian: np.ndarray) -> Optional[np.ndarray]:
    """Square roots of the diagonal of the inverse of a negative log-likelihood Hessian"""
    try:
        covariance = np.linalg.inv(hessian)
    except np.linalg.LinAlgError:
        return None
    return np.sqrt(np.clip(np.diag(covariance), 0.0, None))
