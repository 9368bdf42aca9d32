"""Maximum empirical likelihood estimation over a frequency grid.

The objective is the grid quadrature of the local log EL ratios. Nodes whose dual problem has no solution (the
origin is outside the hull of the residual vectors) are dropped and the remaining weights renormalized; more than
half of the grid dropped makes the objective undefined at that parameter value.
"""

import logging
import time
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .ccf import residual_panel
from .empirical_likelihood import el_ratio_batch, solve_lambda_batch
from .errors import ConfigError, DegenerateError, DomainError, SingularError
from .models import Model, ModelSpec
from .optimize import minimize_barrier
from .types import EstimateResult, FrequencyGrid, SamplePath

_logger = logging.getLogger(__name__)

MAX_INFEASIBLE_SHARE = 0.5
WARN_INFEASIBLE_SHARE = 0.1
JACOBIAN_STEP = 1e-5
MIN_STEP = 1e-8
RIDGE = 1e-10
MIN_EIGENVALUE = 1e-12
MAX_CONDITION = 1e12


class IntegratedEL(NamedTuple):
    value: float
    n_infeasible: int


class NodeSolution(NamedTuple):
    vectors: np.ndarray
    lam: np.ndarray
    usable: np.ndarray
    values: np.ndarray


def _spec(model_kind, theta, data: SamplePath) -> ModelSpec:
    return ModelSpec(model_kind, tuple(np.ravel(theta)), data.delta)


def _solve_nodes(model_kind, theta, data: SamplePath, grid: FrequencyGrid) -> NodeSolution:
    model = _spec(model_kind, theta, data).build()
    vectors = residual_panel(model, data, grid).vectors
    solution = solve_lambda_batch(vectors)
    usable = solution.converged
    values = np.where(usable, el_ratio_batch(vectors, solution.lam), 0.0)
    return NodeSolution(vectors, solution.lam, usable, values)


def integrated_el_ratio(model_kind, theta, data: SamplePath, grid: FrequencyGrid) -> IntegratedEL:
    """``sum_g w_g l_n(tau_g; theta)`` over the usable nodes, weights renormalized"""
    nodes = _solve_nodes(model_kind, theta, data, grid)
    n_infeasible = int(grid.size - nodes.usable.sum())
    if n_infeasible > MAX_INFEASIBLE_SHARE * grid.size:
        raise DegenerateError(f"{n_infeasible} of {grid.size} grid nodes are infeasible")
    if n_infeasible > WARN_INFEASIBLE_SHARE * grid.size:
        _logger.warning(f"{n_infeasible} of {grid.size} grid nodes infeasible at theta={np.ravel(theta)}")
    weights = np.where(nodes.usable, grid.weights, 0.0)
    value = float(np.dot(weights, nodes.values) / weights.sum())
    return IntegratedEL(value, n_infeasible)


def _residuals(model_kind, theta, data: SamplePath, grid: FrequencyGrid) -> np.ndarray:
    return residual_panel(_spec(model_kind, theta, data).build(), data, grid).eps


def residual_jacobian(
    model_kind, theta, data: SamplePath, grid: FrequencyGrid, rel_step: float = JACOBIAN_STEP
) -> np.ndarray:
    """Central differences of the residuals, a ``(G, n-1, p)`` complex array"""
    theta = np.asarray(theta, dtype=float)
    steps = np.maximum(rel_step * np.abs(theta), MIN_STEP)
    columns = []
    for i, step in enumerate(steps):
        shift = np.zeros_like(theta)
        shift[i] = step
        upper = _residuals(model_kind, theta + shift, data, grid)
        lower = _residuals(model_kind, theta - shift, data, grid)
        columns.append((upper - lower) / (2 * step))
    return np.stack(columns, axis=-1).transpose(1, 0, 2)


def q2n_norm(nodes: NodeSolution, jacobian: np.ndarray, weights: np.ndarray) -> float:
    """Norm of the grid integral of ``mean_t (d eps_t/d theta)' lam / (1 + lam' eps_t)``"""
    split = np.stack([jacobian.real, jacobian.imag], axis=2)
    denom = 1.0 + np.einsum("gtk,gk->gt", nodes.vectors, nodes.lam)
    per_node = np.einsum("gtkp,gk,gt->gp", split, nodes.lam, 1.0 / denom) / denom.shape[1]
    used = np.where(nodes.usable, weights, 0.0)
    return float(np.linalg.norm(used @ per_node / used.sum()))


def _covariance(eps: np.ndarray, jacobian: np.ndarray, weights: np.ndarray) -> np.ndarray:
    count = eps.shape[0]
    # complex pair (eps, conj eps) per node and transition
    paired = np.stack([eps.T, eps.T.conj()], axis=-1)
    mean_jac = jacobian.mean(axis=1)
    derivative = np.stack([mean_jac, mean_jac.conj()], axis=1)
    second = np.einsum("gti,gtj->gij", paired, paired.conj()) / count
    smallest = np.linalg.eigvalsh(second)[:, 0]
    second = second + (smallest < MIN_EIGENVALUE)[:, None, None] * RIDGE * np.eye(2)
    projected = np.einsum("gip,gij->gpj", derivative.conj(), np.linalg.inv(second))
    gamma = np.einsum("g,gpj,gjq->pq", weights, projected, derivative).real
    if np.linalg.cond(gamma) > MAX_CONDITION:
        raise SingularError(f"Gamma is numerically singular (condition number {np.linalg.cond(gamma):.3g})")
    score = np.einsum("g,gpj,gtj->tp", weights, projected, paired).real
    middle = score.T @ score / count
    inverse = np.linalg.inv(gamma)
    covariance = inverse @ middle @ inverse / count
    return (covariance + covariance.T) / 2


def asymptotic_covariance(model_kind, theta_hat, data: SamplePath, grid: FrequencyGrid) -> np.ndarray:
    """Plug-in sandwich ``Gamma^-1 V Gamma^-1 / n`` of the EL estimator.

    ``Gamma`` integrates ``E(d eps~/d theta)* A^-1 E(d eps~/d theta)`` over the grid with ``A`` the second moment of
    the paired residual ``eps~ = (eps, conj eps)``; ``V`` is the variance of the integrated score. Residuals are
    martingale differences, so no autocorrelation correction is applied.
    """
    eps = _residuals(model_kind, theta_hat, data, grid)
    jacobian = residual_jacobian(model_kind, theta_hat, data, grid)
    return _covariance(eps, jacobian, grid.weights)


def _check_domain(model_class, data: SamplePath):
    if model_class.dim != data.dim:
        raise ConfigError(f"{model_class.kind} is {model_class.dim}-dimensional, data is {data.dim}-dimensional")
    if model_class.positive_states and np.any(data.observations <= 0):
        raise DomainError(f"{model_class.kind} requires strictly positive observations")


def minimize_el(
    model_kind,
    data: SamplePath,
    grid: FrequencyGrid,
    theta_init: Optional[Sequence[float]] = None,
    covariance: bool = True,
) -> EstimateResult:
    """Maximum empirical likelihood estimate, with the plug-in covariance unless ``covariance=False``"""
    model_class = Model.lookup(model_kind)
    _check_domain(model_class, data)
    if theta_init is None:
        theta_init = model_class.initial_guess(data)
    start = time.perf_counter()
    _logger.info(f"Fitting {model_class.kind} by EL on n={data.n} with {grid.size} grid nodes")

    minimum = minimize_barrier(lambda theta: integrated_el_ratio(model_class.kind, theta, data, grid).value, theta_init)
    theta_hat = minimum.theta
    nodes = _solve_nodes(model_class.kind, theta_hat, data, grid)
    final = integrated_el_ratio(model_class.kind, theta_hat, data, grid)
    jacobian = residual_jacobian(model_class.kind, theta_hat, data, grid)
    q2n = q2n_norm(nodes, jacobian, grid.weights)

    cov = None
    if covariance:
        try:
            cov = _covariance(_residuals(model_class.kind, theta_hat, data, grid), jacobian, grid.weights)
        except SingularError as err:
            _logger.warning(f"No standard errors for {model_class.kind}: {err}")

    _logger.info(
        f"EL fit of {model_class.kind} done in {time.perf_counter() - start:.1f}s: "
        f"theta={np.round(theta_hat, 6).tolist()} l_n={final.value:.6g}"
    )
    return EstimateResult(
        model=model_class.kind,
        param_names=model_class.param_names,
        theta_hat=theta_hat,
        el_value=final.value,
        covariance=cov,
        q2n_norm=q2n,
        n_infeasible=final.n_infeasible,
        grid=grid.summary(),
        seed=data.seed,
        trace=minimum.trace,
    )
