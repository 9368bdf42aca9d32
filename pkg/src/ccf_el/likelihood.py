"""Likelihood baselines: exact transition densities where they exist, the normal mixture approximation for the
jump diffusion. The inverse Gaussian OU model has no usable transition density and no likelihood here.
"""

import logging
import time
from typing import Callable, Dict, NamedTuple, Optional, Sequence

import numpy as np
from scipy import special, stats

from .errors import ConfigError, DomainError, ParameterError, SingularError
from .models import BivariateOU, CoxIngersollRoss, Model, ModelKind, ModelSpec, VasicekMertonJump, ou_moments
from .optimize import finite_difference_hessian, minimize_barrier, standard_errors
from .types import LogLikResult, SamplePath

_logger = logging.getLogger(__name__)

BESSEL_SERIES_TERMS = 64
MAX_CONDITION = 1e12


class LogLikelihood(NamedTuple):
    function: Callable[[Sequence[float], SamplePath], float]
    method: str


LOGLIK_REGISTRY: Dict[str, LogLikelihood] = {}


def register_loglik(kind: ModelKind, method: str = "mle"):
    def decorator(function):
        if kind.value in LOGLIK_REGISTRY:
            raise ValueError(f"Duplicate log-likelihood for {kind.value}")
        LOGLIK_REGISTRY[kind.value] = LogLikelihood(function, method)
        return function

    return decorator


def log_bessel_iv(nu: float, z) -> np.ndarray:
    """``log I_nu(z)`` for ``z > 0``, with a power series where the scaled Bessel function underflows"""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    with np.errstate(divide="ignore"):
        result = np.log(special.ive(nu, z)) + z
    bad = ~np.isfinite(result)
    if np.any(bad):
        m = np.arange(BESSEL_SERIES_TERMS)[:, None]
        log_half = np.log(z[bad] / 2)[None, :]
        terms = (2 * m + nu) * log_half - special.gammaln(m + 1) - special.gammaln(m + 1 + nu)
        result[bad] = special.logsumexp(terms, axis=0)
    return result


def _model(kind: ModelKind, theta, data: SamplePath) -> Model:
    return ModelSpec(kind, tuple(np.ravel(theta)), data.delta).build()


def vsk_transition_logpdf(model: Model, x, y) -> np.ndarray:
    mean, var = ou_moments(model.kappa, model.alpha, model.sigma, model.delta, np.asarray(x, dtype=float))
    return stats.norm.logpdf(y, loc=mean, scale=np.sqrt(var))


def cir_transition_logpdf(model: CoxIngersollRoss, x, y) -> np.ndarray:
    """Log density of ``X_{t+1} = Y / c`` with ``Y`` noncentral chi-square"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("CIR densities need strictly positive states")
    c, q = model.scale, model.dof
    nc = model.noncentrality(x)
    scaled = c * y
    order = q / 2 - 1
    log_bessel = log_bessel_iv(order, np.sqrt(nc * scaled)).reshape(np.broadcast(nc, scaled).shape)
    return np.log(c) - np.log(2) - (scaled + nc) / 2 + order / 2 * np.log(scaled / nc) + log_bessel


def vskmj_transition_logpdf(model: VasicekMertonJump, x, y) -> np.ndarray:
    """First order normal mixture ``(1 - lam delta) N(m, v) + lam delta N(m, v + eta^2)``"""
    jump_prob = model.intensity * model.delta
    if jump_prob >= 1:
        raise ParameterError(f"lambda * delta must be below one for the mixture approximation, got {jump_prob}")
    mean, var = ou_moments(model.kappa, model.alpha, model.sigma, model.delta, np.asarray(x, dtype=float))
    quiet = stats.norm.logpdf(y, loc=mean, scale=np.sqrt(var))
    jumpy = stats.norm.logpdf(y, loc=mean, scale=np.sqrt(var + model.eta**2))
    with np.errstate(divide="ignore"):
        return np.logaddexp(np.log1p(-jump_prob) + quiet, np.log(jump_prob) + jumpy)


def biou_transition_logpdf(model: BivariateOU, x, y) -> np.ndarray:
    omega = model.transition_covariance()
    eigenvalues = np.linalg.eigvalsh(omega)
    if eigenvalues[0] <= 0 or eigenvalues[-1] / eigenvalues[0] > MAX_CONDITION:
        raise SingularError(f"Transition covariance is numerically singular: eigenvalues {eigenvalues}")
    y = np.asarray(y, dtype=float).reshape(-1, 2)
    return stats.multivariate_normal(mean=np.zeros(2), cov=omega).logpdf(y - model.transition_mean(x))


@register_loglik(ModelKind.VSK)
def vsk_loglik(theta, data: SamplePath) -> float:
    return float(np.sum(vsk_transition_logpdf(_model(ModelKind.VSK, theta, data), data.current, data.following)))


@register_loglik(ModelKind.CIR)
def cir_loglik(theta, data: SamplePath) -> float:
    model = _model(ModelKind.CIR, theta, data)
    return float(np.sum(cir_transition_logpdf(model, data.current, data.following)))


@register_loglik(ModelKind.VSK_MJ, method="amle")
def vskmj_approx_loglik(theta, data: SamplePath) -> float:
    model = _model(ModelKind.VSK_MJ, theta, data)
    return float(np.sum(vskmj_transition_logpdf(model, data.current, data.following)))


@register_loglik(ModelKind.BI_OU)
def biou_loglik(theta, data: SamplePath) -> float:
    model = _model(ModelKind.BI_OU, theta, data)
    return float(np.sum(biou_transition_logpdf(model, data.current, data.following)))


def mle_fit(model_kind, data: SamplePath, theta_init: Optional[Sequence[float]] = None) -> LogLikResult:
    """Maximize the (approximate) log-likelihood with the same optimizer as the EL fit"""
    model_class = Model.lookup(model_kind)
    if model_class.kind not in LOGLIK_REGISTRY:
        raise ConfigError(f"No likelihood is available for {model_class.kind}")
    if model_class.dim != data.dim:
        raise ConfigError(f"{model_class.kind} is {model_class.dim}-dimensional, data is {data.dim}-dimensional")
    if model_class.positive_states and np.any(data.observations <= 0):
        raise DomainError(f"{model_class.kind} requires strictly positive observations")
    loglik, method = LOGLIK_REGISTRY[model_class.kind]
    if theta_init is None:
        theta_init = model_class.initial_guess(data)
    start = time.perf_counter()
    transitions = data.n - 1
    minimum = minimize_barrier(lambda theta: -loglik(theta, data) / transitions, theta_init)
    theta_hat = minimum.theta
    value = loglik(theta_hat, data)

    try:
        hessian = finite_difference_hessian(lambda theta: -loglik(theta, data), theta_hat)
        se = standard_errors(hessian)
    except (ParameterError, DomainError, SingularError) as err:
        _logger.warning(f"Hessian of the {method} objective left the parameter space: {err}")
        se = None
    if se is None:
        se = np.full(theta_hat.size, np.nan)

    elapsed = time.perf_counter() - start
    _logger.info(f"{method.upper()} fit of {model_class.kind} done in {elapsed:.1f}s, loglik={value:.6g}")
    return LogLikResult(
        model=model_class.kind,
        param_names=model_class.param_names,
        theta_hat=theta_hat,
        loglik=value,
        hessian_se=se,
        method=method,
        seed=data.seed,
    )
