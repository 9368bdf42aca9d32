"""Path simulation for the five models.

Samplers register per model kind (``PathSampler.register``). Every sampler offers a vectorised one-step
``transition`` from an array of states, used for Monte-Carlo checks against the CCF, and a ``path`` method that may
use a faster equivalent recursion.

Random streams are Philox generators seeded from :class:`numpy.random.SeedSequence`, so replicate ``k`` of a study
always gets the same stream no matter how the replicates are spread over workers.
"""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Tuple, Type, Union

import numpy as np
from scipy import signal, special

from .ccf import ModelLike, as_model
from .errors import ConfigError, NumericalError
from .models import Model, ModelKind
from .types import SamplePath

_logger = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.SeedSequence]

VSK_MJ_SUBSTEPS = 32
BURN_IN_TRANSITIONS = 1000
BURN_IN_SPACING = 10
IG_OU_MEAN_TOLERANCE = 1e-6


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_sequence(seed)))


def child_seeds(seed: SeedLike, count: int) -> List[np.random.SeedSequence]:
    return seed_sequence(seed).spawn(count)


def rng_streams(seed: SeedLike, count: int) -> List[np.random.Generator]:
    """Independent generators, one per path or replicate"""
    return [make_rng(child) for child in child_seeds(seed, count)]


def _ar1_filter(innovations: np.ndarray, phi: float, start: float) -> np.ndarray:
    """``y_k = phi * y_{k-1} + innovations_k`` with ``y_0 = start``, returns ``y_1 ..``"""
    filtered, _ = signal.lfilter([1.0], [1.0, -phi], innovations, zi=[phi * start])
    return filtered


class PathSampler(ABC):
    SAMPLER_REGISTRY: Dict[str, Type["PathSampler"]] = {}

    def __init__(self, model: Model):
        self.model = model

    @abstractmethod
    def stationary(self, rng: np.random.Generator): ...

    @abstractmethod
    def transition(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...

    def path(self, x0, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, Optional[int]]:
        x = np.asarray(x0, dtype=float)
        observations = [x]
        for _ in range(n - 1):
            x = self.transition(x[None, ...], rng)[0]
            observations.append(x)
        return np.array(observations), None

    @classmethod
    def register(cls, kind):
        def decorator(subclass):
            key = kind.value if isinstance(kind, ModelKind) else kind
            if key in cls.SAMPLER_REGISTRY:
                raise ValueError(f"Duplicate sampler for {key}")
            cls.SAMPLER_REGISTRY[key] = subclass
            return subclass

        return decorator

    @classmethod
    def for_model(cls, model: Model) -> "PathSampler":
        if model.kind not in cls.SAMPLER_REGISTRY:
            raise ConfigError(f"No sampler available for {model.kind}")
        return cls.SAMPLER_REGISTRY[model.kind](model)


@PathSampler.register(ModelKind.VSK)
class VasicekSampler(PathSampler):
    def stationary(self, rng):
        mean, var = self.model.stationary_moments()
        return float(rng.normal(mean, np.sqrt(var)))

    def transition(self, x, rng):
        m = self.model
        mean = m.alpha + (x - m.alpha) * np.exp(-m.kappa * m.delta)
        var = m.sigma**2 * -np.expm1(-2 * m.kappa * m.delta) / (2 * m.kappa)
        return mean + np.sqrt(var) * rng.standard_normal(np.shape(x))

    def path(self, x0, n, rng):
        m = self.model
        phi = np.exp(-m.kappa * m.delta)
        sd = np.sqrt(m.sigma**2 * -np.expm1(-2 * m.kappa * m.delta) / (2 * m.kappa))
        filtered = _ar1_filter(sd * rng.standard_normal(n - 1), phi, x0 - m.alpha)
        return np.concatenate([[x0], m.alpha + filtered]), None


@PathSampler.register(ModelKind.CIR)
class CIRSampler(PathSampler):
    def stationary(self, rng):
        m = self.model
        return float(rng.gamma(2 * m.kappa * m.alpha / m.sigma**2, m.sigma**2 / (2 * m.kappa)))

    def _draw(self, x, rng):
        # noncentral chi-square as a Poisson mixture of Gammas
        m = self.model
        counts = rng.poisson(m.noncentrality(x) / 2)
        return rng.gamma(m.dof / 2 + counts, 2.0) / m.scale

    def transition(self, x, rng):
        x = np.asarray(x, dtype=float)
        draws = self._draw(x, rng)
        bad = draws <= 0
        if np.any(bad):
            _logger.warning(f"Resampling {bad.sum()} non positive CIR draws")
            draws[bad] = self._draw(x[bad], rng)
            if np.any(draws <= 0):
                raise NumericalError("CIR transition produced a non positive state twice")
        return draws


@PathSampler.register(ModelKind.VSK_MJ)
class JumpDiffusionSampler(PathSampler):
    """Euler scheme with ``substeps`` steps per sampling interval and Poisson jump counts per step"""

    substeps = VSK_MJ_SUBSTEPS

    def _innovations(self, count: int, h: float, rng):
        m = self.model
        jumps = rng.poisson(m.intensity * h, count)
        noise = m.sigma * np.sqrt(h) * rng.standard_normal(count)
        noise += m.eta * np.sqrt(jumps) * rng.standard_normal(count)
        return noise, int(jumps.sum())

    def _euler(self, x0: float, steps: int, h: float, rng):
        m = self.model
        noise, n_jumps = self._innovations(steps, h, rng)
        return m.alpha + _ar1_filter(noise, 1 - m.kappa * h, x0 - m.alpha), n_jumps

    def stationary(self, rng):
        m = self.model
        h = BURN_IN_SPACING * m.delta / self.substeps
        values, _ = self._euler(m.alpha, BURN_IN_TRANSITIONS * self.substeps, h, rng)
        return float(values[-1])

    def transition(self, x, rng):
        m = self.model
        h = m.delta / self.substeps
        x = np.array(x, dtype=float)
        for _ in range(self.substeps):
            noise, _ = self._innovations(x.size, h, rng)
            x = x + m.kappa * (m.alpha - x) * h + noise.reshape(x.shape)
        return x

    def path(self, x0, n, rng):
        values, n_jumps = self._euler(x0, (n - 1) * self.substeps, self.model.delta / self.substeps, rng)
        return np.concatenate([[x0], values[self.substeps - 1 :: self.substeps]]), n_jumps


@PathSampler.register(ModelKind.IG_OU)
class InverseGaussianOUSampler(PathSampler):
    """Sub-stepped exact OU recursion driven by a truncated series of the background driving Levy process.

    Over a sub-step of Levy time ``T`` the increment is ``int_0^T exp(-(T - s)) dZ(s)`` where ``Z`` is an IG(a/2, b)
    Levy process plus a compound Poisson process with rate ``a b / 2`` and jumps ``N(0,1)^2 / b^2``. The IG part keeps
    the jumps above a level chosen so that the mean of the discarded ones stays below ``1e-6 a / b``; that mean is
    added back as a drift.
    """

    chunk = 20000

    def __init__(self, model):
        super().__init__(model)
        m = model
        full = (m.params["lambda"] * m.delta) ** 2 * m.a * m.b / (2 * np.pi * IG_OU_MEAN_TOLERANCE)
        self.substeps = int(max(8, np.ceil(np.sqrt(full / 16))))
        self.levy_time = m.params["lambda"] * m.delta / self.substeps
        t = self.levy_time
        self.max_point = t * t * m.a * m.b / (2 * np.pi * IG_OU_MEAN_TOLERANCE)
        threshold = (IG_OU_MEAN_TOLERANCE * np.sqrt(2 * np.pi) / (t * m.b)) ** 2
        self.small_jump_drift = m.a / (2 * m.b) * special.erf(m.b * np.sqrt(threshold / 2)) * -np.expm1(-t)

    def _chunk_increments(self, count: int, rng) -> np.ndarray:
        m, t = self.model, self.levy_time
        counts = rng.poisson(self.max_point, count)
        owner = np.repeat(np.arange(count), counts)
        points = self.max_point * (1.0 - rng.random(owner.size))
        times = rng.uniform(0.0, t, owner.size)
        sizes = (m.a * t / (np.sqrt(2 * np.pi) * points)) ** 2
        keep = rng.random(owner.size) < np.exp(-0.5 * m.b**2 * sizes)
        total = np.bincount(owner[keep], weights=(sizes * np.exp(times - t))[keep], minlength=count)

        counts = rng.poisson(0.5 * m.a * m.b * t, count)
        owner = np.repeat(np.arange(count), counts)
        sizes = rng.standard_normal(owner.size) ** 2 / m.b**2
        times = rng.uniform(0.0, t, owner.size)
        total += np.bincount(owner, weights=sizes * np.exp(times - t), minlength=count)
        return total + self.small_jump_drift

    def increments(self, count: int, rng) -> np.ndarray:
        parts = [self._chunk_increments(min(self.chunk, count - start), rng) for start in range(0, count, self.chunk)]
        return np.concatenate(parts) if parts else np.empty(0)

    def stationary(self, rng):
        m = self.model
        return float(rng.wald(m.a / m.b, m.a**2))

    def transition(self, x, rng):
        x = np.array(x, dtype=float)
        steps = self.increments(x.size * self.substeps, rng).reshape(self.substeps, x.size)
        decay = np.exp(-self.levy_time)
        for step in steps:
            x = decay * x + step.reshape(x.shape)
        return x

    def path(self, x0, n, rng):
        steps = self.increments((n - 1) * self.substeps, rng)
        values = _ar1_filter(steps, np.exp(-self.levy_time), x0)
        return np.concatenate([[x0], values[self.substeps - 1 :: self.substeps]]), None


@PathSampler.register(ModelKind.BI_OU)
class BivariateOUSampler(PathSampler):
    def stationary(self, rng):
        mean, cov = self.model.stationary_moments()
        return mean + np.linalg.cholesky(cov) @ rng.standard_normal(2)

    def transition(self, x, rng):
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        chol = np.linalg.cholesky(self.model.transition_covariance())
        return self.model.transition_mean(x) + rng.standard_normal(x.shape) @ chol.T


def stationary_init(model: ModelLike, rng: np.random.Generator):
    """Draw ``X_0`` from the stationary law of the model"""
    model = as_model(model)
    return PathSampler.for_model(model).stationary(rng)


def sample_transitions(model: ModelLike, x, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent one-step transitions from the fixed state ``x``"""
    model = as_model(model)
    states = np.tile(model.states(x)[0], (size, 1)) if model.dim == 2 else np.full(size, model.states(x)[0])
    return PathSampler.for_model(model).transition(states, rng)


def simulate_path(
    model: ModelLike, n: int, rng: np.random.Generator, x0=None, seed: Optional[int] = None
) -> SamplePath:
    model = as_model(model)
    if n < 2:
        raise ConfigError(f"A path needs at least two observations, got n={n}")
    sampler = PathSampler.for_model(model)
    if x0 is None:
        x0 = sampler.stationary(rng)
    else:
        x0 = model.states(x0)[0]
    observations, n_jumps = sampler.path(x0, n, rng)
    if model.positive_states and np.any(observations <= 0):
        _logger.warning(f"Non positive {model.kind} path, resampling once")
        observations, n_jumps = sampler.path(x0, n, rng)
        if np.any(observations <= 0):
            raise NumericalError(f"{model.kind} simulation produced non positive states twice")
    if not np.all(np.isfinite(observations)):
        raise NumericalError(f"{model.kind} simulation diverged")
    return SamplePath(observations, model.delta, seed=seed, n_jumps=n_jumps)
