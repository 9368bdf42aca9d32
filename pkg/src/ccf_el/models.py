"""Parametric models and their transition characteristic functions.

Each model is registered under its kind with :meth:`Model.register`, the same way report outputs register under a
url scheme. A :class:`ModelSpec` is the plain value (kind, parameter vector, sampling interval) that travels through
the rest of the package; :meth:`ModelSpec.build` validates it and returns the model instance.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import ClassVar, Dict, Mapping, Tuple, Type

import numpy as np
from scipy import integrate, stats

from .errors import ConfigError, DomainError, ParameterError
from .types import SamplePath

_logger = logging.getLogger(__name__)

MONTHLY = 1.0 / 12.0


class ModelKind(str, Enum):
    VSK = "VSK"
    CIR = "CIR"
    VSK_MJ = "VSK_MJ"
    IG_OU = "IG_OU"
    BI_OU = "BI_OU"


def _kind_key(kind) -> str:
    return kind.value if isinstance(kind, ModelKind) else str(kind).upper().replace("-", "_")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    theta: Tuple[float, ...]
    delta: float = MONTHLY

    def __post_init__(self):
        object.__setattr__(self, "kind", _kind_key(self.kind))
        object.__setattr__(self, "theta", tuple(float(v) for v in np.ravel(self.theta)))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def model_class(self) -> Type["Model"]:
        return Model.lookup(self.kind)

    @property
    def param_names(self) -> Tuple[str, ...]:
        return self.model_class.param_names

    @property
    def params(self) -> Dict[str, float]:
        return dict(zip(self.param_names, self.theta))

    def build(self) -> "Model":
        return self.model_class(self.theta, self.delta)

    def with_theta(self, theta) -> "ModelSpec":
        return ModelSpec(self.kind, tuple(np.ravel(theta)), self.delta)

    @classmethod
    def default(cls, kind, delta: float = MONTHLY) -> "ModelSpec":
        return cls(kind, Model.lookup(_kind_key(kind)).default_theta, delta)

    @classmethod
    def from_params(cls, kind, params: Mapping[str, float], delta: float = MONTHLY) -> "ModelSpec":
        model_class = Model.lookup(_kind_key(kind))
        unknown = set(params) - set(model_class.param_names)
        if unknown:
            raise ConfigError(f"Unknown parameters for {model_class.kind}: {sorted(unknown)}")
        theta = [params.get(name, default) for name, default in zip(model_class.param_names, model_class.default_theta)]
        return cls(kind, tuple(theta), delta)


class Model(ABC):
    MODEL_REGISTRY: Dict[str, Type["Model"]] = {}

    kind: ClassVar[str]
    param_names: ClassVar[Tuple[str, ...]]
    default_theta: ClassVar[Tuple[float, ...]]
    dim: ClassVar[int] = 1
    positive_states: ClassVar[bool] = False

    def __init__(self, theta, delta: float):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape != (len(self.param_names),):
            raise ParameterError(f"{self.kind} expects {len(self.param_names)} parameters {self.param_names}")
        if not np.all(np.isfinite(theta)):
            raise ParameterError(f"Non finite parameters for {self.kind}: {theta}")
        if not (np.isfinite(delta) and delta > 0):
            raise ParameterError(f"Sampling interval must be positive, got {delta}")
        self.theta = theta
        self.delta = float(delta)
        self.params = dict(zip(self.param_names, theta))
        self.validate()

    def __getattr__(self, name):
        params = self.__dict__.get("params", {})
        if name in params:
            return params[name]
        raise AttributeError(name)

    def __repr__(self):
        values = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{type(self).__name__}({values}, delta={self.delta:g})"

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.kind, tuple(self.theta), self.delta)

    def validate(self):
        pass

    def _require(self, condition: bool, message: str):
        if not condition:
            raise ParameterError(f"{self.kind}: {message} ({self!r})")

    def frequencies(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u.reshape(-1) if self.dim == 1 else u.reshape(-1, 2)

    def states(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x = x.reshape(-1) if self.dim == 1 else x.reshape(-1, 2)
        if self.positive_states and np.any(x <= 0):
            raise DomainError(f"{self.kind} states must be strictly positive")
        if not np.all(np.isfinite(x)):
            raise DomainError(f"Non finite state for {self.kind}")
        return x

    @abstractmethod
    def ccf(self, u, x) -> np.ndarray:
        """Transition CCF for every state in ``x`` (rows) and frequency in ``u`` (columns)"""

    @abstractmethod
    def stationary_moments(self) -> Tuple[np.ndarray, np.ndarray]: ...

    @classmethod
    @abstractmethod
    def initial_guess(cls, path: SamplePath) -> np.ndarray: ...

    @classmethod
    def register(cls, kind: str):
        def decorator(subclass):
            key = _kind_key(kind)
            if key in cls.MODEL_REGISTRY:
                raise ValueError(f"Duplicate model kind {key}")
            subclass.kind = key
            cls.MODEL_REGISTRY[key] = subclass
            return subclass

        return decorator

    @classmethod
    def lookup(cls, kind: str) -> Type["Model"]:
        try:
            return cls.MODEL_REGISTRY[_kind_key(kind)]
        except KeyError:
            raise ConfigError(f"Unsupported model kind {kind}")


def ou_moments(kappa: float, alpha: float, sigma: float, delta: float, x: np.ndarray):
    """Gaussian transition mean and variance of the Vasicek diffusion"""
    mean = alpha + (x - alpha) * np.exp(-kappa * delta)
    var = sigma**2 * -np.expm1(-2 * kappa * delta) / (2 * kappa)
    return mean, var


def _ar1(path: SamplePath):
    x, y = path.current, path.following
    slope, intercept = np.polyfit(x, y, 1)
    if 0.05 <= slope <= 0.995:
        phi, mean = float(slope), float(intercept / (1 - slope))
    else:
        phi, mean = float(np.clip(slope, 0.05, 0.995)), float(np.mean(path.observations))
    resid = y - (mean + phi * (x - mean))
    return phi, mean, resid


@Model.register(ModelKind.VSK)
class Vasicek(Model):
    param_names = ("kappa", "alpha", "sigma")
    default_theta = (0.858, 0.089, 0.047)

    def validate(self):
        self._require(self.kappa > 0, "kappa must be positive")
        self._require(self.sigma > 0, "sigma must be positive")

    def ccf(self, u, x):
        u, x = self.frequencies(u), self.states(x)
        mean, var = ou_moments(self.kappa, self.alpha, self.sigma, self.delta, x)
        return np.exp(1j * np.outer(mean, u) - 0.5 * var * u[None, :] ** 2)

    def stationary_moments(self):
        return np.array(self.alpha), np.array(self.sigma**2 / (2 * self.kappa))

    @classmethod
    def initial_guess(cls, path):
        phi, mean, resid = _ar1(path)
        kappa = -np.log(phi) / path.delta
        sigma = np.std(resid) * np.sqrt(2 * kappa / (1 - phi**2))
        return np.array([kappa, mean, sigma])


@Model.register(ModelKind.CIR)
class CoxIngersollRoss(Model):
    param_names = ("kappa", "alpha", "sigma")
    default_theta = (0.892, 0.091, 0.181)
    positive_states = True

    def validate(self):
        self._require(self.kappa > 0, "kappa must be positive")
        self._require(self.sigma > 0, "sigma must be positive")
        self._require(self.alpha > 0, "alpha must be positive")
        self._require(2 * self.kappa * self.alpha / self.sigma**2 > 1, "2 kappa alpha / sigma^2 must exceed 1")

    @property
    def scale(self) -> float:
        """``c``: ``c X_{t+1}`` given ``X_t`` is noncentral chi-square"""
        return 4 * self.kappa / (self.sigma**2 * -np.expm1(-self.kappa * self.delta))

    @property
    def dof(self) -> float:
        return 4 * self.kappa * self.alpha / self.sigma**2

    def noncentrality(self, x) -> np.ndarray:
        return self.scale * x * np.exp(-self.kappa * self.delta)

    def ccf(self, u, x):
        u, x = self.frequencies(u), self.states(x)
        c = self.scale
        z = 1 - 2j * u / c
        nc = self.noncentrality(x)
        return np.exp(-0.5 * self.dof * np.log(z)[None, :] + np.outer(nc, 1j * u / c / z))

    def stationary_moments(self):
        return np.array(self.alpha), np.array(self.alpha * self.sigma**2 / (2 * self.kappa))

    @classmethod
    def initial_guess(cls, path):
        phi, mean, resid = _ar1(path)
        kappa = -np.log(phi) / path.delta
        mean = max(mean, 1e-4)
        sigma = np.sqrt(np.mean(resid**2 / path.current) / path.delta)
        # keep the starting point inside the admissible region
        sigma = min(sigma, 0.95 * np.sqrt(2 * kappa * mean))
        return np.array([kappa, mean, sigma])


@lru_cache(maxsize=4096)
def jump_gamma(kappa: float, lam: float, eta: float, delta: float, u: float) -> float:
    """``lam/(2 kappa) * int_{exp(-2 kappa delta)}^1 exp(-eta^2 u^2 y / 2) / y dy``"""
    if u == 0 or eta == 0:
        return lam * delta
    rate = 0.5 * (eta * u) ** 2
    value, _ = integrate.quad(
        lambda y: np.exp(-rate * y) / y, np.exp(-2 * kappa * delta), 1.0, epsabs=0.0, epsrel=1e-10, limit=200
    )
    return lam / (2 * kappa) * value


@Model.register(ModelKind.VSK_MJ)
class VasicekMertonJump(Model):
    param_names = ("kappa", "alpha", "sigma", "lambda", "eta")
    default_theta = (0.858, 0.089, 0.047, 2.0, 0.067)

    def validate(self):
        self._require(self.kappa > 0, "kappa must be positive")
        self._require(self.sigma > 0, "sigma must be positive")
        self._require(self.params["lambda"] >= 0, "lambda must be non-negative")
        self._require(self.eta >= 0, "eta must be non-negative")

    @property
    def intensity(self) -> float:
        return self.params["lambda"]

    def gamma(self, u) -> np.ndarray:
        u = np.abs(self.frequencies(u))
        args = (self.kappa, self.intensity, self.eta, self.delta)
        cache = {v: jump_gamma(*args, float(v)) for v in np.unique(u)}
        return np.array([cache[v] for v in u])

    def ccf(self, u, x):
        u, x = self.frequencies(u), self.states(x)
        mean, var = ou_moments(self.kappa, self.alpha, self.sigma, self.delta, x)
        diffusion = np.exp(1j * np.outer(mean, u) - 0.5 * var * u[None, :] ** 2)
        return diffusion * np.exp(self.gamma(u) - self.intensity * self.delta)[None, :]

    def stationary_moments(self):
        var = (self.sigma**2 + self.intensity * self.eta**2) / (2 * self.kappa)
        return np.array(self.alpha), np.array(var)

    @classmethod
    def initial_guess(cls, path):
        kappa, mean, sigma = Vasicek.initial_guess(path)
        _, _, resid = _ar1(path)
        total = np.var(resid) / path.delta
        excess = stats.kurtosis(resid)
        lam = float(np.clip(0.75 / (path.delta * excess), 0.5, 20.0)) if excess > 0 else 1.0
        return np.array([kappa, mean, np.sqrt(total / 2), lam, np.sqrt(total / (2 * lam))])


@Model.register(ModelKind.IG_OU)
class InverseGaussianOU(Model):
    param_names = ("lambda", "a", "b")
    default_theta = (10.0, 1.0, 20.0)
    positive_states = True

    def validate(self):
        self._require(self.params["lambda"] > 0, "lambda must be positive")
        self._require(self.a > 0, "a must be positive")
        self._require(self.b > 0, "b must be positive")

    @property
    def decay(self) -> float:
        return np.exp(-self.params["lambda"] * self.delta)

    def ccf(self, u, x):
        u, x = self.frequencies(u), self.states(x)
        b2, decay = self.b**2, self.decay
        # numpy's complex sqrt is the principal branch, real part >= 0
        jump = -self.a * (np.sqrt(-2j * u + b2) - np.sqrt(-2j * u * decay + b2))
        return np.exp(jump[None, :] + 1j * np.outer(x * decay, u))

    def stationary_moments(self):
        return np.array(self.a / self.b), np.array(self.a / self.b**3)

    @classmethod
    def initial_guess(cls, path):
        phi, _, _ = _ar1(path)
        mean, var = np.mean(path.observations), np.var(path.observations)
        b = np.sqrt(mean / var)
        return np.array([-np.log(phi) / path.delta, mean * b, b])


def _sinhc(z: float) -> float:
    return 1 + z * z / 6 if abs(z) < 1e-8 else np.sinh(z) / z


@Model.register(ModelKind.BI_OU)
class BivariateOU(Model):
    param_names = ("kappa11", "kappa21", "kappa22", "alpha1", "alpha2", "sigma11", "sigma22")
    default_theta = (0.22, 0.2, 0.5, 0.08, 0.09, 0.09, 0.17)
    dim = 2

    def validate(self):
        self._require(self.kappa11 > 0 and self.kappa22 > 0, "diagonal of kappa must be positive")
        self._require(self.sigma11 > 0 and self.sigma22 > 0, "sigma11 and sigma22 must be positive")

    @property
    def kappa(self) -> np.ndarray:
        return np.array([[self.kappa11, 0.0], [self.kappa21, self.kappa22]])

    @property
    def mean_level(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2])

    @property
    def diffusion(self) -> np.ndarray:
        return np.diag([self.sigma11, self.sigma22])

    def decay_matrix(self, delta: float = None) -> np.ndarray:
        """Closed form of ``exp(-kappa delta)`` for the lower triangular ``kappa``"""
        delta = self.delta if delta is None else delta
        a, c, b = self.kappa11, self.kappa21, self.kappa22
        m, d = (a + b) / 2, (a - b) / 2
        z = d * delta if abs(a - b) >= 1e-8 else 0.0
        return np.array(
            [
                [np.exp(-a * delta), 0.0],
                [-c * delta * np.exp(-m * delta) * _sinhc(z), np.exp(-b * delta)],
            ]
        )

    def stationary_covariance(self) -> np.ndarray:
        kappa = self.kappa
        sst = self.diffusion @ self.diffusion.T
        tr, det = np.trace(kappa), np.linalg.det(kappa)
        shifted = kappa - tr * np.eye(2)
        return (det * sst + shifted @ sst @ shifted.T) / (2 * tr * det)

    def transition_covariance(self, delta: float = None) -> np.ndarray:
        decay = self.decay_matrix(delta)
        sigma = self.stationary_covariance()
        omega = sigma - decay @ sigma @ decay.T
        return (omega + omega.T) / 2

    def transition_mean(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        return self.mean_level + (x - self.mean_level) @ self.decay_matrix().T

    def ccf(self, u, x):
        u, x = self.frequencies(u), self.states(x)
        mean = self.transition_mean(x)
        quad = np.einsum("gi,ij,gj->g", u, self.transition_covariance(), u)
        return np.exp(1j * mean @ u.T - 0.5 * quad[None, :])

    def stationary_moments(self):
        return self.mean_level, self.stationary_covariance()

    @classmethod
    def initial_guess(cls, path):
        x, y = path.current, path.following
        delta = path.delta
        mean = path.observations.mean(axis=0)
        xc, yc = x - mean, y - mean
        phi11 = float(np.clip(np.dot(xc[:, 0], yc[:, 0]) / np.dot(xc[:, 0], xc[:, 0]), 0.05, 0.995))
        (phi21, phi22), *_ = np.linalg.lstsq(xc, yc[:, 1], rcond=None)
        phi22 = float(np.clip(phi22, 0.05, 0.995))
        k11, k22 = -np.log(phi11) / delta, -np.log(phi22) / delta
        m, d = (k11 + k22) / 2, (k11 - k22) / 2
        k21 = -phi21 / (delta * np.exp(-m * delta) * _sinhc(d * delta if abs(k11 - k22) >= 1e-8 else 0.0))
        e1 = yc[:, 0] - phi11 * xc[:, 0]
        e2 = yc[:, 1] - phi21 * xc[:, 0] - phi22 * xc[:, 1]
        s11 = np.std(e1) * np.sqrt(2 * k11 / (1 - phi11**2))
        s22 = np.std(e2) * np.sqrt(2 * k22 / (1 - phi22**2))
        return np.array([k11, k21, k22, mean[0], mean[1], s11, s22])
