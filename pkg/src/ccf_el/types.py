from dataclasses import dataclass, field
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

ESTIMATE_MODE = "estimate"
TEST_MODE = "test"
MODES = (ESTIMATE_MODE, TEST_MODE)


def _as_float_tuple(value) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(value, dtype=float)))


@dataclass(frozen=True)
class FrequencyPoint:
    """A node ``tau = (u, r)``: ``u`` is the CCF frequency and ``r`` the instrument frequency"""

    u: Tuple[float, ...]
    r: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "u", _as_float_tuple(self.u))
        object.__setattr__(self, "r", _as_float_tuple(self.r))
        if len(self.u) != len(self.r) or len(self.u) not in (1, 2):
            raise ValueError(f"Frequency point dimensions must match and be 1 or 2: u={self.u} r={self.r}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.r))):
            raise ValueError(f"Non finite frequency point: u={self.u} r={self.r}")

    @property
    def dim(self) -> int:
        return len(self.u)

    def __neg__(self) -> "FrequencyPoint":
        return FrequencyPoint(tuple(-v for v in self.u), tuple(-v for v in self.r))


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Quadrature representation of the weight measure on the frequency support.

    ``u`` and ``r`` are ``(G, d)`` arrays, ``weights`` sums to one and ``u_max``/``r_max`` give the half-widths of the
    box ``S`` per axis.
    """

    u: np.ndarray
    r: np.ndarray
    weights: np.ndarray
    u_max: Tuple[float, ...]
    r_max: Tuple[float, ...]
    mode: str = ESTIMATE_MODE

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        r = np.asarray(self.r, dtype=float)
        u = u[:, None] if u.ndim == 1 else u
        r = r[:, None] if r.ndim == 1 else r
        weights = np.asarray(self.weights, dtype=float)
        if u.shape != r.shape or u.shape[0] != weights.shape[0]:
            raise ValueError(f"Inconsistent grid shapes u={u.shape} r={r.shape} weights={weights.shape}")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"Grid weights must be non-negative and sum to one (sum={weights.sum()!r})")
        if self.mode not in MODES:
            raise ValueError(f"Unknown grid mode {self.mode}")
        u_max = _as_float_tuple(self.u_max)
        r_max = _as_float_tuple(self.r_max)
        if np.any(np.abs(u) > np.asarray(u_max) * (1 + 1e-12)) or np.any(np.abs(r) > np.asarray(r_max) * (1 + 1e-12)):
            raise ValueError("Grid nodes outside the support box")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "u_max", u_max)
        object.__setattr__(self, "r_max", r_max)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.u.shape[1]

    @property
    def nodes(self) -> List[FrequencyPoint]:
        return [FrequencyPoint(u, r) for u, r in zip(self.u, self.r)]

    def summary(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "nodes": int(self.size),
            "u_max": list(self.u_max),
            "r_max": list(self.r_max),
        }


@dataclass(frozen=True, eq=False)
class SamplePath:
    observations: np.ndarray
    delta: float
    seed: Optional[int] = None
    n_jumps: Optional[int] = None

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim not in (1, 2) or (obs.ndim == 2 and obs.shape[1] != 2):
            raise ValueError(f"Observations must be a sequence of scalars or 2-vectors, got shape {obs.shape}")
        if obs.shape[0] < 2:
            raise ValueError("A sample path needs at least two observations")
        if not np.all(np.isfinite(obs)):
            raise ValueError("Sample path contains non finite observations")
        if not self.delta > 0:
            raise ValueError(f"Sampling interval must be positive, got {self.delta}")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.observations.ndim == 1 else 2

    @property
    def current(self) -> np.ndarray:
        """States ``X_1 .. X_{n-1}`` that condition each transition"""
        return self.observations[:-1]

    @property
    def following(self) -> np.ndarray:
        """States ``X_2 .. X_n`` reached by each transition"""
        return self.observations[1:]


@dataclass(frozen=True, eq=False)
class ResidualPanel:
    """CCF residuals ``eps[t, g]`` for every transition ``t`` and grid node ``g``"""

    eps: np.ndarray

    @property
    def vectors(self) -> np.ndarray:
        """Real/imaginary split as a ``(G, n-1, 2)`` array, one panel per node"""
        return np.stack([self.eps.real.T, self.eps.imag.T], axis=-1)


@dataclass(frozen=True)
class LambdaSolve:
    lam: np.ndarray
    converged: bool
    residual_norm: float
    iterations: int


def _named(names: Sequence[str], values) -> Dict[str, Optional[float]]:
    return {
        name: (float(v) if v is not None and np.isfinite(v) else None)
        for name, v in zip(names, values if values is not None else [None] * len(names))
    }


@dataclass
class EstimateResult:
    kind: ClassVar[str] = "estimate"
    method: ClassVar[str] = "el"

    model: str
    param_names: Tuple[str, ...]
    theta_hat: np.ndarray
    el_value: float
    covariance: Optional[np.ndarray]
    q2n_norm: float
    n_infeasible: int = 0
    grid: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None
    trace: List[float] = field(default_factory=list)

    @property
    def standard_errors(self) -> Optional[np.ndarray]:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "model": self.model,
            "theta_hat": _named(self.param_names, self.theta_hat),
            "standard_errors": _named(self.param_names, self.standard_errors),
            "el_value": float(self.el_value),
            "q2n_norm": float(self.q2n_norm),
            "n_infeasible": int(self.n_infeasible),
            "grid": self.grid,
            "seed": self.seed,
            "iterations": len(self.trace),
        }

    def tables(self) -> Dict[str, pd.DataFrame]:
        se = self.standard_errors
        return {
            "estimates": pd.DataFrame(
                {
                    "parameter": list(self.param_names),
                    "estimate": self.theta_hat,
                    "se": se if se is not None else np.full(len(self.param_names), np.nan),
                }
            )
        }


@dataclass
class LogLikResult:
    kind: ClassVar[str] = "estimate"

    model: str
    param_names: Tuple[str, ...]
    theta_hat: np.ndarray
    loglik: float
    hessian_se: np.ndarray
    method: str = "mle"
    seed: Optional[int] = None

    @property
    def standard_errors(self) -> np.ndarray:
        return self.hessian_se

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "model": self.model,
            "theta_hat": _named(self.param_names, self.theta_hat),
            "standard_errors": _named(self.param_names, self.hessian_se),
            "loglik": float(self.loglik),
            "seed": self.seed,
        }

    def tables(self) -> Dict[str, pd.DataFrame]:
        return {
            "estimates": pd.DataFrame(
                {"parameter": list(self.param_names), "estimate": self.theta_hat, "se": self.hessian_se}
            )
        }
