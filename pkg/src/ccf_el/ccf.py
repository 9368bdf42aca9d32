"""CCF evaluation, instrument weights and CCF residuals"""

from typing import Union

import numpy as np

from .errors import ConfigError
from .models import Model, ModelKind, ModelSpec
from .types import ESTIMATE_MODE, MODES, TEST_MODE, FrequencyGrid, FrequencyPoint, ResidualPanel, SamplePath

ModelLike = Union[ModelSpec, Model]


def as_model(model: ModelLike) -> Model:
    return model.build() if isinstance(model, ModelSpec) else model


def _is_single(model: Model, value) -> bool:
    return np.size(value) == model.dim


def ccf(model: ModelLike, u, x):
    """Transition CCF ``E(exp(i u'X_{t+1}) | X_t = x)``.

    Scalar (or single 2-vector) inputs give a Python complex, arrays give a ``(n_states, n_freqs)`` array.
    """
    model = as_model(model)
    values = model.ccf(u, x)
    if _is_single(model, u) and _is_single(model, x):
        return complex(values[0, 0])
    return values


def vskmj_gamma(model: ModelLike, u):
    model = as_model(model)
    if model.kind != ModelKind.VSK_MJ.value:
        raise ConfigError(f"The jump integral is defined for VSK_MJ only, not {model.kind}")
    values = model.gamma(u)
    return float(values[0]) if np.ndim(u) == 0 else values


def instrument_weight(tau: FrequencyPoint, x, mode: str = ESTIMATE_MODE) -> complex:
    if mode not in MODES:
        raise ConfigError(f"Unknown mode {mode}")
    if mode == TEST_MODE:
        return 1 + 0j
    return complex(np.exp(1j * np.dot(tau.r, np.atleast_1d(np.asarray(x, dtype=float)))))


def instrument_panel(r: np.ndarray, x: np.ndarray, mode: str = ESTIMATE_MODE) -> np.ndarray:
    x = x.reshape(x.shape[0], -1)
    if mode == TEST_MODE:
        return np.ones((x.shape[0], r.shape[0]), dtype=complex)
    return np.exp(1j * x @ r.T)


def residual(model: ModelLike, tau: FrequencyPoint, x_t, x_next, mode: str = ESTIMATE_MODE) -> complex:
    """``w(u, r; x_t) * (exp(i u'x_next) - psi(u; x_t))``"""
    model = as_model(model)
    psi = model.ccf(tau.u, x_t)[0, 0]
    observed = np.exp(1j * np.dot(tau.u, np.atleast_1d(np.asarray(x_next, dtype=float))))
    return instrument_weight(tau, x_t, mode) * complex(observed - psi)


def residual_panel(model: ModelLike, path: SamplePath, grid: FrequencyGrid, mode: str = None) -> ResidualPanel:
    model = as_model(model)
    mode = grid.mode if mode is None else mode
    x = path.current.reshape(path.n - 1, -1)
    y = path.following.reshape(path.n - 1, -1)
    psi = model.ccf(grid.u if model.dim == 2 else grid.u[:, 0], path.current)
    observed = np.exp(1j * y @ grid.u.T)
    return ResidualPanel(instrument_panel(grid.r, x, mode) * (observed - psi))
