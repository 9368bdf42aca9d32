"""Frequency and state grids.

The frequency support comes from a Nadaraya-Watson estimate of the conditional CF: ``U`` is the smallest frequency
beyond which the estimated modulus stays below a threshold at every one of a few state points. The threshold is
``0.05`` or the sampling noise level ``3 / sqrt(n_eff)`` of the estimate, whichever is larger.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataError
from .models import Model, ModelSpec
from .types import ESTIMATE_MODE, MODES, TEST_MODE, FrequencyGrid, SamplePath

_logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 30
SCAN_POINTS = 200
SUPPORT_STATES = 5
MODULUS_THRESHOLD = 0.05
NOISE_MULTIPLE = 3.0
CAP_MULTIPLE = 10.0
NODES_PER_AXIS = {1: (21, 5), 2: (9, 3)}
STATE_NODES = 21
STATE_TRIM = 0.05


def biweight(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1, 15.0 / 16.0 * (1 - u * u) ** 2, 0.0)


def uniform(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1, 0.5, 0.0)


KERNELS = {"biweight": biweight, "uniform": uniform}


def rule_of_thumb_bandwidth(x: np.ndarray) -> float:
    return 2.78 * np.std(x) * len(x) ** -0.2


def conditional_cf_modulus(x, y, at, u, bandwidth: float) -> Tuple[np.ndarray, np.ndarray]:
    """Modulus of the Nadaraya-Watson estimate of ``E(exp(i u Y) | X = at)`` and the effective sample sizes"""
    weights = biweight((np.asarray(at)[:, None] - np.asarray(x)[None, :]) / bandwidth)
    total = weights.sum(axis=1)
    safe = np.where(total > 0, total, 1.0)
    modulus = np.abs(weights @ np.exp(1j * np.outer(y, u))) / safe[:, None]
    n_eff = np.where(total > 0, total**2 / np.maximum((weights**2).sum(axis=1), 1e-300), 0.0)
    return np.where(total[:, None] > 0, modulus, 0.0), n_eff


def support_threshold(n_eff) -> np.ndarray:
    """Modulus level separating the CCF from sampling noise at effective sample sizes ``n_eff``"""
    return np.maximum(MODULUS_THRESHOLD, NOISE_MULTIPLE / np.sqrt(np.maximum(n_eff, 1.0)))


def _support_edge(scan: np.ndarray, modulus: np.ndarray, threshold: np.ndarray) -> float:
    edges = []
    for row, level in zip(modulus, threshold):
        above = np.flatnonzero(row >= level)
        if above.size == 0:
            edges.append(scan[0])
        else:
            edges.append(scan[min(above[-1] + 1, scan.size - 1)])
    return float(max(edges))


def _axis_data(data: SamplePath, axis: int):
    obs = data.observations.reshape(data.n, -1)[:, axis]
    increments = np.diff(obs)
    if np.std(obs) == 0 or np.std(increments) == 0:
        raise DataError("Path (or its increments) is constant, the frequency support is undefined")
    return obs[:-1], obs[1:], increments


def _scan(increments: np.ndarray) -> np.ndarray:
    cap = CAP_MULTIPLE / np.std(increments)
    return np.linspace(cap / SCAN_POINTS, cap, SCAN_POINTS)


def _support_states(x: np.ndarray) -> np.ndarray:
    return np.linspace(x.min(), x.max(), SUPPORT_STATES + 2)[1:-1]


def u_support(data: SamplePath) -> Tuple[float, ...]:
    """Nonparametric frequency half-width per coordinate"""
    result = []
    for axis in range(data.dim):
        x, y, increments = _axis_data(data, axis)
        scan = _scan(increments)
        modulus, n_eff = conditional_cf_modulus(x, y, _support_states(x), scan, rule_of_thumb_bandwidth(x))
        result.append(_support_edge(scan, modulus, support_threshold(n_eff)))
    _logger.debug(f"Nonparametric u-support {result}")
    return tuple(result)


def model_support(spec: ModelSpec, data: SamplePath) -> Tuple[float, ...]:
    """Frequency half-width where the model CCF modulus drops below the threshold, per coordinate"""
    model = spec.build()
    result = []
    centre = data.observations.reshape(data.n, -1).mean(axis=0)
    for axis in range(data.dim):
        x, _, increments = _axis_data(data, axis)
        scan = _scan(increments)
        at = _support_states(x)
        if model.dim == 1:
            modulus = np.abs(model.ccf(scan, at))
        else:
            states = np.tile(centre, (at.size, 1))
            states[:, axis] = at
            freqs = np.zeros((scan.size, 2))
            freqs[:, axis] = scan
            modulus = np.abs(model.ccf(freqs, states))
        result.append(_support_edge(scan, modulus, np.full(at.size, MODULUS_THRESHOLD)))
    return tuple(result)


def _symmetric_nodes(half_width: float, count: int) -> np.ndarray:
    half = np.linspace(0.0, half_width, count // 2 + 1)
    return np.concatenate([-half[:0:-1], half])


def build_grid(
    data: SamplePath, model_kind: str, mode: str = ESTIMATE_MODE, theta: Optional[Sequence[float]] = None
) -> FrequencyGrid:
    """Tensor grid with uniform weights over the detected support.

    In test mode the instrument is the unit one (``r = 0``) and, when ``theta`` is given, the support is widened to
    cover the region where the fitted null CCF is not negligible.
    """
    if mode not in MODES:
        raise ConfigError(f"Unknown grid mode {mode}")
    if data.n < MIN_OBSERVATIONS:
        raise DataError(f"At least {MIN_OBSERVATIONS} observations are needed to build a grid, got {data.n}")
    model_class = Model.lookup(model_kind)
    if model_class.dim != data.dim:
        raise ConfigError(f"{model_class.kind} is {model_class.dim}-dimensional but the data is {data.dim}-dimensional")

    support = u_support(data)
    if mode == TEST_MODE and theta is not None:
        parametric = model_support(ModelSpec(model_kind, tuple(theta), data.delta), data)
        support = tuple(max(a, b) for a, b in zip(support, parametric))

    u_count, r_count = NODES_PER_AXIS[data.dim]
    u_axes = [_symmetric_nodes(width, u_count) for width in support]
    if mode == ESTIMATE_MODE:
        r_axes = [_symmetric_nodes(width, r_count) for width in support]
        r_max = support
    else:
        r_axes = [np.zeros(1) for _ in support]
        r_max = tuple(0.0 for _ in support)

    mesh = np.meshgrid(*u_axes, *r_axes, indexing="ij")
    flat = np.stack([axis.ravel() for axis in mesh], axis=-1)
    u, r = flat[:, : data.dim], flat[:, data.dim :]
    weights = np.full(u.shape[0], 1.0 / u.shape[0])
    _logger.info(f"Built {mode} grid with {u.shape[0]} nodes, u-support {support}")
    return FrequencyGrid(u, r, weights, support, r_max, mode)


def state_grid(data: SamplePath, points: int = STATE_NODES, trim: float = STATE_TRIM) -> Tuple[np.ndarray, np.ndarray]:
    """Equispaced state nodes over the central part of the sample range, with uniform weights"""
    if data.dim != 1:
        raise ConfigError("State grids are only defined for univariate data")
    low, high = data.observations.min(), data.observations.max()
    span = high - low
    if span == 0:
        raise DataError("Constant path, the state grid is empty")
    nodes = np.linspace(low + trim * span, high - trim * span, points)
    return nodes, np.full(points, 1.0 / points)
