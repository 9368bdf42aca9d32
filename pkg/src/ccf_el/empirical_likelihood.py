"""Empirical likelihood for two dimensional moment vectors.

For a panel of real 2-vectors ``z_t`` the EL dual looks for ``lam`` with
``Q1n(lam) = mean_t z_t / (1 + lam'z_t) = 0``; the log EL ratio is then ``2 sum_t log(1 + lam'z_t)``.
All grid nodes are solved together: panels are stacked as a ``(G, n, 2)`` array and a damped Newton iteration runs
on the nodes that are still active.
"""

import logging
from typing import NamedTuple

import numpy as np

from .errors import ConvexHullError, FeasibilityError, MaxIterError, SparseNeighborhoodError
from .types import LambdaSolve

_logger = logging.getLogger(__name__)

TOLERANCE = 1e-10
MAX_ITERATIONS = 100
MAX_HALVINGS = 60
RIDGE = 1e-14
MIN_RESIDUALS = 3
MIN_WINDOW_POINTS = MIN_RESIDUALS


class BatchSolve(NamedTuple):
    lam: np.ndarray
    converged: np.ndarray
    feasible: np.ndarray
    residual_norm: np.ndarray
    iterations: np.ndarray


def origin_inside_hull(vectors: np.ndarray) -> np.ndarray:
    """Whether the origin is strictly inside the convex hull of each ``(n, 2)`` panel.

    Zero vectors are ignored. The origin is interior iff no angular gap between consecutive non zero vectors reaches
    pi.
    """
    z = np.asarray(vectors, dtype=float)
    nonzero = np.any(z != 0, axis=-1)
    angles = np.where(nonzero, np.arctan2(z[..., 1], z[..., 0]), np.nan)
    angles = np.sort(angles, axis=-1)
    counts = nonzero.sum(axis=-1)
    gaps = np.nan_to_num(np.diff(angles, axis=-1), nan=0.0)
    last = np.take_along_axis(angles, np.maximum(counts - 1, 0)[..., None], axis=-1)[..., 0]
    wrap = np.nan_to_num(angles[..., 0] + 2 * np.pi - last, nan=2 * np.pi)
    widest = np.maximum(gaps.max(axis=-1, initial=0.0), wrap)
    return (counts >= 3) & (widest < np.pi - 1e-12)


def _log_terms(z: np.ndarray, lam: np.ndarray) -> np.ndarray:
    return 1.0 + np.einsum("gnk,gk->gn", z, lam)


def _newton_step(ratio: np.ndarray, q1: np.ndarray) -> np.ndarray:
    # explicit 2x2 inverse of mean(ratio ratio') + ridge
    n = ratio.shape[1]
    h00 = np.einsum("gn,gn->g", ratio[..., 0], ratio[..., 0]) / n + RIDGE
    h11 = np.einsum("gn,gn->g", ratio[..., 1], ratio[..., 1]) / n + RIDGE
    h01 = np.einsum("gn,gn->g", ratio[..., 0], ratio[..., 1]) / n
    det = h00 * h11 - h01 * h01
    return np.stack([h11 * q1[:, 0] - h01 * q1[:, 1], h00 * q1[:, 1] - h01 * q1[:, 0]], axis=-1) / det[:, None]


def solve_lambda_batch(vectors: np.ndarray, tol: float = TOLERANCE, max_iter: int = MAX_ITERATIONS) -> BatchSolve:
    """Solve the EL dual for every panel of a ``(G, n, 2)`` array.

    Panels whose mean is exactly zero get ``lam = 0``; panels whose hull does not contain the origin are reported as
    not feasible and left at zero.
    """
    z = np.asarray(vectors, dtype=float)
    count, n, _ = z.shape
    lam = np.zeros((count, 2))
    iterations = np.zeros(count, dtype=int)
    zero_mean = np.all(z.mean(axis=1) == 0.0, axis=-1)
    feasible = zero_mean | origin_inside_hull(z)
    active = feasible & ~zero_mean

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        zi, li = z[idx], lam[idx]
        denom = _log_terms(zi, li)
        ratio = zi / denom[..., None]
        q1 = ratio.mean(axis=1)
        done = np.linalg.norm(q1, axis=-1) <= tol
        active[idx[done]] = False
        if np.all(done):
            break
        keep = ~done
        idx, zi, li, ratio, q1 = idx[keep], zi[keep], li[keep], ratio[keep], q1[keep]
        base = np.log(denom[keep]).sum(axis=1)
        step = _newton_step(ratio, q1)

        scale = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        for _ in range(MAX_HALVINGS):
            pending = ~accepted
            candidate = li[pending] + scale[pending, None] * step[pending]
            terms = _log_terms(zi[pending], candidate)
            inside = np.all(terms > 1.0 / n, axis=1)
            value = np.where(inside, np.log(np.where(terms > 0, terms, 1.0)).sum(axis=1), -np.inf)
            better = inside & (value >= base[pending] - 1e-12 * (1 + np.abs(base[pending])))
            accepted[np.flatnonzero(pending)[better]] = True
            if np.all(accepted):
                break
            scale[~accepted] *= 0.5
        scale[~accepted] = 0.0
        lam[idx] = li + scale[:, None] * step
        iterations[idx] += 1

    ratio = z / _log_terms(z, lam)[..., None]
    residual_norm = np.linalg.norm(ratio.mean(axis=1), axis=-1)
    converged = feasible & (residual_norm <= tol)
    residual_norm = np.where(feasible, residual_norm, np.inf)
    return BatchSolve(lam, converged, feasible, residual_norm, iterations)


def el_ratio_batch(vectors: np.ndarray, lam: np.ndarray) -> np.ndarray:
    terms = _log_terms(np.asarray(vectors, dtype=float), np.asarray(lam, dtype=float))
    with np.errstate(invalid="ignore", divide="ignore"):
        values = 2.0 * np.log(terms).sum(axis=1)
    return np.maximum(values, 0.0)


def solve_lambda(residual_vectors: np.ndarray) -> LambdaSolve:
    """Lagrange multiplier of the local EL problem for one ``(n, 2)`` panel"""
    z = np.asarray(residual_vectors, dtype=float)
    if z.ndim != 2 or z.shape[1] != 2:
        raise ValueError(f"Expected an (n, 2) panel, got shape {z.shape}")
    if z.shape[0] < MIN_RESIDUALS:
        raise ValueError(f"At least {MIN_RESIDUALS} residual vectors are needed, got {z.shape[0]}")
    result = solve_lambda_batch(z[None, ...])
    if not result.feasible[0]:
        raise ConvexHullError("The origin is outside the convex hull of the residual vectors")
    if not result.converged[0]:
        raise MaxIterError(
            f"Newton iteration did not converge in {MAX_ITERATIONS} steps (|Q1n|={result.residual_norm[0]:.3g})"
        )
    return LambdaSolve(result.lam[0], True, float(result.residual_norm[0]), int(result.iterations[0]))


def local_el_ratio(residual_vectors: np.ndarray, lam) -> float:
    """``2 sum_t log(1 + lam'z_t)``"""
    z = np.asarray(residual_vectors, dtype=float)
    lam = np.asarray(lam, dtype=float)
    terms = 1.0 + z @ lam
    if np.any(terms <= 0):
        raise FeasibilityError("1 + lam'z must be positive for every residual vector")
    if not np.any(lam):
        return 0.0
    return float(max(2.0 * np.log(terms).sum(), 0.0))


def smoothed_el_ratio(residual_vectors: np.ndarray, weights: np.ndarray) -> float:
    """Local EL ratio of kernel weighted residual vectors.

    Points with zero weight do not change the dual solution, and the ratio is invariant to the scale of the weights.
    """
    weights = np.asarray(weights, dtype=float)
    window = weights > 0
    if window.sum() < MIN_WINDOW_POINTS:
        raise SparseNeighborhoodError(f"Only {window.sum()} observations inside the kernel window")
    z = np.asarray(residual_vectors, dtype=float)[window] * (weights[window] / weights.max())[:, None]
    solution = solve_lambda(z)
    return local_el_ratio(z, solution.lam)
