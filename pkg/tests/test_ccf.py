import numpy as np
import pytest

from ccf_el.ccf import ccf, instrument_weight, residual, residual_panel, vskmj_gamma
from ccf_el.errors import ConfigError
from ccf_el.types import ESTIMATE_MODE, TEST_MODE, FrequencyGrid, FrequencyPoint

from . import factories


def _grid(u, r, mode=ESTIMATE_MODE):
    u, r = np.asarray(u, dtype=float), np.asarray(r, dtype=float)
    weights = np.full(len(u), 1.0 / len(u))
    return FrequencyGrid(u, r, weights, (np.abs(u).max(),), (max(np.abs(r).max(), 1.0),), mode)


def test_ccf_scalar_and_array_forms():
    spec = factories.ModelSpec(kind="VSK")
    value = ccf(spec, 3.0, 0.08)
    assert isinstance(value, complex)
    values = ccf(spec, np.array([1.0, 3.0]), np.array([0.05, 0.08, 0.1]))
    assert values.shape == (3, 2)
    assert values[1, 1] == pytest.approx(value, abs=1e-15)


def test_ccf_bivariate_single_point():
    value = ccf(factories.ModelSpec(kind="BI_OU"), [1.0, 2.0], [0.08, 0.09])
    assert isinstance(value, complex)
    assert abs(value) <= 1


def test_vskmj_gamma_only_for_jump_model():
    assert vskmj_gamma(factories.ModelSpec(kind="VSK_MJ"), 0.0) == pytest.approx(2.0 / 12)
    with pytest.raises(ConfigError, match="VSK_MJ only"):
        vskmj_gamma(factories.ModelSpec(kind="VSK"), 1.0)


def test_instrument_weight_modes():
    tau = FrequencyPoint(2.0, 3.0)
    assert instrument_weight(tau, 0.1) == pytest.approx(np.exp(0.3j))
    assert instrument_weight(tau, 0.1, TEST_MODE) == 1
    with pytest.raises(ConfigError, match="Unknown mode"):
        instrument_weight(tau, 0.1, "other")


def test_frequency_point_negation():
    tau = -FrequencyPoint((1.0, -2.0), (0.5, 0.0))
    assert tau.u == (-1.0, 2.0)
    assert tau.r == (-0.5, 0.0)
    with pytest.raises(ValueError):
        FrequencyPoint((1.0, 2.0), (1.0,))


def test_residual_panel_matches_pointwise_residuals(vsk_path):
    spec = factories.ModelSpec(kind="VSK")
    grid = _grid([-5.0, 0.0, 12.0], [1.0, -2.0, 0.0])
    panel = residual_panel(spec, vsk_path, grid)
    assert panel.eps.shape == (vsk_path.n - 1, 3)
    assert panel.vectors.shape == (3, vsk_path.n - 1, 2)
    for t in (0, 17, vsk_path.n - 2):
        for g, tau in enumerate(grid.nodes):
            expected = residual(spec, tau, vsk_path.observations[t], vsk_path.observations[t + 1])
            assert panel.eps[t, g] == pytest.approx(expected, abs=1e-14)


def test_residual_at_zero_frequency_vanishes(vsk_path):
    panel = residual_panel(factories.ModelSpec(kind="VSK"), vsk_path, _grid([0.0], [1.0]))
    np.testing.assert_allclose(panel.eps, 0, atol=1e-15)


def test_test_mode_uses_unit_instrument(vsk_path):
    spec = factories.ModelSpec(kind="VSK")
    estimate = residual_panel(spec, vsk_path, _grid([4.0], [0.0]))
    test = residual_panel(spec, vsk_path, _grid([4.0], [0.0], TEST_MODE))
    np.testing.assert_allclose(estimate.eps, test.eps)


@pytest.mark.parametrize("kind", ["VSK", "CIR", "VSK_MJ", "IG_OU"])
def test_residuals_have_zero_mean_at_the_true_parameter(kind):
    spec = factories.ModelSpec(kind=kind)
    path = factories.SamplePath(spec=spec, n=4000, path_seed=31)
    sd = np.std(np.diff(path.observations))
    grid = _grid(np.array([0.5, 1.0, 2.0]) / sd, np.zeros(3))
    eps = residual_panel(spec, path, grid).eps
    # martingale differences: the sample mean is within a few standard errors of zero
    se = np.sqrt(np.mean(np.abs(eps) ** 2, axis=0) / eps.shape[0])
    assert np.all(np.abs(eps.mean(axis=0)) < 4.5 * se)


@pytest.mark.parametrize("kind", ["VSK", "CIR", "VSK_MJ", "IG_OU"])
def test_residual_conjugation(kind):
    spec = factories.ModelSpec(kind=kind)
    tau = FrequencyPoint(6.0, 2.5)
    value = residual(spec, tau, 0.08, 0.085)
    assert residual(spec, -tau, 0.08, 0.085) == pytest.approx(value.conjugate(), abs=1e-14)
    assert ccf(spec, -6.0, 0.08) == pytest.approx(ccf(spec, 6.0, 0.08).conjugate(), abs=1e-14)


def test_instrument_weight_values():
    assert instrument_weight(FrequencyPoint(1.0, 2.0), 0.5) == pytest.approx(np.cos(1.0) + 1j * np.sin(1.0))
    assert instrument_weight(FrequencyPoint(1.0, 0.0), 0.5) == 1


def test_residuals_identify_the_mean_reversion_speed():
    spec = factories.ModelSpec(kind="VSK")
    path = factories.SamplePath(spec=spec, n=20000, path_seed=32)
    u = 1.0 / np.std(np.diff(path.observations))
    # instrument frequency that lines up with the conditional mean
    r = 1.0 / np.std(path.observations) - u * np.exp(-0.858 / 12)
    grid = _grid([u], [r])

    def z_score(theta):
        eps = residual_panel(spec.with_theta(theta), path, grid).eps[:, 0]
        return abs(eps.mean()) / np.sqrt(np.mean(np.abs(eps - eps.mean()) ** 2) / eps.size)

    assert z_score((0.858, 0.089, 0.047)) < 4
    assert z_score((2 * 0.858, 0.089, 0.047)) > 6
