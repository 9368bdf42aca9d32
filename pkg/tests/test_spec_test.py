from types import SimpleNamespace

import numpy as np
import pytest
from scipy import integrate

from ccf_el import spec_test
from ccf_el.errors import BootstrapError, ConfigError, DataError, ParameterError
from ccf_el.grid import build_grid
from ccf_el.spec_test import (
    DEFAULT_MULTIPLIERS,
    BandwidthSet,
    KernelSpec,
    MultiBandwidthStat,
    TestResult,
    bootstrap_test,
    cv_bandwidth,
    integrated_smoothed_el,
    local_smoothed_el,
    multi_bandwidth_stat,
    order_statistic_reject,
    p_value,
    standardize,
)
from ccf_el.types import TEST_MODE, FrequencyGrid, FrequencyPoint, SamplePath

from . import factories

VSK_THETA = (0.858, 0.089, 0.047)


def test_kernel_spec_validation():
    with pytest.raises(ParameterError, match="Unknown kernel"):
        KernelSpec(0.01, "gaussian")
    with pytest.raises(ParameterError, match="positive"):
        KernelSpec(0.0)


def test_kernel_weights_integrate_to_one():
    kernel = KernelSpec(0.02)
    x = np.linspace(-0.1, 0.1, 40001)
    weights = kernel.weights(0.01, x)
    assert weights.shape == (1, x.size)
    assert integrate.trapezoid(weights[0], x) == pytest.approx(1.0, rel=1e-6)
    assert kernel.weights([0.0], [0.03])[0, 0] == 0


def test_bandwidth_set():
    bandwidths = BandwidthSet.from_reference(0.01)
    assert bandwidths.multipliers == DEFAULT_MULTIPLIERS
    np.testing.assert_allclose(bandwidths.bandwidths, [0.007, 0.0085, 0.01, 0.012, 0.0145])
    explicit = BandwidthSet.from_bandwidths([0.014, 0.01, 0.012])
    assert explicit.reference == 0.012
    np.testing.assert_allclose(explicit.bandwidths, [0.01, 0.012, 0.014])
    with pytest.raises(ParameterError, match="increasing"):
        BandwidthSet(0.01, (1.0, 0.5))
    with pytest.raises(ParameterError, match="Reference"):
        BandwidthSet(0.0)


def test_p_value_and_order_statistic():
    replicates = np.arange(1.0, 100.0)
    assert p_value(5.0, replicates) == pytest.approx(96 / 100)
    assert p_value(1000.0, replicates) == pytest.approx(1 / 100)
    # the 95th smallest of 99 replicates is the critical value at 5%
    assert order_statistic_reject(95.0, replicates, 0.05)
    assert not order_statistic_reject(94.9, replicates, 0.05)


def test_standardize():
    np.testing.assert_allclose(standardize([2.0, 3.0], [0.01, 0.04]), [0.0, 5.0])


def test_cv_bandwidth(vsk_path):
    bandwidth = cv_bandwidth(vsk_path)
    span = np.ptp(vsk_path.observations)
    assert 0.01 * span * (1 - 1e-12) <= bandwidth <= 0.5 * span * (1 + 1e-12)


def test_cv_bandwidth_needs_data(vsk_path):
    with pytest.raises(DataError, match="at least 50"):
        cv_bandwidth(SamplePath(vsk_path.observations[:40], vsk_path.delta))
    bivariate = factories.SamplePath(spec=factories.ModelSpec(kind="BI_OU"), n=100, path_seed=15)
    with pytest.raises(ConfigError, match="univariate"):
        cv_bandwidth(bivariate)


def test_single_cell_integral_is_the_local_ratio(vsk_path):
    u = 1.0 / np.std(np.diff(vsk_path.observations))
    x = float(np.median(vsk_path.observations))
    kernel = KernelSpec(0.02)
    grid = FrequencyGrid([u], [0.0], [1.0], (u,), (0.0,), TEST_MODE)
    integrated = integrated_smoothed_el("VSK", VSK_THETA, vsk_path, kernel, grid, (np.array([x]), np.array([1.0])))
    local = local_smoothed_el("VSK", FrequencyPoint(u, 0.0), x, VSK_THETA, vsk_path, kernel)
    assert integrated.n_cells == 1
    assert integrated.n_skipped == 0
    assert integrated.value == pytest.approx(local, rel=1e-8)


def test_smoothed_el_needs_a_test_grid(vsk_path):
    with pytest.raises(ConfigError, match="test-mode"):
        integrated_smoothed_el("VSK", VSK_THETA, vsk_path, KernelSpec(0.02), build_grid(vsk_path, "VSK"))


def test_multi_bandwidth_statistic(vsk_path):
    stat = multi_bandwidth_stat("VSK", VSK_THETA, vsk_path, [0.015, 0.02, 0.03])
    assert stat.bandwidths == (0.015, 0.02, 0.03)
    assert stat.statistics.shape == (3,)
    assert np.all(stat.statistics >= 0)
    np.testing.assert_allclose(stat.standardized, standardize(stat.statistics, stat.bandwidths))
    assert stat.t_stat == stat.standardized.max()


def test_bootstrap_arguments_are_checked(vsk_path):
    with pytest.raises(ConfigError, match="At least 99"):
        bootstrap_test("VSK", vsk_path, B=20)
    with pytest.raises(ConfigError, match="Level"):
        bootstrap_test("VSK", vsk_path, B=99, alpha=1.5)


def _result(**kwargs):
    defaults = dict(
        null_model="VSK",
        param_names=("kappa", "alpha", "sigma"),
        theta_hat=np.array(VSK_THETA),
        bandwidths=(0.01, 0.02),
        statistics=np.array([2.5, 2.2]),
        standardized=standardize([2.5, 2.2], [0.01, 0.02]),
        t_stat=5.0,
        replicates=np.linspace(-2.0, 4.0, 99),
        replicate_statistics=np.column_stack([np.linspace(1.0, 3.0, 99), np.linspace(1.5, 2.5, 99)]),
        p_value=0.01,
        bandwidth_p_values=np.array([0.01, 0.2]),
        alpha=0.05,
        reject=True,
        bootstrap=99,
    )
    defaults.update(kwargs)
    return TestResult(**defaults)


def test_result_tables():
    result = _result()
    tables = result.tables()
    assert list(tables["statistics"].columns) == ["bandwidth", "statistic", "standardized", "p_value"]
    plot = tables["plot"]
    assert list(plot["bandwidth"]) == [0.01, 0.02]
    assert plot["bootstrap_q95"].iloc[0] == pytest.approx(np.quantile(np.linspace(1.0, 3.0, 99), 0.95))
    summary = result.to_dict()
    assert summary["reject"] is True
    assert summary["theta_hat"] == {"kappa": 0.858, "alpha": 0.089, "sigma": 0.047}


@pytest.mark.slow
def test_bootstrap_under_the_null():
    path = factories.SamplePath(spec=factories.ModelSpec(kind="VSK"), n=300, path_seed=16)
    result = bootstrap_test("VSK", path, B=99, bandwidths=[0.012, 0.016, 0.02], seed=5, n_jobs=-1)
    assert result.bootstrap == 99
    assert len(result.replicates) == 99 - result.n_failed
    assert 0 < result.p_value <= 1
    assert result.seed == 5
    assert result.replicate_statistics.shape == (len(result.replicates), 3)
    assert result.bandwidth_p_values.shape == (3,)


def test_max_statistic_grows_with_the_bandwidth_set_and_ignores_its_order(vsk_path):
    three = multi_bandwidth_stat("VSK", VSK_THETA, vsk_path, [0.015, 0.02, 0.03])
    two = multi_bandwidth_stat("VSK", VSK_THETA, vsk_path, [0.015, 0.02])
    shuffled = multi_bandwidth_stat("VSK", VSK_THETA, vsk_path, [0.03, 0.015, 0.02])
    assert three.t_stat >= two.t_stat
    np.testing.assert_array_equal(three.statistics[:2], two.statistics)
    assert shuffled.t_stat == three.t_stat
    np.testing.assert_array_equal(shuffled.statistics, three.statistics[[2, 0, 1]])


def test_p_value_of_exchangeable_statistics_is_uniform():
    values = np.random.default_rng(17).standard_normal(100)
    p_values, rejections = [], 0
    for k in range(values.size):
        replicates = np.delete(values, k)
        p_values.append(p_value(values[k], replicates))
        rejections += order_statistic_reject(values[k], replicates, 0.05)
    np.testing.assert_allclose(np.sort(p_values), np.arange(1, 101) / 100)
    assert rejections == 5


def _stub_bootstrap(monkeypatch, observed, replicate):
    fit = SimpleNamespace(theta_hat=np.array(VSK_THETA))
    monkeypatch.setattr(spec_test, "minimize_el", lambda *args, **kwargs: fit)
    monkeypatch.setattr(spec_test, "build_grid", lambda *args, **kwargs: None)

    def stat(t_stat):
        values = np.full(2, t_stat)
        return MultiBandwidthStat((0.01, 0.02), values, values, float(t_stat), 0)

    monkeypatch.setattr(spec_test, "multi_bandwidth_stat", lambda *args, **kwargs: stat(observed))
    monkeypatch.setattr(spec_test, "_replicate", lambda *args: replicate(args[-1], stat))


@pytest.mark.parametrize("observed, expected", [(1000.0, 1 / 100), (-1000.0, 1.0)])
def test_bootstrap_p_value_bounds(monkeypatch, vsk_path, observed, expected):
    _stub_bootstrap(monkeypatch, observed, lambda seed, stat: stat(seed.spawn_key[-1] / 10))
    result = bootstrap_test("VSK", vsk_path, B=99, bandwidths=[0.01, 0.02], seed=3)
    assert 1 / 100 <= result.p_value <= 1
    assert result.p_value == pytest.approx(expected)
    assert result.reject is (observed > 0)
    np.testing.assert_allclose(result.replicates, np.arange(99) / 10)


def test_bootstrap_tolerates_a_few_failed_replicates(monkeypatch, vsk_path):
    _stub_bootstrap(monkeypatch, 5.0, lambda seed, stat: None if seed.spawn_key[-1] < 4 else stat(1.0))
    result = bootstrap_test("VSK", vsk_path, B=99, bandwidths=[0.01, 0.02], seed=3)
    assert result.n_failed == 4
    assert len(result.replicates) == 95
    assert result.p_value == pytest.approx(1 / 96)
    _stub_bootstrap(monkeypatch, 5.0, lambda seed, stat: None if seed.spawn_key[-1] < 5 else stat(1.0))
    with pytest.raises(BootstrapError, match="5 of 99"):
        bootstrap_test("VSK", vsk_path, B=99, bandwidths=[0.01, 0.02], seed=3)
