import numpy as np
import pytest

from ccf_el.ccf import ccf
from ccf_el.errors import ConfigError
from ccf_el.models import ModelSpec, ou_moments
from ccf_el.simulate import (
    InverseGaussianOUSampler,
    PathSampler,
    child_seeds,
    make_rng,
    rng_streams,
    sample_transitions,
    simulate_path,
    stationary_init,
)

from . import factories


def _within(sample, expected, sigmas=4.0):
    se = np.std(sample) / np.sqrt(len(sample))
    assert abs(np.mean(sample) - expected) < sigmas * se


@pytest.mark.parametrize("kind", ["VSK", "CIR", "VSK_MJ", "IG_OU", "BI_OU"])
def test_same_seed_same_path(kind):
    spec = factories.ModelSpec(kind=kind)
    first = simulate_path(spec, 120, make_rng(42), seed=42)
    second = simulate_path(spec, 120, make_rng(42), seed=42)
    np.testing.assert_array_equal(first.observations, second.observations)
    assert first.seed == 42
    third = simulate_path(spec, 120, make_rng(43))
    assert not np.array_equal(first.observations, third.observations)


def test_child_streams_do_not_depend_on_their_number():
    few = rng_streams(7, 3)
    many = rng_streams(7, 10)
    for a, b in zip(few, many):
        np.testing.assert_array_equal(a.random(5), b.random(5))
    assert child_seeds(7, 2)[1].spawn_key == (1,)


def test_streams_are_distinct():
    values = [rng.random(4) for rng in rng_streams(1, 4)]
    assert len({tuple(v) for v in values}) == 4


def test_path_too_short():
    with pytest.raises(ConfigError, match="at least two observations"):
        simulate_path(factories.ModelSpec(kind="VSK"), 1, make_rng(0))


def test_path_starts_at_x0():
    path = simulate_path(factories.ModelSpec(kind="CIR"), 50, make_rng(1), x0=0.2)
    assert path.observations[0] == 0.2
    assert path.n == 50
    assert path.delta == pytest.approx(1 / 12)


def test_vasicek_transitions():
    model = factories.ModelSpec(kind="VSK").build()
    draws = sample_transitions(model, 0.12, 100_000, make_rng(2))
    mean, var = ou_moments(0.858, 0.089, 0.047, 1 / 12, 0.12)
    _within(draws, mean)
    assert np.var(draws) == pytest.approx(var, rel=0.03)


def test_cir_transitions_are_positive_with_the_right_mean():
    model = factories.ModelSpec(kind="CIR").build()
    draws = sample_transitions(model, 0.05, 100_000, make_rng(3))
    assert np.all(draws > 0)
    _within(draws, 0.091 + (0.05 - 0.091) * np.exp(-0.892 / 12))


def test_cir_path_stays_positive():
    path = simulate_path(factories.ModelSpec(kind="CIR"), 2000, make_rng(4))
    assert np.all(path.observations > 0)


def test_jump_diffusion_counts_jumps():
    spec = factories.ModelSpec(kind="VSK_MJ")
    counts = [simulate_path(spec, 500, rng).n_jumps for rng in rng_streams(5, 20)]
    expected = 2.0 * 499 / 12
    assert abs(np.mean(counts) - expected) < 3 * np.sqrt(expected / len(counts))


def test_jump_diffusion_transition_variance():
    model = factories.ModelSpec(kind="VSK_MJ").build()
    draws = sample_transitions(model, 0.089, 100_000, make_rng(6))
    _, var = ou_moments(0.858, 0.089, 0.047, 1 / 12, 0.089)
    jump_var = 2.0 * 0.067**2 * -np.expm1(-2 * 0.858 / 12) / (2 * 0.858)
    assert np.var(draws) == pytest.approx(var + jump_var, rel=0.06)


def test_ig_ou_stationary_draws():
    spec = factories.ModelSpec(kind="IG_OU")
    rng = make_rng(7)
    draws = np.array([stationary_init(spec, rng) for _ in range(100_000)])
    assert np.all(draws > 0)
    _within(draws, 1.0 / 20.0)


def test_ig_ou_substeps():
    model = factories.ModelSpec(kind="IG_OU").build()
    sampler = PathSampler.for_model(model)
    assert isinstance(sampler, InverseGaussianOUSampler)
    full = (10.0 / 12) ** 2 * 1.0 * 20.0 / (2 * np.pi * 1e-6)
    assert sampler.substeps == max(8, int(np.ceil(np.sqrt(full / 16))))
    slow = PathSampler.for_model(ModelSpec("IG_OU", (0.01, 1.0, 20.0)).build())
    assert slow.substeps == 8


def test_ig_ou_path_mean():
    path = simulate_path(factories.ModelSpec(kind="IG_OU"), 5000, make_rng(8))
    assert np.all(path.observations > 0)
    phi = np.exp(-10.0 / 12)
    se = np.sqrt(1.0 / 20.0**3 * (1 + phi) / (1 - phi) / path.n)
    assert abs(path.observations.mean() - 0.05) < 4 * se


def test_ig_ou_transition_mean():
    model = factories.ModelSpec(kind="IG_OU").build()
    draws = sample_transitions(model, 0.07, 5000, make_rng(9))
    decay = np.exp(-10.0 / 12)
    _within(draws, 0.07 * decay + 0.05 * (1 - decay))


def test_bivariate_transitions():
    model = factories.ModelSpec(kind="BI_OU").build()
    x = np.array([0.1, 0.05])
    draws = sample_transitions(model, x, 100_000, make_rng(10))
    assert draws.shape == (100_000, 2)
    np.testing.assert_allclose(draws.mean(axis=0), model.transition_mean(x)[0], atol=4 * 0.17 * np.sqrt(1 / 12 / 1e5))
    np.testing.assert_allclose(np.cov(draws.T), model.transition_covariance(), rtol=0.03, atol=2e-5)


def test_bivariate_path_shape():
    path = simulate_path(factories.ModelSpec(kind="BI_OU"), 100, make_rng(11))
    assert path.observations.shape == (100, 2)
    assert path.dim == 2


@pytest.mark.parametrize("kind", ["VSK", "CIR", "VSK_MJ", "IG_OU", "BI_OU"])
def test_transitions_match_the_ccf(kind):
    model = factories.ModelSpec(kind=kind).build()
    mean, _ = model.stationary_moments()
    draws = sample_transitions(model, mean, 5000, make_rng(12))
    scale = 1.0 / np.std(draws, axis=0)
    for multiple in (0.5, 1.0, 2.0):
        u = multiple * np.atleast_1d(scale)
        observed = np.exp(1j * (draws.reshape(len(draws), -1) @ u))
        expected = ccf(model, u if model.dim == 2 else u[0], mean)
        se = np.sqrt((1 - abs(expected) ** 2) / observed.size)
        assert abs(observed.mean() - expected) < 3 * se
