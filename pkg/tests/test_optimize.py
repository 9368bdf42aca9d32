import numpy as np
import pytest

from ccf_el.errors import DegenerateError, OptimizerError, ParameterError
from ccf_el.optimize import barrier, finite_difference_hessian, minimize_barrier, standard_errors

CENTRE = np.array([1.5, 0.1, 0.05])
WIDTH = np.array([1.0, 0.05, 0.02])


def _bowl(theta):
    return float(np.sum(((theta - CENTRE) / WIDTH) ** 2))


def _positive_bowl(theta):
    if np.any(theta <= 0):
        raise ParameterError("non positive")
    return _bowl(theta)


def test_barrier_maps_inadmissible_points_to_infinity():
    assert barrier(_positive_bowl)(np.array([-1.0, 0.1, 0.05])) == np.inf
    assert barrier(lambda theta: np.nan)(CENTRE) == np.inf
    assert barrier(_positive_bowl)(CENTRE) == 0.0

    def degenerate(theta):
        raise DegenerateError("singular")

    assert barrier(degenerate)(CENTRE) == np.inf


def test_barrier_lets_other_errors_through():
    def broken(theta):
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError):
        barrier(broken)(CENTRE)


def test_minimize_a_bowl():
    result = minimize_barrier(_positive_bowl, [1.0, 0.08, 0.04])
    assert result.converged
    np.testing.assert_allclose(result.theta, CENTRE, rtol=1e-4)
    assert result.value == pytest.approx(0.0, abs=1e-6)
    assert result.iterations > 0
    assert len(result.trace) == result.iterations
    assert all(b <= a for a, b in zip(result.trace, result.trace[1:]))


def test_minimize_rejects_an_inadmissible_start():
    with pytest.raises(OptimizerError, match="starting point"):
        minimize_barrier(_positive_bowl, [-1.0, 0.08, 0.04])


def test_minimize_reports_non_convergence():
    with pytest.raises(OptimizerError, match="did not converge"):
        minimize_barrier(_bowl, [1.0, 0.08, 0.04], max_iter=2, restarts=0)


def test_finite_difference_hessian_of_a_quadratic():
    a = np.array([[2.0, 0.5], [0.5, 8.0]])
    hessian = finite_difference_hessian(lambda theta: 0.5 * theta @ a @ theta, [0.3, -0.2])
    np.testing.assert_allclose(hessian, a, rtol=1e-5)


def test_standard_errors():
    np.testing.assert_allclose(standard_errors(np.diag([4.0, 16.0])), [0.5, 0.25])
    assert standard_errors(np.ones((2, 2))) is None
