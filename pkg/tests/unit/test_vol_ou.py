"""Unit tests for the volatility-modulated OU process X."""

import cmath
import math

import numpy as np
import pytest
from scipy import integrate, stats

from tensorheston.errors import DimensionError, UnsupportedConfigurationError
from tensorheston.ou_engine import OUSpec, TimeGrid, semigroup, simulate_Y_paths
from tensorheston.tensor_variance import UnitProcessSpec
from tensorheston.vol_ou import (
    XSpec,
    cond_char_X,
    cov_X,
    empirical_char_X,
    simulate_X_given_Y,
    simulate_X_paths,
)

GOLDEN_COV_X = (1.0 + math.exp(-2.0)) / 4.0


@pytest.fixture
def normalized_xspec(coupled_spec) -> XSpec:
    return XSpec(
        C=-0.5 * np.eye(3),
        Q_B=np.diag([1.0, 0.5, 0.25]),
        X0=[0.1, 0.0, -0.1],
        unit_process=UnitProcessSpec.normalized_Y(),
        ou=coupled_spec,
    )


@pytest.mark.unit
class TestXSpec:
    """Parameter validation."""

    def test_gamma_rank(self, coupled_spec):
        """Test that gamma must match the rank of the Y driver."""
        with pytest.raises(DimensionError):
            XSpec(
                C=-np.eye(3),
                Q_B=np.eye(3),
                X0=np.zeros(3),
                unit_process=UnitProcessSpec.constant([1.0, 0.0]),
                ou=coupled_spec,
            )


@pytest.mark.unit
class TestCovX:
    """Closed-form covariance of X(t) for constant gamma."""

    def test_golden_value(self, golden_xspec):
        """Test (1 + e^{-2}) / 4 for the scalar scenario."""
        assert cov_X(golden_xspec, 1.0)[0, 0] == pytest.approx(GOLDEN_COV_X, abs=1e-8)
        assert cov_X(golden_xspec, 1.0)[0, 0] == pytest.approx(0.28383382, abs=1e-8)

    def test_at_time_zero(self, golden_xspec):
        """Test Cov(X(0)) = 0."""
        np.testing.assert_array_equal(cov_X(golden_xspec, 0.0), np.zeros((1, 1)))

    def test_monotone_without_drift(self, coupled_spec):
        """Test that cov_X(t2) - cov_X(t1) is PSD for t2 > t1 when C = 0."""
        spec = XSpec(
            C=np.zeros((3, 3)),
            Q_B=np.diag([1.0, 0.5, 0.25]),
            X0=np.zeros(3),
            unit_process=UnitProcessSpec.constant([0.6, 0.0, 0.8]),
            ou=coupled_spec,
        )
        covariances = [cov_X(spec, t) for t in (0.25, 0.5, 1.0, 2.0)]
        for earlier, later in zip(covariances, covariances[1:]):
            assert np.linalg.eigvalsh(later - earlier).min() >= -1e-10

    def test_normalized_unsupported(self, normalized_xspec):
        """Test that Z = Y / |Y| has no closed form."""
        with pytest.raises(UnsupportedConfigurationError):
            cov_X(normalized_xspec, 1.0)

    def test_matches_monte_carlo(self, golden_xspec):
        """Test the closed form against the sample covariance of simulated X."""
        ensemble = simulate_X_paths(
            golden_xspec, TimeGrid(1.0, 200), 20000, seed=5, record="terminal"
        )
        X = ensemble.terminal("X")[:, 0]
        second = (X - X.mean()) ** 2
        se = second.std(ddof=1) / math.sqrt(X.size)
        assert abs(X.var(ddof=1) - GOLDEN_COV_X) < 4 * se + 0.01 * GOLDEN_COV_X


@pytest.mark.unit
class TestSimulation:
    """Co-simulated (Y, X) paths."""

    def test_shapes(self, normalized_xspec):
        """Test ensemble fields and initial states."""
        ensemble = simulate_X_paths(normalized_xspec, TimeGrid(1.0, 10), 6, seed=1)
        assert ensemble.Y.shape == (6, 11, 3)
        assert ensemble.X.shape == (6, 11, 3)
        np.testing.assert_array_equal(ensemble.X[:, 0], np.tile(normalized_xspec.X0, (6, 1)))

    def test_y_matches_standalone(self, normalized_xspec):
        """Test that the Y component equals simulate_Y_paths on the same seed."""
        grid = TimeGrid(1.0, 10)
        joint = simulate_X_paths(normalized_xspec, grid, 6, seed=2)
        alone = simulate_Y_paths(normalized_xspec.ou, grid, 6, seed=2)
        np.testing.assert_array_equal(joint.Y, alone.Y)

    def test_thread_invariant(self, normalized_xspec):
        """Test that worker count does not change the paths."""
        grid = TimeGrid(1.0, 10)
        serial = simulate_X_paths(normalized_xspec, grid, 25, seed=3, threads=1)
        parallel = simulate_X_paths(normalized_xspec, grid, 25, seed=3, threads=3, block_size=4)
        np.testing.assert_array_equal(serial.X, parallel.X)

    def test_zero_volatility(self):
        """Test that Y = 0 leaves X deterministic with first-order Euler error."""
        ou = OUSpec(A=[[-1.0, 0.0], [0.0, -1.0]], eta=np.zeros((2, 2)), Q_W=np.eye(2), Y0=[0, 0])
        spec = XSpec(
            C=[[-0.5, 0.2], [0.0, -1.0]],
            Q_B=np.eye(2),
            X0=[1.0, 1.0],
            unit_process=UnitProcessSpec.normalized_Y(),
            ou=ou,
        )
        exact = semigroup(spec.C, 1.0) @ spec.X0
        errors = []
        for steps in (100, 200):
            ensemble = simulate_X_paths(spec, TimeGrid(1.0, steps), 3, seed=0, record="terminal")
            X = ensemble.terminal("X")
            np.testing.assert_array_equal(X[0], X[1])
            errors.append(np.linalg.norm(X[0] - exact))
        assert errors[0] / errors[1] == pytest.approx(2.0, abs=0.2)

    def test_given_y_path(self, golden_xspec):
        """Test conditional X samples on a fixed Y path."""
        grid = TimeGrid(1.0, 50)
        path = simulate_Y_paths(golden_xspec.ou, grid, 1, seed=4).Y[0]
        X = simulate_X_given_Y(golden_xspec, grid, path, 5000, seed=4)
        assert X.shape == (5000, 1)
        # conditional mean is S(t) X0 = 0
        assert abs(X.mean()) < 5 * X.std(ddof=1) / math.sqrt(5000)

    def test_given_y_path_is_gaussian(self, golden_xspec):
        """Test that <X(t), f> given one Y path has zero skewness and excess kurtosis."""
        grid = TimeGrid(1.0, 100)
        path = simulate_Y_paths(golden_xspec.ou, grid, 1, seed=4).Y[0]
        X = simulate_X_given_Y(golden_xspec, grid, path, 40000, seed=6)[:, 0]
        assert abs(stats.skew(X)) < 5 * math.sqrt(6 / X.size)
        assert abs(stats.kurtosis(X)) < 5 * math.sqrt(24 / X.size)

    def test_given_y_path_variance(self, golden_xspec):
        """Test the conditional variance against int |Q_B^{1/2} gamma|^2 <Y(s), S(t-s)^T f>^2 ds."""
        grid = TimeGrid(1.0, 200)
        path = simulate_Y_paths(golden_xspec.ou, grid, 1, seed=4).Y[0, :, 0]
        X = simulate_X_given_Y(golden_xspec, grid, path[:, None], 40000, seed=7)[:, 0]
        # C = -1, gamma = Q_B = f = 1
        form = integrate.trapezoid(path**2 * np.exp(-2.0 * (1.0 - grid.times)), dx=grid.dt)
        se = form * math.sqrt(2.0 / X.size)
        assert abs(X.var(ddof=1) - form) < 4 * se + 0.03 * form

    def test_given_y_path_matches_conditional_char(self):
        """Test that a deterministic Y gives Var <X(t), f> = -2 log |cond_char_X|."""
        ou = OUSpec(A=[[-1.0]], eta=[[1.0]], Q_W=[[0.0]], Y0=[1.0])
        spec = XSpec(
            C=[[-1.0]], Q_B=[[1.0]], X0=[0.0], unit_process=UnitProcessSpec.constant([1.0]), ou=ou
        )
        grid = TimeGrid(1.0, 200)
        f = 1.5
        cond = cond_char_X(spec, 1.0, [f], 2, seed=0, steps=200)
        assert cond.stderr == 0.0
        form = -2.0 * math.log(cond.modulus)
        # Y(s) = e^{-s} gives f^2 e^{-2}
        assert form == pytest.approx(f**2 * math.exp(-2.0), rel=5e-3)

        path = simulate_Y_paths(ou, grid, 1, seed=0).Y[0]
        X = simulate_X_given_Y(spec, grid, path, 40000, seed=8)[:, 0] * f
        se = form * math.sqrt(2.0 / X.size)
        assert abs(X.var(ddof=1) - form) < 4 * se + 0.03 * form

    def test_given_y_path_shape(self, golden_xspec):
        """Test that a Y path on the wrong grid is rejected."""
        with pytest.raises(DimensionError):
            simulate_X_given_Y(golden_xspec, TimeGrid(1.0, 10), np.zeros((5, 1)), 10, seed=0)


@pytest.mark.unit
class TestCondCharX:
    """Characteristic function of X(t) by conditioning on Y."""

    def test_zero_functional(self, normalized_xspec):
        """Test that f = 0 gives exactly 1."""
        value = cond_char_X(normalized_xspec, 1.0, np.zeros(3), 100, seed=0)
        assert value.value == 1.0 + 0.0j
        assert value.stderr == 0.0

    def test_time_zero(self, normalized_xspec):
        """Test exp(i <X0, f>) at t = 0."""
        f = np.array([1.0, 2.0, 3.0])
        value = cond_char_X(normalized_xspec, 0.0, f, 100, seed=0)
        expected = cmath.exp(1j * float(normalized_xspec.X0 @ f))
        assert value.re == pytest.approx(expected.real, abs=1e-14)
        assert value.im == pytest.approx(expected.imag, abs=1e-14)

    def test_agrees_with_empirical(self, golden_xspec):
        """Test the conditional estimator against the empirical characteristic function."""
        cond = cond_char_X(golden_xspec, 1.0, [1.5], 5000, seed=7, steps=200)
        emp = empirical_char_X(golden_xspec, 1.0, [1.5], 20000, seed=8, steps=200)
        se = math.hypot(cond.stderr_re, emp.stderr_re)
        assert abs(cond.re - emp.re) < 4 * se + 0.02

    def test_conditioning_reduces_variance(self, golden_xspec):
        """Test that the conditional estimator has the smaller standard error."""
        cond = cond_char_X(golden_xspec, 1.0, [1.5], 4000, seed=9, steps=100)
        emp = empirical_char_X(golden_xspec, 1.0, [1.5], 4000, seed=9, steps=100)
        assert cond.stderr < emp.stderr
