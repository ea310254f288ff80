"""Unit tests for closed-form characteristic functionals and moment bounds."""

import cmath
import math

import numpy as np
import pytest

from tensorheston.errors import DomainError, UnsupportedConfigurationError
from tensorheston.gaussian_analytics import (
    CharValue,
    char_V,
    char_Y,
    exp_moment_bound,
    vc_integrals,
)
from tensorheston.ou_engine import OUSpec, sample_Y_exact

V_SCALAR = (1.0 - math.exp(-2.0)) / 2.0


@pytest.mark.unit
class TestCharValue:
    """Complex values with Monte Carlo standard errors."""

    def test_from_complex(self):
        """Test that exact values carry no standard error."""
        value = CharValue.from_complex(0.6 + 0.8j)
        assert value.value == 0.6 + 0.8j
        assert value.modulus == pytest.approx(1.0)
        assert value.stderr is None
        assert value.to_dict() == {"re": 0.6, "im": 0.8}

    def test_from_samples_constant(self):
        """Test that constant phases give an exact estimate with zero error."""
        value = CharValue.from_samples(np.zeros(100))
        assert value.re == 1.0 and value.im == 0.0
        assert value.stderr == 0.0

    def test_from_values_stderr(self):
        """Test per-component standard errors of the mean."""
        value = CharValue.from_values(np.array([1.0, -1.0, 1.0, -1.0]))
        assert value.re == 0.0
        assert value.stderr_re == pytest.approx(np.std([1, -1, 1, -1], ddof=1) / 2.0)
        assert "stderr_re" in value.to_dict()


@pytest.mark.unit
class TestCharY:
    """E[exp(i <Y(t), f>)]."""

    def test_zero_functional(self, coupled_spec):
        """Test that f = 0 gives 1."""
        assert char_Y(coupled_spec, 1.0, np.zeros(3)).value == 1.0 + 0.0j

    def test_scalar_centred(self, scalar_spec):
        """Test exp(-v/2) with v = (1 - e^{-2}) / 2."""
        value = char_Y(scalar_spec, 1.0, [1.0])
        assert value.re == pytest.approx(0.805604, abs=1e-6)
        assert value.im == pytest.approx(0.0, abs=1e-15)

    def test_scalar_with_mean(self, golden_xspec):
        """Test the phase <U(t) Y0, f> = e^{-1} for Y0 = 1."""
        value = char_Y(golden_xspec.ou, 1.0, [1.0])
        assert value.modulus == pytest.approx(0.805604, abs=1e-6)
        assert cmath.phase(value.value) == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_hermitian_symmetry(self, coupled_spec):
        """Test phi(-f) = conj(phi(f))."""
        f = np.array([0.7, -0.4, 1.1])
        assert char_Y(coupled_spec, 1.3, -f).value == pytest.approx(
            char_Y(coupled_spec, 1.3, f).value.conjugate(), abs=1e-14
        )

    def test_at_time_zero(self, diagonal_spec):
        """Test that Y(0) = Y0 gives a pure phase."""
        f = np.array([1.0, 2.0, -1.0])
        value = char_Y(diagonal_spec, 0.0, f)
        expected = cmath.exp(1j * float(diagonal_spec.Y0 @ f))
        assert value.re == pytest.approx(expected.real, abs=1e-14)
        assert value.im == pytest.approx(expected.imag, abs=1e-14)

    def test_matches_exact_samples(self, coupled_spec):
        """Test the closed form against the empirical characteristic function."""
        f = np.array([0.7, -0.4, 1.1])
        exact = char_Y(coupled_spec, 1.0, f)
        estimate = CharValue.from_samples(sample_Y_exact(coupled_spec, 1.0, 100000, 21) @ f)
        assert abs(estimate.re - exact.re) < 4 * estimate.stderr_re + 1e-3
        assert abs(estimate.im - exact.im) < 4 * estimate.stderr_im + 1e-3


@pytest.mark.unit
class TestCharV:
    """E[exp(i <<V(t), f (x) g>>)] for centred Y."""

    def test_variance_integrals_diagonal(self, scalar_spec):
        """Test v_f = v_g = c_fg for g = f."""
        v_f, v_g, c_fg = vc_integrals(scalar_spec, 1.0, [1.0], [1.0])
        assert v_f == pytest.approx(0.432332, abs=1e-6)
        assert v_f == v_g == c_fg

    def test_zero_functional(self, scalar_spec):
        """Test that f = 0 gives 1."""
        assert char_V(scalar_spec, 1.0, [0.0], [1.0]).value == 1.0 + 0.0j

    def test_scalar_diagonal(self, scalar_spec):
        """Test (1 - 2 i v)^{-1/2} with modulus (1 + 4 v^2)^{-1/4}."""
        value = char_V(scalar_spec, 1.0, [1.0], [1.0])
        expected = 1.0 / cmath.sqrt(1.0 - 2j * V_SCALAR)
        assert value.re == pytest.approx(expected.real, abs=1e-9)
        assert value.im == pytest.approx(expected.imag, abs=1e-9)
        assert value.modulus == pytest.approx(0.869, abs=1e-3)

    def test_decoupled_is_real(self):
        """Test that orthogonal, decoupled directions give (1 + v_f v_g)^{-1/2}."""
        spec = OUSpec(A=np.diag([-1.0, -2.0]), eta=np.eye(2), Q_W=np.eye(2), Y0=[0.0, 0.0])
        v_f, v_g, c_fg = vc_integrals(spec, 1.0, [1.0, 0.0], [0.0, 1.0])
        value = char_V(spec, 1.0, [1.0, 0.0], [0.0, 1.0])
        assert c_fg == pytest.approx(0.0, abs=1e-15)
        assert value.im == pytest.approx(0.0, abs=1e-15)
        assert value.re == pytest.approx((1.0 + v_f * v_g) ** -0.5, abs=1e-12)

    def test_matches_exact_samples(self, scalar_spec):
        """Test the closed form against 2e5 exact samples of Y(1)^2."""
        exact = char_V(scalar_spec, 1.0, [1.0], [1.0])
        samples = sample_Y_exact(scalar_spec, 1.0, 200000, seed=8)[:, 0]
        estimate = CharValue.from_samples(samples**2)
        assert abs(estimate.re - exact.re) < 4 * estimate.stderr_re + 1e-3
        assert abs(estimate.im - exact.im) < 4 * estimate.stderr_im + 1e-3

    def test_noncentral_unsupported(self, golden_xspec):
        """Test that a nonzero Y0 has no closed form here."""
        with pytest.raises(UnsupportedConfigurationError):
            char_V(golden_xspec.ou, 1.0, [1.0], [1.0])


@pytest.mark.unit
class TestExpMomentBound:
    """Upper bound on E[exp(theta ||V(t)||)]."""

    def test_theta_zero(self, golden_xspec):
        """Test that the bound is 1 at theta = 0."""
        assert exp_moment_bound(golden_xspec.ou, 1.0, 0.0).value == 1.0

    def test_scalar_value(self, scalar_spec):
        """Test 1 / sqrt(1 - 4 theta k) with k = 0.432332 and theta = 0.25."""
        bound = exp_moment_bound(scalar_spec, 1.0, 0.25)
        assert bound.k == pytest.approx(0.432332, abs=1e-6)
        assert bound.value == pytest.approx(1.0 / math.sqrt(1.0 - 0.432332), abs=1e-5)
        assert bound.value == pytest.approx(1.3272, abs=1e-4)

    def test_drift_factor(self, golden_xspec):
        """Test the exp(2 theta |U(t) Y0|^2) factor for Y0 = 1."""
        bound = exp_moment_bound(golden_xspec.ou, 1.0, 0.25)
        expected = math.exp(0.5 * math.exp(-2.0)) / math.sqrt(1.0 - bound.k)
        assert bound.value == pytest.approx(expected, rel=1e-12)

    def test_boundary_is_infinite(self, scalar_spec):
        """Test that theta = 1/(4k) gives +inf."""
        k = exp_moment_bound(scalar_spec, 1.0, 0.0).k
        assert exp_moment_bound(scalar_spec, 1.0, 1.0 / (4.0 * k)).value == math.inf

    def test_beyond_boundary(self, scalar_spec):
        """Test that theta above 1/(4k) is outside the domain."""
        with pytest.raises(DomainError):
            exp_moment_bound(scalar_spec, 1.0, 1.0)

    def test_negative_theta(self, scalar_spec):
        """Test that negative theta is outside the domain."""
        with pytest.raises(DomainError):
            exp_moment_bound(scalar_spec, 1.0, -0.1)

    def test_zero_noise_any_theta(self):
        """Test that k = 0 admits every non-negative theta."""
        spec = OUSpec(A=[[-1.0]], eta=[[1.0]], Q_W=[[0.0]], Y0=[0.0])
        bound = exp_moment_bound(spec, 1.0, 100.0)
        assert bound.k == 0.0
        assert bound.value == 1.0

    def test_dominates_monte_carlo(self, coupled_spec):
        """Test that the empirical moment stays below the bound."""
        bound = exp_moment_bound(coupled_spec, 1.0, 0.0)
        theta = 0.5 / (4.0 * bound.k)
        value = exp_moment_bound(coupled_spec, 1.0, theta).value
        samples = sample_Y_exact(coupled_spec, 1.0, 50000, seed=4)
        moments = np.exp(theta * np.sum(samples**2, axis=1))
        se = moments.std(ddof=1) / math.sqrt(moments.size)
        assert moments.mean() - 4 * se <= value
