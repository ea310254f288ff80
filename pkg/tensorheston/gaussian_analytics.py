"""
Closed-form characteristic functionals and exponential-moment bounds for Y and V = Y (x) Y.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError, UnsupportedConfigurationError
from .operator_core import as_vector
from .ou_engine import OUSpec, check_time, cov_Y, mean_Y


@dataclass(frozen=True)
class CharValue:
    """
    Complex value of a characteristic functional.

    Monte Carlo estimates carry the standard errors of both components.
    """

    re: float
    im: float
    stderr_re: Optional[float] = None
    stderr_im: Optional[float] = None

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def modulus(self) -> float:
        return abs(self.value)

    @property
    def stderr(self) -> Optional[float]:
        """Combined standard error of the complex estimate."""
        if self.stderr_re is None or self.stderr_im is None:
            return None
        return math.hypot(self.stderr_re, self.stderr_im)

    @classmethod
    def from_complex(cls, z: complex) -> "CharValue":
        return cls(float(np.real(z)), float(np.imag(z)))

    @classmethod
    def from_values(cls, values: ArrayLike) -> "CharValue":
        """
        Monte Carlo mean of complex samples.

        Args:
            values: Complex samples

        Returns:
            Sample mean with per-component standard errors
        """
        z = np.asarray(values, dtype=complex).ravel()
        n = z.size
        ddof = 1 if n > 1 else 0
        return cls(
            float(z.real.mean()),
            float(z.imag.mean()),
            float(z.real.std(ddof=ddof) / math.sqrt(n)),
            float(z.imag.std(ddof=ddof) / math.sqrt(n)),
        )

    @classmethod
    def from_samples(cls, phases: ArrayLike) -> "CharValue":
        """Monte Carlo estimate of E[exp(i X)] from real samples of X."""
        return cls.from_values(np.exp(1j * np.asarray(phases, dtype=float)))

    def to_dict(self) -> dict:
        data = {"re": self.re, "im": self.im}
        if self.stderr_re is not None:
            data["stderr_re"] = self.stderr_re
            data["stderr_im"] = self.stderr_im
        return data


@dataclass(frozen=True)
class MomentBound:
    """Exponential-moment bound together with the Gaussian second moment k."""

    value: float
    k: float


def char_Y(spec: OUSpec, t: float, f: ArrayLike, quad_steps: Optional[int] = None) -> CharValue:
    """
    E[exp(i <Y(t), f>)] = exp(i <U(t) Y0, f> - 1/2 <Q_{Y(t)} f, f>).

    Args:
        spec: OU parameters
        t: Time (non-negative)
        f: Test vector
        quad_steps: Simpson panels for Q_{Y(t)}

    Returns:
        CharValue
    """
    fv = as_vector(f, spec.dim, name="f")
    mean = float(mean_Y(spec, t) @ fv)
    var = float(fv @ cov_Y(spec, t, quad_steps=quad_steps) @ fv)
    return CharValue.from_complex(np.exp(1j * mean - 0.5 * var))


def vc_integrals(
    spec: OUSpec, t: float, f: ArrayLike, g: ArrayLike, quad_steps: Optional[int] = None
) -> Tuple[float, float, float]:
    """
    Variances and covariance of <Y(t), f> and <Y(t), g>.

    Returns:
        (v_f, v_g, c_fg) with c_fg^2 <= v_f v_g
    """
    fv = as_vector(f, spec.dim, name="f")
    gv = as_vector(g, spec.dim, name="g")
    Q = cov_Y(spec, t, quad_steps=quad_steps)
    return float(fv @ Q @ fv), float(gv @ Q @ gv), float(fv @ Q @ gv)


def char_V(
    spec: OUSpec, t: float, f: ArrayLike, g: ArrayLike, quad_steps: Optional[int] = None
) -> CharValue:
    """
    E[exp(i <<V(t), f (x) g>>)] = (1 + v_f v_g - c_fg^2 - 2 i c_fg)^{-1/2} for Y0 = 0.

    The argument has real part >= 1, so the principal branch of the square root is used.

    Raises:
        UnsupportedConfigurationError: Y0 is not zero
    """
    if np.any(spec.Y0 != 0):
        raise UnsupportedConfigurationError(
            "char_V closed form requires Y0 = 0 (noncentral case not implemented)"
        )
    v_f, v_g, c_fg = vc_integrals(spec, t, f, g, quad_steps=quad_steps)
    return CharValue.from_complex(1.0 / np.sqrt(complex(1.0 + v_f * v_g - c_fg**2, -2.0 * c_fg)))


def exp_moment_bound(
    spec: OUSpec, t: float, theta: float, quad_steps: Optional[int] = None
) -> MomentBound:
    """
    Upper bound on E[exp(theta ||V(t)||)]: exp(2 theta |U(t) Y0|^2) / sqrt(1 - 4 theta k)
    with k = trace(Q_{Y(t)}).

    Args:
        spec: OU parameters
        t: Time (non-negative)
        theta: Exponent in [0, 1/(4k)]; any theta >= 0 when k = 0

    Returns:
        MomentBound (value is +inf at theta = 1/(4k))

    Raises:
        DomainError: theta outside its admissible range
    """
    check_time(t)
    if not math.isfinite(theta) or theta < 0:
        raise DomainError(f"theta must be non-negative, got {theta}")

    k = float(np.trace(cov_Y(spec, t, quad_steps=quad_steps)))
    drift = float(np.sum(mean_Y(spec, t) ** 2))
    scale = math.exp(2.0 * theta * drift)
    if k <= 0.0:
        return MomentBound(scale, 0.0)

    limit = 1.0 / (4.0 * k)
    if theta > limit:
        raise DomainError(f"theta must be at most 1/(4k) = {limit:.6g}, got {theta}")
    if theta == limit:
        return MomentBound(math.inf, k)
    return MomentBound(scale / math.sqrt(1.0 - 4.0 * theta * k), k)
