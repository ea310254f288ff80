"""
The variance process V = Y (x) Y.

Covers the rank-one state with lazy materialization, its square root, the Cholesky-type
factors Gamma_Z = Z (x) Y, the F map, and the Ito dynamics of V for bounded A:

    dV = Phi dt + Psi dW,  Phi = A V + V A^T + eta Q_W eta^T,  Psi(dW) = dW (x) Y + Y (x) dW
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from config.settings import get_config

from .errors import ConfigurationError, PreconditionError
from .logger import get_logger
from .noise import Stream, block_normals
from .operator_core import as_operator, as_vector, hs_norm, psd_sqrt, tensor
from .ou_engine import (
    OUSpec,
    PathEnsemble,
    StateRecorder,
    TimeGrid,
    check_count,
    check_record,
    y_stepper,
)
from .parallel import BlockScheduler

logger = get_logger(__name__)

UNIT_KINDS = ("constant", "normalized_Y")


def _unit_tol() -> float:
    return get_config().get_float("Numerics", "unit_tol", fallback=1e-12)


def check_unit(z: np.ndarray, name: str = "Z") -> np.ndarray:
    """
    Raises:
        PreconditionError: |z| differs from 1 by more than Numerics.unit_tol
    """
    length = float(np.linalg.norm(z))
    if abs(length - 1.0) > _unit_tol():
        raise PreconditionError(f"{name} must have unit norm, got |{name}| = {length:.15g}")
    return z


@dataclass(frozen=True, eq=False)
class TensorVariance:
    """Rank-one variance V = factor (x) factor, materialized on demand."""

    factor: np.ndarray

    def materialize(self) -> np.ndarray:
        return tensor(self.factor, self.factor)

    @property
    def norm(self) -> float:
        """Hilbert-Schmidt norm ||V|| = |factor|^2."""
        return float(self.factor @ self.factor)


@dataclass(frozen=True, eq=False)
class UnitProcessSpec:
    """
    Strategy for the unit-ball process Z.

    constant: Z = gamma for all times.
    normalized_Y: Z = Y / |Y|, with the first basis vector when Y = 0.
    """

    kind: str
    gamma: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in UNIT_KINDS:
            raise ConfigurationError(
                f"unknown unit process '{self.kind}', expected one of {UNIT_KINDS}", field="kind"
            )
        if self.kind == "constant":
            if self.gamma is None:
                raise ConfigurationError("constant unit process needs gamma", field="gamma")
            gamma = as_vector(self.gamma, name="gamma")
            object.__setattr__(self, "gamma", check_unit(gamma, "gamma"))

    @classmethod
    def constant(cls, gamma: ArrayLike) -> "UnitProcessSpec":
        return cls("constant", np.asarray(gamma, dtype=float))

    @classmethod
    def normalized_Y(cls) -> "UnitProcessSpec":
        return cls("normalized_Y")

    def directions(self, Y: np.ndarray) -> np.ndarray:
        """
        Z for a (paths, N) block of Y states.

        Returns:
            (paths, N) array of unit vectors
        """
        if self.kind == "constant":
            return np.broadcast_to(self.gamma, Y.shape)
        lengths = np.linalg.norm(Y, axis=-1, keepdims=True)
        fallback = np.zeros(Y.shape[-1])
        fallback[0] = 1.0
        safe = np.where(lengths > 0, lengths, 1.0)
        return np.where(lengths > 0, Y / safe, fallback)


def variance_of(Y: ArrayLike) -> TensorVariance:
    return TensorVariance(as_vector(Y, name="Y").copy())


def sqrt_V(V: TensorVariance) -> np.ndarray:
    """
    Square root V^{1/2} = |Y|^{-1} V of the rank-one variance; zero when Y = 0.
    """
    length = float(np.linalg.norm(V.factor))
    if length == 0.0:
        return np.zeros((V.factor.size, V.factor.size))
    return V.materialize() / length


def f_map(f: ArrayLike) -> np.ndarray:
    """F(f) = |f|^{-1} f (x) f, zero at f = 0; ||F(f)|| = |f|."""
    fv = as_vector(f, name="f")
    length = float(np.linalg.norm(fv))
    if length == 0.0:
        return np.zeros((fv.size, fv.size))
    return tensor(fv, fv) / length


def f_map_lipschitz_bound(f: ArrayLike, g: ArrayLike) -> float:
    """
    Local Lipschitz factor L with ||F(f) - F(g)|| <= L |f - g| for nonzero g:
    L = |f| / |g| + sqrt(2) (1 + |f| / |g|)^{1/2}.
    """
    f_len = np.linalg.norm(as_vector(f, name="f"))
    ratio = float(f_len / np.linalg.norm(as_vector(g, name="g")))
    return ratio + math.sqrt(2.0) * math.sqrt(1.0 + ratio)


def gamma_factor(Z: ArrayLike, Y: ArrayLike) -> np.ndarray:
    """
    Gamma_Z = Z (x) Y, satisfying Gamma_Z Gamma_Z^* = Y (x) Y for every unit Z.

    Raises:
        PreconditionError: |Z| != 1
    """
    zv = check_unit(as_vector(Z, name="Z"))
    return tensor(zv, as_vector(Y, zv.size, name="Y"))


def gamma_qb_norm_sq(Z: ArrayLike, Y: ArrayLike, Q_B: ArrayLike) -> float:
    """||Gamma_Z Q_B^{1/2}||^2, equal to |Y|^2 |Q_B^{1/2} Z|^2."""
    return hs_norm(gamma_factor(Z, Y) @ psd_sqrt(Q_B)) ** 2


def phi_drift(spec: OUSpec, Y: ArrayLike) -> np.ndarray:
    """Phi(Y) = A Y (x) Y + Y (x) A Y + eta Q_W eta^T."""
    yv = as_vector(Y, spec.dim, name="Y")
    Ay = spec.A @ yv
    return tensor(Ay, yv) + tensor(yv, Ay) + spec.noise_cov


def operator_drift(spec: OUSpec, V: ArrayLike) -> np.ndarray:
    """A V A^T + V - (A - Id) V (A - Id)^T + eta Q_W eta^T."""
    mat = as_operator(V, spec.dim, name="V")
    shifted = spec.A - np.eye(spec.dim)
    return spec.A @ mat @ spec.A.T + mat - shifted @ mat @ shifted.T + spec.noise_cov


def psi_diffusion(Y: ArrayLike, dW: ArrayLike) -> np.ndarray:
    """Psi(Y)(dW) = dW (x) Y + Y (x) dW for an already scaled increment dW."""
    return tensor(dW, Y) + tensor(Y, dW)


def finite_dim_drift(eta: ArrayLike, A: ArrayLike, V: ArrayLike) -> np.ndarray:
    """Matrix SDE drift eta eta^T + A V + V A^T (Q_W = Id)."""
    eta_m, A_m, V_m = as_operator(eta), as_operator(A), as_operator(V)
    return eta_m @ eta_m.T + A_m @ V_m + V_m @ A_m.T


def finite_dim_diffusion(eta: ArrayLike, Y: ArrayLike, dB: ArrayLike) -> np.ndarray:
    """Matrix SDE diffusion eta dB Y^T + Y dB^T eta^T (Q_W = Id)."""
    eta_m = as_operator(eta)
    yv, bv = as_vector(Y), as_vector(dB)
    return np.outer(eta_m @ bv, yv) + np.outer(yv, eta_m @ bv)


def _batched_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


def tensor_sde_step(
    spec: OUSpec, Y: np.ndarray, V: np.ndarray, dW: np.ndarray, dt: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One Euler step of the coupled (Y, V) system on a shared increment.

    Works on a single state (Y of shape (N,), V of shape (N, N)) or on a block
    with a leading path axis.

    Args:
        spec: OU parameters
        Y: Current Y
        V: Current (dense) V
        dW: Scaled increment eta Q_W^{1/2} xi sqrt(dt), same shape as Y
        dt: Step size

    Returns:
        (Y', V')
    """
    AY = Y @ spec.A.T
    phi = _batched_outer(AY, Y) + _batched_outer(Y, AY) + spec.noise_cov
    V_next = V + dt * phi + _batched_outer(dW, Y) + _batched_outer(Y, dW)
    return Y + dt * AY + dW, V_next


def frechet_check(
    y: ArrayLike, h: ArrayLike, xi: Optional[ArrayLike] = None, seed: int = 0
) -> Tuple[float, float]:
    """
    Remainders of the first and second Frechet expansions of v(y) = y (x) y.

    err1 = ||v(y + h) - v(y) - (h (x) y + y (x) h)||, which equals |h|^2.
    err2 = max over directions xi of ||Dv(y + h) xi - Dv(y) xi - (xi (x) h + h (x) xi)||,
    which vanishes.

    Args:
        y: Base point
        h: Perturbation
        xi: Directions, shape (k, N); eight random directions when omitted
        seed: Seed for the random directions

    Returns:
        (err1, err2)
    """
    yv = as_vector(y, name="y")
    hv = as_vector(h, yv.size, name="h")
    err1 = hs_norm(tensor(yv + hv, yv + hv) - tensor(yv, yv) - tensor(hv, yv) - tensor(yv, hv))

    if xi is None:
        directions = np.random.default_rng(seed).standard_normal((8, yv.size))
    else:
        directions = np.atleast_2d(np.asarray(xi, dtype=float))

    err2 = 0.0
    for d in directions:
        at_shifted = tensor(d, yv + hv) + tensor(yv + hv, d)
        at_base = tensor(d, yv) + tensor(yv, d)
        second = tensor(d, hv) + tensor(hv, d)
        err2 = max(err2, hs_norm(at_shifted - at_base - second))
    return err1, err2


def simulate_tensor_paths(
    spec: OUSpec,
    grid: TimeGrid,
    count: int,
    seed: int,
    record: str = "all",
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> PathEnsemble:
    """
    Co-simulate Euler Y and the dense Euler V on identical noise.

    Returns:
        PathEnsemble with Y of shape (count, records, N) and V of shape (count, records, N, N)
    """
    count = check_count(count)
    check_record(record)
    stepper = y_stepper(spec, grid.dt, "euler")
    N = spec.dim

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi = block_normals(seed, Stream.W, start, stop, grid.steps, N)
        m = stop - start
        Y = np.tile(spec.Y0, (m, 1))
        V = _batched_outer(Y, Y)
        track_y = StateRecorder(record, m, grid.steps, (N,))
        track_v = StateRecorder(record, m, grid.steps, (N, N))
        track_y.put(0, Y)
        track_v.put(0, V)
        for k in range(grid.steps):
            Y, V = tensor_sde_step(spec, Y, V, stepper.increment(xi[k]), grid.dt)
            track_y.put(k + 1, Y)
            track_v.put(k + 1, V)
        return {"Y": track_y.data, "V": track_v.data}

    logger.debug("Simulating tensor paths", path_count=count, steps=grid.steps)
    data = BlockScheduler(threads, block_size).gather(kernel, count)
    return PathEnsemble(
        grid=grid,
        seed=seed,
        path_count=count,
        scheme="euler",
        record=record,
        Y=data["Y"],
        V=data["V"],
    )
