"""
Volatility-modulated OU process X.

dX = C X dt + Gamma_Z(t) dB(t), Gamma_Z = Z (x) Y, with B a Q_B-Wiener process independent
of the W driving Y.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate

from .errors import DimensionError, UnsupportedConfigurationError
from .gaussian_analytics import CharValue
from .logger import get_logger
from .noise import Stream, block_normals
from .operator_core import as_operator, as_vector, psd_sqrt, validate_covariance
from .ou_engine import (
    OUSpec,
    PathEnsemble,
    StateRecorder,
    TimeGrid,
    check_count,
    check_record,
    check_scheme,
    check_time,
    cov_Y_series,
    quad_panels,
    semigroup,
    y_stepper,
)
from .parallel import BlockScheduler
from .tensor_variance import UnitProcessSpec

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class XSpec:
    """Parameters of X together with its Y driver."""

    C: np.ndarray
    Q_B: np.ndarray
    X0: np.ndarray
    unit_process: UnitProcessSpec
    ou: OUSpec

    def __post_init__(self):
        dim = self.ou.dim
        object.__setattr__(self, "C", as_operator(self.C, dim, name="C"))
        Q_B = as_operator(self.Q_B, dim, name="Q_B")
        validate_covariance(Q_B, name="Q_B")
        object.__setattr__(self, "Q_B", Q_B)
        object.__setattr__(self, "X0", as_vector(self.X0, dim, name="X0"))
        gamma = self.unit_process.gamma
        if gamma is not None and gamma.size != dim:
            raise DimensionError(f"expected length {dim}, got {gamma.size}", field="gamma")

    @property
    def dim(self) -> int:
        return self.ou.dim


def _gamma_weight(spec: XSpec) -> float:
    """|Q_B^{1/2} gamma|^2 for a constant unit process."""
    if spec.unit_process.kind != "constant":
        raise UnsupportedConfigurationError(
            "closed form needs a constant unit process; use the Monte Carlo estimator"
        )
    gamma = spec.unit_process.gamma
    return float(gamma @ spec.Q_B @ gamma)


def simulate_X_paths(
    spec: XSpec,
    grid: TimeGrid,
    count: int,
    seed: int,
    scheme: Optional[str] = None,
    record: str = "all",
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> PathEnsemble:
    """
    Simulate (Y, X) with X by Euler on the strong form:
    X_{k+1} = X_k + C X_k dt + <Z_k, Q_B^{1/2} xi^B_k> Y_k sqrt(dt).

    Y uses the W stream and X the B stream of the seed, so the two noises are independent.

    Args:
        spec: X parameters
        grid: Time grid
        count: Number of paths
        seed: Scenario seed
        scheme: Scheme of the co-simulated Y ('euler' or 'exact')
        record: 'all' or 'terminal'

    Returns:
        PathEnsemble with Y and X populated
    """
    count = check_count(count)
    scheme = check_scheme(scheme)
    check_record(record)
    stepper = y_stepper(spec.ou, grid.dt, scheme)
    root_B = psd_sqrt(spec.Q_B)
    drift = np.eye(spec.dim) + grid.dt * spec.C
    sqrt_dt = math.sqrt(grid.dt)
    N = spec.dim

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi_w = block_normals(seed, Stream.W, start, stop, grid.steps, N)
        xi_b = block_normals(seed, Stream.B, start, stop, grid.steps, N)
        m = stop - start
        Y = np.tile(spec.ou.Y0, (m, 1))
        X = np.tile(spec.X0, (m, 1))
        track_y = StateRecorder(record, m, grid.steps, (N,))
        track_x = StateRecorder(record, m, grid.steps, (N,))
        track_y.put(0, Y)
        track_x.put(0, X)
        for k in range(grid.steps):
            Z = spec.unit_process.directions(Y)
            loading = np.sum(Z * (xi_b[k] @ root_B.T), axis=1, keepdims=True)
            X = X @ drift.T + Y * loading * sqrt_dt
            Y = stepper.step(Y, xi_w[k])
            track_y.put(k + 1, Y)
            track_x.put(k + 1, X)
        return {"Y": track_y.data, "X": track_x.data}

    logger.debug("Simulating X paths", path_count=count, steps=grid.steps, scheme=scheme)
    data = BlockScheduler(threads, block_size).gather(kernel, count)
    return PathEnsemble(
        grid=grid,
        seed=seed,
        path_count=count,
        scheme=scheme,
        record=record,
        Y=data["Y"],
        X=data["X"],
    )


def simulate_X_given_Y(
    spec: XSpec,
    grid: TimeGrid,
    Y_path: ArrayLike,
    count: int,
    seed: int,
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> np.ndarray:
    """
    Terminal X(t) samples conditional on one fixed Y path.

    Args:
        spec: X parameters
        grid: Time grid of the Y path
        Y_path: Y states, shape (steps + 1, N)
        count: Number of X samples
        seed: Seed of the B stream

    Returns:
        Array of shape (count, N)
    """
    count = check_count(count)
    path = np.asarray(Y_path, dtype=float)
    if path.shape != (grid.steps + 1, spec.dim):
        raise DimensionError(
            f"expected Y path of shape {(grid.steps + 1, spec.dim)}, got {path.shape}",
            field="Y_path",
        )
    root_B = psd_sqrt(spec.Q_B)
    drift = np.eye(spec.dim) + grid.dt * spec.C
    sqrt_dt = math.sqrt(grid.dt)
    Z_path = spec.unit_process.directions(path)

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi_b = block_normals(seed, Stream.B, start, stop, grid.steps, spec.dim)
        X = np.tile(spec.X0, (stop - start, 1))
        for k in range(grid.steps):
            loading = (xi_b[k] @ root_B.T) @ Z_path[k]
            X = X @ drift.T + np.outer(loading, path[k]) * sqrt_dt
        return {"X": X}

    return BlockScheduler(threads, block_size).gather(kernel, count)["X"]


def cov_X(spec: XSpec, t: float, quad_steps: Optional[int] = None) -> np.ndarray:
    """
    Covariance of X(t) for a constant unit process gamma:

        int_0^t S(t-s) |Q_B^{1/2} gamma|^2 [(U(s) Y0)^{(x)2} + Q_{Y(s)}] S(t-s)^T ds

    Outer composite Simpson over s; Q_{Y(s)} on the Simpson nodes by the exact recursion.

    Args:
        spec: X parameters
        t: Time (non-negative)
        quad_steps: Simpson panels; defaults to Numerics.quad_steps_per_unit * t

    Returns:
        Symmetric PSD N x N matrix

    Raises:
        UnsupportedConfigurationError: Unit process is normalized_Y
    """
    weight = _gamma_weight(spec)
    t = check_time(t)
    N = spec.dim
    if t == 0.0:
        return np.zeros((N, N))

    panels = quad_panels(t, quad_steps)
    nodes = 2 * panels + 1
    h = t / (2 * panels)
    s = np.linspace(0.0, t, nodes)
    P = cov_Y_series(spec.ou, s)
    U_h = semigroup(spec.ou.A, h)
    S_h = semigroup(spec.C, h)

    means = np.empty((nodes, N))
    means[0] = spec.ou.Y0
    for k in range(1, nodes):
        means[k] = U_h @ means[k - 1]

    # S(t - s_k) = S(h)^(nodes - 1 - k)
    S_back = np.empty((nodes, N, N))
    S_back[-1] = np.eye(N)
    for k in range(nodes - 2, -1, -1):
        S_back[k] = S_h @ S_back[k + 1]

    inner = np.einsum("ki,kj->kij", means, means) + P
    values = weight * np.einsum("kab,kbc,kdc->kad", S_back, inner, S_back)
    Q = integrate.simpson(values, dx=h, axis=0)
    return validate_covariance(Q, name="cov_X")


def cond_char_X(
    spec: XSpec,
    t: float,
    f: ArrayLike,
    mc_paths: int,
    seed: int,
    steps: Optional[int] = None,
    scheme: Optional[str] = None,
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> CharValue:
    """
    E[exp(i <X(t), f>)] through the conditional Gaussian law given Y:

        exp(i <S(t) X0, f>) E[exp(-1/2 int_0^t |Q_B^{1/2} Z(s)|^2 <Y(s), S(t-s)^T f>^2 ds)]

    The outer expectation is a Monte Carlo mean over simulated Y paths, the inner
    integral a trapezoid rule on the path grid.

    Args:
        spec: X parameters
        t: Time (non-negative)
        f: Test vector
        mc_paths: Number of Y paths
        seed: Scenario seed
        steps: Grid steps on [0, t]; defaults to Simulation.steps_per_unit * t

    Returns:
        CharValue with standard errors (zero when the result is exact)
    """
    t = check_time(t)
    fv = as_vector(f, spec.dim, name="f")
    phase = np.exp(1j * float((semigroup(spec.C, t) @ spec.X0) @ fv))
    if t == 0.0 or not np.any(fv):
        return CharValue(float(phase.real), float(phase.imag), 0.0, 0.0)

    grid = TimeGrid(t, steps) if steps is not None else TimeGrid.covering(t)
    mc_paths = check_count(mc_paths)
    stepper = y_stepper(spec.ou, grid.dt, check_scheme(scheme))
    S_h_T = semigroup(spec.C, grid.dt).T

    # g_k = S(t - s_k)^T f
    g = np.empty((grid.steps + 1, spec.dim))
    g[-1] = fv
    for k in range(grid.steps - 1, -1, -1):
        g[k] = S_h_T @ g[k + 1]

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi = block_normals(seed, Stream.W, start, stop, grid.steps, spec.dim)
        Y = np.tile(spec.ou.Y0, (stop - start, 1))
        integrand = np.empty((stop - start, grid.steps + 1))
        for k in range(grid.steps + 1):
            Z = spec.unit_process.directions(Y)
            q = np.einsum("pi,ij,pj->p", Z, spec.Q_B, Z)
            integrand[:, k] = q * (Y @ g[k]) ** 2
            if k < grid.steps:
                Y = stepper.step(Y, xi[k])
        return {"I": integrate.trapezoid(integrand, dx=grid.dt, axis=1)}

    data = BlockScheduler(threads, block_size).gather(kernel, mc_paths)
    return CharValue.from_values(phase * np.exp(-0.5 * data["I"]))


def empirical_char_X(
    spec: XSpec,
    t: float,
    f: ArrayLike,
    mc_paths: int,
    seed: int,
    steps: Optional[int] = None,
    scheme: Optional[str] = None,
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> CharValue:
    """Empirical characteristic function of <X(t), f> over simulated X paths."""
    t = check_time(t)
    fv = as_vector(f, spec.dim, name="f")
    if t == 0.0:
        return CharValue.from_samples(np.full(check_count(mc_paths), float(spec.X0 @ fv)))
    grid = TimeGrid(t, steps) if steps is not None else TimeGrid.covering(t)
    ensemble = simulate_X_paths(
        spec,
        grid,
        mc_paths,
        seed,
        scheme=scheme,
        record="terminal",
        threads=threads,
        block_size=block_size,
    )
    return CharValue.from_samples(ensemble.terminal("X") @ fv)
