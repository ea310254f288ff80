"""
Gaussian OU driver Y.

dY = A Y dt + eta dW with W a Q_W-Wiener process. Provides the semigroup U(t) = exp(tA),
the mean and covariance of Y(t), the stationary covariance, exact Gaussian sampling and
path simulation by Euler-Maruyama or by the exact Gaussian transition.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, linalg

from config.settings import get_config

from .errors import ConfigurationError, DomainError, StabilityError
from .logger import get_logger
from .noise import Stream, block_normals, path_generator
from .operator_core import as_operator, as_vector, psd_sqrt, validate_covariance
from .parallel import BlockScheduler

logger = get_logger(__name__)

SCHEMES = ("euler", "exact")
RECORD_MODES = ("all", "terminal")


@dataclass(frozen=True, eq=False)
class OUSpec:
    """Parameters of dY = A Y dt + eta dW, Y(0) = Y0, Cov(W(1)) = Q_W."""

    A: np.ndarray
    eta: np.ndarray
    Q_W: np.ndarray
    Y0: np.ndarray

    def __post_init__(self):
        A = as_operator(self.A, name="A")
        dim = A.shape[0]
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "eta", as_operator(self.eta, dim, name="eta"))
        Q_W = as_operator(self.Q_W, dim, name="Q_W")
        validate_covariance(Q_W, name="Q_W")
        object.__setattr__(self, "Q_W", Q_W)
        object.__setattr__(self, "Y0", as_vector(self.Y0, dim, name="Y0"))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @cached_property
    def noise_factor(self) -> np.ndarray:
        """eta Q_W^{1/2}; the Wiener increment is noise_factor @ xi * sqrt(dt)."""
        return self.eta @ psd_sqrt(self.Q_W)

    @cached_property
    def noise_cov(self) -> np.ndarray:
        """eta Q_W eta^T."""
        G = self.eta @ self.Q_W @ self.eta.T
        return 0.5 * (G + G.T)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, t_end] with `steps` intervals."""

    t_end: float
    steps: int

    def __post_init__(self):
        if not (self.t_end > 0) or not math.isfinite(self.t_end):
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}", field="t_end")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError(
                f"steps must be a positive integer, got {self.steps}", field="steps"
            )
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.steps + 1)

    @classmethod
    def covering(cls, t_end: float, steps_per_unit: Optional[int] = None) -> "TimeGrid":
        """
        Grid on [0, t_end] at roughly steps_per_unit steps per unit of time.

        Args:
            t_end: Horizon (positive)
            steps_per_unit: Density (defaults to Simulation.steps_per_unit)
        """
        if steps_per_unit is None:
            steps_per_unit = get_config().get_int("Simulation", "steps_per_unit", fallback=100)
        return cls(t_end, max(1, math.ceil(t_end * steps_per_unit - 1e-9)))


@dataclass(eq=False)
class PathEnsemble:
    """
    Simulated paths with seed provenance.

    State arrays have the path index first and the recorded step second:
    Y is (path_count, records, N), V and X likewise with their state shapes,
    v is (path_count, records). With record="terminal" only the final step is kept.
    """

    grid: TimeGrid
    seed: int
    path_count: int
    scheme: str
    record: str
    Y: np.ndarray
    V: Optional[np.ndarray] = None
    X: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    v_identity: Optional[np.ndarray] = None
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def recorded_steps(self) -> np.ndarray:
        if self.record == "all":
            return np.arange(self.grid.steps + 1)
        return np.array([self.grid.steps])

    @property
    def recorded_times(self) -> np.ndarray:
        return self.recorded_steps * self.grid.dt

    def terminal(self, name: str = "Y") -> np.ndarray:
        """Final recorded state of every path for the named field."""
        data = getattr(self, name)
        if data is None:
            raise ConfigurationError(f"ensemble has no '{name}' field", field=name)
        return data[:, -1]


class StateRecorder:
    """Collects per-step states of a block of paths according to a record mode."""

    def __init__(self, record: str, count: int, steps: int, shape: Sequence[int] = ()):
        check_record(record)
        self.keep_all = record == "all"
        self.steps = steps
        rows = steps + 1 if self.keep_all else 1
        self.data = np.empty((count, rows) + tuple(shape))

    def put(self, k: int, state: np.ndarray):
        if self.keep_all:
            self.data[:, k] = state
        elif k == self.steps:
            self.data[:, 0] = state


@dataclass(frozen=True, eq=False)
class YStepper:
    """One-step map Y_{k+1} = transition Y_k + noise xi_k for a fixed dt."""

    transition: np.ndarray
    noise: np.ndarray

    def step(self, Y: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Advance a (paths, N) block of states with (paths, N) standard normals."""
        return Y @ self.transition.T + xi @ self.noise.T

    def increment(self, xi: np.ndarray) -> np.ndarray:
        return xi @ self.noise.T


def check_time(t: float, name: str = "t") -> float:
    if not math.isfinite(t) or t < 0:
        raise DomainError(f"{name} must be a non-negative finite time, got {t}")
    return float(t)


def check_scheme(scheme: Optional[str]) -> str:
    if scheme is None:
        scheme = get_config().get("Simulation", "scheme", fallback="euler")
    if scheme not in SCHEMES:
        raise ConfigurationError(
            f"unknown scheme '{scheme}', expected one of {SCHEMES}", field="scheme"
        )
    return scheme


def check_record(record: str) -> str:
    if record not in RECORD_MODES:
        raise ConfigurationError(
            f"unknown record mode '{record}', expected one of {RECORD_MODES}", field="record"
        )
    return record


def check_count(count: int) -> int:
    if int(count) != count or count < 1:
        raise ConfigurationError(
            f"path count must be a positive integer, got {count}", field="count"
        )
    return int(count)


def semigroup(A: ArrayLike, t: float) -> np.ndarray:
    """
    U(t) = exp(tA) by scaling and squaring.

    Raises:
        DomainError: t < 0
    """
    t = check_time(t)
    mat = as_operator(A, name="A")
    if t == 0.0:
        return np.eye(mat.shape[0])
    return linalg.expm(t * mat)


def mean_Y(spec: OUSpec, t: float) -> np.ndarray:
    """E[Y(t)] = U(t) Y0."""
    return semigroup(spec.A, t) @ spec.Y0


def quad_panels(t: float, quad_steps: Optional[int]) -> int:
    if quad_steps is None:
        per_unit = get_config().get_int("Numerics", "quad_steps_per_unit", fallback=200)
        return max(1, math.ceil(t * per_unit - 1e-9))
    if int(quad_steps) != quad_steps or quad_steps < 1:
        raise DomainError(f"quad_steps must be a positive integer, got {quad_steps}")
    return int(quad_steps)


def cov_Y(spec: OUSpec, t: float, quad_steps: Optional[int] = None) -> np.ndarray:
    """
    Covariance Q_{Y(t)} = int_0^t U(s) eta Q_W eta^T U(s)^T ds.

    Composite Simpson rule with `quad_steps` panels (2 * quad_steps + 1 nodes).

    Args:
        spec: OU parameters
        t: Time (non-negative)
        quad_steps: Simpson panels; defaults to Numerics.quad_steps_per_unit * t

    Returns:
        Symmetric PSD N x N matrix

    Raises:
        DomainError: t < 0 or quad_steps < 1
        NotPSDError: Result fails PSD validation after symmetrization
    """
    t = check_time(t)
    if t == 0.0:
        return np.zeros((spec.dim, spec.dim))

    panels = quad_panels(t, quad_steps)
    nodes = 2 * panels + 1
    h = t / (2 * panels)
    U_h = semigroup(spec.A, h)

    values = np.empty((nodes, spec.dim, spec.dim))
    U = np.eye(spec.dim)
    for k in range(nodes):
        values[k] = U @ spec.noise_cov @ U.T
        U = U_h @ U

    Q = integrate.simpson(values, dx=h, axis=0)
    return validate_covariance(Q, name="cov_Y")


def cov_Y_series(
    spec: OUSpec, times: ArrayLike, quad_steps: Optional[int] = None
) -> np.ndarray:
    """
    Q_{Y(s)} on a uniform grid s_k = k h by the exact recursion
    Q(s + h) = U(h) Q(s) U(h)^T + Q(h).

    Args:
        spec: OU parameters
        times: Uniform, increasing times starting at 0
        quad_steps: Simpson panels for the single step Q(h)

    Returns:
        Array of shape (len(times), N, N)
    """
    grid = np.asarray(times, dtype=float)
    out = np.zeros((grid.size, spec.dim, spec.dim))
    if grid.size <= 1:
        return out
    h = float(grid[1] - grid[0])
    if h <= 0 or grid[0] != 0.0:
        raise DomainError("times must start at 0 and increase")

    U_h = semigroup(spec.A, h)
    Q_h = cov_Y(spec, h, quad_steps=quad_steps)
    for k in range(1, grid.size):
        step = U_h @ out[k - 1] @ U_h.T + Q_h
        out[k] = 0.5 * (step + step.T)
    return out


def stationary_cov_Y(spec: OUSpec) -> np.ndarray:
    """
    Stationary covariance solving A Q + Q A^T + eta Q_W eta^T = 0.

    Raises:
        StabilityError: Some eigenvalue of A has non-negative real part
    """
    eigvals = linalg.eigvals(spec.A)
    max_real = float(np.max(eigvals.real))
    if max_real >= 0:
        raise StabilityError(
            "generator A is not stable",
            diagnostics={"max_real_eigenvalue": max_real},
        )
    Q = linalg.solve_continuous_lyapunov(spec.A, -spec.noise_cov)
    return validate_covariance(Q, name="stationary_cov_Y")


def sample_Y_exact(
    spec: OUSpec,
    t: float,
    count: int,
    seed: int,
    quad_steps: Optional[int] = None,
) -> np.ndarray:
    """
    Draw i.i.d. samples of Y(t) from its Gaussian law N(U(t) Y0, Q_{Y(t)}).

    Args:
        spec: OU parameters
        t: Time (non-negative)
        count: Number of samples
        seed: Scenario seed

    Returns:
        Array of shape (count, N)
    """
    count = check_count(count)
    mean = mean_Y(spec, t)
    root = psd_sqrt(cov_Y(spec, t, quad_steps=quad_steps))
    xi = path_generator(seed, Stream.EXACT, 0).standard_normal((count, spec.dim))
    return mean + xi @ root.T


def y_stepper(spec: OUSpec, dt: float, scheme: str = "euler") -> YStepper:
    """
    One-step map of the Y dynamics.

    euler: Y + A Y dt + eta Q_W^{1/2} xi sqrt(dt)
    exact: U(dt) Y + Q_{Y(dt)}^{1/2} xi
    """
    scheme = check_scheme(scheme)
    if scheme == "euler":
        return YStepper(np.eye(spec.dim) + dt * spec.A, spec.noise_factor * math.sqrt(dt))
    return YStepper(semigroup(spec.A, dt), psd_sqrt(cov_Y(spec, dt)))


def simulate_Y_paths(
    spec: OUSpec,
    grid: TimeGrid,
    count: int,
    seed: int,
    scheme: Optional[str] = None,
    record: str = "all",
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> PathEnsemble:
    """
    Simulate Y on a time grid.

    Path p uses the W-noise stream keyed by (seed, p); results are identical for
    any thread count or block size.

    Args:
        spec: OU parameters
        grid: Time grid
        count: Number of paths
        seed: Scenario seed
        scheme: 'euler' (default) or 'exact'
        record: 'all' steps or only the 'terminal' state
        threads: Worker threads
        block_size: Paths per work block

    Returns:
        PathEnsemble with Y populated
    """
    count = check_count(count)
    scheme = check_scheme(scheme)
    check_record(record)
    stepper = y_stepper(spec, grid.dt, scheme)

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi = block_normals(seed, Stream.W, start, stop, grid.steps, spec.dim)
        Y = np.tile(spec.Y0, (stop - start, 1))
        track = StateRecorder(record, stop - start, grid.steps, (spec.dim,))
        track.put(0, Y)
        for k in range(grid.steps):
            Y = stepper.step(Y, xi[k])
            track.put(k + 1, Y)
        return {"Y": track.data}

    logger.debug("Simulating Y paths", path_count=count, steps=grid.steps, scheme=scheme)
    data = BlockScheduler(threads, block_size).gather(kernel, count)
    return PathEnsemble(
        grid=grid, seed=seed, path_count=count, scheme=scheme, record=record, Y=data["Y"]
    )
