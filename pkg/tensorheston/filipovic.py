"""
Forward curves in the Filipovic space H_w with weight w(x) = exp(alpha x).

|f|_w^2 = f(0)^2 + int_0^inf w(x) f'(x)^2 dx. Curves are stored by f(0) and the weak
derivative sampled at the cell midpoints of a maturity grid on [0, x_max]; the weighted
integral uses the midpoint rule. The derivative is zero beyond x_max (flat tail).

Evaluation at x is represented by the kernel h_x(y) = 1 + (1 - exp(-alpha (x ^ y))) / alpha,
so inner_w(f, h_x) = f(x). A FilipovicFrame orthonormalizes kernels at a set of maturities
and maps curves, evaluations and the shift semigroup into plain coordinates, where the
OU and X engines run unchanged.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike
from scipy import integrate, linalg

from config.settings import get_config

from .errors import ConfigurationError, DimensionError, DomainError, MaturityRangeError
from .logger import get_logger
from .noise import Stream, block_normals
from .ou_engine import (
    TimeGrid,
    check_count,
    check_scheme,
    check_time,
    cov_Y_series,
    quad_panels,
    semigroup,
    y_stepper,
)
from .parallel import BlockScheduler
from .vol_ou import XSpec

logger = get_logger(__name__)


class FilipovicSpace:
    """Weight, maturity grid and quadrature of H_w."""

    def __init__(
        self,
        alpha: Optional[float] = None,
        x_max: Optional[float] = None,
        points: Optional[int] = None,
    ):
        """
        Initialize the space.

        Args:
            alpha: Weight parameter (defaults to Filipovic.alpha)
            x_max: Maturity horizon (defaults to Filipovic.x_max)
            points: Grid nodes on [0, x_max] (defaults to Filipovic.points)
        """
        config = get_config()
        if alpha is None:
            alpha = config.get_float("Filipovic", "alpha", fallback=0.1)
        if x_max is None:
            x_max = config.get_float("Filipovic", "x_max", fallback=5.0)
        if points is None:
            points = config.get_int("Filipovic", "points", fallback=201)
        self.alpha = float(alpha)
        self.x_max = float(x_max)
        points = int(points)

        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}", field="alpha")
        if not self.x_max > 0:
            raise ConfigurationError(f"x_max must be positive, got {self.x_max}", field="x_max")
        if points < 2:
            raise ConfigurationError(f"need at least 2 grid points, got {points}", field="points")

        self.x_grid = np.linspace(0.0, self.x_max, points)
        self.midpoints = 0.5 * (self.x_grid[:-1] + self.x_grid[1:])
        self.quad_weights = np.diff(self.x_grid)
        self.weights = np.exp(self.alpha * self.midpoints)

    @property
    def cells(self) -> int:
        return self.quad_weights.size

    def weight(self, x: ArrayLike) -> np.ndarray:
        return np.exp(self.alpha * np.asarray(x, dtype=float))

    def same_as(self, other: "FilipovicSpace") -> bool:
        return other is self or (
            self.alpha == other.alpha
            and self.x_grid.shape == other.x_grid.shape
            and bool(np.all(self.x_grid == other.x_grid))
        )

    def kernel_value(self, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        """Analytic h_x(y) = 1 + (1 - exp(-alpha min(x, y))) / alpha."""
        low = np.minimum(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return 1.0 - np.expm1(-self.alpha * low) / self.alpha

    def check_maturity(self, x: float, name: str = "x") -> float:
        if not (0.0 <= x <= self.x_max + 1e-12):
            raise MaturityRangeError(f"{name}={x} outside [0, {self.x_max}]")
        return min(float(x), self.x_max)


@dataclass(eq=False)
class CurveElement:
    """f(0) and the weak derivative of f sampled at the cell midpoints of the space."""

    space: FilipovicSpace
    value0: float
    deriv: np.ndarray

    def __post_init__(self):
        self.value0 = float(self.value0)
        self.deriv = np.asarray(self.deriv, dtype=float)
        if self.deriv.shape != (self.space.cells,):
            raise DimensionError(
                f"expected {self.space.cells} derivative samples, got {self.deriv.shape}",
                field="deriv",
            )

    def node_values(self) -> np.ndarray:
        """f on x_grid."""
        return self.value0 + np.concatenate(
            ([0.0], np.cumsum(self.deriv * self.space.quad_weights))
        )

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return evaluate(self, x)


def _check_same_space(f: CurveElement, g: CurveElement):
    if not f.space.same_as(g.space):
        raise DimensionError("curves live on different grids")


def evaluate(f: CurveElement, x: ArrayLike) -> np.ndarray:
    """f(x): piecewise linear between nodes, flat beyond x_max."""
    return np.interp(np.asarray(x, dtype=float), f.space.x_grid, f.node_values())


def inner_w(f: CurveElement, g: CurveElement) -> float:
    """
    <f, g>_w = f(0) g(0) + sum of quad_weights * w * f' * g' over the cells.

    Raises:
        DimensionError: Curves are on different grids
    """
    _check_same_space(f, g)
    space = f.space
    return float(
        f.value0 * g.value0 + np.sum(space.quad_weights * space.weights * f.deriv * g.deriv)
    )


def norm_w(f: CurveElement) -> float:
    return math.sqrt(max(inner_w(f, f), 0.0))


def constant_curve(space: FilipovicSpace, c: float) -> CurveElement:
    return CurveElement(space, c, np.zeros(space.cells))


def curve_from_function(space: FilipovicSpace, fn) -> CurveElement:
    """
    Discretize a callable curve; each derivative sample is the cell average of f'.
    """
    nodes = np.asarray(fn(space.x_grid), dtype=float)
    return CurveElement(space, float(nodes[0]), np.diff(nodes) / space.quad_weights)


def curve_from_samples(
    space: FilipovicSpace, maturities: ArrayLike, values: ArrayLike
) -> CurveElement:
    """
    Build a curve from (maturity, forward_value) samples.

    First-order differences are assigned to the midpoints of the sample maturities and
    interpolated to the cell midpoints of the grid; f(0) is the value interpolated at 0.

    Raises:
        ConfigurationError: Fewer than two samples or non-increasing maturities
    """
    x = np.asarray(maturities, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != v.shape or x.size < 2:
        raise ConfigurationError("need at least two (maturity, value) samples", field="curve")
    if np.any(np.diff(x) <= 0):
        raise ConfigurationError("maturities must be strictly increasing", field="maturity")
    slopes = np.diff(v) / np.diff(x)
    sample_mids = 0.5 * (x[:-1] + x[1:])
    deriv = np.interp(space.midpoints, sample_mids, slopes)
    deriv[space.midpoints > x[-1]] = 0.0
    return CurveElement(space, float(np.interp(0.0, x, v)), deriv)


def read_curve_csv(path: Union[str, Path], space: FilipovicSpace) -> CurveElement:
    """Read a curve from a CSV with columns maturity, forward_value."""
    frame = pd.read_csv(path)
    missing = {"maturity", "forward_value"} - set(frame.columns)
    if missing:
        raise ConfigurationError(f"missing columns {sorted(missing)}", field=str(path))
    frame = frame.sort_values("maturity")
    return curve_from_samples(
        space, frame["maturity"].to_numpy(), frame["forward_value"].to_numpy()
    )


def write_curve_csv(
    path: Union[str, Path], curve: CurveElement, maturities: Optional[ArrayLike] = None
) -> Path:
    """Write curve values (default: on the grid nodes) as maturity, forward_value."""
    x = curve.space.x_grid if maturities is None else np.asarray(maturities, dtype=float)
    output = Path(path)
    output.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"maturity": x, "forward_value": evaluate(curve, x)}).to_csv(
        output, index=False, lineterminator="\n"
    )
    return output


def make_h(space: FilipovicSpace, x: float) -> CurveElement:
    """
    Reproducing kernel h_x, with derivative exp(-alpha y) on [0, x).

    A cell straddling x carries the covered fraction of its width.

    Raises:
        MaturityRangeError: x outside [0, x_max]
    """
    x = space.check_maturity(x)
    left = space.x_grid[:-1]
    covered = np.clip((x - left) / space.quad_weights, 0.0, 1.0)
    return CurveElement(space, 1.0, np.exp(-space.alpha * space.midpoints) * covered)


def shift(space: FilipovicSpace, t: float, f: CurveElement) -> CurveElement:
    """
    S(t) f = f(. + t), resampled on the grid; the tail beyond x_max is flat.

    Raises:
        DomainError: t < 0
    """
    t = check_time(t)
    if not f.space.same_as(space):
        raise DimensionError("curve lives on a different grid")
    if t == 0.0:
        return CurveElement(space, f.value0, f.deriv.copy())
    shifted = evaluate(f, space.x_grid + t)
    return CurveElement(space, float(shifted[0]), np.diff(shifted) / space.quad_weights)


class FilipovicFrame:
    """
    Orthonormal coordinates on span{h_{x_1}, ..., h_{x_n}}.

    With G = [<h_{x_i}, h_{x_j}>_w] = L L^T, the frame e = L^{-1} h is orthonormal.
    Coordinates of g are L^{-1} [g(x_j)], the evaluation functional at z is
    eps(z) = L^{-1} [h_{x_j}(z)].
    """

    def __init__(
        self,
        space: FilipovicSpace,
        maturities: Optional[Sequence[float]] = None,
        size: int = 6,
    ):
        """
        Initialize the frame.

        Args:
            space: Filipovic space
            maturities: Distinct kernel maturities in [0, x_max]
            size: Number of equally spaced maturities when none are given
        """
        self.space = space
        if maturities is None:
            maturities = np.linspace(0.0, space.x_max, size)
        self.maturities = np.array([space.check_maturity(x, "maturity") for x in maturities])
        if np.unique(self.maturities).size != self.maturities.size:
            raise ConfigurationError("frame maturities must be distinct", field="maturities")

        self.kernels = [make_h(space, x) for x in self.maturities]
        self._kernel_nodes = np.array([h.node_values() for h in self.kernels])
        self.gram = np.array([[inner_w(a, b) for b in self.kernels] for a in self.kernels])
        self.cholesky = linalg.cholesky(self.gram, lower=True)

    @property
    def dim(self) -> int:
        return self.maturities.size

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.solve_triangular(self.cholesky, rhs, lower=True)

    def kernel_values(self, z: ArrayLike) -> np.ndarray:
        """[h_{x_j}(z)] with shape (dim,) + shape(z)."""
        zs = np.asarray(z, dtype=float)
        return np.array([np.interp(zs, self.space.x_grid, nodes) for nodes in self._kernel_nodes])

    def evaluation_vector(self, z: ArrayLike) -> np.ndarray:
        """eps(z); for several z the vectors are the columns of the result."""
        return self._solve(self.kernel_values(z))

    def coordinates(self, g: CurveElement) -> np.ndarray:
        """Orthonormal coordinates of the projection of g on the frame span."""
        return self._solve(evaluate(g, self.maturities))

    def to_curve(self, coords: ArrayLike) -> CurveElement:
        """Curve sum_k coords_k e_k."""
        c = np.asarray(coords, dtype=float)
        if c.shape != (self.dim,):
            raise DimensionError(f"expected {self.dim} coordinates, got {c.shape}", field="coords")
        w = linalg.solve_triangular(self.cholesky.T, c, lower=False)
        deriv = sum(wj * h.deriv for wj, h in zip(w, self.kernels))
        return CurveElement(self.space, float(np.sum(w)), deriv)

    def shift_matrix(self, t: float) -> np.ndarray:
        """Compression of S(t): entries <S(t) e_l, e_k>_w."""
        t = check_time(t)
        shifted_eval = self.evaluation_vector(self.maturities + t)
        return self._solve(shifted_eval.T)

    def shift_generator(self) -> np.ndarray:
        """Compression of d/dx, the right derivative of shift_matrix at t = 0."""
        cell = np.searchsorted(self.space.x_grid, self.maturities, side="right") - 1
        D = np.zeros((self.dim, self.dim))
        for j, c in enumerate(cell):
            if c < self.space.cells:
                D[j] = [h.deriv[c] for h in self.kernels]
        return self._solve(self._solve(D.T).T)


@dataclass(eq=False)
class FilipovicModel:
    """An X model whose coordinates are those of a FilipovicFrame."""

    frame: FilipovicFrame
    xspec: XSpec

    def __post_init__(self):
        if self.xspec.dim != self.frame.dim:
            raise DimensionError(
                f"model rank {self.xspec.dim} differs from frame size {self.frame.dim}",
                field="model",
            )

    @property
    def space(self) -> FilipovicSpace:
        return self.frame.space

    def forward_values(self, states: ArrayLike, maturities: ArrayLike) -> np.ndarray:
        """f(x) = <state, eps(x)> for states of shape (..., N)."""
        return np.asarray(states, dtype=float) @ self.frame.evaluation_vector(maturities)


@dataclass
class ForwardCovResult:
    """Forward covariance by Monte Carlo and, for constant gamma, in closed form."""

    mc_estimate: float
    stderr: float
    path_count: int
    closed_form: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mc_estimate": self.mc_estimate,
            "stderr": self.stderr,
            "path_count": self.path_count,
            "closed_form": self.closed_form,
        }


def _forward_cov_closed_form(
    model: FilipovicModel, t: float, x: float, y: float, quad_steps: Optional[int]
) -> float:
    spec = model.xspec
    gamma = spec.unit_process.gamma
    weight = float(gamma @ spec.Q_B @ gamma)
    panels = quad_panels(t, quad_steps)
    nodes = 2 * panels + 1
    h = t / (2 * panels)
    s = np.linspace(0.0, t, nodes)
    P = cov_Y_series(spec.ou, s)
    U_h = semigroup(spec.ou.A, h)

    means = np.empty((nodes, spec.dim))
    means[0] = spec.ou.Y0
    for k in range(1, nodes):
        means[k] = U_h @ means[k - 1]

    a = model.frame.evaluation_vector(x + t - s).T
    b = model.frame.evaluation_vector(y + t - s).T
    values = np.einsum("ki,ki->k", means, a) * np.einsum("ki,ki->k", means, b)
    values += np.einsum("ki,kij,kj->k", a, P, b)
    return float(weight * integrate.simpson(values, dx=h))


def forward_cov(
    model: FilipovicModel,
    t: float,
    x: float,
    y: float,
    mc_paths: int,
    seed: int,
    steps: Optional[int] = None,
    scheme: Optional[str] = None,
    quad_steps: Optional[int] = None,
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> ForwardCovResult:
    """
    Cov(f(t, x), f(t, y)) = E[int_0^t |Q_B^{1/2} Z(s)|^2 Y(s, x+t-s) Y(s, y+t-s) ds].

    The Monte Carlo estimate integrates each simulated Y path by the trapezoid rule; the
    closed form (constant unit process only) uses Simpson quadrature of the mean and
    covariance of Y.

    Raises:
        MaturityRangeError: x + t or y + t beyond x_max
    """
    t = check_time(t)
    for name, maturity in (("x", x), ("y", y)):
        if maturity < 0:
            raise DomainError(f"{name} must be non-negative, got {maturity}")
        model.space.check_maturity(maturity + t, f"{name}+t")
    mc_paths = check_count(mc_paths)
    spec = model.xspec
    constant = spec.unit_process.kind == "constant"
    if t == 0.0:
        return ForwardCovResult(0.0, 0.0, mc_paths, 0.0 if constant else None)

    grid = TimeGrid(t, steps) if steps is not None else TimeGrid.covering(t)
    stepper = y_stepper(spec.ou, grid.dt, check_scheme(scheme))
    a = model.frame.evaluation_vector(x + t - grid.times).T
    b = model.frame.evaluation_vector(y + t - grid.times).T

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi = block_normals(seed, Stream.W, start, stop, grid.steps, spec.dim)
        Y = np.tile(spec.ou.Y0, (stop - start, 1))
        integrand = np.empty((stop - start, grid.steps + 1))
        for k in range(grid.steps + 1):
            Z = spec.unit_process.directions(Y)
            q = np.einsum("pi,ij,pj->p", Z, spec.Q_B, Z)
            integrand[:, k] = q * (Y @ a[k]) * (Y @ b[k])
            if k < grid.steps:
                Y = stepper.step(Y, xi[k])
        return {"I": integrate.trapezoid(integrand, dx=grid.dt, axis=1)}

    samples = BlockScheduler(threads, block_size).gather(kernel, mc_paths)["I"]
    stderr = float(samples.std(ddof=1) / math.sqrt(mc_paths)) if mc_paths > 1 else 0.0
    closed = _forward_cov_closed_form(model, t, x, y, quad_steps) if constant else None
    logger.debug("Forward covariance", t=t, x=x, y=y, path_count=mc_paths)
    return ForwardCovResult(float(samples.mean()), stderr, mc_paths, closed)

