"""
Projection of the operator variance to the real line.

L_f(T) = <T f, f>. For V = Y (x) Y the projected variance v(t; f) = <Y(t), f>^2 follows

    dv = (v + b + L_{A^T f}(V) - L_{(A^T - Id) f}(V)) dt + 2 |Q_W^{1/2} eta^T f| sqrt(v) dw

with b = |Q_W^{1/2} eta^T f|^2. When f is an eigenvector of A^T with eigenvalue lambda this
is a CIR process with kappa = 2 lambda.
"""

import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np
from numpy.typing import ArrayLike

from config.settings import get_config

from .errors import DomainError, PreconditionError
from .logger import get_logger
from .noise import Stream, block_normals
from .operator_core import as_operator, as_vector, psd_sqrt
from .ou_engine import (
    OUSpec,
    PathEnsemble,
    StateRecorder,
    TimeGrid,
    check_count,
    check_record,
    check_time,
    y_stepper,
)
from .parallel import BlockScheduler
from .tensor_variance import tensor_sde_step

logger = get_logger(__name__)


@dataclass(frozen=True)
class CIRParams:
    """dv = (b + kappa v) dt + xi sqrt(v) dw, v(0) = V0, with xi^2 = 4 b."""

    b: float
    kappa: float
    xi: float
    V0: float

    def to_dict(self) -> dict:
        return asdict(self)


def project(T: ArrayLike, f: ArrayLike) -> float:
    """L_f(T) = <T f, f>."""
    mat = as_operator(T, name="T")
    fv = as_vector(f, mat.shape[0], name="f")
    return float(fv @ mat @ fv)


def _project_batch(V: np.ndarray, f: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,i,j->...", V, f, f)


def volatility_loading(spec: OUSpec, f: ArrayLike) -> np.ndarray:
    """Q_W^{1/2} eta^T f, whose norm drives the projected diffusion."""
    fv = as_vector(f, spec.dim, name="f")
    return psd_sqrt(spec.Q_W) @ (spec.eta.T @ fv)


def projected_drift(spec: OUSpec, V: ArrayLike, f: ArrayLike, v: ArrayLike) -> np.ndarray:
    """
    Drift v + b + L_{A^T f}(V) - L_{(A^T - Id) f}(V) of the projected variance.

    Accepts a single V of shape (N, N) with scalar v, or a block with a leading path axis.
    """
    fv = as_vector(f, spec.dim, name="f")
    b = float(np.sum(volatility_loading(spec, fv) ** 2))
    Af = spec.A.T @ fv
    V_arr = np.asarray(V, dtype=float)
    return (
        np.asarray(v, dtype=float)
        + b
        + _project_batch(V_arr, Af)
        - _project_batch(V_arr, Af - fv)
    )


def simulate_V_proj(
    spec: OUSpec,
    f: ArrayLike,
    grid: TimeGrid,
    count: int,
    seed: int,
    record: str = "all",
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> PathEnsemble:
    """
    Simulate the projected variance v(t; f) alongside the Euler (Y, V) system.

    v is advanced by full-truncation Euler with the drift evaluated on the co-simulated V.
    The scalar driver is the normalized projection of the W increment,
    zeta_k = sign(<Y_k, f>) <xi_k, u> / |u| with u = Q_W^{1/2} eta^T f and sign(0) = +1.
    The ensemble also carries v_identity = <Y_k, f>^2 for each step.

    Returns:
        PathEnsemble with Y, v and v_identity populated
    """
    count = check_count(count)
    check_record(record)
    fv = as_vector(f, spec.dim, name="f")
    stepper = y_stepper(spec, grid.dt, "euler")
    loading = volatility_loading(spec, fv)
    scale = float(np.linalg.norm(loading))
    direction = loading / scale if scale > 0 else np.zeros_like(loading)
    sqrt_dt = math.sqrt(grid.dt)
    N = spec.dim

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi = block_normals(seed, Stream.W, start, stop, grid.steps, N)
        m = stop - start
        Y = np.tile(spec.Y0, (m, 1))
        V = Y[:, :, None] * Y[:, None, :]
        v = (Y @ fv) ** 2
        track_y = StateRecorder(record, m, grid.steps, (N,))
        track_v = StateRecorder(record, m, grid.steps)
        track_id = StateRecorder(record, m, grid.steps)
        track_y.put(0, Y)
        track_v.put(0, v)
        track_id.put(0, v)
        for k in range(grid.steps):
            sign = np.where(Y @ fv >= 0, 1.0, -1.0)
            zeta = sign * (xi[k] @ direction)
            drift = projected_drift(spec, V, fv, v)
            v = v + drift * grid.dt + 2.0 * scale * np.sqrt(np.maximum(v, 0.0)) * zeta * sqrt_dt
            Y, V = tensor_sde_step(spec, Y, V, stepper.increment(xi[k]), grid.dt)
            track_y.put(k + 1, Y)
            track_v.put(k + 1, v)
            track_id.put(k + 1, (Y @ fv) ** 2)
        return {"Y": track_y.data, "v": track_v.data, "v_identity": track_id.data}

    logger.debug("Simulating projected variance", path_count=count, steps=grid.steps)
    data = BlockScheduler(threads, block_size).gather(kernel, count)
    return PathEnsemble(
        grid=grid,
        seed=seed,
        path_count=count,
        scheme="euler",
        record=record,
        Y=data["Y"],
        v=data["v"],
        v_identity=data["v_identity"],
    )


def cir_params(
    spec: OUSpec, f: ArrayLike, lam: float, eigen_tol: Optional[float] = None
) -> CIRParams:
    """
    CIR coefficients of v(t; f) when A^T f = lambda f.

    Args:
        spec: OU parameters
        f: Eigenvector of A^T
        lam: Its eigenvalue
        eigen_tol: Relative residual allowed (defaults to Numerics.eigen_tol)

    Returns:
        CIRParams with b = |Q_W^{1/2} eta^T f|^2, kappa = 2 lambda, xi = 2 sqrt(b), V0 = <Y0, f>^2

    Raises:
        PreconditionError: f is not an eigenvector of A^T for lambda
    """
    if eigen_tol is None:
        eigen_tol = get_config().get_float("Numerics", "eigen_tol", fallback=1e-8)
    fv = as_vector(f, spec.dim, name="f")
    residual = float(np.linalg.norm(spec.A.T @ fv - lam * fv))
    if residual > eigen_tol * float(np.linalg.norm(fv)):
        raise PreconditionError(
            f"f is not an eigenvector of A^T for lambda={lam} (residual {residual:.3e})"
        )
    b = float(np.sum(volatility_loading(spec, fv) ** 2))
    return CIRParams(b=b, kappa=2.0 * lam, xi=2.0 * math.sqrt(b), V0=float(spec.Y0 @ fv) ** 2)


def cir_mean(params: CIRParams, t: float, kappa_eps: Optional[float] = None) -> float:
    """
    First moment m(t) solving m' = b + kappa m, m(0) = V0.

    Uses the linear limit V0 + b t when |kappa| < kappa_eps.
    """
    t = check_time(t)
    if kappa_eps is None:
        kappa_eps = get_config().get_float("Numerics", "kappa_eps", fallback=1e-12)
    if abs(params.kappa) < kappa_eps:
        return params.V0 + params.b * t
    growth = math.exp(params.kappa * t)
    return growth * params.V0 + params.b * math.expm1(params.kappa * t) / params.kappa


def cir_stationary_mean(params: CIRParams) -> float:
    """
    Long-run mean -b / kappa.

    Raises:
        DomainError: kappa >= 0 (no stationary law)
    """
    if params.kappa >= 0:
        raise DomainError(f"stationary mean needs kappa < 0, got {params.kappa}")
    return -params.b / params.kappa


def simulate_cir_paths(
    params: CIRParams,
    grid: TimeGrid,
    count: int,
    seed: int,
    threads: Optional[int] = None,
    block_size: Optional[int] = None,
) -> np.ndarray:
    """
    Classical Heston variance by full-truncation Euler on an independent scalar driver.

    Returns:
        Array of shape (count, steps + 1)
    """
    count = check_count(count)
    sqrt_dt = math.sqrt(grid.dt)

    def kernel(start: int, stop: int) -> Dict[str, np.ndarray]:
        xi = block_normals(seed, Stream.W, start, stop, grid.steps, 1)[:, :, 0]
        path = np.empty((stop - start, grid.steps + 1))
        path[:, 0] = params.V0
        for k in range(grid.steps):
            v = path[:, k]
            path[:, k + 1] = (
                v
                + (params.b + params.kappa * v) * grid.dt
                + params.xi * np.sqrt(np.maximum(v, 0.0)) * xi[k] * sqrt_dt
            )
        return {"v": path}

    return BlockScheduler(threads, block_size).gather(kernel, count)["v"]
