"""
Identity and property suite for every numerical module.

Each check compares a computed quantity against an independent oracle (a closed form,
an algebraic identity or a Monte Carlo estimate with its standard error) and records
the measured error next to its tolerance.
"""

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from config.settings import get_config

from .errors import HestonError, StabilityError
from .filipovic import (
    FilipovicFrame,
    FilipovicModel,
    FilipovicSpace,
    curve_from_function,
    forward_cov,
    inner_w,
    make_h,
    shift,
)
from .gaussian_analytics import CharValue, char_V, char_Y, exp_moment_bound
from .logger import HestonLogger, ValidationSummary, get_logger
from .operator_core import adjoint, apply, hs_inner, hs_norm, inner, psd_sqrt, tensor
from .ou_engine import (
    OUSpec,
    TimeGrid,
    cov_Y,
    mean_Y,
    sample_Y_exact,
    semigroup,
    stationary_cov_Y,
)
from .projection import (
    cir_mean,
    cir_params,
    cir_stationary_mean,
    simulate_cir_paths,
    simulate_V_proj,
)
from .tensor_variance import (
    UnitProcessSpec,
    finite_dim_diffusion,
    finite_dim_drift,
    frechet_check,
    gamma_factor,
    gamma_qb_norm_sq,
    operator_drift,
    phi_drift,
    psi_diffusion,
    simulate_tensor_paths,
    sqrt_V,
    variance_of,
)
from .vol_ou import XSpec, cond_char_X, cov_X, empirical_char_X, simulate_X_paths

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

STRUCTURE_DIM = 8
STRUCTURE_SAMPLES = 1000
SELF_CONSISTENCY_PATHS = 1000
SELF_CONSISTENCY_STEPS = (256, 512)
PROJECTION_PATHS = 2000
CIR_STEPS_PER_UNIT = 512
# Long-run check: horizon of LONG_RUN_RATES / |kappa| at a coarser density
LONG_RUN_RATES = 10.0
LONG_RUN_MAX_HORIZON = 50.0
LONG_RUN_STEPS_PER_UNIT = 128


@dataclass
class CheckResult:
    """Outcome of one check: measured error against its tolerance."""

    name: str
    passed: bool
    error: Optional[float]
    tolerance: Optional[float]
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "error": self.error,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    checks: List[CheckResult]
    dim: Optional[int]
    path_count: int
    exact_samples: int
    seed: int

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "dim": self.dim,
            "path_count": self.path_count,
            "exact_samples": self.exact_samples,
            "seed": self.seed,
            "checks": [check.to_dict() for check in self.checks],
        }


def measured(name: str, error: float, tolerance: float, **detail) -> CheckResult:
    """A check passing when error <= tolerance."""
    error = float(error)
    return CheckResult(name, bool(error <= tolerance), error, float(tolerance), detail)


def skipped(name: str, reason: str) -> CheckResult:
    return CheckResult(name, True, None, None, {"skipped": reason})


def default_model(dim: int, seed: int) -> XSpec:
    """
    Random model for the suite: A = P D P^{-1} with real negative spectrum, trace-class
    diagonal Q_W and Q_B, a random unit gamma and X0 = 0.
    """
    rng = np.random.default_rng([seed, 0])
    P = np.eye(dim) + 0.3 * rng.standard_normal((dim, dim)) / math.sqrt(dim)
    D = np.diag(-np.linspace(0.5, 2.0, dim))
    A = P @ D @ np.linalg.inv(P)
    eta = np.diag(np.linspace(1.0, 0.5, dim))
    Q_W = np.diag(1.0 / (1.0 + np.arange(dim)))
    Y0 = 0.5 * rng.standard_normal(dim)
    K = rng.standard_normal((dim, dim))
    C = -0.5 * np.eye(dim) + 0.1 * (K - K.T)
    Q_B = np.diag(1.0 / (1.0 + np.arange(dim)) ** 2)
    gamma = rng.standard_normal(dim)
    gamma /= np.linalg.norm(gamma)
    ou = OUSpec(A, eta, Q_W, Y0)
    return XSpec(C, Q_B, np.zeros(dim), UnitProcessSpec.constant(gamma), ou)


def _char_deviation(a: CharValue, b: CharValue, slack: float) -> float:
    """Largest component gap measured in units of 4 combined standard errors plus slack."""
    se_re = math.hypot(a.stderr_re or 0.0, b.stderr_re or 0.0)
    se_im = math.hypot(a.stderr_im or 0.0, b.stderr_im or 0.0)
    return max(
        abs(a.re - b.re) / (4.0 * se_re + slack),
        abs(a.im - b.im) / (4.0 * se_im + slack),
    )


def _covariance_deviation(samples: np.ndarray, exact: np.ndarray) -> Tuple[float, float]:
    """HS distance of the sample covariance to `exact` and the standard error of that distance."""
    n = samples.shape[0]
    centered = samples - samples.mean(axis=0)
    products = centered[:, :, None] * centered[:, None, :]
    sample_cov = products.sum(axis=0) / max(n - 1, 1)
    stderr = math.sqrt(float(np.sum(products.var(axis=0))) / n)
    return hs_norm(sample_cov - exact), stderr


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class ValidationContext:
    """Model, Monte Carlo sizes and shared samples for one validation run."""

    def __init__(
        self,
        ou: OUSpec,
        xspec: Optional[XSpec],
        path_count: int,
        exact_samples: int,
        seed: int,
        threads: Optional[int] = None,
        space: Optional[FilipovicSpace] = None,
        t: float = 1.0,
    ):
        self.ou = ou
        self.xspec = xspec
        self.path_count = path_count
        self.exact_samples = exact_samples
        self.seed = seed
        self.threads = threads
        self.space = space
        self.t = t

    @property
    def dim(self) -> int:
        return self.ou.dim

    @property
    def noisy(self) -> bool:
        return hs_norm(self.ou.noise_cov) > 0.0

    def rng(self, offset: int) -> np.random.Generator:
        """Generator for random test vectors; each check uses its own offset."""
        return np.random.default_rng([self.seed, offset])

    @cached_property
    def cov(self) -> np.ndarray:
        return cov_Y(self.ou, self.t)

    @cached_property
    def mean(self) -> np.ndarray:
        return mean_Y(self.ou, self.t)

    @cached_property
    def samples(self) -> np.ndarray:
        return sample_Y_exact(self.ou, self.t, self.exact_samples, self.seed)

    def scaled_vectors(self, count: int, offset: int, cov: Optional[np.ndarray] = None):
        """Random test vectors scaled so that <Q f, f> is at most 1."""
        cov = self.cov if cov is None else cov
        rng = self.rng(offset)
        vectors = []
        for _ in range(count):
            g = rng.standard_normal(self.dim)
            vectors.append(g / max(math.sqrt(max(float(g @ cov @ g), 0.0)), 1.0))
        return vectors


def check_operator_identities(ctx: ValidationContext) -> CheckResult:
    rng = ctx.rng(1)
    worst = 0.0
    for _ in range(20):
        f, g, h, k = rng.standard_normal((4, ctx.dim))
        T = tensor(f, g)
        scale = 1.0 + np.linalg.norm(f) * np.linalg.norm(g) * (
            np.linalg.norm(h) + np.linalg.norm(k)
        )
        worst = max(
            worst,
            float(np.max(np.abs(apply(T, h) - inner(h, f) * g))) / scale,
            float(np.max(np.abs(adjoint(T) - tensor(g, f)))) / scale,
            abs(hs_inner(T, tensor(h, k)) - inner(f, h) * inner(g, k)) / scale**2,
            abs(hs_norm(T) - np.linalg.norm(f) * np.linalg.norm(g)) / scale,
        )
    return measured("operator_identities", worst, 1e-12)


def check_semigroup(ctx: ValidationContext) -> CheckResult:
    A = ctx.ou.A
    product = semigroup(A, 0.3) @ semigroup(A, 0.7)
    whole = semigroup(A, 1.0)
    error = hs_norm(product - whole) / max(hs_norm(whole), 1.0)
    error = max(error, hs_norm(semigroup(A, 0.0) - np.eye(ctx.dim)))
    return measured("semigroup_property", error, 1e-10)


def check_cov_quadrature(ctx: ValidationContext) -> CheckResult:
    """cov_Y against Q_inf - U(t) Q_inf U(t)^T, or against a refined quadrature if A is unstable."""
    try:
        Q_inf = stationary_cov_Y(ctx.ou)
        U = semigroup(ctx.ou.A, ctx.t)
        oracle = Q_inf - U @ Q_inf @ U.T
        source = "lyapunov"
    except StabilityError:
        coarse = cov_Y(ctx.ou, ctx.t, quad_steps=50)
        oracle = cov_Y(ctx.ou, ctx.t, quad_steps=400)
        return measured(
            "cov_Y_quadrature",
            hs_norm(coarse - oracle) / max(hs_norm(oracle), 1.0),
            1e-6,
            oracle="refinement",
        )
    error = hs_norm(ctx.cov - oracle) / max(hs_norm(oracle), 1.0)
    return measured("cov_Y_quadrature", error, 1e-8, oracle=source)


def check_lyapunov(ctx: ValidationContext) -> CheckResult:
    try:
        Q = stationary_cov_Y(ctx.ou)
    except StabilityError as e:
        return skipped("stationary_cov_lyapunov", str(e))
    A, G = ctx.ou.A, ctx.ou.noise_cov
    residual = hs_norm(A @ Q + Q @ A.T + G)
    scale = 2.0 * hs_norm(A) * hs_norm(Q) + hs_norm(G) + 1e-300
    return measured("stationary_cov_lyapunov", residual / scale, 1e-10)


def check_exact_moments(ctx: ValidationContext) -> List[CheckResult]:
    samples = ctx.samples
    n = samples.shape[0]
    mean_error = float(np.linalg.norm(samples.mean(axis=0) - ctx.mean))
    mean_tol = 4.0 * math.sqrt(max(float(np.trace(ctx.cov)), 0.0) / n) + 1e-10
    cov_error, cov_stderr = _covariance_deviation(samples, ctx.cov)
    return [
        measured("exact_sample_mean", mean_error, mean_tol, samples=n),
        measured("exact_sample_cov", cov_error, 4.0 * cov_stderr + 1e-10, samples=n),
    ]


def check_char_Y(ctx: ValidationContext) -> CheckResult:
    worst = 0.0
    for f in ctx.scaled_vectors(10, 2):
        exact = char_Y(ctx.ou, ctx.t, f)
        estimate = CharValue.from_samples(ctx.samples @ f)
        worst = max(worst, _char_deviation(estimate, exact, 1e-10))
    return measured("char_Y_empirical", worst, 1.0, frequencies=10)


def check_variance_structure(ctx: ValidationContext) -> CheckResult:
    rng = ctx.rng(3)
    worst = 0.0
    for _ in range(STRUCTURE_SAMPLES):
        y = rng.standard_normal(STRUCTURE_DIM)
        f = rng.standard_normal(STRUCTURE_DIM)
        V = variance_of(y)
        dense = V.materialize()
        size = float(y @ y)
        if not np.array_equal(dense, dense.T):
            return measured("variance_structure", math.inf, 1e-12, reason="asymmetric")
        quad = float(f @ dense @ f)
        if quad < -1e-12 * size * float(f @ f):
            return measured("variance_structure", -quad, 1e-12, reason="negative")
        root = sqrt_V(V)
        worst = max(
            worst,
            abs(hs_norm(dense) - size) / size,
            abs(V.norm - size) / size,
            hs_norm(root @ root - dense) / size,
        )
        for _ in range(20):
            Gamma = gamma_factor(_unit(rng.standard_normal(STRUCTURE_DIM)), y)
            worst = max(worst, hs_norm(Gamma @ adjoint(Gamma) - dense) / size)
    return measured("variance_structure", worst, 1e-12, samples=STRUCTURE_SAMPLES)


def check_frechet(ctx: ValidationContext) -> CheckResult:
    rng = ctx.rng(4)
    worst = 0.0
    for _ in range(20):
        y, h = rng.standard_normal((2, ctx.dim))
        err1, err2 = frechet_check(y, h, seed=ctx.seed)
        scale = 1.0 + float(y @ y) + float(h @ h)
        worst = max(worst, abs(err1 - float(h @ h)) / scale, err2 / scale)
    return measured("frechet_expansion", worst, 1e-12)


def check_drift_forms(ctx: ValidationContext) -> CheckResult:
    rng = ctx.rng(5)
    spec = ctx.ou
    root = spec.noise_factor
    worst = 0.0
    for _ in range(20):
        y, xi = rng.standard_normal((2, ctx.dim))
        V = tensor(y, y)
        scale = hs_norm(spec.A) * float(y @ y) + hs_norm(spec.noise_cov) + 1.0
        phi = phi_drift(spec, y)
        worst = max(
            worst,
            hs_norm(phi - operator_drift(spec, V)) / scale,
            hs_norm(phi - finite_dim_drift(root, spec.A, V)) / scale,
            hs_norm(psi_diffusion(y, root @ xi) - finite_dim_diffusion(root, y, xi)) / scale,
        )
    return measured("drift_equivalence", worst, 1e-12)


def check_char_V(ctx: ValidationContext) -> CheckResult:
    centred = OUSpec(ctx.ou.A, ctx.ou.eta, ctx.ou.Q_W, np.zeros(ctx.dim))
    samples = sample_Y_exact(centred, ctx.t, ctx.exact_samples, ctx.seed)
    vectors = ctx.scaled_vectors(20, 6)
    worst = 0.0
    for f, g in zip(vectors[::2], vectors[1::2]):
        exact = char_V(centred, ctx.t, f, g)
        estimate = CharValue.from_samples((samples @ f) * (samples @ g))
        worst = max(worst, _char_deviation(estimate, exact, 1e-10))
    return measured("char_V_empirical", worst, 1.0, pairs=10)


def check_fernique(ctx: ValidationContext) -> CheckResult:
    """MC mean of exp(theta ||V||) + its standard error stays below the bound."""
    k = float(np.trace(ctx.cov))
    norms = np.sum(ctx.samples**2, axis=1)
    n = norms.size
    thetas = [0.2, 0.4, 0.8] if k <= 0 else [c / (4.0 * k) for c in (0.2, 0.4, 0.8)]
    worst = -math.inf
    for theta in thetas:
        bound = exp_moment_bound(ctx.ou, ctx.t, theta).value
        values = np.exp(theta * norms)
        estimate = float(values.mean())
        stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        worst = max(worst, (estimate + stderr - bound) / bound)
    return measured("fernique_bound", worst, 1e-12, k=k)


def halving_ratio_check(name: str, errors: List[float], noisy: bool) -> CheckResult:
    """
    RMS gaps at dt and dt/2: their ratio is sqrt(2) with noise (strong order 1/2) and 2
    without.
    """
    expected = math.sqrt(2.0) if noisy else 2.0
    if errors[0] < 1e-14:
        return measured(name, 0.0, 0.3, errors=errors, degenerate=True)
    ratio = errors[0] / errors[1]
    return measured(
        name, abs(ratio - expected), 0.3, ratio=ratio, expected=expected, errors=errors
    )


def check_euler_self_consistency(ctx: ValidationContext) -> CheckResult:
    """RMS of V_euler - Y_euler (x) Y_euler under dt-halving."""
    count = min(ctx.path_count, SELF_CONSISTENCY_PATHS)
    errors = []
    for steps in SELF_CONSISTENCY_STEPS:
        ensemble = simulate_tensor_paths(
            ctx.ou, TimeGrid(ctx.t, steps), count, ctx.seed, record="terminal", threads=ctx.threads
        )
        Y, V = ensemble.terminal("Y"), ensemble.terminal("V")
        gap = V - Y[:, :, None] * Y[:, None, :]
        errors.append(math.sqrt(float(np.mean(np.sum(gap**2, axis=(1, 2))))))
    return halving_ratio_check("euler_v_self_consistency", errors, ctx.noisy)


def check_cov_X(ctx: ValidationContext) -> CheckResult:
    spec = ctx.xspec
    if spec is None:
        return skipped("cov_X_monte_carlo", "model has no X parameters")
    if spec.unit_process.kind != "constant":
        return skipped("cov_X_monte_carlo", "closed form needs a constant unit process")
    exact = cov_X(spec, ctx.t)
    ensemble = simulate_X_paths(
        spec,
        TimeGrid.covering(ctx.t),
        ctx.path_count,
        ctx.seed,
        record="terminal",
        threads=ctx.threads,
    )
    error, stderr = _covariance_deviation(ensemble.terminal("X"), exact)
    tolerance = 0.05 * hs_norm(exact) + 4.0 * stderr + 1e-10
    return measured("cov_X_monte_carlo", error, tolerance, path_count=ctx.path_count)


def check_gamma_bound(ctx: ValidationContext) -> CheckResult:
    Q_B = ctx.xspec.Q_B if ctx.xspec is not None else np.eye(ctx.dim)
    rng = ctx.rng(7)
    root = psd_sqrt(Q_B)
    trace = float(np.trace(Q_B))
    worst = 0.0
    for _ in range(20):
        y = rng.standard_normal(ctx.dim)
        z = _unit(rng.standard_normal(ctx.dim))
        value = gamma_qb_norm_sq(z, y, Q_B)
        size = float(y @ y)
        identity = size * float(np.sum((root @ z) ** 2))
        worst = max(
            worst,
            abs(value - identity) / (size * (trace + 1.0)),
            max(value - trace * size, 0.0) / (size * (trace + 1.0)),
        )
    return measured("gamma_integrability", worst, 1e-10)


def check_cond_char_X(ctx: ValidationContext) -> CheckResult:
    spec = ctx.xspec
    if spec is None:
        return skipped("cond_char_X_estimators", "model has no X parameters")
    scale = cov_X(spec, ctx.t) if spec.unit_process.kind == "constant" else np.eye(ctx.dim)
    worst = 0.0
    for f in ctx.scaled_vectors(10, 8, cov=scale):
        conditional = cond_char_X(spec, ctx.t, f, ctx.path_count, ctx.seed, threads=ctx.threads)
        empirical = empirical_char_X(
            spec, ctx.t, f, ctx.path_count, ctx.seed, threads=ctx.threads
        )
        worst = max(worst, _char_deviation(conditional, empirical, 0.02))
    return measured("cond_char_X_estimators", worst, 1.0, frequencies=10)


def _real_eigenpair(A: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
    values, vectors = np.linalg.eig(A.T)
    for j in np.argsort(-values.real):
        if abs(values[j].imag) < 1e-12:
            return float(values[j].real), _unit(vectors[:, j].real)
    return None


def check_projection(ctx: ValidationContext) -> List[CheckResult]:
    spec = ctx.ou
    rng = ctx.rng(9)
    f = _unit(rng.standard_normal(ctx.dim))
    count = min(ctx.path_count, PROJECTION_PATHS)
    ensembles = [
        simulate_V_proj(
            spec, f, TimeGrid(ctx.t, steps), count, ctx.seed, record="all", threads=ctx.threads
        )
        for steps in SELF_CONSISTENCY_STEPS
    ]
    # v against <Y, f>^2 at dt and dt/2
    errors = [
        math.sqrt(float(np.mean((e.v[:, -1] - e.v_identity[:, -1]) ** 2))) for e in ensembles
    ]
    ensemble = ensembles[0]
    identity_gap = float(np.max(np.abs(ensemble.v_identity - (ensemble.Y @ f) ** 2)))
    start_gap = float(np.max(np.abs(ensemble.v[:, 0] - float(spec.Y0 @ f) ** 2)))

    terminal = ensemble.v[:, -1]
    exact = float(ctx.mean @ f) ** 2 + float(f @ ctx.cov @ f)
    stderr = float(terminal.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return [
        measured(
            "projection_identity",
            max(identity_gap, start_gap) / (1.0 + float(np.max(np.abs(ensemble.v_identity)))),
            1e-12,
        ),
        measured(
            "projection_mean",
            abs(float(terminal.mean()) - exact),
            4.0 * stderr + 0.02 * exact + 1e-10,
            path_count=count,
        ),
        halving_ratio_check("projection_self_consistency", errors, ctx.noisy),
    ]


def _terminal_mean(values: np.ndarray) -> Tuple[float, float]:
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), stderr


def check_cir(ctx: ValidationContext) -> List[CheckResult]:
    pair = _real_eigenpair(ctx.ou.A)
    if pair is None:
        return [skipped("cir_mean", "A^T has no real eigenvalue")]
    lam, f = pair
    params = cir_params(ctx.ou, f, lam)
    moment = float(ctx.mean @ f) ** 2 + float(f @ ctx.cov @ f)
    analytic = cir_mean(params, ctx.t)
    results = [
        measured("cir_mean_identity", abs(analytic - moment) / max(abs(moment), 1e-300), 1e-8)
    ]

    grid = TimeGrid.covering(ctx.t, CIR_STEPS_PER_UNIT)
    slack = 0.01 * (abs(analytic) + params.b * ctx.t) + 1e-10
    paths = simulate_cir_paths(params, grid, ctx.path_count, ctx.seed, threads=ctx.threads)
    mean, stderr = _terminal_mean(paths[:, -1])
    results.append(
        measured(
            "cir_mean_monte_carlo",
            abs(mean - analytic),
            3.0 * stderr + slack,
            kappa=params.kappa,
            b=params.b,
        )
    )

    # the projected process itself along the eigenvector
    count = min(ctx.path_count, PROJECTION_PATHS)
    projected = simulate_V_proj(
        ctx.ou, f, grid, count, ctx.seed, record="terminal", threads=ctx.threads
    )
    mean, stderr = _terminal_mean(projected.terminal("v"))
    results.append(
        measured(
            "cir_projected_mean",
            abs(mean - analytic),
            4.0 * stderr + slack,
            path_count=count,
            eigenvalue=lam,
        )
    )

    if params.kappa >= 0:
        return results
    long_run = cir_stationary_mean(params)
    stationary = float(f @ stationary_cov_Y(ctx.ou) @ f)
    scale = max(abs(long_run), params.V0, 1e-300)
    error = max(
        abs(long_run - stationary),
        abs(cir_mean(params, 40.0 / abs(params.kappa)) - long_run),
    ) / scale
    results.append(measured("cir_stationary_mean", error, 1e-8))

    horizon = LONG_RUN_RATES / abs(params.kappa)
    if horizon > LONG_RUN_MAX_HORIZON:
        results.append(
            skipped("cir_stationary_monte_carlo", f"mean reversion too slow (kappa={params.kappa})")
        )
        return results
    long_grid = TimeGrid.covering(horizon, LONG_RUN_STEPS_PER_UNIT)
    ensemble = simulate_V_proj(
        ctx.ou, f, long_grid, count, ctx.seed, record="terminal", threads=ctx.threads
    )
    mean, stderr = _terminal_mean(ensemble.terminal("v"))
    results.append(
        measured(
            "cir_stationary_monte_carlo",
            abs(mean - long_run),
            4.0 * stderr + 0.02 * scale,
            horizon=horizon,
            long_run=long_run,
        )
    )
    return results


_TEST_CURVES: List[Tuple[str, Callable[[np.ndarray], np.ndarray]]] = [
    ("exp_decay", lambda x: np.exp(-x)),
    ("sine", np.sin),
    ("cosine_half", lambda x: np.cos(0.5 * x)),
    ("hump", lambda x: x * np.exp(-0.5 * x)),
    ("contango", lambda x: 0.02 + 0.01 * x - 0.3 * np.exp(-0.5 * x)),
]


def _reproducing_error(space: FilipovicSpace, points: np.ndarray) -> float:
    worst = 0.0
    for _, fn in _TEST_CURVES:
        curve = curve_from_function(space, fn)
        for x in points:
            worst = max(worst, abs(inner_w(curve, make_h(space, x)) - float(fn(x))))
    return worst


def check_filipovic(ctx: ValidationContext) -> List[CheckResult]:
    space = ctx.space or FilipovicSpace()
    h = space.x_max / space.cells
    # off-node in the grid and in its refinement
    sample_points = np.arange(0.3, space.x_max - 0.5, 0.6) + 0.25 * h
    coarse = _reproducing_error(space, sample_points)
    fine_space = FilipovicSpace(space.alpha, space.x_max, 2 * space.cells + 1)
    fine = _reproducing_error(fine_space, sample_points)

    t = 20 * h
    shift_error = 0.0
    for _, fn in _TEST_CURVES:
        curve = curve_from_function(space, fn)
        moved = shift(space, t, curve)
        for x in sample_points[sample_points + t <= space.x_max]:
            shift_error = max(
                shift_error,
                abs(inner_w(moved, make_h(space, x)) - float(fn(x + t))),
                abs(inner_w(moved, make_h(space, x)) - inner_w(curve, make_h(space, x + t))),
            )

    frame = FilipovicFrame(space)
    elements = [frame.to_curve(np.eye(frame.dim)[k]) for k in range(frame.dim)]
    gram = np.array([[inner_w(a, b) for b in elements] for a in elements])
    coords = ctx.rng(10).standard_normal(frame.dim)
    frame_error = max(
        float(np.max(np.abs(gram - np.eye(frame.dim)))),
        float(np.max(np.abs(frame.coordinates(frame.to_curve(coords)) - coords))),
    )

    return [
        measured("filipovic_reproducing", coarse, 1e-4, points=space.x_grid.size),
        measured("filipovic_refinement", fine - 0.5 * coarse, 1e-15, coarse=coarse, fine=fine),
        measured("filipovic_shift_adjoint", shift_error, 1e-4, t=t),
        measured("filipovic_frame_orthonormal", frame_error, 1e-10, size=frame.dim),
    ]


def check_forward_cov(ctx: ValidationContext) -> CheckResult:
    """Two-factor diagonal model on a six-kernel frame: MC against closed form."""
    space = ctx.space or FilipovicSpace()
    frame = FilipovicFrame(space, size=6)
    n = frame.dim
    ou = OUSpec(
        -np.diag(np.linspace(0.5, 2.0, n)),
        np.eye(n),
        np.diag([1.0, 0.5] + [0.0] * (n - 2)),
        np.concatenate(([0.5, -0.3], np.zeros(n - 2))),
    )
    gamma = np.zeros(n)
    gamma[0] = 1.0
    xspec = XSpec(
        frame.shift_generator(), 0.5 * np.eye(n), np.zeros(n), UnitProcessSpec.constant(gamma), ou
    )
    model = FilipovicModel(frame, xspec)
    x, y = 0.2 * space.x_max, 0.3 * space.x_max
    result = forward_cov(model, ctx.t, x, y, ctx.path_count, ctx.seed, threads=ctx.threads)
    tolerance = 4.0 * result.stderr + 0.02 * abs(result.closed_form) + 1e-10
    return measured(
        "forward_cov_monte_carlo",
        abs(result.mc_estimate - result.closed_form),
        tolerance,
        mc_estimate=result.mc_estimate,
        closed_form=result.closed_form,
    )


CHECKS: List[Callable[[ValidationContext], Any]] = [
    check_operator_identities,
    check_semigroup,
    check_cov_quadrature,
    check_lyapunov,
    check_exact_moments,
    check_char_Y,
    check_variance_structure,
    check_frechet,
    check_drift_forms,
    check_char_V,
    check_fernique,
    check_euler_self_consistency,
    check_cov_X,
    check_gamma_bound,
    check_cond_char_X,
    check_projection,
    check_cir,
    check_filipovic,
    check_forward_cov,
]


def _build_models(
    config: Optional["ScenarioConfig"], dim: int, seed: int
) -> Tuple[OUSpec, Optional[XSpec], Optional[FilipovicSpace]]:
    if config is None:
        xspec = default_model(dim, seed)
        return xspec.ou, xspec, None
    model = config.model
    space = model.frame.space if model.frame is not None else None
    if model.has_x:
        xspec = model.x_spec()
        return xspec.ou, xspec, space
    return model.ou_spec(), None, space


def validate_all(
    config: Optional["ScenarioConfig"] = None,
    dim: Optional[int] = None,
    path_count: Optional[int] = None,
    exact_samples: Optional[int] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    logger: Optional[HestonLogger] = None,
) -> ValidationReport:
    """
    Run the full identity and property suite.

    Without a scenario the suite runs on a random stable model of rank Validation.dim;
    with one it runs on the scenario's model, path count and seed.

    Args:
        config: Optional scenario whose model is validated
        dim: Rank of the default model (defaults to Validation.dim)
        path_count: Monte Carlo paths per stochastic check
        exact_samples: Exact Gaussian draws per sampling check
        seed: Seed of every random quantity in the suite
        threads: Worker threads
        logger: Logger for progress and the pass/fail summary

    Returns:
        ValidationReport; a model that cannot be built yields a single failed model_build check
    """
    settings = get_config()
    if config is not None:
        path_count = path_count or config.mc.path_count
        seed = config.mc.seed if seed is None else seed
    dim = dim or settings.get_int("Validation", "dim", fallback=4)
    path_count = path_count or settings.get_int("Validation", "path_count", fallback=10000)
    exact_samples = exact_samples or settings.get_int(
        "Validation", "exact_samples", fallback=100000
    )
    if seed is None:
        seed = settings.get_int("Validation", "seed", fallback=20240601)
    logger = logger or get_logger(__name__)
    summary = ValidationSummary(logger)
    logger.log_start("validate_all", dim=dim, path_count=path_count, seed=seed)
    started = time.time()

    def report(checks: List[CheckResult], rank: Optional[int]) -> ValidationReport:
        summary.print_summary()
        logger.log_complete(
            "validate_all", duration=time.time() - started, passed=summary.passed
        )
        return ValidationReport(checks, rank, path_count, exact_samples, seed)

    try:
        ou, xspec, space = _build_models(config, dim, seed)
    except HestonError as e:
        summary.record_failure("model_build", str(e))
        failure = CheckResult("model_build", False, None, None, {"reason": str(e)})
        return report([failure], None)

    ctx = ValidationContext(ou, xspec, path_count, exact_samples, seed, threads, space)
    checks: List[CheckResult] = [CheckResult("model_build", True, 0.0, 0.0)]
    summary.record_pass("model_build")

    for check in CHECKS:
        try:
            outcome = check(ctx)
        except HestonError as e:
            name = check.__name__[len("check_") :]
            outcome = CheckResult(name, False, None, None, {"reason": str(e)})
        for result in outcome if isinstance(outcome, list) else [outcome]:
            checks.append(result)
            if result.passed:
                summary.record_pass(result.name, error=result.error, tolerance=result.tolerance)
            else:
                summary.record_failure(
                    result.name,
                    result.detail.get("reason", "error above tolerance"),
                    error=result.error,
                    tolerance=result.tolerance,
                )

    return report(checks, ctx.dim)
