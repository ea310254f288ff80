"""
Truncated Hilbert-space linear algebra.

H is represented by coefficient vectors of fixed rank N in an orthonormal basis,
bounded operators by dense N x N float arrays. Adjoints are transposes.

Conventions:
    tensor(f, g) is the operator h -> <f, h> g, whose matrix is g f^T.
    hs_inner(S, T) = trace(S^T T), so the Hilbert-Schmidt norm is the Frobenius norm.
"""

from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from config.settings import get_config

from .errors import DimensionError, NotPSDError


def _tol_psd(tol: Optional[float]) -> float:
    if tol is not None:
        return tol
    return get_config().get_float("Numerics", "tol_psd", fallback=1e-10)


def as_vector(f: ArrayLike, dim: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """
    Coerce input to a 1-D float vector.

    Args:
        f: Coefficients
        dim: Expected truncation rank, if known
        name: Field name used in error messages

    Returns:
        1-D float64 array

    Raises:
        DimensionError: Wrong rank or empty input
    """
    vec = np.asarray(f, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {vec.shape}", field=name)
    if dim is not None and vec.size != dim:
        raise DimensionError(f"expected length {dim}, got {vec.size}", field=name)
    return vec


def as_operator(T: ArrayLike, dim: Optional[int] = None, name: str = "operator") -> np.ndarray:
    """
    Coerce input to a square float matrix.

    Args:
        T: Matrix entries (row-major nested lists or array)
        dim: Expected truncation rank, if known
        name: Field name used in error messages

    Returns:
        2-D float64 array of shape (N, N)

    Raises:
        DimensionError: Not square, or wrong rank
    """
    mat = np.asarray(T, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise DimensionError(f"expected a square matrix, got shape {mat.shape}", field=name)
    if dim is not None and mat.shape[0] != dim:
        raise DimensionError(f"expected {dim}x{dim}, got {mat.shape}", field=name)
    return mat


def basis_vector(dim: int, index: int) -> np.ndarray:
    """Return the orthonormal basis vector e_{index+1} of rank dim."""
    e = np.zeros(dim)
    e[index] = 1.0
    return e


def identity(dim: int) -> np.ndarray:
    return np.eye(dim)


def _same_length(f: np.ndarray, g: np.ndarray) -> None:
    if f.shape != g.shape:
        raise DimensionError(f"vector lengths differ: {f.shape} vs {g.shape}")


def inner(f: ArrayLike, g: ArrayLike) -> float:
    """
    Inner product <f, g> in the truncated basis.

    Raises:
        DimensionError: Lengths differ
    """
    fv, gv = as_vector(f, name="f"), as_vector(g, name="g")
    _same_length(fv, gv)
    return float(fv @ gv)


def norm(f: ArrayLike) -> float:
    """Hilbert norm |f|."""
    return float(np.linalg.norm(as_vector(f)))


def tensor(f: ArrayLike, g: ArrayLike) -> np.ndarray:
    """
    Tensor product f (x) g = <f, .> g.

    Args:
        f: Vector the operator projects on
        g: Vector the operator maps into

    Returns:
        Matrix M with M[i, j] = g[i] * f[j]
    """
    fv, gv = as_vector(f, name="f"), as_vector(g, name="g")
    _same_length(fv, gv)
    return np.outer(gv, fv)


def adjoint(T: ArrayLike) -> np.ndarray:
    return as_operator(T).T.copy()


def apply(T: ArrayLike, f: ArrayLike) -> np.ndarray:
    """Apply operator T to vector f."""
    mat, vec = as_operator(T), as_vector(f)
    if mat.shape[1] != vec.size:
        raise DimensionError(f"cannot apply {mat.shape} operator to length {vec.size} vector")
    return mat @ vec


def hs_inner(S: ArrayLike, T: ArrayLike) -> float:
    """
    Hilbert-Schmidt inner product sum_n <S e_n, T e_n> = trace(S^T T).

    Raises:
        DimensionError: Shapes differ
    """
    s_mat, t_mat = np.asarray(S, dtype=float), np.asarray(T, dtype=float)
    if s_mat.shape != t_mat.shape or s_mat.ndim != 2:
        raise DimensionError(f"operator shapes differ: {s_mat.shape} vs {t_mat.shape}")
    return float(np.sum(s_mat * t_mat))


def hs_norm(T: ArrayLike) -> float:
    """Hilbert-Schmidt norm of T."""
    return float(np.linalg.norm(np.asarray(T, dtype=float), "fro"))


def symmetrize(T: ArrayLike) -> np.ndarray:
    mat = as_operator(T)
    return 0.5 * (mat + mat.T)


def validate_covariance(
    Q: ArrayLike, tol: Optional[float] = None, name: str = "covariance"
) -> np.ndarray:
    """
    Check that Q is symmetric PSD and return its symmetrized form.

    Symmetry and the eigenvalue floor are both measured relative to the
    largest eigenvalue magnitude (absolute when Q is zero).

    Args:
        Q: Candidate covariance operator
        tol: Relative tolerance (defaults to Numerics.tol_psd)
        name: Field name used in diagnostics

    Returns:
        Symmetrized copy of Q

    Raises:
        NotPSDError: Q is asymmetric or has an eigenvalue below -tol * scale
    """
    tol = _tol_psd(tol)
    mat = as_operator(Q, name=name)
    sym = 0.5 * (mat + mat.T)
    eigvals = linalg.eigvalsh(sym)
    scale = float(np.max(np.abs(eigvals))) or 1.0

    asymmetry = float(np.max(np.abs(mat - mat.T)))
    if asymmetry > tol * scale:
        raise NotPSDError(
            f"{name} is not symmetric",
            diagnostics={"field": name, "asymmetry": asymmetry, "tol": tol * scale},
        )

    min_eig = float(eigvals[0])
    if min_eig < -tol * scale:
        raise NotPSDError(
            f"{name} has a negative eigenvalue",
            diagnostics={"field": name, "min_eigenvalue": min_eig, "tol": tol * scale},
        )
    return sym


def psd_sqrt(Q: ArrayLike, tol: Optional[float] = None) -> np.ndarray:
    """
    Symmetric PSD square root of a covariance operator.

    Eigenvalues in [-tol * lambda_max, 0) are clamped to zero before taking roots.

    Args:
        Q: Symmetric PSD operator
        tol: Relative tolerance (defaults to Numerics.tol_psd)

    Returns:
        Symmetric PSD R with R @ R == Q within tolerance

    Raises:
        NotPSDError: Q is asymmetric or has a significantly negative eigenvalue
    """
    sym = validate_covariance(Q, tol=tol)
    eigvals, eigvecs = linalg.eigh(sym)
    eigvals = np.clip(eigvals, 0.0, None)
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return 0.5 * (root + root.T)
