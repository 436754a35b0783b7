"""Radial Gaussian kernels and the dense Gram matrices built from them.

Every kernel in the package is the normalized 3D Gaussian

    G_s(a, b) = (2 pi)^(-3/2) s^(-3) exp(-|a - b|^2 / (2 s^2)),

used both for the velocity RKHS (scale ``sigma_v``) and for the measure
disparity (scale ``sigma_d``).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import FactorizationError, InvalidInputError, InvalidParameterError

__all__ = [
    "KernelConfig",
    "KernelMatrix",
    "CholeskyFactor",
    "kernel_peak",
    "eval_kernel",
    "pairwise_sqdist",
    "gaussian_from_sqdist",
    "kernel_matrix",
    "cross_kernel_matrix",
    "factorize_spd",
]

_NORM = (2.0 * np.pi) ** -1.5


def _check_sigma(sigma):
    if not np.isfinite(sigma) or sigma <= 0:
        raise InvalidParameterError(f"kernel scale must be > 0, got {sigma!r}")


@dataclass(frozen=True)
class KernelConfig:
    """Scales of the velocity and disparity kernels.

    ``ridge`` is relative: the absolute diagonal shift applied before
    factorizing a Gram matrix is ``ridge * kernel_peak(sigma_v)``.
    """

    sigma_v: float
    sigma_d: float
    ridge: float = 1e-8

    def __post_init__(self):
        _check_sigma(self.sigma_v)
        _check_sigma(self.sigma_d)
        if not np.isfinite(self.ridge) or self.ridge < 0:
            raise InvalidParameterError(f"ridge must be >= 0, got {self.ridge!r}")

    @property
    def absolute_ridge(self):
        return self.ridge * kernel_peak(self.sigma_v)


def kernel_peak(sigma):
    """Value of the kernel at coincident points, (2 pi)^(-3/2) sigma^(-3)."""
    _check_sigma(sigma)
    return _NORM / sigma**3


def eval_kernel(a, b, sigma):
    """Evaluate the Gaussian kernel between two points of R^3."""
    _check_sigma(sigma)
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return _NORM / sigma**3 * np.exp(-np.dot(d, d) / (2.0 * sigma * sigma))


def pairwise_sqdist(rows, cols):
    """Squared distances ``|rows[i] - cols[j]|^2`` from explicit differences.

    The expanded ``|a|^2 + |b|^2 - 2 a.b`` form is avoided on purpose: it
    loses the exact zero on the diagonal and breaks bitwise symmetry.
    """
    diff = rows[:, None, :] - cols[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def gaussian_from_sqdist(sqdist, sigma):
    return (_NORM / sigma**3) * np.exp(sqdist * (-0.5 / (sigma * sigma)))


def _as_points(points, name):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError(f"{name} must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInputError(f"{name} is empty")
    return arr


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Dense symmetric Gram matrix together with the scale it was built at."""

    values: np.ndarray
    source_scale: float

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    @property
    def shape(self):
        return self.values.shape


def kernel_matrix(points, sigma):
    """Gram matrix ``K[i, j] = G_sigma(points[i], points[j])``."""
    _check_sigma(sigma)
    pts = _as_points(points, "points")
    values = gaussian_from_sqdist(pairwise_sqdist(pts, pts), sigma)
    # (a-b)^2 == (b-a)^2 bitwise, but copy the upper triangle anyway so the
    # symmetry does not hinge on einsum's summation order.
    iu = np.triu_indices(len(pts), 1)
    values.T[iu] = values[iu]
    return KernelMatrix(values, float(sigma))


def cross_kernel_matrix(rows, cols, sigma):
    """Rectangular kernel matrix ``A[i, j] = G_sigma(rows[i], cols[j])``."""
    _check_sigma(sigma)
    r = _as_points(rows, "rows")
    c = _as_points(cols, "cols")
    return gaussian_from_sqdist(pairwise_sqdist(r, c), sigma)


class CholeskyFactor:
    """Lower Cholesky factor ``L`` with ``L @ L.T = matrix + ridge * I``."""

    def __init__(self, lower, ridge):
        self.lower = lower
        self.ridge = ridge

    @property
    def n(self):
        return self.lower.shape[0]

    def solve(self, b):
        """Solve ``(matrix + ridge I) v = b``; ``b`` may have trailing columns."""
        y = solve_triangular(self.lower, b, lower=True, check_finite=False)
        return solve_triangular(self.lower, y, lower=True, trans="T", check_finite=False)

    def solve_lower(self, b):
        """Apply ``L^{-1}`` only."""
        return solve_triangular(self.lower, b, lower=True, check_finite=False)

    def solve_lower_t(self, b):
        """Apply ``L^{-T}`` only."""
        return solve_triangular(self.lower, b, lower=True, trans="T", check_finite=False)


def factorize_spd(matrix, ridge=0.0):
    """Cholesky-factorize ``matrix + ridge * I``.

    Raises
    ------
    FactorizationError
        If a pivot is not strictly positive; ``err.pivot`` is its 0-based index.
    """
    if not np.isfinite(ridge) or ridge < 0:
        raise InvalidParameterError(f"ridge must be >= 0, got {ridge!r}")
    a = np.array(np.asarray(matrix, dtype=float), order="F", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if ridge:
        a[np.diag_indices_from(a)] += ridge
    c, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=1)
    if info > 0:
        raise FactorizationError(
            f"matrix + {ridge:g} I is not positive definite (pivot {info - 1})",
            pivot=info - 1,
        )
    if info < 0:
        raise InvalidInputError(f"dpotrf rejected argument {-info}")
    return CholeskyFactor(c, ridge)
