"""Point-cloud surfaces, the kernel-measure disparity and Hausdorff metrics.

A surface is represented by an ``(N, 3)`` point array, optionally with a
triangulation. The disparity between two grids is the squared kernel norm
of the difference of their uniform empirical measures,

    dsd(x, y) = q(xx) - 2 q(xy) + q(yy),

with ``q(xy) = mean_{n,m} G_s(x_n, y_m)``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, InvalidParameterError
from .kernels import gaussian_from_sqdist, kernel_peak, pairwise_sqdist

__all__ = [
    "SurfaceGrid",
    "DisparityWorkspace",
    "as_points",
    "make_workspace",
    "dsd",
    "dsd_gradient",
    "dsd_hessian",
    "dsd_hessian_vector",
    "hausdorff",
    "robust_hausdorff",
    "mesh_size",
]


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Ordered 3D points with an optional triangulation (0-based indices)."""

    points: np.ndarray
    triangles: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInputError(f"points must have shape (N, 3), got {pts.shape}")
        if len(pts) == 0:
            raise InvalidInputError("a surface grid needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("surface coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.triangles is not None:
            tri = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
            if tri.size and (tri.min() < 0 or tri.max() >= len(pts)):
                raise InvalidInputError("triangle index out of range")
            degenerate = (
                (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
            )
            if np.any(degenerate):
                raise InvalidInputError(
                    f"degenerate triangle at row {int(np.flatnonzero(degenerate)[0])}"
                )
            tri.setflags(write=False)
            object.__setattr__(self, "triangles", tri)

    def __len__(self):
        return len(self.points)

    @property
    def has_mesh(self):
        return self.triangles is not None and len(self.triangles) > 0

    def with_points(self, points):
        """Same triangulation, new vertex positions."""
        return SurfaceGrid(points, self.triangles)


def as_points(grid):
    """Coordinates of a SurfaceGrid, or a validated ``(N, 3)`` float array."""
    if isinstance(grid, SurfaceGrid):
        return grid.points
    pts = np.asarray(grid, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise InvalidInputError(f"expected a non-empty (N, 3) array, got {pts.shape}")
    return pts


@dataclass(frozen=True, eq=False)
class DisparityWorkspace:
    """Fixed target grid with its precomputed self-interaction term q(yy)."""

    target: SurfaceGrid
    target_self_term: float
    kernel_scale: float

    @property
    def target_points(self):
        return self.target.points


def _self_term(points, s):
    return float(gaussian_from_sqdist(pairwise_sqdist(points, points), s).mean())


def make_workspace(target, kernel_scale):
    if not np.isfinite(kernel_scale) or kernel_scale <= 0:
        raise InvalidParameterError(f"kernel scale must be > 0, got {kernel_scale!r}")
    if not isinstance(target, SurfaceGrid):
        target = SurfaceGrid(target)
    return DisparityWorkspace(target, _self_term(target.points, kernel_scale), float(kernel_scale))


def dsd(moving, workspace):
    """Discretized surface disparity between ``moving`` and the workspace target."""
    x = as_points(moving)
    y = workspace.target_points
    s = workspace.kernel_scale
    qxx = gaussian_from_sqdist(pairwise_sqdist(x, x), s).mean()
    qxy = gaussian_from_sqdist(pairwise_sqdist(x, y), s).mean()
    # a squared norm; clip the cancellation noise around an exact match
    return max(float(qxx - 2.0 * qxy + workspace.target_self_term), 0.0)


def _pair_terms(x, y, s):
    dxx = x[:, None, :] - x[None, :, :]
    dxy = x[:, None, :] - y[None, :, :]
    qxx = gaussian_from_sqdist(np.einsum("ijk,ijk->ij", dxx, dxx), s)
    qxy = gaussian_from_sqdist(np.einsum("ijk,ijk->ij", dxy, dxy), s)
    return dxx, qxx, dxy, qxy


def dsd_gradient(moving, workspace):
    """Analytic gradient of :func:`dsd` with respect to each moving point, ``(N, 3)``."""
    x = as_points(moving)
    y = workspace.target_points
    s = workspace.kernel_scale
    n, m = len(x), len(y)
    dxx, qxx, dxy, qxy = _pair_terms(x, y, s)
    gxx = np.einsum("ij,ijk->ik", qxx, dxx)
    gxy = np.einsum("ij,ijk->ik", qxy, dxy)
    return (-2.0 / (n * n * s * s)) * gxx + (2.0 / (n * m * s * s)) * gxy


def _pair_blocks(d, q, s):
    # Hessian of G_s(a - b) w.r.t. the difference: G (d d^T / s^4 - I / s^2)
    outer = d[..., :, None] * d[..., None, :] / s**4
    outer -= np.eye(3) / s**2
    return q[..., None, None] * outer


def dsd_hessian(moving, workspace):
    """Dense Hessian of :func:`dsd`, shape ``(3N, 3N)``, flattened point-major."""
    x = as_points(moving)
    y = workspace.target_points
    s = workspace.kernel_scale
    n, m = len(x), len(y)
    dxx, qxx, dxy, qxy = _pair_terms(x, y, s)
    bxx = _pair_blocks(dxx, qxx, s)
    bxy = _pair_blocks(dxy, qxy, s)
    idx = np.arange(n)
    # the i == n term has an identically-zero difference and contributes nothing
    bxx[idx, idx] = 0.0
    h = (-2.0 / (n * n)) * bxx
    diag = (2.0 / (n * n)) * bxx.sum(axis=1) - (2.0 / (n * m)) * bxy.sum(axis=1)
    h[idx, idx] = diag
    h = h.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)
    return 0.5 * (h + h.T)


def dsd_hessian_vector(moving, workspace, v):
    """Hessian-vector product of :func:`dsd` without forming the Hessian.

    ``v`` has the shape of the moving grid, ``(N, 3)``.
    """
    x = as_points(moving)
    y = workspace.target_points
    s = workspace.kernel_scale
    n, m = len(x), len(y)
    dxx, qxx, dxy, qxy = _pair_terms(x, y, s)
    dv = v[:, None, :] - v[None, :, :]
    # B(d) w = G (d (d.w) / s^4 - w / s^2)
    proj = np.einsum("ijk,ijk->ij", dxx, dv)
    hxx = np.einsum("ij,ijk->ik", qxx * proj, dxx) / s**4 - np.einsum("ij,ijk->ik", qxx, dv) / s**2
    projy = np.einsum("ijk,ik->ij", dxy, v)
    hxy = np.einsum("ij,ijk->ik", qxy * projy, dxy) / s**4 - qxy.sum(axis=1)[:, None] * v / s**2
    return (2.0 / (n * n)) * hxx - (2.0 / (n * m)) * hxy


def _one_sided(a, b, chunk=2048):
    """Distance from every point of ``a`` to its nearest neighbour in ``b``."""
    out = np.empty(len(a))
    for start in range(0, len(a), chunk):
        block = a[start:start + chunk]
        out[start:start + chunk] = np.sqrt(pairwise_sqdist(block, b).min(axis=1))
    return out


def hausdorff(a, b):
    """Symmetric Hausdorff distance between two finite point sets."""
    pa, pb = as_points(a), as_points(b)
    return float(max(_one_sided(pa, pb).max(), _one_sided(pb, pa).max()))


def robust_hausdorff(a, b, quantile=0.95):
    """Hausdorff distance with the max replaced by an empirical quantile.

    The quantile is the smallest nearest-neighbour distance whose empirical
    CDF reaches ``quantile`` (inverted CDF), so a single far outlier in a
    set of 20 is trimmed at 0.95 and ``quantile=1`` gives the plain max.
    """
    if not (0.0 < quantile <= 1.0):
        raise InvalidParameterError(f"quantile must lie in (0, 1], got {quantile!r}")
    pa, pb = as_points(a), as_points(b)
    dab = np.quantile(_one_sided(pa, pb), quantile, method="inverted_cdf")
    dba = np.quantile(_one_sided(pb, pa), quantile, method="inverted_cdf")
    return float(max(dab, dba))


def mesh_size(grid):
    """Median nearest-neighbour distance of the grid points."""
    pts = as_points(grid)
    if len(pts) < 2:
        raise InvalidInputError("mesh size needs at least two points")
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(np.median(dist[:, 1]))


def disparity_peak(workspace):
    """Upper bound of any single kernel term, handy for scaling tolerances."""
    return kernel_peak(workspace.kernel_scale)
