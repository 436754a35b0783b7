"""Synthetic snapshot problems with a known ground-truth deformation."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, Delaunay
from scipy.spatial.transform import Rotation

from .dynamics import TimeGrid, Trajectory
from .errors import InvalidParameterError
from .problem import build_problem
from .surface import SurfaceGrid

__all__ = ["SyntheticSpec", "sample_shape", "deform", "generate"]

SHAPES = ("sphere", "ellipsoid", "open-sheet")
DEFORMATIONS = ("translation", "uniform-scale", "smooth-bump")
_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
ELLIPSOID_AXES = np.array([1.0, 0.8, 0.6])


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic problem.

    ``magnitude`` is the final displacement length for ``translation`` and
    ``smooth-bump``, and the final scale factor ``c`` for ``uniform-scale``.
    Shapes have unit size (sphere radius 1, sheet radius 1).
    """

    base_shape: str = "sphere"
    n_points: int = 50
    m_points: int = 50
    n_snapshots: int = 1
    deformation: str = "smooth-bump"
    magnitude: float = 0.3
    noise: float = 0.0
    seed: int = 0
    duration: float = 1.0
    bump_width: float = 0.5

    def __post_init__(self):
        if self.base_shape not in SHAPES:
            raise InvalidParameterError(f"unknown shape {self.base_shape!r}; choose from {SHAPES}")
        if self.deformation not in DEFORMATIONS:
            raise InvalidParameterError(
                f"unknown deformation {self.deformation!r}; choose from {DEFORMATIONS}"
            )
        if min(self.n_points, self.m_points) < 4:
            raise InvalidParameterError("point counts must be >= 4")
        if self.n_snapshots < 1:
            raise InvalidParameterError("need at least one target snapshot")
        if not np.isfinite(self.magnitude):
            raise InvalidParameterError("magnitude must be finite")
        if self.deformation == "uniform-scale" and self.magnitude <= 0:
            raise InvalidParameterError("scale factor must be > 0")
        if not (self.noise >= 0):
            raise InvalidParameterError("noise must be >= 0")
        if not (self.duration > 0 and self.bump_width > 0):
            raise InvalidParameterError("duration and bump_width must be > 0")


def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = _GOLDEN_ANGLE * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _sunflower_disk(n, twist=0.0):
    i = np.arange(n) + 0.5
    r = np.sqrt(i / n)
    phi = _GOLDEN_ANGLE * i + twist
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def sample_shape(shape, n, rng):
    """Quasi-uniform sample of ``n`` points with a triangulation.

    Closed shapes are triangulated by their convex hull, the open sheet by a
    planar Delaunay triangulation of its parameter disk.
    """
    if shape in ("sphere", "ellipsoid"):
        rot = Rotation.random(random_state=rng)
        pts = rot.apply(_fibonacci_sphere(n))
        tris = ConvexHull(pts).simplices
        if shape == "ellipsoid":
            pts = pts * ELLIPSOID_AXES
        return SurfaceGrid(pts, tris)
    uv = _sunflower_disk(n, twist=rng.uniform(0.0, 2.0 * np.pi))
    height = 0.3 * (1.0 - np.sum(uv**2, axis=1))
    pts = np.column_stack([uv, height])
    return SurfaceGrid(pts, Delaunay(uv).simplices)


def _bump_geometry(spec, initial, rng):
    pts = initial.points
    center = pts[rng.integers(len(pts))]
    if spec.base_shape == "open-sheet":
        direction = np.array([0.0, 0.0, 1.0])
        center = pts[np.argmin(np.sum(pts[:, :2] ** 2, axis=1))]
    else:
        direction = center - pts.mean(axis=0)
        direction /= np.linalg.norm(direction)
    return center, direction


def deform(spec, points, fraction, geometry):
    """Displaced copy of ``points`` at ``fraction`` in [0, 1] of the motion."""
    pts = np.asarray(points, dtype=float)
    if spec.deformation == "translation":
        _, direction = geometry
        return pts + fraction * spec.magnitude * direction
    if spec.deformation == "uniform-scale":
        centroid, _ = geometry
        factor = 1.0 + fraction * (spec.magnitude - 1.0)
        return centroid + factor * (pts - centroid)
    center, direction = geometry
    profile = np.exp(-np.sum((pts - center) ** 2, axis=1) / (2.0 * spec.bump_width**2))
    return pts + fraction * spec.magnitude * profile[:, None] * direction


def generate(spec, **problem_kwargs):
    """Build ``(problem, ground_truth)`` from a :class:`SyntheticSpec`.

    When ``m_points == n_points`` the targets are the deformed initial samples
    (plus noise); otherwise targets are an independent ``m_points`` sample of
    the same shape. Extra keyword arguments go to :func:`build_problem`.
    """
    rng = np.random.default_rng(spec.seed)
    initial = sample_shape(spec.base_shape, spec.n_points, rng)
    if spec.deformation == "translation":
        direction = rng.normal(size=3)
        geometry = (None, direction / np.linalg.norm(direction))
    elif spec.deformation == "uniform-scale":
        geometry = (initial.points.mean(axis=0), None)
    else:
        geometry = _bump_geometry(spec, initial, rng)
    if spec.m_points == spec.n_points:
        base = initial
    else:
        base = sample_shape(spec.base_shape, spec.m_points, rng)
    time = TimeGrid.uniform(spec.n_snapshots, spec.duration / spec.n_snapshots)
    fractions = (time.times - time.times[0]) / (time.times[-1] - time.times[0])
    truth = np.stack([deform(spec, initial.points, f, geometry) for f in fractions])
    targets = []
    for f in fractions[1:]:
        y = deform(spec, base.points, f, geometry)
        if spec.noise > 0:
            y = y + rng.normal(scale=spec.noise, size=y.shape)
        targets.append(SurfaceGrid(y, base.triangles))
    problem = build_problem(initial, targets, time, **problem_kwargs)
    return problem, Trajectory(truth)
