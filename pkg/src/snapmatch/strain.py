"""Isotropic strain intensity on a triangulated grid.

For a vertex with reference one-ring patch area ``A`` and the area ``B`` of
the same triangles after deformation, the isotropic stretch is ``sqrt(B/A)``
and the strain intensity is ``SI = |sqrt(B/A) - 1|``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .surface import SurfaceGrid

__all__ = ["StrainField", "triangle_area", "triangle_areas", "strain_intensity", "strain_quantiles"]

QUANTILE_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


def triangle_area(p1, p2, p3):
    """Area of one triangle, half the norm of the edge cross product."""
    p1 = np.asarray(p1, dtype=float)
    return 0.5 * float(np.linalg.norm(np.cross(np.asarray(p2) - p1, np.asarray(p3) - p1)))


def triangle_areas(points, triangles):
    """Vectorized :func:`triangle_area` over an ``(T, 3)`` index array."""
    p = np.asarray(points, dtype=float)[np.asarray(triangles)]
    return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


@dataclass(frozen=True, eq=False)
class StrainField:
    """Per-vertex strain intensity on the reference grid.

    ``values`` holds NaN where the reference patch area is zero and the
    stretch is undefined; ``defined`` is the matching boolean mask.
    """

    values: np.ndarray
    reference: SurfaceGrid
    deformed: SurfaceGrid
    reference_area: np.ndarray
    deformed_area: np.ndarray

    @property
    def defined(self):
        return ~np.isnan(self.values)

    @property
    def n_undefined(self):
        return int(np.count_nonzero(np.isnan(self.values)))

    def __len__(self):
        return len(self.values)


def _patch_areas(n, triangles, areas):
    total = np.zeros(n)
    for corner in range(3):
        np.add.at(total, triangles[:, corner], areas)
    return total


def strain_intensity(reference, deformed):
    """Strain intensity of every vertex of ``reference``.

    ``deformed`` may be a :class:`SurfaceGrid` or a bare ``(N, 3)`` array; it
    is read with the reference triangulation.

    Raises
    ------
    InvalidInputError
        If the reference has no triangles, the point counts differ, the
        triangulations disagree, or some vertex lies in no triangle.
    """
    if not isinstance(reference, SurfaceGrid) or not reference.has_mesh:
        raise InvalidInputError("strain requires a triangulated reference mesh")
    if isinstance(deformed, SurfaceGrid):
        if deformed.has_mesh and not np.array_equal(deformed.triangles, reference.triangles):
            raise InvalidInputError("deformed grid uses a different triangulation")
        moved = deformed.points
    else:
        moved = np.asarray(deformed, dtype=float)
    if moved.shape != reference.points.shape:
        raise InvalidInputError(
            f"deformed grid has shape {moved.shape}, reference {reference.points.shape}"
        )
    tris = reference.triangles
    n = len(reference)
    valence = np.bincount(tris.ravel(), minlength=n)
    lonely = np.flatnonzero(valence == 0)
    if lonely.size:
        raise InvalidInputError(
            f"{lonely.size} vertices belong to no triangle (first: {lonely[0]})"
        )
    a = _patch_areas(n, tris, triangle_areas(reference.points, tris))
    b = _patch_areas(n, tris, triangle_areas(moved, tris))
    values = np.full(n, np.nan)
    ok = a > 0
    values[ok] = np.abs(np.sqrt(b[ok] / a[ok]) - 1.0)
    if not isinstance(deformed, SurfaceGrid):
        deformed = reference.with_points(moved)
    elif not deformed.has_mesh:
        deformed = reference.with_points(deformed.points)
    return StrainField(values, reference, deformed, a, b)


def strain_quantiles(field, quantiles=QUANTILE_GRID):
    """Empirical quantiles of the defined strain values (linear interpolation)."""
    q = np.asarray(quantiles, dtype=float)
    if np.any((q < 0) | (q > 1)) or not np.all(np.isfinite(q)):
        raise InvalidParameterError("quantiles must lie in [0, 1]")
    values = field.values if isinstance(field, StrainField) else np.asarray(field, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise InvalidInputError("no vertex has a defined strain value")
    return np.quantile(values, q, method="linear")
