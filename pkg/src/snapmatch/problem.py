"""The snapshot-matching problem instance and its data-scaled defaults."""

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.linalg import eigh
from scipy.spatial import cKDTree

from .errors import InvalidInputError, InvalidParameterError
from .kernels import KernelConfig, factorize_spd, kernel_matrix
from .surface import SurfaceGrid, make_workspace, mesh_size, dsd
from .dynamics import TimeGrid, kinetic_energy

__all__ = [
    "SnapshotProblem",
    "default_kernels",
    "straight_line_controls",
    "default_lambda",
    "default_rho",
    "build_problem",
]


@dataclass(frozen=True, eq=False)
class SnapshotProblem:
    """Initial grid, L target snapshots, time grid and weights.

    ``frozen_u`` selects the small-deformation dynamics in which every flow
    matrix equals the Gram matrix on the initial grid.
    """

    initial: SurfaceGrid
    targets: tuple
    time: TimeGrid
    kernels: KernelConfig
    lam: float
    rho: float
    frozen_u: bool = False

    def __post_init__(self):
        if not isinstance(self.initial, SurfaceGrid):
            object.__setattr__(self, "initial", SurfaceGrid(self.initial))
        targets = tuple(t if isinstance(t, SurfaceGrid) else SurfaceGrid(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if not isinstance(self.time, TimeGrid):
            object.__setattr__(self, "time", TimeGrid(self.time))
        if len(targets) != self.time.n_steps:
            raise InvalidInputError(
                f"{len(targets)} targets for {self.time.n_steps} time steps"
            )
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidParameterError(f"lambda must be > 0, got {self.lam!r}")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise InvalidParameterError(f"rho must be > 0, got {self.rho!r}")

    @property
    def n_points(self):
        return len(self.initial)

    @property
    def n_steps(self):
        return self.time.n_steps

    @cached_property
    def gram(self):
        return kernel_matrix(self.initial.points, self.kernels.sigma_v)

    @cached_property
    def workspaces(self):
        return tuple(make_workspace(t, self.kernels.sigma_d) for t in self.targets)

    @cached_property
    def target_mesh_sizes(self):
        return tuple(mesh_size(t) for t in self.targets)

    def with_options(self, **changes):
        return replace(self, **changes)


def default_kernels(initial, targets, ridge=1e-8):
    """Kernel scales tied to the grid spacing.

    ``sigma_v`` is twice the initial mesh size so neighbouring velocities are
    correlated; ``sigma_d`` is the mesh size of the first target.
    """
    return KernelConfig(2.0 * mesh_size(initial), mesh_size(targets[0]), ridge)


def straight_line_controls(initial, final_target, time, kernels):
    """Constant-in-time controls carrying each initial point straight to its
    nearest neighbour in ``final_target``, in the frozen Gram model.

    Solves ``K alpha = displacement / T`` with the ridge-regularized Gram
    factorization.
    """
    x0 = initial.points if isinstance(initial, SurfaceGrid) else np.asarray(initial)
    y = final_target.points if isinstance(final_target, SurfaceGrid) else np.asarray(final_target)
    _, idx = cKDTree(y).query(x0)
    velocity = (y[idx] - x0) / (time.times[-1] - time.times[0])
    gram = kernel_matrix(x0, kernels.sigma_v)
    factor = factorize_spd(gram.values, kernels.absolute_ridge)
    alpha = factor.solve(velocity)
    return np.repeat(alpha[None], time.n_steps, axis=0), gram


def default_lambda(initial, targets, time, kernels, ratio=10.0):
    """Disparity weight making ``lam * dsd(x0, y^L)`` equal ``ratio`` times the
    kinetic energy of :func:`straight_line_controls`."""
    alphas, gram = straight_line_controls(initial, targets[-1], time, kernels)
    kin = kinetic_energy(alphas, gram, time)
    gap = dsd(initial, make_workspace(targets[-1], kernels.sigma_d))
    if gap <= 0 or kin <= 0:
        return 1.0
    return ratio * kin / gap


def default_rho(initial, time, kernels, factor=1.0):
    """Prox weight matched to the kinetic curvature, ``mean(tau) * lambda_max(K)``.

    Much larger values freeze the iterates near their anchors; much smaller
    ones make the splitting oscillate.
    """
    gram = kernel_matrix(initial.points, kernels.sigma_v).values
    n = len(gram)
    top = eigh(gram, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0]
    return factor * float(np.mean(time.steps)) * float(top)


def build_problem(initial, targets, time, kernels=None, lam=None, rho=None, frozen_u=False):
    """Assemble a :class:`SnapshotProblem`, filling unset knobs with defaults.

    Defaults: kernels from :func:`default_kernels`, ``lam`` from
    :func:`default_lambda`, ``rho`` from :func:`default_rho`.
    """
    initial = initial if isinstance(initial, SurfaceGrid) else SurfaceGrid(initial)
    targets = tuple(t if isinstance(t, SurfaceGrid) else SurfaceGrid(t) for t in targets)
    time = time if isinstance(time, TimeGrid) else TimeGrid(time)
    if kernels is None:
        kernels = default_kernels(initial, targets)
    if lam is None:
        lam = default_lambda(initial, targets, time, kernels)
    if rho is None:
        rho = default_rho(initial, time, kernels)
    return SnapshotProblem(initial, targets, time, kernels, float(lam), float(rho), frozen_u)
