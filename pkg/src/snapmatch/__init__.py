"""Diffeomorphic matching of 3D surface snapshot sequences by operator splitting."""

from .errors import (
    ConfigError,
    DivergenceError,
    FactorizationError,
    InvalidInputError,
    InvalidParameterError,
    NumericError,
    ParseError,
    SnapmatchError,
)
from .kernels import (
    KernelConfig,
    KernelMatrix,
    cross_kernel_matrix,
    eval_kernel,
    factorize_spd,
    kernel_matrix,
)
from .surface import (
    SurfaceGrid,
    dsd,
    dsd_gradient,
    dsd_hessian,
    hausdorff,
    make_workspace,
    mesh_size,
    robust_hausdorff,
)
from .dynamics import (
    ControlSequence,
    TimeGrid,
    Trajectory,
    cost_gradient,
    kinetic_energy,
    rollout,
    total_cost,
    velocity_at,
)
from .problem import SnapshotProblem, build_problem
from .osa import SolverOptions, SolveReport, dr_iterate, solve
from .baseline import BaselineOptions, solve_gd
from .strain import StrainField, strain_intensity, strain_quantiles, triangle_area
from .synth import SyntheticSpec, generate
from .io import read_surface, write_surface

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DivergenceError",
    "FactorizationError",
    "InvalidInputError",
    "InvalidParameterError",
    "NumericError",
    "ParseError",
    "SnapmatchError",
    "KernelConfig",
    "KernelMatrix",
    "cross_kernel_matrix",
    "eval_kernel",
    "factorize_spd",
    "kernel_matrix",
    "SurfaceGrid",
    "dsd",
    "dsd_gradient",
    "dsd_hessian",
    "hausdorff",
    "make_workspace",
    "mesh_size",
    "robust_hausdorff",
    "ControlSequence",
    "TimeGrid",
    "Trajectory",
    "cost_gradient",
    "kinetic_energy",
    "rollout",
    "total_cost",
    "velocity_at",
    "SnapshotProblem",
    "build_problem",
    "SolverOptions",
    "SolveReport",
    "dr_iterate",
    "solve",
    "BaselineOptions",
    "solve_gd",
    "StrainField",
    "strain_intensity",
    "strain_quantiles",
    "triangle_area",
    "SyntheticSpec",
    "generate",
    "read_surface",
    "write_surface",
]
