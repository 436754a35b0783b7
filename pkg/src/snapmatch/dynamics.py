"""Discrete flow dynamics, kinetic energy and the reduced cost J(alpha).

Velocities are expanded on the fixed initial grid,

    v_k(z) = sum_j G_sigma_v(x0_j, z) alpha^k_j,

and the grid moves by forward Euler,
``x^{k+1}_n = x^k_n + tau_k v_k(x^k_n)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InvalidInputError
from .kernels import cross_kernel_matrix
from .surface import as_points, dsd, dsd_gradient

__all__ = [
    "TimeGrid",
    "ControlSequence",
    "Trajectory",
    "CostBreakdown",
    "velocity_at",
    "flow_matrices",
    "rollout",
    "kinetic_energy",
    "total_cost",
    "cost_gradient",
]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing instants ``t_0 < ... < t_L``."""

    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        if len(t) < 2:
            raise InvalidInputError("a time grid needs at least two instants")
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise InvalidInputError("time instants must be finite and strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, n_steps, dt=1.0, t0=0.0):
        return cls(t0 + dt * np.arange(n_steps + 1))

    @property
    def steps(self):
        return np.diff(self.times)

    @property
    def n_steps(self):
        return len(self.times) - 1


@dataclass(frozen=True, eq=False)
class ControlSequence:
    """Control coefficients, one ``(N, 3)`` block per time step."""

    alphas: np.ndarray

    def __post_init__(self):
        a = np.array(self.alphas, dtype=float)
        if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] < 1:
            raise InvalidInputError(f"controls must have shape (L, N, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("controls must be finite")
        object.__setattr__(self, "alphas", a)

    @classmethod
    def zeros(cls, n_steps, n_points):
        return cls(np.zeros((n_steps, n_points, 3)))

    @property
    def n_steps(self):
        return self.alphas.shape[0]

    @property
    def n_points(self):
        return self.alphas.shape[1]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Grid positions at every instant, shape ``(L+1, N, 3)``."""

    states: np.ndarray

    @property
    def final(self):
        return self.states[-1]

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class CostBreakdown:
    kin: float
    disp: float
    total: float
    per_snapshot_dsd: tuple


def _alphas(controls):
    if isinstance(controls, ControlSequence):
        return controls.alphas
    return np.asarray(controls, dtype=float)


def _steps(time):
    return time.steps if isinstance(time, TimeGrid) else np.asarray(time, dtype=float)


def velocity_at(controls_k, basis, query, sigma_v):
    """Velocity field of one control block evaluated at ``query`` points."""
    alpha = np.asarray(controls_k, dtype=float)
    x0 = as_points(basis)
    if alpha.shape != x0.shape:
        raise InvalidInputError(
            f"control block {alpha.shape} does not match basis {x0.shape}"
        )
    return cross_kernel_matrix(as_points(query), x0, sigma_v) @ alpha


def flow_matrices(states, basis, sigma_v, frozen=False):
    """The L matrices ``U^k[i, j] = G(x^k_i, x0_j)`` for ``k = 0..L-1``.

    ``states`` is a full trajectory of L+1 grids (the last one is unused).
    With ``frozen`` every matrix is the Gram matrix on the basis.
    """
    x0 = as_points(basis)
    n_steps = len(states) - 1
    gram = cross_kernel_matrix(x0, x0, sigma_v)
    if frozen:
        return [gram] * n_steps
    return [gram] + [cross_kernel_matrix(states[k], x0, sigma_v) for k in range(1, n_steps)]


def rollout(initial, controls, time, sigma_v, frozen=False):
    """Roll the discrete dynamics forward from ``initial``.

    With ``frozen=True`` the flow uses the Gram matrix on the initial grid
    at every step (small-deformation model) instead of re-evaluating the
    kernel at the current positions.
    """
    x0 = as_points(initial)
    alphas = _alphas(controls)
    tau = _steps(time)
    if alphas.shape[1:] != x0.shape or len(alphas) != len(tau):
        raise InvalidInputError(
            f"controls {alphas.shape} inconsistent with grid {x0.shape} and {len(tau)} steps"
        )
    states = np.empty((len(tau) + 1,) + x0.shape)
    states[0] = x0
    gram = cross_kernel_matrix(x0, x0, sigma_v)
    with np.errstate(over="ignore", invalid="ignore"):
        for k, (tk, ak) in enumerate(zip(tau, alphas)):
            u = gram if frozen or k == 0 else cross_kernel_matrix(states[k], x0, sigma_v)
            states[k + 1] = states[k] + tk * (u @ ak)
            if not np.all(np.isfinite(states[k + 1])):
                raise DivergenceError(f"non-finite state after step {k}", step=k)
    return Trajectory(states)


def kinetic_energy(controls, gram, time):
    """``(1/2) sum_k tau_k <alpha^k, K alpha^k>`` summed over the 3 coordinates."""
    alphas = _alphas(controls)
    k = np.asarray(gram, dtype=float)
    tau = _steps(time)
    if alphas.shape[0] != len(tau) or alphas.shape[1] != k.shape[0]:
        raise InvalidInputError(
            f"controls {alphas.shape} inconsistent with Gram {k.shape} and {len(tau)} steps"
        )
    total = 0.0
    for tk, ak in zip(tau, alphas):
        total += 0.5 * tk * float(np.sum(ak * (k @ ak)))
    return total


def total_cost(controls, problem, trajectory=None):
    """Evaluate ``J = kin + lambda * sum_{k>=1} dsd_k(x^k)`` along the rollout."""
    if trajectory is None:
        trajectory = rollout(
            problem.initial, controls, problem.time, problem.kernels.sigma_v,
            frozen=problem.frozen_u,
        )
    kin = kinetic_energy(controls, problem.gram, problem.time)
    per = tuple(
        dsd(trajectory.states[k + 1], ws) for k, ws in enumerate(problem.workspaces)
    )
    disp = float(sum(per))
    return CostBreakdown(kin, disp, kin + problem.lam * disp, per)


def cost_gradient(controls, problem, trajectory=None):
    """Gradient of :func:`total_cost` with respect to every control block.

    Backward adjoint sweep through the state recursion, including the
    dependence of ``U^k`` on ``x^k`` unless the problem uses frozen dynamics.
    """
    alphas = _alphas(controls)
    sigma = problem.kernels.sigma_v
    x0 = problem.initial.points
    tau = problem.time.steps
    if trajectory is None:
        trajectory = rollout(x0, alphas, problem.time, sigma, frozen=problem.frozen_u)
    xs = trajectory.states
    gram = np.asarray(problem.gram)
    n_steps = len(tau)
    grad = np.empty_like(alphas)
    adj = np.zeros_like(x0)
    for k in range(n_steps - 1, -1, -1):
        adj = adj + problem.lam * dsd_gradient(xs[k + 1], problem.workspaces[k])
        u = gram if (k == 0 or problem.frozen_u) else cross_kernel_matrix(xs[k], x0, sigma)
        grad[k] = tau[k] * (gram @ alphas[k]) + tau[k] * (u.T @ adj)
        if k == 0:
            break
        if problem.frozen_u:
            continue
        # d/dx_n of tau <p_n, sum_j U(x_n, x0_j) alpha_j>
        w = u * (adj @ alphas[k].T)
        jac = -(w.sum(axis=1)[:, None] * xs[k] - w @ x0) / sigma**2
        adj = adj + tau[k] * jac
    return grad
