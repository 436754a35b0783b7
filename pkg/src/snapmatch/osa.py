"""Douglas-Rachford operator splitting in consensus form.

The unknown ``Z = (states, controls)`` is duplicated into ``Z`` (kinetic
side) and ``Z~`` (disparity side). Each outer iteration performs

    Z    <- prox of kin   over dynamics frozen from Z~ , at Z~ + u
    Z~   <- prox of disp  over dynamics frozen from Z  , at Z  - u
    u    <- u + Z~ - Z

where a prox minimizes ``f(X) + rho |X - anchor|^2`` subject to the linear
constraints ``x^{k+1} = x^k + tau_k U^k alpha^k`` with the ``U^k`` held fixed.
"""

import logging
import time as _time
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dynamics import ControlSequence, Trajectory, flow_matrices, rollout, total_cost
from .errors import DivergenceError, NumericError
from .kernels import KernelConfig, factorize_spd
from .surface import dsd, dsd_gradient, dsd_hessian, dsd_hessian_vector, hausdorff

log = logging.getLogger(__name__)

__all__ = [
    "Iterate",
    "ConsensusState",
    "SolverOptions",
    "IterationRecord",
    "SolveReport",
    "QuadraticProx",
    "DisparityProx",
    "SplittingSolver",
    "quadratic_prox",
    "disparity_prox",
    "initial_state",
    "dr_iterate",
    "solve",
    "apply_overrides",
    "newton_minimize",
]

TERMINATION_REASONS = ("max-iterations", "hausdorff-vs-mesh", "consensus-gap", "stagnation")


@dataclass(frozen=True, eq=False)
class Iterate:
    """A point ``(states, controls)`` of the consensus space.

    ``states`` has shape ``(L+1, N, 3)`` and ``controls`` ``(L, N, 3)``.
    """

    states: np.ndarray
    controls: np.ndarray

    def __add__(self, other):
        return Iterate(self.states + other.states, self.controls + other.controls)

    def __sub__(self, other):
        return Iterate(self.states - other.states, self.controls - other.controls)

    def norm(self):
        return float(np.sqrt(np.sum(self.states**2) + np.sum(self.controls**2)))

    def copy(self):
        return Iterate(self.states.copy(), self.controls.copy())

    @classmethod
    def constant(cls, initial, n_steps):
        """Zero controls with every state equal to ``initial`` (feasible)."""
        x0 = np.asarray(initial, dtype=float)
        return cls(np.repeat(x0[None], n_steps + 1, axis=0), np.zeros((n_steps,) + x0.shape))


@dataclass(frozen=True, eq=False)
class ConsensusState:
    z: Iterate
    z_tilde: Iterate
    u: Iterate
    iteration: int = 0


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of :func:`solve`.

    ``lam``, ``rho``, ``sigma_v``, ``sigma_d`` and ``frozen_u`` override the
    problem's values when set. A non-positive ``stop_factor`` disables the
    Hausdorff-versus-mesh-size rule, so the solve runs a fixed iteration count
    unless the gap or stagnation rules fire.
    """

    max_iterations: int = 200
    rho: float = None
    lam: float = None
    sigma_v: float = None
    sigma_d: float = None
    ridge: float = None
    stop_factor: float = 1.5
    gap_tol: float = 1e-10
    stag_tol: float = 1e-10
    stag_window: int = 10
    inner_tol: float = 1e-8
    inner_max: int = 50
    frozen_u: bool = None
    seed: int = 0
    dense_newton_limit: int = 1000
    record_timing: bool = True


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: float
    kin: float
    disp: float
    hausdorff: tuple
    consensus_gap: float
    seconds: float


@dataclass(eq=False)
class SolveReport:
    controls: ControlSequence
    trajectory: Trajectory
    history: list
    termination: str
    iterations: int = 0
    gram_factorizations: int = 0
    state: ConsensusState = None
    method: str = "OSA"
    error: Exception = None

    @property
    def final(self):
        return self.history[-1] if self.history else None


def apply_overrides(problem, options):
    changes = {}
    if options.lam is not None:
        changes["lam"] = float(options.lam)
    if options.rho is not None:
        changes["rho"] = float(options.rho)
    if options.frozen_u is not None:
        changes["frozen_u"] = bool(options.frozen_u)
    if any(v is not None for v in (options.sigma_v, options.sigma_d, options.ridge)):
        k = problem.kernels
        changes["kernels"] = KernelConfig(
            k.sigma_v if options.sigma_v is None else options.sigma_v,
            k.sigma_d if options.sigma_d is None else options.sigma_d,
            k.ridge if options.ridge is None else options.ridge,
        )
    return replace(problem, **changes) if changes else problem


# --------------------------------------------------------------------------
# quadratic (kinetic) proximal step


class QuadraticProx:
    """Exact kinetic prox through the Schur complement of the KKT system.

    Eliminating controls and states leaves a block-tridiagonal SPD system in
    the L multiplier blocks, solved by block forward elimination. The
    control block ``tau K + 2 rho I = tau (K + (2 rho / tau) I)`` is
    Cholesky-factorized once per distinct step length (up to round-off) and
    reused for every call; ``gram_factorizations`` counts those factorizations.
    """

    def __init__(self, problem):
        self.problem = problem
        self.gram = np.asarray(problem.gram)
        self.rho = problem.rho
        self.tau = problem.time.steps
        self.gram_factorizations = 0
        self._gram_factors = {}
        self._frozen_schur = None

    def gram_factor(self, tau_k):
        key = float(tau_k)
        # steps of a uniform grid can differ in the last ulp; share their factor
        for known in self._gram_factors:
            if abs(known - key) <= 1e-12 * known:
                return self._gram_factors[known]
        factor = self._gram_factors.get(key)
        if factor is None:
            factor = factorize_spd(self.gram, 2.0 * self.rho / key)
            self.gram_factorizations += 1
            self._gram_factors[key] = factor
        return factor

    def _schur(self, flow):
        """Per-step pieces ``G_k = C_k^{-1} U_k^T`` and the eliminated blocks."""
        c = 0.5 / self.rho
        n = self.gram.shape[0]
        lows, blocks = [], []
        prev = None
        for k, (tk, u) in enumerate(zip(self.tau, flow)):
            g = self.gram_factor(tk).solve_lower(u.T)
            d = tk * (g.T @ g)
            d[np.diag_indices(n)] += c * (1.0 if k == 0 else 2.0)
            if prev is not None:
                d -= c * c * cho_solve(prev, np.eye(n), check_finite=False)
            try:
                prev = cho_factor(d, lower=True, check_finite=False)
            except LinAlgError as err:
                raise NumericError(f"KKT Schur block {k} is not positive definite") from err
            lows.append(g)
            blocks.append(prev)
        return lows, blocks

    def __call__(self, anchor, flow):
        """Minimize ``kin(X) + rho |X - anchor|^2`` under dynamics with ``flow``."""
        problem = self.problem
        x0 = problem.initial.points
        rho, tau = self.rho, self.tau
        c = 0.5 / rho
        if problem.frozen_u:
            if self._frozen_schur is None:
                self._frozen_schur = self._schur(flow)
            lows, blocks = self._frozen_schur
        else:
            lows, blocks = self._schur(flow)
        w, a = anchor.states, anchor.controls
        n_steps = len(tau)
        # right-hand sides b_k = w_{k+1} - w_k - 2 rho tau_k U_k H_k^{-1} a_k
        rhs = []
        for k in range(n_steps):
            factor = self.gram_factor(tau[k])
            prev = x0 if k == 0 else w[k]
            # tau U H^{-1} a = G^T C^{-1} a
            push = lows[k].T @ factor.solve_lower(a[k])
            rhs.append(w[k + 1] - prev - 2.0 * rho * push)
        # block forward elimination, then back substitution
        mod = []
        for k in range(n_steps):
            r = rhs[k] if k == 0 else rhs[k] + c * cho_solve(blocks[k - 1], mod[k - 1], check_finite=False)
            mod.append(r)
        mu = [None] * n_steps
        for k in range(n_steps - 1, -1, -1):
            r = mod[k] if k == n_steps - 1 else mod[k] + c * mu[k + 1]
            mu[k] = cho_solve(blocks[k], r, check_finite=False)
        controls = np.empty_like(a)
        states = np.empty_like(w)
        states[0] = x0
        for k in range(n_steps):
            factor = self.gram_factor(tau[k])
            # alpha = H^{-1} (2 rho a + tau U^T mu) = (1/tau) C^{-T} (C^{-1} 2 rho a + G mu)
            y = 2.0 * rho * factor.solve_lower(a[k]) + tau[k] * (lows[k] @ mu[k])
            controls[k] = factor.solve_lower_t(y) / tau[k]
            states[k + 1] = states[k] + tau[k] * (flow[k] @ controls[k])
        return Iterate(states, controls)


def quadratic_prox(anchor, frozen_dynamics, problem):
    """One-shot kinetic prox; see :class:`QuadraticProx` for repeated use."""
    return QuadraticProx(problem)(anchor, frozen_dynamics)


# --------------------------------------------------------------------------
# disparity proximal step


def newton_minimize(fun, grad, x0, hess=None, hessp=None, tol=1e-8, maxiter=50,
                    max_halvings=60, callback=None):
    """Damped Newton descent with halving backtracking.

    Either ``hess`` (dense) or ``hessp`` (Hessian-vector product, solved by
    truncated CG) must be given. An indefinite dense Hessian is shifted by a
    multiple of the identity until it factorizes; if that fails, or CG meets
    negative curvature at once, the iteration is a gradient step.
    Returns ``(x, f, grad_norm, iterations)``.
    """
    x = np.array(x0, dtype=float)
    f = fun(x)
    g = grad(x)
    gnorm = float(np.linalg.norm(g))
    if not (np.isfinite(f) and np.isfinite(gnorm)):
        raise DivergenceError("non-finite objective or gradient at the start", iteration=0)
    it = 0
    while it < maxiter and gnorm > tol:
        it += 1
        step = None
        curvature = None
        if hess is not None:
            h = hess(x)
            step = _shifted_newton_step(h, g)
            if step is None:
                curvature = float(g @ h @ g)
        else:
            step, curvature = _truncated_cg(hessp, x, g)
        if step is None:
            # gradient fallback with a Cauchy step when the curvature allows it
            scale = gnorm**2 / curvature if curvature and curvature > 0 else 1.0
            step = -scale * g
        if not np.all(np.isfinite(step)):
            raise DivergenceError("non-finite Newton direction", iteration=it)
        slope = float(g @ step)
        if slope >= 0:
            step, slope = -g, -gnorm**2
        if -slope <= 1e-15 * max(abs(f), np.finfo(float).tiny):
            break  # predicted decrease is below round-off
        t = 1.0
        for _ in range(max_halvings):
            trial = x + t * step
            ft = fun(trial)
            if np.isfinite(ft) and ft <= f + 1e-4 * t * slope and ft < f:
                break
            t *= 0.5
        else:
            break  # no representable decrease left
        x, f = trial, ft
        g = grad(x)
        gnorm = float(np.linalg.norm(g))
        if not np.isfinite(gnorm):
            raise DivergenceError("non-finite gradient at a Newton iterate", iteration=it)
        if callback is not None:
            callback(x, f)
    return x, f, gnorm, it


def _shifted_newton_step(h, g, max_shifts=12):
    """Solve ``(H + delta I) d = -g`` with the smallest ``delta`` in
    ``{0, c, 10c, ...}`` that makes the matrix positive definite."""
    diag = np.abs(np.diag(h))
    delta = 0.0
    first = 1e-6 * max(float(diag.max()), np.finfo(float).tiny)
    for _ in range(max_shifts + 1):
        shifted = h if delta == 0.0 else h + delta * np.eye(len(h))
        try:
            factor = cho_factor(shifted, lower=True, check_finite=False)
        except LinAlgError:
            delta = first if delta == 0.0 else 10.0 * delta
            continue
        return -cho_solve(factor, g, check_finite=False)
    return None


def _truncated_cg(hessp, x, g, max_cg=None):
    """Approximate Newton direction; ``(None, curvature)`` on negative curvature
    at the first CG step."""
    n = g.size
    max_cg = max_cg or min(n, 200)
    tol = min(0.5, np.sqrt(np.linalg.norm(g))) * np.linalg.norm(g)
    d = np.zeros_like(g)
    r = -g
    p = r.copy()
    rr = float(r @ r)
    for i in range(max_cg):
        hp = hessp(x, p)
        php = float(p @ hp)
        if php <= 0:
            if i == 0:
                return None, php
            break
        step = rr / php
        d += step * p
        r -= step * hp
        rr_new = float(r @ r)
        if np.sqrt(rr_new) <= tol:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return d, None


class DisparityProx:
    """Sequential prox of ``lam * disp``: one Newton solve per time step.

    For ``r = 0..L-1`` the next state ``x^{r+1} = x^r + tau_r U^r alpha`` is an
    affine function of ``alpha`` once ``x^r`` is known, and

        h_r(alpha) = lam dsd_{r+1}(x^{r+1}) + rho |x^{r+1} - w^{r+1}|^2
                     + rho |alpha - a^r|^2

    is minimized by damped Newton descent started from ``a^r``.
    """

    def __init__(self, problem, inner_tol=1e-8, inner_max=50, dense_limit=1000):
        self.problem = problem
        self.inner_tol = inner_tol
        self.inner_max = inner_max
        self.dense_limit = dense_limit
        self.last_inner_iterations = []

    def step_objective(self, r, base, flow_r, w_next, a_r):
        """Value, gradient and Hessian callables of ``h_r`` on flat controls."""
        problem = self.problem
        lam, rho = problem.lam, problem.rho
        tau = problem.time.steps[r]
        ws = problem.workspaces[r]
        n = base.shape[0]

        def state(flat):
            return base + tau * (flow_r @ flat.reshape(n, 3))

        def fun(flat):
            x = state(flat)
            return (lam * dsd(x, ws) + rho * np.sum((x - w_next) ** 2)
                    + rho * np.sum((flat.reshape(n, 3) - a_r) ** 2))

        def grad(flat):
            x = state(flat)
            outer = lam * dsd_gradient(x, ws) + 2.0 * rho * (x - w_next)
            return (tau * (flow_r.T @ outer) + 2.0 * rho * (flat.reshape(n, 3) - a_r)).ravel()

        def hess(flat):
            x = state(flat)
            h = lam * dsd_hessian(x, ws).reshape(n, 3, n, 3)
            h = np.einsum("ip,iajb,jq->paqb", flow_r, h, flow_r, optimize=True)
            h = (tau * tau) * h.reshape(3 * n, 3 * n)
            h += (2.0 * rho * tau * tau) * np.kron(flow_r.T @ flow_r, np.eye(3))
            h[np.diag_indices(3 * n)] += 2.0 * rho
            return 0.5 * (h + h.T)

        def hessp(flat, v):
            x = state(flat)
            uv = flow_r @ v.reshape(n, 3)
            inner = lam * dsd_hessian_vector(x, ws, uv) + 2.0 * rho * uv
            return (tau * tau * (flow_r.T @ inner) + 2.0 * rho * v.reshape(n, 3)).ravel()

        return fun, grad, hess, hessp

    def __call__(self, anchor, flow):
        problem = self.problem
        tau = problem.time.steps
        w, a = anchor.states, anchor.controls
        n = problem.n_points
        states = np.empty_like(w)
        controls = np.empty_like(a)
        states[0] = problem.initial.points
        self.last_inner_iterations = []
        for r in range(len(tau)):
            fun, grad, hess, hessp = self.step_objective(r, states[r], flow[r], w[r + 1], a[r])
            dense = n <= self.dense_limit
            try:
                flat, _, _, its = newton_minimize(
                    fun, grad, a[r].ravel(),
                    hess=hess if dense else None,
                    hessp=None if dense else hessp,
                    tol=self.inner_tol, maxiter=self.inner_max,
                )
            except DivergenceError as err:
                err.context["r"] = r
                raise
            self.last_inner_iterations.append(its)
            controls[r] = flat.reshape(n, 3)
            states[r + 1] = states[r] + tau[r] * (flow[r] @ controls[r])
        return Iterate(states, controls)


def disparity_prox(anchor, frozen_dynamics, problem, inner_tol=1e-8, inner_max=50):
    """One-shot disparity prox; see :class:`DisparityProx`."""
    return DisparityProx(problem, inner_tol, inner_max)(anchor, frozen_dynamics)


# --------------------------------------------------------------------------
# outer iteration


def initial_state(problem):
    """``Z~0`` = zero controls with the constant trajectory, ``Z0 = 0`` apart
    from the pinned initial grid, ``u0 = 0``."""
    x0 = problem.initial.points
    n_steps = problem.n_steps
    z_tilde = Iterate.constant(x0, n_steps)
    z = Iterate(np.zeros_like(z_tilde.states), np.zeros_like(z_tilde.controls))
    z.states[0] = x0
    u = Iterate(np.zeros_like(z_tilde.states), np.zeros_like(z_tilde.controls))
    return ConsensusState(z, z_tilde, u, 0)


class SplittingSolver:
    """Holds the per-solve caches (Gram factorization, frozen Schur blocks)."""

    def __init__(self, problem, options=None):
        options = options or SolverOptions()
        self.problem = apply_overrides(problem, options)
        self.options = options
        self.qprox = QuadraticProx(self.problem)
        self.dprox = DisparityProx(
            self.problem, options.inner_tol, options.inner_max, options.dense_newton_limit
        )

    @property
    def gram_factorizations(self):
        return self.qprox.gram_factorizations

    def flow(self, states):
        p = self.problem
        return flow_matrices(states, p.initial.points, p.kernels.sigma_v, frozen=p.frozen_u)

    def iterate(self, state):
        """One splitting step ``(Z, Z~, u) -> (Z', Z~', u')``."""
        u = state.u
        z_next = self.qprox(state.z_tilde + u, self.flow(state.z_tilde.states))
        z_tilde_next = self.dprox(z_next - u, self.flow(z_next.states))
        u_next = u + z_tilde_next - z_next
        return ConsensusState(z_next, z_tilde_next, u_next, state.iteration + 1)

    def measure(self, state, seconds=0.0):
        p = self.problem
        controls = state.z_tilde.controls
        traj = rollout(p.initial, controls, p.time, p.kernels.sigma_v, frozen=p.frozen_u)
        cost = total_cost(controls, p, traj)
        hd = tuple(hausdorff(traj.states[k + 1], t) for k, t in enumerate(p.targets))
        gap = (state.z - state.z_tilde).norm()
        record = IterationRecord(state.iteration, cost.total, cost.kin, cost.disp, hd, gap, seconds)
        return record, traj

    def run(self):
        p, opt = self.problem, self.options
        state = initial_state(p)
        history = []
        termination = "max-iterations"
        mesh = np.asarray(p.target_mesh_sizes)
        _, traj = self.measure(state)
        error = None
        while state.iteration < opt.max_iterations:
            started = _time.perf_counter()
            try:
                state = self.iterate(state)
            except NumericError as err:
                log.error("splitting iteration %d failed: %s", state.iteration + 1, err)
                error = err
                break
            elapsed = _time.perf_counter() - started if opt.record_timing else 0.0
            record, traj = self.measure(state, elapsed)
            history.append(record)
            log.debug("iter %d cost %.6g gap %.3g hd %s", record.iteration, record.cost,
                      record.consensus_gap, record.hausdorff)
            if opt.stop_factor > 0 and np.all(np.asarray(record.hausdorff) <= opt.stop_factor * mesh):
                termination = "hausdorff-vs-mesh"
                break
            if record.consensus_gap <= opt.gap_tol * max(1.0, state.z_tilde.norm()):
                termination = "consensus-gap"
                break
            if len(history) > opt.stag_window:
                old = history[-1 - opt.stag_window].cost
                if abs(old - record.cost) <= opt.stag_tol * max(abs(old), 1e-300):
                    termination = "stagnation"
                    break
        report = SolveReport(
            controls=ControlSequence(state.z_tilde.controls),
            trajectory=traj,
            history=history,
            termination="numeric-error" if error else termination,
            iterations=len(history),
            gram_factorizations=self.gram_factorizations,
            state=state,
            error=error,
        )
        return report


def dr_iterate(state, problem, options=None):
    """Single splitting iteration with fresh caches."""
    return SplittingSolver(problem, options).iterate(state)


def solve(problem, options=None):
    """Run the operator-splitting solver until a termination rule fires.

    Numeric failures inside an iteration stop the run; the report then has
    ``termination == "numeric-error"``, the partial history and ``error`` set.
    """
    return SplittingSolver(problem, options).run()
