"""GD-Armijo baseline: steepest descent on the reduced cost J(alpha).

This is a plain first-order comparator with Barzilai-Borwein step guesses
and Armijo backtracking. It is not a Newton or Bellman-principle method.
"""

import logging
import time as _time
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlSequence, cost_gradient, rollout, total_cost
from .errors import InvalidParameterError, NumericError
from .osa import IterationRecord, SolveReport, apply_overrides
from .surface import hausdorff

log = logging.getLogger(__name__)

LABEL = "GD-Armijo baseline"


@dataclass(frozen=True)
class BaselineOptions:
    max_iterations: int = 50
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    grad_tol: float = 1e-10
    max_backtracks: int = 60
    bb_clip: float = 1e3
    record_timing: bool = True
    lam: float = None
    sigma_v: float = None
    sigma_d: float = None
    ridge: float = None
    frozen_u: bool = None
    rho: float = None

    def __post_init__(self):
        if not (0 < self.armijo_c < 1 and 0 < self.backtrack_factor < 1):
            raise InvalidParameterError("armijo_c and backtrack_factor must lie in (0, 1)")
        if self.initial_step <= 0 or self.grad_tol < 0 or self.max_iterations < 0:
            raise InvalidParameterError("initial_step must be > 0 and tolerances >= 0")


def _measure(problem, alphas, iteration, gap, seconds):
    traj = rollout(problem.initial, alphas, problem.time, problem.kernels.sigma_v,
                   frozen=problem.frozen_u)
    cost = total_cost(alphas, problem, traj)
    hd = tuple(hausdorff(traj.states[k + 1], t) for k, t in enumerate(problem.targets))
    return IterationRecord(iteration, cost.total, cost.kin, cost.disp, hd, gap, seconds), traj


def solve_gd(problem, options=None):
    """Minimize J by gradient descent from zero controls.

    The history uses the same record type as the splitting solver; its
    ``consensus_gap`` column holds the gradient norm. Termination reasons:
    ``max-iterations``, ``gradient-tolerance`` or ``stagnation`` (no Armijo
    step found after ``max_backtracks`` reductions).
    """
    options = options or BaselineOptions()
    problem = apply_overrides(problem, options)
    alphas = np.zeros((problem.n_steps, problem.n_points, 3))
    cost = total_cost(alphas, problem).total
    grad = cost_gradient(alphas, problem)
    gnorm = float(np.linalg.norm(grad))
    history = []
    termination = "max-iterations"
    step = options.initial_step
    prev = None
    traj = rollout(problem.initial, alphas, problem.time, problem.kernels.sigma_v,
                   frozen=problem.frozen_u)
    for it in range(1, options.max_iterations + 1):
        if gnorm <= options.grad_tol:
            termination = "gradient-tolerance"
            break
        started = _time.perf_counter()
        if prev is not None:
            s, y = alphas - prev[0], grad - prev[1]
            sy = float(np.sum(s * y))
            if sy > 0:
                bb = float(np.sum(s * s)) / sy
                step = min(max(bb, step / options.bb_clip), step * options.bb_clip)
        t = step
        for _ in range(options.max_backtracks):
            trial = alphas - t * grad
            try:
                trial_cost = total_cost(trial, problem).total
            except NumericError:
                # a step long enough to blow up the rollout is just rejected
                trial_cost = np.inf
            if np.isfinite(trial_cost) and trial_cost <= cost - options.armijo_c * t * gnorm**2:
                break
            t *= options.backtrack_factor
        else:
            termination = "stagnation"
            break
        prev = (alphas, grad)
        alphas, cost, step = trial, trial_cost, t
        grad = cost_gradient(alphas, problem)
        gnorm = float(np.linalg.norm(grad))
        elapsed = _time.perf_counter() - started if options.record_timing else 0.0
        record, traj = _measure(problem, alphas, it, gnorm, elapsed)
        history.append(record)
        log.debug("gd iter %d cost %.6g step %.3g", it, cost, t)
    return SolveReport(
        controls=ControlSequence(alphas),
        trajectory=traj,
        history=history,
        termination=termination,
        iterations=len(history),
        method=LABEL,
    )
