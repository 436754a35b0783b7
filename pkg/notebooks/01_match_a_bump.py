# %% [markdown]
# # Matching a sphere that grows a bump
#
# A unit sphere is pushed outward by a localized bump over three snapshots.
# We recover a trajectory linking the snapshots and look at how fast the
# splitting solver closes the distance to each target.

# %%
import numpy as np

from snapmatch import SolverOptions, SyntheticSpec, generate, solve

spec = SyntheticSpec("sphere", n_points=80, m_points=80, n_snapshots=3,
                     deformation="smooth-bump", magnitude=0.4, seed=1)
problem, truth = generate(spec)
print(f"sigma_v={problem.kernels.sigma_v:.3f}  sigma_d={problem.kernels.sigma_d:.3f}")
print(f"lambda={problem.lam:.3g}  rho={problem.rho:.3g}")

# %% [markdown]
# The default rule stops as soon as every snapshot sits within 1.5 mesh
# sizes. Here we switch it off to watch a fixed budget of 120 iterations.

# %%
report = solve(problem, SolverOptions(max_iterations=120, stop_factor=0))
for rec in report.history[::20] + [report.history[-1]]:
    hd = "  ".join(f"{h:.4f}" for h in rec.hausdorff)
    print(f"{rec.iteration:4d}  cost={rec.cost:9.4f}  HD=[{hd}]  gap={rec.consensus_gap:.1e}")

# %% [markdown]
# How close is the recovered path to the one that generated the data?
# With M = N the targets are the displaced initial samples, so a pointwise
# error is meaningful.

# %%
for k in range(1, problem.n_steps + 1):
    err = np.linalg.norm(report.trajectory.states[k] - truth.states[k], axis=1)
    print(f"snapshot {k}: median point error {np.median(err):.4f}, max {err.max():.4f}")
