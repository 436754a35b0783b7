"""Command line entry point: ``snapmatch {match,strain,compare,synth}``.

Exit codes: 0 success, 2 config or validation error, 3 numeric failure,
4 I/O failure. Timings are wall-clock seconds from a monotonic clock.
"""

import argparse
import dataclasses
import logging
import sys
import time as _time
from pathlib import Path


from .baseline import solve_gd
from .errors import (
    ConfigError,
    InvalidInputError,
    InvalidParameterError,
    NumericError,
    ParseError,
)
from .io import (
    atomic_write,
    config_text,
    load_config,
    read_surface,
    surface_text,
    write_history,
    write_surface,
    write_table,
)
from .kernels import KernelConfig
from .osa import solve
from .problem import build_problem, default_kernels
from .strain import QUANTILE_GRID, strain_intensity, strain_quantiles
from .surface import robust_hausdorff
from .synth import DEFORMATIONS, SHAPES, SyntheticSpec, generate

log = logging.getLogger("snapmatch")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _add_overrides(p):
    p.add_argument("--config", required=True, type=Path, help="run configuration (INI)")
    p.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int, help="OSA iteration cap")
    p.add_argument("--rho", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--sigma-v", type=float)
    p.add_argument("--sigma-d", type=float)
    p.add_argument("--frozen-u", action="store_true", default=None)
    p.add_argument("--quantile", type=float, help="robust Hausdorff quantile (default 0.95)")


def build_parser():
    parser = argparse.ArgumentParser(prog="snapmatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="match a snapshot sequence with the splitting solver")
    _add_overrides(p)

    p = sub.add_parser("compare", help="splitting solver versus the GD-Armijo baseline")
    _add_overrides(p)

    p = sub.add_parser("strain", help="per-vertex strain intensity")
    p.add_argument("--reference", type=Path, help="triangulated reference mesh")
    p.add_argument("--deformed", type=Path, help="deformed grid, same vertex order")
    p.add_argument("--match-dir", type=Path, help="use the last trajectory_k.csv of a match run")
    p.add_argument("--config", type=Path, help="take the reference from a run configuration")
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("synth", help="write a synthetic problem bundle")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--shape", choices=SHAPES, default="sphere")
    p.add_argument("--deformation", choices=DEFORMATIONS, default="smooth-bump")
    p.add_argument("--magnitude", type=float, default=0.3)
    p.add_argument("--n", type=int, default=50, help="initial point count")
    p.add_argument("--m", type=int, default=None, help="target point count (default: --n)")
    p.add_argument("--snapshots", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _run_config(args):
    cfg = load_config(args.config)
    changes = {}
    for name in ("seed", "rho", "lam", "sigma_v", "sigma_d", "frozen_u"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.max_iters is not None:
        changes["max_iterations"] = args.max_iters
    try:
        cfg.solver = dataclasses.replace(cfg.solver, **changes)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    if args.out is not None:
        cfg.out = args.out
    if args.quantile is not None:
        if not 0 < args.quantile <= 1:
            raise ConfigError("--quantile must lie in (0, 1]")
        cfg.quantile = args.quantile
    return cfg


def problem_from_config(cfg):
    """Load the surfaces and build the problem, honouring kernel and weight overrides."""
    initial, targets = cfg.load_surfaces()
    opt = cfg.solver
    base = default_kernels(initial, targets)
    kernels = KernelConfig(
        base.sigma_v if opt.sigma_v is None else opt.sigma_v,
        base.sigma_d if opt.sigma_d is None else opt.sigma_d,
        base.ridge if opt.ridge is None else opt.ridge,
    )
    return build_problem(initial, targets, cfg.times, kernels=kernels, lam=opt.lam,
                         rho=opt.rho, frozen_u=bool(opt.frozen_u))


def _write_solution(out, report, problem, history_name="history.csv"):
    for k, state in enumerate(report.trajectory.states):
        write_surface(out / f"trajectory_{k}.csv", state)
    for k, alpha in enumerate(report.controls.alphas):
        write_table(out / f"controls_{k}.csv", ["alpha_x", "alpha_y", "alpha_z"], alpha)
    write_history(out / history_name, report.history, problem.n_steps)


def run_match(args):
    cfg = _run_config(args)
    problem = problem_from_config(cfg)
    report = solve(problem, cfg.solver)
    _write_solution(cfg.out, report, problem)
    print(f"{report.method}: {report.termination} after {report.iterations} iterations; "
          f"output in {cfg.out}")
    if report.error is not None:
        print(f"error: {report.error}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _worst_robust_hausdorff(trajectory, problem, quantile):
    return max(
        robust_hausdorff(trajectory.states[k + 1], target, quantile)
        for k, target in enumerate(problem.targets)
    )


def run_compare(args):
    cfg = _run_config(args)
    problem = problem_from_config(cfg)
    # the protocol runs a fixed OSA iteration budget: no Hausdorff-vs-mesh stop
    osa_options = dataclasses.replace(cfg.solver, stop_factor=0.0)
    rows = []
    failed = None
    for name, run in (("osa", lambda: solve(problem, osa_options)),
                      ("gd", lambda: solve_gd(problem, cfg.baseline))):
        started = _time.perf_counter()
        report = run()
        seconds = _time.perf_counter() - started
        write_history(cfg.out / f"history_{name}.csv", report.history, problem.n_steps)
        kin = report.history[-1].kin if report.history else 0.0
        rhd = _worst_robust_hausdorff(report.trajectory, problem, cfg.quantile)
        rows.append([report.method, rhd, kin, seconds, report.iterations])
        log.info("%s: %s, %d iterations, %.1f s", report.method, report.termination,
                 report.iterations, seconds)
        failed = failed or report.error
    header = ["method", "robust_hausdorff", "kinetic_energy", "cpu_seconds", "iterations"]
    write_table(cfg.out / "compare.csv", header, rows)
    for row in rows:
        print(f"{row[0]:>20}  rHD {row[1]:.4g}  kin {row[2]:.4g}  {row[3]:.1f} s  {row[4]} it")
    if failed is not None:
        print(f"error: {failed}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _last_trajectory(match_dir):
    files = sorted(match_dir.glob("trajectory_*.csv"),
                   key=lambda p: int(p.stem.rsplit("_", 1)[1]))
    if not files:
        raise FileNotFoundError(f"no trajectory_k.csv files in {match_dir}")
    return files[-1]


def run_strain(args):
    if args.reference is not None:
        reference = read_surface(args.reference)
    elif args.config is not None:
        cfg = load_config(args.config)
        reference = read_surface(cfg.resolve(cfg.surfaces[0]))
    else:
        raise ConfigError("strain needs --reference or --config")
    if args.deformed is not None:
        deformed = read_surface(args.deformed)
    elif args.match_dir is not None:
        deformed = read_surface(_last_trajectory(args.match_dir))
    else:
        raise ConfigError("strain needs --deformed or --match-dir")
    if not reference.has_mesh:
        raise InvalidInputError("strain requires a mesh: the reference surface has no triangles")
    field = strain_intensity(reference, deformed)
    rows = [[i, *p, si] for i, (p, si) in enumerate(zip(reference.points, field.values))]
    write_table(args.out / "strain.csv", ["vertex_index", "x", "y", "z", "SI"], rows)
    values = strain_quantiles(field, QUANTILE_GRID)
    write_table(args.out / "strain_quantiles.csv", ["quantile", "value"],
                zip(QUANTILE_GRID, values))
    if field.n_undefined:
        print(f"warning: {field.n_undefined} vertices have zero reference area; SI undefined",
              file=sys.stderr)
    print(f"median SI {values[9]:.4g}; output in {args.out}")
    return EXIT_OK


def run_synth(args):
    spec = SyntheticSpec(
        base_shape=args.shape, n_points=args.n, m_points=args.m or args.n,
        n_snapshots=args.snapshots, deformation=args.deformation, magnitude=args.magnitude,
        noise=args.noise, seed=args.seed, duration=args.duration,
    )
    problem, truth = generate(spec)
    out = args.out
    grids = (problem.initial,) + problem.targets
    names = [f"surface_{k}.mesh" for k in range(len(grids))]
    for name, grid in zip(names, grids):
        write_surface(out / name, grid)
    for k, state in enumerate(truth.states):
        atomic_write(out / f"truth_{k}.csv", surface_text(state))
    atomic_write(out / "problem.ini",
                 config_text(names, problem.time.times, [len(g) for g in grids]))
    print(f"wrote {len(grids)} surfaces and problem.ini to {out}")
    return EXIT_OK


COMMANDS = {"match": run_match, "compare": run_compare, "strain": run_strain, "synth": run_synth}


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParseError, InvalidParameterError, InvalidInputError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        name = f" {err.filename}" if getattr(err, "filename", None) else ""
        print(f"I/O error:{name}: {err.strerror or err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
