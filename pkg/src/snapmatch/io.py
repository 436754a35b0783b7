"""Surface files, run configuration and report tables.

Two surface formats are understood:

* CSV with the header ``x,y,z`` and one point per row (no triangles);
* a minimal ASCII mesh: a ``N T`` line, ``N`` vertex lines ``x y z`` and
  ``T`` face lines ``i j k`` with 0-based indices.

Numbers are written with ``repr`` so every value parses back bit-identically.
All writes go to a temporary file in the destination directory and are then
renamed into place.
"""

import configparser
import csv
import dataclasses
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baseline import BaselineOptions
from .dynamics import TimeGrid
from .errors import ConfigError, InvalidInputError, ParseError
from .osa import SolverOptions
from .surface import SurfaceGrid

__all__ = [
    "fmt",
    "atomic_write",
    "read_surface",
    "write_surface",
    "surface_text",
    "write_table",
    "read_table",
    "history_rows",
    "write_history",
    "RunConfig",
    "load_config",
    "parse_config",
    "config_text",
]

CSV_HEADER = "x,y,z"


def fmt(value):
    """Shortest text that parses back to the identical float (or int)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return repr(float(value))


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary sibling file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# --------------------------------------------------------------------------
# surfaces


def _parse_float(token, where, line):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{where}: {token!r} is not a number", line=line) from None
    if not np.isfinite(value):
        raise ParseError(f"{where}: non-finite coordinate {token!r}", line=line)
    return value


def _read_csv_surface(lines, path):
    rows = []
    reader = csv.reader(lines[1:])
    for i, fields in enumerate(reader):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != 3:
            raise ParseError(f"{path}: row {i} has {len(fields)} fields, expected 3", line=i)
        rows.append([_parse_float(f.strip(), f"{path}: row {i}", i) for f in fields])
    if not rows:
        raise ParseError(f"{path}: no data rows", line=0)
    return SurfaceGrid(np.array(rows))


def _read_mesh_surface(lines, path):
    # line numbers in messages are 1-based file lines
    body = [(no, ln.split()) for no, ln in enumerate(lines, start=1) if ln.strip()]
    no, head = body[0]
    try:
        n, t = (int(v) for v in head)
    except ValueError:
        raise ParseError(f"{path}: line {no}: expected 'N T' counts", line=no) from None
    if n <= 0 or t < 0:
        raise ParseError(f"{path}: line {no}: bad counts {n} {t}", line=no)
    if len(body) - 1 != n + t:
        raise ParseError(
            f"{path}: expected {n} vertex and {t} face lines, found {len(body) - 1} lines",
            line=body[-1][0],
        )
    pts = np.empty((n, 3))
    for row, (no, tok) in enumerate(body[1:n + 1]):
        if len(tok) != 3:
            raise ParseError(f"{path}: line {no}: expected 3 coordinates", line=no)
        pts[row] = [_parse_float(v, f"{path}: line {no}", no) for v in tok]
    tris = np.empty((t, 3), dtype=np.int64)
    for row, (no, tok) in enumerate(body[n + 1:]):
        try:
            if len(tok) != 3:
                raise ValueError
            tris[row] = [int(v) for v in tok]
        except ValueError:
            raise ParseError(f"{path}: line {no}: expected 3 vertex indices", line=no) from None
    if t and (tris.min() < 0 or tris.max() >= n):
        raise InvalidInputError(f"{path}: face index out of range [0, {n})")
    return SurfaceGrid(pts, tris if t else None)


def read_surface(path):
    """Read a surface from CSV (``x,y,z`` header) or the ``N T`` mesh format.

    Raises
    ------
    ParseError
        Malformed content. For CSV ``err.line`` is the 0-based data row; for
        the mesh format it is the 1-based file line.
    InvalidInputError
        A face index is out of range or a triangle is degenerate.
    OSError
        The file cannot be read.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    first = next((ln for ln in lines if ln.strip()), None)
    if first is None:
        raise ParseError(f"{path}: empty surface file", line=0)
    if first.replace(" ", "").lower() == CSV_HEADER:
        start = lines.index(first)
        return _read_csv_surface(lines[start:], path)
    return _read_mesh_surface(lines, path)


def surface_text(grid):
    """Canonical text of a grid: mesh format with triangles, CSV without."""
    pts = grid.points if isinstance(grid, SurfaceGrid) else np.asarray(grid, dtype=float)
    tris = grid.triangles if isinstance(grid, SurfaceGrid) else None
    if tris is None or len(tris) == 0:
        body = "\n".join(",".join(fmt(v) for v in p) for p in pts)
        return f"{CSV_HEADER}\n{body}\n"
    out = [f"{len(pts)} {len(tris)}"]
    out += [" ".join(fmt(v) for v in p) for p in pts]
    out += [" ".join(str(int(i)) for i in tri) for tri in tris]
    return "\n".join(out) + "\n"


def write_surface(path, grid):
    atomic_write(path, surface_text(grid))


# --------------------------------------------------------------------------
# tables


def write_table(path, header, rows):
    """Comma-separated table with round-trip number formatting."""
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    atomic_write(path, "\n".join(lines) + "\n")


def read_table(path):
    """``(header, rows)`` of a table written by :func:`write_table`; cells are strings."""
    with open(path, newline="") as fh:
        data = list(csv.reader(fh))
    return data[0], data[1:]


def history_rows(history, n_steps):
    header = ["iteration", "cost", "kin", "disp"]
    header += [f"hausdorff_{k}" for k in range(1, n_steps + 1)]
    header += ["consensus_gap", "seconds"]
    rows = [
        [r.iteration, r.cost, r.kin, r.disp, *r.hausdorff, r.consensus_gap, r.seconds]
        for r in history
    ]
    return header, rows


def write_history(path, history, n_steps):
    header, rows = history_rows(history, n_steps)
    write_table(path, header, rows)


# --------------------------------------------------------------------------
# configuration

# config key -> dataclass field, where they differ
_ALIASES = {"lambda": "lam"}


@dataclass
class RunConfig:
    """Everything a ``match`` or ``compare`` run needs.

    ``surfaces`` lists the initial grid followed by the L targets; relative
    paths are resolved against the config file's directory.
    """

    surfaces: list
    times: np.ndarray
    point_counts: list = None
    solver: SolverOptions = dataclasses.field(default_factory=SolverOptions)
    baseline: BaselineOptions = dataclasses.field(default_factory=BaselineOptions)
    out: Path = Path("out")
    quantile: float = 0.95
    base_dir: Path = Path(".")

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def load_surfaces(self):
        grids = [read_surface(self.resolve(p)) for p in self.surfaces]
        if self.point_counts is not None:
            for path, grid, count in zip(self.surfaces, grids, self.point_counts):
                if len(grid) != count:
                    raise ConfigError(f"{path}: declared {count} points, file has {len(grid)}")
        return grids[0], grids[1:]


def _convert(kind, raw, key):
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        value = float(text)
        if np.isnan(value):
            raise ValueError(text)
        return value
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def _field_kinds(cls):
    kinds = {}
    for f in dataclasses.fields(cls):
        default = f.default
        if isinstance(default, bool):
            kinds[f.name] = bool
        elif isinstance(default, int):
            kinds[f.name] = int
        elif f.name in ("frozen_u",):
            kinds[f.name] = bool
        else:
            kinds[f.name] = float
    return kinds


def _options_from_section(cls, section, name):
    kinds = _field_kinds(cls)
    values = {}
    for key, raw in section.items():
        field_name = _ALIASES.get(key, key.replace("-", "_"))
        if field_name not in kinds:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        values[field_name] = _convert(kinds[field_name], raw, f"[{name}] {key}")
    try:
        return cls(**values)
    except ValueError as err:
        raise ConfigError(f"[{name}] {err}") from None


def _number_list(raw, key, kind=float):
    items = [v for v in raw.replace("\n", ",").split(",") if v.strip()]
    return [_convert(kind, v, key) for v in items]


def parse_config(text, base_dir="."):
    """Parse INI text with sections ``problem``, ``solver``, ``baseline`` and ``output``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"malformed config: {err}") from None
    unknown = set(parser.sections()) - {"problem", "solver", "baseline", "output"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if not parser.has_section("problem"):
        raise ConfigError("config needs a [problem] section")
    prob = dict(parser["problem"])
    if "surfaces" not in prob:
        raise ConfigError("[problem] needs 'surfaces' (initial grid, then one file per target)")
    surfaces = [s.strip() for s in prob.pop("surfaces").replace("\n", ",").split(",") if s.strip()]
    if len(surfaces) < 2:
        raise ConfigError("[problem] surfaces must list the initial grid and at least one target")
    n_steps = len(surfaces) - 1
    if "times" in prob:
        times = _number_list(prob.pop("times"), "[problem] times")
        if "dt" in prob:
            raise ConfigError("[problem] give either 'times' or 'dt', not both")
    else:
        dt = _convert(float, prob.pop("dt", "1.0"), "[problem] dt")
        times = [i * dt for i in range(n_steps + 1)]
    if len(times) != n_steps + 1:
        raise ConfigError(f"[problem] {len(times)} times for {len(surfaces)} surfaces")
    try:
        time = TimeGrid(times)
    except ValueError as err:
        raise ConfigError(f"[problem] times: {err}") from None
    counts = None
    if "point_counts" in prob:
        counts = _number_list(prob.pop("point_counts"), "[problem] point_counts", int)
        if len(counts) != len(surfaces):
            raise ConfigError("[problem] point_counts must have one entry per surface")
    if prob:
        raise ConfigError(f"[problem] unknown keys: {sorted(prob)}")
    solver = _options_from_section(
        SolverOptions, parser["solver"] if parser.has_section("solver") else {}, "solver"
    )
    baseline = _options_from_section(
        BaselineOptions, parser["baseline"] if parser.has_section("baseline") else {}, "baseline"
    )
    out = dict(parser["output"]) if parser.has_section("output") else {}
    out_dir = out.pop("dir", "out")
    quantile = _convert(float, out.pop("quantile", "0.95"), "[output] quantile")
    if not 0 < quantile <= 1:
        raise ConfigError("[output] quantile must lie in (0, 1]")
    if out:
        raise ConfigError(f"[output] unknown keys: {sorted(out)}")
    base = Path(base_dir)
    out_path = Path(out_dir)
    if not out_path.is_absolute():
        out_path = base / out_path
    return RunConfig(surfaces, time.times, counts, solver, baseline, out_path, quantile, base)


def load_config(path):
    """Read and parse a config file; paths inside it are relative to its directory."""
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def _section_lines(options, defaults):
    lines = []
    for f in dataclasses.fields(options):
        value = getattr(options, f.name)
        if value is None or value == getattr(defaults, f.name):
            continue
        key = {v: k for k, v in _ALIASES.items()}.get(f.name, f.name)
        lines.append(f"{key} = {fmt(value)}")
    return lines


def config_text(surfaces, times, point_counts=None, solver=None, baseline=None,
                out_dir="out", quantile=0.95):
    """Inverse of :func:`parse_config` for the fields that differ from defaults."""
    lines = ["[problem]", "surfaces = " + ", ".join(str(s) for s in surfaces)]
    lines.append("times = " + ", ".join(fmt(t) for t in times))
    if point_counts is not None:
        lines.append("point_counts = " + ", ".join(str(int(c)) for c in point_counts))
    lines += ["", "[solver]"] + _section_lines(solver or SolverOptions(), SolverOptions())
    lines += ["", "[baseline]"] + _section_lines(baseline or BaselineOptions(), BaselineOptions())
    lines += ["", "[output]", f"dir = {out_dir}", f"quantile = {fmt(quantile)}"]
    return "\n".join(lines) + "\n"
