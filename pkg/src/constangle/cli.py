"""Command-line interface and the grid file format.

Subcommands: angle, synth, family, verify, export. Global flags --config,
--tol, --h and --quiet come before the subcommand. A config file is an INI
file whose [constangle] section holds global keys and whose per-command
sections ([synth], [verify], ...) hold command keys named like the long
flags with dashes replaced by underscores. Flags override file values.

Exit codes:
    0  success
    1  usage, input or other package errors
    2  DegeneratePlane
    3  ClosureFailure
    4  AngleDegenerate
    5  BadSpecParameters
    6  a verify check failed
    7  unknown export format or projection
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AngleDegenerate,
    BadSpecParameters,
    ClosureFailure,
    ConstAngleError,
    DegeneratePlane,
)
from .grid import FRAME_NAMES, ImmersionGrid
from .planes import (
    E1_PLANE,
    ComplexAngle,
    OrientedPlane,
    classify_position,
    complex_angle,
    plane_cos,
    plane_from_frame,
    projection_angles,
)

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEGENERATE_PLANE = 2
EXIT_CLOSURE = 3
EXIT_ANGLE_DEGENERATE = 4
EXIT_BAD_SPEC = 5
EXIT_CHECK_FAILED = 6
EXIT_BAD_EXPORT = 7

# command -> option -> default; every parameter has a documented default
DEFAULTS = {
    "global": {"tol": None, "h": 0.01, "quiet": False},
    "angle": {"p1": "0,0,1,0,0,0,0,1", "p2": None},
    "synth": {
        "psi": None, "method": "goursat", "mu0": None, "nu0": None, "cauchy": None,
        "which": "mu", "domain": "0,1,0,1", "base": "0,0,0,0", "base_node": None,
        "output": "-",
    },
    "family": {"spec": None, "domain": "-1,1,-1,1", "output": "-"},
    "verify": {
        "grid": None, "plane": "0,0,1,0,0,0,0,1", "checks": "auto",
        "curv_tol": 1e-3, "invariant_tol": 1e-3,
    },
    "export": {"grid": None, "format": "csv", "projection": None, "output": "-"},
}


# --------------------------------------------------------------------------
# Parsing helpers
# --------------------------------------------------------------------------

_PSI_RE = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?"
    r"\s*(?:([+-])\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*i)?\s*$"
)


def parse_psi(text: str) -> complex:
    """Parse a complex angle written as 're+imi', 're-imi', 're' or '+imi'."""
    s = str(text).replace(" ", "")
    m = _PSI_RE.match(s)
    if not s or m is None or (m.group(1) is None and m.group(2) is None):
        raise ValueError(f"cannot parse complex angle {text!r}; expected e.g. 1.0471975512+0.4i")
    re_part = float(m.group(1)) if m.group(1) else 0.0
    im_part = 0.0
    if m.group(2):
        im_part = float(m.group(3)) if m.group(3) else 1.0
        if m.group(2) == "-":
            im_part = -im_part
    return complex(re_part, im_part)


def format_psi(psi: complex) -> str:
    psi = complex(psi)
    sign = "-" if psi.imag < 0 else "+"
    return f"{psi.real!r}{sign}{abs(psi.imag)!r}i"


def parse_reals(text, n: Optional[int] = None) -> list[float]:
    vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated reals, got {len(vals)}")
    return vals


def parse_plane(text) -> OrientedPlane:
    v = parse_reals(text, 8)
    return plane_from_frame(v[:4], v[4:])


def parse_domain(text):
    x0, x1, y0, y1 = parse_reals(text, 4)
    return (x0, x1), (y0, y1)


def split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on sep outside parentheses and brackets."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


_EXPR_NAMES = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "abs",
        "arctan", "arcsin", "arccos", "arcsinh", "arccosh", "arctanh", "pi", "e",
    )
}


def eval_expression(expr: str, **variables):
    """Evaluate an arithmetic expression over numpy functions and the given variables."""
    code = compile(expr, "<expression>", "eval")
    allowed = set(_EXPR_NAMES) | set(variables)
    for name in code.co_names:
        if name not in allowed:
            raise ValueError(f"name {name!r} is not allowed in expressions")
    return eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, **variables})


def parse_family_spec(text: str):
    """Build a family spec from 'name:key=value,...'."""
    from .synthesis import (
        DegenerateHyperplane,
        Hypersphere,
        Lightcone,
        PolyTrigExample,
        Product,
        TrigExample,
    )

    name, _, rest = text.partition(":")
    name = name.strip().lower()
    kv = {}
    for item in split_top_level(rest):
        key, eq, value = item.partition("=")
        if not eq:
            raise BadSpecParameters(f"expected key=value in family spec, got {item!r}")
        kv[key.strip().lower()] = value.strip()

    def take(key, conv, default=None):
        if key in kv:
            try:
                return conv(kv.pop(key))
            except ValueError as exc:
                raise BadSpecParameters(f"bad value for {key}: {exc}") from exc
        if default is None:
            raise BadSpecParameters(f"family {name!r} needs parameter {key!r}")
        return default

    if name == "lightcone":
        spec = Lightcone(take("a", float), take("b", float))
    elif name == "hypersphere":
        center = take("center", lambda s: tuple(parse_reals(s.strip("()[]"), 4)), (0.0, 0.0, 0.0, 0.0))
        spec = Hypersphere(take("psi", parse_psi), take("r1", float), take("r2", float), center)
    elif name == "product":
        spec = Product(
            take("gamma1", str, "circle"), take("gamma2", str, "hyperbola"),
            take("r1", float, 1.0), take("r2", float, 1.0),
        )
    elif name == "trig":
        spec = TrigExample(take("psi", parse_psi))
    elif name == "polytrig":
        spec = PolyTrigExample(take("psi", parse_psi))
    elif name == "degenerate":
        expr = take("s", str)
        try:
            eval_expression(expr, x=0.5, y=0.5)
        except Exception as exc:
            raise BadSpecParameters(f"bad expression for s: {exc}") from exc
        spec = DegenerateHyperplane(lambda x, y, _e=expr: eval_expression(_e, x=x, y=y), expr)
    else:
        raise BadSpecParameters(f"unknown family {name!r}")
    if kv:
        raise BadSpecParameters(f"unknown parameters for {name}: {', '.join(sorted(kv))}")
    return spec


# --------------------------------------------------------------------------
# Grid file
# --------------------------------------------------------------------------

def _finite_list(a, what: str) -> list:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite entries")
    return a.tolist()


def grid_to_dict(grid: ImmersionGrid) -> dict:
    """Ordered dictionary view of a grid; points are row-major with i outer."""
    nx, ny = grid.nx, grid.ny
    d = {
        "format_version": FORMAT_VERSION,
        "nx": nx,
        "ny": ny,
        "x0": float(grid.x0),
        "y0": float(grid.y0),
        "hx": float(grid.hx),
        "hy": float(grid.hy),
    }
    if grid.psi is not None:
        d["psi"] = [float(complex(grid.psi).real), float(complex(grid.psi).imag)]
    if grid.family is not None:
        d["family"] = grid.family
    d["points"] = _finite_list(grid.points.reshape(nx * ny, 4), "points")
    if grid.mu is not None:
        d["mu"] = _finite_list(grid.mu.reshape(-1), "mu")
    if grid.nu is not None:
        d["nu"] = _finite_list(grid.nu.reshape(-1), "nu")
    if grid.mask is not None:
        d["mask"] = [int(v) for v in np.asarray(grid.mask, bool).reshape(-1)]
    if grid.frames:
        d["frames"] = {
            k: _finite_list(grid.frames[k].reshape(nx * ny, 4), f"frame {k}")
            for k in FRAME_NAMES if k in grid.frames
        }
    return d


def grid_from_dict(d: dict) -> ImmersionGrid:
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported grid format_version {d.get('format_version')!r}")
    nx, ny = int(d["nx"]), int(d["ny"])
    n = nx * ny

    def arr(key, shape):
        a = np.asarray(d[key], dtype=float)
        if a.size != int(np.prod(shape)):
            raise ValueError(f"{key} has {a.size} entries, expected {int(np.prod(shape))}")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{key} contains non-finite entries")
        return a.reshape(shape)

    points = arr("points", (nx, ny, 4))
    mu = arr("mu", (nx, ny)) if "mu" in d else None
    nu = arr("nu", (nx, ny)) if "nu" in d else None
    mask = None
    if "mask" in d:
        m = np.asarray(d["mask"])
        if m.size != n:
            raise ValueError("mask length does not match nx * ny")
        mask = m.reshape(nx, ny).astype(bool)
    frames = None
    if "frames" in d:
        frames = {}
        for k, v in d["frames"].items():
            a = np.asarray(v, dtype=float)
            if a.size != 4 * n or not np.all(np.isfinite(a)):
                raise ValueError(f"frame {k} is malformed")
            frames[k] = a.reshape(nx, ny, 4)
    psi = complex(*d["psi"]) if "psi" in d else None
    return ImmersionGrid(
        float(d["x0"]), float(d["y0"]), float(d["hx"]), float(d["hy"]), points,
        frames=frames, mu=mu, nu=nu, mask=mask, psi=psi, family=d.get("family"),
    )


def dumps_grid(grid: ImmersionGrid) -> str:
    """Canonical JSON text: one top-level key per line, shortest round-trip floats."""
    d = grid_to_dict(grid)
    lines = [
        f"{json.dumps(k)}: {json.dumps(v, separators=(',', ':'), allow_nan=False)}"
        for k, v in d.items()
    ]
    return "{\n" + ",\n".join(lines) + "\n}\n"


def loads_grid(text: str) -> ImmersionGrid:
    return grid_from_dict(json.loads(text))


def write_grid(grid: ImmersionGrid, path) -> None:
    Path(path).write_text(dumps_grid(grid))


def read_grid(path) -> ImmersionGrid:
    return loads_grid(Path(path).read_text())


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------

class ExportError(ValueError):
    """Unknown export format or projection."""


def parse_projection(text: Optional[str]) -> np.ndarray:
    """3 x 4 matrix (with offsets folded in a 3 x 5) for 'drop:k' or 'affine:...'."""
    if not text:
        raise ExportError("obj export needs a projection: drop:k or affine:<12 or 15 reals>")
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "drop":
        try:
            k = int(rest)
        except ValueError as exc:
            raise ExportError(f"bad drop index {rest!r}") from exc
        if k not in (0, 1, 2, 3):
            raise ExportError("drop index must be 0, 1, 2 or 3")
        keep = [c for c in range(4) if c != k]
        M = np.zeros((3, 5))
        for r, c in enumerate(keep):
            M[r, c] = 1.0
        return M
    if kind == "affine":
        try:
            vals = parse_reals(rest)
        except ValueError as exc:
            raise ExportError(str(exc)) from exc
        if len(vals) == 12:
            return np.hstack([np.reshape(vals, (3, 4)), np.zeros((3, 1))])
        if len(vals) == 15:
            return np.reshape(vals, (3, 5))
        raise ExportError("affine projection needs 12 reals (3 rows of 4) or 15 (rows of 4 plus offset)")
    raise ExportError(f"unknown projection {kind!r}")


def export_csv(grid: ImmersionGrid) -> str:
    x, y = grid.x, grid.y
    with_metric = grid.mu is not None and grid.nu is not None
    rows = []
    for i in range(grid.nx):
        for j in range(grid.ny):
            vals = [repr(float(x[i])), repr(float(y[j]))] + [repr(float(v)) for v in grid.points[i, j]]
            if with_metric:
                vals += [repr(float(grid.mu[i, j])), repr(float(grid.nu[i, j]))]
            rows.append(f"{i},{j}," + ",".join(vals))
    return "\n".join(rows) + "\n"


def export_obj(grid: ImmersionGrid, projection: str) -> str:
    M = parse_projection(projection)
    P = grid.points.reshape(-1, 4)
    V = P @ M[:, :4].T + M[:, 4]
    lines = [f"# {grid.nx} x {grid.ny} grid, projection {projection}"]
    lines += [f"v {a!r} {b!r} {c!r}" for a, b, c in V.tolist()]
    ny = grid.ny
    for i in range(grid.nx - 1):
        for j in range(ny - 1):
            a = i * ny + j + 1
            b = (i + 1) * ny + j + 1
            c = (i + 1) * ny + j + 2
            d = i * ny + j + 2
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
    return "\n".join(lines) + "\n"


def export_grid(grid: ImmersionGrid, fmt: str, projection: Optional[str] = None) -> str:
    fmt = (fmt or "").lower()
    if fmt == "csv":
        return export_csv(grid)
    if fmt == "json":
        return dumps_grid(grid)
    if fmt == "obj":
        return export_obj(grid, projection)
    raise ExportError(f"unknown export format {fmt!r}")


def read_csv_grid(text: str) -> ImmersionGrid:
    """Rebuild points (and mu, nu if present) from csv export text."""
    rows = np.array([[float(v) for v in line.split(",")] for line in text.splitlines() if line.strip()])
    ii, jj = rows[:, 0].astype(int), rows[:, 1].astype(int)
    nx, ny = ii.max() + 1, jj.max() + 1
    pts = np.empty((nx, ny, 4))
    pts[ii, jj] = rows[:, 4:8]
    x = np.unique(rows[:, 2])
    y = np.unique(rows[:, 3])
    hx = float(x[1] - x[0]) if nx > 1 else 1.0
    hy = float(y[1] - y[0]) if ny > 1 else 1.0
    mu = nu = None
    if rows.shape[1] == 10:
        mu = np.empty((nx, ny))
        nu = np.empty((nx, ny))
        mu[ii, jj] = rows[:, 8]
        nu[ii, jj] = rows[:, 9]
    return ImmersionGrid(float(x[0]), float(y[0]), hx, hy, pts, mu=mu, nu=nu)


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

def load_config(path) -> dict:
    """Read an INI config into {section: {key: raw string}}."""
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    out = {s: dict(cp.items(s, raw=True)) for s in cp.sections()}
    return out


def _coerce(value, default):
    if isinstance(value, str):
        if isinstance(default, bool):
            return value.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, float) or default is None and re.fullmatch(r"[+-]?[\d.]+(e[+-]?\d+)?", value.strip()):
            try:
                return float(value)
            except ValueError:
                return value
    return value


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge defaults, config file values and explicit flags (in that order of precedence)."""
    cfg = load_config(args.config) if args.config else {}
    opts = {}
    for section, table in (("constangle", DEFAULTS["global"]), (args.command, DEFAULTS[args.command])):
        file_vals = cfg.get(section, {})
        for key, default in table.items():
            value = default
            if key in file_vals:
                value = _coerce(file_vals[key], default)
            flag = getattr(args, key, None)
            if flag is not None and flag is not False:
                value = flag
            opts[key] = value
    return opts


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def _out(opts, text: str) -> None:
    if not opts.get("quiet"):
        print(text)


def _write_text(dest: str, text: str) -> None:
    if dest in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)


def cmd_angle(opts: dict) -> int:
    if opts["p2"] is None:
        raise ValueError("angle needs --p2 (eight reals: two 4-vectors)")
    p = parse_plane(opts["p1"])
    q = parse_plane(opts["p2"])
    psi = complex_angle(p, q)
    c = plane_cos(p, q)
    try:
        c1, c2 = psi.constants
        consts = f"{c1!r} {c2!r}"
    except AngleDegenerate:
        consts = "undefined undefined"
    pos = classify_position(p, q)
    proj = projection_angles(p, q)
    dev = float(abs(np.cos(proj.value) - c))
    print(f"psi1 {psi.psi1!r}")
    print(f"psi2 {psi.psi2!r}")
    print(f"psi {format_psi(psi.value)}")
    print(f"cos_psi {format_psi(c)}")
    print(f"c1_c2 {consts}")
    print(f"position {pos.value}")
    print(f"projection_psi {format_psi(proj.value)} rank {proj.rank}")
    print(f"projection_deviation {dev!r}")
    return EXIT_OK


def _edge_values(source, coords: np.ndarray, var: str, c1: float, c2: float) -> np.ndarray:
    """Edge data from a two-column text file (interpolated) or an expression in var."""
    path = Path(str(source))
    if path.is_file():
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] < 2:
            raise ValueError(f"{path} needs two columns: coordinate and value")
        order = np.argsort(data[:, 0])
        return np.interp(coords, data[order, 0], data[order, 1])
    vals = eval_expression(str(source), **{var: coords, "c1": c1, "c2": c2})
    return np.asarray(np.broadcast_to(vals, coords.shape), dtype=float)


def cmd_synth(opts: dict) -> int:
    from .grid import grid_axis
    from .planes import as_angle
    from .synthesis import CauchyData, integrate_immersion, solve_cauchy_curve, solve_goursat

    if opts["psi"] is None:
        raise ValueError("synth needs --psi")
    psi = as_angle(parse_psi(opts["psi"]))
    c1, c2 = psi.constants
    h = float(opts["h"])
    method = str(opts["method"]).lower()
    if method == "goursat":
        if opts["mu0"] is None or opts["nu0"] is None:
            raise ValueError("goursat synthesis needs --mu0 and --nu0")
        domain = parse_domain(opts["domain"])
        xs = grid_axis(*domain[0], h)
        ys = grid_axis(*domain[1], h)
        f = _edge_values(opts["mu0"], xs, "x", c1, c2)
        g = _edge_values(opts["nu0"], ys, "y", c1, c2)
        metric = solve_goursat(psi, f, g, domain, h)
    elif method == "cauchy":
        if opts["cauchy"] is None:
            raise ValueError("cauchy synthesis needs --cauchy FILE with columns x y f g")
        data = np.loadtxt(opts["cauchy"], ndmin=2)
        if data.shape[1] != 4:
            raise ValueError("cauchy data needs four columns: x y f g")
        metric = solve_cauchy_curve(psi, CauchyData(data[:, :2], data[:, 2], data[:, 3], opts["which"]), h)
    else:
        raise ValueError(f"unknown synthesis method {method!r}")
    base = parse_reals(opts["base"], 4)
    base_node = tuple(int(v) for v in parse_reals(opts["base_node"], 2)) if opts["base_node"] else None
    grid = integrate_immersion(metric, base=base, base_node=base_node)
    closure = grid.meta["closure"]
    frac = float(np.mean(grid.retained))
    r1, r2 = metric.system_residual()
    _out(opts, f"closure_max_loop {closure.max_loop!r}")
    _out(opts, f"closure_density {closure.max_density!r} threshold {closure.threshold!r}")
    _out(opts, f"system_residual {max(r1, r2)!r}")
    _out(opts, f"retained_fraction {frac!r}")
    _out(opts, f"base_node {grid.meta['base_node'][0]} {grid.meta['base_node'][1]}")
    _write_text(opts["output"], dumps_grid(grid))
    return EXIT_OK


def cmd_family(opts: dict) -> int:
    from .synthesis import make_family

    if opts["spec"] is None:
        raise ValueError("family needs a spec string, e.g. lightcone:a=0.5,b=0.3")
    spec = parse_family_spec(opts["spec"])
    grid = make_family(spec, parse_domain(opts["domain"]), float(opts["h"]))
    frac = float(np.mean(grid.retained))
    _out(opts, f"family {grid.family}")
    _out(opts, f"nodes {grid.nx} {grid.ny} retained_fraction {frac!r}")
    _write_text(opts["output"], dumps_grid(grid))
    return EXIT_OK


ADAPTED_FAMILIES = ("synthesized", "potentials", "hypersphere", "trig", "polytrig")


def run_checks(grid: ImmersionGrid, plane: OrientedPlane = E1_PLANE, checks="auto", tol=None,
               curv_tol: float = 1e-3, invariant_tol: float = 1e-3) -> list[tuple]:
    """Run the verification suite; returns (name, passed, value, tolerance) tuples."""
    from .planes import as_angle
    from .surface import (
        blowup_ode_check,
        check_constant_angle,
        check_degenerate_hyperplane,
        check_holonomy_tube,
        curvatures,
    )
    from .synthesis import MetricField, kg_residual

    has_metric = grid.mu is not None and grid.nu is not None
    psi = as_angle(grid.psi) if grid.psi is not None else None
    family = grid.family or ""
    degenerate = family.startswith("degenerate")
    # mu, nu are the adapted-coordinate metric only for these grids
    adapted = family.split(":")[0] in ADAPTED_FAMILIES
    sin_ok = psi is not None and abs(psi.sin) > 1e-8
    if checks in (None, "auto"):
        names = ["constant_angle", "curvature"]
        if has_metric and sin_ok and adapted:
            names += ["invariants", "kg", "blowup"]
        elif has_metric and np.allclose(grid.mu, grid.nu):
            names.append("null_mean_curvature")
        if degenerate:
            names.append("hyperplane")
        if psi is not None and sin_ok and not degenerate and (psi.is_real(1e-12) or psi.is_imaginary(1e-12)):
            names.append("holonomy")
    else:
        names = [c.strip() for c in str(checks).split(",") if c.strip()]
    h = max(grid.hx, grid.hy)
    results = []
    inv = None
    for name in names:
        if name == "constant_angle":
            r = check_constant_angle(grid, plane, tol)
            results.append((name, r.passed, r.max_deviation, r.tolerance))
        elif name == "curvature":
            inv = inv or curvatures(grid, plane)
            val = max(inv.max_abs["K"], inv.max_abs["K_N"])
            results.append((name, bool(val < curv_tol), val, curv_tol))
        elif name == "invariants":
            if not has_metric:
                raise ValueError("the invariants check needs mu and nu in the grid file")
            inv = inv or curvatures(grid, plane)
            mu, nu = grid.mu, grid.nu
            rel = inv.reliable & np.isfinite(inv.Delta) & np.isfinite(inv.H2)
            with np.errstate(divide="ignore", invalid="ignore"):
                d_exact = -4.0 / (mu * nu) ** 2
                e_delta = np.abs(inv.Delta - d_exact) / np.abs(d_exact)
                e_h2 = np.abs(inv.H2 - (1 / mu ** 2 - 1 / nu ** 2)) / (1 / mu ** 2 + 1 / nu ** 2)
            val = float(max(np.max(e_delta[rel], initial=0.0), np.max(e_h2[rel], initial=0.0)))
            results.append((name, bool(val < invariant_tol), val, invariant_tol))
        elif name == "null_mean_curvature":
            inv = inv or curvatures(grid, plane)
            val = inv.max_abs["H2"]
            results.append((name, bool(val < invariant_tol), val, invariant_tol))
        elif name == "hyperplane":
            r = check_degenerate_hyperplane(grid)
            ok = r.is_in_affine_hyperplane and r.normal_is_null
            results.append((name, ok, r.residual, 1e-8))
        elif name == "holonomy":
            r = check_holonomy_tube(grid, plane, psi)
            results.append((name + "_plane", r.plane_residual < r.plane_tol, r.plane_residual, r.plane_tol))
            results.append((name + "_product", r.product_residual < r.product_tol, r.product_residual, r.product_tol))
        elif name in ("kg", "blowup"):
            if not has_metric:
                raise ValueError(f"the {name} check needs mu and nu in the grid file")
            metric = MetricField(grid.x, grid.y, grid.mu, grid.nu, psi, grid.retained)
            if name == "kg":
                m = grid.retained
                scale = max(float(np.max(np.abs(grid.mu[m]), initial=0.0)), float(np.max(np.abs(grid.nu[m]), initial=0.0)))
                ktol = 10.0 * h * h * scale
                val = kg_residual(metric)
                results.append((name, val < ktol, val, ktol))
            else:
                r = blowup_ode_check(metric)
                results.append((name, r.passed, r.relative_residual, r.tolerance))
        else:
            raise ValueError(f"unknown check {name!r}")
    return results


def cmd_verify(opts: dict) -> int:
    if opts["grid"] is None:
        raise ValueError("verify needs a grid file")
    grid = read_grid(opts["grid"])
    plane = parse_plane(opts["plane"])
    results = run_checks(
        grid, plane, opts["checks"], opts["tol"], float(opts["curv_tol"]), float(opts["invariant_tol"])
    )
    failed = 0
    for name, ok, value, tol in results:
        print(f"CHECK {name} {'PASS' if ok else 'FAIL'} {value!r} {tol!r}")
        failed += not ok
    _out(opts, f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_export(opts: dict) -> int:
    if opts["grid"] is None:
        raise ValueError("export needs a grid file")
    fmt = str(opts["format"]).lower()
    if fmt not in ("csv", "json", "obj"):
        raise ExportError(f"unknown export format {fmt!r}")
    if fmt == "obj":
        parse_projection(opts["projection"])
    grid = read_grid(opts["grid"])
    _write_text(opts["output"], export_grid(grid, fmt, opts["projection"]))
    return EXIT_OK


COMMANDS = {
    "angle": cmd_angle,
    "synth": cmd_synth,
    "family": cmd_family,
    "verify": cmd_verify,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="constangle",
        description="Complex angles between spacelike planes and constant-angle surfaces in R^{1,3}.",
        epilog="Exit codes: 0 ok, 1 input error, 2 DegeneratePlane, 3 ClosureFailure, "
        "4 AngleDegenerate, 5 BadSpecParameters, 6 failed check, 7 bad export format/projection.",
    )
    p.add_argument("--config", help="INI file with [constangle] and per-command sections")
    p.add_argument("--tol", type=float, default=None, help="constant-angle tolerance (default 10 h^2)")
    p.add_argument("--h", type=float, default=None, help="grid spacing (default 0.01)")
    p.add_argument("--quiet", action="store_true", default=False, help="suppress informational output")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("angle", help="complex angle between two planes")
    a.add_argument("--p1", help="first plane as 8 comma-separated reals (default: E1-plane)")
    a.add_argument("--p2", help="second plane as 8 comma-separated reals")

    s = sub.add_parser("synth", help="synthesize a surface from characteristic data")
    s.add_argument("--psi", help="complex angle, e.g. 1.0471975512+0.4i")
    s.add_argument("--method", choices=("goursat", "cauchy"))
    s.add_argument("--mu0", help="mu on the bottom edge: two-column file or expression in x, c1, c2")
    s.add_argument("--nu0", help="nu on the left edge: two-column file or expression in y, c1, c2")
    s.add_argument("--cauchy", help="file with columns x y f g along a monotone curve")
    s.add_argument("--which", choices=("mu", "nu"), help="unknown carried by the Cauchy data")
    s.add_argument("--domain", help="x0,x1,y0,y1 (default 0,1,0,1)")
    s.add_argument("--base", help="F at the base node as 4 reals (default origin)")
    s.add_argument("--base-node", dest="base_node", help="i,j of the base node")
    s.add_argument("-o", "--output", help="grid file to write (default stdout)")

    f = sub.add_parser("family", help="sample a closed-form family")
    f.add_argument("spec", nargs="?", help="e.g. lightcone:a=0.5,b=0.3 or hypersphere:psi=1.047+0.4i,r1=1,r2=-1")
    f.add_argument("--domain", help="x0,x1,y0,y1 (default -1,1,-1,1)")
    f.add_argument("-o", "--output", help="grid file to write (default stdout)")

    v = sub.add_parser("verify", help="run geometric checks on a grid file")
    v.add_argument("grid", nargs="?", help="grid file")
    v.add_argument("--plane", help="reference plane as 8 reals (default E1-plane)")
    v.add_argument("--checks", help="comma-separated checks or 'auto'")
    v.add_argument("--curv-tol", dest="curv_tol", type=float, help="bound on |K| and |K_N| (default 1e-3)")
    v.add_argument("--invariant-tol", dest="invariant_tol", type=float, help="relative bound on Delta and |H|^2 (default 1e-3)")

    e = sub.add_parser("export", help="export a grid file as csv, json or obj")
    e.add_argument("grid", nargs="?", help="grid file")
    e.add_argument("--format", help="csv, json or obj (default csv)")
    e.add_argument("--projection", help="obj only: drop:k or affine:<12 or 15 reals>")
    e.add_argument("-o", "--output", help="file to write (default stdout)")
    return p


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is reserved for DegeneratePlane
        return EXIT_OK if not exc.code else EXIT_ERROR
    try:
        opts = resolve_options(args)
        return COMMANDS[args.command](opts)
    except DegeneratePlane as exc:
        return _fail(EXIT_DEGENERATE_PLANE, exc)
    except ClosureFailure as exc:
        return _fail(EXIT_CLOSURE, exc)
    except AngleDegenerate as exc:
        return _fail(EXIT_ANGLE_DEGENERATE, exc)
    except BadSpecParameters as exc:
        return _fail(EXIT_BAD_SPEC, exc)
    except ExportError as exc:
        return _fail(EXIT_BAD_EXPORT, exc)
    except (ConstAngleError, ValueError, OSError, configparser.Error) as exc:
        return _fail(EXIT_ERROR, exc)


if __name__ == "__main__":
    sys.exit(main())
