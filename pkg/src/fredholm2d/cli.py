"""Command-line front end.

Usage::

    fredholm2d <command> --config run.toml

The config holds one table named after the command (``[solve]``,
``[study]`` ...). Every JSON summary written by a command carries the fully
resolved configuration under ``"config"``, and that JSON file is itself a
valid config, so a run can be repeated exactly from its own output.

Exit codes: 0 on success, 1 for invalid input, 2 for numerical failure.
Artifacts are written only after the computation has succeeded.
"""
import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import Fredholm2DError, NumericalError, ParseError, ValidationError
from .geometry import NAMED_DOMAINS, named_domain
from .kernels import KERNELS, make_kernel, zero
from .nodes import fill_distance, generate_nodes, min_separation, save_nodes
from .problems import (PRESETS, FredholmProblem, LogisticSource, _as_field, dirichlet_square,
                       logistic_disk, neumann_disk, smooth_solution)
from .quadrature import (MAX_DEGREE, apply_rule, fitted_rule, reference_rule, save_rule,
                         stability_l1)
from .reconstruction import MAX_MLS_DEGREE, build_mls, inf_norm
from .solver import (assemble_classical, assemble_decoupled, interpolate, solve_linear,
                     solve_nonlinear, summary, write_solution_csv)
from .study import (StudyConfig, comparison_csv, comparison_summary, cost_comparison,
                    report_csv, run_study, timings_csv)

COMMANDS = ("nodes", "quadtest", "solve", "solve-nonlinear", "study", "compare")

SOLVE_PROBLEMS = ("manufactured_smooth", "dirichlet_square", "neumann_disk", "generic")
NONLINEAR_PROBLEMS = ("logistic_disk", "logistic_constant")
VARIANTS = ("classical", "decoupled")
FIT_MODES = ("nonnegative", "least_norm")
MANUFACTURED_KERNELS = ("gaussian", "separable", "zero")


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Key:
    """One config key: type tag, default (``REQUIRED`` if none) and checks."""

    kind: str
    default: object
    choices: tuple = ()
    low: float = None
    high: float = None
    positive: bool = False


REQUIRED = object()


def _common(**extra):
    keys = {
        "domain": Key("str", "unit_square", tuple(NAMED_DOMAINS)),
        "output_dir": Key("str", "out"),
    }
    keys.update(extra)
    return keys


_DISCRETE = {
    "variant": Key("str", "decoupled", VARIANTS),
    "h_Y": Key("float", 0.05, positive=True),
    "h_X": Key("float", 0.1, positive=True),
    "fit_degree": Key("int", 3, low=0, high=MAX_DEGREE),
    "mls_degree": Key("int", 1, low=0, high=MAX_MLS_DEGREE),
    "radius_factor": Key("float", 1.5, low=1.0),
    "fit_mode": Key("str", "nonnegative", FIT_MODES),
    "seed": Key("int", 0, low=0),
    "output_resolution": Key("int", 21, low=2, high=2000),
}

_KERNEL = {
    "kernel": Key("str", "gaussian", tuple(KERNELS)),
    "sigma": Key("float", 0.5, positive=True),
    "power": Key("float", 3.0, low=1.0),
    "frequency": Key("float", 2.0, low=0.0),
    "kernel_value": Key("float", 1.0),
    "lambda": Key("float", 1.0),
}

_STUDY = {
    "kernel": Key("str", "gaussian", tuple(KERNELS)),
    "sigma": Key("float", 0.5, positive=True),
    "lambda": Key("float", 1.0),
    "h_ladder": Key("floats", REQUIRED),
    "mls_degree": Key("int", 1, low=0, high=MAX_MLS_DEGREE),
    "fit_degree": Key("int", 3, low=0, high=MAX_DEGREE),
    "C_X": Key("float", 1.0, positive=True),
    "C_Y": Key("float", 0.5, positive=True),
    "radius_factor": Key("float", 1.5, low=1.0),
    "eval_resolution": Key("int", 2000, low=1),
    "seeds": Key("ints", [0]),
    "fit_mode": Key("str", "nonnegative", FIT_MODES),
    "seed_aggregate": Key("str", "rms", ("rms", "max")),
}

SCHEMAS = {
    "nodes": _common(
        h=Key("float", REQUIRED, positive=True),
        include_boundary=Key("bool", True),
        seed=Key("int", 0, low=0),
    ),
    "quadtest": _common(
        h_ladder=Key("floats", REQUIRED, positive=True),
        integrand=Key("str", "smooth", ("smooth", "sqrt_abs")),
        degree=Key("int", 3, low=0, high=MAX_DEGREE),
        mode=Key("str", "nonnegative", FIT_MODES),
        seed=Key("int", 0, low=0),
    ),
    "solve": _common(
        problem=Key("str", "manufactured_smooth", SOLVE_PROBLEMS),
        rhs=Key("float", 1.0),
        absorption=Key("float", 1.0, low=0.0),
        **_KERNEL, **_DISCRETE,
    ),
    "solve-nonlinear": _common(
        problem=Key("str", "logistic_disk", NONLINEAR_PROBLEMS),
        sigma=Key("float", 0.2, positive=True),
        rate=Key("float", 1.0),
        capacity=Key("float", 2.0),
        tol=Key("float", 1e-12, positive=True),
        maxit=Key("int", 50, low=1),
        **_DISCRETE,
    ),
    "study": _common(variant=Key("str", "decoupled", VARIANTS), **_STUDY),
    "compare": _common(**dict(_STUDY, mls_degree=Key("int", 3, low=0, high=MAX_MLS_DEGREE),
                              C_X=Key("float", 0.6, positive=True),
                              C_Y=Key("float", 0.25, positive=True)),
                       classical_C_Y=Key("float", 0.5, positive=True)),
}


@dataclass
class RunConfig:
    """A validated command configuration with every default filled in."""

    command: str
    params: dict = field(default_factory=dict)

    @property
    def output_dir(self):
        return self.params["output_dir"]

    def __getitem__(self, key):
        return self.params[key]

    def echo(self):
        """JSON-ready form; :func:`parse_config` reads it back unchanged."""
        return {"command": self.command, **self.params}


def _coerce(key, spec, value):
    kind = spec.kind
    if kind == "str":
        if not isinstance(value, str):
            raise ValidationError(key, f"{key} must be a string")
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ValidationError(key, f"{key} must be true or false")
    elif kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(key, f"{key} must be an integer")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(key, f"{key} must be a number")
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(key, f"{key} must be finite")
    elif kind in ("floats", "ints"):
        if not isinstance(value, list) or not value:
            raise ValidationError(key, f"{key} must be a nonempty list")
        inner = Key(kind[:-1], None)
        value = [_coerce(key, inner, v) for v in value]
    if spec.choices and value not in spec.choices:
        raise ValidationError(key, f"{key} must be one of {list(spec.choices)}, got {value!r}")
    items = value if isinstance(value, list) else [value]
    for v in items:
        if isinstance(v, str) or isinstance(v, bool):
            continue
        if spec.positive and not v > 0:
            raise ValidationError(key, f"{key} must be positive, got {v}")
        if spec.low is not None and v < spec.low:
            raise ValidationError(key, f"{key} must be >= {spec.low}, got {v}")
        if spec.high is not None and v > spec.high:
            raise ValidationError(key, f"{key} must be <= {spec.high}, got {v}")
    return value


def _check_consistency(cmd, p):
    """Cross-key rules that a per-key check cannot express."""
    if cmd == "solve":
        if p["lambda"] == 0.0:
            raise ValidationError("lambda", "lambda must be nonzero")
        fixed = {"dirichlet_square": "unit_square", "neumann_disk": "unit_disk"}
        if p["problem"] in fixed:
            if p["domain"] != fixed[p["problem"]]:
                raise ValidationError("domain", f"{p['problem']} lives on {fixed[p['problem']]}")
            if p["kernel"] != "gaussian":
                raise ValidationError("kernel", f"{p['problem']} uses the gaussian kernel")
            if p["lambda"] != 1.0:
                raise ValidationError("lambda", f"{p['problem']} is normalized to lambda = 1")
    if cmd == "solve-nonlinear" and p["problem"] == "logistic_disk" and p["domain"] != "unit_disk":
        raise ValidationError("domain", "logistic_disk lives on unit_disk")
    if cmd == "quadtest" and p["integrand"] == "sqrt_abs" and p["domain"] != "unit_square":
        raise ValidationError("integrand", "sqrt_abs has a closed-form integral only on unit_square")
    if cmd in ("study", "compare") and p["lambda"] == 0.0:
        raise ValidationError("lambda", "lambda must be nonzero")
    if "h_ladder" in p:
        ladder = p["h_ladder"]
        if cmd != "quadtest" and len(ladder) < 3:
            raise ValidationError("h_ladder", "a ladder needs at least 3 levels")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValidationError("h_ladder", "h_ladder must be strictly decreasing")


def _validate(cmd, table):
    if cmd not in SCHEMAS:
        raise ValidationError("command", f"unknown command {cmd!r}; known: {list(COMMANDS)}")
    if not isinstance(table, dict):
        raise ValidationError(cmd, f"[{cmd}] must be a table")
    schema = SCHEMAS[cmd]
    for key in table:
        if key not in schema:
            raise ValidationError(key, f"unknown key {key!r} in [{cmd}]")
    params = {}
    for key, spec in schema.items():
        if key in table:
            params[key] = _coerce(key, spec, table[key])
        elif spec.default is REQUIRED:
            raise ValidationError(key, f"missing required key {key!r} in [{cmd}]")
        else:
            params[key] = list(spec.default) if isinstance(spec.default, list) else spec.default
    _check_consistency(cmd, params)
    return RunConfig(cmd, params)


_LINE = re.compile(r"line (\d+)")


def parse_config(text):
    """Validated :class:`RunConfig` from TOML text or a JSON summary.

    TOML input holds exactly one table named after a command. JSON input is
    either a summary written by this tool (its ``"config"`` entry is used)
    or a bare ``{"command": ..., key: value}`` object.

    Raises
    ------
    ParseError
        Malformed text; ``lineno`` points at the offending line.
    ValidationError
        Unknown command or key, missing required key, value out of range.
    """
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno) from None
        data = data.get("config", data)
        if not isinstance(data, dict) or "command" not in data:
            raise ValidationError("command", "JSON config needs a 'command' entry")
        data = dict(data)
        return _validate(data.pop("command"), data)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE.search(str(exc))
        lineno = getattr(exc, "lineno", None) or (int(m.group(1)) if m else None)
        raise ParseError(str(exc).split(" (at ")[0], lineno) from None
    stray = [k for k, v in data.items() if not isinstance(v, dict)]
    if stray:
        raise ValidationError(stray[0], f"key {stray[0]!r} must sit inside a command table")
    if len(data) != 1:
        raise ValidationError("command", f"expected exactly one command table, found {len(data)}")
    (cmd, table), = data.items()
    return _validate(cmd, table)


# ---------------------------------------------------------------------------
# commands; each returns {filename: text} so nothing is written on failure
# ---------------------------------------------------------------------------

def _dump_json(data):
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _grid_points(domain, resolution):
    x0, y0, x1, y1 = domain.bounding_box
    gx = np.linspace(x0, x1, resolution)
    gy = np.linspace(y0, y1, resolution)
    pts = np.stack(np.meshgrid(gx, gy, indexing="xy"), axis=-1).reshape(-1, 2)
    return pts[domain.inside(pts)]


def _text_of(writer, *args):
    """Run a path-based writer into a string via a temporary file."""
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "out")
        writer(path, *args)
        with open(path, newline="") as fh:
            return fh.read()


def run_nodes(cfg):
    dom = named_domain(cfg["domain"])
    nodes = generate_nodes(dom, cfg["h"], seed=cfg["seed"], include_boundary=cfg["include_boundary"])
    info = {
        "config": cfg.echo(),
        "n_nodes": len(nodes),
        "n_boundary": int(nodes.boundary_flags.sum()),
        "min_separation": min_separation(nodes),
        "fill_distance": fill_distance(nodes, dom),
    }
    return {"nodes.txt": _text_of(save_nodes, nodes), "nodes.json": _dump_json(info)}


def _sqrt_abs(points):
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.sqrt(np.abs(p[:, 0] - 0.5))


# integral of |x - 1/2|^(1/2) over the unit square
SQRT_ABS_EXACT = 2.0 * (2.0 / 3.0) * 0.5 ** 1.5

QUADTEST_FIELDS = ("h", "n_nodes", "error", "eoc", "w_l1", "min_weight")


def run_quadtest(cfg):
    dom = named_domain(cfg["domain"])
    if cfg["integrand"] == "smooth":
        f, exact = smooth_solution, apply_rule(reference_rule(dom, 1e-13), smooth_solution)
    else:
        f, exact = _sqrt_abs, SQRT_ABS_EXACT
    rows, rule = [], None
    for h in cfg["h_ladder"]:
        nodes = generate_nodes(dom, h, seed=cfg["seed"])
        rule = fitted_rule(dom, nodes, cfg["degree"], mode=cfg["mode"])
        rows.append({"h": h, "n_nodes": len(rule), "error": abs(apply_rule(rule, f) - exact),
                     "eoc": math.nan, "w_l1": stability_l1(rule),
                     "min_weight": float(rule.weights.min())})
    for prev, cur in zip(rows, rows[1:]):
        if prev["error"] > 0 and cur["error"] > 0:
            cur["eoc"] = math.log(prev["error"] / cur["error"]) / math.log(prev["h"] / cur["h"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(QUADTEST_FIELDS)
    for r in rows:
        w.writerow(["" if isinstance(r[k], float) and math.isnan(r[k]) else repr(r[k])
                    for k in QUADTEST_FIELDS])
    info = {
        "config": cfg.echo(),
        "area": dom.area,
        "nominal_order": rule.nominal_order,
        "exact_integral": exact,
        "levels": [{k: (None if isinstance(v, float) and math.isnan(v) else v)
                    for k, v in r.items()} for r in rows],
    }
    return {"quadtest.csv": buf.getvalue(), "quadtest.json": _dump_json(info),
            "rule.txt": _text_of(save_rule, rule)}


def _kernel_of(cfg):
    name = cfg["kernel"]
    if name == "gaussian":
        return make_kernel(name, sigma=cfg["sigma"])
    if name == "poly_decay":
        return make_kernel(name, sigma=cfg["sigma"], power=cfg["power"])
    if name == "oscillatory":
        return make_kernel(name, sigma=cfg["sigma"], frequency=cfg["frequency"])
    if name == "constant":
        return make_kernel(name, value=cfg["kernel_value"])
    return make_kernel(name)


def _discretize(cfg, dom):
    Y = generate_nodes(dom, cfg["h_Y"], seed=cfg["seed"])
    rule = fitted_rule(dom, Y, cfg["fit_degree"], mode=cfg["fit_mode"])
    recon = None
    if cfg["variant"] == "decoupled":
        X = generate_nodes(dom, cfg["h_X"], seed=cfg["seed"] + 7919)
        recon = build_mls(X, Y, cfg["mls_degree"], cfg["radius_factor"])
    return rule, recon


def _solution_outputs(cfg, dom, sol, exact=None, extra=None):
    pts = _grid_points(dom, cfg["output_resolution"])
    info = {"config": cfg.echo(), **summary(sol)}
    if sol.recon is not None:
        info["R_inf"] = inf_norm(sol.recon)
    info["w_l1"] = stability_l1(sol.rule)
    if exact is not None and len(pts):
        info["err_sup_output_grid"] = float(np.abs(interpolate(sol, pts) - exact(pts)).max())
    if extra:
        info.update(extra)
    return {"solution.csv": _text_of(write_solution_csv, sol, pts), "summary.json": _dump_json(info)}


def run_solve(cfg):
    dom = named_domain(cfg["domain"])
    rule, recon = _discretize(cfg, dom)
    problem = cfg["problem"]
    exact = None
    if problem == "manufactured_smooth":
        _check_manufactured_kernel(cfg)
        case = PRESETS[problem](domain=cfg["domain"], kernel=cfg["kernel"], sigma=cfg["sigma"],
                                lam=cfg["lambda"])
        prob, exact = case.problem, case.u_exact
    elif problem == "dirichlet_square":
        prob = dirichlet_square(cfg["sigma"])
        exact = prob.exact
    elif problem == "neumann_disk":
        prob = neumann_disk(rule, cfg["sigma"], cfg["absorption"])
    else:
        prob = FredholmProblem(cfg["lambda"], _kernel_of(cfg), _as_field(cfg["rhs"]), dom)
    if recon is None:
        system = assemble_classical(prob.lam, prob.kernel, prob.rhs, rule)
    else:
        system = assemble_decoupled(prob.lam, prob.kernel, prob.rhs, rule, recon)
    sol = solve_linear(system)
    return _solution_outputs(cfg, dom, sol, exact)


def run_solve_nonlinear(cfg):
    dom = named_domain(cfg["domain"])
    rule, recon = _discretize(cfg, dom)
    if cfg["problem"] == "logistic_disk":
        prob = logistic_disk(rule, cfg["sigma"], cfg["rate"])
        lam, kernel, source = prob.lam, prob.kernel, prob.rhs
        exact = None
    else:
        lam, kernel = 1.0, zero()
        source = LogisticSource(_as_field(cfg["rate"]), _as_field(cfg["capacity"]))
        # with k = 0 the nonzero fixed point of u = r u (a - u) is a - 1/r
        exact = _as_field(cfg["capacity"] - 1.0 / cfg["rate"]) if cfg["rate"] else None
    sol = solve_nonlinear(lam, kernel, source, source.du, rule, recon,
                          tol=cfg["tol"], maxit=cfg["maxit"])
    return _solution_outputs(cfg, dom, sol, exact)


def _study_config(cfg, variant, C_Y=None):
    return StudyConfig(
        case="manufactured_smooth",
        h_ladder=cfg["h_ladder"],
        C_X=cfg["C_X"],
        C_Y=cfg["C_Y"] if C_Y is None else C_Y,
        mls_degree=cfg["mls_degree"],
        fit_degree=cfg["fit_degree"],
        radius_factor=cfg["radius_factor"],
        eval_resolution=cfg["eval_resolution"],
        seeds=cfg["seeds"],
        variant=variant,
        fit_mode=cfg["fit_mode"],
        seed_aggregate=cfg["seed_aggregate"],
        case_params=dict(domain=cfg["domain"], kernel=cfg["kernel"], sigma=cfg["sigma"],
                         lam=cfg["lambda"]),
    )


def _check_manufactured_kernel(cfg):
    if cfg["kernel"] not in MANUFACTURED_KERNELS:
        raise ValidationError("kernel", f"the manufactured case takes {list(MANUFACTURED_KERNELS)}")


def run_study_command(cfg):
    _check_manufactured_kernel(cfg)
    report = run_study(_study_config(cfg, cfg["variant"]))
    if not any(lv.ok for lv in report.levels):
        raise NumericalError("every level of the study failed: " + report.levels[0].status)
    info = report.summary()
    info["study_config"] = info.pop("config")
    info["config"] = cfg.echo()
    return {"report.csv": report_csv(report), "report_timings.csv": timings_csv(report),
            "report.json": _dump_json(info)}


def run_compare(cfg):
    _check_manufactured_kernel(cfg)
    rows = cost_comparison("manufactured_smooth", cfg["h_ladder"],
                           _study_config(cfg, "decoupled"),
                           _study_config(cfg, "classical", cfg["classical_C_Y"]))
    info = {"config": cfg.echo(), "summary": comparison_summary(rows),
            "rows": [{k: (None if isinstance(v, float) and math.isnan(v) else v)
                      for k, v in r.items()} for r in rows]}
    return {"compare.csv": comparison_csv(rows), "compare.json": _dump_json(info)}


RUNNERS = {
    "nodes": run_nodes,
    "quadtest": run_quadtest,
    "solve": run_solve,
    "solve-nonlinear": run_solve_nonlinear,
    "study": run_study_command,
    "compare": run_compare,
}


def execute(cfg):
    """Run a parsed config; returns ``{filename: text}`` without writing."""
    return RUNNERS[cfg.command](cfg)


def write_artifacts(output_dir, files):
    os.makedirs(output_dir, exist_ok=True)
    paths = []
    for name, text in files.items():
        path = os.path.join(output_dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError("argv", message)


def _build_parser():
    parser = _Parser(prog="fredholm2d", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", required=True, help="TOML config or JSON summary")
    return parser


def main(argv=None):
    """Entry point; returns the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
        if args.command is None:
            raise ValidationError("command", f"a command is required: {list(COMMANDS)}")
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError("config", f"cannot read config: {exc}") from None
        cfg = parse_config(text)
        if cfg.command != args.command:
            raise ValidationError("command", f"config is for {cfg.command!r}, not {args.command!r}")
        files = execute(cfg)
        if cfg.command == "quadtest":
            sys.stdout.write(files["quadtest.csv"].replace("\r\n", "\n"))
        for path in write_artifacts(cfg.output_dir, files):
            print(path)
        return 0
    except NumericalError as exc:
        print(f"fredholm2d: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"fredholm2d: invalid input [{exc.key}]: {exc}", file=sys.stderr)
        return 1
    except Fredholm2DError as exc:
        print(f"fredholm2d: invalid input: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
