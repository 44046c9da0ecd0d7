"""Convergence-study harness for the classical and decoupled methods.

A study walks a ladder of ``h`` values; level ``i`` uses solution nodes with
spacing ``h_X = C_X h`` and quadrature nodes with ``h_Y = C_Y h``. Each
level is repeated for every seed and the errors are combined (root mean
square by default), because the random node sets make single-seed errors,
and the orders computed from them, noisy.
"""
from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math
import time
from typing import Optional, Sequence

import numpy as np

from .errors import Fredholm2DError, NonpositiveInput, ValidationError
from .nodes import generate_nodes, interior_samples
from .problems import ManufacturedCase, PRESETS
from .quadrature import fitted_rule, stability_l1
from .reconstruction import build_mls, inf_norm
from .solver import assemble_classical, assemble_decoupled, interpolate, solve_linear

REPORT_FIELDS = ("level", "h", "h_X", "h_Y", "n_X", "n_Y", "err_sup", "eoc", "cond_inf",
                 "w_l1", "R_inf", "status")
TIMING_FIELDS = ("level", "assemble_seconds", "solve_seconds")
CASE_PRESETS = ("manufactured_smooth",)


@dataclass
class StudyConfig:
    """Parameters of one refinement study.

    ``case`` is a :class:`ManufacturedCase` or the name of a manufactured
    preset, in which case ``case_params`` (domain, kernel, sigma, lam) are
    passed to it. ``variant`` selects the classical method (solution on the
    quadrature nodes, ``h_X = h_Y``) or the decoupled one.
    """

    case: object = "manufactured_smooth"
    h_ladder: Sequence[float] = (0.2, 0.1, 0.05)
    C_X: float = 1.0
    C_Y: float = 0.5
    mls_degree: int = 1
    fit_degree: int = 3
    radius_factor: float = 1.5
    eval_resolution: int = 2000
    seeds: Sequence[int] = (0,)
    expected_order_quadrature: Optional[float] = None
    expected_order_reconstruction: Optional[float] = None
    assumed_smoothness: Optional[float] = None
    variant: str = "decoupled"
    fit_mode: str = "nonnegative"
    seed_aggregate: str = "rms"
    case_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h_ladder = [float(h) for h in self.h_ladder]
        self.seeds = [int(s) for s in self.seeds]
        if len(self.h_ladder) < 3:
            raise ValidationError("h_ladder", "a ladder needs at least 3 levels")
        if any(h <= 0 for h in self.h_ladder):
            raise ValidationError("h_ladder", "spacings must be positive")
        if any(b >= a for a, b in zip(self.h_ladder, self.h_ladder[1:])):
            raise ValidationError("h_ladder", "h_ladder must be strictly decreasing")
        for key in ("C_X", "C_Y"):
            if not getattr(self, key) > 0:
                raise ValidationError(key, f"{key} must be positive")
        if self.variant not in ("classical", "decoupled"):
            raise ValidationError("variant", f"unknown variant {self.variant!r}")
        if self.seed_aggregate not in ("rms", "max"):
            raise ValidationError("seed_aggregate", "seed_aggregate must be 'rms' or 'max'")
        if not self.seeds:
            raise ValidationError("seeds", "at least one seed is required")
        if self.eval_resolution < 1:
            raise ValidationError("eval_resolution", "eval_resolution must be positive")
        if isinstance(self.case, str) and self.case not in CASE_PRESETS:
            raise ValidationError("case", f"unknown study case {self.case!r}; known: {list(CASE_PRESETS)}")
        if self.expected_order_quadrature is None:
            self.expected_order_quadrature = self.fit_degree + 1
        if self.expected_order_reconstruction is None:
            self.expected_order_reconstruction = self.mls_degree + 1

    @property
    def expected_order(self):
        if self.variant == "classical":
            return self.expected_order_quadrature
        return min(self.expected_order_quadrature, self.expected_order_reconstruction)

    def resolve_case(self):
        if isinstance(self.case, ManufacturedCase):
            return self.case
        return PRESETS[self.case](**self.case_params)

    def echo(self):
        """JSON-ready copy of the configuration (the case by name)."""
        data = asdict(self) if not isinstance(self.case, ManufacturedCase) else {
            k: v for k, v in asdict(self).items() if k != "case"}
        data["case"] = self.case if isinstance(self.case, str) else "custom"
        return data


@dataclass
class LevelResult:
    level: int
    h: float
    h_X: float
    h_Y: float
    n_X: int = 0
    n_Y: int = 0
    err_sup: float = math.nan
    eoc: float = math.nan
    cond_inf: float = math.nan
    w_l1: float = math.nan
    R_inf: float = math.nan
    assemble_seconds: float = 0.0
    solve_seconds: float = 0.0
    status: str = "ok"

    @property
    def ok(self):
        return self.status == "ok"


@dataclass
class ConvergenceReport:
    config: StudyConfig
    levels: list

    @property
    def errors(self):
        return [lv.err_sup for lv in self.levels]

    @property
    def eocs(self):
        return [lv.eoc for lv in self.levels]

    @property
    def terminal_eoc(self):
        return self.levels[-1].eoc

    def cond_values(self):
        return [lv.cond_inf for lv in self.levels]

    def to_csv(self):
        return report_csv(self)

    def summary(self):
        return {
            "config": self.config.echo(),
            "expected_order": self.config.expected_order,
            "terminal_eoc": _json_float(self.terminal_eoc),
            "levels": [{k: _json_float(getattr(lv, k)) for k in REPORT_FIELDS}
                       for lv in self.levels],
        }


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def estimate_eoc(errors, hs):
    """``eoc_i = log(e_{i-1} / e_i) / log(h_{i-1} / h_i)`` for ``i >= 1``.

    Raises
    ------
    NonpositiveInput
        Unequal or short inputs, or nonpositive entries.
    """
    errors = [float(e) for e in errors]
    hs = [float(h) for h in hs]
    if len(errors) != len(hs) or len(errors) < 2:
        raise NonpositiveInput("errors and hs need equal lengths >= 2")
    if any(not e > 0 for e in errors) or any(not h > 0 for h in hs):
        raise NonpositiveInput()
    return [math.log(errors[i - 1] / errors[i]) / math.log(hs[i - 1] / hs[i])
            for i in range(1, len(errors))]


def _run_level(case, cfg, level, h, seed, eval_pts, exact):
    dom = case.problem.domain
    prob = case.problem
    h_y = cfg.C_Y * h
    h_x = h_y if cfg.variant == "classical" else cfg.C_X * h
    out = LevelResult(level, h, h_x, h_y)
    t0 = time.perf_counter()
    Y = generate_nodes(dom, h_y, seed=seed)
    rule = fitted_rule(dom, Y, cfg.fit_degree, mode=cfg.fit_mode)
    if cfg.variant == "classical":
        system = assemble_classical(prob.lam, prob.kernel, prob.rhs, rule)
        out.R_inf = 1.0
        out.n_X = len(Y)
    else:
        X = generate_nodes(dom, h_x, seed=seed + 7919)
        recon = build_mls(X, Y, cfg.mls_degree, cfg.radius_factor)
        system = assemble_decoupled(prob.lam, prob.kernel, prob.rhs, rule, recon)
        out.R_inf = inf_norm(recon)
        out.n_X = len(X)
    out.n_Y = len(Y)
    out.w_l1 = stability_l1(rule)
    t1 = time.perf_counter()
    sol = solve_linear(system)
    t2 = time.perf_counter()
    out.err_sup = float(np.abs(interpolate(sol, eval_pts) - exact).max())
    out.cond_inf = sol.cond_inf
    out.assemble_seconds = t1 - t0
    out.solve_seconds = t2 - t1
    return out


def run_study(config):
    """Run every level of ``config``; failed levels are recorded, not fatal.

    Per level the reported error is the root mean square (or the maximum,
    see ``seed_aggregate``) over the seeds; the other diagnostics come from
    the seed with the largest error, timings are summed.
    """
    case = config.resolve_case()
    dom = case.problem.domain
    eval_pts = interior_samples(dom, config.eval_resolution, seed=12345)
    exact = case.u_exact(eval_pts)
    levels = []
    for i, h in enumerate(config.h_ladder):
        worst = None
        t_asm = t_sol = 0.0
        errs = []
        try:
            for seed in config.seeds:
                res = _run_level(case, config, i, h, seed, eval_pts, exact)
                t_asm += res.assemble_seconds
                t_sol += res.solve_seconds
                errs.append(res.err_sup)
                if worst is None or res.err_sup > worst.err_sup:
                    worst = res
            worst.assemble_seconds, worst.solve_seconds = t_asm, t_sol
            if config.seed_aggregate == "rms":
                worst.err_sup = math.sqrt(math.fsum(e * e for e in errs) / len(errs))
        except Fredholm2DError as exc:
            h_y = config.C_Y * h
            h_x = h_y if config.variant == "classical" else config.C_X * h
            worst = LevelResult(i, h, h_x, h_y, status=f"failed: {type(exc).__name__}: {exc}")
        levels.append(worst)
    for prev, cur in zip(levels, levels[1:]):
        if prev.ok and cur.ok and prev.err_sup > 0 and cur.err_sup > 0:
            cur.eoc = estimate_eoc([prev.err_sup, cur.err_sup], [prev.h, cur.h])[0]
    return ConvergenceReport(config, levels)


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def report_csv(report):
    """RFC 4180 CSV of the deterministic per-level fields (no timings)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(REPORT_FIELDS)
    for lv in report.levels:
        w.writerow([_fmt(getattr(lv, k)) for k in REPORT_FIELDS])
    return buf.getvalue()


def timings_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(TIMING_FIELDS)
    for lv in report.levels:
        w.writerow([_fmt(getattr(lv, k)) for k in TIMING_FIELDS])
    return buf.getvalue()


def write_report(report, output_dir, stem="report"):
    """Write ``<stem>.csv``, ``<stem>_timings.csv`` and ``<stem>.json``."""
    import os

    os.makedirs(output_dir, exist_ok=True)
    paths = {}
    for suffix, text in (("csv", report_csv(report)), ("_timings.csv", timings_csv(report))):
        path = os.path.join(output_dir, stem + ("." + suffix if suffix == "csv" else suffix))
        with open(path, "w", newline="") as fh:
            fh.write(text)
        paths[suffix.strip("_.")] = path
    path = os.path.join(output_dir, stem + ".json")
    with open(path, "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["json"] = path
    return paths


def cost_comparison(case, h_ladder, decoupled_config, classical_config):
    """Error versus linear-system size for both methods on one case.

    The two configs must describe the same ``case``; their ``h_ladder`` is
    replaced by the shared one. Returns a list of row dicts with
    ``method, level, h, error, solve_seconds, system_size`` and, per
    decoupled row, ``matches_classical_best`` (error at most the finest
    classical error).
    """
    rows = []
    reports = {}
    for name, cfg in (("classical", classical_config), ("decoupled", decoupled_config)):
        params = {k: v for k, v in asdict(cfg).items() if k not in ("case", "h_ladder")}
        params["variant"] = name
        reports[name] = run_study(StudyConfig(case=case, h_ladder=h_ladder, **params))
    ok_classical = [lv for lv in reports["classical"].levels if lv.ok]
    best = ok_classical[-1].err_sup if ok_classical else math.nan
    best_size = ok_classical[-1].n_X if ok_classical else 0
    for name in ("classical", "decoupled"):
        for lv in reports[name].levels:
            rows.append({
                "method": name,
                "level": lv.level,
                "h": lv.h,
                "error": lv.err_sup,
                "solve_seconds": lv.solve_seconds,
                "system_size": lv.n_X,
                "matches_classical_best": bool(lv.ok and lv.err_sup <= best),
                "size_ratio": lv.n_X / best_size if best_size else math.nan,
            })
    return rows


def comparison_summary(rows):
    """Smallest decoupled system reaching the finest classical error, as a size ratio."""
    hits = [r for r in rows if r["method"] == "decoupled" and r["matches_classical_best"]]
    if not hits:
        return {"reached": False, "size_ratio": None}
    best = min(hits, key=lambda r: r["system_size"])
    return {"reached": True, "size_ratio": best["size_ratio"], "level": best["level"]}


COMPARE_FIELDS = ("method", "level", "h", "error", "system_size", "matches_classical_best",
                  "size_ratio")


def comparison_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(COMPARE_FIELDS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in COMPARE_FIELDS])
    return buf.getvalue()
