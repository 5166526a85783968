"""Configuration-driven scenario runner.

A config file is a list of ``[section]`` headers followed by ``key = value``
lines.  ``[suite]`` holds global settings; each ``[scenario NAME]`` section
describes one run and the checks to evaluate on it.  Check grids are given as
``<check>.<param> = v1, v2, ...`` keys inside the scenario.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from . import estimates as est
from .constants import critical_time, harnack_constants
from .core import (
    EQUATION_FORMS,
    WITH_INVERSE_M,
    WITHOUT_INVERSE_M,
    FdeParams,
    PreconditionError,
    Trajectory,
    lp_norm_ball,
)
from .estimates import EstimateReport, make_report, pair_tolerance
from .exact import separable_profile, vss
from .solver import SolverError, SolverOptions, solve_radial_dirichlet

CSV_COLUMNS = (
    "scenario_id", "estimate_name", "variant", "t", "s", "R", "R0", "p",
    "lhs", "rhs", "margin", "holds", "tolerance", "notes",
)
DATA_KINDS = ("bump", "separable", "vss-sample", "custom-table")
OUT_ENV = "FDE_LAB_OUT"
# checks judged against fixed thresholds; no fine/coarse widening
FIXED_THRESHOLD_CHECKS = frozenset({"obstruction", "extinction_oracle", "structural"})


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, path: str = "<config>"):
        self.line = line
        where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


# ------------------------------------------------------------------ config


def parse_sections(text: str, path: str = "<config>") -> list[tuple[str, dict, dict]]:
    """Split config text into ``(header, values, line_numbers)`` triples."""
    sections: list[tuple[str, dict, dict]] = []
    current: Optional[tuple[str, dict, dict]] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno, path)
            current = (line[1:-1].strip(), {}, {})
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        if current is None:
            raise ConfigError("key outside of any section", lineno, path)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno, path)
        if key in current[1]:
            raise ConfigError(f"duplicate key {key!r}", lineno, path)
        current[1][key] = value
        current[2][key] = lineno
    return sections


@dataclass(frozen=True)
class Geometry:
    R: float = 1.0
    R0: float = 3.0
    lam: float = 6.0
    domain: float = 6.0


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    params: FdeParams
    data: str
    data_args: dict
    geometry: Geometry
    solver: SolverOptions
    checks: tuple
    grids: dict
    output: str = ""


@dataclass(frozen=True)
class SuiteConfig:
    name: str
    output: str
    workers: int
    scenarios: tuple
    text_hash: str
    base_dir: str


def _floats(value: str) -> list[float]:
    return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]


KNOWN_CHECKS: dict[str, Callable] = {}


def _register(name: str):
    def wrap(fn):
        KNOWN_CHECKS[name] = fn
        return fn

    return wrap


def _scenario_from_section(name: str, values: dict, lines: dict, path: str, grid_override,
                           default_out: str) -> ScenarioConfig:
    vals = dict(values)

    def take(key, conv=float, default=None, required=False):
        if key not in vals:
            if required:
                raise ConfigError(f"scenario {name!r} is missing {key!r}", None, path)
            return default
        raw = vals.pop(key)
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})", lines[key], path) from None

    m = take("m", required=True)
    d = take("d", int, required=True)
    form = take("equation_form", str, WITH_INVERSE_M)
    if form not in EQUATION_FORMS:
        raise ConfigError(f"unknown equation_form {form!r}", lines.get("equation_form"), path)
    try:
        params = FdeParams(m, d, form)
    except PreconditionError as exc:
        raise ConfigError(str(exc), lines.get("m"), path) from None
    data = take("data", str, "bump")
    if data not in DATA_KINDS:
        raise ConfigError(f"unknown data family {data!r}", lines.get("data"), path)
    R = take("R", default=1.0)
    domain = take("domain", default=6 * R)
    geom = Geometry(R=R, R0=take("R0", default=3 * R), lam=take("lambda", default=domain / R),
                    domain=domain)
    data_args = {}
    for key in ("height", "support", "T1", "T", "file", "centers"):
        if key in vals:
            data_args[key] = vals.pop(key)
    n_cells = take("n_cells", int, 400)
    if grid_override:
        n_cells = int(grid_override)
    horizon = take("horizon", default=math.inf)
    try:
        solver = SolverOptions(
            n_cells=n_cells,
            boundary=take("boundary", default=0.0),
            horizon=horizon,
            max_sup_change=take("max_sup_change", default=SolverOptions.max_sup_change),
            extinction_threshold=take("extinction_threshold",
                                      default=SolverOptions.extinction_threshold),
        )
    except ValueError as exc:
        raise ConfigError(f"scenario {name!r}: {exc}", None, path) from None
    check_line = lines.get("checks")
    checks = tuple(c.strip() for c in take("checks", str, "").split(",") if c.strip())
    for c in checks:
        if c not in KNOWN_CHECKS:
            raise ConfigError(f"unknown check {c!r}", check_line, path)
    grids = {}
    for key in list(vals):
        if "." in key:
            check, param = key.split(".", 1)
            if check not in KNOWN_CHECKS:
                raise ConfigError(f"grid for unknown check {check!r}", lines[key], path)
            raw = vals.pop(key)
            try:
                grids[(check, param)] = tuple(_floats(raw))
            except ValueError:
                raise ConfigError(f"bad number list for {key!r}: {raw!r}", lines[key], path) from None
    output = take("output", str, default_out)
    if vals:
        key = sorted(vals, key=lambda k: lines[k])[0]
        raise ConfigError(f"unknown key {key!r} in scenario {name!r}", lines[key], path)
    if data == "bump" and float(data_args.get("support", R)) > R * (1 + 1e-12):
        raise ConfigError(f"scenario {name!r}: bump support exceeds R", None, path)
    if geom.R0 > domain * (1 + 1e-12):
        raise ConfigError(f"scenario {name!r}: R0 exceeds the domain radius", None, path)
    return ScenarioConfig(name, params, data, data_args, geom, solver, checks, grids, output)


def load_config(path: Union[str, Path], grid: Optional[int] = None) -> SuiteConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("file not found", None, str(path))
    text = path.read_text()
    return parse_config(text, str(path), grid, base_dir=str(path.parent))


def parse_config(text: str, path: str = "<config>", grid: Optional[int] = None,
                 base_dir: str = ".") -> SuiteConfig:
    sections = parse_sections(text, path)
    suite = {"name": "suite", "output": "fde-lab-out", "workers": "1"}
    scenarios = []
    seen = set()
    for header, values, lines in sections:
        if header == "suite":
            for k, v in values.items():
                if k not in suite:
                    raise ConfigError(f"unknown suite key {k!r}", lines[k], path)
                suite[k] = v
            continue
        kind, _, name = header.partition(" ")
        if kind != "scenario" or not name.strip():
            raise ConfigError(f"unknown section [{header}]", None, path)
        name = name.strip()
        if name in seen:
            raise ConfigError(f"duplicate scenario {name!r}", None, path)
        seen.add(name)
        scenarios.append(_scenario_from_section(name, values, lines, path, grid, suite["output"]))
    try:
        workers = int(suite["workers"])
    except ValueError:
        raise ConfigError("workers must be an integer", None, path) from None
    digest = hashlib.sha256(text.encode()).hexdigest()
    return SuiteConfig(suite["name"], suite["output"], max(workers, 1), tuple(scenarios), digest,
                       base_dir)


def bundled_config_path(name: str = "canonical-suite") -> Path:
    return Path(__file__).parent / "data" / f"{name}.cfg"


# -------------------------------------------------------------- initial data


def initial_data(sc: ScenarioConfig, base_dir: str = ".") -> Callable[[np.ndarray], np.ndarray]:
    args, params, g = sc.data_args, sc.params, sc.geometry
    if sc.data == "bump":
        height = float(args.get("height", 1.0))
        support = float(args.get("support", g.R))
        floor = sc.solver.boundary

        def bump(r):
            return floor + height * np.clip(1 - (np.asarray(r) / support) ** 2, 0.0, None) ** 2

        return bump
    if sc.data == "separable":
        T1 = float(args.get("T1", 1.0))
        prof = separable_profile(params.with_form(WITHOUT_INVERSE_M), R0=g.domain)
        sol = prof.solution(T1, params.equation_form)
        return lambda r: sol(0.0, r)
    if sc.data == "custom-table":
        if "file" not in args:
            raise ConfigError(f"scenario {sc.id!r}: custom-table needs 'file'")
        table_path = Path(base_dir) / args["file"]
        if not table_path.exists():
            raise ConfigError(f"data file {table_path} not found")
        table = np.loadtxt(table_path, delimiter=",", ndmin=2, comments="#")
        r_tab, u_tab = table[:, 0], table[:, 1]
        return lambda r: np.interp(r, r_tab, u_tab, right=0.0)
    raise ConfigError(f"data family {sc.data!r} has no solver data")


# ------------------------------------------------------------------ checks


@dataclass
class ScenarioContext:
    config: ScenarioConfig
    traj: Optional[Trajectory]
    companion: Optional[Trajectory] = None
    base_dir: str = "."

    @property
    def params(self) -> FdeParams:
        return self.config.params

    @property
    def geom(self) -> Geometry:
        return self.config.geometry

    def grid(self, check: str, param: str, default) -> tuple:
        return self.config.grids.get((check, param), tuple(default))

    @property
    def end_time(self) -> float:
        if self.traj.extinction is not None:
            return self.traj.extinction.T_est
        return float(self.traj.times[-1])

    @property
    def mass(self) -> float:
        return lp_norm_ball(self.traj.snapshots[0], self.traj.grid, 1, self.geom.R)

    def t_star(self) -> float:
        g = self.geom
        return critical_time(self.params, g.R, g.R0 / (2 * g.R), self.mass)


def _p_c(params: FdeParams) -> float:
    return params.d * (1 - params.m) / 2


def _smoothing_p(params: FdeParams) -> float:
    m = params.m
    p = 2.0
    if m <= params.m_c:
        p = max(p, _p_c(params) + 0.5)
    if m < 0:
        p = max(p, 1.5 * (1 - m))
    return p


@_register("flux_lemma")
def _flux(ctx):
    g, T = ctx.geom, ctx.end_time
    return [est.check_flux_lemma(ctx.traj, g.R, g.R0, f * T)
            for f in ctx.grid("flux_lemma", "s", (0.0, 0.25, 0.5))]


@_register("critical_time")
def _crit(ctx):
    return [est.check_critical_time(ctx.traj, ctx.geom.R, ctx.geom.R0)]


@_register("positivity")
def _positivity(ctx):
    g, ts = ctx.geom, ctx.t_star()
    out = [est.check_positivity_lower(ctx.traj, f * ts, g.R, g.R0)
           for f in ctx.grid("positivity", "t", (0.2, 0.6, 1.0))]
    if ctx.params.m > ctx.params.m_c and math.isclose(g.R0, 3 * g.R):
        out += [est.check_positivity_lower(ctx.traj, f * ts, g.R, g.R0, "good-range")
                for f in ctx.grid("positivity", "t_good", (0.2, 0.6, 0.99))]
    return out


@_register("ac_lower")
def _ac(ctx):
    g, ts = ctx.geom, ctx.t_star()
    variants = ["T-form"]
    if ctx.params.d >= 3 and ctx.params.m < ctx.params.m_c:
        variants.append("pc-form")
    return [est.check_ac_lower(ctx.traj, f * ts, g.R, v, g.R0)
            for v in variants for f in ctx.grid("ac_lower", "t", (0.1, 0.3, 0.5, 0.9))]


@_register("extinction")
def _extinction(ctx):
    params = ctx.params
    default = [_p_c(params)] if params.m < params.m_c else []
    if 2.0 > max(_p_c(params), 1.0):
        default.append(2.0)
    T = ctx.config.data_args.get("T1") if ctx.config.data == "separable" else None
    out = []
    for p in ctx.grid("extinction", "p", default):
        out += est.check_extinction_bounds(ctx.traj, p, ctx.geom.R,
                                           T=float(T) if T is not None else None)
    return out


@_register("extinction_oracle")
def _extinction_oracle(ctx):
    if ctx.config.data != "separable":
        raise PreconditionError("the extinction oracle needs separable data")
    T1 = float(ctx.config.data_args.get("T1", 1.0))
    ext = ctx.traj.extinction
    if ext is None:
        raise PreconditionError("run did not reach extinction")
    return [
        make_report("extinction_oracle", abs(ext.T_est / T1 - 1), 0.02, est.LE,
                    {"t": ext.T_est}, "relative-error", tolerance=0.0),
        make_report("extinction_oracle", ext.fit_quality, 1e-3, est.LE, {}, "fit-quality",
                    tolerance=0.0),
    ]


@_register("lp_evolution")
def _lp(ctx):
    params, g = ctx.params, ctx.geom
    end = float(ctx.traj.times[-1])
    if 0 < params.m < 1:
        default_p = sorted({1.0, 2.0, max(1.0, _p_c(params) + 0.5)})
    else:
        default_p = [2.0]
    ps = ctx.grid("lp_evolution", "p", default_p)
    s_f = ctx.grid("lp_evolution", "s", (0.0, 0.25, 0.0, 0.5))
    t_f = ctx.grid("lp_evolution", "t", (0.25, 0.5, 0.5, 0.5))
    R0 = min(2 * g.R, g.domain)
    out = [est.check_lp_evolution(ctx.traj, None, p, g.R, R0, a * end, b * end)
           for p in ps for a, b in zip(s_f, t_f)]
    if ctx.companion is not None and 0 < params.m < 1:
        for a, b in zip(s_f, t_f):
            out.append(est.check_lp_evolution(ctx.traj, ctx.companion, 1.0, g.R, R0, b * end, a * end))
    return out


@_register("smoothing")
def _smoothing(ctx):
    g = ctx.geom
    p = ctx.grid("smoothing", "p", (_smoothing_p(ctx.params),))[0]
    end = float(ctx.traj.times[-1])
    R0 = min(2 * g.R, g.domain)
    out = []
    for f in ctx.grid("smoothing", "t", (0.125, 0.5)):
        out.append(est.check_smoothing_upper(ctx.traj, p, f * end, R0))
        out.append(est.check_smoothing_upper(ctx.traj, p, f * end, R0, cylinder_variant=True))
    return out


@_register("smoothing_offcenter")
def _smoothing_offcenter(ctx):
    if ctx.config.data != "vss-sample":
        raise PreconditionError("the off-center smoothing check needs vss-sample data")
    T = float(ctx.config.data_args.get("T", 1.0))
    sol = vss(ctx.params, T)
    g = ctx.geom
    p = ctx.grid("smoothing_offcenter", "p", (2.0,))[0]
    centers = _floats(ctx.config.data_args.get("centers", "2, 3"))
    return [est.check_smoothing_offcenter(sol, c, p, f * T, g.R, g.R / 2)
            for c in centers for f in ctx.grid("smoothing_offcenter", "t", (0.25, 0.5, 0.9))]


@_register("harnack")
def _harnack(ctx):
    params, g = ctx.params, ctx.geom
    p = ctx.grid("harnack", "p", (2.0,))[0]
    eps = ctx.grid("harnack", "epsilon", (0.25,))[0]
    variants = ["initial", "intrinsic", "alternative"]
    if params.m_c < params.m < 1:
        variants.append("good-range")
    out = []
    for v in variants:
        pv = 1.0 if v == "good-range" else p
        h2 = harnack_constants(params, pv).value("h2")
        ts = h2 * g.R ** (2 - params.d * (1 - params.m)) * ctx.mass ** (1 - params.m)
        if v == "initial":
            t, theta = 0.5 * ts, 0.125 * ts
        else:
            t, theta = 0.6 * ts, 0.2 * ts
        out += est.check_harnack(ctx.traj, v, t, theta, g.R, p=pv, epsilon=eps)
    return out


@_register("aleksandrov")
def _aleksandrov(ctx):
    g, ts = ctx.geom, ctx.t_star()
    times = [f * ts for f in ctx.grid("aleksandrov", "t", (0.25, 1.0, 2.0))]
    return [est.check_aleksandrov(ctx.traj, g.R, g.lam, times),
            est.check_aleksandrov(ctx.traj, g.R, g.lam)]


@_register("structural")
def _structural(ctx):
    return est.check_structural(ctx.traj, ctx.companion)


@_register("obstruction")
def _obstruction(ctx):
    ks = ctx.grid("obstruction", "k", (1, 2, 4, 8, 16))
    t0 = ctx.grid("obstruction", "t0", (0.002,))[0]
    opts = dataclasses.replace(ctx.config.solver, horizon=math.inf)
    return list(est.obstruction_demo(ctx.params, ks, t0, ctx.geom.R, opts=opts).reports)


# ------------------------------------------------------------------ running


@dataclass(frozen=True)
class Skipped:
    scenario_id: str
    check: str
    reason: str


@dataclass(frozen=True)
class ProfileSample:
    t: float
    r: tuple
    u: tuple


@dataclass(frozen=True)
class ScenarioResult:
    scenario_id: str
    reports: tuple
    skipped: tuple
    grid: int
    profiles: tuple = ()


@dataclass(frozen=True)
class ReportBundle:
    results: tuple
    provenance: dict = field(default_factory=dict)

    @property
    def reports(self) -> list[tuple[str, EstimateReport]]:
        return [(r.scenario_id, rep) for r in self.results for rep in r.reports]

    @property
    def skipped(self) -> list[Skipped]:
        return [s for r in self.results for s in r.skipped]

    @property
    def counts(self) -> dict:
        held = sum(rep.holds for _, rep in self.reports)
        failed = sum(not rep.holds for _, rep in self.reports)
        skipped = len(self.skipped)
        return {"checked": held + failed + skipped, "held": held, "failed": failed,
                "skipped": skipped}

    @property
    def all_held(self) -> bool:
        return self.counts["failed"] == 0


def _solve_pair(sc: ScenarioConfig, u0, n_cells: int, companion: bool):
    opts = dataclasses.replace(sc.solver, n_cells=n_cells)
    traj = solve_radial_dirichlet(sc.params, u0, sc.geometry.domain, opts)
    comp = None
    if companion:
        b = sc.solver.boundary
        comp = solve_radial_dirichlet(
            sc.params, lambda r: b + 0.5 * (np.asarray(u0(r)) - b), sc.geometry.domain, opts)
    return traj, comp


def _profiles(traj: Trajectory, count: int = 6) -> tuple:
    idx = np.unique(np.linspace(0, len(traj.times) - 1, count).round().astype(int))
    c = traj.grid.centers
    return tuple(ProfileSample(float(traj.times[i]), tuple(c), tuple(traj.values[i])) for i in idx)


def run_scenario(sc: ScenarioConfig, base_dir: str = ".") -> ScenarioResult:
    reports: list[EstimateReport] = []
    skipped: list[Skipped] = []
    if sc.data == "vss-sample":
        ctx = ScenarioContext(sc, None, None, base_dir)
        for name in sc.checks:
            try:
                reports += KNOWN_CHECKS[name](ctx)
            except (PreconditionError, ValueError) as exc:
                skipped.append(Skipped(sc.id, name, str(exc)))
        return ScenarioResult(sc.id, tuple(reports), tuple(skipped), 0)
    try:
        u0 = initial_data(sc, base_dir)
        want_companion = "structural" in sc.checks or "lp_evolution" in sc.checks
        fine, fine_c = _solve_pair(sc, u0, sc.solver.n_cells, want_companion)
        coarse, coarse_c = _solve_pair(sc, u0, max(sc.solver.n_cells // 2, 8), want_companion)
    except (SolverError, PreconditionError, ValueError) as exc:
        skipped += [Skipped(sc.id, name, f"solve failed: {exc}") for name in sc.checks]
        return ScenarioResult(sc.id, (), tuple(skipped), sc.solver.n_cells)
    fine_ctx = ScenarioContext(sc, fine, fine_c, base_dir)
    coarse_ctx = ScenarioContext(sc, coarse, coarse_c, base_dir)
    for name in sc.checks:
        try:
            found = KNOWN_CHECKS[name](fine_ctx)
        except (PreconditionError, ValueError) as exc:
            skipped.append(Skipped(sc.id, name, str(exc)))
            continue
        if name not in FIXED_THRESHOLD_CHECKS:
            try:
                rough = KNOWN_CHECKS[name](coarse_ctx)
            except (PreconditionError, ValueError):
                rough = []
            if len(rough) == len(found):
                found = [f.with_tolerance(max(f.tolerance, pair_tolerance(f, c)))
                         for f, c in zip(found, rough)]
        reports += found
    return ScenarioResult(sc.id, tuple(reports), tuple(skipped), sc.solver.n_cells, _profiles(fine))


def run_scenarios(config: Union[str, Path, SuiteConfig], grid: Optional[int] = None,
                  workers: Optional[int] = None) -> ReportBundle:
    suite = config if isinstance(config, SuiteConfig) else load_config(config, grid)
    n_workers = workers or suite.workers
    if n_workers > 1 and len(suite.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_scenario, suite.scenarios,
                                    [suite.base_dir] * len(suite.scenarios)))
    else:
        results = [run_scenario(sc, suite.base_dir) for sc in suite.scenarios]
    provenance = {
        "suite": suite.name,
        "config_sha256": suite.text_hash,
        "grids": {r.scenario_id: r.grid for r in results},
        "tolerance_policy": "max(1e-8, 3 x |fine margin - coarse margin|), coarse = n_cells/2",
    }
    return ReportBundle(tuple(results), provenance)


def resolve_output_dir(cli_out: Optional[str], config_out: Optional[str]) -> Path:
    if cli_out:
        return Path(cli_out)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    return Path(config_out or "fde-lab-out")


# -------------------------------------------------------------------- emit


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def report_rows(bundle: ReportBundle) -> list[dict]:
    rows = []
    for sid, rep in bundle.reports:
        num = {k: (None if rep.inputs.get(k) is None else float(rep.inputs[k]))
               for k in ("t", "s", "R", "R0", "p")}
        rows.append({
            "scenario_id": sid, "estimate_name": rep.name, "variant": rep.variant, **num,
            "lhs": rep.lhs, "rhs": rep.rhs, "margin": rep.margin, "holds": rep.holds,
            "tolerance": rep.tolerance, "notes": rep.notes,
        })
    for sk in bundle.skipped:
        rows.append({"scenario_id": sk.scenario_id, "estimate_name": sk.check,
                     "variant": "skipped", "notes": sk.reason})
    return rows


def reports_csv_text(bundle: ReportBundle) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report_rows(bundle):
        writer.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_reports_csv(path: Union[str, Path]) -> list[dict]:
    """Parse a report CSV back into typed rows."""
    floats = ("t", "s", "R", "R0", "p", "lhs", "rhs", "margin", "tolerance")
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for row in reader:
            typed: dict = dict(row)
            for key in floats:
                typed[key] = float(row[key]) if row[key] != "" else None
            typed["holds"] = {"true": True, "false": False, "": None}[row["holds"]]
            out.append(typed)
    return out


def table_text(rows: list[dict]) -> str:
    """One line per (scenario, estimate) with the worst margin."""
    if not rows:
        raise ValueError("nothing to tabulate")
    groups: dict[tuple, dict] = {}
    for row in rows:
        key = (row["scenario_id"], row["estimate_name"])
        g = groups.setdefault(key, {"n": 0, "held": 0, "failed": 0, "skipped": 0,
                                    "worst": math.inf, "worst_rel": math.inf})
        if row.get("variant") == "skipped":
            g["skipped"] += 1
            continue
        g["n"] += 1
        g["held" if row["holds"] else "failed"] += 1
        if row["margin"] < g["worst"]:
            g["worst"] = row["margin"]
            scale = max(abs(row["lhs"]), abs(row["rhs"]))
            g["worst_rel"] = row["margin"] / scale if scale > 0 else 0.0
    head = ("scenario", "estimate", "checks", "held", "failed", "skipped", "worst margin",
            "worst rel.")
    lines = [head]
    for (sid, name), g in groups.items():
        worst = "" if g["n"] == 0 else f"{g['worst']:.4g}"
        rel = "" if g["n"] == 0 else f"{g['worst_rel']:.4g}"
        lines.append((sid, name, str(g["n"]), str(g["held"]), str(g["failed"]),
                      str(g["skipped"]), worst, rel))
    widths = [max(len(row[i]) for row in lines) for i in range(len(head))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                     for row in lines) + "\n"


def plot_series(rows: list[dict]) -> dict[tuple, list[tuple]]:
    """Group report rows into ``(scenario, estimate, variant) -> [(x, lhs, rhs)]``.

    The abscissa is ``t`` when present, else ``s``.
    """
    series: dict[tuple, list[tuple]] = {}
    for row in rows:
        if row.get("variant") == "skipped":
            continue
        x = row.get("t") if row.get("t") is not None else row.get("s")
        if x is None:
            continue
        key = (row["scenario_id"], row["estimate_name"], row["variant"] or "main")
        series.setdefault(key, []).append((x, row["lhs"], row["rhs"]))
    return {k: sorted(v) for k, v in series.items()}


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def emit_rows(rows: list[dict], fmt: str, out_dir: Union[str, Path],
              profiles: Optional[dict] = None, figures: bool = True,
              csv_text: Optional[str] = None) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    if fmt == "csv":
        path = out / "reports.csv"
        if csv_text is None:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
            csv_text = buf.getvalue()
        path.write_text(csv_text)
        written.append(path)
    elif fmt == "table":
        path = out / "summary.txt"
        path.write_text(table_text(rows))
        written.append(path)
    elif fmt == "plotdata":
        pdir = out / "plotdata"
        pdir.mkdir(exist_ok=True)
        series = plot_series(rows)
        for (sid, name, variant), pts in series.items():
            path = pdir / _safe(f"{sid}__{name}__{variant}.csv")
            lines = ["t,lhs,rhs"] + [f"{x!r},{a!r},{b!r}" for x, a, b in pts]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
        for sid, samples in (profiles or {}).items():
            path = pdir / _safe(f"{sid}__profiles.csv")
            lines = ["t,r,u"] + [f"{s.t!r},{r!r},{u!r}" for s in samples for r, u in zip(s.r, s.u)]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
        if figures:
            from .plotting import render_figures

            written += render_figures(series, profiles or {}, out / "figures")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return written


def emit(bundle: ReportBundle, fmt: str, out_dir: Union[str, Path], figures: bool = True) -> list[Path]:
    rows = report_rows(bundle)
    if fmt == "table" and not bundle.reports:
        raise ValueError("the table format needs a nonempty bundle")
    profiles = {r.scenario_id: r.profiles for r in bundle.results if r.profiles}
    text = reports_csv_text(bundle) if fmt == "csv" else None
    return emit_rows(rows, fmt, out_dir, profiles, figures, csv_text=text)
