# taylor/services/experiment.py
# End-to-end experiment: parse -> bundle -> roots -> trajectories -> splice -> spline
# -> enhance -> metrics, plus the bundled-example reproductions (table and figures).

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings
from dotenv import dotenv_values

from taylor.exceptions import ConfigError, DomainError, InvalidFigureError, StageError
from taylor.forms import PUBLISHED_KEYS, ExperimentConfigForm
from taylor.services import artifacts
from taylor.services.enhance import EnhancedApproximant, MetricsRow, build_enhanced, metrics, taylor_poly
from taylor.services.function_model import DerivativeBundle, make_bundle, parse
from taylor.services.lagrange import (LagrangeTrajectory, RemainderSamples, plan_splice,
                                      remainder_samples, solve_lagrange, splice)
from taylor.services.rootfind import seed_problem

logger = logging.getLogger(__name__)

BUNDLED_EXAMPLES = ("example1.cfg", "example2.cfg")
FIGURES = {
    1: ("example1.cfg", "lagrange"),
    2: ("example1.cfg", "remainder"),
    3: ("example1.cfg", "delta_r"),
    4: ("example2.cfg", "lagrange"),
    5: ("example2.cfg", "remainder"),
    6: ("example2.cfg", "delta_r"),
}
ROOT_MATCH_RTOL = 1e-4
GUARD_PROBE_POINTS = 101


# ------------------------------- Config -------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    function: str
    lo: float
    hi: float
    x0: float
    xz_offset: float = 0.0005
    n_steps: int = 10000
    seeds: tuple[float, ...] = ()
    switch_points: tuple[float, ...] | str = ()
    mode: str = "factored"
    output_dir: str = ""
    label: str = ""
    search_lo: float | None = None
    search_hi: float | None = None
    spline_guard_steps: int = 12
    scan_points: int = 20001
    probe_points: int = 100001
    bound_probe_points: int = 10001
    published: dict = field(default_factory=dict)

    @property
    def x_z(self) -> float:
        return self.x0 + self.xz_offset

    @property
    def search_window(self) -> tuple[float, float]:
        lo = self.lo if self.search_lo is None else self.search_lo
        hi = self.hi if self.search_hi is None else self.search_hi
        return lo, hi

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def resolve_config_path(path) -> Path:
    """A path as given, else a file of that name among the bundled configs."""
    p = Path(path)
    if p.exists():
        return p
    bundled = Path(settings.LAGRANGE_CONFIG_DIR) / p.name
    if bundled.exists():
        return bundled
    raise ConfigError(f"config file not found: {path}")


def config_from_mapping(data: dict, overrides: dict | None = None) -> ExperimentConfig:
    data = {k: v for k, v in data.items()}
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    unknown = sorted(set(data) - set(ExperimentConfigForm.base_fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", {k: ["unknown key"] for k in unknown})

    form = ExperimentConfigForm(data={k: ("" if v is None else str(v)) for k, v in data.items()})
    if not form.is_valid():
        errors = {k: [str(m) for m in v] for k, v in form.errors.items()}
        raise ConfigError("invalid experiment config: " + "; ".join(
            f"{k}: {' '.join(v)}" for k, v in errors.items()), errors)
    cd = form.cleaned_data

    def pick(key, default):
        value = cd.get(key)
        return default if value in (None, "") else value

    published = {k: cd[k] for k in PUBLISHED_KEYS if cd.get(k) not in (None, "", ())}
    return ExperimentConfig(
        function=cd["function"],
        lo=cd["lo"], hi=cd["hi"], x0=cd["x0"],
        xz_offset=pick("xz_offset", settings.LAGRANGE_XZ_OFFSET),
        n_steps=pick("n_steps", settings.LAGRANGE_N_STEPS),
        seeds=cd.get("seeds") or (),
        switch_points=cd.get("switch_points") or (),
        mode=pick("mode", settings.LAGRANGE_MODE),
        output_dir=pick("output_dir", str(settings.LAGRANGE_OUTPUT_DIR)),
        label=pick("label", cd["function"]),
        search_lo=cd.get("search_lo"),
        search_hi=cd.get("search_hi"),
        spline_guard_steps=pick("spline_guard_steps", settings.LAGRANGE_SPLINE_GUARD_STEPS),
        scan_points=settings.LAGRANGE_SCAN_POINTS,
        probe_points=settings.LAGRANGE_PROBE_POINTS,
        bound_probe_points=settings.LAGRANGE_BOUND_PROBE_POINTS,
        published=published,
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Flat `key = value` file with # comments; `overrides` (non-None values) win over the file."""
    path = resolve_config_path(path)
    try:
        data = dotenv_values(path, interpolate=False)
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    logger.debug("loaded config %s: %s", path, sorted(data))
    return config_from_mapping(data, overrides)


# ------------------------------- Report -------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


@dataclass
class ExperimentReport:
    config: dict
    x_z: float
    roots: list
    branches: list
    switch_points: list
    spliced: dict | None
    metrics: dict
    mode_comparison: dict
    warnings: list
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})

    def data_dict(self) -> dict:
        """Everything except the run metadata (wall-clock duration)."""
        out = self.to_dict()
        out.pop("metadata", None)
        return out


def load_report(path) -> ExperimentReport:
    with open(path, encoding="utf-8") as fh:
        return ExperimentReport.from_dict(json.load(fh))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    bundle: DerivativeBundle
    branches: list[LagrangeTrajectory]
    samples: list[RemainderSamples]
    spliced: LagrangeTrajectory
    spliced_samples: RemainderSamples
    enhanced: EnhancedApproximant
    row: MetricsRow
    report: ExperimentReport

    def branch_id(self, k: int) -> str:
        return f"branch{k + 1}"


# ------------------------------- Pipeline -------------------------------

@contextmanager
def stage(name: str):
    try:
        yield
    except (StageError, ConfigError):
        raise
    except Exception as exc:
        logger.error("stage %s failed: %s: %s", name, type(exc).__name__, exc)
        raise StageError(name, exc) from exc


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Compute everything for one config without writing files."""
    started = time.perf_counter()
    warnings: list[str] = []
    x0, lo, hi, n = config.x0, config.lo, config.hi, config.n_steps
    x_z = config.x_z

    with stage("parse"):
        expression = parse(config.function)
    h = (hi - x_z) / n
    guard = config.spline_guard_steps
    guard_end = x_z + (n + guard) * h
    with stage("bundle"):
        bundle = make_bundle(expression, 6, domain=(lo, hi))
    if guard:
        try:
            bundle.probe(hi, guard_end, GUARD_PROBE_POINTS)
        except DomainError as exc:
            raise ConfigError(
                f"{config.function} is undefined on the spline guard range ({hi}, {guard_end:.6g}]; "
                f"set spline_guard_steps = 0 or move hi inward: {exc}",
                {"spline_guard_steps": ["guard range leaves the domain of the function"]}) from exc
    with stage("rootfind"):
        search_lo, search_hi = config.search_window
        seed = seed_problem(bundle, x0, x_z, search_lo, search_hi, config.scan_points,
                            roots=list(config.seeds) or None)
    roots = list(seed.roots)

    published_xz = config.published.get("published_xz")
    if published_xz is not None and published_xz != x_z:
        warnings.append(f"published x_z={published_xz!r} differs from the computed x_z={x_z!r} "
                        f"(x0 + xz_offset); roots and trajectories use the computed value")
    for p in config.published.get("published_roots", ()):
        nearest = min(roots, key=lambda r: abs(r - p))
        if abs(nearest - p) > ROOT_MATCH_RTOL * max(1.0, abs(p)):
            warnings.append(f"published root {p!r} not matched (nearest computed {nearest!r})")

    extended = []
    with stage("integrate"):
        for k, r in enumerate(roots):
            extended.append(solve_lagrange(bundle, x0, (x_z, r), guard_end, n + guard,
                                           label=f"branch{k + 1} (xi_z={r:.6g})"))
    branches = [t.restrict(n) for t in extended] if guard else extended
    samples = [remainder_samples(t, bundle) for t in branches]
    for k, t in enumerate(branches):
        if not t.all_constraint_ok:
            crossings = ", ".join(f"{c:.6g}" for c in t.crossings) or "the first node"
            warnings.append(f"branch{k + 1} leaves x0 < xi(x) < x near x = {crossings}")

    with stage("splice"):
        if len(extended) == 1:
            chosen_ext, points = extended, []
        else:
            if config.switch_points == "auto" or not config.switch_points:
                chosen, points = plan_splice(branches)
            else:
                chosen, points = branches, list(config.switch_points)
            by_label = {t.label: t for t in extended}
            chosen_ext = [by_label[t.label] for t in chosen]
        spliced_ext = splice(chosen_ext, points)
        spliced = spliced_ext.restrict(n) if guard else spliced_ext
        spliced_samples = remainder_samples(spliced, bundle)
    if len(extended) > 1 and not spliced.all_constraint_ok:
        warnings.append("spliced trajectory violates x0 < xi(x) < x; adjust switch_points")

    with stage("enhance"):
        t1 = taylor_poly(bundle, x0, 1)
        t5 = taylor_poly(bundle, x0, 5)
        enhanced = build_enhanced(t1, spliced_ext, bundle, config.mode, valid_hi=hi)
        other_mode = "direct" if config.mode == "factored" else "factored"
        other = build_enhanced(t1, spliced_ext, bundle, other_mode, valid_hi=hi)
    with stage("metrics"):
        row = metrics(bundle, enhanced, t5, (lo, hi), config.probe_points, label=config.label,
                      bound_probe_points=config.bound_probe_points)
        other_row = metrics(bundle, other, t5, (lo, hi), config.probe_points, label=config.label,
                            bound_probe_points=config.bound_probe_points)
    if row.bound.holds is False:
        warnings.append(f"measured delta_CS={row.delta_cs:.3g} exceeds B_U={row.b_u:.3g}")

    published_dr = config.published.get("published_max_delta_r", ())
    branch_rows = []
    for k, (t, s) in enumerate(zip(branches, samples)):
        branch_rows.append({
            "id": f"branch{k + 1}",
            "label": t.label,
            "xi_z": t.xi_z,
            "max_abs_delta_r": s.max_abs_delta_r,
            "published_max_delta_r": published_dr[k] if k < len(published_dr) else None,
            "constraint_ok_everywhere": t.all_constraint_ok,
            "crossing_points": list(t.crossings),
        })
    spliced_row = None
    if len(extended) > 1:
        spliced_row = {
            "segments": [t.label for t in chosen_ext],
            "max_abs_delta_r": spliced_samples.max_abs_delta_r,
            "constraint_ok_everywhere": spliced.all_constraint_ok,
        }

    for w in warnings:
        logger.warning("%s: %s", config.label, w)
    report = ExperimentReport(
        config=config.to_dict(),
        x_z=x_z,
        roots=roots,
        branches=branch_rows,
        switch_points=[float(p) for p in points],
        spliced=spliced_row,
        metrics=_plain(row.to_dict()),
        mode_comparison={config.mode: row.delta_cs, other_mode: other_row.delta_cs},
        warnings=warnings,
        metadata={"duration_seconds": time.perf_counter() - started},
    )
    return ExperimentResult(config, bundle, branches, samples, spliced, spliced_samples,
                            enhanced, row, report)


# ------------------------------- Outputs -------------------------------

def trajectory_columns(t: LagrangeTrajectory, s: RemainderSamples) -> dict:
    return {"x": t.nodes, "xi": t.values, "r_xi": s.r_xi, "r_act": s.r_act,
            "delta_r": s.delta_r, "constraint_ok": t.constraint_ok}


def figure_series(result: ExperimentResult, kind: str) -> dict[str, np.ndarray]:
    """Columns of one plot: x first, then one column per curve."""
    x = result.branches[0].nodes
    cols = {"x": x}
    if kind == "lagrange":
        for k, t in enumerate(result.branches):
            cols[f"xi_{result.branch_id(k)}"] = t.values
        cols["x0_line"] = np.full_like(x, result.config.x0)
        cols["identity_line"] = x
    elif kind == "remainder":
        for k, s in enumerate(result.samples):
            cols[f"r_xi_{result.branch_id(k)}"] = s.r_xi
        cols["r_act"] = result.samples[0].r_act
    elif kind == "delta_r":
        for k, s in enumerate(result.samples):
            cols[f"delta_r_{result.branch_id(k)}"] = s.delta_r
    else:
        raise ValueError(f"unknown figure kind {kind!r}")
    return cols


_TITLES = {"lagrange": "Lagrange function xi(x)", "remainder": "Remainder R_xi(x) and R_act(x)",
           "delta_r": "Remainder difference R_act(x) - R_xi(x)"}


def _write_plot(path: Path, result: ExperimentResult, kind: str) -> Path:
    cols = figure_series(result, kind)
    x = cols.pop("x")
    return artifacts.write_svg(path, f"{result.config.label}: {_TITLES[kind]}", x, cols)


def write_outputs(result: ExperimentResult, output_dir=None) -> list[Path]:
    out = Path(output_dir or result.config.output_dir)
    written = []
    with stage("output"):
        for k, (t, s) in enumerate(zip(result.branches, result.samples)):
            written.append(artifacts.write_csv(out / f"trajectory_{result.branch_id(k)}.csv",
                                               trajectory_columns(t, s)))
        if result.report.spliced is not None:
            written.append(artifacts.write_csv(out / "trajectory_spliced.csv",
                                               trajectory_columns(result.spliced, result.spliced_samples)))
        written.append(artifacts.write_json(out / "report.json", result.report.to_dict()))
        for kind in ("lagrange", "remainder", "delta_r"):
            written.append(_write_plot(out / f"{kind}.svg", result, kind))
    logger.info("%s: wrote %d files to %s", result.config.label, len(written), out)
    return written


def run(config: ExperimentConfig) -> ExperimentReport:
    result = run_experiment(config)
    write_outputs(result)
    return result.report


# ------------------------------- Bundled reproductions -------------------------------

def _sig2(v: float) -> str:
    return f"{v:.1e}"


def table_row(result: ExperimentResult) -> dict:
    row, pub = result.row, result.config.published
    p_t, p_cs, p_bu = pub.get("published_delta_t"), pub.get("published_delta_cs"), pub.get("published_b_u")
    return {
        "function": result.config.function,
        "lo": row.interval[0],
        "hi": row.interval[1],
        "delta_t": row.delta_t,
        "delta_cs": row.delta_cs,
        "b_u": row.b_u,
        "published_delta_t": p_t,
        "published_delta_cs": p_cs,
        "published_b_u": p_bu,
        "delta_t_ok": None if p_t is None else abs(row.delta_t / p_t - 1) <= 0.10,
        "delta_cs_ok": row.delta_cs <= 1e-10 and row.delta_cs <= 1e-12 * row.delta_t,
        "b_u_ok": None if p_bu is None else _sig2(row.b_u) == _sig2(p_bu),
    }


def table1(overrides: dict | None = None) -> tuple[list[dict], Path]:
    """Both bundled examples; per-example outputs in <out>/<example>/ and <out>/table1.csv."""
    overrides = dict(overrides or {})
    base = Path(overrides.pop("output_dir", None) or settings.LAGRANGE_OUTPUT_DIR)
    rows = []
    for name in BUNDLED_EXAMPLES:
        config = load_config(name, {**overrides, "output_dir": str(base / Path(name).stem)})
        result = run_experiment(config)
        write_outputs(result)
        rows.append(table_row(result))
    names = list(rows[0])
    with stage("output"):
        path = artifacts.write_csv(base / "table1.csv", {n: [r[n] for r in rows] for n in names})
    return rows, path


def figure(n: int, overrides: dict | None = None) -> tuple[dict, list[Path]]:
    if n not in FIGURES:
        raise InvalidFigureError(f"figure must be one of {sorted(FIGURES)}, got {n}")
    name, kind = FIGURES[n]
    overrides = dict(overrides or {})
    out = Path(overrides.pop("output_dir", None) or settings.LAGRANGE_OUTPUT_DIR)
    result = run_experiment(load_config(name, overrides))
    cols = figure_series(result, kind)
    with stage("output"):
        paths = [artifacts.write_csv(out / f"figure{n}.csv", cols),
                 _write_plot(out / f"figure{n}.svg", result, kind)]
    return cols, paths
