"""Config-driven experiment runs: band tables, spectra, k-scans, dichotomy checks.

A run expands the configured k set into independent tasks, executes them
(optionally on a process pool) and merges the results into a
:class:`RunReport`.  A failing task is recorded with its error message and
never aborts the run.
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from .assembly import LatticeBox, assemble
from .birman_schwinger import bs_count, bs_matrix
from .dispersion import MassPair, QuasiMomentum, band_params
from .errors import LatticeFibersError, NoClosedFormError
from .fibers import classify_dichotomy, decompose, fiber_bound_states, predicted_counts, verify_block_structure
from .potential import Potential
from .spectral import convergence_study, count_discrete, eigenvalues

__all__ = [
    "MODES",
    "ConfigError",
    "ExperimentConfig",
    "RunReport",
    "parse_config",
    "load_config",
    "k_grid",
    "scan_k",
    "run",
    "write_outputs",
    "worker_count",
    "schema",
]

MODES = ("band", "spectrum", "scan", "dichotomy", "bs-count", "convergence", "decompose")
REPORT_VERSION = 1

_PI_EXPR = re.compile(r"^([+-]?)(\d+(?:\.\d*)?)?\*?pi(?:/(\d+(?:\.\d*)?))?$")


class ConfigError(LatticeFibersError, ValueError):
    """Invalid experiment config; ``line`` points into the source text when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = source or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


def schema(name: str) -> dict:
    """Load a shipped JSON schema (``'config'`` or ``'report'``)."""
    text = resources.files("latticefibers").joinpath("data", f"{name}.schema.json").read_text()
    return json.loads(text)


def _angle(value, where: str) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _PI_EXPR.match(value.replace(" ", ""))
        if m:
            sign, coef, den = m.groups()
            x = math.pi * (float(coef) if coef else 1.0) / (float(den) if den else 1.0)
            return -x if sign == "-" else x
    raise ValueError(f"{where}: cannot read {value!r} as an angle (use a number or e.g. 'pi', '-pi/2')")


def k_grid(dimension: int, points_per_axis: int) -> list:
    """Product grid ``2 pi m / N``, ``m = -floor((N-1)/2) .. floor(N/2)``.

    Contains ``0`` always and ``pi`` exactly when ``N`` is even.
    """
    if points_per_axis < 1:
        raise ValueError("points per axis must be at least 1")
    n = points_per_axis
    axis = [math.pi * (2 * m / n) for m in range(-((n - 1) // 2), n // 2 + 1)]
    grids = np.meshgrid(*([axis] * dimension), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return [QuasiMomentum(p) for p in pts]


@dataclass
class ExperimentConfig:
    """Validated run parameters.  ``raw`` keeps the parsed JSON for the report echo."""

    mode: str
    masses: MassPair
    dimension: int
    potential: Potential
    k_points: list
    radii: tuple = (10, 20, 40)
    deltas: tuple = (1e-4, 1e-8, 1e-12)
    method: str = "embedded"
    z_values: tuple = ()
    box_points: int | None = None
    window: int = 10
    output_dir: str | None = None
    seed: int = 0
    plots: bool = True
    raw: dict = field(default_factory=dict)
    source: str | None = None

    def ladder(self) -> tuple:
        """Refinement ladder: radii ascending paired with margins descending."""
        margins = sorted(self.deltas, reverse=True)
        if len(margins) == len(self.radii):
            return self.radii, tuple(margins)
        return self.radii, (margins[-1],) * len(self.radii)


def _line_of(text: str, path) -> int | None:
    # follow object keys through the source text; list indices are skipped
    pos = 0
    found = False
    for part in path:
        if isinstance(part, str):
            hit = text.find(f'"{part}"', pos)
            if hit < 0:
                break
            pos, found = hit, True
    return text.count("\n", 0, pos) + 1 if found else None


def parse_config(text: str, mode: str | None = None, source: str | None = None,
                 base_dir=None) -> ExperimentConfig:
    """Parse and validate config JSON text.

    ``mode`` (the CLI mode) takes precedence over a ``mode`` key in the file.
    Relative potential paths are resolved against ``base_dir``.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    validator = jsonschema.Draft202012Validator(schema("config"))
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        loc = "/".join(map(str, err.absolute_path)) or "<root>"
        raise ConfigError(f"{loc}: {err.message}", _line_of(text, err.absolute_path), source)

    def fail(msg, *path):
        raise ConfigError(msg, _line_of(text, path), source)

    mode = mode or raw.get("mode")
    if mode is None:
        fail("no mode given on the command line or in the config")
    if mode not in MODES:
        fail(f"unknown mode {mode!r}", "mode")
    dim = raw["dimension"]
    try:
        masses = MassPair(*raw["masses"])
    except ValueError as exc:
        fail(str(exc), "masses")

    pot_spec = raw["potential"]
    try:
        if isinstance(pot_spec, str):
            path = Path(pot_spec)
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            potential = Potential.load(path)
        else:
            potential = Potential.from_json(pot_spec)
    except (OSError, ValueError, KeyError) as exc:
        fail(f"cannot read potential: {exc}", "potential")
    if potential.dimension != dim:
        fail(f"potential has dimension {potential.dimension}, config says {dim}", "potential")

    seed = int(raw.get("seed", 0))
    kspec = raw["k"]
    try:
        if "point" in kspec:
            pts = [[_angle(c, "k.point") for c in kspec["point"]]]
        elif "points" in kspec:
            pts = [[_angle(c, f"k.points[{i}]") for c in p] for i, p in enumerate(kspec["points"])]
        elif "grid" in kspec:
            pts = None
            k_points = k_grid(dim, int(kspec["grid"]))
        else:
            rng = np.random.default_rng(seed)
            pts = rng.uniform(-math.pi, math.pi, size=(int(kspec["random"]), dim)).tolist()
    except ValueError as exc:
        fail(str(exc), "k")
    if pts is not None:
        if any(len(p) != dim for p in pts):
            fail(f"every k point needs {dim} components", "k")
        k_points = [QuasiMomentum(p) for p in pts]

    radii = tuple(int(r) for r in raw.get("radii", (10, 20, 40)))
    if any(b <= a for a, b in zip(radii, radii[1:])):
        fail("radii must be strictly increasing", "radii")
    deltas = tuple(float(x) for x in raw.get("deltas", (1e-4, 1e-8, 1e-12)))
    z_values = tuple(float(z) for z in raw.get("z", ()))
    if mode == "bs-count" and not z_values:
        fail("bs-count mode needs a nonempty 'z' list", "z")
    box_points = raw.get("box_points")
    if box_points is not None and box_points % 2 == 0:
        fail("box_points must be odd", "box_points")
    return ExperimentConfig(
        mode=mode, masses=masses, dimension=dim, potential=potential, k_points=k_points,
        radii=radii, deltas=deltas, method=raw.get("method", "embedded"), z_values=z_values,
        box_points=box_points, window=int(raw.get("window", 10)), output_dir=raw.get("output_dir"),
        seed=seed, plots=bool(raw.get("plots", True)), raw=raw, source=source)


def resolve_config_path(path) -> Path:
    """The given path, or a shipped config of that name when the path does not exist."""
    path = Path(path)
    if path.exists():
        return path
    shipped = resources.files("latticefibers").joinpath("data", "configs", path.name)
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError(f"config file not found: {path}")


def load_config(path, mode: str | None = None) -> ExperimentConfig:
    path = resolve_config_path(path)
    return parse_config(path.read_text(), mode=mode, source=str(path), base_dir=path.parent)


# -------------------------------------------------------------------------
# tasks

def _band_task(cfg, k):
    return band_params(cfg.masses, k).to_dict()


def _spectrum_task(cfg, k, radius, delta):
    res = count_discrete(cfg.masses, k, cfg.potential, radius, delta, method=cfg.method,
                         locate=cfg.method == "embedded")
    out = res.to_dict()
    out["ratio"] = res.band.ratio
    return out


def _ladder_dict(cfg, k):
    radii, margins = cfg.ladder()
    return convergence_study(cfg.masses, k, cfg.potential, radii, margins, method=cfg.method,
                             grid=cfg.mode == "convergence").to_dict()


def _scan_task(cfg, k):
    radius, delta = max(cfg.radii), min(cfg.deltas)
    res = count_discrete(cfg.masses, k, cfg.potential, radius, delta, method=cfg.method, locate=False)
    out = {"ratio": res.band.ratio, "boundary": res.band.ratio == 0.0, "radius": radius,
           "margin": delta, "n_below": res.n_below, "n_above": res.n_above,
           "band_min": res.band.band_min, "band_max": res.band.band_max}
    if out["boundary"] and len(cfg.radii) >= 3:
        out["ladder"] = _ladder_dict(cfg, k)
    return out


def _predicted(cfg, k, radii, margins):
    try:
        fam = decompose(cfg.masses, k, cfg.potential, window=max(radii))
        return [predicted_counts(fam, dl, r) for r, dl in zip(radii, margins)]
    except (LatticeFibersError, ValueError):
        return None


def _dichotomy_task(cfg, k):
    verdict = classify_dichotomy(cfg.masses, k, cfg.potential)
    ladder = _ladder_dict(cfg, k)
    radii, margins = cfg.ladder()
    predicted = _predicted(cfg, k, radii, margins)
    expected = "Growing" if verdict.verdict == "Infinite" else "Stable"
    out = verdict.to_dict()
    out.update({"ladder": ladder, "predicted_counts": predicted,
                "consistent": ladder["verdict"] == expected,
                "predicted_match": None if predicted is None else predicted == ladder["totals"]})
    return out


def _convergence_task(cfg, k):
    return _ladder_dict(cfg, k)


def _bs_task(cfg, k):
    n = cfg.box_points or 2 * max(cfg.radii) + 1
    box = LatticeBox(cfg.dimension, (n - 1) // 2, "periodic")
    direct = eigenvalues(assemble(cfg.masses, k, cfg.potential, box))
    rows = []
    for z in cfg.z_values:
        bs = bs_matrix(cfg.masses, k, cfg.potential, z, box)
        count = bs_count(bs)
        n_direct = int(np.sum(direct < z)) if bs.side == "below" else int(np.sum(direct > z))
        rows.append({"z": z, "side": bs.side, "count": count, "direct_count": n_direct,
                     "agree": count == n_direct})
    return {"box_points": n, "rows": rows}


def _decompose_task(cfg, k):
    fam = decompose(cfg.masses, k, cfg.potential, window=cfg.window)
    fibers = [{"x_hat": list(x), "potential": f.to_json()} for x, f in fam.fibers.items()]
    out = {"alpha": list(fam.alpha), "offset": fam.offset,
           "reduced_k": None if fam.reduced_k is None else list(fam.reduced_k.components),
           "fiber_band": list(fam.fiber_band()), "fibers": fibers,
           "block_residual": verify_block_structure(cfg.masses, k, cfg.potential, min(cfg.radii))}
    try:
        states = fiber_bound_states(fam, cfg.window)
        out["bound_states"] = [{"x_hat": list(x), "eigenvalue": e} for x, e in states.items()]
        out["predicted_counts"] = {repr(dl): predicted_counts(fam, dl, cfg.window) for dl in cfg.deltas}
    except NoClosedFormError as exc:
        out["bound_states"] = None
        out["predicted_counts"] = None
        out["note"] = str(exc)
    return out


_TASKS = {
    "band": _band_task,
    "spectrum": _spectrum_task,
    "scan": _scan_task,
    "dichotomy": _dichotomy_task,
    "bs-count": _bs_task,
    "convergence": _convergence_task,
    "decompose": _decompose_task,
}


def _expand(cfg: ExperimentConfig) -> list:
    if cfg.mode == "spectrum":
        return [(k, r, dl) for k in cfg.k_points for r in cfg.radii for dl in cfg.deltas]
    return [(k,) for k in cfg.k_points]


def _execute(cfg: ExperimentConfig, args: tuple) -> dict:
    t0 = time.perf_counter()
    entry = {"k": list(args[0].components)}
    if cfg.mode == "spectrum":
        entry.update(radius=args[1], delta=args[2])
    try:
        entry["data"] = _TASKS[cfg.mode](cfg, *args)
        entry["status"] = "ok"
        entry["error"] = None
    except Exception as exc:  # per-task isolation
        entry["data"] = None
        entry["status"] = "error"
        entry["error"] = f"{type(exc).__name__}: {exc}"
    entry["seconds"] = time.perf_counter() - t0
    return entry


def worker_count(jobs: int | None) -> int:
    """``jobs`` capped by ``LATTICEFIBERS_THREADS`` when set."""
    n = max(1, int(jobs or 1))
    cap = os.environ.get("LATTICEFIBERS_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"LATTICEFIBERS_THREADS must be an integer, got {cap!r}") from None
    return n


# -------------------------------------------------------------------------
# report

def _versions() -> dict:
    from . import __version__

    return {"latticefibers": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


@dataclass
class RunReport:
    mode: str
    config: dict
    k_points: list
    potential: dict
    results: list
    warnings: list
    versions: dict
    timings: dict

    @property
    def n_failed(self) -> int:
        return sum(r["status"] != "ok" for r in self.results)

    def to_dict(self, stable: bool = False) -> dict:
        results = []
        for r in self.results:
            r = dict(r)
            if stable:
                r.pop("seconds", None)
            results.append(r)
        out = {"report_version": REPORT_VERSION, "mode": self.mode, "config": self.config,
               "k_points": self.k_points, "potential": self.potential, "results": results,
               "summary": {"tasks": len(self.results), "failed": self.n_failed},
               "warnings": self.warnings, "versions": self.versions}
        if not stable:
            out["timings"] = self.timings
        return out

    def dumps(self, stable: bool = False) -> str:
        return json.dumps(self.to_dict(stable), indent=1, sort_keys=True, allow_nan=False) + "\n"


def _warnings(cfg: ExperimentConfig) -> list:
    from .potential import hypothesis_certificate

    out = []
    cert = hypothesis_certificate(cfg.potential)
    if not (cert.holds_A and cert.holds_B):
        out.append(f"hypothesis uncertified: {cert.reason}")
    if cfg.raw.get("mode") not in (None, cfg.mode):
        out.append(f"config mode {cfg.raw['mode']!r} overridden by {cfg.mode!r}")
    return out


def run(cfg: ExperimentConfig, jobs: int | None = 1) -> RunReport:
    """Execute every task of the configured mode and merge the results in task order."""
    t0 = time.perf_counter()
    tasks = _expand(cfg)
    workers = min(worker_count(jobs), max(1, len(tasks)))
    if workers == 1:
        results = [_execute(cfg, t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, [cfg] * len(tasks), tasks))
    warnings = _warnings(cfg)
    warnings += [f"task {i}: {r['error']}" for i, r in enumerate(results) if r["status"] != "ok"]
    return RunReport(
        mode=cfg.mode, config=cfg.raw, k_points=[list(k.components) for k in cfg.k_points],
        potential=cfg.potential.to_json(), results=results, warnings=warnings, versions=_versions(),
        timings={"total_seconds": time.perf_counter() - t0, "workers": workers})


def scan_k(cfg: ExperimentConfig, jobs: int | None = 1) -> list:
    """Rows ``(k, A(k), n_below, n_above, boundary)`` over the configured k set."""
    if cfg.mode != "scan":
        raise ValueError("scan_k needs a config in scan mode")
    rows = []
    for r in run(cfg, jobs).results:
        row = {"k": r["k"], "status": r["status"], "error": r["error"]}
        if r["data"] is not None:
            row.update({key: r["data"][key] for key in ("ratio", "n_below", "n_above", "boundary")})
            if "ladder" in r["data"]:
                row["ladder_verdict"] = r["data"]["ladder"]["verdict"]
        rows.append(row)
    return rows


# -------------------------------------------------------------------------
# tables and plots

def _k_cols(k: list) -> dict:
    return {f"k{j}": x for j, x in enumerate(k, start=1)}


def _table_rows(report: RunReport) -> dict:
    mode = report.mode
    rows = []
    for r in report.results:
        base = {**_k_cols(r["k"]), "status": r["status"]}
        d = r["data"]
        if d is None:
            rows.append(base)
            continue
        if mode == "band":
            rows.append({**base, "E_min": d["band_min"], "E_max": d["band_max"], "A": d["ratio"],
                         "center": d["center"]})
        elif mode == "spectrum":
            rows.append({**base, "radius": r["radius"], "delta": r["delta"], "A": d["ratio"],
                         "n_below": d["n_below"], "n_above": d["n_above"]})
        elif mode == "scan":
            rows.append({**base, "A": d["ratio"], "boundary": d["boundary"], "n_below": d["n_below"],
                         "n_above": d["n_above"],
                         "ladder_verdict": d["ladder"]["verdict"] if "ladder" in d else ""})
        elif mode in ("convergence", "dichotomy"):
            lad = d if mode == "convergence" else d["ladder"]
            for i, (rad, dl) in enumerate(zip(lad["radii"], lad["margins"])):
                row = {**base, "radius": rad, "delta": dl, "n_below": lad["counts"][i][0],
                       "n_above": lad["counts"][i][1], "ladder_verdict": lad["verdict"]}
                if mode == "dichotomy":
                    row["verdict"] = d["verdict"]
                    row["predicted"] = "" if d["predicted_counts"] is None else d["predicted_counts"][i]
                rows.append(row)
        elif mode == "bs-count":
            for z in d["rows"]:
                rows.append({**base, "z": z["z"], "side": z["side"], "count": z["count"],
                             "direct_count": z["direct_count"]})
        elif mode == "decompose":
            rows.append({**base, "alpha": " ".join(map(str, d["alpha"])), "offset": d["offset"],
                         "fibers": len(d["fibers"]), "block_residual": d["block_residual"]})
    return {mode.replace("-", "_"): rows}


def _write_csv(path: Path, rows: list) -> None:
    cols = []
    for row in rows:
        cols.extend(c for c in row if c not in cols)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in row.items()})


def write_outputs(report: RunReport, out_dir, stable: bool = False, plots: bool = True) -> dict:
    """Write ``report.json``, ``potential.json``, ``tables/*.csv`` and ``plots/*.svg``."""
    from .plots import make_plots

    out = Path(out_dir)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json", "potential": out / "potential.json"}
    paths["report"].write_text(report.dumps(stable))
    Potential.from_json(report.potential).save(paths["potential"])
    for name, rows in _table_rows(report).items():
        p = out / "tables" / f"{name}.csv"
        _write_csv(p, rows)
        paths[f"table:{name}"] = p
    if plots:
        (out / "plots").mkdir(exist_ok=True)
        for p in make_plots(report, out / "plots"):
            paths[f"plot:{p.stem}"] = p
    return paths
