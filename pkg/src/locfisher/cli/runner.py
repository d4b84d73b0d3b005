"""Sweep evaluation and table output."""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..cfim import DetectionKind, DetectionModel, direct_imaging_cfim, spade_cfim
from ..model import FisherMatrix, PSFKind
from ..qfim_analytic import analytic_qfim
from ..qfim_numeric import converged_qfim
from ..qubit import qubit_qfim
from ..spectra import SpectralReport, crb_bound, eigen_report, fit_scaling
from .config import RunConfig

FLOAT_FORMAT = "%.16e"


@dataclass(frozen=True)
class PointResult:
    x: float
    l: float
    matrix: np.ndarray
    report: SpectralReport
    diagnostics: dict


def compute_fisher(cfg: RunConfig, computation: str, x: float) -> FisherMatrix:
    """One Fisher matrix at scale ``x``."""
    config = cfg.sources.at(x)
    opts = cfg.options
    if computation == "qfim_analytic":
        return analytic_qfim(config, dps=opts.precision)
    if computation == "qfim_numeric":
        dps = opts.precision if isinstance(opts.precision, int) else None
        if cfg.psf.kind is PSFKind.SINC:
            dps = None
        return converged_qfim(config, cfg.psf, dps=dps, dim=opts.numeric_dim)
    if computation == "qubit":
        return qubit_qfim(config)
    if computation == "cfim_spade":
        return spade_cfim(config, opts.detection)
    if computation == "cfim_direct":
        d = opts.detection
        model = DetectionModel(DetectionKind.DIRECT_IMAGING, points=d.points,
                               half_width=d.half_width, pixel_width=d.pixel_width)
        return direct_imaging_cfim(config, cfg.psf, model)
    raise ValueError(computation)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if value is None or isinstance(value, str):
        return value
    return str(value)


def evaluate_point(cfg: RunConfig, computation: str, x: float) -> PointResult:
    f = compute_fisher(cfg, computation, x)
    report = eigen_report(f, cfg.analysis.rank_tol)
    return PointResult(float(x), float(cfg.sources.extent * x), np.array(f.entries),
                       report, _jsonable(f.diagnostics))


def _evaluate(args):
    return evaluate_point(*args)


def run_sweep(cfg: RunConfig, computation: str, workers: int = 1) -> list[PointResult]:
    """Evaluate every sweep point; results come back in sweep order."""
    tasks = [(cfg, computation, float(x)) for x in cfg.sweep.values()]
    if workers <= 1 or len(tasks) == 1:
        return [_evaluate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate, tasks))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT % value


def eigen_table(results: Sequence[PointResult]) -> tuple[list[str], list[list]]:
    n = len(results[0].report.eigenvalues)
    header = ["x", "l"] + [f"eig_{k}" for k in range(1, n + 1)] + ["rank", "cond_warning"]
    rows = [[r.x, r.l, *r.report.eigenvalues, r.report.rank, r.report.cond_warning] for r in results]
    return header, rows


def matrix_table(results: Sequence[PointResult], labels: Sequence[str]) -> tuple[list[str], list[list]]:
    header = ["x", "l"] + [f"{a}:{b}" for a in labels for b in labels]
    rows = [[r.x, r.l, *r.matrix.reshape(-1)] for r in results]
    return header, rows


def compare_table(first: Sequence[PointResult], second: Sequence[PointResult]):
    n = len(first[0].report.eigenvalues)
    header = ["x", "l"]
    for k in range(1, n + 1):
        header += [f"qeig_{k}", f"ceig_{k}"]
    header += ["qrank", "crank", "cond_warning"]
    rows = []
    for a, b in zip(first, second):
        row = [a.x, a.l]
        for qa, cb in zip(a.report.eigenvalues, b.report.eigenvalues):
            row += [qa, cb]
        row += [a.report.rank, b.report.rank, a.report.cond_warning or b.report.cond_warning]
        rows.append(row)
    return header, rows


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def render_json(header, rows, extra: dict) -> str:
    payload = {"columns": list(header),
               "rows": [[_jsonable(v) if not isinstance(v, (bool, np.bool_)) else int(v) for v in row]
                        for row in rows]}
    payload.update(_jsonable(extra))
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def fit_summary(cfg: RunConfig, results: Sequence[PointResult]) -> dict:
    fit = fit_scaling([(r.l, r.report) for r in results], cfg.analysis.fit_window,
                      cfg.analysis.fit_indices)
    return {
        "indices": [r.index for r in fit.records],
        "slopes": [r.slope for r in fit.records],
        "intercepts": [r.intercept for r in fit.records],
        "stderr": [r.stderr for r in fit.records],
        "window": list(fit.records[0].window),
        "points": len(fit.records[0].sizes),
    }


def crb_summary(cfg: RunConfig, computation: str, results: Sequence[PointResult]) -> list[dict]:
    out = []
    for r in results:
        f = FisherMatrix(r.matrix, "quantum" if computation.startswith("q") else "classical")
        res = crb_bound(f, cfg.budget)
        out.append({"x": r.x, "support_dim": res.support_dim,
                    "variances": [None if not math.isfinite(v) else v for v in res.variances],
                    "covariance": res.covariance.tolist()})
    return out


def _metadata(cfg: RunConfig, computation: str, results: Sequence[PointResult]) -> dict:
    meta = {"computation": computation,
            "diagnostics": [dict(r.diagnostics, x=r.x) for r in results]}
    if cfg.analysis.fit:
        meta["fit"] = fit_summary(cfg, results)
    if cfg.analysis.crb:
        meta["crb"] = crb_summary(cfg, computation, results)
    return meta


@dataclass(frozen=True)
class RunOutput:
    """Rendered data file plus the sidecar metadata (diagnostics, fits, CRBs)."""

    data: str
    metadata: dict
    extra_tables: dict


def build_run_output(cfg: RunConfig, results: Sequence[PointResult], fmt: str,
                     computation: str | None = None) -> RunOutput:
    computation = computation or cfg.computation
    meta = _metadata(cfg, computation, results)
    labels = [f"alpha_{i + 1}" for i in range(len(cfg.sources.offsets))]
    tables = {}
    if cfg.analysis.eigen:
        header, rows = eigen_table(results)
        if cfg.analysis.matrix:
            tables["matrix"] = matrix_table(results, labels)
    else:
        header, rows = matrix_table(results, labels)
    if fmt == "json":
        data = render_json(header, rows, meta)
        extra = {k: render_json(h, r, {}) for k, (h, r) in tables.items()}
    else:
        data = render_csv(header, rows)
        extra = {k: render_csv(h, r) for k, (h, r) in tables.items()}
    return RunOutput(data, meta, extra)


def build_compare_output(cfg: RunConfig, first, second, fmt: str) -> RunOutput:
    header, rows = compare_table(first, second)
    meta = {"computations": list(cfg.computations),
            "diagnostics": [[dict(a.diagnostics, x=a.x), dict(b.diagnostics, x=b.x)]
                            for a, b in zip(first, second)]}
    if cfg.analysis.fit:
        meta["fit"] = [fit_summary(cfg, first), fit_summary(cfg, second)]
    data = render_json(header, rows, meta) if fmt == "json" else render_csv(header, rows)
    return RunOutput(data, meta, {})


def write_output(out: RunOutput, path: str | Path | None, fmt: str, stream=None) -> list[Path]:
    """Write the data file, any extra tables and (for CSV) a ``.meta.json`` sidecar."""
    if path is None:
        (stream or io.StringIO()).write(out.data)
        return []
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = [path]
    with open(path, "w", newline="\n") as fh:
        fh.write(out.data)
    for name, text in out.extra_tables.items():
        extra = path.with_name(f"{path.stem}.{name}{path.suffix}")
        with open(extra, "w", newline="\n") as fh:
            fh.write(text)
        written.append(extra)
    if fmt == "csv":
        side = path.with_name(path.name + ".meta.json")
        with open(side, "w", newline="\n") as fh:
            fh.write(json.dumps(_jsonable(out.metadata), indent=2, sort_keys=True) + "\n")
        written.append(side)
    return written
