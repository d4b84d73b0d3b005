"""Run configuration: JSON schema, strict parsing and source generation.

Every position is ``pattern_i * x`` where ``x`` is the sweep parameter.  The
pattern is either listed explicitly or generated: ``equispaced`` gives
``i = 1..N`` (or ``i - ceil(N/2)`` when centered), ``offsets`` takes a
user-supplied list.  Without a sweep, a single point ``x = 1`` is evaluated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..cfim import DetectionModel
from ..errors import ConfigurationError
from ..model import PhotonBudget, PSFKind, PSFModel, SourceConfiguration

COMPUTATIONS = ("qfim_analytic", "qfim_numeric", "qubit", "cfim_spade", "cfim_direct")
FORMATS = ("csv", "json")

_TOP_KEYS = {"sources", "psf", "computation", "sweep", "analysis", "budget", "output", "options"}
_SOURCE_KEYS = {"explicit", "generator"}
_GENERATOR_KEYS = {"count", "spacing", "offsets", "centered", "weights"}
_PSF_KEYS = {"kind", "sigma"}
_SWEEP_KEYS = {"parameter", "from", "to", "points", "log_scale"}
_ANALYSIS_KEYS = {"eigen", "fit", "rank", "crb", "matrix", "rank_tol", "fit_window", "fit_indices"}
_BUDGET_KEYS = {"coherence_windows", "photon_probability"}
_OUTPUT_KEYS = {"format", "path"}
_OPTION_KEYS = {"precision", "spade", "direct", "numeric_dim"}
_SPADE_KEYS = {"modes", "center"}
_DIRECT_KEYS = {"points", "half_width", "pixel_width"}


def _check_keys(obj: Any, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{where} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    return obj


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{where} must be a number")
    if not math.isfinite(value):
        raise ConfigurationError(f"{where} must be finite")
    return float(value)


def _integer(value: Any, where: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigurationError(f"{where} must be an integer >= {minimum}")
    return value


def _flag(value: Any, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f"{where} must be true or false")
    return value


@dataclass(frozen=True)
class SourcePattern:
    offsets: tuple[float, ...]
    weights: tuple[float, ...]

    def at(self, x: float) -> SourceConfiguration:
        return SourceConfiguration(tuple(o * x for o in self.offsets), self.weights)

    @property
    def extent(self) -> float:
        return max(self.offsets) - min(self.offsets)


@dataclass(frozen=True)
class Sweep:
    start: float = 1.0
    stop: float = 1.0
    points: int = 1
    log_scale: bool = False

    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.start])
        if self.log_scale:
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class Analysis:
    eigen: bool = True
    fit: bool = False
    rank: bool = True
    crb: bool = False
    matrix: bool = False
    rank_tol: float = 1e-3
    fit_window: tuple[float, float] | None = None
    fit_indices: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Options:
    precision: int | str | None = "auto"
    detection: DetectionModel = field(default_factory=DetectionModel)
    numeric_dim: int | None = None


@dataclass(frozen=True)
class RunConfig:
    sources: SourcePattern
    computations: tuple[str, ...]
    psf: PSFModel = field(default_factory=PSFModel)
    sweep: Sweep = field(default_factory=Sweep)
    analysis: Analysis = field(default_factory=Analysis)
    budget: PhotonBudget | None = None
    output_format: str = "csv"
    output_path: str | None = None
    options: Options = field(default_factory=Options)

    @property
    def computation(self) -> str:
        return self.computations[0]


def _parse_sources(obj: Any) -> SourcePattern:
    obj = _check_keys(obj, _SOURCE_KEYS, "sources")
    if len(obj) != 1:
        raise ConfigurationError("sources needs exactly one of 'explicit' or 'generator'")
    if "explicit" in obj:
        rows = obj["explicit"]
        if not isinstance(rows, list) or not rows:
            raise ConfigurationError("sources.explicit must be a non-empty list of [alpha, weight]")
        offsets, weights = [], []
        for k, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != 2:
                raise ConfigurationError(f"sources.explicit[{k}] must be [alpha, weight]")
            offsets.append(_number(row[0], f"sources.explicit[{k}][0]"))
            weights.append(_number(row[1], f"sources.explicit[{k}][1]"))
        return SourcePattern(tuple(offsets), tuple(weights))

    gen = _check_keys(obj["generator"], _GENERATOR_KEYS, "sources.generator")
    spacing = gen.get("spacing", "equispaced")
    if spacing == "equispaced":
        if "offsets" in gen:
            raise ConfigurationError("sources.generator.offsets requires spacing 'offsets'")
        n = _integer(gen.get("count"), "sources.generator.count", 1)
        shift = math.ceil(n / 2) if _flag(gen.get("centered", False), "sources.generator.centered") else 0
        offsets = [float(i - shift) for i in range(1, n + 1)]
    elif spacing == "offsets":
        raw = gen.get("offsets")
        if not isinstance(raw, list) or not raw:
            raise ConfigurationError("sources.generator.offsets must be a non-empty list")
        offsets = [_number(v, f"sources.generator.offsets[{k}]") for k, v in enumerate(raw)]
        if "count" in gen and _integer(gen["count"], "sources.generator.count", 1) != len(offsets):
            raise ConfigurationError("sources.generator.count disagrees with the offsets list")
        if _flag(gen.get("centered", False), "sources.generator.centered"):
            mid = sum(offsets) / len(offsets)
            offsets = [o - mid for o in offsets]
    else:
        raise ConfigurationError(f"unknown spacing {spacing!r} (equispaced | offsets)")
    n = len(offsets)
    if "weights" in gen:
        raw = gen["weights"]
        if not isinstance(raw, list) or len(raw) != n:
            raise ConfigurationError(f"sources.generator.weights must list {n} numbers")
        weights = [_number(v, f"sources.generator.weights[{k}]") for k, v in enumerate(raw)]
    else:
        weights = [1.0 / n] * n
    return SourcePattern(tuple(offsets), tuple(weights))


def _parse_sweep(obj: Any) -> Sweep:
    obj = _check_keys(obj, _SWEEP_KEYS, "sweep")
    if obj.get("parameter", "x") != "x":
        raise ConfigurationError("only the scale parameter 'x' can be swept")
    start = _number(obj.get("from"), "sweep.from")
    stop = _number(obj.get("to"), "sweep.to")
    points = _integer(obj.get("points"), "sweep.points", 2)
    log_scale = _flag(obj.get("log_scale", False), "sweep.log_scale")
    if log_scale and not (start > 0 and stop > 0):
        raise ConfigurationError("a log-scale sweep needs positive endpoints")
    if not stop > start:
        raise ConfigurationError("sweep.to must exceed sweep.from")
    return Sweep(start, stop, points, log_scale)


def _parse_analysis(obj: Any) -> Analysis:
    obj = _check_keys(obj, _ANALYSIS_KEYS, "analysis")
    flags = {k: _flag(obj[k], f"analysis.{k}") for k in ("eigen", "fit", "rank", "crb", "matrix") if k in obj}
    rank_tol = _number(obj.get("rank_tol", 1e-3), "analysis.rank_tol")
    if not 0 < rank_tol < 1:
        raise ConfigurationError("analysis.rank_tol must lie in (0, 1)")
    window = obj.get("fit_window")
    if window is not None:
        if not isinstance(window, list) or len(window) != 2:
            raise ConfigurationError("analysis.fit_window must be [lo, hi]")
        window = (_number(window[0], "analysis.fit_window[0]"), _number(window[1], "analysis.fit_window[1]"))
    indices = obj.get("fit_indices")
    if indices is not None:
        if not isinstance(indices, list) or not indices:
            raise ConfigurationError("analysis.fit_indices must be a non-empty list")
        indices = tuple(_integer(v, "analysis.fit_indices[]", 1) for v in indices)
    out = Analysis(**flags, rank_tol=rank_tol, fit_window=window, fit_indices=indices)
    if not (out.eigen or out.matrix):
        raise ConfigurationError("enable at least one of analysis.eigen or analysis.matrix")
    if out.fit and not out.eigen:
        raise ConfigurationError("analysis.fit needs analysis.eigen")
    return out


def _parse_options(obj: Any) -> Options:
    obj = _check_keys(obj, _OPTION_KEYS, "options")
    precision = obj.get("precision", "auto")
    if precision not in ("auto", None):
        precision = _integer(precision, "options.precision", 16)
    spade = _check_keys(obj.get("spade", {}), _SPADE_KEYS, "options.spade")
    direct = _check_keys(obj.get("direct", {}), _DIRECT_KEYS, "options.direct")
    center = spade.get("center", 0.0)
    if center != "centroid":
        center = _number(center, "options.spade.center")
    detection = DetectionModel(
        spade_modes=_integer(spade.get("modes", 20), "options.spade.modes", 1),
        spade_center=center,
        points=None if direct.get("points") is None else _integer(direct["points"], "options.direct.points", 201),
        half_width=None if direct.get("half_width") is None else _number(direct["half_width"], "options.direct.half_width"),
        pixel_width=None if direct.get("pixel_width") is None else _number(direct["pixel_width"], "options.direct.pixel_width"),
    )
    dim = obj.get("numeric_dim")
    if dim is not None:
        dim = _integer(dim, "options.numeric_dim", 2)
    return Options(precision, detection, dim)


def parse_config(obj: Any) -> RunConfig:
    """Validate a decoded JSON object and build a :class:`RunConfig`.

    Raises
    ------
    ConfigurationError
        On unknown keys, missing fields, or values of the wrong type.
    """
    obj = _check_keys(obj, _TOP_KEYS, "config")
    if "sources" not in obj or "computation" not in obj:
        raise ConfigurationError("config needs 'sources' and 'computation'")
    comp = obj["computation"]
    comps = tuple(comp) if isinstance(comp, list) else (comp,)
    if not 1 <= len(comps) <= 2:
        raise ConfigurationError("computation must be a name or a list of two names")
    for c in comps:
        if c not in COMPUTATIONS:
            raise ConfigurationError(f"unknown computation {c!r} (one of {', '.join(COMPUTATIONS)})")
    psf_obj = _check_keys(obj.get("psf", {}), _PSF_KEYS, "psf")
    try:
        psf = PSFModel(PSFKind(psf_obj.get("kind", "gaussian")),
                       _number(psf_obj.get("sigma", 1.0), "psf.sigma"))
    except ValueError as exc:
        raise ConfigurationError(f"psf: {exc}") from exc
    if psf.kind is PSFKind.SINC and {"qfim_analytic", "qubit", "cfim_spade"} & set(comps):
        raise ConfigurationError("the sinc PSF supports only qfim_numeric and cfim_direct")
    budget = None
    if "budget" in obj:
        b = _check_keys(obj["budget"], _BUDGET_KEYS, "budget")
        budget = PhotonBudget(_integer(b.get("coherence_windows"), "budget.coherence_windows", 1),
                              _number(b.get("photon_probability"), "budget.photon_probability"))
    out = _check_keys(obj.get("output", {}), _OUTPUT_KEYS, "output")
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigurationError(f"output.format must be csv or json, got {fmt!r}")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigurationError("output.path must be a string")
    analysis = _parse_analysis(obj.get("analysis", {}))
    if analysis.crb and budget is None:
        raise ConfigurationError("analysis.crb needs a budget")
    return RunConfig(
        sources=_parse_sources(obj["sources"]),
        computations=comps,
        psf=psf,
        sweep=_parse_sweep(obj["sweep"]) if "sweep" in obj else Sweep(),
        analysis=analysis,
        budget=budget,
        output_format=fmt,
        output_path=path,
        options=_parse_options(obj.get("options", {})),
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(obj)
