"""Randomized cross-checks of the closed-form QFIM against the truncated-basis oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PSFModel, SourceConfiguration
from .qfim_analytic import analytic_qfim
from .qfim_numeric import converged_qfim


def random_configuration(rng: np.random.Generator, n: int, bound: float = 2.0,
                         min_separation: float = 0.05, max_tries: int = 10_000) -> SourceConfiguration:
    """Positions uniform in ``[-bound, bound]`` (rejection-sampled for separation), random weights."""
    for _ in range(max_tries):
        a = np.sort(rng.uniform(-bound, bound, n))
        if n == 1 or np.min(np.diff(a)) >= min_separation:
            w = rng.uniform(0.1, 1.0, n)
            return SourceConfiguration(tuple(a), tuple(w / w.sum()))
    raise RuntimeError("could not place sources with the requested separation")


def relative_deviation(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    """Largest ``|a - b| / max(|b|, floor * max|b|)`` over all elements."""
    b = np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(b), floor * np.max(np.abs(b)))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - b) / scale))


@dataclass(frozen=True)
class OracleSample:
    config: SourceConfiguration
    deviation: float
    dim: int


def oracle_check(n: int = 3, samples: int = 10, seed: int = 7) -> list[OracleSample]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(samples):
        config = random_configuration(rng, n)
        q = analytic_qfim(config, dps="auto")
        ref = converged_qfim(config, PSFModel())
        out.append(OracleSample(config, relative_deviation(q.entries, ref.entries),
                                ref.diagnostics["dim"]))
    return out
