"""Domain types shared by every computation.

All positions are dimensionless, ``alpha = chi / (2 sigma)`` where ``chi`` is
the physical position of a source and ``sigma`` the PSF width.
:meth:`SourceConfiguration.from_physical` converts from physical units.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CoincidentSources,
    ConfigurationError,
    EmptyConfig,
    NonFiniteInput,
    NonpositiveWeight,
)

COINCIDENCE_TOL = 1e-12
NORMALIZATION_TOL = 1e-12
PSD_TOL = 1e-9


class PSFKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    SINC = "sinc"


class FisherKind(str, enum.Enum):
    QUANTUM = "quantum"
    CLASSICAL = "classical"


class Mode(str, enum.Enum):
    """Which computation a configuration is validated for."""

    ANALYTIC = "analytic"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class SourceConfiguration:
    """Positions and relative intensities of N incoherent point sources."""

    alphas: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def equal_weights(cls, alphas: Sequence[float]) -> "SourceConfiguration":
        n = len(alphas)
        return cls(tuple(alphas), (1.0 / n,) * n if n else ())

    @classmethod
    def from_physical(cls, positions, weights, sigma: float) -> "SourceConfiguration":
        if not sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {sigma}")
        return cls(tuple(p / (2.0 * sigma) for p in positions), tuple(weights))

    @property
    def n(self) -> int:
        return len(self.alphas)

    @property
    def alpha_array(self) -> np.ndarray:
        return np.array(self.alphas, dtype=float)

    @property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    @property
    def centroid(self) -> float:
        return float(np.dot(self.weights, self.alphas) / sum(self.weights))

    @property
    def extent(self) -> float:
        """Size of the distribution, ``max(alpha) - min(alpha)``."""
        return max(self.alphas) - min(self.alphas)

    def min_separation(self) -> float:
        if self.n < 2:
            return math.inf
        a = np.sort(self.alpha_array)
        return float(np.min(np.diff(a)))

    def shifted(self, delta: float) -> "SourceConfiguration":
        return SourceConfiguration(tuple(a + delta for a in self.alphas), self.weights)


@dataclass(frozen=True)
class PSFModel:
    kind: PSFKind = PSFKind.GAUSSIAN
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PSFKind(self.kind))
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigurationError(f"PSF width must be positive, got {self.sigma}")


@dataclass(frozen=True)
class PhotonBudget:
    """``coherence_windows`` (M) times ``photon_probability`` (epsilon) photons."""

    coherence_windows: int
    photon_probability: float

    def __post_init__(self):
        if int(self.coherence_windows) != self.coherence_windows or self.coherence_windows < 1:
            raise ConfigurationError("coherence_windows must be an integer >= 1")
        if not 0.0 < self.photon_probability < 1.0:
            raise ConfigurationError("photon_probability must lie in (0, 1)")

    @property
    def photons(self) -> float:
        return self.coherence_windows * self.photon_probability


def default_labels(n: int) -> tuple[str, ...]:
    return tuple(f"alpha_{i + 1}" for i in range(n))


@dataclass(frozen=True)
class FisherMatrix:
    """Symmetric information matrix.

    ``entries`` always holds a float64 copy.  Extended-precision computations
    additionally keep ``precise``, an object array of ``mpmath.mpf`` evaluated
    at ``dps`` decimal digits; spectral analysis uses it when present, since
    the small eigenvalues in the sub-Rayleigh regime lie far below double
    precision roundoff.

    Symmetry is enforced on construction by mirroring the lower triangle.
    """

    entries: np.ndarray
    kind: FisherKind
    labels: tuple[str, ...] = ()
    precise: np.ndarray | None = None
    dps: int | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"Fisher matrix must be square, got shape {m.shape}")
        m = np.tril(m) + np.tril(m, -1).T
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "kind", FisherKind(self.kind))
        if not self.labels:
            object.__setattr__(self, "labels", default_labels(m.shape[0]))
        elif len(self.labels) != m.shape[0]:
            raise ValueError("one label per parameter is required")
        else:
            object.__setattr__(self, "labels", tuple(self.labels))
        if self.precise is not None:
            p = np.array(self.precise, dtype=object)
            # select rather than add: mpf arithmetic would round to the ambient precision
            lower = np.tril(np.ones(p.shape, dtype=bool))
            p = np.where(lower, p, p.T)
            object.__setattr__(self, "precise", p)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def min_eigenvalue_ratio(self) -> float:
        ev = np.linalg.eigvalsh(self.entries)
        return float(ev[0] / max(1.0, ev[-1]))

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return self.min_eigenvalue_ratio() >= -tol


def validate(config: SourceConfiguration, mode: Mode | str = Mode.ANALYTIC) -> SourceConfiguration:
    """Check a configuration and return it with weights normalized to sum to one.

    Raises
    ------
    EmptyConfig, NonFiniteInput, NonpositiveWeight
        For malformed input in either mode.
    CoincidentSources
        In analytic mode only, when two positions are closer than 1e-12.
    """
    mode = Mode(mode)
    if config.n == 0:
        raise EmptyConfig("at least one source is required")
    if len(config.weights) != config.n:
        raise ConfigurationError(
            f"{config.n} positions but {len(config.weights)} weights"
        )
    a = config.alpha_array
    w = config.weight_array
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))):
        raise NonFiniteInput("positions and weights must be finite")
    if np.any(w <= 0):
        raise NonpositiveWeight(f"weights must be positive, got {config.weights}")
    if mode is Mode.ANALYTIC and config.min_separation() < COINCIDENCE_TOL:
        raise CoincidentSources(
            "the closed-form QFIM needs pairwise distinct positions; "
            "use the numeric path for coincident sources"
        )
    total = float(np.sum(w))
    if abs(total - 1.0) <= NORMALIZATION_TOL:
        return config
    warnings.warn(f"weights sum to {total!r}; normalizing", stacklevel=2)
    return SourceConfiguration(config.alphas, tuple(w / total))
