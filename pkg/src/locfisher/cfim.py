"""Classical Fisher information of SPADE and of direct imaging.

SPADE projects onto Hermite-Gauss modes ``0..Q`` centred at ``center`` plus a
bucket for everything else.  Relative to that centre source i sits at
``b_i = a_i - center`` and contributes a Poisson distribution of mean
``b_i^2`` over mode numbers::

    p_q = sum_i w_i exp(-b_i^2) b_i^(2q) / q!

The centre is a property of the measurement, fixed before the data are taken,
so it is held constant when differentiating even when it is placed at the
intensity centroid.

Direct imaging measures the intensity ``p(u) = sum_i w_i |psi(u - 2 a_i)|^2``
(``u`` in units of sigma).  Its CFIM is the continuum integral
``int d_mu p d_nu p / p du`` evaluated by composite Simpson quadrature, or a
sum over pixels when ``pixel_width`` is given.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, QuadratureNonConvergence
from .model import (
    FisherKind,
    FisherMatrix,
    Mode,
    PSFKind,
    PSFModel,
    SourceConfiguration,
    validate,
)

PROBABILITY_FLOOR = 1e-15
DENSITY_FLOOR = 1e-300
QUADRATURE_RTOL = 1e-6


class DetectionKind(str, enum.Enum):
    SPADE = "spade"
    DIRECT_IMAGING = "direct"


@dataclass(frozen=True)
class DetectionModel:
    """Detection settings.

    ``spade_center`` is a position in alpha units or the string
    ``"centroid"``.  ``half_width`` and ``pixel_width`` are in units of sigma;
    the quadrature window runs from ``half_width`` below the leftmost source
    image to ``half_width`` above the rightmost one.  ``None`` for the
    quadrature settings selects PSF-dependent defaults.
    """

    kind: DetectionKind = DetectionKind.SPADE
    spade_modes: int = 20
    spade_center: float | str = 0.0
    points: int | None = None
    half_width: float | None = None
    pixel_width: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DetectionKind(self.kind))
        if self.spade_modes < 1:
            raise ConfigurationError("SPADE needs at least one mode")
        if isinstance(self.spade_center, str) and self.spade_center != "centroid":
            raise ConfigurationError(f"unknown SPADE centre {self.spade_center!r}")
        if self.points is not None and self.points < 201:
            raise ConfigurationError("direct imaging quadrature needs >= 201 points")
        if self.half_width is not None and self.half_width < 5:
            raise ConfigurationError("direct imaging half-width must be >= 5 sigma")
        if self.pixel_width is not None and not self.pixel_width > 0:
            raise ConfigurationError("pixel width must be positive")

    def center_for(self, config: SourceConfiguration) -> float:
        if self.spade_center == "centroid":
            return config.centroid
        return float(self.spade_center)


# defaults per PSF: (half width, points)
_QUADRATURE_DEFAULTS = {PSFKind.GAUSSIAN: (10.0, 4001), PSFKind.SINC: (200.0, 40001)}


@dataclass(frozen=True)
class ProbabilityModel:
    """Outcome probabilities and their derivatives, one row per parameter."""

    probs: np.ndarray
    dprobs: np.ndarray


def spade_probabilities(config: SourceConfiguration,
                        model: DetectionModel | None = None) -> ProbabilityModel:
    """Mode-count probabilities for modes ``0..spade_modes`` and the bucket (last entry)."""
    model = model or DetectionModel()
    config = validate(config, Mode.NUMERIC)
    q_max = model.spade_modes
    beta = config.alpha_array - model.center_for(config)
    w = config.weight_array
    lam = beta * beta
    q = np.arange(q_max + 1)
    # Poisson(b^2) pmf per source; xlogy gives 0 log 0 = 0 for b = 0
    pmf = np.exp(special.xlogy(q[None, :], lam[:, None]) - lam[:, None]
                 - special.gammaln(q + 1)[None, :])
    tail = special.gammainc(q_max + 1, lam)          # P[Poisson(b^2) > q_max]
    probs = np.concatenate([w @ pmf, [w @ tail]])

    # d/db [b^(2q) e^(-b^2) / q!] = pmf (2q - 2 b^2) / b
    with np.errstate(divide="ignore", invalid="ignore"):
        dpmf = pmf * (2 * q[None, :] - 2 * lam[:, None]) / beta[:, None]
    # at b = 0 every mode probability is stationary
    dpmf[beta == 0, :] = 0.0
    # bucket: d/db P[X > Q] = 2 b pmf_Q(b^2)
    dtail = 2 * beta * pmf[:, -1]
    dprobs = w[:, None] * np.column_stack([dpmf, dtail])
    return ProbabilityModel(probs, dprobs)


def classical_fisher(pm: ProbabilityModel, floor: float = PROBABILITY_FLOOR) -> np.ndarray:
    """``sum_z d_mu p_z d_nu p_z / p_z`` over outcomes with ``p_z >= floor``."""
    keep = pm.probs >= floor
    d = pm.dprobs[:, keep]
    return (d / pm.probs[keep]) @ d.T


def spade_cfim(config: SourceConfiguration, model: DetectionModel | None = None) -> FisherMatrix:
    model = model or DetectionModel()
    pm = spade_probabilities(config, model)
    return FisherMatrix(classical_fisher(pm), FisherKind.CLASSICAL,
                        diagnostics={"method": "spade", "modes": model.spade_modes,
                                     "center": model.center_for(validate(config, Mode.NUMERIC)),
                                     "bucket": float(pm.probs[-1])})


def _psf_intensity(psf: PSFKind, v: np.ndarray):
    """``|psi(v)|^2`` and its v-derivative for sigma = 1."""
    if psf is PSFKind.GAUSSIAN:
        g = np.exp(-0.5 * v * v) / math.sqrt(2 * math.pi)
        return g, -v * g
    s = np.sinc(v)                                   # sin(pi v) / (pi v)
    with np.errstate(divide="ignore", invalid="ignore"):
        ds = np.where(v == 0, 0.0, (np.cos(np.pi * v) - s) / v)
    return s * s, 2 * s * ds


def _image_density(config: SourceConfiguration, psf: PSFKind, u: np.ndarray):
    a, w = config.alpha_array, config.weight_array
    v = u[None, :] - 2 * a[:, None]
    inten, dinten = _psf_intensity(psf, v)
    p = w @ inten
    # d/da_j |psi(u - 2 a_j)|^2 = -2 (d/dv)|psi|^2
    dp = -2 * w[:, None] * dinten
    return p, dp


def _continuum_fisher(config, psf, lo, hi, points):
    u = np.linspace(lo, hi, points)
    p, dp = _image_density(config, psf, u)
    keep = p >= DENSITY_FLOOR
    integrand = np.zeros((config.n, config.n, points))
    dk = dp[:, keep]
    integrand[:, :, keep] = dk[:, None, :] * dk[None, :, :] / p[keep]
    return integrate.simpson(integrand, x=u, axis=-1)


def direct_imaging_probabilities(config: SourceConfiguration, psf: PSFModel | None = None,
                                 model: DetectionModel | None = None) -> ProbabilityModel:
    """Pixel probabilities for the binned variant.

    Pixels of width ``pixel_width`` tile the detector from a lattice point at
    least ``half_width`` beyond the outermost source image.  For the Gaussian
    PSF the two edge pixels absorb the tails, so the probabilities sum to one.
    """
    psf = psf or PSFModel()
    model = model or DetectionModel(DetectionKind.DIRECT_IMAGING, pixel_width=0.1)
    config = validate(config, Mode.NUMERIC)
    half, _ = _QUADRATURE_DEFAULTS[psf.kind]
    half = model.half_width or half
    width = model.pixel_width
    # pixel edges sit on the detector lattice k * width, independent of the sources
    first = math.floor((2 * min(config.alphas) - half) / width)
    last = math.ceil((2 * max(config.alphas) + half) / width)
    npix = last - first
    lo = first * width
    edges = width * np.arange(first, last + 1)
    if psf.kind is PSFKind.GAUSSIAN:
        a, w = config.alpha_array, config.weight_array
        z = edges[None, :] - 2 * a[:, None]
        cdf = special.ndtr(z)
        cdf[:, 0], cdf[:, -1] = 0.0, 1.0
        probs = w @ np.diff(cdf, axis=1)
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        pdf[:, 0] = pdf[:, -1] = 0.0
        # d/da_j Phi(e - 2 a_j) = -2 phi(e - 2 a_j)
        dprobs = -2 * w[:, None] * np.diff(pdf, axis=1)
        return ProbabilityModel(probs, dprobs)
    sub = 16
    fine = np.linspace(lo, edges[-1], npix * sub + 1)
    p, dp = _image_density(config, psf.kind, fine)
    step = width / sub
    cells_p = _binned(p, npix, sub, step)
    cells_dp = np.stack([_binned(row, npix, sub, step) for row in dp])
    return ProbabilityModel(cells_p, cells_dp)


def _binned(values: np.ndarray, npix: int, sub: int, step: float) -> np.ndarray:
    out = np.empty(npix)
    for k in range(npix):
        out[k] = integrate.simpson(values[k * sub:(k + 1) * sub + 1], dx=step)
    return out


def direct_imaging_cfim(config: SourceConfiguration, psf: PSFModel | None = None,
                        model: DetectionModel | None = None) -> FisherMatrix:
    """CFIM of intensity detection, in alpha units.

    Working in ``u = x / sigma`` already carries the ``(2 sigma)^2`` chain-rule
    factor, since ``u`` moves by 2 when an alpha moves by 1.

    Raises
    ------
    QuadratureNonConvergence
        If doubling the number of quadrature intervals changes any element by
        more than 1e-6 relative to the largest element.
    """
    psf = psf or PSFModel()
    model = model or DetectionModel(DetectionKind.DIRECT_IMAGING)
    config = validate(config, Mode.NUMERIC)
    if model.pixel_width is not None:
        pm = direct_imaging_probabilities(config, psf, model)
        return FisherMatrix(classical_fisher(pm), FisherKind.CLASSICAL,
                            diagnostics={"method": "direct", "pixel_width": model.pixel_width})
    half, points = _QUADRATURE_DEFAULTS[psf.kind]
    half = model.half_width or half
    points = model.points or points
    lo = 2 * min(config.alphas) - half
    hi = 2 * max(config.alphas) + half
    coarse = _continuum_fisher(config, psf.kind, lo, hi, points)
    fine = _continuum_fisher(config, psf.kind, lo, hi, 2 * points - 1)
    scale = max(float(np.max(np.abs(fine))), np.finfo(float).tiny)
    change = float(np.max(np.abs(fine - coarse))) / scale
    if change > QUADRATURE_RTOL:
        raise QuadratureNonConvergence(
            f"doubling the quadrature changed the CFIM by {change:.2e} (points={points})"
        )
    return FisherMatrix(fine, FisherKind.CLASSICAL,
                        diagnostics={"method": "direct", "points": 2 * points - 1,
                                     "half_width": half, "quadrature_change": change})
