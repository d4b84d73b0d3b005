"""Eigenvalues, numerical rank, power-law fits, reparameterization and CRBs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from . import _linalg as la
from .errors import DegenerateFit, SingularTransform
from .model import FisherKind, FisherMatrix, PhotonBudget

DEFAULT_RANK_TOL = 1e-3
EIGEN_FLOOR = 1e-300
UNDERFLOW = 1e-250
MIN_FIT_POINTS = 5
NEAR_SINGULAR_DET = 1e-12


@dataclass(frozen=True)
class SpectralReport:
    """Descending eigenvalues with a numerical rank.

    ``cond_warning`` is carried over from the analytic QFIM: it is set when
    the overlap matrix was ill conditioned enough that trailing eigenvalues
    may be roundoff.
    """

    eigenvalues: np.ndarray
    rank: int
    rel_tol: float
    matrix_kind: FisherKind
    cond_warning: bool = False

    @property
    def ratios(self) -> np.ndarray:
        return self.eigenvalues / max(self.eigenvalues[0], EIGEN_FLOOR)


def numerical_rank(eigenvalues: np.ndarray, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    top = max(float(np.max(eigenvalues)), EIGEN_FLOOR)
    return int(np.count_nonzero(eigenvalues > rel_tol * top))


def eigen_report(f: FisherMatrix, rel_tol: float = DEFAULT_RANK_TOL) -> SpectralReport:
    """Eigenvalues of the symmetrized matrix, in descending order.

    When ``f.precise`` is present the decomposition runs at ``f.dps`` digits
    and the eigenvalues are rounded to float64 afterwards, so eigenvalues
    far below ``1e-16 * max`` are still resolved.
    """
    if f.precise is not None:
        with la.precision(f.dps):
            ev = la.to_float(la.eigvalsh(f.precise))
    else:
        ev = la.eigvalsh(f.entries)
    ev = np.ascontiguousarray(ev[::-1], dtype=float)
    return SpectralReport(ev, numerical_rank(ev, rel_tol), rel_tol, f.kind,
                          bool(f.diagnostics.get("cond_warning", False)))


def degree_law(mu: int) -> int:
    """Expected power of ``l`` for the mu-th QFIM eigenvalue (1-based): ``2 floor((mu-1)/2)``."""
    return 2 * ((mu - 1) // 2)


@dataclass(frozen=True)
class ScalingRecord:
    index: int              # 1-based eigenvalue index
    slope: float
    intercept: float
    stderr: float
    window: tuple[float, float]
    sizes: tuple[float, ...]


@dataclass(frozen=True)
class ScalingFit:
    records: tuple[ScalingRecord, ...]

    @property
    def slopes(self) -> np.ndarray:
        return np.array([r.slope for r in self.records])

    def __getitem__(self, index: int) -> ScalingRecord:
        for r in self.records:
            if r.index == index:
                return r
        raise KeyError(index)


def _default_window(sizes: np.ndarray) -> tuple[float, float]:
    lo = float(np.min(sizes))
    return lo, 10.0 * lo * (1 + 1e-12)


def fit_scaling(sweep: Sequence[tuple[float, SpectralReport]],
                window: tuple[float, float] | None = None,
                indices: Sequence[int] | None = None) -> ScalingFit:
    """Least-squares slope of ``log10(eigenvalue)`` against ``log10(l)``.

    Parameters
    ----------
    sweep : sequence of (l, SpectralReport)
        Sizes must be positive.
    window : (lo, hi), optional
        Inclusive range of ``l`` used for the fit.  Defaults to the smallest
        decade present, skipping points flagged with ``cond_warning``.
    indices : sequence of int, optional
        1-based eigenvalue indices to fit (default all).

    Raises
    ------
    DegenerateFit
        Fewer than five points in the window, or an eigenvalue in the window
        below 1e-250 (underflow or a numerically vanishing direction).
    """
    sizes = np.array([s for s, _ in sweep], dtype=float)
    if len(sizes) < MIN_FIT_POINTS:
        raise DegenerateFit(f"need at least {MIN_FIT_POINTS} sweep points, got {len(sizes)}")
    if np.any(~(sizes > 0)):
        raise DegenerateFit("sweep sizes must be positive")
    flagged = np.array([r.cond_warning for _, r in sweep])
    if window is None:
        lo, hi = _default_window(sizes)
        use = (sizes >= lo) & (sizes <= hi) & ~flagged
    else:
        lo, hi = window
        use = (sizes >= lo) & (sizes <= hi)
    if np.count_nonzero(use) < MIN_FIT_POINTS:
        raise DegenerateFit(
            f"only {np.count_nonzero(use)} sweep points fall in the window [{lo:.3g}, {hi:.3g}]"
        )
    reports = [r for (_, r), u in zip(sweep, use) if u]
    eig = np.array([r.eigenvalues for r in reports])
    x = np.log10(sizes[use])
    indices = range(1, eig.shape[1] + 1) if indices is None else indices
    records = []
    for mu in indices:
        col = eig[:, mu - 1]
        if np.any(~(col >= UNDERFLOW)):
            raise DegenerateFit(
                f"eigenvalue {mu} drops to {np.min(col):.3e} inside the fit window"
            )
        res = stats.linregress(x, np.log10(col))
        records.append(ScalingRecord(int(mu), float(res.slope), float(res.intercept),
                                     float(res.stderr), (float(lo), float(hi)),
                                     tuple(float(s) for s in sizes[use])))
    return ScalingFit(tuple(records))


def reparameterize(f: FisherMatrix, b: np.ndarray, labels: Sequence[str] = ()) -> FisherMatrix:
    """Fisher matrix of new parameters ``a'``: ``B F B^T`` with ``B[k, i] = d a_i / d a'_k``.

    Raises
    ------
    SingularTransform
        If ``det(B)`` is exactly zero.  A warning is issued for
        ``|det(B)| < 1e-12``.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != f.entries.shape:
        raise ValueError(f"transform must be {f.entries.shape}, got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("transform entries must be finite")
    det = np.linalg.det(b)
    if det == 0.0:
        raise SingularTransform("the parameter transformation is singular")
    if abs(det) < NEAR_SINGULAR_DET:
        warnings.warn(f"near-singular parameter transformation (det = {det:.3e})", stacklevel=2)
    out = b @ f.entries @ b.T
    precise = None
    if f.precise is not None:
        with la.precision(f.dps):
            bp = la.asarray(b, f.dps)
            precise = bp @ f.precise @ bp.T
            precise = (precise + precise.T) / 2
    return FisherMatrix((out + out.T) / 2, f.kind, tuple(labels), precise, f.dps,
                        dict(f.diagnostics, transformed=True))


def centroid_separation_transform() -> np.ndarray:
    """``B`` for ``(c, s)`` with ``a_1 = c - s``, ``a_2 = c + s``."""
    return np.array([[1.0, 1.0], [-1.0, 1.0]])


@dataclass(frozen=True)
class CRBResult:
    """Cramer-Rao covariance bound restricted to the information support.

    ``variances`` holds NaN for parameters whose direction is not inside the
    support: no unbiased estimator of those has finite variance.
    """

    covariance: np.ndarray
    support_dim: int
    support_basis: np.ndarray
    variances: np.ndarray

    @property
    def bounded(self) -> np.ndarray:
        return np.isfinite(self.variances)


def crb_bound(f: FisherMatrix, budget: PhotonBudget, rel_tol: float = 1e-10) -> CRBResult:
    """``(1 / (M eps)) F^+`` with ``F^+`` the pseudo-inverse on eigenvalues above ``rel_tol * max``."""
    ev, vec = la.eigh(f.entries)
    top = max(float(ev[-1]), EIGEN_FLOOR)
    keep = ev > rel_tol * top
    basis = vec[:, keep]
    cov = (basis / ev[keep]) @ basis.T / budget.photons
    cov = (cov + cov.T) / 2
    # e_i is estimable iff it lies in the support
    leak = 1.0 - np.sum(basis * basis, axis=1)
    var = np.where(leak < 1e-8, np.diag(cov), math.nan)
    return CRBResult(cov, int(np.count_nonzero(keep)), basis, var)
