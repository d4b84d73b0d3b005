"""Overlap (Gram) blocks of the non-orthogonal basis ``{|a_i>, a^+|a_i>}``.

For real coherent amplitudes the inner products are all closed form::

    <a_i|a_j>        = exp(-(a_i - a_j)^2 / 2)            (G)
    <a_i|a^+|a_j>    = a_i exp(-(a_i - a_j)^2 / 2)        (D_a G)
    <a_i|a a^+|a_j>  = (a_i a_j + 1) exp(-(a_i - a_j)^2/2) (D_a G D_a + G)

The full 2N x 2N Gram matrix is positive definite whenever the positions are
distinct, but ``G`` becomes numerically singular as the separations shrink:
its condition number grows like ``separation ** (-2 (N - 1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _linalg as la
from .errors import ConditioningFailure
from .model import Mode, SourceConfiguration, validate

#: Largest 1-norm condition number of G accepted in double precision.
MAX_COND_DOUBLE = 1e15
#: Digits that must survive the conditioning loss on the extended path.
GUARD_DIGITS = 20


def coherent_overlap(alpha_i: float, alpha_j: float) -> float:
    """Overlap ``<alpha_i|alpha_j>`` of two real coherent states."""
    return math.exp(-0.5 * (alpha_i - alpha_j) ** 2)


@dataclass(frozen=True)
class GramBlocks:
    """The three distinct blocks of the Gram matrix plus the diagonals used to build them.

    Arrays are float64, or object arrays of mpf when built with ``dps``.
    ``cond`` is the 1-norm condition number of ``upsilon_aa``.
    """

    upsilon_aa: np.ndarray
    upsilon_ad: np.ndarray
    upsilon_dd: np.ndarray
    alphas: np.ndarray
    weights: np.ndarray
    cond: float
    dps: int | None = None

    @property
    def n(self) -> int:
        return self.upsilon_aa.shape[0]

    @property
    def d_alpha(self) -> np.ndarray:
        return np.diag(self.alphas)

    @property
    def d_w(self) -> np.ndarray:
        return np.diag(self.weights)

    @property
    def upsilon_da(self) -> np.ndarray:
        return self.upsilon_ad.T

    def full(self) -> np.ndarray:
        """Assemble the 2N x 2N Gram matrix."""
        return np.block([[self.upsilon_aa, self.upsilon_ad],
                         [self.upsilon_da, self.upsilon_dd]])


def _overlap_matrix(a: np.ndarray) -> np.ndarray:
    diff = a[:, None] - a[None, :]
    return la.exp(-(diff * diff) / 2)


def build_gram_blocks(config: SourceConfiguration, dps: int | None = None) -> GramBlocks:
    """Gram blocks for a configuration.

    With ``dps=None`` everything is float64 and a :class:`ConditioningFailure`
    is raised once ``cond_1(G) > 1e15``.  With ``dps`` set the blocks are
    mpmath object arrays and the limit becomes ``10 ** (dps - 20)``.
    """
    config = validate(config, Mode.ANALYTIC)
    with la.precision(dps):
        a = la.asarray(config.alphas, dps)
        w = la.asarray(config.weights, dps)
        g = _overlap_matrix(a)
        ad = a[:, None] * g
        dd = a[:, None] * g * a[None, :] + g
        cond = la.cond1(g)
    limit = MAX_COND_DOUBLE if dps is None else 10.0 ** (dps - GUARD_DIGITS)
    if not cond < limit:
        raise ConditioningFailure(
            f"cond_1(G) = {cond:.3e} exceeds {limit:.1e} "
            f"(min separation {config.min_separation():.3e}); "
            + ("raise the working precision" if dps is None else f"dps={dps} is too low")
        )
    return GramBlocks(g, ad, dd, a, w, cond, dps)


class InverseBlocks(NamedTuple):
    aa: np.ndarray
    ad: np.ndarray
    da: np.ndarray
    dd: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.aa, self.ad], [self.da, self.dd]])


def blockwise_inverse(gram: GramBlocks) -> InverseBlocks:
    """Blocks of the inverse Gram matrix via the Schur complement of ``G``.

    ``dd`` is the inverse of ``Y_dd - Y_da G^-1 Y_ad``; the remaining blocks
    follow from the standard partitioned-inverse identities.
    """
    with la.precision(gram.dps):
        g_fac = la.cho_factor(gram.upsilon_aa)
        g_inv_ad = la.cho_solve(g_fac, gram.upsilon_ad)      # G^-1 Y_ad
        schur = gram.upsilon_dd - gram.upsilon_da @ g_inv_ad
        schur = (schur + schur.T) / 2
        dd = la.spd_inverse(schur)
        ad = -(g_inv_ad @ dd)
        da = ad.T
        aa = la.spd_inverse(gram.upsilon_aa) + g_inv_ad @ dd @ g_inv_ad.T
    return InverseBlocks(aa, ad, da, dd)


def schur_complement(gram: GramBlocks) -> np.ndarray:
    """``Y_dd - Y_da G^-1 Y_ad``, positive definite for distinct positions."""
    with la.precision(gram.dps):
        g_inv_ad = la.cho_solve(la.cho_factor(gram.upsilon_aa), gram.upsilon_ad)
        s = gram.upsilon_dd - gram.upsilon_da @ g_inv_ad
        return (s + s.T) / 2
