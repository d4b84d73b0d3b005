"""Closed-form quantum Fisher information matrix for a Gaussian PSF.

The state ``rho = sum_i w_i |a_i><a_i|`` and its derivatives live in the span
of ``{|a_i>, a^+|a_i>}``.  Solving the SLD equation in that basis and
eliminating the intermediate blocks leaves, with ``G`` the overlap matrix,
``X = G^-1 D_a G`` and ``S = G^-1 (x) D_w + D_w (x) G^-1``::

    Q_ij = 2 w_i w_j r_i^T S^-1 r_j
           + 4 w_i delta_ij [1 + a_i^2 - (G D_a G^-1 D_a G)_ii]

    r_j = vec(X E_j + E_j X^T - 2 a_j E_j),   E_j = e_j e_j^T

``r_j`` is the Kronecker-structured bracket ``(I (x) X + X (x) I - 2 a_j)``
applied to ``vec(E_j)``, evaluated here with the vec identity
``(A (x) B) vec(Y) = vec(B Y A^T)``.  ``S`` is factored once by Cholesky and
never inverted.

Double precision is adequate while ``cond(G)`` stays moderate (minimum
separation above roughly 1e-3 for N <= 5).  Deeper in the sub-Rayleigh
regime, pass ``dps`` (or ``dps="auto"``) to run the identical algorithm in
mpmath.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _linalg as la
from .errors import ConditioningFailure
from .gram import GramBlocks, build_gram_blocks
from .model import FisherKind, FisherMatrix, Mode, SourceConfiguration, validate

#: cond(G) above which ``dps="auto"`` leaves double precision.
AUTO_DOUBLE_COND = 1e4
#: cond(G) above which a double-precision result is flagged: more than half
#: the digits are gone and the trailing eigenvalues may be roundoff.
COND_WARNING_DOUBLE = 1e8


@dataclass(frozen=True)
class AnalyticWorkspace:
    """Factorized ``S`` plus the bracket vectors ``r_j`` (columns of ``brackets``)."""

    gram: GramBlocks
    s_factor: tuple
    brackets: np.ndarray
    diag_term: np.ndarray

    @property
    def dps(self) -> int | None:
        return self.gram.dps


def kron_sum(g_inv: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``S = G^-1 (x) D_w + D_w (x) G^-1`` as a dense N^2 x N^2 matrix."""
    n = g_inv.shape[0]
    # S[(i, k), (j, l)] = Ginv[i, j] w[k] d_kl + w[i] d_ij Ginv[k, l]
    eye = la.eye(n, g_inv)
    s = (g_inv[:, None, :, None] * (eye * w[None, :])[None, :, None, :]
         + (eye * w[None, :])[:, None, :, None] * g_inv[None, :, None, :])
    return s.reshape(n * n, n * n)


def bracket_vectors(x: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Columns ``vec(X E_j + E_j X^T - 2 a_j E_j)`` without forming Kronecker products."""
    n = x.shape[0]
    out = la.zeros((n, n, n), x)
    for j in range(n):
        out[:, j, j] += x[:, j]
        out[j, :, j] += x[:, j]
        out[j, j, j] -= 2 * alphas[j]
    # column-major vec of a symmetric matrix equals its row-major flattening
    return out.reshape(n * n, n)


def bracket_vectors_reference(x: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Same as :func:`bracket_vectors`, through explicit Kronecker products."""
    n = x.shape[0]
    eye = np.eye(n)
    cols = []
    for j in range(n):
        e = np.zeros((n, n))
        e[j, j] = 1.0
        op = np.kron(eye, x) + np.kron(x, eye) - 2 * alphas[j] * np.eye(n * n)
        cols.append(op @ e.reshape(-1, order="F"))
    return np.stack(cols, axis=1)


def auto_dps(config: SourceConfiguration) -> int | None:
    """Working precision that keeps the closed form accurate for ``config``.

    Returns None when double precision suffices.  Otherwise the digits lost
    are bounded by twice ``log10 cond(G)`` (``G`` enters through ``G^-1``
    both in ``X`` and inside ``S``); thirty guard digits are added.
    """
    config = validate(config, Mode.ANALYTIC)
    sep = config.min_separation()
    if config.n == 1:
        return None
    g = np.exp(-0.5 * np.subtract.outer(config.alpha_array, config.alpha_array) ** 2)
    cond = np.linalg.cond(g, 1)
    if math.isfinite(cond) and cond < AUTO_DOUBLE_COND:
        return None
    # cond(G) grows like sep^(-2(N-1)); size the probe to resolve it.
    probe = 30 + math.ceil(2.5 * (config.n - 1) * max(1.0, -math.log10(sep)))
    with la.precision(probe):
        a = la.asarray(config.alphas, probe)
        diff = a[:, None] - a[None, :]
        cond = la.cond1(la.exp(-(diff * diff) / 2))
    return 30 + math.ceil(2 * math.log10(cond))


def _resolve_dps(config: SourceConfiguration, dps) -> int | None:
    if dps == "auto":
        return auto_dps(config)
    if dps is not None and (int(dps) != dps or dps < 16):
        raise ValueError(f"dps must be an integer >= 16, got {dps!r}")
    return None if dps is None else int(dps)


def analytic_workspace(config: SourceConfiguration, dps: int | str | None = None) -> AnalyticWorkspace:
    dps = _resolve_dps(config, dps)
    gram = build_gram_blocks(config, dps)
    with la.precision(dps):
        g, a, w = gram.upsilon_aa, gram.alphas, gram.weights
        g_fac = la.cho_factor(g)
        g_inv = la.cho_solve(g_fac, la.eye(gram.n, g))
        g_inv = (g_inv + g_inv.T) / 2
        x = g_inv @ (a[:, None] * g)                     # G^-1 D_a G
        dag = a[:, None] * g                              # D_a G
        t_diag = np.array([dag[:, i] @ g_inv @ dag[:, i] for i in range(gram.n)],
                          dtype=g.dtype)                  # (G D_a G^-1 D_a G)_ii
        diag_term = 4 * w * (1 + a * a - t_diag)
        s = kron_sum(g_inv, w)
        try:
            s_factor = la.cho_factor(s)
        except np.linalg.LinAlgError as exc:
            raise ConditioningFailure(f"S is not numerically positive definite: {exc}") from exc
        brackets = bracket_vectors(x, a)
    return AnalyticWorkspace(gram, s_factor, brackets, diag_term)


def analytic_qfim(config: SourceConfiguration, dps: int | str | None = None) -> FisherMatrix:
    """QFIM of ``sum_i w_i |a_i><a_i|`` with respect to the positions ``a``.

    Parameters
    ----------
    config : SourceConfiguration
        Pairwise distinct positions; weights are normalized.
    dps : int, "auto" or None
        None evaluates in float64; an integer runs the same algorithm in
        mpmath at that many decimal digits; "auto" picks the precision from
        the conditioning of the overlap matrix.

    Returns
    -------
    FisherMatrix
        Quantum kind.  ``precise`` is populated on the extended path and
        ``diagnostics`` records ``cond`` and ``dps``.
    """
    config = validate(config, Mode.ANALYTIC)
    ws = analytic_workspace(config, dps)
    with la.precision(ws.dps):
        w = ws.gram.weights
        y = la.cho_solve(ws.s_factor, ws.brackets)
        q = 2 * (w[:, None] * w[None, :]) * (ws.brackets.T @ y)
        q = q + np.diag(ws.diag_term)
        q = (q + q.T) / 2
        precise = q if la.is_mp(q) else None
        entries = la.to_float(q)
    diagnostics = {"cond": ws.gram.cond, "dps": ws.dps, "method": "analytic",
                   "cond_warning": ws.dps is None and ws.gram.cond > COND_WARNING_DOUBLE}
    return FisherMatrix(entries, FisherKind.QUANTUM, precise=precise, dps=ws.dps,
                        diagnostics=diagnostics)

