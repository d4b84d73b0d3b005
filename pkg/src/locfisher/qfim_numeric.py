"""Truncated-basis QFIM, independent of the closed form.

The state is written in a finite orthonormal mode basis (Hermite-Gauss modes
for a Gaussian PSF, spherical-Bessel modes for a sinc PSF), diagonalized, and
the SLD equation ``2 d rho = rho L + L rho`` is solved in the eigenbasis of
``rho``::

    L_ab = 2 <a|d rho|b> / (l_a + l_b),   for l_a + l_b > tau

The kernel-kernel block of ``L`` never contributes to the QFIM and is set
to zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import special

from . import _linalg as la
from .errors import ConvergenceFailure, TruncationInsufficient
from .model import (
    FisherKind,
    FisherMatrix,
    Mode,
    PSFKind,
    PSFModel,
    SourceConfiguration,
    validate,
)

TRUNCATION_TOL = 1e-10
SUPPORT_TOL = 1e-12
CONVERGENCE_RTOL = 1e-8
MAX_DOUBLINGS = 6

# Squared norm of d|psi>/d alpha for each PSF, in alpha units.
_DERIVATIVE_NORM = {PSFKind.GAUSSIAN: 1.0, PSFKind.SINC: 4.0 * math.pi ** 2 / 3.0}


class Basis(str, enum.Enum):
    HERMITE_GAUSS = "hermite-gauss"
    SPHERICAL_BESSEL = "spherical-bessel"


@dataclass(frozen=True)
class TruncatedState:
    """Density matrix and its position derivatives in a K-mode basis.

    ``truncation_defect`` is the largest coefficient mass missing from the
    truncation, over every source state and every derivative vector.
    """

    basis: str
    dim: int
    rho: np.ndarray
    drho: tuple
    config: SourceConfiguration
    truncation_defect: float = 0.0
    dps: int | None = None
    vectors: np.ndarray | None = field(default=None, repr=False)
    derivatives: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.drho)


def initial_dim(config: SourceConfiguration) -> int:
    """``ceil((max|alpha| + 5)^2)``: five Poisson standard deviations of headroom."""
    return math.ceil((max(abs(a) for a in config.alphas) + 5.0) ** 2)


def hermite_gauss_coefficients(alphas: np.ndarray, dim: int, dps: int | None = None):
    """Coherent-state coefficients and their derivatives, rows per source.

    ``c_k = alpha^k e^{-alpha^2/2} / sqrt(k!)`` by the recurrence
    ``c_k = c_{k-1} alpha / sqrt(k)``, and ``d_k = sqrt(k) c_{k-1} - alpha c_k``,
    the coefficients of ``(a^+ - alpha)|alpha>``.
    """
    with la.precision(dps):
        a = la.asarray(alphas, dps)
        n = a.shape[0]
        c = la.zeros((n, dim), a)
        c[:, 0] = la.exp(-(a * a) / 2)
        roots = la.sqrt(la.asarray(np.arange(dim), dps))
        for k in range(1, dim):
            c[:, k] = c[:, k - 1] * a / roots[k]
        d = -a[:, None] * c
        d[:, 1:] += roots[None, 1:] * c[:, :-1]
    return c, d


def _spherical_jn_and_derivative(q: np.ndarray, z: float):
    j = special.spherical_jn(q, z)
    dj = np.empty_like(j)
    if z == 0.0:
        dj[:] = 0.0
        if len(q) > 1:
            dj[1] = 1.0 / 3.0
        return j, dj
    dj[0] = -special.spherical_jn(1, z)
    # j_q'(z) = j_{q-1}(z) - (q + 1) j_q(z) / z
    dj[1:] = j[:-1] - (q[1:] + 1) * j[1:] / z
    return j, dj


def spherical_bessel_coefficients(alphas: np.ndarray, dim: int):
    """Coefficients of the sinc-PSF state on ``|j_q>`` and their alpha-derivatives.

    With ``sigma = 1`` the source sits at ``X = 2 alpha`` and the coefficient of
    mode ``q`` is ``sqrt(2q+1) j_q(2 pi alpha)``.
    """
    q = np.arange(dim)
    scale = np.sqrt(2 * q + 1)
    c = np.empty((len(alphas), dim))
    d = np.empty((len(alphas), dim))
    for i, a in enumerate(alphas):
        j, dj = _spherical_jn_and_derivative(q, 2 * math.pi * float(a))
        c[i] = scale * j
        d[i] = 2 * math.pi * scale * dj
    return c, d


def build_truncated_state(config: SourceConfiguration, psf: PSFModel | None = None,
                          dim: int | None = None, dps: int | None = None) -> TruncatedState:
    """Assemble ``rho = sum_i w_i v_i v_i^T`` and ``d_j rho = w_j (d_j v_j^T + v_j d_j^T)``.

    Raises
    ------
    TruncationInsufficient
        If more than 1e-10 of any state's (or derivative's) squared norm
        falls outside the first ``dim`` modes.
    """
    psf = psf or PSFModel()
    config = validate(config, Mode.NUMERIC)
    dim = initial_dim(config) if dim is None else int(dim)
    if dim < 2:
        raise ValueError("the truncated basis needs at least two modes")
    if psf.kind is PSFKind.GAUSSIAN:
        basis = Basis.HERMITE_GAUSS
        c, d = hermite_gauss_coefficients(config.alpha_array, dim, dps)
    else:
        if dps is not None:
            raise ValueError("the spherical-Bessel basis is evaluated in double precision only")
        basis = Basis.SPHERICAL_BESSEL
        c, d = spherical_bessel_coefficients(config.alpha_array, dim)

    with la.precision(dps):
        w = la.asarray(config.weights, dps)
        state_mass = np.sum(c * c, axis=1)
        deriv_mass = np.sum(d * d, axis=1) / _DERIVATIVE_NORM[psf.kind]
        defect = max(float(abs(1 - m)) for m in np.concatenate([state_mass, deriv_mass]))
        if defect > TRUNCATION_TOL:
            raise TruncationInsufficient(
                f"{dim} modes leave a coefficient mass of {defect:.2e} outside the truncation"
            )
        rho = (c.T * w[None, :]) @ c
        rho = (rho + rho.T) / 2
        drho = []
        for j in range(config.n):
            outer = d[j][:, None] * c[j][None, :]
            drho.append(w[j] * (outer + outer.T))
    return TruncatedState(basis, dim, rho, tuple(drho), config, defect, dps, c, d)


def _support_tol(rho, dps: int | None) -> float:
    trace = float(np.trace(la.to_float(rho)))
    if dps is None:
        return SUPPORT_TOL * trace
    return 10.0 ** (-(2 * dps) // 3) * trace


def _spectral(rho, dps):
    with la.precision(dps):
        lam, u = la.eigh(rho)
    return lam, u


def spectral_qfim(rho, drho, dps: int | None = None, tau: float | None = None):
    """QFIM from a density matrix and derivative matrices in any orthonormal basis.

    Returns an (n, n) array, float64 or object-mpf like the input.
    """
    tau = _support_tol(rho, dps) if tau is None else tau
    lam, u = _spectral(rho, dps)
    with la.precision(dps):
        s = lam[:, None] + lam[None, :]
        keep = la.to_float(s) > tau
        weight = la.zeros(s.shape, s)
        weight[keep] = 2 / s[keep]
        rot = [u.T @ dr @ u for dr in drho]
        n = len(drho)
        q = la.zeros((n, n), s)
        for m in range(n):
            wm = rot[m] * weight
            for k in range(m + 1):
                q[m, k] = np.sum(wm * rot[k])
                q[k, m] = q[m, k]
    return q


def numeric_qfim(state: TruncatedState, tau: float | None = None) -> FisherMatrix:
    """QFIM of a truncated state by spectral resolution of the SLD equation.

    ``tau`` defaults to ``1e-12 * trace(rho)`` in double precision and to
    ``10^(-2 dps / 3) * trace(rho)`` on the extended path.
    """
    q = spectral_qfim(state.rho, state.drho, state.dps, tau)
    precise = q if la.is_mp(q) else None
    diagnostics = {"dim": state.dim, "truncation_defect": state.truncation_defect,
                   "dps": state.dps, "method": "numeric", "basis": state.basis}
    return FisherMatrix(la.to_float(q), FisherKind.QUANTUM, precise=precise,
                        dps=state.dps, diagnostics=diagnostics)


def sld_matrices(state: TruncatedState, tau: float | None = None) -> list[np.ndarray]:
    """Symmetric logarithmic derivatives in the truncated basis, one per source."""
    tau = _support_tol(state.rho, state.dps) if tau is None else tau
    lam, u = _spectral(state.rho, state.dps)
    out = []
    with la.precision(state.dps):
        s = lam[:, None] + lam[None, :]
        keep = la.to_float(s) > tau
        weight = la.zeros(s.shape, s)
        weight[keep] = 2 / s[keep]
        for dr in state.drho:
            low = (u.T @ dr @ u) * weight
            sld = u @ low @ u.T
            out.append((sld + sld.T) / 2)
    return out


def lyapunov_residual(state: TruncatedState, slds=None, tau: float | None = None) -> float:
    """Max-norm of ``P (rho L + L rho - 2 d rho) P`` on the support of rho."""
    tau = _support_tol(state.rho, state.dps) if tau is None else tau
    slds = sld_matrices(state, tau) if slds is None else slds
    lam, u = _spectral(state.rho, state.dps)
    with la.precision(state.dps):
        sup = u[:, la.to_float(lam) > tau]
        proj = sup @ sup.T
        worst = 0.0
        for sld, dr in zip(slds, state.drho):
            r = proj @ (state.rho @ sld + sld @ state.rho - 2 * dr) @ proj
            worst = max(worst, float(np.max(np.abs(la.to_float(r)))))
    return worst


def weak_commutativity_residual(state: TruncatedState, slds=None) -> float:
    """``max_{mu,nu} |Tr(rho [L_mu, L_nu])|``."""
    slds = sld_matrices(state) if slds is None else slds
    worst = 0.0
    with la.precision(state.dps):
        for m in range(len(slds)):
            rl = state.rho @ slds[m]
            for k in range(m):
                comm = np.trace(rl @ slds[k]) - np.trace(state.rho @ slds[k] @ slds[m])
                worst = max(worst, abs(float(comm)))
    return worst


def converged_qfim(config: SourceConfiguration, psf: PSFModel | None = None,
                   dps: int | None = None, dim: int | None = None) -> FisherMatrix:
    """Numeric QFIM refined by doubling the basis size until it stops changing.

    Starts from ``dim`` (default ``ceil((max|alpha| + 5)^2)``) and compares the
    results at K and 2K; once the largest elementwise change relative to the
    largest element drops below 1e-8, returns the 2K result.  The final basis
    size and truncation defect are in ``diagnostics``.

    Raises
    ------
    ConvergenceFailure
        After six doublings without agreement.
    """
    psf = psf or PSFModel()
    k = initial_dim(validate(config, Mode.NUMERIC)) if dim is None else int(dim)
    prev = None
    change = math.inf
    for _ in range(MAX_DOUBLINGS + 1):
        try:
            cur = numeric_qfim(build_truncated_state(config, psf, k, dps))
        except TruncationInsufficient:
            k *= 2
            continue
        if prev is not None:
            scale = max(float(np.max(np.abs(cur.entries))), np.finfo(float).tiny)
            change = float(np.max(np.abs(cur.entries - prev.entries))) / scale
            if change < CONVERGENCE_RTOL:
                cur.diagnostics["change"] = change
                return cur
        prev = cur
        k *= 2
    raise ConvergenceFailure(
        f"numeric QFIM still changed by {change:.2e} after {MAX_DOUBLINGS} doublings "
        f"(last K={k // 2})"
    )

def bessel_reference(q: int, z: float, dps: int = 40) -> float:
    """Spherical Bessel ``j_q(z)`` in mpmath, used to check the scipy values."""
    with mpmath.workdps(dps):
        if z == 0:
            return 1.0 if q == 0 else 0.0
        zz = mpmath.mpf(z)
        return float(mpmath.sqrt(mpmath.pi / (2 * zz)) * mpmath.besselj(q + mpmath.mpf(1) / 2, zz))
