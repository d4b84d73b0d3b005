"""Two-level approximation for separations far below the PSF width.

To second order in the positions the state lives on the first two
Hermite-Gauss modes::

    rho2 = [[1 - C2, C1],
            [C1,     C2]],      C1 = sum w_i a_i,  C2 = sum w_i a_i^2

Every position enters only through the two moments, so the QFIM factors as
``B F B^T`` with ``B = [w, w * a]`` (N x 2).  Its rank can never exceed two.

The QFIM returned by :func:`qubit_qfim` is the exact QFIM of ``rho2``::

    Q = (4 / A) B M B^T,   A = (C2 - 1) C2 + C1^2 = -det(rho2)

    M = [[(C2 - 1) C2,     C1 (1 - 2 C2)],
         [C1 (1 - 2 C2),   4 C1^2 - 1   ]]

A bare ``(1/A) [1, a] M [1, a]^T`` misses both the weights carried by
``d rho2 / d a_i = w_i [[-2 a_i, 1], [1, 2 a_i]]`` and the factor 4 that comes
from the factor 2 in the SLD equation.  ``tests/test_qubit.py`` checks the
form used here against a direct spectral evaluation on the 2 x 2 state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateQubitState
from .model import FisherKind, FisherMatrix, Mode, SourceConfiguration, validate

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class QubitMoments:
    c1: float
    c2: float


@dataclass(frozen=True)
class QubitCore:
    m11: float
    m12: float
    m22: float
    a_denom: float

    @property
    def m21(self) -> float:
        return self.m12

    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m12, self.m22]])


def moments(config: SourceConfiguration) -> QubitMoments:
    config = validate(config, Mode.NUMERIC)
    a, w = config.alpha_array, config.weight_array
    return QubitMoments(float(w @ a), float(w @ (a * a)))


def qubit_state(m: QubitMoments) -> np.ndarray:
    return np.array([[1.0 - m.c2, m.c1], [m.c1, m.c2]])


def qubit_derivatives(config: SourceConfiguration) -> list[np.ndarray]:
    """``d rho2 / d a_i = w_i [[-2 a_i, 1], [1, 2 a_i]]`` for each source."""
    config = validate(config, Mode.NUMERIC)
    return [w * np.array([[-2.0 * a, 1.0], [1.0, 2.0 * a]])
            for a, w in zip(config.alphas, config.weights)]


def qubit_core(m: QubitMoments) -> QubitCore:
    c1, c2 = m.c1, m.c2
    return QubitCore(
        m11=(c2 - 1.0) * c2,
        m12=c1 * (1.0 - 2.0 * c2),
        m22=4.0 * c1 * c1 - 1.0,
        a_denom=(c2 - 1.0) * c2 + c1 * c1,
    )


def eigen_core(core: QubitCore) -> tuple[float, float]:
    """Closed-form eigenvalues of ``M``, ordered by magnitude (smaller first).

    ``mu = (tr M -/+ sqrt(tr(M)^2 + 4 A)) / 2`` with ``tr M = (C2 - 1) C2 + 4 C1^2 - 1``,
    using ``det M = -A``.
    """
    tr = core.m11 + core.m22
    disc = math.sqrt(max(tr * tr + 4.0 * core.a_denom, 0.0))
    lo, hi = 0.5 * (tr - disc), 0.5 * (tr + disc)
    # the root that would suffer cancellation comes from the product det M = -A
    if abs(lo) >= abs(hi):
        big = lo
    else:
        big = hi
    small = -core.a_denom / big if big != 0 else 0.0
    return (small, big) if abs(small) <= abs(big) else (big, small)


def qubit_qfim(config: SourceConfiguration) -> FisherMatrix:
    """Rank-at-most-two QFIM of the two-level approximation.

    Raises
    ------
    DegenerateQubitState
        When ``|A| <= 1e-12``: the two-level state is pure (all sources
        effectively coincident) and the SLD construction breaks down.
    """
    config = validate(config, Mode.NUMERIC)
    m = moments(config)
    core = qubit_core(m)
    if abs(core.a_denom) <= DEGENERACY_TOL:
        raise DegenerateQubitState(
            f"|A| = {abs(core.a_denom):.3e}: the two-level state is pure; "
            "use the full QFIM instead"
        )
    if core.a_denom > 0:
        warnings.warn("moments give a non-positive two-level state; positions are "
                      "outside the sub-Rayleigh regime", stacklevel=2)
    w, a = config.weight_array, config.alpha_array
    b = np.column_stack([w, w * a])
    q = (4.0 / core.a_denom) * (b @ core.matrix() @ b.T)
    return FisherMatrix(q, FisherKind.QUANTUM,
                        diagnostics={"method": "qubit", "a_denom": core.a_denom,
                                     "c1": m.c1, "c2": m.c2})
