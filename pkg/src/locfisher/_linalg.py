"""Dense kernels that work on float64 arrays and on object arrays of mpmath.

The algorithms in :mod:`locfisher.qfim_analytic` and
:mod:`locfisher.qfim_numeric` are written once against numpy; numpy happily
does ``+``, ``*`` and ``@`` on ``dtype=object`` arrays of ``mpf``.  Only the
transcendental functions and the factorizations need a dispatch, collected
here.

mpmath keeps its working precision in a process-global context, so callers
wrap extended-precision work in :func:`precision` and the extended path is not
thread-safe.  The CLI parallelizes with processes for that reason.
"""

from __future__ import annotations

import contextlib
import math

import mpmath
import numpy as np
import scipy.linalg

_mp_exp = np.frompyfunc(mpmath.exp, 1, 1)
_mp_sqrt = np.frompyfunc(mpmath.sqrt, 1, 1)
_to_mpf = np.frompyfunc(mpmath.mpf, 1, 1)
_to_float = np.frompyfunc(float, 1, 1)


def is_mp(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


@contextlib.contextmanager
def precision(dps: int | None):
    if dps is None:
        yield
    else:
        with mpmath.workdps(dps):
            yield


def asarray(values, dps: int | None) -> np.ndarray:
    """Float64 array when ``dps`` is None, else an object array of mpf.

    Must be called inside ``precision(dps)`` so the conversion is exact at
    the working precision.
    """
    if dps is None:
        return np.asarray(values, dtype=float)
    arr = np.asarray(values, dtype=object)
    out = _to_mpf(arr)
    return np.asarray(out, dtype=object).reshape(arr.shape)


def to_float(a) -> np.ndarray:
    if is_mp(a):
        return np.asarray(_to_float(a), dtype=float).reshape(a.shape)
    return np.asarray(a, dtype=float)


def exp(a):
    if is_mp(a):
        return np.asarray(_mp_exp(a), dtype=object).reshape(a.shape)
    return np.exp(a)


def sqrt(a):
    if is_mp(a):
        return np.asarray(_mp_sqrt(a), dtype=object).reshape(a.shape)
    return np.sqrt(a)


def eye(n: int, like) -> np.ndarray:
    if is_mp(like):
        out = np.full((n, n), mpmath.mpf(0), dtype=object)
        for i in range(n):
            out[i, i] = mpmath.mpf(1)
        return out
    return np.eye(n)


def zeros(shape, like) -> np.ndarray:
    if is_mp(like):
        return np.full(shape, mpmath.mpf(0), dtype=object)
    return np.zeros(shape)


def _cholesky_object(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    low = np.full((n, n), mpmath.mpf(0), dtype=object)
    for j in range(n):
        d = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if d <= 0:
            raise np.linalg.LinAlgError(f"matrix is not positive definite (pivot {j})")
        low[j, j] = mpmath.sqrt(d)
        if j + 1 < n:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def _tri_solve_object(low: np.ndarray, b: np.ndarray, *, transpose: bool) -> np.ndarray:
    n = low.shape[0]
    x = np.array(b, dtype=object, copy=True)
    if not transpose:
        for i in range(n):
            x[i] = (x[i] - low[i, :i] @ x[:i]) / low[i, i]
    else:
        up = low.T
        for i in range(n - 1, -1, -1):
            x[i] = (x[i] - up[i, i + 1:] @ x[i + 1:]) / up[i, i]
    return x


def cho_factor(a):
    """Cholesky factor of a symmetric positive definite matrix."""
    if is_mp(a):
        return ("mp", _cholesky_object(a))
    return ("np", scipy.linalg.cho_factor(a, lower=True, check_finite=True))


def cho_solve(factor, b):
    tag, data = factor
    if tag == "mp":
        y = _tri_solve_object(data, b, transpose=False)
        return _tri_solve_object(data, y, transpose=True)
    return scipy.linalg.cho_solve(data, b)


def spd_inverse(a):
    return cho_solve(cho_factor(a), eye(a.shape[0], a))


def solve(a, b):
    if is_mp(a):
        x = mpmath.lu_solve(mpmath.matrix(a.tolist()), mpmath.matrix(np.asarray(b).tolist()))
        return np.array(x.tolist(), dtype=object).reshape(np.shape(b))
    return np.linalg.solve(a, b)


def inverse(a):
    if is_mp(a):
        inv = mpmath.inverse(mpmath.matrix(a.tolist()))
        return np.array(inv.tolist(), dtype=object)
    return np.linalg.inv(a)


def eigh(a):
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    if is_mp(a):
        sym = (a + a.T) / 2
        vals, vecs = mpmath.eigsy(mpmath.matrix(sym.tolist()))
        n = a.shape[0]
        w = np.array([vals[i] for i in range(n)], dtype=object)
        v = np.array(vecs.tolist(), dtype=object)
        order = np.argsort(to_float(w), kind="stable")
        return w[order], v[:, order]
    return np.linalg.eigh((a + a.T) / 2)


def eigvalsh(a):
    if is_mp(a):
        sym = (a + a.T) / 2
        vals = mpmath.eigsy(mpmath.matrix(sym.tolist()), eigvals_only=True)
        w = np.array([vals[i] for i in range(a.shape[0])], dtype=object)
        return w[np.argsort(to_float(w), kind="stable")]
    return np.linalg.eigvalsh((a + a.T) / 2)


def norm1(a) -> float:
    return float(np.max(np.sum(np.abs(to_float(a)), axis=0)))


def cond1(a, ainv=None) -> float:
    """1-norm condition number, using a supplied inverse when available."""
    if ainv is None:
        if is_mp(a):
            ainv = inverse(a)
        else:
            return float(np.linalg.cond(a, 1))
    if is_mp(a):
        na = max(sum(abs(x) for x in col) for col in a.T)
        ni = max(sum(abs(x) for x in col) for col in ainv.T)
        return float(na * ni)
    return norm1(a) * norm1(ainv)


def log10(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf
