"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``PSINEHARI_BACKEND``: "auto" (default) uses numba when importable,
"numba" requires it, "numpy" forces the fallback.  Both paths implement
identical formulas; a dedicated test asserts they agree to roundoff.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "backend_name",
    "rl_weight_matrix",
    "weighted_power_sum",
    "signed_power",
]

_CHOICE = os.environ.get("PSINEHARI_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ImportError(
        f"PSINEHARI_BACKEND must be 'auto', 'numba' or 'numpy', got {_CHOICE!r}"
    )


# -- pure numpy implementations ------------------------------------------------

def _rl_lower_numpy(v, order):
    # Row i integrates over cells [v_j, v_{j+1}] with j < i against the
    # weakly singular kernel (v_i - s)^(order-1); cell moments are exact.
    n = v.size
    vi = v[:, None]
    a = vi - v[None, :-1]
    b = vi - v[None, 1:]
    mask = np.arange(n - 1)[None, :] < np.arange(n)[:, None]
    a = np.where(mask, a, 1.0)
    b = np.where(mask, b, 0.0)
    pa = a ** order
    pb = b ** order
    m0 = (pa - pb) / order
    m1 = a * m0 - (a * pa - b * pb) / (order + 1.0)
    delta = (v[1:] - v[:-1])[None, :]
    right = np.where(mask, m1 / delta, 0.0)
    left = np.where(mask, m0, 0.0) - right
    w = np.zeros((n, n))
    w[:, :-1] += left
    w[:, 1:] += right
    return w


def _rl_upper_numpy(v, order):
    n = v.size
    vi = v[:, None]
    b = v[None, :-1] - vi
    a = v[None, 1:] - vi
    mask = np.arange(n - 1)[None, :] >= np.arange(n)[:, None]
    a = np.where(mask, a, 1.0)
    b = np.where(mask, b, 0.0)
    pa = a ** order
    pb = b ** order
    m0 = (pa - pb) / order
    m1 = (a * pa - b * pb) / (order + 1.0) - b * m0
    delta = (v[1:] - v[:-1])[None, :]
    right = np.where(mask, m1 / delta, 0.0)
    left = np.where(mask, m0, 0.0) - right
    w = np.zeros((n, n))
    w[:, :-1] += left
    w[:, 1:] += right
    return w


def _weighted_power_sum_numpy(weights, values, expo):
    return float(np.sum(weights * np.abs(values) ** expo))


def _signed_power_numpy(values, expo):
    return np.sign(values) * np.abs(values) ** expo


# -- numba implementations -----------------------------------------------------

def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def rl_lower(v, order):
        n = v.size
        w = np.zeros((n, n))
        for i in range(1, n):
            vi = v[i]
            for j in range(i):
                a = vi - v[j]
                b = vi - v[j + 1]
                pa = a ** order
                pb = b ** order
                m0 = (pa - pb) / order
                m1 = a * m0 - (a * pa - b * pb) / (order + 1.0)
                frac = m1 / (v[j + 1] - v[j])
                w[i, j] += m0 - frac
                w[i, j + 1] += frac
        return w

    @njit(cache=True)
    def rl_upper(v, order):
        n = v.size
        w = np.zeros((n, n))
        for i in range(n - 1):
            vi = v[i]
            for j in range(i, n - 1):
                b = v[j] - vi
                a = v[j + 1] - vi
                pa = a ** order
                pb = b ** order
                m0 = (pa - pb) / order
                m1 = (a * pa - b * pb) / (order + 1.0) - b * m0
                frac = m1 / (v[j + 1] - v[j])
                w[i, j] += m0 - frac
                w[i, j + 1] += frac
        return w

    @njit(cache=True)
    def wpow(weights, values, expo):
        s = 0.0
        for i in range(values.size):
            s += weights[i] * abs(values[i]) ** expo
        return s

    @njit(cache=True)
    def spow(values, expo, out):
        for i in range(values.size):
            x = values[i]
            if x > 0.0:
                out[i] = x ** expo
            elif x < 0.0:
                out[i] = -((-x) ** expo)
            else:
                out[i] = 0.0
        return out

    return rl_lower, rl_upper, wpow, spow


_NUMBA = None
if _CHOICE in ("auto", "numba"):
    try:
        _NUMBA = _build_numba_impls()
    except ImportError:
        if _CHOICE == "numba":
            raise
        _NUMBA = None


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return "numba" if _NUMBA is not None else "numpy"


def rl_weight_matrix(v: np.ndarray, order: float, side: str) -> np.ndarray:
    """Dense product-trapezoidal weight matrix for the fractional integral.

    ``v`` holds strictly increasing transformed coordinates; the returned
    matrix maps nodal values to cell-exact moment sums, without the
    1/Gamma(order) prefactor.
    """
    v = np.ascontiguousarray(v, dtype=np.float64)
    if side == "left":
        if _NUMBA is not None:
            return _NUMBA[0](v, order)
        return _rl_lower_numpy(v, order)
    if side == "right":
        if _NUMBA is not None:
            return _NUMBA[1](v, order)
        return _rl_upper_numpy(v, order)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def weighted_power_sum(weights: np.ndarray, values: np.ndarray, expo: float) -> float:
    """sum_i weights[i] * |values[i]|**expo over flattened arrays."""
    w = np.ascontiguousarray(weights, dtype=np.float64).ravel()
    x = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if _NUMBA is not None:
        return float(_NUMBA[2](w, x, expo))
    return _weighted_power_sum_numpy(w, x, expo)


def signed_power(values: np.ndarray, expo: float) -> np.ndarray:
    """Elementwise sign(x) * |x|**expo, finite at 0 for positive exponents."""
    x = np.ascontiguousarray(values, dtype=np.float64)
    if _NUMBA is not None:
        out = np.empty(x.size)
        _NUMBA[3](x.ravel(), expo, out)
        return out.reshape(x.shape)
    return _signed_power_numpy(x, expo)
