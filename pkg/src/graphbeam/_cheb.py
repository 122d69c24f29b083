"""Chebyshev and Gauss-Legendre helpers on the unit interval.

All functions work in the edge coordinate ``s`` in [0, 1]. Chebyshev
series are expanded in ``t = 2 s - 1``, so every derivative with respect
to ``s`` carries a factor 2 and every antiderivative a factor 1/2.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft
from numpy.polynomial import chebyshev as C
from numpy.polynomial import legendre as L

GL_NODES = 64


def lobatto_nodes(n: int) -> np.ndarray:
    """Chebyshev-Lobatto nodes on [0, 1], ascending, ``s[0] = 0``."""
    if n < 2:
        raise ValueError("need at least two nodes")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))


def values_to_coeffs(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients from samples on :func:`lobatto_nodes`.

    Works along the last axis and accepts complex input.
    """
    values = np.asarray(values)
    n = values.shape[-1]
    # nodes ascend in s, i.e. t_k = -cos(pi k/(n-1)); DCT-I wants cos ordering
    rev = values[..., ::-1]
    c = scipy.fft.dct(rev.real, type=1, axis=-1) / (n - 1)
    if np.iscomplexobj(values):
        c = c + 1j * scipy.fft.dct(rev.imag, type=1, axis=-1) / (n - 1)
    c[..., 0] /= 2
    c[..., -1] /= 2
    return c


def chop(coeffs: np.ndarray, rel: float | None = None) -> np.ndarray:
    """Zero coefficients below ``rel`` times the largest one (per series).

    The default ``rel = 2 n eps`` sits at the roundoff plateau of a length-n
    transform; keeping that noise ruins high derivatives (amplified ~k**8).
    """
    c = np.array(coeffs, copy=True)
    if rel is None:
        rel = 2.0 * c.shape[-1] * np.finfo(float).eps
    scale = np.max(np.abs(c), axis=-1, keepdims=True)
    c[np.abs(c) < rel * scale] = 0
    return c


def evaluate(coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate Chebyshev series (last axis) at points ``s`` in [0, 1]."""
    coeffs = np.asarray(coeffs)
    t = 2.0 * np.asarray(s, dtype=float) - 1.0
    if coeffs.ndim == 1:
        return C.chebval(t, coeffs)
    flat = coeffs.reshape(-1, coeffs.shape[-1])
    out = np.array([C.chebval(t, c) for c in flat])
    return out.reshape(coeffs.shape[:-1] + np.shape(t))


def derivative(coeffs: np.ndarray, order: int = 1) -> np.ndarray:
    """Coefficients of the ``order``-th s-derivative (length preserved)."""
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[-1]
    if order == 0:
        return coeffs.copy()
    d = C.chebder(coeffs, m=order, scl=2.0, axis=-1)
    pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, n - d.shape[-1])]
    return np.pad(d, pad)


def antiderivative(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of the s-antiderivative vanishing at s = 0."""
    return C.chebint(np.asarray(coeffs), m=1, lbnd=-1.0, scl=0.5, axis=-1)


@lru_cache(maxsize=None)
def gauss_legendre(n: int = GL_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = L.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def integrate(f, a: float = 0.0, b: float = 1.0, n: int = GL_NODES):
    """Gauss-Legendre integral of a vectorized callable over [a, b]."""
    x, w = gauss_legendre(n)
    return (b - a) * np.dot(w, f(a + (b - a) * x))


@lru_cache(maxsize=None)
def integration_matrix(n: int, order: int) -> np.ndarray:
    """Exact ``order``-fold integration from s = 0 on the Lobatto grid.

    Row ``i`` of the result applied to samples of ``u`` gives the
    ``order``-fold antiderivative of the interpolant of ``u`` at node ``i``.
    """
    s = lobatto_nodes(n)
    eye = values_to_coeffs(np.eye(n))  # row j: coefficients of cardinal j
    out = np.empty((n, n))
    for j in range(n):
        c = C.chebint(eye[j], m=order, lbnd=-1.0, scl=0.5)
        out[:, j] = C.chebval(2 * s - 1, c)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def endpoint_derivative_row(n: int, order: int, at: float) -> np.ndarray:
    """Row vector mapping Lobatto samples to the ``order``-th derivative at ``at``."""
    eye = values_to_coeffs(np.eye(n))
    row = np.empty(n)
    for j in range(n):
        c = C.chebder(eye[j], m=order, scl=2.0) if order else eye[j]
        row[j] = C.chebval(2 * at - 1, c)
    row.setflags(write=False)
    return row


@lru_cache(maxsize=None)
def interpolation_matrix(n: int, m: int = GL_NODES) -> np.ndarray:
    """Map Lobatto samples (n) to values at the m Gauss-Legendre nodes."""
    x, _ = gauss_legendre(m)
    eye = values_to_coeffs(np.eye(n))
    out = C.chebval(2 * x - 1, eye.T).T if n > 1 else np.ones((m, 1))
    out = np.ascontiguousarray(out)
    out.setflags(write=False)
    return out
