"""Characteristic functions of the two eigenvalue branches.

``D`` vanishes on the branch whose modes are identical on all edges;
``H`` vanishes on the branch whose amplitude vectors sum to zero.

Every hyperbolic factor is evaluated with ``exp(-|Re x|)`` removed, and the
removed exponent ``|Re mu1| + |Re mu3|`` is reported as ``log_scale``.
Each term of ``D`` and ``H`` carries exactly one mu1 factor and one mu3
factor, so this is a common scale for the whole expression.

The *reduced* functions divide out the factors that make ``D`` and ``H``
depend on the square-root branches::

    D_red = D / (mu1^2 - mu3^2)
    H_red = H / (mu1 mu3 (mu1^2 - mu3^2))

Both are entire in ``lam`` and have the same zeros as ``D`` and ``H`` away
from ``lam = 0`` and ``lam = +-gamma/2``. Root counting and Newton
refinement use them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exponents import DEGENERATE_TOL, DegenerateExponentsError, NetworkParams, char_exponents, exponent_pair

Branch = Literal["D", "H"]

ZERO_TOL = 1e-9
ZERO_REL_FLOOR = 1e-14
FD_STEP_TOL = 1e-6


@dataclass(frozen=True)
class CharFunValue:
    """A characteristic-function value with its overflow-safe form.

    ``raw`` equals ``scaled * exp(log_scale)`` whenever ``raw`` is finite.
    """

    raw: complex
    scaled: complex
    log_scale: float


def _exponents(lam, gamma: float):
    return exponent_pair(lam, gamma)


def _shs(x, L):
    """``sinh(x) exp(-L)`` for ``L >= |Re x|`` without overflow."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x.real) < 20
    with np.errstate(over="ignore", invalid="ignore"):
        direct = np.sinh(np.where(small, x, 0)) * np.exp(-L)
        big = 0.5 * (np.exp(x - L) - np.exp(-x - L))
    return np.where(small, direct, big)


def _chs(x, L):
    """``cosh(x) exp(-L)`` for ``L >= |Re x|`` without overflow."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x.real) < 20
    with np.errstate(over="ignore", invalid="ignore"):
        direct = np.cosh(np.where(small, x, 0)) * np.exp(-L)
        big = 0.5 * (np.exp(x - L) + np.exp(-x - L))
    return np.where(small, direct, big)


def _shc(x, L):
    """``sinh(x)/x exp(-L)``, equal to ``exp(-L)`` at x = 0."""
    x = np.asarray(x, dtype=complex)
    nz = x != 0
    return np.where(nz, _shs(x, L) / np.where(nz, x, 1), np.exp(-L))


def _parts(mu1, mu3):
    L1, L3 = np.abs(mu1.real), np.abs(mu3.real)
    return _chs(mu1, L1), _shs(mu1, L1), _chs(mu3, L3), _shs(mu3, L3), L1 + L3


def _d_scaled(lam, p: NetworkParams, mu1=None, mu3=None):
    if mu1 is None:
        mu1, mu3 = _exponents(lam, p.gamma)
    c1, s1, c3, s3, L = _parts(mu1, mu3)
    k = p.alpha + np.asarray(lam) * p.beta
    val = mu3**3 * c1 * s3 - mu1**3 * s1 * c3 + (mu3**2 - mu1**2) * k * c1 * c3
    return val, L


def _h_scaled(lam, p: NetworkParams, mu1=None, mu3=None):
    if mu1 is None:
        mu1, mu3 = _exponents(lam, p.gamma)
    c1, s1, c3, s3, L = _parts(mu1, mu3)
    k = p.alpha + np.asarray(lam) * p.beta
    val = (mu3**2 - mu1**2) * s1 * s3 + k * (mu3 * s1 * c3 - mu1 * c1 * s3)
    return val, L


def _d_alt_scaled(lam, p: NetworkParams, mu1=None, mu3=None):
    if mu1 is None:
        mu1, mu3 = _exponents(lam, p.gamma)
    L = np.abs(mu1.real) + np.abs(mu3.real)
    k = p.alpha + np.asarray(lam) * p.beta
    sp, sm = mu1 + mu3, mu3 - mu1
    val = (
        (mu3**3 - mu1**3) * _shs(sp, L)
        + (mu1**3 + mu3**3) * _shs(sm, L)
        + (mu3**2 - mu1**2) * k * (_chs(sp, L) + _chs(sm, L))
    )
    return val, L


def reduced_scaled(branch: Branch, lam, p: NetworkParams):
    """Vectorized scaled value of the reduced function and its log-scale.

    Returns ``(scaled, log_scale)`` arrays. No degeneracy check is made;
    values within roughly 1e-6 of ``+-gamma/2`` lose accuracy.
    """
    lam = np.asarray(lam, dtype=complex)
    mu1, mu3 = _exponents(lam, p.gamma)
    gap = mu1**2 - mu3**2
    with np.errstate(divide="ignore", invalid="ignore"):
        if branch == "D":
            val, L = _d_scaled(lam, p, mu1, mu3)
            return val / gap, L
        if branch == "H":
            L1, L3 = np.abs(mu1.real), np.abs(mu3.real)
            c1, c3 = _chs(mu1, L1), _chs(mu3, L3)
            h1, h3 = _shc(mu1, L1), _shc(mu3, L3)
            k = p.alpha + lam * p.beta
            val = -h1 * h3 + k * (h1 * c3 - c1 * h3) / gap
            return val, L1 + L3
    raise ValueError(f"unknown branch {branch!r}")


def _raw(kind: str, lam: complex, p: NetworkParams, mu1, mu3) -> complex:
    with np.errstate(over="ignore", invalid="ignore"):
        c1, s1, c3, s3 = np.cosh(mu1), np.sinh(mu1), np.cosh(mu3), np.sinh(mu3)
        k = p.alpha + lam * p.beta
        if kind == "D":
            return complex(mu3**3 * c1 * s3 - mu1**3 * s1 * c3 + (mu3**2 - mu1**2) * k * c1 * c3)
        if kind == "H":
            return complex((mu3**2 - mu1**2) * s1 * s3 + k * (mu3 * s1 * c3 - mu1 * c1 * s3))
        sp, sm = mu1 + mu3, mu3 - mu1
        return complex(
            (mu3**3 - mu1**3) * np.sinh(sp)
            + (mu1**3 + mu3**3) * np.sinh(sm)
            + (mu3**2 - mu1**2) * k * (np.cosh(sp) + np.cosh(sm))
        )


def _evaluate(kind: str, lam: complex, p: NetworkParams) -> CharFunValue:
    ex = char_exponents(lam, p.gamma)
    mu1, mu3 = np.complex128(ex.mu1), np.complex128(ex.mu3)
    fn = {"D": _d_scaled, "H": _h_scaled, "Dalt": _d_alt_scaled}[kind]
    val, L = fn(np.complex128(ex.lam), p, mu1, mu3)
    return CharFunValue(_raw(kind, ex.lam, p, mu1, mu3), complex(val), float(L))


def eval_D(lam: complex, params: NetworkParams) -> CharFunValue:
    """Evaluate ``D(lam)``.

    ``D = mu3^3 cosh(mu1) sinh(mu3) - mu1^3 sinh(mu1) cosh(mu3)
    + (mu3^2 - mu1^2)(alpha + lam beta) cosh(mu1) cosh(mu3)``.

    Raises
    ------
    DegenerateExponentsError
        If ``lam`` lies in the degenerate set.
    """
    return _evaluate("D", lam, params)


def eval_H(lam: complex, params: NetworkParams) -> CharFunValue:
    """Evaluate ``H(lam)``.

    ``H = (mu3^2 - mu1^2) sinh(mu1) sinh(mu3)
    + (alpha + lam beta)(mu3 sinh(mu1) cosh(mu3) - mu1 cosh(mu1) sinh(mu3))``.
    """
    return _evaluate("H", lam, params)


def eval_D_alt(lam: complex, params: NetworkParams) -> CharFunValue:
    """Evaluate ``2 D(lam)`` through sums and differences of exponents.

    Used as an independent check on :func:`eval_D`.
    """
    return _evaluate("Dalt", lam, params)


def eval_reduced(branch: Branch, lam: complex, params: NetworkParams) -> CharFunValue:
    """Evaluate the reduced (entire) form of ``D`` or ``H`` at a point."""
    lam = complex(lam)
    val, L = reduced_scaled(branch, lam, params)
    with np.errstate(over="ignore", invalid="ignore"):
        raw = complex(val * np.exp(L))
    return CharFunValue(raw, complex(val), float(L))


def in_degenerate_set(lam, gamma: float) -> bool:
    lam = complex(lam)
    return abs(gamma * gamma - 4 * lam * lam) <= DEGENERATE_TOL * max(1.0, gamma * gamma)


def derivative_ratio(branch: Branch, lam: complex, params: NetworkParams, step: float) -> tuple[complex, complex]:
    """Return ``(f, f')`` of the reduced function on a common scale.

    The derivative is a central difference with step ``step``. Both values
    share the scale factor ``exp(log_scale(lam))``, so only their ratio and
    relative sizes are meaningful.
    """
    pts = np.array([lam, lam + step, lam - step], dtype=complex)
    vals, Ls = reduced_scaled(branch, pts, params)
    vals = vals * np.exp(Ls - Ls[0])
    return complex(vals[0]), complex((vals[1] - vals[2]) / (2 * step))


def zero_tolerance(lam: complex) -> float:
    """Largest admissible Newton correction for ``lam`` to count as a zero."""
    return max(ZERO_TOL, ZERO_REL_FLOOR * abs(lam))


def is_zero(branch: Branch, lam: complex, params: NetworkParams) -> bool:
    """Zero test ``|f| <= tol * |f'|`` on the reduced function.

    The derivative uses a central difference of step ``1e-6 (1 + |lam|)``.
    """
    if in_degenerate_set(lam, params.gamma):
        raise DegenerateExponentsError(complex(lam), params.gamma, params.gamma**2 - 4 * complex(lam) ** 2)
    f, df = derivative_ratio(branch, complex(lam), params, FD_STEP_TOL * (1 + abs(lam)))
    return abs(f) <= zero_tolerance(lam) * abs(df)
