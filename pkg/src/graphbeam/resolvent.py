"""The system operator ``T``, its explicit inverse and the splitting
``T^{-1} = T_0^{-1} + beta S``.

With ``q = sqrt(gamma)`` and ``K_j = w_j'''(0) - gamma w_j'(0)`` the inverse
is assembled edge by edge from::

    Vt_j(s) = -int_s^1 dt int_0^t vt_j
    w_j(s)  = a_j sinh q(1-s) + (K_j/q) int_s^1 (1-r) sinh q(s-r) dr
              + (1/q) int_s^1 sinh q(s-r) Vt_j(r) dr
    v_j     = wt_j

where ``a_j`` and ``K_j`` solve a 2x2 system fixed by continuity, the
moment condition and force balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C

from . import _cheb
from .exponents import NetworkParams
from .state import DOMAIN, GENERIC, DomainError, StateVector

_OVERSAMPLE = 32
DET_TOL = 1e-13
SYSTEM_TOL = 1e-12


class SingularSystemError(ArithmeticError):
    """The per-edge 2x2 system is numerically singular."""


@dataclass
class ResolventWork:
    """Intermediate quantities of one inverse application.

    Attributes
    ----------
    Vtilde : ndarray, shape (3, N)
        ``Vt_j`` at the grid nodes.
    a : ndarray, shape (3,)
        Coefficients of ``sinh q(1-s)``.
    force_const : ndarray, shape (3,)
        ``K_j = w_j'''(0) - gamma w_j'(0)``.
    b_scalar : complex
        ``sum_j a_j``.
    c_scalar : complex
        Common vertex value ``w(0)``.
    system_residual : float
        Worst relative residual of the 2x2 solves.
    """

    Vtilde: np.ndarray
    a: np.ndarray
    force_const: np.ndarray
    b_scalar: complex
    c_scalar: complex
    system_residual: float


# --- forward operator ---------------------------------------------------


def apply_T(x: StateVector, params: NetworkParams, check: bool = True, tol: float = 1e-8) -> StateVector:
    """``T x = {(v_j, -w_j'''' + gamma w_j'')}`` by spectral differentiation.

    States tagged ``domain-of-T`` were built inside the domain and are not
    re-checked: sampled third derivatives carry a roundoff floor that grows
    like ``N**6``.

    Raises
    ------
    DomainError
        If ``check`` and an untagged ``x`` violates a domain condition; the
        message names the failing conditions.
    """
    if check and x.tag != DOMAIN:
        bad = x.state_space_failures() + x.domain_failures(params, tol)
        if bad:
            raise DomainError(bad)
    w4 = x.derivative("w", 4)
    w2 = x.derivative("w", 2)
    return StateVector(x.v.copy(), -w4 + params.gamma * w2)


# --- inverse ------------------------------------------------------------


def _kernel_integrals(q: float) -> dict:
    """Scalar integrals over [0, 1] that do not depend on the data."""
    sh, ch = math.sinh(q), math.cosh(q)
    # int_0^1 (1-r) sinh(qr) dr and int_0^1 (1-r) cosh(qr) dr
    i_sh = (sh - q) / q**2
    i_ch = (ch - 1) / q**2
    return {"sh": sh, "ch": ch, "i_sh": i_sh, "i_ch": i_ch}


def _k_profile(q: float, s: np.ndarray) -> np.ndarray:
    """``(1/q) int_s^1 (1-r) sinh q(s-r) dr`` in closed form."""
    L = 1.0 - s
    return (L / q - np.sinh(q * L) / q**2) / q


class _EdgeCalculus:
    """Cumulative integrals on an oversampled Lobatto grid."""

    def __init__(self, N: int):
        self.N = N
        self.M = N + _OVERSAMPLE
        self.s = _cheb.lobatto_nodes(self.M)
        self.out = _cheb.lobatto_nodes(N)

    def to_fine(self, coeffs: np.ndarray) -> np.ndarray:
        return _cheb.evaluate(coeffs, self.s)

    def tail(self, fine_values: np.ndarray, at: np.ndarray) -> np.ndarray:
        """``int_s^1 f`` at points ``at`` from samples on the fine grid."""
        c = _cheb.antiderivative(_cheb.values_to_coeffs(fine_values))
        total = _cheb.evaluate(c, np.array([1.0]))[..., 0]
        return total[..., None] - _cheb.evaluate(c, at)

    def total(self, fine_values: np.ndarray) -> np.ndarray:
        return self.tail(fine_values, np.array([0.0]))[..., 0]


def _vtilde_coeffs(vt: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of ``Vt_j`` from samples of ``vt_j``."""
    P = _cheb.antiderivative(_cheb.values_to_coeffs(vt))
    Q = _cheb.antiderivative(P)
    Q1 = C.chebval(1.0, Q.T) if Q.ndim > 1 else C.chebval(1.0, Q)
    out = Q.copy()
    out[..., 0] -= Q1
    return out


def _solve_edges(rows1: np.ndarray, rows2: np.ndarray, M: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve ``M [a_j, K_j]^T = [rows1_j, rows2_j]^T`` by Cramer's rule."""
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) <= DET_TOL * np.abs(M).max() ** 2:
        raise SingularSystemError(f"2x2 determinant {det:.3e} is numerically zero")
    a = (rows1 * M[1, 1] - M[0, 1] * rows2) / det
    K = (M[0, 0] * rows2 - M[1, 0] * rows1) / det
    r1 = M[0, 0] * a + M[0, 1] * K - rows1
    r2 = M[1, 0] * a + M[1, 1] * K - rows2
    scale = np.abs(M).max() * (np.abs(a) + np.abs(K)) + np.abs(rows1) + np.abs(rows2) + 1e-300
    res = float(np.max(np.maximum(np.abs(r1), np.abs(r2)) / scale))
    if res > SYSTEM_TOL:
        raise SingularSystemError(f"2x2 residual {res:.3e} exceeds {SYSTEM_TOL}")
    return a, K, res


def _system_matrix(q: float, alpha: float, k: dict) -> np.ndarray:
    # int_0^1 (1-r)(q sinh qr + alpha cosh qr) dr
    mixed = q * k["i_sh"] + alpha * k["i_ch"]
    return np.array(
        [
            [q * k["sh"], -k["i_sh"]],
            [q * q * k["sh"] + alpha * q * k["ch"], -(mixed + 1.0)],
        ]
    )


def _inverse(xt: StateVector, params: NetworkParams, slope_coef: float, with_v: bool):
    """Shared construction; ``slope_coef`` multiplies the ``wt_j'(0)`` terms."""
    if params.gamma <= 0:
        raise ValueError("the explicit inverse needs gamma > 0")
    bad = xt.state_space_failures()
    if bad:
        raise DomainError(bad)
    N = xt.N
    q, al = math.sqrt(params.gamma), params.alpha
    k = _kernel_integrals(q)
    ec = _EdgeCalculus(N)
    s_out = ec.out

    if with_v:
        Vc = _vtilde_coeffs(xt.v)
    else:
        Vc = np.zeros((3, N + 2), dtype=complex)
    Vf = ec.to_fine(Vc)
    shq, chq = np.sinh(q * ec.s), np.cosh(q * ec.s)
    I_sh = ec.total(shq * Vf)  # int sinh(qr) Vt_j
    I_mix = ec.total((q * shq + al * chq) * Vf)  # int (q sinh + alpha cosh) Vt_j
    V0 = _cheb.evaluate(Vc, np.array([0.0]))[:, 0]
    slope = slope_coef * xt.at("w", np.array([0.0]), 1)[:, 0]

    den = params.gamma * k["sh"] + al * q * k["ch"]
    b = np.sum(V0 + slope + I_mix) / den
    c = (b * k["sh"] - np.sum(I_sh) / q) / 3.0

    M = _system_matrix(q, al, k)
    rhs1 = q * c + I_sh
    rhs2 = I_mix + V0 + slope
    a, K, res = _solve_edges(rhs1, rhs2, M)

    # (1/q) int_s^1 sinh q(s-r) Vt = (1/q)[sinh(qs) int_s^1 cosh(qr)Vt - cosh(qs) int_s^1 sinh(qr)Vt]
    tail_c = ec.tail(chq * Vf, s_out)
    tail_s = ec.tail(shq * Vf, s_out)
    conv = (np.sinh(q * s_out) * tail_c - np.cosh(q * s_out) * tail_s) / q
    w = a[:, None] * np.sinh(q * (1.0 - s_out)) + K[:, None] * _k_profile(q, s_out) + conv
    v = xt.w.copy() if with_v else np.zeros_like(xt.w)
    work = ResolventWork(_cheb.evaluate(Vc, s_out), a, K, complex(b), complex(c), res)
    return StateVector(w, v), work


def apply_Tinv(xt: StateVector, params: NetworkParams, return_work: bool = False):
    """Solve ``T x = xt`` with the explicit construction.

    Returns
    -------
    StateVector or (StateVector, ResolventWork)
        The solution, tagged ``domain-of-T``, with ``v_j = wt_j``.

    Raises
    ------
    SingularSystemError
        If a per-edge 2x2 system is numerically singular.
    DomainError
        If ``xt`` is not in the state space.
    """
    x, work = _inverse(xt, params, params.beta, True)
    x.tag = DOMAIN
    return (x, work) if return_work else x


def apply_T0inv(xt: StateVector, params: NetworkParams) -> StateVector:
    """Inverse of the skewadjoint part (``beta = 0``)."""
    x, _ = _inverse(xt, params, 0.0, True)
    x.tag = GENERIC
    return x


def apply_S(xt: StateVector, params: NetworkParams) -> StateVector:
    """Finite-rank part ``S`` with ``T^{-1} = T_0^{-1} + beta S``.

    Only the vertex slopes ``wt_j'(0)`` of the input enter; the output has
    ``v = 0`` and ``w_j = a_j sinh q(1-s) + K_j k(s)``.
    """
    x, _ = _inverse(xt, params, 1.0, False)
    x.tag = GENERIC
    return x


def numerical_rank(singular_values: np.ndarray, rel: float = 1e-8) -> int:
    sv = np.asarray(singular_values)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rel * sv[0]))


def energy_gram_factor(N: int, params: NetworkParams) -> callable:
    """Map a state to complex coordinates whose Euclidean norm is the energy norm."""
    _, wts = _cheb.gauss_legendre()
    sw = np.sqrt(wts)

    def coords(x: StateVector) -> np.ndarray:
        d = x.gl_data()
        parts = [
            (d["w2"] * sw).ravel(),
            math.sqrt(params.gamma) * (d["w1"] * sw).ravel(),
            (d["v"] * sw).ravel(),
            math.sqrt(params.alpha) * d["w1_0"],
        ]
        return np.concatenate(parts)

    return coords


def sampled_singular_values(op, states: list, params: NetworkParams) -> np.ndarray:
    """Singular values of ``[op(x_1), ..., op(x_m)]`` in energy coordinates."""
    coords = energy_gram_factor(states[0].N, params)
    cols = np.column_stack([coords(op(x)) for x in states])
    return np.linalg.svd(cols, compute_uv=False)
