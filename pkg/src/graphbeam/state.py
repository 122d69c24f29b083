"""Sampled network states ``x = {(w_j, v_j)}`` on Chebyshev-Lobatto grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.linalg import null_space

from . import _cheb
from ._cheb import lobatto_nodes
from .exponents import NetworkParams

GENERIC = "generic"
DOMAIN = "domain-of-T"


class GridMismatchError(ValueError):
    """Two states live on different grids."""


class DomainError(ValueError):
    """A state violates a state-space or domain condition."""

    def __init__(self, failures: list):
        self.failures = failures
        super().__init__("; ".join(f"{name}: {val:.3e}" for name, val in failures))


@dataclass
class StateVector:
    """Samples of ``w_j`` and ``v_j`` on the Lobatto grid of each edge.

    Attributes
    ----------
    w, v : ndarray, shape (3, N)
        Samples at :func:`graphbeam._cheb.lobatto_nodes` (``s[0] = 0``).
    tag : str
        ``"generic"`` for state-space members, ``"domain-of-T"`` when the
        domain conditions have been verified.
    """

    w: np.ndarray
    v: np.ndarray
    tag: str = GENERIC

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        self.v = np.asarray(self.v, dtype=complex)
        if self.w.shape != self.v.shape or self.w.ndim != 2 or self.w.shape[0] != 3:
            raise ValueError(f"w and v must both have shape (3, N), got {self.w.shape}, {self.v.shape}")
        if self.tag not in (GENERIC, DOMAIN):
            raise ValueError(f"unknown tag {self.tag!r}")

    @property
    def N(self) -> int:
        return self.w.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        return _cheb.lobatto_nodes(self.N)

    @classmethod
    def zeros(cls, N: int) -> "StateVector":
        z = np.zeros((3, N), dtype=complex)
        return cls(z, z.copy())

    @classmethod
    def from_functions(cls, g, h, N: int, tag: str = GENERIC) -> "StateVector":
        """Sample per-edge callables ``g[j](s)``, ``h[j](s)``."""
        s = _cheb.lobatto_nodes(N)
        w = np.array([np.broadcast_to(g[j](s), s.shape) for j in range(3)], dtype=complex)
        v = np.array([np.broadcast_to(h[j](s), s.shape) for j in range(3)], dtype=complex)
        return cls(w, v, tag)

    # --- arithmetic -----------------------------------------------------

    def _check(self, other: "StateVector"):
        if self.N != other.N:
            raise GridMismatchError(f"grid sizes differ: {self.N} vs {other.N}")

    def __add__(self, other: "StateVector") -> "StateVector":
        self._check(other)
        return StateVector(self.w + other.w, self.v + other.v)

    def __sub__(self, other: "StateVector") -> "StateVector":
        self._check(other)
        return StateVector(self.w - other.w, self.v - other.v)

    def __mul__(self, c: complex) -> "StateVector":
        return StateVector(c * self.w, c * self.v, self.tag)

    __rmul__ = __mul__

    # --- calculus -------------------------------------------------------

    def coeffs(self, which: str) -> np.ndarray:
        """Chopped Chebyshev coefficients of ``w`` or ``v`` (shape (3, N))."""
        data = self.w if which == "w" else self.v
        return _cheb.chop(_cheb.values_to_coeffs(data))

    def derivative(self, which: str, order: int) -> np.ndarray:
        """``order``-th derivative of ``w`` or ``v`` at the grid nodes."""
        if order == 0:
            return (self.w if which == "w" else self.v).copy()
        c = _cheb.derivative(self.coeffs(which), order)
        return _cheb.evaluate(c, self.nodes)

    def at(self, which: str, s, order: int = 0) -> np.ndarray:
        """Values of the ``order``-th derivative at arbitrary points ``s``."""
        c = _cheb.derivative(self.coeffs(which), order)
        return _cheb.evaluate(c, np.asarray(s, dtype=float))

    def gl_data(self) -> dict:
        """Quantities entering the energy inner product at Gauss nodes."""
        x, _ = _cheb.gauss_legendre()
        cw = self.coeffs("w")
        d1 = _cheb.derivative(cw, 1)
        d2 = _cheb.derivative(cw, 2)
        return {
            "w1": _cheb.evaluate(d1, x),
            "w2": _cheb.evaluate(d2, x),
            "v": _cheb.evaluate(self.coeffs("v"), x),
            "w1_0": _cheb.evaluate(d1, np.array([0.0]))[:, 0],
        }

    # --- conditions -----------------------------------------------------

    def state_space_failures(self, tol: float = 1e-10) -> list:
        """Violations of ``w_j(1) = 0`` and continuity of ``w`` at s = 0."""
        scale = max(np.abs(self.w).max(), 1e-300)
        out = []
        r = np.abs(self.w[:, -1]).max() / scale
        if r > tol:
            out.append(("w(1)=0", r))
        r = np.abs(self.w[:, 0] - self.w[0, 0]).max() / scale
        if r > tol:
            out.append(("w continuity at 0", r))
        return out

    def domain_failures(self, params: NetworkParams, tol: float = 1e-8) -> list:
        """Violations of the domain conditions of the system operator.

        Checks ``w(1) = w''(1) = 0``, continuity of ``w``, the moment
        condition ``w''(0) - alpha w'(0) - beta v'(0) = 0`` on every edge,
        force balance, and ``v(1) = 0`` with continuity of ``v`` (needed so
        that ``T x`` lies in the state space). Each residual is relative to
        the magnitude of the terms it balances.
        """
        d = {k: self.derivative("w", k) for k in range(4)}
        v1 = self.derivative("v", 1)
        S = [max(np.abs(d[k]).max(), 1e-300) for k in range(4)]
        V0 = max(np.abs(self.v).max(), 1e-300)
        V1 = max(np.abs(v1).max(), 1e-300)
        a, b, g = params.alpha, params.beta, params.gamma
        checks = [
            ("w(1)=0", np.abs(d[0][:, -1]).max() / S[0]),
            ("w''(1)=0", np.abs(d[2][:, -1]).max() / S[2]),
            ("w continuity at 0", np.abs(d[0][:, 0] - d[0][0, 0]).max() / S[0]),
            (
                "moment condition",
                np.abs(d[2][:, 0] - a * d[1][:, 0] - b * v1[:, 0]).max() / (S[2] + a * S[1] + b * V1),
            ),
            ("force balance", abs(np.sum(d[3][:, 0] - g * d[1][:, 0])) / (S[3] + g * S[1])),
            ("v(1)=0", np.abs(self.v[:, -1]).max() / V0 if np.abs(self.v).max() > 0 else 0.0),
            ("v continuity at 0", np.abs(self.v[:, 0] - self.v[0, 0]).max() / V0 if np.abs(self.v).max() > 0 else 0.0),
        ]
        return [(name, float(r)) for name, r in checks if r > tol]

    def verified(self, params: NetworkParams, tol: float = 1e-8) -> "StateVector":
        """Copy tagged by which condition set holds; raises if not a state."""
        bad = self.state_space_failures()
        if bad:
            raise DomainError(bad)
        tag = DOMAIN if not self.domain_failures(params, tol) else GENERIC
        return StateVector(self.w.copy(), self.v.copy(), tag)


# --- random polynomial states -------------------------------------------


def _basis_rows(deg: int, at: float, order: int) -> np.ndarray:
    """Values of the ``order``-th s-derivative of ``T_k(2s-1)`` at ``at``."""
    eye = np.eye(deg + 1)
    out = np.empty(deg + 1)
    for k in range(deg + 1):
        c = C.chebder(eye[k], m=order, scl=2.0) if order else eye[k]
        out[k] = C.chebval(2 * at - 1, c)
    return out


def _constraint_matrix(deg: int, params: NetworkParams | None, domain: bool) -> np.ndarray:
    n = deg + 1
    # unknown layout: w_1..w_3 then v_1..v_3, each n Chebyshev coefficients
    def blk(field: int, edge: int, row: np.ndarray) -> np.ndarray:
        r = np.zeros(6 * n)
        off = (3 * field + edge) * n
        r[off:off + n] = row
        return r

    rows = []
    e1, e0 = _basis_rows(deg, 1.0, 0), _basis_rows(deg, 0.0, 0)
    for j in range(3):
        rows.append(blk(0, j, e1))
    for j in (1, 2):
        rows.append(blk(0, j, e0) - blk(0, 0, e0))
    if domain:
        a, b, g = params.alpha, params.beta, params.gamma
        d1, d2, d3 = (_basis_rows(deg, 0.0, k) for k in (1, 2, 3))
        d2_1 = _basis_rows(deg, 1.0, 2)
        for j in range(3):
            rows.append(blk(0, j, d2_1))
            rows.append(blk(0, j, d2 - a * d1) - b * blk(1, j, d1))
            rows.append(blk(1, j, e1))
        for j in (1, 2):
            rows.append(blk(1, j, e0) - blk(1, 0, e0))
        rows.append(sum(blk(0, j, d3 - g * d1) for j in range(3)))
    return np.array(rows)


def random_state(
    rng: np.random.Generator,
    N: int,
    params: NetworkParams | None = None,
    domain: bool = False,
    degree: int = 10,
) -> StateVector:
    """Random complex polynomial state of the given degree.

    Coefficients decay like ``1/(1+k)^2`` and are projected onto the null
    space of the state-space conditions, or of the full domain conditions
    when ``domain`` is set (which needs ``params``).
    """
    if domain and params is None:
        raise ValueError("domain states need params")
    if degree + 1 > N:
        raise ValueError("degree must be below the grid size")
    A = _constraint_matrix(degree, params, domain)
    Z = null_space(A)
    weights = np.tile(1.0 / (1.0 + np.arange(degree + 1)) ** 2, 6)
    r = weights * (rng.standard_normal(6 * (degree + 1)) + 1j * rng.standard_normal(6 * (degree + 1)))
    coef = (Z @ (Z.T @ r)).reshape(6, degree + 1)
    s = lobatto_nodes(N)
    vals = np.array([C.chebval(2 * s - 1, c) for c in coef])
    return StateVector(vals[:3], vals[3:], DOMAIN if domain else GENERIC)
