"""Closed-form eigenfunctions, residual checks and energy pairings.

Profiles are evaluated with the factor ``exp(|Re mu1| + |Re mu3|)`` removed
so that modes high in the spectrum stay finite; the normalization constant
absorbs it. Derivatives are exact, using
``d^k/ds^k sinh(mu (1 - s)) = (-mu)^k sinh or cosh (mu (1 - s))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import _cheb
from .charfun import _chs, _shs, is_zero
from .exponents import NetworkParams, char_exponents
from .rootfinding import Eigenvalue
from .state import GridMismatchError, StateVector

A1 = np.array([-2.0, 1.0, 1.0])
A2 = np.array([0.0, 1.0, -1.0])
RESIDUAL_GRID = 200
ZERO_MODE_TOL = 1e-10
PHASE_TOL = 1e-8


class ZeroModeError(ValueError):
    """The closed-form profile vanishes identically: ``lam`` is not a root."""


class NotARootError(ValueError):
    """The spectral parameter fails the zero test for the requested branch."""


class _HasGLData(Protocol):
    def gl_data(self) -> dict: ...


@dataclass(frozen=True)
class ResidualReport:
    """Relative residuals of a mode against the boundary-eigenvalue problem.

    Attributes
    ----------
    ode_residual : float
        ``max |w'''' - gamma w'' + lam^2 w|`` over the grid, relative to the
        size of the three terms.
    bc_residual : float
        ``w(1)`` and ``w''(1)`` relative to ``max |w|`` and ``max |w''|``.
    connectivity_residual : float
        Worst of continuity, moment and force-balance residuals at s = 0.
    """

    ode_residual: float
    bc_residual: float
    connectivity_residual: float

    def __post_init__(self):
        for name in ("ode_residual", "bc_residual", "connectivity_residual"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def worst(self) -> float:
        return max(self.ode_residual, self.bc_residual, self.connectivity_residual)

    def ok(self, tol: float = 1e-8) -> bool:
        return self.worst <= tol


@dataclass
class EigenfunctionRep:
    """An eigenvector ``{(w_j, lam w_j)}`` in closed form.

    ``w_j(s) = c * amplitude[j] * phi(s)`` where ``phi`` is the scaled base
    profile of the branch.

    Attributes
    ----------
    lam : complex
    branch : {"D", "H"}
    amplitude : ndarray, shape (3,)
        All ones on the D-branch; ``A1`` or ``A2`` on the H-branch.
    c : complex
        Normalization making the energy norm 1 under the phase rule.
    params : NetworkParams
    mu1, mu3 : complex
        Characteristic exponents at ``lam``.
    diagnostics : dict
        Construction diagnostics, including the relative size of the
        Case-1 denominator on the D-branch.
    """

    lam: complex
    branch: str
    amplitude: np.ndarray
    c: complex
    params: NetworkParams
    mu1: complex
    mu3: complex
    diagnostics: dict = field(default_factory=dict)

    @property
    def log_scale(self) -> float:
        return abs(self.mu1.real) + abs(self.mu3.real)

    def base(self, s, order: int = 0) -> np.ndarray:
        """Unnormalized scaled profile ``phi^(order)`` at points ``s``."""
        return _phi(self.branch, self.mu1, self.mu3, np.asarray(s, dtype=float), order)

    def profile(self, s, order: int = 0) -> np.ndarray:
        """``w_j^(order)(s)`` for all edges, shape (3, len(s))."""
        return self.c * np.outer(self.amplitude, self.base(s, order))

    def gl_data(self) -> dict:
        x, _ = _cheb.gauss_legendre()
        w1 = self.profile(x, 1)
        return {
            "w1": w1,
            "w2": self.profile(x, 2),
            "v": self.lam * self.profile(x, 0),
            "w1_0": self.profile(np.array([0.0]), 1)[:, 0],
        }

    def to_state(self, N: int) -> StateVector:
        """Sample ``(w, lam w)`` on the Lobatto grid with N nodes."""
        w = self.profile(_cheb.lobatto_nodes(N))
        return StateVector(w, self.lam * w)

    def to_csv(self, path, s=None) -> None:
        """Write ``s, Re w_j, Im w_j`` rows for plotting."""
        s = np.linspace(0.0, 1.0, 101) if s is None else np.asarray(s, dtype=float)
        w = self.profile(s)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["s"] + [f"re_w{j + 1}" for j in range(3)] + [f"im_w{j + 1}" for j in range(3)])
            for i, si in enumerate(s):
                out.writerow([f"{v:.16e}" for v in [si, *w[:, i].real, *w[:, i].imag]])


def _sinh_family(mu, s, order: int, L: float):
    """Scaled ``d^order/ds^order sinh(mu (1 - s))``."""
    x = mu * (1.0 - s)
    f = _shs(x, L) if order % 2 == 0 else _chs(x, L)
    return (-mu) ** order * f


def _phi(branch: str, mu1: complex, mu3: complex, s: np.ndarray, order: int) -> np.ndarray:
    L1, L3 = abs(mu1.real), abs(mu3.real)
    if branch == "D":
        k1 = mu1 * _chs(mu3, L3)
        k3 = mu3 * _chs(mu1, L1)
    else:
        k1 = _shs(mu3, L3)
        k3 = _shs(mu1, L1)
    return np.asarray(k1 * _sinh_family(mu1, s, order, L1) - k3 * _sinh_family(mu3, s, order, L3))


def _lam_of(lam) -> tuple[complex, str | None]:
    if isinstance(lam, Eigenvalue):
        return complex(lam.value), lam.branch
    return complex(lam), None


def _energy_sq(branch: str, amp: np.ndarray, lam: complex, mu1, mu3, p: NetworkParams) -> float:
    x, wts = _cheb.gauss_legendre()
    d0, d1, d2 = (_phi(branch, mu1, mu3, x, k) for k in range(3))
    edge = np.dot(wts, np.abs(d2) ** 2 + p.gamma * np.abs(d1) ** 2 + abs(lam) ** 2 * np.abs(d0) ** 2)
    slope = abs(_phi(branch, mu1, mu3, np.array([0.0]), 1)[0]) ** 2
    a2 = np.abs(amp) ** 2
    return float(a2.sum() * edge + p.alpha * a2.sum() * slope)


def _build(lam: complex, branch: str, amp: np.ndarray, params: NetworkParams, check: bool) -> EigenfunctionRep:
    if check and not is_zero(branch, lam, params):
        raise NotARootError(f"{lam!r} is not a {branch}-branch root for {params}")
    ex = char_exponents(lam, params.gamma)
    mu1, mu3 = complex(ex.mu1), complex(ex.mu3)
    grid = np.linspace(0.0, 1.0, 64)
    phi = _phi(branch, mu1, mu3, grid, 0)
    L1, L3 = abs(mu1.real), abs(mu3.real)
    if branch == "D":
        t1 = np.abs(mu1 * _chs(mu3, L3) * _sinh_family(mu1, grid, 0, L1))
    else:
        t1 = np.abs(_shs(mu3, L3) * _sinh_family(mu1, grid, 0, L1))
    if np.max(np.abs(phi)) <= ZERO_MODE_TOL * max(np.max(t1), 1e-300):
        raise ZeroModeError(f"profile vanishes at lam={lam!r}")
    norm = np.sqrt(_energy_sq(branch, amp, lam, mu1, mu3, params))
    c = 1.0 / norm
    # phase rule: w'(0) real positive on the largest-amplitude edge
    j = int(np.argmax(np.abs(amp)))
    ref = amp[j] * _phi(branch, mu1, mu3, np.array([0.0]), 1)[0]
    scale = np.max(np.abs(_phi(branch, mu1, mu3, grid, 1)))
    if abs(ref) <= PHASE_TOL * scale:
        ref = amp[j] * _phi(branch, mu1, mu3, np.array([0.0]), 0)[0]
    if ref != 0:
        c = c * abs(ref) / ref
    diag = {}
    if branch == "D":
        diag["case1_denominator_rel"] = case1_denominator(lam, params)
    return EigenfunctionRep(lam, branch, np.asarray(amp, dtype=float), complex(c), params, mu1, mu3, diag)


def case1_denominator(lam: complex, params: NetworkParams) -> float:
    """Relative size of ``mu1^2 [mu1 sinh mu1 + (alpha + lam beta) cosh mu1] cosh mu3``.

    The value is divided by the sum of the magnitudes of its terms, so a
    result near 0 means the denominator vanishes at ``lam``.
    """
    ex = char_exponents(lam, params.gamma)
    mu1, mu3 = complex(ex.mu1), complex(ex.mu3)
    L1, L3 = abs(mu1.real), abs(mu3.real)
    k = params.alpha + lam * params.beta
    s1, c1, c3 = _shs(mu1, L1), _chs(mu1, L1), _chs(mu3, L3)
    val = mu1**2 * (mu1 * s1 + k * c1) * c3
    size = abs(mu1) ** 2 * (abs(mu1 * s1) + abs(k * c1)) * abs(c3)
    return float(abs(val) / size) if size > 0 else 0.0


def branch1_mode(lam, params: NetworkParams, check: bool = True) -> EigenfunctionRep:
    """Normalized eigenvector of a D-branch eigenvalue.

    ``w_j(s) = c (mu1 cosh mu3 sinh mu1 (1-s) - mu3 cosh mu1 sinh mu3 (1-s))``
    on every edge.

    Raises
    ------
    NotARootError
        If ``check`` and ``lam`` fails the D-branch zero test.
    ZeroModeError
        If the profile vanishes identically.
    DegenerateExponentsError
        If ``lam`` lies in the degenerate set.
    """
    value, branch = _lam_of(lam)
    if branch not in (None, "D"):
        raise ValueError("branch1_mode needs a D-branch eigenvalue")
    return _build(value, "D", np.ones(3), params, check)


def branch2_modes(lam, params: NetworkParams, check: bool = True) -> tuple[EigenfunctionRep, EigenfunctionRep]:
    """Two normalized eigenvectors spanning an H-branch eigenspace.

    Both use ``phi(s) = sinh mu3 sinh mu1 (1-s) - sinh mu1 sinh mu3 (1-s)``
    with amplitude vectors ``A1 = (-2, 1, 1)`` and ``A2 = (0, 1, -1)``.
    """
    value, branch = _lam_of(lam)
    if branch not in (None, "H"):
        raise ValueError("branch2_modes needs an H-branch eigenvalue")
    return _build(value, "H", A1, params, check), _build(value, "H", A2, params, False)


def modes_for(ev: Eigenvalue, params: NetworkParams) -> list:
    """All normalized eigenvectors of a located eigenvalue."""
    if ev.branch == "D":
        return [branch1_mode(ev, params)]
    return list(branch2_modes(ev, params))


def residuals(mode: EigenfunctionRep, n_grid: int = RESIDUAL_GRID) -> ResidualReport:
    """Evaluate the mode against the ODE, end and vertex conditions."""
    p, lam = mode.params, mode.lam
    s = np.linspace(0.0, 1.0, n_grid)
    d = [mode.profile(s, k) for k in range(5)]
    m = [max(np.max(np.abs(x)), 1e-300) for x in d]
    ode = d[4] - p.gamma * d[2] + lam**2 * d[0]
    ode_r = np.max(np.abs(ode)) / (m[4] + p.gamma * m[2] + abs(lam) ** 2 * m[0])
    bc_r = max(np.max(np.abs(d[0][:, -1])) / m[0], np.max(np.abs(d[2][:, -1])) / m[2])
    cont = np.max(np.abs(d[0][:, 0] - d[0][0, 0])) / m[0]
    k = p.alpha + lam * p.beta
    moment = np.max(np.abs(d[2][:, 0] - k * d[1][:, 0])) / (m[2] + abs(k) * m[1])
    force = abs(np.sum(d[3][:, 0] - p.gamma * d[1][:, 0])) / (m[3] + p.gamma * m[1])
    return ResidualReport(float(ode_r), float(bc_r), float(max(cont, moment, force)))


def energy_inner(x: _HasGLData, y: _HasGLData, params: NetworkParams) -> complex:
    """Energy inner product ``(x, y)``, linear in ``x`` and antilinear in ``y``.

    ``sum_j [int w_j'' conj(y_j'') + gamma int w_j' conj(y_j')
    + alpha w_j'(0) conj(y_j'(0)) + int v_j conj(yv_j)]``, using 64-point
    Gauss-Legendre quadrature per edge.

    Raises
    ------
    GridMismatchError
        If both arguments are sampled states on different grids.
    """
    if isinstance(x, StateVector) and isinstance(y, StateVector) and x.N != y.N:
        raise GridMismatchError(f"grid sizes differ: {x.N} vs {y.N}")
    a, b = x.gl_data(), y.gl_data()
    _, wts = _cheb.gauss_legendre()
    val = (
        np.sum((a["w2"] * b["w2"].conj()) @ wts)
        + params.gamma * np.sum((a["w1"] * b["w1"].conj()) @ wts)
        + np.sum((a["v"] * b["v"].conj()) @ wts)
        + params.alpha * np.sum(a["w1_0"] * b["w1_0"].conj())
    )
    return complex(val)


def energy_norm(x: _HasGLData, params: NetworkParams) -> float:
    return float(np.sqrt(max(energy_inner(x, x, params).real, 0.0)))


@dataclass
class AdjointMode:
    """Eigenvector ``{(conj w_j, -conj(lam) conj w_j)}`` of the adjoint at ``conj(lam)``."""

    mode: EigenfunctionRep

    @property
    def lam(self) -> complex:
        return complex(np.conj(self.mode.lam))

    def gl_data(self) -> dict:
        d = self.mode.gl_data()
        w0 = d["v"] / self.mode.lam
        return {
            "w1": d["w1"].conj(),
            "w2": d["w2"].conj(),
            "v": -np.conj(self.mode.lam) * w0.conj(),
            "w1_0": d["w1_0"].conj(),
        }


def adjoint_mode(mode: EigenfunctionRep) -> AdjointMode:
    return AdjointMode(mode)


def adjoint_pairing(lam, mode: EigenfunctionRep, params: NetworkParams) -> complex:
    """``-2 lam^2 sum_j int w_j^2 - lam beta sum_j w_j'(0)^2`` by quadrature.

    Squares, not moduli: this is the pairing of the eigenvector with the
    adjoint eigenvector at ``conj(lam)``.
    """
    value, _ = _lam_of(lam)
    if abs(value - mode.lam) > 1e-9 * max(1.0, abs(value)):
        raise ValueError("mode does not belong to lam")
    x, wts = _cheb.gauss_legendre()
    w = mode.profile(x)
    w1 = mode.profile(np.array([0.0]), 1)[:, 0]
    return complex(-2 * value**2 * np.sum((w * w) @ wts) - value * params.beta * np.sum(w1 * w1))


def adjoint_pairing_closed_form(mode: EigenfunctionRep) -> complex:
    """Closed-form pairing on the D-branch, ``3 c^2`` times the bracket.

    All hyperbolic factors are scaled; the normalization ``c`` of the rep
    already contains the matching ``exp(-log_scale)``.
    """
    if mode.branch != "D":
        raise ValueError("closed form exists for the D-branch only")
    lam, m1, m3, p = mode.lam, mode.mu1, mode.mu3, mode.params
    L1, L3 = abs(m1.real), abs(m3.real)
    c1, s1, c3, s3 = _chs(m1, L1), _shs(m1, L1), _chs(m3, L3), _shs(m3, L3)
    bracket = (
        -(lam**2) * c1 * c3 * (m1 * s1 * c3 + m3 * c1 * s3)
        - 4 * lam**2 * (m1 * m3 / (m3**2 - m1**2)) * c1 * c3 * (m1 * c1 * s3 - m3 * s1 * c3)
        - lam * p.beta * (m3**2 - m1**2) ** 2 * c1**2 * c3**2
        + lam**2 * (m1**2 * c3**2 * np.exp(-2 * L1) + m3**2 * c1**2 * np.exp(-2 * L3))
    )
    return complex(3 * mode.c**2 * bracket)
