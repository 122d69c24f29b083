"""Network parameters and characteristic exponents.

The beam equation on each edge at spectral parameter ``lam`` reduces to
``w'''' - gamma w'' + lam**2 w = 0`` whose characteristic polynomial
``mu**4 - gamma mu**2 + lam**2`` has the four roots computed here.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

DEGENERATE_TOL = 1e-10


class DegenerateExponentsError(ValueError):
    """Raised when ``gamma**2 - 4 lam**2`` vanishes, so that mu1 = mu3."""

    def __init__(self, lam: complex, gamma: float, disc: complex):
        self.lam = lam
        self.gamma = gamma
        self.disc = disc
        super().__init__(
            f"degenerate exponents at lam={lam!r}, gamma={gamma!r} "
            f"(|gamma^2 - 4 lam^2| = {abs(disc):.3e})"
        )


@dataclass(frozen=True)
class NetworkParams:
    """Physical parameters of the star network.

    Parameters
    ----------
    gamma : float
        Tension, strictly positive.
    alpha : float
        Elastic coefficient on the vertex slopes, nonnegative.
    beta : float
        Viscous friction coefficient on the vertex slopes, nonnegative.
    allow_zero_gamma : bool
        Accept ``gamma = 0``. Only meant for evaluating the characteristic
        functions in closed-form test limits.
    """

    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    allow_zero_gamma: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta"):
            val = getattr(self, name)
            if not isinstance(val, (int, float, np.floating, np.integer)) or not math.isfinite(val):
                raise ValueError(f"{name} must be a finite real number, got {val!r}")
            object.__setattr__(self, name, float(val))
        if self.gamma < 0 or (self.gamma == 0 and not self.allow_zero_gamma):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        return cls(gamma=d["gamma"], alpha=d["alpha"], beta=d["beta"])


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter, optionally tagged as coming from asymptotics."""

    lam: complex
    asymptotic: bool = False

    def check_constructible(self, gamma: float) -> None:
        """Raise if ``lam`` is 0 or in the degenerate set for ``gamma``."""
        if self.lam == 0:
            raise ValueError("lam = 0 is excluded")
        disc = gamma * gamma - 4 * self.lam * self.lam
        if abs(disc) <= DEGENERATE_TOL * max(1.0, gamma * gamma):
            raise DegenerateExponentsError(self.lam, gamma, disc)


@dataclass(frozen=True)
class CharExponents:
    """The four characteristic exponents at one spectral point.

    Attributes
    ----------
    mu1, mu2, mu3, mu4 : complex
        Exponents with ``mu2 = -mu1`` and ``mu4 = -mu3``.
    lam : complex
        Spectral parameter they belong to.
    gamma : float
        Tension they were computed with.
    sign : int
        +1 if ``mu1 * mu3`` is closer to ``lam`` than to ``-lam``, else -1.
        Recorded only; no formula depends on it.
    asymptotic : bool
        True for exponents produced by :func:`rho_parametrise`.
    """

    mu1: complex
    mu2: complex
    mu3: complex
    mu4: complex
    lam: complex
    gamma: float
    sign: int = 1
    asymptotic: bool = False

    def as_set(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2, self.mu3, self.mu4])


def _sign_flag(mu1: complex, mu3: complex, lam: complex) -> int:
    p = mu1 * mu3
    return 1 if abs(p - lam) <= abs(p + lam) else -1


def exponent_pair(lam, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``(mu1, mu3)`` without degeneracy checks.

    The larger of ``(gamma +- d)/2`` is formed directly and the other as
    ``lam**2`` divided by it, which avoids cancellation near ``lam = 0``.
    Points below the real axis are evaluated at their conjugate and
    conjugated back, so the exponents commute with conjugation even where
    a principal square root meets its branch cut.
    """
    lam = np.asarray(lam, dtype=complex)
    flip = lam.imag < 0
    z = np.where(flip, lam.conjugate(), lam.real + 1j * np.abs(lam.imag))
    d = np.sqrt(gamma * gamma - 4 * z * z)
    p, m = (gamma + d) / 2, (gamma - d) / 2
    big_p = np.abs(p) >= np.abs(m)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sq1 = np.where(big_p, p, np.where(m != 0, z * z / m, 0))
        sq3 = np.where(big_p, np.where(p != 0, z * z / p, 0), m)
    mu1, mu3 = np.sqrt(sq1), np.sqrt(sq3)
    return np.where(flip, mu1.conjugate(), mu1), np.where(flip, mu3.conjugate(), mu3)


def char_exponents(lam: complex, gamma: float) -> CharExponents:
    """Characteristic exponents at ``lam`` with principal square roots.

    ``mu1 = sqrt((gamma + d)/2)`` and ``mu3 = sqrt((gamma - d)/2)`` where
    ``d = sqrt(gamma**2 - 4 lam**2)``, evaluated as in :func:`exponent_pair`.

    Raises
    ------
    DegenerateExponentsError
        If ``|gamma**2 - 4 lam**2| <= 1e-10 * max(1, gamma**2)``.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    lam = complex(lam)
    disc = gamma * gamma - 4 * lam * lam
    if abs(disc) <= DEGENERATE_TOL * max(1.0, gamma * gamma):
        raise DegenerateExponentsError(lam, gamma, disc)
    m1, m3 = exponent_pair(lam, gamma)
    mu1, mu3 = complex(m1), complex(m3)
    return CharExponents(mu1, -mu1, mu3, -mu3, lam, float(gamma), _sign_flag(mu1, mu3, lam))


@dataclass(frozen=True)
class RhoPoint:
    """Asymptotic parameter ``rho`` with its correction terms.

    ``lam = i rho**2`` by construction; ``xi`` and ``epsilon`` are carried
    for bookkeeping of the asymptotic expansions.
    """

    rho: complex
    xi: complex = 0j
    epsilon: float = 0.0

    def __post_init__(self):
        arg = cmath.phase(complex(self.rho)) if self.rho != 0 else 0.0
        if not (-1e-15 <= arg <= math.pi / 2 + 1e-15):
            raise ValueError(f"arg(rho) must lie in [0, pi/2], got {arg}")

    @property
    def lam(self) -> complex:
        return 1j * complex(self.rho) ** 2


def rho_parametrise(rho: complex) -> tuple[SpectralPoint, CharExponents]:
    """Map ``rho`` to ``lam = i rho**2`` with ``mu1 = rho``, ``mu3 = i rho``.

    The result is exact only for zero tension and is tagged asymptotic;
    it is used for seeding, never for residual checks.
    """
    p = RhoPoint(complex(rho))
    r = complex(rho)
    lam = p.lam
    mu1, mu3 = r, 1j * r
    ex = CharExponents(mu1, -mu1, mu3, -mu3, lam, 0.0, _sign_flag(mu1, mu3, lam), True)
    return SpectralPoint(lam, asymptotic=True), ex
