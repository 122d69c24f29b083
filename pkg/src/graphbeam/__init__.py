"""Spectral toolkit for a stretched Euler-Bernoulli beam network on a 3-edge star."""

from .charfun import eval_D, eval_D_alt, eval_H, eval_reduced
from .eigenfunctions import (
    adjoint_pairing,
    adjoint_pairing_closed_form,
    branch1_mode,
    branch2_modes,
    energy_inner,
    residuals,
)
from .exponents import DegenerateExponentsError, NetworkParams, char_exponents, rho_parametrise
from .oracle import assemble, assemble_galerkin, cross_validate, oracle_spectrum
from .resolvent import apply_S, apply_T, apply_T0inv, apply_Tinv
from .rootfinding import asymptotic_seed, compute_spectrum, count_zeros, newton_refine
from .simulator import decay_fit, init_state, simulate
from .state import StateVector

__version__ = "0.1.0"

__all__ = [
    "DegenerateExponentsError",
    "NetworkParams",
    "StateVector",
    "adjoint_pairing",
    "adjoint_pairing_closed_form",
    "apply_S",
    "apply_T",
    "apply_T0inv",
    "apply_Tinv",
    "assemble",
    "assemble_galerkin",
    "asymptotic_seed",
    "branch1_mode",
    "branch2_modes",
    "char_exponents",
    "compute_spectrum",
    "count_zeros",
    "cross_validate",
    "decay_fit",
    "energy_inner",
    "eval_D",
    "eval_D_alt",
    "eval_H",
    "eval_reduced",
    "init_state",
    "newton_refine",
    "oracle_spectrum",
    "residuals",
    "rho_parametrise",
    "simulate",
]
