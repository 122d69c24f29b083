"""Parameters, characteristic exponents and the rho parametrisation."""

from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from graphbeam.exponents import (
    DegenerateExponentsError,
    NetworkParams,
    RhoPoint,
    SpectralPoint,
    char_exponents,
    rho_parametrise,
)

# extended-precision values (mpmath, 40 digits) of the exponents at lam = 5i, gamma = 1
MU1_5I = 2.350518625869713276437711969452649645668
MU3_5I = 2.127190120924889293453048816162165196056j
RHO_10_5_SQ = 1088.123885220101787726502632736345662668

finite = st.floats(-60, 60, allow_nan=False, allow_infinity=False)


def same_set(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    dist = np.abs(a[:, None] - b[None, :])
    return bool(np.all(dist.min(axis=0) <= tol) and np.all(dist.min(axis=1) <= tol))


@st.composite
def spectral_points(draw):
    return complex(draw(finite), draw(finite))


class TestNetworkParams:
    def test_defaults(self):
        p = NetworkParams()
        assert (p.gamma, p.alpha, p.beta) == (1.0, 1.0, 1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gamma": 0.0},
            {"gamma": -1.0},
            {"alpha": -0.1},
            {"beta": -1e-9},
            {"gamma": math.nan},
            {"beta": math.inf},
            {"alpha": "1"},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            NetworkParams(**kwargs)

    def test_zero_gamma_only_on_request(self):
        assert NetworkParams(gamma=0.0, allow_zero_gamma=True).gamma == 0.0

    def test_dict_round_trip(self):
        p = NetworkParams(2.5, 0.0, 3.0)
        assert NetworkParams.from_dict(p.to_dict()) == p

    def test_hashable(self):
        assert len({NetworkParams(), NetworkParams()}) == 1


class TestCharExponents:
    def test_degenerate_point_raises(self):
        with pytest.raises(DegenerateExponentsError):
            char_exponents(1.0, 2.0)

    def test_degenerate_detected_within_tolerance(self):
        with pytest.raises(DegenerateExponentsError):
            char_exponents(1.0 + 1e-12, 2.0)

    def test_zero_tension_unit_point(self):
        ex = char_exponents(1j, 0.0)
        assert ex.mu1 == pytest.approx(1.0, abs=1e-15)
        assert ex.mu3 == pytest.approx(1j, abs=1e-15)

    def test_frozen_values_at_5i(self):
        ex = char_exponents(5j, 1.0)
        assert abs(ex.mu1 - MU1_5I) <= 1e-13
        assert abs(ex.mu3 - MU3_5I) <= 1e-13
        assert abs(abs(ex.mu1 * ex.mu3) - 5.0) <= 1e-12

    def test_pairs_are_negatives(self):
        ex = char_exponents(-0.3 + 7j, 1.7)
        assert ex.mu2 == -ex.mu1 and ex.mu4 == -ex.mu3

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            char_exponents(1j, -1.0)

    def test_sign_flag_recorded(self):
        for lam in (5j, -5j, 2.0 + 1j, -3.0 - 4j):
            ex = char_exponents(lam, 1.0)
            target = lam if ex.sign == 1 else -lam
            assert abs(ex.mu1 * ex.mu3 - target) <= abs(ex.mu1 * ex.mu3 + target)

    @settings(max_examples=200, deadline=None)
    @given(lam=spectral_points(), gamma=st.floats(0.05, 20.0))
    def test_algebraic_identities(self, lam, gamma):
        assume(abs(gamma**2 - 4 * lam**2) > 1e-6 * max(1.0, gamma**2))
        ex = char_exponents(lam, gamma)
        scale = max(1.0, gamma, abs(lam))
        assert abs(ex.mu1**2 + ex.mu3**2 - gamma) <= 1e-12 * scale
        assert abs((ex.mu1 * ex.mu3) ** 2 - lam**2) <= 1e-12 * max(1.0, abs(lam)) ** 2

    @settings(max_examples=200, deadline=None)
    @given(lam=spectral_points(), gamma=st.floats(0.05, 20.0))
    def test_conjugation_symmetry(self, lam, gamma):
        assume(abs(gamma**2 - 4 * lam**2) > 1e-6 * max(1.0, gamma**2))
        a = char_exponents(lam, gamma).as_set()
        b = np.conj(char_exponents(lam.conjugate(), gamma).as_set())
        assert same_set(a, b, 1e-12 * max(1.0, abs(lam)))


class TestSpectralPoint:
    def test_zero_excluded(self):
        with pytest.raises(ValueError):
            SpectralPoint(0j).check_constructible(1.0)

    def test_degenerate_excluded(self):
        with pytest.raises(DegenerateExponentsError):
            SpectralPoint(-0.5 + 0j).check_constructible(1.0)

    def test_regular_point_passes(self):
        SpectralPoint(-1 + 3j).check_constructible(1.0)


class TestRhoParametrise:
    def test_unit_rho(self):
        pt, ex = rho_parametrise(1.0)
        assert pt.lam == 1j and ex.mu1 == 1 and ex.mu3 == 1j
        assert pt.asymptotic and ex.asymptotic

    def test_half_pi(self):
        pt, ex = rho_parametrise(0.5 * math.pi)
        assert pt.lam == pytest.approx(1j * math.pi**2 / 4, rel=1e-15)
        assert ex.mu3 == pytest.approx(0.5j * math.pi, rel=1e-15)

    def test_frozen_large_rho(self):
        pt, _ = rho_parametrise(10.5 * math.pi)
        assert pt.lam.real == 0.0
        assert pt.lam.imag == pytest.approx(RHO_10_5_SQ, rel=1e-15)

    def test_sector_enforced(self):
        with pytest.raises(ValueError):
            RhoPoint(-1.0 + 0.1j)

    @settings(max_examples=100, deadline=None)
    @given(r=st.floats(0.1, 50.0), theta=st.floats(0.0, math.pi / 2))
    def test_matches_zero_tension_exponents(self, r, theta):
        rho = cmath.rect(r, theta)
        pt, ex = rho_parametrise(rho)
        assume(abs(4 * pt.lam**2) > 1e-6)
        exact = char_exponents(pt.lam, 0.0)
        assert same_set(ex.as_set(), exact.as_set(), 1e-12 * max(1.0, r))
