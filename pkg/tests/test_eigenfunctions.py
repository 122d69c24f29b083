"""Closed-form eigenvectors, residuals, energy products and adjoint pairings."""

from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphbeam.eigenfunctions import (
    A1,
    A2,
    NotARootError,
    ResidualReport,
    ZeroModeError,
    adjoint_mode,
    adjoint_pairing,
    adjoint_pairing_closed_form,
    branch1_mode,
    branch2_modes,
    case1_denominator,
    energy_inner,
    energy_norm,
    modes_for,
    residuals,
)
from graphbeam.exponents import DegenerateExponentsError, NetworkParams
from graphbeam.state import GridMismatchError, StateVector

RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-10


def energy_with_nodes(x, y, params, n):
    """Energy product of two closed-form modes with n Gauss-Legendre nodes."""
    t, w = np.polynomial.legendre.leggauss(n)
    s, wts = 0.5 * (t + 1), 0.5 * w
    d2 = np.sum((x.profile(s, 2) * y.profile(s, 2).conj()) @ wts)
    d1 = np.sum((x.profile(s, 1) * y.profile(s, 1).conj()) @ wts)
    d0 = x.lam * np.conj(y.lam) * np.sum((x.profile(s) * y.profile(s).conj()) @ wts)
    slope = np.sum(x.profile(np.array([0.0]), 1)[:, 0] * y.profile(np.array([0.0]), 1)[:, 0].conj())
    return d2 + params.gamma * d1 + d0 + params.alpha * slope


@pytest.fixture(scope="module")
def all_modes(spectrum, params):
    return [(ev, m) for ev in spectrum.eigenvalues for m in modes_for(ev, params)]


class TestBranchOne:
    def test_end_conditions(self, spectrum, params):
        m = branch1_mode(spectrum.get("D", 3), params)
        end = np.array([1.0])
        assert np.max(np.abs(m.profile(end, 0))) <= 1e-10
        assert np.max(np.abs(m.profile(end, 2))) <= 1e-10 * np.max(np.abs(m.profile(np.linspace(0, 1, 50), 2)))

    def test_equal_edges(self, spectrum, params):
        m = branch1_mode(spectrum.get("D", 2), params)
        w = m.profile(np.linspace(0, 1, 33))
        assert np.array_equal(w[0], w[1]) and np.array_equal(w[1], w[2])

    def test_residual_report_third_root(self, spectrum, params):
        r = residuals(branch1_mode(spectrum.get("D", 3), params))
        assert r.ok(RESIDUAL_TOL), r

    def test_normalized_with_phase(self, spectrum, params):
        m = branch1_mode(spectrum.get("D", 1), params)
        assert energy_inner(m, m, params).real == pytest.approx(1.0, abs=1e-12)
        slope = m.profile(np.array([0.0]), 1)[0, 0]
        assert slope.real > 0 and abs(slope.imag) <= 1e-12 * abs(slope)

    def test_case1_denominator_nonzero(self, spectrum, params):
        for ev in spectrum.upper("D"):
            assert case1_denominator(ev.value, params) > 1e-3

    def test_rejects_non_root(self, params):
        with pytest.raises(NotARootError):
            branch1_mode(-0.5 + 3.0j, params)

    def test_rejects_wrong_branch(self, spectrum, params):
        with pytest.raises(ValueError):
            branch1_mode(spectrum.get("H", 2), params)

    def test_degenerate_point(self, params):
        with pytest.raises(DegenerateExponentsError):
            branch1_mode(0.5, params, check=False)


class TestBranchTwo:
    def test_vertex_value_zero(self, spectrum, params):
        for m in branch2_modes(spectrum.get("H", 2), params):
            assert np.max(np.abs(m.base(np.array([0.0])))) <= 1e-14

    def test_amplitudes(self, spectrum, params):
        a, b = branch2_modes(spectrum.get("H", 1), params)
        assert np.array_equal(a.amplitude, A1) and np.array_equal(b.amplitude, A2)
        assert a.amplitude.sum() == 0 and b.amplitude.sum() == 0

    def test_pair_orthogonal(self, spectrum, params):
        for ev in spectrum.eigenvalues:
            if ev.branch == "H":
                a, b = branch2_modes(ev, params)
                assert abs(energy_inner(a, b, params)) <= ORTHO_TOL

    def test_residual_report_second_root(self, spectrum, params):
        for m in branch2_modes(spectrum.get("H", 2), params):
            assert residuals(m).ok(RESIDUAL_TOL)

    def test_real_root(self, spectrum, params):
        ev = spectrum.get("H", 0)
        assert ev.value.imag == 0
        for m in branch2_modes(ev, params):
            assert residuals(m).ok(RESIDUAL_TOL)

    def test_zero_mode_detected(self, spectrum, params, monkeypatch):
        # both hyperbolic factors cannot vanish for gamma >= 0, so force the profile
        import graphbeam.eigenfunctions as ef

        monkeypatch.setattr(ef, "_phi", lambda branch, mu1, mu3, s, order: np.zeros(np.shape(s), dtype=complex))
        with pytest.raises(ZeroModeError):
            branch2_modes(spectrum.get("H", 1), params)


class TestResiduals:
    @settings(max_examples=26, deadline=None)
    @given(n=st.integers(0, 12), branch=st.sampled_from(["D", "H"]), upper=st.booleans())
    def test_every_mode(self, spectrum, params, n, branch, upper):
        # a lone real root has no "-0" slot
        ev = spectrum.get(branch, n, upper) or spectrum.get(branch, n)
        for m in modes_for(ev, params):
            r = residuals(m)
            assert r.ok(RESIDUAL_TOL), (ev.label, r)
            assert energy_inner(m, m, params).real == pytest.approx(1.0, abs=1e-12)

    def test_report_rejects_negative(self):
        with pytest.raises(ValueError):
            ResidualReport(-1.0, 0.0, 0.0)

    def test_detects_wrong_lambda(self, spectrum, params):
        ev = spectrum.get("D", 3)
        m = branch1_mode(ev.value + 0.01, params, check=False)
        assert not residuals(m).ok(RESIDUAL_TOL)


class TestEnergyInner:
    def test_doubled_nodes_converged(self, spectrum, params):
        for n in (0, 4, 10):
            for m in modes_for(spectrum.get("D", n), params) + modes_for(spectrum.get("H", n), params):
                e64 = energy_with_nodes(m, m, params, 64)
                e128 = energy_with_nodes(m, m, params, 128)
                assert abs(e64 - e128) <= 1e-12
                assert abs(energy_inner(m, m, params) - e128) <= 1e-12

    def test_hermitian(self, spectrum, params):
        a = branch1_mode(spectrum.get("D", 2), params)
        b = branch2_modes(spectrum.get("H", 3), params)[0]
        assert energy_inner(a, b, params) == pytest.approx(np.conj(energy_inner(b, a, params)), abs=1e-15)

    def test_sampled_state_agrees(self, spectrum, params):
        m = branch1_mode(spectrum.get("D", 2), params)
        x = m.to_state(48)
        assert energy_inner(x, x, params).real == pytest.approx(1.0, abs=1e-10)
        assert energy_inner(x, m, params).real == pytest.approx(1.0, abs=1e-10)

    def test_grid_mismatch(self, params):
        with pytest.raises(GridMismatchError):
            energy_inner(StateVector.zeros(16), StateVector.zeros(24), params)

    def test_norm_of_zero(self, params):
        assert energy_norm(StateVector.zeros(16), params) == 0.0


class TestAdjointPairing:
    def test_nonzero_everywhere(self, all_modes, params):
        for ev, m in all_modes:
            assert abs(adjoint_pairing(ev, m, params)) > 1e-6

    def test_closed_form_agrees_on_d_branch(self, all_modes, params):
        for ev, m in all_modes:
            if ev.branch == "D":
                q = adjoint_pairing(ev, m, params)
                assert abs(adjoint_pairing_closed_form(m) - q) <= 1e-8 * abs(q)

    def test_pairing_is_inner_product_with_adjoint(self, all_modes, params):
        for ev, m in all_modes[:12]:
            q = adjoint_pairing(ev, m, params)
            assert abs(energy_inner(m, adjoint_mode(m), params) - q) <= 1e-10 * abs(q)

    def test_biorthogonality(self, spectrum, params):
        evs = [e for e in spectrum.eigenvalues if abs(e.value.imag) < 400]
        worst = 0.0
        for a in evs:
            for b in evs:
                if a is b:
                    continue
                for ma in modes_for(a, params):
                    for mb in modes_for(b, params):
                        worst = max(worst, abs(energy_inner(ma, adjoint_mode(mb), params)))
        assert worst <= 1e-8

    def test_wrong_lambda_rejected(self, spectrum, params):
        m = branch1_mode(spectrum.get("D", 1), params)
        with pytest.raises(ValueError):
            adjoint_pairing(spectrum.get("D", 2), m, params)

    def test_closed_form_d_only(self, spectrum, params):
        with pytest.raises(ValueError):
            adjoint_pairing_closed_form(branch2_modes(spectrum.get("H", 1), params)[0])


class TestExport:
    def test_csv_round_trip(self, tmp_path, spectrum, params):
        m = branch2_modes(spectrum.get("H", 1), params)[1]
        s = np.linspace(0, 1, 11)
        path = tmp_path / "mode.csv"
        m.to_csv(path, s)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        w = m.profile(s)
        got = np.array([[complex(float(r[f"re_w{j}"]), float(r[f"im_w{j}"])) for r in rows] for j in (1, 2, 3)])
        assert np.array_equal(got, w)
        assert [float(r["s"]) for r in rows] == list(s)
