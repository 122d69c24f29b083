"""Time stepping, energy bookkeeping and decay-rate fits."""

from __future__ import annotations

import math

import numpy as np
import pytest

from graphbeam.cli import PRESETS
from graphbeam.eigenfunctions import energy_norm, modes_for
from graphbeam.exponents import NetworkParams
from graphbeam.simulator import (
    DecayEstimate,
    EnergyTrace,
    NoDecay,
    Simulator,
    _resolved_projector,
    boundary_dissipation,
    decay_fit,
    energy,
    init_state,
    simulate,
    step,
)
from graphbeam.state import DOMAIN, GENERIC, DomainError, random_state

N = 48
DT = 1e-4


def abscissa(report) -> float:
    return -max(e.value.real for e in report.eigenvalues)


@pytest.fixture(scope="module")
def superposition(spectrum, params):
    """Two decaying modes plus an H-branch mode, sampled on the simulation grid."""
    ms = [modes_for(spectrum.get(b, n), params)[0] for b, n in (("D", 0), ("D", 1), ("H", 1))]
    x = ms[0].to_state(N) + 0.5 * ms[1].to_state(N) + 0.25j * ms[2].to_state(N)
    return x


class TestInitState:
    def test_sine_accepted(self):
        x = init_state(*PRESETS["sine"], N)
        assert x.tag == GENERIC and x.N == N

    def test_end_value_rejected(self):
        g = [lambda s: np.cos(s)] * 3
        with pytest.raises(DomainError) as info:
            init_state(g, [lambda s: 0 * s] * 3, N)
        assert "w(1)=0" in str(info.value)

    def test_discontinuity_rejected(self):
        g = [lambda s: 1 - s, lambda s: 2 * (1 - s), lambda s: 1 - s]
        with pytest.raises(DomainError) as info:
            init_state(g, [lambda s: 0 * s] * 3, N)
        assert "continuity" in str(info.value)

    def test_domain_tag(self, spectrum, params):
        m = modes_for(spectrum.get("D", 1), params)[0]
        g = [lambda s, j=j: m.profile(s)[j] for j in range(3)]
        h = [lambda s, j=j: m.lam * m.profile(s)[j] for j in range(3)]
        assert init_state(g, h, N, params).tag == DOMAIN
        assert init_state(*PRESETS["sine"], N, params).tag == GENERIC


class TestEnergy:
    def test_zero_state(self, params):
        x = init_state([lambda s: 0 * s] * 3, [lambda s: 0 * s] * 3, N)
        assert energy(x, params) == 0.0 and boundary_dissipation(x, params) == 0.0

    def test_normalized_mode(self, spectrum, params):
        x = modes_for(spectrum.get("D", 2), params)[0].to_state(N)
        assert energy(x, params) == pytest.approx(1.0, abs=1e-10)

    def test_coordinates_carry_energy(self, superposition, params):
        sim = Simulator(params, N, DT)
        assert sim.energy_of(sim.coords(superposition)) == pytest.approx(energy(superposition, params), rel=1e-10)

    def test_dissipation_matches_state_formula(self, superposition, params):
        sim = Simulator(params, N, DT)
        d = sim.dissipation_of(sim.coords(superposition))
        assert d == pytest.approx(boundary_dissipation(superposition, params), rel=1e-8)


class TestConservation:
    def test_energy_conserved_without_friction(self, conservative):
        x0 = init_state(*PRESETS["poly"], N)
        tr = Simulator(conservative, N, DT).run(x0, 1000 * DT, 1)
        assert tr.times.size == 1001
        assert np.max(np.abs(tr.energy / tr.energy[0] - 1)) <= 1e-6
        assert tr.filtered_share == 0.0

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 5.0])
    def test_contractive(self, alpha):
        p = NetworkParams(1.0, alpha, 1.0)
        for name in PRESETS:
            tr = Simulator(p, N, DT).run(init_state(*PRESETS[name], N), 0.2, 1)
            assert np.all(tr.energy[1:] <= tr.energy[:-1] * (1 + 1e-12)), name

    def test_no_decay_result(self, conservative):
        tr = simulate(init_state(*PRESETS["sine"], N), conservative, DT, 0.1, 10)
        fit = decay_fit(tr)
        assert isinstance(fit, NoDecay) and not fit.decaying
        assert fit.energy_ratio == pytest.approx(1.0, abs=1e-6)


class TestAccuracy:
    def test_second_order(self, superposition, params):
        # smooth data, filtered at a fixed cutoff so all runs share one start
        sim = Simulator(params, N, DT, filter_unresolved=False)
        u0 = _resolved_projector(params, N, 500.0) @ sim.coords(superposition)
        U0 = np.stack([u0.real, u0.imag], axis=1)
        t_end = 0.02
        ends = []
        for dt in (4e-4, 2e-4, 1e-4):
            s = Simulator(params, N, dt, filter_unresolved=False)
            ends.append(s.advance(U0, int(round(t_end / dt))))
        ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
        assert ratio == pytest.approx(4.0, rel=0.05)

    @pytest.mark.parametrize("branch,n", [("D", 0), ("D", 1), ("H", 1)])
    def test_mode_evolution(self, spectrum, params, branch, n):
        ev = spectrum.get(branch, n)
        x = modes_for(ev, params)[0].to_state(N)
        steps = int(round(2 * math.pi / abs(ev.value.imag) / DT))
        tr = Simulator(params, N, DT).run(x, steps * DT, steps)
        want = x * np.exp(ev.value * steps * DT)
        assert energy_norm(tr.final_state - want, params) <= 1e-5 * energy_norm(want, params)

    def test_dissipation_identity_along_trajectory(self, superposition, params):
        tr = Simulator(params, N, DT).run(superposition, 0.05, 1)
        dEdt = (tr.energy[2:] - tr.energy[:-2]) / (2 * DT)
        d = tr.boundary_dissipation[1:-1]
        assert np.max(np.abs(dEdt + d)) <= 1e-3 * np.max(d)

    def test_step_function(self, superposition, params):
        y = step(superposition, DT, params)
        sim = Simulator(params, N, DT, filter_unresolved=False)
        assert np.allclose(sim.coords(y), sim.P @ sim.coords(superposition), atol=1e-10)

    def test_rejects_nonpositive_dt(self, params):
        with pytest.raises(ValueError):
            Simulator(params, N, 0.0)


class TestDecayFit:
    @pytest.mark.parametrize("branch,n", [("D", 0), ("D", 1), ("H", 1)])
    def test_single_mode(self, spectrum, params, branch, n):
        ev = spectrum.get(branch, n)
        rate = -ev.value.real
        x = modes_for(ev, params)[0].to_state(N)
        # five e-folds of the norm keep the fit above the projection error
        tr = simulate(x, params, DT, 5.0 / rate, 10)
        fit = decay_fit(tr)
        assert isinstance(fit, DecayEstimate)
        assert fit.delta == pytest.approx(rate, rel=0.02)

    @pytest.mark.parametrize("preset", sorted(PRESETS))
    def test_generic_data(self, spectrum, params, preset):
        tr = simulate(init_state(*PRESETS[preset], N), params, DT, 20.0, 100)
        fit = decay_fit(tr)
        assert fit.delta == pytest.approx(abscissa(spectrum), rel=0.10)
        assert fit.fit_window[0] == pytest.approx(4.0, abs=0.01)
        assert tr.filtered_share < 0.02

    def test_decay_independent_of_elasticity(self):
        deltas = []
        for alpha in (0.0, 1.0, 5.0):
            tr = simulate(init_state(*PRESETS["poly"], N), NetworkParams(1.0, alpha, 1.0), DT, 20.0, 100)
            fit = decay_fit(tr)
            assert fit.delta > 0
            deltas.append(fit.delta)
        spread = max(deltas) / min(deltas) - 1
        assert spread <= 0.15, f"deltas {deltas}"

    def test_short_trace(self):
        assert isinstance(decay_fit(EnergyTrace([0.0, 1.0], [1.0, 0.5], [0.0, 0.0])), NoDecay)

    def test_synthetic_exponential(self):
        t = np.linspace(0, 10, 201)
        tr = EnergyTrace(t, 3.0 * np.exp(-2 * 0.7 * t), np.zeros_like(t))
        fit = decay_fit(tr)
        assert fit.delta == pytest.approx(0.7, rel=1e-12)
        assert fit.M == pytest.approx(math.sqrt(3.0), rel=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.fit_window == (2.0, 10.0)


class TestEnergyTrace:
    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            EnergyTrace([0.0, 1.0], [1.0], [0.0, 0.0])

    def test_times_increase(self):
        with pytest.raises(ValueError):
            EnergyTrace([0.0, 0.0], [1.0, 1.0], [0.0, 0.0])

    def test_recording_cadence(self, params):
        tr = simulate(init_state(*PRESETS["sine"], N), params, DT, 0.0105, 10)
        assert tr.times[-1] == pytest.approx(0.0105)
        assert np.allclose(np.diff(tr.times)[:-1], 10 * DT)
