import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhdimer.dynamics import (
    TimeSeries,
    energy_expectation,
    evolve_rk4,
    evolve_spectral,
    observable_series,
    power_spectrum,
    truncate_to_top_k,
)
from bhdimer.errors import StepSizeError
from bhdimer.model import DimerParams, PhasePoint, StateVector, coherent_state, epr
from bhdimer.spectra import diagonalize

from conftest import random_state


@given(n=st.integers(1, 20), t=st.floats(0, 3), seed=st.integers(0, 2**16))
def test_spectral_evolution_unitary(n, t, seed):
    p = DimerParams(n, 5.0, 1.3)
    s = StateVector(random_state(n, np.random.default_rng(seed)))
    eig = diagonalize(p)
    out = evolve_spectral(s, eig, t)
    assert out.norm_sq == pytest.approx(1.0, abs=1e-12)
    assert energy_expectation(out, p) == pytest.approx(energy_expectation(s, p), rel=1e-10, abs=1e-9)


def test_spectral_matches_dense_expm():
    from scipy.linalg import expm

    from bhdimer.model import build_hamiltonian

    p = DimerParams(9, 3.0, 2.0)
    s = coherent_state(p, PhasePoint(0.3, 1.0))
    ref = expm(-1j * 0.7 * build_hamiltonian(p)) @ s.amplitudes
    assert np.allclose(evolve_spectral(s, diagonalize(p), 0.7).amplitudes, ref, atol=1e-12)


def test_rk4_step_too_large():
    p = DimerParams(20, 10.0, 5.0)
    s = coherent_state(p, PhasePoint(0.2, 0.0))
    with pytest.raises(StepSizeError):
        evolve_rk4(s, p, 1.0, dt=0.01)


def test_uncoupled_fock_is_stationary():
    p = DimerParams(5, 0.0, 2.0)
    s = StateVector.fock(5, 2)
    out = evolve_spectral(s, diagonalize(p), 3.3)
    assert abs(abs(out.amplitudes[2]) - 1) < 1e-14


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries([0, 1, 1], *[np.zeros(3)] * 5)


def test_series_bounds(ref_state, ref_eig):
    ts = observable_series(ref_state, ref_eig, np.linspace(0, 2, 201))
    assert np.all(ts.condensate_fraction >= 0.5 - 1e-12)
    assert np.all(ts.condensate_fraction <= 1 + 1e-12)
    assert np.all(ts.epr <= 40**2 / 4)
    assert np.allclose(ts.atom_count, 40)
    assert ts.epr[0] == pytest.approx(epr(ref_state))


def test_power_spectrum_pure_tone():
    t = np.arange(2000) * 0.01
    spec = power_spectrum(np.cos(2 * math.pi * 3.3 * t), t)
    assert spec.peaks[0][0] == pytest.approx(3.3, abs=spec.resolution / 4)
    with pytest.raises(ValueError):
        power_spectrum(np.zeros(8), np.arange(8.0))


def test_three_state_truncation_tracks_exact(ref_state, ref_eig):
    t = np.linspace(0, 3, 301)
    exact = observable_series(ref_state, ref_eig, t)
    trunc = observable_series(truncate_to_top_k(ref_state, ref_eig, 3), ref_eig, t)
    assert np.max(np.abs(exact.condensate_fraction - trunc.condensate_fraction)) < 1e-3
    assert np.max(np.abs(exact.epr - trunc.epr)) < 0.05
