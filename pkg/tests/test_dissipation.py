import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhdimer.dissipation import (
    JumpConfig,
    LossSchedule,
    PropagatorCache,
    _block_offsets,
    apply_jump,
    effective_hamiltonian,
    ensemble_moments,
    jump_probabilities,
    lindblad_superoperator,
    master_equation_oracle,
    nonunitary_step,
    run_ensemble,
    run_trajectory,
)
from bhdimer.dynamics import observable_series
from bhdimer.errors import InvalidJumpError, StepSizeError
from bhdimer.model import DimerParams, PhasePoint, StateVector, coherent_state, epr
from bhdimer.spectra import diagonalize

from conftest import random_state


def test_schedule_merge_and_half_open():
    s = LossSchedule.from_specs([(2, 3.0, 0.0, 1.0), (1, 1.0, 0.5, 2.0), (2, 2.0, 0.5, 1.0)])
    assert s.rates_at(0.25) == (0.0, 3.0)
    assert s.rates_at(0.5) == (1.0, 5.0)
    assert s.rates_at(1.0) == (1.0, 0.0)
    assert s.rates_at(2.0) == (0.0, 0.0)
    assert s.gamma_max == 5.0
    assert s.first_loss_time == 0.0
    assert LossSchedule.none().is_zero
    with pytest.raises(ValueError):
        LossSchedule.single(3, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        LossSchedule.single(1, 1.0, 1.0, 1.0)


def test_config_rejects_coarse_step():
    p = DimerParams(40, 10.0, 1.0)
    s = LossSchedule.single(2, 50.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        JumpConfig(dt=1e-3).resolve_dt(p, s)
    assert JumpConfig().resolve_dt(p, s) == pytest.approx(0.01 / 2000)


@given(n=st.integers(1, 15), seed=st.integers(0, 2**20), g1=st.floats(0, 5), g2=st.floats(0, 5))
def test_jump_probabilities_match_moments(n, seed, g1, g2):
    psi = random_state(n, np.random.default_rng(seed))
    s = StateVector(psi)
    dt = 1e-4
    p1, p2 = jump_probabilities(s, g1, g2, dt)
    k = np.arange(n + 1)
    prob = np.abs(psi) ** 2
    assert p1 == pytest.approx(dt * g1 * prob @ k, abs=1e-15)
    assert p2 == pytest.approx(dt * g2 * prob @ (n - k), abs=1e-15)


def test_step_probability_cap():
    s = coherent_state(40, PhasePoint(0.0, 0.0))
    with pytest.raises(StepSizeError):
        jump_probabilities(s, 100.0, 100.0, 1e-3)


@given(n=st.integers(1, 12), seed=st.integers(0, 2**20), well=st.sampled_from([1, 2]))
def test_jump_removes_one_atom(n, seed, well):
    psi = random_state(n, np.random.default_rng(seed))
    out = apply_jump(StateVector(psi), well)
    assert out.n_atoms == n - 1
    assert out.norm_sq == pytest.approx(1.0)
    # a1 |k> = sqrt(k) |k-1>
    k = np.arange(n + 1)
    ref = np.sqrt(k[1:]) * psi[1:] if well == 1 else np.sqrt(n - k[:-1]) * psi[:-1]
    assert np.allclose(out.amplitudes, ref / np.linalg.norm(ref))


def test_jump_from_empty_well():
    with pytest.raises(InvalidJumpError):
        apply_jump(StateVector.fock(3, 0), 1)
    with pytest.raises(InvalidJumpError):
        apply_jump(StateVector.fock(3, 3), 2)


@given(n=st.integers(1, 10), seed=st.integers(0, 2**20))
def test_nonunitary_step_never_grows_norm(n, seed):
    s = StateVector(random_state(n, np.random.default_rng(seed)))
    out = nonunitary_step(s, DimerParams(n, 2.0, 1.0), 0.7, 1.3, 0.05)
    assert out.norm_sq <= 1.0 + 1e-12
    h = effective_hamiltonian(n, 2.0, 1.0, 0.0, 0.0)
    assert np.allclose(h, h.conj().T)


def test_propagator_cache_reuses():
    cache = PropagatorCache(DimerParams(6, 1.0, 1.0))
    a = cache.get(4, 0.0, 1.0, 0.01)
    assert cache.get(4, 0.0, 1.0, 0.01) is a
    assert len(cache) == 1


@given(n=st.integers(1, 6), seed=st.integers(0, 2**20), g1=st.floats(0, 3), g2=st.floats(0, 3))
def test_superoperator_preserves_trace(n, seed, g1, g2):
    rng = np.random.default_rng(seed)
    off = _block_offsets(n)
    sup = lindblad_superoperator(DimerParams(n, 1.5, 0.7), g1, g2)
    vec = np.zeros(off[-1], complex)
    for m in range(n + 1):
        a = random_state(m, rng)
        vec[off[m] : off[m + 1]] = np.outer(a, a.conj()).ravel() / (n + 1)
    d = sup @ vec
    tr = sum(np.trace(d[off[m] : off[m + 1]].reshape(m + 1, m + 1)) for m in range(n + 1))
    assert abs(tr) < 1e-10


def test_oracle_uniform_decay_and_unitary_limit():
    p = DimerParams(5, 3.0, 2.0)
    s0 = coherent_state(p, PhasePoint(0.2, 0.4))
    t = np.linspace(0, 1, 11)
    dec = master_equation_oracle(StateVector(s0.amplitudes), DimerParams(5, 0.0, 0.0), LossSchedule.from_specs([(1, 1.5, 0.0, 2.0), (2, 1.5, 0.0, 2.0)]), t)
    assert np.max(np.abs(dec.atoms - 5 * np.exp(-1.5 * t))) < 1e-9
    ref = observable_series(s0, diagonalize(p), t)
    uni = master_equation_oracle(s0, p, LossSchedule.none(), t)
    assert np.max(np.abs(uni.epr - ref.epr)) < 1e-8
    assert np.max(np.abs(uni.stderr["trace"] - 1)) < 1e-10


def test_no_loss_ensemble_is_unitary():
    p = DimerParams(8, 5.0, 3.0)
    s0 = coherent_state(p, PhasePoint(0.5, 2.0))
    t = np.linspace(0, 1, 6)
    ens = run_ensemble(s0, p, LossSchedule.none(), JumpConfig(n_trajectories=3), t)
    ref = observable_series(s0, diagonalize(p), t)
    assert np.allclose(ens.epr, ref.epr, atol=1e-10)
    assert np.allclose(ens.condensate_fraction, ref.condensate_fraction, atol=1e-12)


@pytest.mark.parametrize("method", ["step", "waiting"])
def test_determinism_and_batching(method):
    p = DimerParams(6, 10.0, 20.0)
    sched = LossSchedule.single(2, 4.0, 0.1, 0.4)
    states = np.vstack([coherent_state(p, PhasePoint(z, 1.0)).amplitudes for z in (-0.5, 0.0, 0.5)])
    t = np.linspace(0, 0.5, 6)
    cfg = JumpConfig(rng_seed=7, n_trajectories=20, method=method)
    whole, _ = ensemble_moments(states, p, sched, cfg, t)
    again, _ = ensemble_moments(states, p, sched, JumpConfig(rng_seed=7, n_trajectories=20, method=method, chunk_size=13), t)
    tail, _ = ensemble_moments(states[2:], p, sched, cfg, t, group_offset=2)
    # same draws; only the summation order of the moment sums differs
    assert np.allclose(whole, again, rtol=1e-12, atol=1e-12)
    assert np.allclose(whole[2:], tail, rtol=1e-12, atol=1e-12)
    assert np.array_equal(whole[..., 5], again[..., 5])


@pytest.mark.parametrize("method", ["step", "waiting"])
def test_single_trajectory_atom_count(method):
    p = DimerParams(10, 5.0, 2.0)
    s0 = coherent_state(p, PhasePoint(0.0, 0.0))
    t = np.linspace(0, 1, 21)
    ts = run_trajectory(s0, p, LossSchedule.single(1, 3.0, 0.2, 0.8), JumpConfig(rng_seed=3, method=method), t)
    assert np.allclose(ts.atom_count, np.round(ts.atom_count))
    assert np.all(np.diff(ts.atom_count) <= 0)
    assert np.all(ts.atom_count[t <= 0.2] == 10)
    assert np.all(ts.condensate_fraction >= 0.5 - 1e-12)


def test_methods_agree_with_oracle_small():
    p = DimerParams(4, 2.0, 3.0)
    s0 = coherent_state(p, PhasePoint(0.3, 0.5))
    sched = LossSchedule.single(2, 3.0, 0.0, 1.0)
    t = np.linspace(0, 1, 6)
    ref = master_equation_oracle(s0, p, sched, t)
    for method in ("step", "waiting"):
        ens = run_ensemble(s0, p, sched, JumpConfig(rng_seed=11, n_trajectories=2000, method=method), t)
        err = np.maximum(ens.stderr["n2"], 1e-12)
        assert np.max(np.abs(ens.n2 - ref.n2)[1:] / err[1:]) < 4
