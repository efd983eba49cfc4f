import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhdimer.errors import OutOfRegimeError
from bhdimer.fields import PhaseGrid
from bhdimer.model import DimerParams, PhasePoint, build_hamiltonian, coherent_state
from bhdimer.spectra import (
    beats_near_fixed_point,
    diagonalize,
    energy_levels,
    project_top_k,
    projection_norm_field,
)


@given(n=st.integers(1, 30), j=st.floats(0.5, 20), lam=st.floats(0.0, 10))
def test_eigenpairs_against_dense_solver(n, j, lam):
    p = DimerParams(n, j, 2 * j * lam / max(n - 1, 1))
    eig = diagonalize(p)
    h = build_hamiltonian(p)
    assert np.all(np.diff(eig.energies) <= 1e-9 * max(1, abs(eig.energies).max()))
    assert np.allclose(np.sort(eig.energies), np.linalg.eigvalsh(h), atol=1e-8 * max(1, abs(eig.energies).max()))
    assert np.allclose(eig.vectors.T @ eig.vectors, np.eye(n + 1), atol=1e-10)
    resid = h @ eig.vectors - eig.vectors * eig.energies
    assert np.abs(resid).max() < 1e-7 * max(1, abs(eig.energies).max())


def test_single_atom_energies():
    eig = diagonalize(DimerParams(1, 4.0, 3.0))
    assert np.allclose(eig.energies, [4.0, -4.0])


def test_uncoupled_energies():
    n, u = 7, 2.0
    eig = diagonalize(DimerParams(n, 0.0, u))
    k = np.arange(n + 1)
    expect = np.sort(0.5 * u * (k * (k - 1) + (n - k) * (n - k - 1)))[::-1]
    assert np.allclose(eig.energies, expect)


def test_top_levels_are_doublets(ref_eig):
    e = ref_eig.energies
    assert abs(e[0] - e[1]) < 1e-6
    lv = energy_levels(ref_eig)
    assert lv[:3] == pytest.approx([2040.0, 1942.3, 1850.0], abs=0.1)


def test_projection_weights_sum(ref_state, ref_eig):
    coeffs, norm_sq = project_top_k(ref_state, ref_eig, ref_eig.energies.size)
    assert norm_sq == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(np.abs(coeffs)) <= 1e-15)
    with pytest.raises(ValueError):
        project_top_k(ref_state, ref_eig, 0)


def test_beats_need_three_levels():
    with pytest.raises(OutOfRegimeError):
        beats_near_fixed_point(diagonalize(DimerParams(1, 1.0, 1.0)))


def test_beat_identities(ref_eig):
    b = beats_near_fixed_point(ref_eig)
    assert b.f_sum == pytest.approx(b.f_fast + b.f_mid, rel=1e-12)
    assert b.f_slow == pytest.approx(b.f_fast - b.f_mid, rel=1e-12)


def test_projection_field_bounds_and_fixed_points(ref_params, ref_eig):
    grid = PhaseGrid.uniform(21, 24)
    f = projection_norm_field(ref_params, grid, k=3, eig=ref_eig)
    assert f.values.min() >= 0 and f.values.max() <= 1 + 1e-12
    # near every fixed point three eigenstates carry nearly all the weight
    assert f.nearest(1.0, math.pi) > 0.98
    near = coherent_state(ref_params, PhasePoint(0.98, math.pi))
    assert project_top_k(near, ref_eig, 3)[1] > 0.999
    assert f.nearest(0.0, 0.0) > 0.9
    full = projection_norm_field(ref_params, grid, k=41, eig=ref_eig)
    assert np.allclose(full.values, 1.0)


def test_relabel_symmetry_of_projection(ref_params, ref_eig):
    a = coherent_state(ref_params, PhasePoint(0.6, 2.0))
    b = coherent_state(ref_params, PhasePoint(-0.6, 2 * math.pi - 2.0))
    na = project_top_k(a, ref_eig, 3)[1]
    nb = project_top_k(b, ref_eig, 3)[1]
    assert na == pytest.approx(nb, abs=1e-8)
