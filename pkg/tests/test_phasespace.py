import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhdimer.dissipation import JumpConfig, LossSchedule
from bhdimer.model import DimerParams, PhasePoint, StateVector, coherent_state
from bhdimer.phasespace import (
    PhaseGrid,
    entangled_fraction,
    husimi_field,
    husimi_integral,
    lambert_project,
    sample_grid,
    scan_observable,
    spherical_cap_map_area,
)

from conftest import random_state


def test_scan_matches_single_evolution(ref_params, ref_eig):
    from bhdimer.dynamics import observable_series

    grid = PhaseGrid.uniform(11, 8)
    f = scan_observable(ref_params, grid, 0.4, "epr", eig=ref_eig, workers=2)
    s = coherent_state(ref_params, PhasePoint(grid.z[3], grid.phi[5]))
    ts = observable_series(s, ref_eig, [0.4])
    assert f.values[3, 5] == pytest.approx(ts.epr[0], rel=1e-10, abs=1e-9)
    with pytest.raises(ValueError):
        scan_observable(ref_params, grid, 0.4, "energy")


def test_scan_relabel_symmetry(ref_params, ref_eig):
    # (z, phi) -> (-z, -phi) swaps the wells; c and EPR are invariant
    grid = PhaseGrid.uniform(21, 20)
    f = scan_observable(ref_params, grid, 0.7, "epr", eig=ref_eig)
    jp = (-np.arange(20)) % 20
    assert np.allclose(f.values, f.values[::-1][:, jp], atol=1e-8)


def test_sample_grid_shape():
    g = sample_grid(500)
    assert g.shape == (20, 25)
    assert np.all(np.abs(g.z) < 1)


@given(n=st.integers(1, 12), seed=st.integers(0, 2**20))
def test_husimi_normalisation(n, seed):
    s = StateVector(random_state(n, np.random.default_rng(seed)))
    grid = PhaseGrid.uniform(120, 2 * n + 2, include_poles=False)
    # the phi sum is exact for 2N+2 nodes; the z midpoint rule converges as 1/n_z^2
    assert husimi_integral(husimi_field(s, grid), n) == pytest.approx(1.0, abs=2e-3)


def test_husimi_peaks_at_coherent_point():
    s = coherent_state(30, PhasePoint(0.4, 2.0))
    h = husimi_field(s, PhaseGrid.uniform(81, 64))
    i, j = np.unravel_index(np.argmax(h.values), h.values.shape)
    assert h.grid.z[i] == pytest.approx(0.4, abs=0.03)
    assert h.grid.phi[j] == pytest.approx(2.0, abs=0.1)
    assert h.values.max() == pytest.approx(1.0, abs=0.01)


@given(z=st.floats(-1, 1), phi=st.floats(0, 2 * math.pi, exclude_max=True))
def test_lambert_is_identity_on_coordinates(z, phi):
    x, y = lambert_project(PhasePoint(z, phi))
    assert y == z and x == pytest.approx(PhasePoint(z, phi).phi)


@pytest.mark.parametrize("axis", [(0.0, 0.0), (0.7, 1.0), (-0.95, 4.0)])
def test_equal_area(axis):
    exact, mapped = spherical_cap_map_area(*axis, half_angle=0.6, n_samples=200_000, seed=1)
    # binomial standard error of the hit fraction, times 4 pi
    p = exact / (4 * math.pi)
    se = 4 * math.pi * math.sqrt(p * (1 - p) / 200_000)
    assert abs(mapped - exact) < 4 * se


def test_entangled_fraction_unitary_and_trivial_loss(ref_params):
    grid = sample_grid(120)
    t = np.linspace(0, 0.2, 5)
    a = entangled_fraction(ref_params, grid, t)
    b = entangled_fraction(ref_params, grid, t, schedule=LossSchedule.none())
    assert np.array_equal(a.fraction, b.fraction)
    assert a.fraction[0] == 1.0  # every coherent state with |z| < 1 has EPR = N(1-z^2)/4 > 0
    with pytest.raises(ValueError):
        entangled_fraction(ref_params, PhaseGrid.uniform(5, 5), t)


def test_entangled_fraction_with_loss_runs():
    p = DimerParams.from_lambda(8, 10.0, 5.0)
    grid = sample_grid(100)
    t = np.linspace(0, 0.4, 5)
    sched = LossSchedule.single(2, 20.0, 0.1, 0.2)
    fs = entangled_fraction(p, grid, t, sched, JumpConfig(method="waiting", n_trajectories=4), workers=2)
    ref = entangled_fraction(p, grid, t)
    assert np.array_equal(fs.fraction[:2], ref.fraction[:2])
    assert np.all((fs.fraction >= 0) & (fs.fraction <= 1))
