import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhdimer.errors import OutOfRegimeError, SingularityError
from bhdimer.meanfield import (
    MeanFieldState,
    eom,
    f_mf,
    fixed_points,
    h_mf,
    integrate_meanfield,
    jacobian,
    self_trapping_z,
)
from bhdimer.model import DimerParams


def test_reference_frequency():
    assert f_mf(DimerParams(40, 10.0, 100 / 39)) == pytest.approx(10 * math.sqrt(24) / math.pi, rel=1e-12)


@given(lam=st.floats(0.0, 20.0))
def test_fixed_points_are_stationary(lam):
    p = DimerParams.from_lambda(40, 3.0, lam)
    for fp in fixed_points(lam):
        dz, dphi = eom(MeanFieldState(fp.z, fp.phi), p)
        assert abs(dz) < 1e-9 and abs(dphi) < 1e-9
    expect = 4 if lam > 1 else 2
    assert len(fixed_points(lam)) == expect


@given(lam=st.floats(1.05, 20.0))
def test_linearised_frequency_matches_jacobian(lam):
    p = DimerParams.from_lambda(40, 10.0, lam)
    jac = jacobian(MeanFieldState(self_trapping_z(lam), math.pi), p)
    omega = math.sqrt(max(0.0, -np.linalg.det(jac) * -1))
    assert omega / (2 * math.pi) == pytest.approx(f_mf(p), rel=1e-5)


def test_below_bifurcation_raises():
    with pytest.raises(OutOfRegimeError):
        self_trapping_z(0.5)
    with pytest.raises(OutOfRegimeError):
        f_mf(DimerParams.from_lambda(40, 10.0, 0.5))


def test_pole_is_singular():
    with pytest.raises(SingularityError):
        eom(MeanFieldState(1.0, 0.0), DimerParams(10, 1.0, 1.0))


@given(z=st.floats(-0.9, 0.9), phi=st.floats(0, 2 * math.pi), lam=st.floats(0.0, 8.0))
def test_energy_conserved(z, phi, lam):
    p = DimerParams.from_lambda(40, 2.0, lam)
    try:
        traj = integrate_meanfield(MeanFieldState(z, phi), p, np.linspace(0, 1, 11))
    except SingularityError:
        return
    h = [h_mf(MeanFieldState(a, b), lam) for a, b in zip(traj.z, traj.phi)]
    assert np.ptp(h) < 1e-6


def test_small_oscillation_period():
    p = DimerParams(40, 10.0, 100 / 39)
    zs = self_trapping_z(p.lam)
    t = np.linspace(0, 2, 4001)
    traj = integrate_meanfield(MeanFieldState(zs - 1e-4, math.pi), p, t)
    dz = traj.z - zs
    ups = np.nonzero((dz[:-1] < 0) & (dz[1:] >= 0))[0]
    period = np.mean(np.diff(t[ups]))
    assert 1 / period == pytest.approx(f_mf(p), rel=2e-3)
