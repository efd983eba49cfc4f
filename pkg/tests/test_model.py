import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhdimer.errors import EmptySystemError
from bhdimer.model import (
    DimerParams,
    PhasePoint,
    SingleParticleDensityMatrix,
    StateVector,
    build_hamiltonian,
    coherent_state,
    condensate_fraction,
    epr,
    imbalance_and_phase,
    spdm,
)

atoms = st.integers(1, 40)
zs = st.floats(-1.0, 1.0)
phis = st.floats(0.0, 2 * math.pi, exclude_max=True)


def test_lambda_recomputed():
    p = DimerParams(40, 10.0, 100 / 39)
    assert p.lam == pytest.approx(5.0, rel=1e-14)
    assert DimerParams.from_lambda(40, 10.0, 5.0).interaction == pytest.approx(100 / 39, rel=1e-14)


@pytest.mark.parametrize("bad", [dict(n_atoms=0, tunneling=1, interaction=1),
                                 dict(n_atoms=2, tunneling=-1, interaction=1),
                                 dict(n_atoms=2, tunneling=1, interaction=-0.1),
                                 dict(n_atoms=2.5, tunneling=1, interaction=1)])
def test_params_rejected(bad):
    with pytest.raises(ValueError):
        DimerParams(**bad)


def test_hamiltonian_single_atom():
    h = build_hamiltonian(DimerParams(1, 3.0, 7.0))
    assert np.allclose(h, [[0, -3], [-3, 0]])
    assert np.allclose(np.linalg.eigvalsh(h), [-3, 3])


def test_hamiltonian_uncoupled_diagonal():
    n, u = 6, 1.7
    h = build_hamiltonian(DimerParams(n, 0.0, u))
    k = np.arange(n + 1)
    expect = 0.5 * u * (k * (k - 1) + (n - k) * (n - k - 1))
    assert np.allclose(h, np.diag(expect))


@given(n=atoms, j=st.floats(0.1, 50), u=st.floats(0, 20))
def test_hamiltonian_symmetric_tridiagonal(n, j, u):
    h = build_hamiltonian(DimerParams(n, j, u))
    assert np.allclose(h, h.T)
    assert np.allclose(np.triu(h, 2), 0)
    # relabelling the wells (n -> N - n) is a symmetry
    assert np.allclose(h[::-1, ::-1], h)


@given(n=atoms, z=zs, phi=phis)
def test_coherent_state_norm_and_moments(n, z, phi):
    s = coherent_state(n, PhasePoint(z, phi))
    assert s.norm_sq == pytest.approx(1.0, abs=1e-12)
    rho = spdm(s)
    assert rho.rho11 == pytest.approx(n * (1 + z) / 2, abs=1e-9)
    assert rho.atom_count == pytest.approx(n, abs=1e-10)
    assert condensate_fraction(rho) == pytest.approx(1.0, abs=1e-9)
    assert epr(s) == pytest.approx(n * (1 - z * z) / 4, abs=1e-8)


@given(n=atoms, z=st.floats(-0.99, 0.99), phi=phis)
def test_imbalance_and_phase_roundtrip(n, z, phi):
    pt = imbalance_and_phase(spdm(coherent_state(n, PhasePoint(z, phi))))
    assert pt.z == pytest.approx(z, abs=1e-9)
    dphi = (pt.phi - phi + math.pi) % (2 * math.pi) - math.pi
    assert abs(dphi) < 1e-7


def test_fock_state_has_no_phase():
    rho = spdm(StateVector.fock(4, 1))
    assert imbalance_and_phase(rho).phi is None
    assert rho.rho12 == 0


def test_condensate_fraction_bounds_on_random_states():
    rng = np.random.default_rng(3)
    for n in range(1, 15):
        for _ in range(20):
            a = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
            s = StateVector(a / np.linalg.norm(a))
            rho = spdm(s)
            c = condensate_fraction(rho)
            assert 0.5 - 1e-12 <= c <= 1 + 1e-12
            assert epr(s) <= n * n / 4 + 1e-9
            ev = np.linalg.eigvalsh(rho.matrix())
            assert ev.min() > -1e-10


def test_empty_system_raises():
    with pytest.raises(EmptySystemError):
        condensate_fraction(SingleParticleDensityMatrix(0.0, 0.0, 0j))


def test_phase_point_reduction():
    assert PhasePoint(0.1, 2 * math.pi + 0.5).phi == pytest.approx(0.5)
    with pytest.raises(ValueError):
        PhasePoint(1.5, 0.0)


def test_coherent_pole_is_fock():
    s = coherent_state(5, PhasePoint(1.0, 0.3))
    assert abs(s.amplitudes[5]) == pytest.approx(1.0)
    assert epr(s) == pytest.approx(0.0, abs=1e-14)
