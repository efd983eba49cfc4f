"""Two-mode Bose-Hubbard model: parameters, Fock basis, Hamiltonian, observables.

Conventions used throughout the package:

* hbar = 1, so J, U and all energies are rates in 1/s.
* Fock index ``n`` counts the atoms in well 1; basis state ``n`` is |n, N-n>.
* The relative phase lives in [0, 2*pi).

Most functions here have a vectorised twin prefixed with an underscore that
acts on a 2-D array of amplitudes (one state per row). The scans and the
trajectory code use those directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import EmptySystemError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DimerParams:
    """Atom number ``n_atoms``, tunneling rate ``tunneling`` (J), interaction ``interaction`` (U)."""

    n_atoms: int
    tunneling: float
    interaction: float

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        # J = 0 is allowed: the exactly solvable limit is used by the revival
        # and perturbation code.
        if not self.tunneling >= 0:
            raise ValueError(f"tunneling must be >= 0, got {self.tunneling!r}")
        if not self.interaction >= 0:
            raise ValueError(f"interaction must be >= 0, got {self.interaction!r}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        object.__setattr__(self, "tunneling", float(self.tunneling))
        object.__setattr__(self, "interaction", float(self.interaction))

    @property
    def lam(self) -> float:
        """Dimensionless interaction strength U(N-1)/(2J)."""
        num = self.interaction * (self.n_atoms - 1)
        if self.tunneling == 0:
            return math.inf if num > 0 else math.nan
        return num / (2.0 * self.tunneling)

    @classmethod
    def from_lambda(cls, n_atoms: int, tunneling: float, lam: float) -> "DimerParams":
        if n_atoms < 2:
            raise ValueError("lambda does not determine U for a single atom")
        return cls(n_atoms, tunneling, 2.0 * tunneling * lam / (n_atoms - 1))

    def with_atoms(self, n_atoms: int) -> "DimerParams":
        return DimerParams(n_atoms, self.tunneling, self.interaction)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Fock-basis amplitudes; entry n multiplies |n, N-n>."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("amplitudes must be a non-empty 1-D array")
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_atoms(self) -> int:
        return self.amplitudes.size - 1

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / math.sqrt(self.norm_sq))

    @classmethod
    def fock(cls, n_atoms: int, n: int) -> "StateVector":
        a = np.zeros(n_atoms + 1, dtype=complex)
        a[n] = 1.0
        return cls(a)


@dataclass(frozen=True)
class PhasePoint:
    """Population imbalance ``z`` and relative phase ``phi``.

    ``phi`` is reduced into [0, 2*pi). ``phi=None`` marks an undefined phase
    (no inter-well coherence).
    """

    z: float
    phi: float | None = 0.0

    def __post_init__(self):
        z = float(self.z)
        if not -1.0 <= z <= 1.0:
            raise ValueError(f"z must lie in [-1, 1], got {z}")
        object.__setattr__(self, "z", z)
        if self.phi is not None:
            object.__setattr__(self, "phi", float(self.phi) % TWO_PI)


@dataclass(frozen=True)
class SingleParticleDensityMatrix:
    """Moments rho_ij = <a_i^dag a_j>; ``rho21`` is the conjugate of ``rho12``."""

    rho11: float
    rho22: float
    rho12: complex

    @property
    def rho21(self) -> complex:
        return complex(self.rho12).conjugate()

    @property
    def atom_count(self) -> float:
        return self.rho11 + self.rho22

    def matrix(self) -> np.ndarray:
        return np.array([[self.rho11, self.rho12], [self.rho21, self.rho22]], dtype=complex)


def hopping_elements(n_atoms: int) -> np.ndarray:
    """sqrt((n+1)(N-n)) for n = 0..N-1, the <n+1| a1^dag a2 |n> matrix elements."""
    n = np.arange(n_atoms)
    return np.sqrt((n + 1.0) * (n_atoms - n))


def interaction_diagonal(n_atoms: int, interaction: float) -> np.ndarray:
    n = np.arange(n_atoms + 1, dtype=float)
    m = n_atoms - n
    return 0.5 * interaction * (n * (n - 1) + m * (m - 1))


def hamiltonian_bands(params: DimerParams) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and first off-diagonal of the tridiagonal Hamiltonian."""
    diag = interaction_diagonal(params.n_atoms, params.interaction)
    off = -params.tunneling * hopping_elements(params.n_atoms)
    return diag, off


def build_hamiltonian(params: DimerParams) -> np.ndarray:
    """Dense (N+1)x(N+1) real symmetric Hamiltonian in the Fock basis."""
    diag, off = hamiltonian_bands(params)
    h = np.diag(diag)
    h += np.diag(off, 1)
    h += np.diag(off, -1)
    return h


def _coherent_amplitudes(n_atoms: int, z, phi) -> np.ndarray:
    """Rows of normalised coherent-state amplitudes for arrays ``z``, ``phi``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    z, phi = np.broadcast_arrays(z, phi)
    n = np.arange(n_atoms + 1, dtype=float)
    m = n_atoms - n
    log_binom = gammaln(n_atoms + 1) - gammaln(n + 1) - gammaln(m + 1)
    p1 = (1.0 + z[:, None]) / 2.0
    p2 = (1.0 - z[:, None]) / 2.0
    # xlogy keeps 0*log(0) = 0 at the poles z = +-1
    log_mag = 0.5 * (log_binom + xlogy(n, p1) + xlogy(m, p2))
    return np.exp(log_mag) * np.exp(1j * phi[:, None] * m)


def coherent_state(params: DimerParams | int, point: PhasePoint) -> StateVector:
    """Atomic coherent state |z, phi> with binomial normalisation."""
    n_atoms = params if isinstance(params, int) else params.n_atoms
    amps = _coherent_amplitudes(n_atoms, point.z, point.phi or 0.0)[0]
    return StateVector(amps / np.linalg.norm(amps))


def _moments(amps: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(rho11, rho22, rho12, <n1 n2>) for each row of ``amps``; rows need not be normalised."""
    amps = np.atleast_2d(amps)
    n_atoms = amps.shape[1] - 1
    n = np.arange(n_atoms + 1, dtype=float)
    prob = amps.real**2 + amps.imag**2
    rho11 = prob @ n
    rho22 = prob @ (n_atoms - n)
    n1n2 = prob @ (n * (n_atoms - n))
    rho12 = (np.conj(amps[:, 1:]) * amps[:, :-1]) @ hopping_elements(n_atoms)
    return rho11, rho22, rho12, n1n2


def spdm(state: StateVector) -> SingleParticleDensityMatrix:
    r11, r22, r12, _ = _moments(state.amplitudes)
    return SingleParticleDensityMatrix(float(r11[0]), float(r22[0]), complex(r12[0]))


def _condensate_fraction(rho11, rho22, rho12, atom_count):
    atom_count = np.asarray(atom_count, dtype=float)
    if np.any(atom_count <= 0):
        raise EmptySystemError("condensate fraction is undefined without atoms")
    disc = np.sqrt((rho11 - rho22) ** 2 + 4.0 * np.abs(rho12) ** 2)
    return (rho11 + rho22 + disc) / (2.0 * atom_count)


def condensate_fraction(rho: SingleParticleDensityMatrix, atom_count: float | None = None) -> float:
    """Largest eigenvalue of the single-particle density matrix over the atom number."""
    if atom_count is None:
        atom_count = rho.atom_count
    return float(_condensate_fraction(rho.rho11, rho.rho22, rho.rho12, atom_count))


def epr(state: StateVector) -> float:
    """|<a1^dag a2>|^2 - <n1 n2>; positive values certify EPR entanglement."""
    _, _, r12, n1n2 = _moments(state.amplitudes)
    return float(abs(r12[0]) ** 2 - n1n2[0])


PHASE_UNDEFINED_BELOW = 1e-12


def imbalance_and_phase(rho: SingleParticleDensityMatrix) -> PhasePoint:
    total = rho.atom_count
    if total <= 0:
        raise EmptySystemError("imbalance is undefined without atoms")
    z = (rho.rho11 - rho.rho22) / total
    z = min(1.0, max(-1.0, z))
    if abs(rho.rho12) < PHASE_UNDEFINED_BELOW:
        return PhasePoint(z, None)
    return PhasePoint(z, float(np.angle(rho.rho12)))


def _observables(amps: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised observables of normalised rows; used to fill time series."""
    r11, r22, r12, n1n2 = _moments(amps)
    total = r11 + r22
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(total > 0, (r11 - r22) / np.where(total > 0, total, 1.0), np.nan)
        c = np.where(
            total > 0,
            (total + np.sqrt((r11 - r22) ** 2 + 4.0 * np.abs(r12) ** 2)) / (2.0 * np.where(total > 0, total, 1.0)),
            np.nan,
        )
    phi = np.where(np.abs(r12) < PHASE_UNDEFINED_BELOW, np.nan, np.mod(np.angle(r12), TWO_PI))
    return {
        "z": z,
        "phi": phi,
        "condensate_fraction": c,
        "epr": np.abs(r12) ** 2 - n1n2,
        "atom_count": total,
        "rho11": r11,
        "rho22": r22,
        "rho12": r12,
        "n1n2": n1n2,
    }
