"""Exact revivals of the uncoupled (J = 0) dimer.

At J = 0 the Fock states are eigenstates with E_n = U h_n and
h_n = n^2 - N n + N(N-1)/2, an integer. After tau = pi/U each amplitude picks
up exp(-i pi h_n) = (-1)^{h_n}, and the parity of h_n depends only on N mod 4
and on n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRegimeError
from .model import StateVector, _observables, interaction_diagonal

PHASE_ACTIONS = {
    1: "identity",
    2: "-(-1)^n",
    3: "global -1",
    0: "(-1)^n",
}


@dataclass(frozen=True)
class RevivalPattern:
    tau: float
    n_mod4_case: int
    phase_action: str

    def signs(self, n_atoms: int) -> np.ndarray:
        """Per-Fock-state multiplier applied to the amplitudes at t = tau."""
        n = np.arange(n_atoms + 1)
        alt = np.where(n % 2 == 0, 1.0, -1.0)
        return {
            "identity": np.ones(n_atoms + 1),
            "-(-1)^n": -alt,
            "global -1": -np.ones(n_atoms + 1),
            "(-1)^n": alt,
        }[self.phase_action]


def revival_period(interaction: float) -> float:
    if not interaction > 0:
        raise OutOfRegimeError("no revival without interactions (U = 0)")
    return math.pi / interaction


def revival_phase_pattern(n_atoms: int, interaction: float = math.pi) -> RevivalPattern:
    if n_atoms < 1:
        raise ValueError("need at least one atom")
    case = n_atoms % 4
    return RevivalPattern(revival_period(interaction), case, PHASE_ACTIONS[case])


def _evolve_uncoupled(amps: np.ndarray, interaction: float, t: float) -> np.ndarray:
    n_atoms = amps.size - 1
    return amps * np.exp(-1j * interaction_diagonal(n_atoms, interaction) * t)


def verify_wavefunction_revival(n_atoms: int, interaction: float, state0: StateVector) -> float:
    """max_n |psi(tau)_n - predicted_n| with the J = 0 evolution done exactly."""
    if state0.n_atoms != n_atoms:
        raise ValueError("state has the wrong atom number")
    pattern = revival_phase_pattern(n_atoms, interaction)
    psi0 = state0.amplitudes
    psi_tau = _evolve_uncoupled(psi0, interaction, pattern.tau)
    return float(np.max(np.abs(psi_tau - pattern.signs(n_atoms) * psi0)))


def verify_observable_revival(n_atoms: int, interaction: float, state0: StateVector) -> tuple[float, float]:
    """(|c(tau) - c(0)|, |EPR(tau) - EPR(0)|) at J = 0."""
    if state0.n_atoms != n_atoms:
        raise ValueError("state has the wrong atom number")
    tau = revival_period(interaction)
    rows = np.vstack([state0.amplitudes, _evolve_uncoupled(state0.amplitudes, interaction, tau)])
    obs = _observables(rows)
    c, e = obs["condensate_fraction"], obs["epr"]
    return float(abs(c[1] - c[0])), float(abs(e[1] - e[0]))


def coherence_at_revival(n_atoms: int, interaction: float, state0: StateVector) -> tuple[complex, complex]:
    """rho12 at t = 0 and t = tau; for even N the second is minus the first."""
    tau = revival_period(interaction)
    rows = np.vstack([state0.amplitudes, _evolve_uncoupled(state0.amplitudes, interaction, tau)])
    r12 = _observables(rows)["rho12"]
    return complex(r12[0]), complex(r12[1])


def revival_markers(t_final: float, period: float) -> np.ndarray:
    """Multiples k*period (k >= 1) inside [0, t_final]."""
    if period <= 0:
        raise ValueError("period must be positive")
    k = np.arange(1, int(math.floor(t_final / period + 1e-12)) + 1)
    return k * period
