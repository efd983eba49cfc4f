"""Degenerate perturbation theory about the uncoupled (J = 0) limit.

Energies are rescaled by N U, so the unperturbed Hamiltonian is diagonal with
entries eps_k = [k(k-1) + (N-k)(N-k-1)] / (2N) and the hopping enters as
lam * V with lam = J / (N U) and V_{k,k+1} = -sqrt((k+1)(N-k)).
Level n is the degenerate pair of Fock states {n, N-n}; n = 0 is the top.

Indices are 0-based Fock indices everywhere in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRegimeError
from .model import hopping_elements, interaction_diagonal

DEGENERACY_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class PerturbationSetup:
    n_atoms: int
    lambda_small: float
    h0: np.ndarray
    v: np.ndarray
    level_index: int

    @property
    def partner(self) -> int:
        return self.n_atoms - self.level_index

    @property
    def subspace(self) -> list:
        return sorted({self.level_index, self.partner})


@dataclass(frozen=True, eq=False)
class WMatrix:
    order: int
    matrix: np.ndarray


@dataclass(frozen=True)
class OddOrderReport:
    n_atoms: int
    level: int
    skipped: bool
    w3_diag_max: float
    w3_block_offdiag: float
    v_odd: bool
    resolvent_even: bool
    second_order_even: bool
    w3_odd: bool
    fourth_order: float | None = None
    fourth_order_numeric: float | None = None

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        return (
            self.w3_diag_max <= 1e-12
            and self.v_odd
            and self.resolvent_even
            and self.second_order_even
            and self.w3_odd
        )


def unperturbed_energies(n_atoms: int, interaction: float) -> np.ndarray:
    """Fock-state energies at J = 0, in 1/s."""
    if n_atoms < 1:
        raise ValueError("need at least one atom")
    return interaction_diagonal(n_atoms, interaction)


def rescaled_h0(n_atoms: int) -> np.ndarray:
    return interaction_diagonal(n_atoms, 1.0) / n_atoms


def hopping_matrix(n_atoms: int) -> np.ndarray:
    off = -hopping_elements(n_atoms)
    return np.diag(off, 1) + np.diag(off, -1)


def make_setup(n_atoms: int, level: int, tunneling: float = 0.0, interaction: float = 1.0) -> PerturbationSetup:
    if not 0 <= level <= n_atoms // 2:
        raise OutOfRegimeError(f"level {level} does not exist for N = {n_atoms}")
    if n_atoms - 2 * level == 1:
        raise OutOfRegimeError(
            f"level {level} of N = {n_atoms}: the degenerate pair is coupled at first order"
        )
    lam = tunneling / (n_atoms * interaction) if interaction > 0 else math.inf
    return PerturbationSetup(n_atoms, lam, rescaled_h0(n_atoms), hopping_matrix(n_atoms), level)


def resolvent(setup: PerturbationSetup) -> np.ndarray:
    """Diagonal of L^{-1}: 1/(eps_k - eps_n), zero on the degenerate subspace."""
    d = setup.h0 - setup.h0[setup.level_index]
    out = np.zeros_like(d)
    mask = np.abs(d) > DEGENERACY_ATOL
    out[mask] = 1.0 / d[mask]
    return out


def build_w2(setup: PerturbationSetup) -> WMatrix:
    """Second-order matrix -V L^{-1} V from its closed-form entries.

    Nonzero only on the main and +-2 diagonals:
        W_kk      = -k(N+1-k) L_{k-1} - (k+1)(N-k) L_{k+1}
        W_{k,k+2} = -sqrt((k+1)(N-k)(k+2)(N-k-1)) L_{k+1}
    """
    n_atoms = setup.n_atoms
    res = resolvent(setup)
    k = np.arange(n_atoms + 1, dtype=float)
    w = np.zeros((n_atoms + 1, n_atoms + 1))
    diag = np.zeros(n_atoms + 1)
    diag[1:] -= k[1:] * (n_atoms + 1 - k[1:]) * res[:-1]
    diag[:-1] -= (k[:-1] + 1) * (n_atoms - k[:-1]) * res[1:]
    w[np.arange(n_atoms + 1), np.arange(n_atoms + 1)] = diag
    if n_atoms >= 2:
        kk = k[:-2]
        side = -np.sqrt((kk + 1) * (n_atoms - kk) * (kk + 2) * (n_atoms - kk - 1)) * res[1:-1]
        idx = np.arange(n_atoms - 1)
        w[idx, idx + 2] = side
        w[idx + 2, idx] = side
    return WMatrix(2, w)


def _check_regime(n_atoms: int, interaction: float):
    if n_atoms < 7:
        raise OutOfRegimeError(f"second-order formulas need N >= 7, got {n_atoms}")
    if interaction <= 0:
        raise OutOfRegimeError("expansion about J = 0 needs U > 0")


def second_order_levels(n_atoms: int, tunneling: float, interaction: float) -> np.ndarray:
    """Three highest levels to second order in J, in 1/s."""
    _check_regime(n_atoms, interaction)
    n = n_atoms
    e = rescaled_h0(n)
    lam2 = (tunneling / (n * interaction)) ** 2
    shifts = np.array(
        [
            -n / (e[1] - e[0]),
            -(n / (e[0] - e[1]) + 2 * (n - 1) / (e[2] - e[1])),
            -(2 * (n - 1) / (e[1] - e[2]) + 3 * (n - 2) / (e[3] - e[2])),
        ]
    )
    return n * interaction * (e[:3] + lam2 * shifts)


def perturbative_frequencies(n_atoms: int, tunneling: float, interaction: float) -> tuple[float, float]:
    """(f_fast, f_slow) in Hz with their Lambda^-2 corrections."""
    _check_regime(n_atoms, interaction)
    n = n_atoms
    inv_lam2 = (2.0 * tunneling / (interaction * (n - 1))) ** 2
    f_fast = interaction * (n - 1) / (2 * math.pi) * (1 - 0.5 * (n + 1) / (n - 3) * inv_lam2)
    f_slow = interaction / math.pi * (1 + 1.5 * (n - 1) * (n + 1) / ((n - 5) * (n - 3)) * inv_lam2)
    return f_fast, f_slow


def zeroth_order_frequencies(n_atoms: int, interaction: float) -> tuple[float, float]:
    return interaction * (n_atoms - 1) / (2 * math.pi), interaction / math.pi


def _offsets(shape) -> np.ndarray:
    i, j = np.indices(shape)
    return j - i


def is_odd_matrix(a: np.ndarray, atol: float = 0.0) -> bool:
    """Zero on every diagonal with even offset (the main diagonal included)."""
    even = _offsets(a.shape) % 2 == 0
    return bool(np.all(np.abs(a[even]) <= atol))


def is_even_matrix(a: np.ndarray, atol: float = 0.0) -> bool:
    odd = _offsets(a.shape) % 2 != 0
    return bool(np.all(np.abs(a[odd]) <= atol))


def w_matrices(setup: PerturbationSetup) -> dict:
    """Dense W_1..W_4; W_4 uses the level's own second-order shift."""
    v = setup.v
    lv = resolvent(setup)[:, None] * v
    w2 = -v @ lv
    w3 = v @ lv @ lv
    eps2 = w2[setup.level_index, setup.level_index]
    w4 = -v @ lv @ lv @ lv - eps2 * (v * resolvent(setup) ** 2) @ v
    return {1: WMatrix(1, v), 2: WMatrix(2, w2), 3: WMatrix(3, w3), 4: WMatrix(4, w4)}


def _numeric_fourth_order(n_atoms: int, level: int, eps2: float) -> float:
    """Fourth-order coefficient read off the exact spectrum at small coupling."""
    h0 = rescaled_h0(n_atoms)
    v = hopping_matrix(n_atoms)
    lam = 0.02 / n_atoms
    e = np.sort(np.linalg.eigvalsh(np.diag(h0) + lam * v))[::-1]
    exact = e[2 * level]
    return (exact - h0[level] - lam**2 * eps2) / lam**4


def verify_odd_order_vanishing(n_atoms: int, level: int, fourth_order: bool = False) -> OddOrderReport:
    """Dense check that third-order corrections vanish for the given level."""
    setup = make_setup(n_atoms, level)
    ws = w_matrices(setup)
    sub = setup.subspace
    w2, w3 = ws[2].matrix, ws[3].matrix
    block2 = w2[np.ix_(sub, sub)]
    skipped = len(sub) == 2 and abs(block2[0, 1]) > 1e-12
    block3 = w3[np.ix_(sub, sub)]
    res = np.diag(resolvent(setup))
    vlv = setup.v @ res @ setup.v
    f4 = f4_num = None
    if fourth_order and n_atoms - 2 * level > 4:
        f4 = float(ws[4].matrix[level, level])
        f4_num = float(_numeric_fourth_order(n_atoms, level, w2[level, level]))
    return OddOrderReport(
        n_atoms=n_atoms,
        level=level,
        skipped=bool(skipped),
        w3_diag_max=float(np.max(np.abs(np.diag(block3)))),
        w3_block_offdiag=float(abs(block3[0, 1])) if len(sub) == 2 else 0.0,
        v_odd=is_odd_matrix(setup.v),
        resolvent_even=is_even_matrix(res),
        second_order_even=is_even_matrix(vlv, atol=1e-12),
        w3_odd=is_odd_matrix(w3, atol=1e-12),
        fourth_order=f4,
        fourth_order_numeric=f4_num,
    )
