"""Exact spectrum, eigenbasis projections and beat frequencies.

For Lambda > 1 the highest levels come in relabel-symmetric doublets whose
splitting quickly drops below double precision. Inside such numerically
degenerate clusters the eigensolver's basis is arbitrary, so ``diagonalize``
rotates each cluster onto the basis that diagonalises the well-1 occupation.
That picks the states localised in one well, which are the ones a
self-trapped coherent state actually overlaps with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import OutOfRegimeError
from .fields import PhaseGrid, ScanField
from .model import DimerParams, StateVector, _coherent_amplitudes, hamiltonian_bands

# numerically degenerate clusters: gaps below this fraction of the spectral radius
DEGENERACY_RTOL = 1e-9
# quasi-degenerate doublet: splitting below this fraction of the neighbouring gaps
DOUBLET_RATIO = 0.1


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Energies sorted descending, ``vectors[:, k]`` paired with ``energies[k]``."""

    energies: np.ndarray
    vectors: np.ndarray
    params: DimerParams

    @property
    def n_atoms(self) -> int:
        return self.params.n_atoms

    def coefficients(self, amps: np.ndarray) -> np.ndarray:
        """<E_k|psi> for each row of ``amps`` (eigenvectors are real)."""
        return np.atleast_2d(amps) @ self.vectors


@dataclass(frozen=True)
class BeatSet:
    """Beat frequencies (Hz) among the three highest levels."""

    f_fast: float
    f_mid: float
    f_sum: float
    f_slow: float


def _localize_cluster(vecs: np.ndarray) -> np.ndarray:
    n = np.arange(vecs.shape[0], dtype=float)
    occ = vecs.T @ (n[:, None] * vecs)
    _, rot = np.linalg.eigh(occ)
    # well-1 heavy states first
    return vecs @ rot[:, ::-1]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def diagonalize(params: DimerParams) -> EigenDecomposition:
    """Full spectrum from the symmetric tridiagonal eigensolver."""
    diag, off = hamiltonian_bands(params)
    if params.n_atoms == 0:
        return EigenDecomposition(diag.copy(), np.ones((1, 1)), params)
    w, v = eigh_tridiagonal(diag, off)
    w = w[::-1].copy()
    v = v[:, ::-1].copy()

    scale = max(float(np.max(np.abs(w))), 1.0)
    tol = DEGENERACY_RTOL * scale
    start = 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i - 1] - w[i] > tol:
            if i - start > 1:
                v[:, start:i] = _localize_cluster(v[:, start:i])
                hv = diag[:, None] * v[:, start:i]
                hv[:-1] += off[:, None] * v[1:, start:i]
                hv[1:] += off[:, None] * v[:-1, start:i]
                # shared value keeps the stable sort from reordering the cluster
                w[start:i] = np.einsum("ij,ij->j", v[:, start:i], hv).mean()
            start = i

    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], _fix_signs(v[:, order]), params)


def energy_levels(eig: EigenDecomposition) -> np.ndarray:
    """Distinct levels from the top, each quasi-degenerate doublet merged into its centroid."""
    e = eig.energies
    levels = []
    i = 0
    while i < e.size:
        if i + 1 < e.size:
            split = e[i] - e[i + 1]
            gaps = []
            if i > 0:
                gaps.append(e[i - 1] - e[i])
            if i + 2 < e.size:
                gaps.append(e[i + 1] - e[i + 2])
            if not gaps or split <= DOUBLET_RATIO * min(gaps):
                levels.append(0.5 * (e[i] + e[i + 1]))
                i += 2
                continue
        levels.append(e[i])
        i += 1
    return np.asarray(levels)


def project_top_k(state: StateVector, eig: EigenDecomposition, k: int) -> tuple[np.ndarray, float]:
    """Coefficients on the ``k`` eigenstates with largest overlap, largest first."""
    if not 1 <= k <= eig.energies.size:
        raise ValueError(f"k must lie in [1, {eig.energies.size}], got {k}")
    coeff = eig.coefficients(state.amplitudes)[0]
    order = np.argsort(-np.abs(coeff), kind="stable")[:k]
    top = coeff[order]
    return top, float(np.sum(np.abs(top) ** 2))


def top_k_indices(state: StateVector, eig: EigenDecomposition, k: int) -> np.ndarray:
    coeff = eig.coefficients(state.amplitudes)[0]
    return np.argsort(-np.abs(coeff), kind="stable")[:k]


def beats_near_fixed_point(eig: EigenDecomposition) -> BeatSet:
    if eig.n_atoms < 2:
        raise OutOfRegimeError("beats need at least two atoms")
    levels = energy_levels(eig)
    if levels.size < 3:
        raise OutOfRegimeError(f"only {levels.size} distinct levels; need three")
    e0, e1, e2 = levels[:3]
    f_fast = (e0 - e1) / (2 * math.pi)
    f_mid = (e1 - e2) / (2 * math.pi)
    return BeatSet(float(f_fast), float(f_mid), float((e0 - e2) / (2 * math.pi)), float(f_fast - f_mid))


def _top_k_norm(coeff: np.ndarray, k: int) -> np.ndarray:
    weights = np.abs(coeff) ** 2
    if k >= weights.shape[1]:
        return weights.sum(axis=1)
    part = -np.partition(-weights, k - 1, axis=1)[:, :k]
    return part.sum(axis=1)


def projection_norm_field(
    params: DimerParams, grid: PhaseGrid, k: int = 3, eig: EigenDecomposition | None = None
) -> ScanField:
    """Weight captured by the ``k`` dominant eigenstates, for every coherent state on ``grid``."""
    if eig is None:
        eig = diagonalize(params)
    if not 1 <= k <= params.n_atoms + 1:
        raise ValueError("k out of range")
    zz, pp = grid.mesh()
    amps = _coherent_amplitudes(params.n_atoms, zz.ravel(), pp.ravel())
    values = _top_k_norm(eig.coefficients(amps), k).reshape(grid.shape)
    return ScanField(grid, values, observable=f"top{k}_norm_sq", metadata={"k": k})


def projection_norm_along(params: DimerParams, z, phi, k: int = 3, eig: EigenDecomposition | None = None) -> np.ndarray:
    """Top-k projection weight for coherent states at arbitrary points (e.g. a mean-field orbit)."""
    if eig is None:
        eig = diagonalize(params)
    amps = _coherent_amplitudes(params.n_atoms, z, phi)
    return _top_k_norm(eig.coefficients(amps), k)
