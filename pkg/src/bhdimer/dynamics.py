"""Unitary evolution, observable time series and their power spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StepSizeError
from .model import DimerParams, StateVector, _observables, build_hamiltonian
from .spectra import EigenDecomposition

SERIES_COLUMNS = ("z", "phi", "condensate_fraction", "epr", "atom_count")


@dataclass(eq=False)
class TimeSeries:
    """Observables sampled at ``times``; ``phi`` is NaN where the phase is undefined."""

    times: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    condensate_fraction: np.ndarray
    epr: np.ndarray
    atom_count: np.ndarray
    norm_sq: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1:
            raise ValueError("times must be 1-D")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name in SERIES_COLUMNS:
            col = np.asarray(getattr(self, name), dtype=float)
            if col.shape != self.times.shape:
                raise ValueError(f"column {name} has shape {col.shape}, expected {self.times.shape}")
            setattr(self, name, col)

    @classmethod
    def from_observables(cls, times, obs: dict, norm_sq=None) -> "TimeSeries":
        return cls(
            times,
            obs["z"],
            obs["phi"],
            obs["condensate_fraction"],
            obs["epr"],
            obs["atom_count"],
            norm_sq=norm_sq,
            extra={"rho12": obs["rho12"], "n1n2": obs["n1n2"]},
        )

    def column(self, name: str) -> np.ndarray:
        if name == "norm_sq":
            if self.norm_sq is None:
                raise KeyError("series carries no projection norm")
            return self.norm_sq
        return getattr(self, name)


@dataclass(frozen=True, eq=False)
class SpectralPeaks:
    """Local maxima of the power spectrum, strongest first."""

    peaks: list
    resolution: float
    frequencies: np.ndarray
    power: np.ndarray

    def strongest_near(self, f: float, window: float) -> tuple[float, float] | None:
        near = [p for p in self.peaks if abs(p[0] - f) <= window]
        return near[0] if near else None


def _evolve_rows(eig: EigenDecomposition, coeff: np.ndarray, times) -> np.ndarray:
    """Fock amplitudes at each time from eigenbasis coefficients ``coeff`` (1-D)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    phases = np.exp(-1j * np.outer(times, eig.energies))
    return (phases * coeff[None, :]) @ eig.vectors.T


def evolve_spectral(state0: StateVector, eig: EigenDecomposition, t: float) -> StateVector:
    """psi(t) = sum_n a_n exp(-i E_n t) |E_n>."""
    if state0.n_atoms != eig.n_atoms:
        raise ValueError("state and decomposition have different atom numbers")
    coeff = eig.coefficients(state0.amplitudes)[0]
    return StateVector(_evolve_rows(eig, coeff, [t])[0])


def default_rk4_step(params: DimerParams) -> float:
    return 1e-4 / max(params.tunneling, params.interaction * params.n_atoms)


def evolve_rk4(state0: StateVector, params: DimerParams, t: float, dt: float | None = None) -> StateVector:
    """Classical fourth-order Runge-Kutta for i dpsi/dt = H psi, no renormalisation.

    The equation is linear, so one RK4 step is the fixed matrix
    1 + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24 with A = -iH; it is built once
    and applied repeatedly. Norm drift is the error signal.
    """
    if dt is None:
        dt = default_rk4_step(params)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t == 0:
        return StateVector(state0.amplitudes.copy())
    n_steps = max(1, int(np.ceil(abs(t) / dt)))
    h = t / n_steps
    a = -1j * h * build_hamiltonian(params)
    step = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, 5):
        term = term @ a / k
        step = step + term
    psi = state0.amplitudes.copy()
    norm0 = np.vdot(psi, psi).real
    for _ in range(n_steps):
        psi = step @ psi
    drift = abs(np.vdot(psi, psi).real - norm0)
    if not drift <= 1e-6:  # nan after overflow counts as failure
        raise StepSizeError(f"RK4 norm drift {drift:.2e} exceeds 1e-6; reduce dt")
    return StateVector(psi)


def energy_expectation(state: StateVector, params: DimerParams) -> float:
    a = state.amplitudes
    return float(np.vdot(a, build_hamiltonian(params) @ a).real)


def truncate_to_top_k(state: StateVector, eig: EigenDecomposition, k: int, normalize: bool = True) -> StateVector:
    """Keep only the ``k`` dominant eigen-components of ``state``."""
    coeff = eig.coefficients(state.amplitudes)[0]
    keep = np.argsort(-np.abs(coeff), kind="stable")[:k]
    trimmed = np.zeros_like(coeff)
    trimmed[keep] = coeff[keep]
    out = StateVector(eig.vectors @ trimmed)
    return out.normalized() if normalize else out


def observable_series(
    state0: StateVector,
    eig: EigenDecomposition,
    t_grid,
    project_k: int | None = None,
    chunk: int = 2048,
) -> TimeSeries:
    """Every single-state observable at each time in ``t_grid`` via spectral evolution.

    With ``project_k`` set, the series also carries the weight of the
    instantaneous state on its ``project_k`` dominant eigenstates (constant in
    time, since the weights are).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    coeff = eig.coefficients(state0.amplitudes)[0]
    parts = []
    for lo in range(0, t_grid.size, chunk):
        parts.append(_observables(_evolve_rows(eig, coeff, t_grid[lo : lo + chunk])))
    obs = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
    norm_sq = None
    if project_k is not None:
        w = np.sort(np.abs(coeff) ** 2)[::-1]
        norm_sq = np.full(t_grid.size, w[:project_k].sum())
    return TimeSeries.from_observables(t_grid, obs, norm_sq=norm_sq)


def power_spectrum(values, times, min_rel_power: float = 1e-12) -> SpectralPeaks:
    """Rectangular-window periodogram with 3-point parabolic peak refinement."""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.shape != times.shape or values.ndim != 1:
        raise ValueError("values and times must be matching 1-D arrays")
    if values.size < 16:
        raise ValueError("need at least 16 samples")
    dts = np.diff(times)
    dt = float(np.mean(dts))
    if np.max(np.abs(dts - dt)) > 1e-9 * max(dt, 1e-300) + 1e-12:
        raise ValueError("power_spectrum needs uniformly sampled data")
    x = values - values.mean()
    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.size, dt)
    df = freqs[1] - freqs[0]
    peaks = []
    top = power.max()
    if top > 0:
        for i in range(1, power.size - 1):
            p = power[i]
            if p > power[i - 1] and p >= power[i + 1] and p > min_rel_power * top:
                a, b, c = power[i - 1], p, power[i + 1]
                denom = a - 2 * b + c
                shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
                shift = min(0.5, max(-0.5, shift))
                peaks.append((float(freqs[i] + shift * df), float(b - 0.25 * (a - c) * shift)))
    peaks.sort(key=lambda fp: -fp[1])
    return SpectralPeaks(peaks, resolution=float(1.0 / (x.size * dt)), frequencies=freqs, power=power)
