"""Phase-space scans over coherent initial conditions, Husimi fields and the map projection."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dissipation import JumpConfig, LossSchedule, ensemble_moments
from .fields import PhaseGrid, ScanField
from .model import DimerParams, PhasePoint, StateVector, _coherent_amplitudes, _observables
from .spectra import EigenDecomposition, diagonalize, projection_norm_field

__all__ = [
    "PhaseGrid",
    "ScanField",
    "FractionSeries",
    "scan_observable",
    "entangled_fraction",
    "husimi_field",
    "lambert_project",
    "projection_norm_field",
    "sample_grid",
]

SCAN_OBSERVABLES = ("condensate_fraction", "epr", "z")


@dataclass(eq=False)
class FractionSeries:
    times: np.ndarray
    fraction: np.ndarray
    n_samples: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.fraction = np.asarray(self.fraction, dtype=float)
        if np.any((self.fraction < 0) | (self.fraction > 1)):
            raise ValueError("fractions must lie in [0, 1]")


def _map_chunks(fn, n_items: int, chunk: int, workers: int):
    bounds = [(lo, min(n_items, lo + chunk)) for lo in range(0, n_items, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: fn(*b), bounds))
    return [fn(lo, hi) for lo, hi in bounds]


def _evolved_rows(eig: EigenDecomposition, amps: np.ndarray, t: float) -> np.ndarray:
    coeff = amps @ eig.vectors
    return (coeff * np.exp(-1j * eig.energies * t)[None, :]) @ eig.vectors.T


def scan_observable(
    params: DimerParams,
    grid: PhaseGrid,
    t_final: float,
    observable: str = "condensate_fraction",
    eig: EigenDecomposition | None = None,
    workers: int = 1,
) -> ScanField:
    """Observable at ``t_final`` for the coherent state started at every grid node."""
    if observable not in SCAN_OBSERVABLES:
        raise ValueError(f"observable must be one of {SCAN_OBSERVABLES}")
    if min(grid.shape) < 2:
        raise ValueError("scan grid needs at least 2 nodes per axis")
    if eig is None:
        eig = diagonalize(params)
    zz, pp = grid.mesh()
    zf, pf = zz.ravel(), pp.ravel()
    out = np.empty(zf.size)

    def work(lo, hi):
        amps = _coherent_amplitudes(params.n_atoms, zf[lo:hi], pf[lo:hi])
        out[lo:hi] = _observables(_evolved_rows(eig, amps, t_final))[observable]

    _map_chunks(work, zf.size, 2048, workers)
    return ScanField(
        grid,
        out.reshape(grid.shape),
        observable=observable,
        t_final=float(t_final),
        metadata={"n_atoms": params.n_atoms, "tunneling": params.tunneling, "interaction": params.interaction},
    )


def sample_grid(n_samples: int) -> PhaseGrid:
    """Cell-centred (z, phi) grid with about ``n_samples`` nodes, n_phi ~ 1.25 n_z.

    Cell centres in z avoid the poles and weight the sphere uniformly.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    n_z = max(1, int(round(math.sqrt(n_samples / 1.25))))
    n_phi = max(1, int(math.ceil(n_samples / n_z)))
    return PhaseGrid.uniform(n_z, n_phi, include_poles=False)


def entangled_fraction(
    params: DimerParams,
    grid: PhaseGrid,
    t_grid,
    schedule: LossSchedule | None = None,
    config: JumpConfig | None = None,
    workers: int = 1,
) -> FractionSeries:
    """Fraction of sampled coherent initial conditions with EPR > 0 at each time.

    With a loss schedule, each initial condition's EPR is evaluated from its
    ensemble-averaged moments.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    zz, pp = grid.mesh()
    n = zz.size
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    states = _coherent_amplitudes(params.n_atoms, zz.ravel(), pp.ravel())
    meta = {"schedule": None}
    if schedule is None or schedule.is_zero:
        eig = diagonalize(params)
        coeff = states @ eig.vectors
        count = np.zeros(t_grid.size)

        def work(lo, hi):
            for i, t in enumerate(t_grid):
                amps = (coeff[lo:hi] * np.exp(-1j * eig.energies * t)[None, :]) @ eig.vectors.T
                count[i] += np.count_nonzero(_observables(amps)["epr"] > 0)

        # counts are summed per chunk, so run chunks serially to keep the sum exact
        _map_chunks(work, n, 1024, 1)
        fraction = count / n
    else:
        if config is None:
            config = JumpConfig(method="waiting", n_trajectories=200)
        meta = {"schedule": [(w.t_start, w.t_end, w.gamma1, w.gamma2) for w in schedule.windows]}
        parts = _map_chunks(
            lambda lo, hi: ensemble_moments(states[lo:hi], params, schedule, config, t_grid, group_offset=lo)[0],
            n,
            max(1, config.chunk_size // config.n_trajectories),
            workers,
        )
        mean = np.concatenate(parts, axis=0)
        epr = mean[..., 2] ** 2 + mean[..., 3] ** 2 - mean[..., 4]
        fraction = np.mean(epr > 0, axis=0)
    return FractionSeries(t_grid, fraction, n, metadata=meta)


def husimi_field(state: StateVector, grid: PhaseGrid) -> ScanField:
    """|<z, phi|psi>|^2 at every grid node."""
    zz, pp = grid.mesh()
    amps = _coherent_amplitudes(state.n_atoms, zz.ravel(), pp.ravel())
    overlap = np.conj(amps) @ state.amplitudes
    values = (np.abs(overlap) ** 2).reshape(grid.shape)
    return ScanField(grid, values, observable="husimi", metadata={"n_atoms": state.n_atoms})


def husimi_integral(field: ScanField, n_atoms: int) -> float:
    """(N+1)/(4 pi) times the integral of the field over the sphere (dA = dz dphi).

    Uses the midpoint rule, so the grid should be cell-centred in z and
    uniform in phi.
    """
    dz = 2.0 / field.grid.z.size
    dphi = 2.0 * math.pi / field.grid.phi.size
    return float(field.values.sum() * dz * dphi * (n_atoms + 1) / (4.0 * math.pi))


def lambert_project(point: PhasePoint) -> tuple[float, float]:
    """Cylindrical equal-area map: x = phi, y = z."""
    phi = 0.0 if point.phi is None else point.phi
    return float(phi), float(point.z)


def spherical_cap_map_area(axis_z: float, axis_phi: float, half_angle: float, n_samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo (sphere area, map area) of a spherical cap.

    Points are drawn uniformly in the map rectangle [0, 2pi) x [-1, 1]; the map
    area of the cap is the hit fraction times 4 pi. The exact sphere area of the
    cap is 2 pi (1 - cos half_angle), so equality checks the equal-area property.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 2.0 * math.pi, n_samples)
    y = rng.uniform(-1.0, 1.0, n_samples)
    s = np.sqrt(1.0 - y * y)
    v = np.stack([s * np.cos(x), s * np.sin(x), y])
    sa = math.sqrt(max(0.0, 1.0 - axis_z * axis_z))
    c = np.array([sa * math.cos(axis_phi), sa * math.sin(axis_phi), axis_z])
    hit = (c @ v) >= math.cos(half_angle)
    return 2.0 * math.pi * (1.0 - math.cos(half_angle)), float(hit.mean() * 4.0 * math.pi)
