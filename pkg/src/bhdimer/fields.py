"""Phase-space grids and the scalar fields evaluated on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Tensor grid over imbalance ``z`` (rows) and phase ``phi`` (columns)."""

    z: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        if z.ndim != 1 or phi.ndim != 1:
            raise ValueError("grid axes must be 1-D")
        if np.any(np.abs(z) > 1.0):
            raise ValueError("z axis must lie in [-1, 1]")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def uniform(cls, n_z: int, n_phi: int, include_poles: bool = True) -> "PhaseGrid":
        """Evenly spaced axes; phi nodes are 2*pi*k/n_phi.

        With ``include_poles=False`` the z nodes sit at cell centres, which
        samples the sphere with equal weight per node (z is the equal-area
        coordinate).
        """
        if n_z < 1 or n_phi < 1:
            raise ValueError("grid needs at least one node per axis")
        if include_poles:
            z = np.linspace(-1.0, 1.0, n_z) if n_z > 1 else np.zeros(1)
        else:
            z = -1.0 + (2.0 * np.arange(n_z) + 1.0) / n_z
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        return cls(z, phi)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.z.size, self.phi.size)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.z, self.phi, indexing="ij")


@dataclass(eq=False)
class ScanField:
    grid: PhaseGrid
    values: np.ndarray
    observable: str
    t_final: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def nearest(self, z: float, phi: float) -> float:
        i = int(np.argmin(np.abs(self.grid.z - z)))
        dphi = np.abs((self.grid.phi - phi + math.pi) % (2 * math.pi) - math.pi)
        return float(self.values[i, int(np.argmin(dphi))])

    def long_form(self) -> np.ndarray:
        """(z, phi, value) rows, z-major."""
        zz, pp = self.grid.mesh()
        return np.column_stack([zz.ravel(), pp.ravel(), self.values.ravel()])
