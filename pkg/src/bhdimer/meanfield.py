"""Classical (mean-field) dimer: energy, flow, fixed points, small-oscillation frequency.

The flow is the canonical one generated by

    H_MF(z, phi) = Lambda z^2 / 2 - sqrt(1 - z^2) cos(phi)

with (phi, z) as conjugate pair, in physical time scaled by 2J:

    dz/dt   = -2J sqrt(1 - z^2) sin(phi)
    dphi/dt =  2J [Lambda z + z cos(phi) / sqrt(1 - z^2)]

The 2J factor is the one for which linearising about the self-trapping
point reproduces f = J sqrt(Lambda^2 - 1) / pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRegimeError, SingularityError
from .model import TWO_PI, DimerParams

POLE_MARGIN = 1e-9


@dataclass(frozen=True)
class MeanFieldState:
    z: float
    phi: float

    def __post_init__(self):
        if abs(self.z) > 1.0:
            raise ValueError(f"|z| must be <= 1, got {self.z}")


@dataclass(frozen=True)
class FixedPoint:
    z: float
    phi: float
    stability: str  # "stable" | "unstable" | "marginal"


@dataclass(frozen=True)
class FixedPointSet:
    points: tuple

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def stable(self) -> list:
        return [p for p in self.points if p.stability == "stable"]


@dataclass(eq=False)
class MeanFieldTrajectory:
    times: np.ndarray
    z: np.ndarray
    phi: np.ndarray


def h_mf(state: MeanFieldState, lam: float) -> float:
    return _h_mf(state.z, state.phi, lam)


def _h_mf(z, phi, lam):
    return 0.5 * lam * z**2 - np.sqrt(1.0 - z**2) * np.cos(phi)


def _rhs(z, phi, two_j, lam):
    root = np.sqrt(1.0 - z**2)
    dz = -two_j * root * np.sin(phi)
    dphi = two_j * (lam * z + z * np.cos(phi) / root)
    return dz, dphi


def _rhs_scalar(z, phi, two_j, lam):
    root = math.sqrt(1.0 - z * z)
    return -two_j * root * math.sin(phi), two_j * (lam * z + z * math.cos(phi) / root)


def eom(state: MeanFieldState, params: DimerParams) -> tuple[float, float]:
    """(dz/dt, dphi/dt) in 1/s."""
    if abs(state.z) >= 1.0:
        raise SingularityError("phase is undefined at the poles |z| = 1")
    dz, dphi = _rhs(state.z, state.phi, 2.0 * params.tunneling, params.lam)
    return float(dz), float(dphi)


def fixed_points(lam: float) -> FixedPointSet:
    if lam < 0:
        raise ValueError("Lambda must be >= 0")
    pts = [FixedPoint(0.0, 0.0, "stable")]
    if lam < 1.0:
        pts.append(FixedPoint(0.0, math.pi, "stable"))
    elif lam == 1.0:
        pts.append(FixedPoint(0.0, math.pi, "marginal"))
    else:
        pts.append(FixedPoint(0.0, math.pi, "unstable"))
        zs = self_trapping_z(lam)
        pts.append(FixedPoint(zs, math.pi, "stable"))
        pts.append(FixedPoint(-zs, math.pi, "stable"))
    return FixedPointSet(tuple(pts))


def self_trapping_z(lam: float) -> float:
    """Positive imbalance of the self-trapping fixed points, sqrt(1 - 1/Lambda^2)."""
    if lam < 1.0:
        raise OutOfRegimeError(f"no self-trapping branch for Lambda = {lam} < 1")
    return math.sqrt(1.0 - 1.0 / lam**2)


def f_mf(params: DimerParams) -> float:
    """Small-oscillation frequency about the self-trapping point, in Hz."""
    lam = params.lam
    if not lam >= 1.0:
        raise OutOfRegimeError(f"no self-trapping branch for Lambda = {lam} < 1")
    return math.sqrt(lam**2 - 1.0) * params.tunneling / math.pi


def jacobian(state: MeanFieldState, params: DimerParams, eps: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the flow in (z, phi)."""
    jac = np.empty((2, 2))
    for col, (dz, dp) in enumerate([(eps, 0.0), (0.0, eps)]):
        plus = eom(MeanFieldState(state.z + dz, state.phi + dp), params)
        minus = eom(MeanFieldState(state.z - dz, state.phi - dp), params)
        jac[:, col] = (np.array(plus) - np.array(minus)) / (2 * eps)
    return jac


def default_step(params: DimerParams) -> float:
    lam = params.lam if math.isfinite(params.lam) else 0.0
    return 0.005 / (2.0 * params.tunneling * (1.0 + lam))


def integrate_meanfield(state0: MeanFieldState, params: DimerParams, t_grid, dt: float | None = None) -> MeanFieldTrajectory:
    """Fixed-step RK4 on the flow, sampled at ``t_grid`` (which must start at 0)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-decreasing and start at 0")
    if abs(state0.z) >= 1.0 - POLE_MARGIN:
        raise SingularityError("initial point sits on a pole")
    if dt is None:
        dt = default_step(params)
    two_j, lam = 2.0 * params.tunneling, params.lam
    z, phi = float(state0.z), float(state0.phi)
    zs = np.empty(t_grid.size)
    ps = np.empty(t_grid.size)
    zs[0], ps[0] = z, phi
    t = 0.0
    for i in range(1, t_grid.size):
        span = t_grid[i] - t
        n = max(1, int(math.ceil(span / dt))) if span > 0 else 0
        h = span / n if n else 0.0
        for _ in range(n):
            k1 = _rhs_scalar(z, phi, two_j, lam)
            k2 = _rhs_scalar(z + 0.5 * h * k1[0], phi + 0.5 * h * k1[1], two_j, lam)
            k3 = _rhs_scalar(z + 0.5 * h * k2[0], phi + 0.5 * h * k2[1], two_j, lam)
            k4 = _rhs_scalar(z + h * k3[0], phi + h * k3[1], two_j, lam)
            z += h * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
            phi += h * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
            if not abs(z) < 1.0 - POLE_MARGIN:
                raise SingularityError(f"trajectory reached |z| = {abs(z):.12f} at t = {t:.6g} s")
        t = t_grid[i]
        zs[i], ps[i] = z, phi % TWO_PI
    ps[0] = ps[0] % TWO_PI
    return MeanFieldTrajectory(t_grid, zs, ps)
