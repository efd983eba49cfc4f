"""Localized atom loss: quantum-jump trajectories and a master-equation reference.

Trajectories carry a padded amplitude array of length N+1 together with the
current atom number m; entries above index m are zero. Loss rates are
piecewise constant in time, and every propagator exp(-i H' tau) with
H' = H - (i/2)(g1 n1 + g2 n2) is an exact dense matrix exponential, cached per
(m, g1, g2, tau).

Two ways of drawing jumps are provided:

* ``"step"``: fixed steps dt. Each step draws one uniform r per trajectory;
  r < dp1 removes an atom from well 1, r < dp1 + dp2 from well 2, otherwise
  the state takes one non-unitary step. The state is renormalised every step.
* ``"waiting"``: the dt -> 0 limit of the same process. A threshold r is drawn,
  the unnormalised state is propagated until its squared norm falls to r, and
  the crossing time is located by dyadic bisection of the propagation step.
  This needs no small step, which is what makes large ensembles affordable.

Ensemble condensate fraction and EPR are evaluated from ensemble-averaged
moments (<n1>, <n2>, <a1^dag a2>, <n1 n2>), i.e. from the averaged state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import InvalidJumpError, StepSizeError
from .model import (
    TWO_PI,
    DimerParams,
    StateVector,
    _observables,
    hopping_elements,
    interaction_diagonal,
)
from .spectra import diagonalize

MAX_STEP_PROBABILITY = 0.1
BISECTION_LEVELS = 20
METHODS = ("step", "waiting")
# below this many rows, gathered per-row propagators beat grouping by (m, piece)
GATHER_BELOW = 48


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class LossWindow:
    t_start: float
    t_end: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"empty loss window [{self.t_start}, {self.t_end}]")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("loss rates must be >= 0")


@dataclass(frozen=True)
class LossSchedule:
    """Ordered, non-overlapping windows of constant per-well loss rates."""

    windows: tuple = ()

    def __post_init__(self):
        ws = tuple(sorted(self.windows, key=lambda w: w.t_start))
        for a, b in zip(ws, ws[1:]):
            if b.t_start < a.t_end:
                raise ValueError("loss windows overlap")
        object.__setattr__(self, "windows", ws)

    @classmethod
    def none(cls) -> "LossSchedule":
        return cls(())

    @classmethod
    def single(cls, well: int, rate: float, t_start: float, t_end: float) -> "LossSchedule":
        return cls.from_specs([(well, rate, t_start, t_end)])

    @classmethod
    def from_specs(cls, specs) -> "LossSchedule":
        """Merge (well, rate, t0, t1) tuples; overlapping specs add their rates."""
        specs = list(specs)
        for well, rate, t0, t1 in specs:
            if well not in (1, 2):
                raise ValueError(f"well must be 1 or 2, got {well}")
            if rate < 0:
                raise ValueError("loss rates must be >= 0")
            if not t1 > t0:
                raise ValueError(f"empty loss window [{t0}, {t1}]")
        cuts = sorted({t for s in specs for t in s[2:]})
        windows = []
        for a, b in zip(cuts, cuts[1:]):
            g = [0.0, 0.0]
            for well, rate, t0, t1 in specs:
                if t0 <= a and b <= t1:
                    g[well - 1] += rate
            if g[0] > 0 or g[1] > 0:
                if windows and windows[-1].t_end == a and (windows[-1].gamma1, windows[-1].gamma2) == tuple(g):
                    windows[-1] = LossWindow(windows[-1].t_start, b, g[0], g[1])
                else:
                    windows.append(LossWindow(a, b, g[0], g[1]))
        return cls(tuple(windows))

    @property
    def is_zero(self) -> bool:
        return all(w.gamma1 == 0 and w.gamma2 == 0 for w in self.windows)

    @property
    def gamma_max(self) -> float:
        return max([max(w.gamma1, w.gamma2) for w in self.windows], default=0.0)

    @property
    def first_loss_time(self) -> float:
        starts = [w.t_start for w in self.windows if w.gamma1 > 0 or w.gamma2 > 0]
        return min(starts) if starts else math.inf

    def rates_at(self, t: float) -> tuple[float, float]:
        """Rates on the half-open interval [t_start, t_end)."""
        for w in self.windows:
            if w.t_start <= t < w.t_end:
                return w.gamma1, w.gamma2
        return 0.0, 0.0

    def breakpoints(self) -> list:
        return sorted({t for w in self.windows for t in (w.t_start, w.t_end)})


# ---------------------------------------------------------------- config


def default_dt(params: DimerParams, schedule: LossSchedule) -> float:
    g = schedule.gamma_max
    if g == 0:
        return 1e-4
    return min(1e-4, 0.01 / (g * params.n_atoms))


@dataclass(frozen=True)
class JumpConfig:
    """Trajectory settings. ``dt=None`` picks the default step for the schedule."""

    dt: float | None = None
    rng_seed: int = 0
    n_trajectories: int = 1
    record_stride: int = 1
    method: str = "step"
    chunk_size: int = 4096

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")

    def resolve_dt(self, params: DimerParams, schedule: LossSchedule) -> float:
        dt = default_dt(params, schedule) if self.dt is None else self.dt
        if schedule.gamma_max * params.n_atoms * dt > 0.01 * (1 + 1e-12):
            raise ValueError(
                f"dt = {dt:g} s allows more than one loss per step (need gamma_max*N*dt <= 0.01)"
            )
        return dt

    def record_times(self, params: DimerParams, schedule: LossSchedule, t_final: float) -> np.ndarray:
        """Recording grid: every ``record_stride`` steps of size dt."""
        step = self.resolve_dt(params, schedule) * self.record_stride
        n = int(math.floor(t_final / step + 1e-9))
        return np.arange(n + 1) * step


# ---------------------------------------------------------------- single-state operations


def jump_probabilities(state: StateVector, gamma1: float, gamma2: float, dt: float) -> tuple[float, float]:
    """(dt g1 <n1>, dt g2 <n2>) for a normalised state."""
    m = state.n_atoms
    prob = np.abs(state.amplitudes) ** 2
    n1 = float(prob @ np.arange(m + 1))
    dp1 = dt * gamma1 * n1
    dp2 = dt * gamma2 * (m * float(prob.sum()) - n1)
    if dp1 + dp2 > MAX_STEP_PROBABILITY:
        raise StepSizeError(f"jump probability {dp1 + dp2:.3g} per step; reduce dt")
    return dp1, dp2


def _annihilate(psi: np.ndarray, m, well: int) -> np.ndarray:
    """a_well on padded rows with atom numbers ``m``; result keeps the padding."""
    psi = np.atleast_2d(psi)
    k = np.arange(psi.shape[1])
    out = np.zeros_like(psi)
    if well == 1:
        out[:, :-1] = np.sqrt(k[1:])[None, :] * psi[:, 1:]
    else:
        m = np.asarray(m).reshape(-1, 1)
        out = np.sqrt(np.clip(m - k[None, :], 0, None)) * psi
    return out


def apply_jump(state: StateVector, well: int) -> StateVector:
    """Remove one atom from ``well`` and renormalise; the Fock space shrinks by one."""
    if well not in (1, 2):
        raise ValueError(f"well must be 1 or 2, got {well}")
    m = state.n_atoms
    amps = state.amplitudes
    support = amps[1:] if well == 1 else amps[:-1]
    if m == 0 or not np.any(support != 0):
        raise InvalidJumpError(f"well {well} is empty")
    out = _annihilate(amps, m, well)[0][:m]
    return StateVector(out / np.linalg.norm(out))


def effective_hamiltonian(n_atoms: int, tunneling: float, interaction: float, gamma1: float, gamma2: float) -> np.ndarray:
    """H' = H - (i/2)(g1 n1 + g2 n2) on the m = n_atoms block."""
    n = np.arange(n_atoms + 1, dtype=float)
    h = np.diag(interaction_diagonal(n_atoms, interaction) - 0.5j * (gamma1 * n + gamma2 * (n_atoms - n)))
    off = -tunneling * hopping_elements(n_atoms)
    return h + np.diag(off, 1) + np.diag(off, -1)


def nonunitary_step(state: StateVector, params: DimerParams, gamma1: float, gamma2: float, dt: float) -> StateVector:
    """exp(-i H' dt) psi, left unnormalised."""
    prop = expm(-1j * dt * effective_hamiltonian(state.n_atoms, params.tunneling, params.interaction, gamma1, gamma2))
    return StateVector(prop @ state.amplitudes)


class PropagatorCache:
    """exp(-i H'_m tau) keyed by (m, g1, g2, tau); padded to the full dimension."""

    def __init__(self, params: DimerParams):
        self.params = params
        self.dim = params.n_atoms + 1
        self._store = {}

    def get(self, m: int, gamma1: float, gamma2: float, tau: float) -> np.ndarray:
        key = (int(m), gamma1, gamma2, tau)
        mat = self._store.get(key)
        if mat is None:
            h = effective_hamiltonian(int(m), self.params.tunneling, self.params.interaction, gamma1, gamma2)
            # stored transposed so rows can be propagated as psi @ P^T
            mat = np.ascontiguousarray(expm(-1j * tau * h).T)
            self._store[key] = mat
        return mat

    def apply(self, psi: np.ndarray, m: int, gamma1: float, gamma2: float, tau: float) -> np.ndarray:
        out = np.zeros(psi.shape, dtype=complex)
        out[:, : m + 1] = psi[:, : m + 1] @ self.get(m, gamma1, gamma2, tau)
        return out

    def __len__(self):
        return len(self._store)


# ---------------------------------------------------------------- ensemble moments

MOMENT_NAMES = ("n1", "n2", "rho12_re", "rho12_im", "n1n2", "atoms")


def _padded_moments(psi: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Moments of the normalised rows, shape (rows, 6) in MOMENT_NAMES order."""
    prob = psi.real**2 + psi.imag**2
    norm = prob.sum(axis=1)
    k = np.arange(psi.shape[1], dtype=float)
    mf = m.astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(norm > 0, 1.0 / norm, 0.0)
    n1 = (prob @ k) * inv
    n2 = mf - n1
    n1n2 = mf * n1 - (prob @ (k * k)) * inv
    hop = np.sqrt(np.clip((k[None, :-1] + 1.0) * (mf[:, None] - k[None, :-1]), 0.0, None))
    r12 = np.sum(np.conj(psi[:, 1:]) * psi[:, :-1] * hop, axis=1) * inv
    return np.column_stack([n1, n2, r12.real, r12.imag, n1n2, mf])


@dataclass(eq=False)
class EnsembleSeries:
    """Ensemble-averaged moments over time; c, EPR, z, phi derive from the averages."""

    times: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    rho12: np.ndarray
    n1n2: np.ndarray
    atoms: np.ndarray
    stderr: dict = field(default_factory=dict)
    n_trajectories: int = 1

    @property
    def condensate_fraction(self) -> np.ndarray:
        total = self.n1 + self.n2
        with np.errstate(invalid="ignore", divide="ignore"):
            c = (total + np.sqrt((self.n1 - self.n2) ** 2 + 4 * np.abs(self.rho12) ** 2)) / (2 * total)
        return np.where(total > 0, c, np.nan)

    @property
    def epr(self) -> np.ndarray:
        return np.abs(self.rho12) ** 2 - self.n1n2

    @property
    def z(self) -> np.ndarray:
        total = self.n1 + self.n2
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, (self.n1 - self.n2) / total, np.nan)

    @property
    def phi(self) -> np.ndarray:
        return np.where(np.abs(self.rho12) < 1e-12, np.nan, np.mod(np.angle(self.rho12), TWO_PI))

    def to_time_series(self):
        from .dynamics import TimeSeries

        ts = TimeSeries(self.times, self.z, self.phi, self.condensate_fraction, self.epr, self.atoms)
        ts.extra.update(rho12=self.rho12, n1n2=self.n1n2, n1=self.n1, n2=self.n2)
        ts.extra.update({f"stderr_{k}": v for k, v in self.stderr.items()})
        return ts

    @classmethod
    def from_moment_table(cls, times, mean: np.ndarray, err: np.ndarray | None, n_traj: int) -> "EnsembleSeries":
        stderr = {} if err is None else {name: err[:, i] for i, name in enumerate(MOMENT_NAMES)}
        return cls(
            np.asarray(times, dtype=float),
            mean[:, 0],
            mean[:, 1],
            mean[:, 2] + 1j * mean[:, 3],
            mean[:, 4],
            mean[:, 5],
            stderr=stderr,
            n_trajectories=n_traj,
        )


class _UniformStreams:
    """One generator per trajectory, read through per-row buffers."""

    def __init__(self, keys, block: int = 256):
        self.gens = [np.random.default_rng(list(k)) for k in keys]
        self.block = block
        self.buf = np.empty((len(self.gens), block))
        for i, g in enumerate(self.gens):
            self.buf[i] = g.random(block)
        self.pos = np.zeros(len(self.gens), dtype=np.int64)

    def take(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        empty = rows[self.pos[rows] >= self.block]
        for i in np.unique(empty):
            self.buf[i] = self.gens[i].random(self.block)
            self.pos[i] = 0
        out = self.buf[rows, self.pos[rows]]
        self.pos[rows] += 1
        return out


class _Accumulator:
    """Per-group sums of moments and their squares at each record time."""

    def __init__(self, n_groups: int, n_times: int):
        self.n_groups = n_groups
        self.s1 = np.zeros((n_groups, n_times, len(MOMENT_NAMES)))
        self.s2 = np.zeros_like(self.s1)
        self.count = np.zeros((n_groups, n_times))

    def add(self, ti: int, groups: np.ndarray, moments: np.ndarray, weight: float = 1.0):
        for j in range(moments.shape[1]):
            col = moments[:, j]
            self.s1[:, ti, j] += weight * np.bincount(groups, col, minlength=self.n_groups)
            self.s2[:, ti, j] += weight * np.bincount(groups, col * col, minlength=self.n_groups)
        self.count[:, ti] += weight * np.bincount(groups, minlength=self.n_groups)

    def mean_and_error(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.count[..., None]
        mean = self.s1 / n
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.clip(self.s2 / n - mean**2, 0.0, None) * n / np.maximum(n - 1, 1)
            err = np.where(n > 1, np.sqrt(var / n), 0.0)
        return mean, err


def _segment_edges(t_start: float, t_grid: np.ndarray, schedule: LossSchedule) -> np.ndarray:
    pts = set(float(t) for t in t_grid if t > t_start)
    pts.update(t for t in schedule.breakpoints() if t_start < t < t_grid[-1])
    return np.array(sorted(pts))


def _step_segment(psi, m, rows_key, cache, streams, g1, g2, length, dt):
    """Literal fixed-step jump algorithm across one constant-rate segment."""
    n_steps = max(1, int(math.ceil(length / dt - 1e-9)))
    h = length / n_steps
    idx = np.arange(psi.shape[0])
    for _ in range(n_steps):
        mom = _padded_moments(psi, m)
        dp1 = h * g1 * mom[:, 0]
        dp2 = h * g2 * mom[:, 1]
        if np.any(dp1 + dp2 > MAX_STEP_PROBABILITY):
            raise StepSizeError(f"jump probability {np.max(dp1 + dp2):.3g} per step; reduce dt")
        r = streams.take(rows_key)
        j1 = r < dp1
        j2 = ~j1 & (r < dp1 + dp2)
        drift = ~(j1 | j2)
        drifting = idx[drift]
        for mv, sel in _groups(m[drifting]):
            rows = drifting[sel]
            psi[rows] = cache.apply(psi[rows], int(mv), g1, g2, h)
        for well, mask in ((1, j1), (2, j2)):
            if np.any(mask):
                psi[mask] = _annihilate(psi[mask], m[mask], well)
                m[mask] -= 1
        psi /= np.sqrt(np.sum(psi.real**2 + psi.imag**2, axis=1))[:, None]


def _groups(key: np.ndarray):
    """(value, indices) for each distinct value of ``key``, via one sort."""
    if key.size == 0:
        return []
    order = np.argsort(key, kind="stable")
    sk = key[order]
    cuts = np.flatnonzero(sk[1:] != sk[:-1]) + 1
    starts = np.concatenate([[0], cuts])
    return [(sk[s], idx) for s, idx in zip(starts, np.split(order, cuts))]


def _lowbit(p: np.ndarray, full: int) -> np.ndarray:
    lb = p & -p
    return np.where(p == 0, full, lb)


class _DyadicTable:
    """exp(-i H'_m 2^l u) for l = 0..levels, filled per atom number on demand.

    Matrices are padded to the full dimension and stored transposed, so a batch
    of rows with mixed m is advanced by one gathered batched product.
    """

    def __init__(self, params: DimerParams, gamma1: float, gamma2: float, unit: float, levels: int):
        d = params.n_atoms + 1
        self.params = params
        self.rates = (gamma1, gamma2)
        self.unit = unit
        self.levels = levels
        self.mats = np.zeros((d, levels + 1, d, d), dtype=complex)
        self.ready = np.zeros(d, dtype=bool)

    def ensure(self, ms: np.ndarray):
        for mv in np.unique(ms):
            if self.ready[mv]:
                continue
            h = effective_hamiltonian(int(mv), self.params.tunneling, self.params.interaction, *self.rates)
            for lv in range(self.levels + 1):
                self.mats[mv, lv, : mv + 1, : mv + 1] = expm(-1j * (self.unit * 2**lv) * h).T
            self.ready[mv] = True

    def apply(self, psi: np.ndarray, m: np.ndarray, lv: np.ndarray) -> np.ndarray:
        return np.matmul(psi[:, None, :], self.mats[m, lv])[:, 0, :]


def _waiting_segment(psi, m, thresh, rows_key, cache, streams, g1, g2, length, tables=None):
    """Continuous-time jumps across one constant-rate segment.

    ``psi`` rows are unnormalised; a jump happens when the squared norm drops
    to the row's threshold. Each row advances through dyadic pieces of the
    segment; a piece that crosses the threshold is halved until it is one
    unit (length / 2^BISECTION_LEVELS) long, and the jump is placed at its end.
    Norms only decrease under H', so checking piece endpoints misses no crossing.
    """
    levels = BISECTION_LEVELS
    full = 1 << levels
    key = (g1, g2, length)
    table = None if tables is None else tables.get(key)
    if table is None:
        table = _DyadicTable(cache.params, g1, g2, length / full, levels)
        if tables is not None:
            tables[key] = table
    n_rows = psi.shape[0]
    pos = np.zeros(n_rows, dtype=np.int64)
    cap = np.full(n_rows, full, dtype=np.int64)
    first = True
    while True:
        act = np.arange(n_rows) if first else np.nonzero(pos < full)[0]
        if act.size == 0:
            break
        if first:
            # whole segment for everybody: grouped products are cheaper than gathers
            trial = np.empty((act.size, psi.shape[1]), dtype=complex)
            for mv, sel in _groups(m):
                trial[sel] = cache.apply(psi[sel], int(mv), g1, g2, length)
            piece = np.full(act.size, full, dtype=np.int64)
            first = False
        elif act.size <= GATHER_BELOW:
            piece = np.minimum(cap[act], _lowbit(pos[act], full))
            lv = np.log2(piece).astype(np.int64)
            table.ensure(m[act])
            trial = table.apply(psi[act], m[act], lv)
        else:
            piece = np.minimum(cap[act], _lowbit(pos[act], full))
            trial = np.empty((act.size, psi.shape[1]), dtype=complex)
            for kv, sel in _groups(m[act] * (full + 1) + piece):
                mv, pc = divmod(int(kv), full + 1)
                trial[sel] = cache.apply(psi[act[sel]], mv, g1, g2, pc * (length / full))
        nsq = np.sum(trial.real**2 + trial.imag**2, axis=1)
        ok = nsq >= thresh[act]
        acc = act[ok]
        psi[acc] = trial[ok]
        pos[acc] += piece[ok]
        cap[acc] = full
        bad = ~ok
        halve = bad & (piece > 1)
        cap[act[halve]] = piece[halve] // 2
        jump = bad & (piece == 1)
        jumpers = act[jump]
        if jumpers.size:
            psi[jumpers] = trial[jump]
            pos[jumpers] += 1
            cap[jumpers] = full
            _jump_rows(psi, m, jumpers, rows_key, streams, g1, g2)
            thresh[jumpers] = streams.take(rows_key[jumpers])


def _jump_rows(psi, m, rows, rows_key, streams, g1, g2):
    """Pick the well with probability proportional to g_j <n_j>, jump, renormalise."""
    mom = _padded_moments(psi[rows], m[rows])
    w1 = g1 * mom[:, 0]
    w2 = g2 * mom[:, 1]
    u = streams.take(rows_key[rows])
    well1 = u * (w1 + w2) < w1
    for well, mask in ((1, well1), (2, ~well1)):
        sel = rows[mask]
        if sel.size:
            psi[sel] = _annihilate(psi[sel], m[sel], well)
            m[sel] -= 1
    sub = psi[rows]
    psi[rows] = sub / np.sqrt(np.sum(sub.real**2 + sub.imag**2, axis=1))[:, None]


def _unitary_rows(eig, amps0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Fock amplitudes of every initial row at every time, shape (rows, times, dim)."""
    coeff = amps0 @ eig.vectors
    ph = np.exp(-1j * np.outer(times, eig.energies))
    return np.einsum("rk,tk,jk->rtj", coeff, ph, eig.vectors)


def ensemble_moments(
    states0: np.ndarray,
    params: DimerParams,
    schedule: LossSchedule,
    config: JumpConfig,
    t_grid,
    stream_base: tuple = (),
    group_offset: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Averaged moments for each initial state in ``states0`` (rows, N+1).

    Returns (mean, stderr) with shape (rows, len(t_grid), 6). Trajectory i of
    initial state g draws from the stream seeded by
    (seed, *stream_base, group_offset + g, i), so results do not depend on how
    callers split the initial states into batches.
    Before the first loss window every trajectory of an initial state is the
    same unitary evolution, so that stretch is computed once per state.
    """
    states0 = np.atleast_2d(np.asarray(states0, dtype=complex))
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at t >= 0")
    if states0.shape[1] != params.n_atoms + 1:
        raise ValueError("initial states have the wrong dimension")
    n_groups = states0.shape[0]
    n_traj = config.n_trajectories
    dt = config.resolve_dt(params, schedule)
    t_loss = schedule.first_loss_time

    acc = _Accumulator(n_groups, t_grid.size)
    eig = diagonalize(params)
    full_m = np.full(n_groups, params.n_atoms)
    pre = t_grid <= t_loss if math.isfinite(t_loss) else np.ones(t_grid.size, bool)
    pre_idx = np.nonzero(pre)[0]
    groups = np.arange(n_groups)
    for ti in pre_idx:
        amps = _unitary_rows(eig, states0, t_grid[ti : ti + 1])[:, 0, :]
        acc.add(ti, groups, _padded_moments(amps, full_m), weight=n_traj)
    if pre.all():
        mean, err = acc.mean_and_error()
        return mean, err

    t_start = max(t_loss, 0.0)
    start_amps = _unitary_rows(eig, states0, np.array([t_start]))[:, 0, :]
    edges = _segment_edges(t_start, t_grid, schedule)
    record_at = {float(t): i for i, t in enumerate(t_grid) if not pre[i]}
    cache = PropagatorCache(params)

    total = n_groups * n_traj
    for lo in range(0, total, config.chunk_size):
        flat = np.arange(lo, min(total, lo + config.chunk_size))
        g_of = flat // n_traj
        keys = [(config.rng_seed, *stream_base, group_offset + int(g), int(i)) for g, i in zip(g_of, flat % n_traj)]
        streams = _UniformStreams(keys)
        rows_key = np.arange(flat.size)
        psi = start_amps[g_of].copy()
        m = np.full(flat.size, params.n_atoms, dtype=np.int64)
        thresh = streams.take(rows_key) if config.method == "waiting" else None
        tables = {}
        t = t_start
        for t_next in edges:
            g1, g2 = schedule.rates_at(0.5 * (t + t_next))
            length = t_next - t
            if g1 == 0 and g2 == 0:
                for mv, sel in _groups(m):
                    psi[sel] = cache.apply(psi[sel], int(mv), 0.0, 0.0, length)
            elif config.method == "step":
                _step_segment(psi, m, rows_key, cache, streams, g1, g2, length, dt)
            else:
                _waiting_segment(psi, m, thresh, rows_key, cache, streams, g1, g2, length, tables)
            t = t_next
            ti = record_at.get(float(t_next))
            if ti is not None:
                acc.add(ti, g_of, _padded_moments(psi, m))
    return acc.mean_and_error()


def run_ensemble(state0: StateVector, params: DimerParams, schedule: LossSchedule, config: JumpConfig, t_grid) -> EnsembleSeries:
    if state0.n_atoms != params.n_atoms:
        raise ValueError("state and parameters have different atom numbers")
    mean, err = ensemble_moments(state0.amplitudes[None, :], params, schedule, config, t_grid)
    return EnsembleSeries.from_moment_table(t_grid, mean[0], err[0], config.n_trajectories)


def run_trajectory(state0: StateVector, params: DimerParams, schedule: LossSchedule, config: JumpConfig, t_grid):
    """One stochastic realisation (trajectory index 0 of the seed) as a TimeSeries."""
    single = JumpConfig(config.dt, config.rng_seed, 1, config.record_stride, config.method, config.chunk_size)
    series = run_ensemble(state0, params, schedule, single, t_grid).to_time_series()
    for key in [k for k in series.extra if k.startswith("stderr_")]:
        del series.extra[key]
    return series


# ---------------------------------------------------------------- master equation reference

ORACLE_MAX_ATOMS = 12


def _block_offsets(n_atoms: int) -> np.ndarray:
    sizes = np.arange(1, n_atoms + 2) ** 2
    return np.concatenate([[0], np.cumsum(sizes)])


def lindblad_superoperator(params: DimerParams, gamma1: float, gamma2: float) -> np.ndarray:
    """Generator on the direct sum of density matrices rho_m, m = 0..N (row-major vec)."""
    n_atoms = params.n_atoms
    off = _block_offsets(n_atoms)
    dim = off[-1]
    sup = np.zeros((dim, dim), dtype=complex)
    for m in range(n_atoms + 1):
        d = m + 1
        hp = effective_hamiltonian(m, params.tunneling, params.interaction, gamma1, gamma2)
        eye = np.eye(d)
        blk = -1j * np.kron(hp, eye) + 1j * np.kron(eye, np.conj(hp))
        sup[off[m] : off[m + 1], off[m] : off[m + 1]] = blk
        if m < n_atoms:
            k = np.arange(d)
            # a1 and a2 as (m+1) x (m+2) maps from the m+1 block
            a1 = np.zeros((d, d + 1))
            a1[k, k + 1] = np.sqrt(k + 1.0)
            a2 = np.zeros((d, d + 1))
            a2[k, k] = np.sqrt(m + 1.0 - k)
            feed = gamma1 * np.kron(a1, a1) + gamma2 * np.kron(a2, a2)
            sup[off[m] : off[m + 1], off[m + 1] : off[m + 2]] = feed
    return sup


def _rk4_step_matrix(sup: np.ndarray, h: float) -> np.ndarray:
    a = h * sup
    step = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, 5):
        term = term @ a / k
        step = step + term
    return step


def _symmetrize(vec: np.ndarray, n_atoms: int) -> np.ndarray:
    off = _block_offsets(n_atoms)
    out = vec.copy()
    for m in range(n_atoms + 1):
        d = m + 1
        blk = vec[off[m] : off[m + 1]].reshape(d, d)
        out[off[m] : off[m + 1]] = (0.5 * (blk + blk.conj().T)).ravel()
    return out


def _density_moments(vec: np.ndarray, n_atoms: int) -> np.ndarray:
    off = _block_offsets(n_atoms)
    out = np.zeros(len(MOMENT_NAMES) + 1)
    for m in range(n_atoms + 1):
        d = m + 1
        rho = vec[off[m] : off[m + 1]].reshape(d, d)
        p = np.real(np.diag(rho))
        k = np.arange(d, dtype=float)
        r12 = np.sum(rho[:-1, 1:].diagonal() * hopping_elements(m)) if m > 0 else 0.0
        # <a1^dag a2> = sum_n sqrt((n+1)(m-n)) rho_{n, n+1}
        out[0] += p @ k
        out[1] += p @ (m - k)
        out[2] += np.real(r12)
        out[3] += np.imag(r12)
        out[4] += p @ (k * (m - k))
        out[5] += m * p.sum()
        out[6] += p.sum()
    return out


def master_equation_oracle(
    state0: StateVector,
    params: DimerParams,
    schedule: LossSchedule,
    t_grid,
    dt: float | None = None,
) -> EnsembleSeries:
    """RK4 integration of the loss master equation over all atom-number sectors.

    The generator is linear and constant between breakpoints, so one RK4 step
    is a fixed matrix T(h); n steps are applied as T(h)^n by repeated squaring.
    Hermiticity is restored by symmetrisation at every recorded time.
    """
    n_atoms = params.n_atoms
    if n_atoms > ORACLE_MAX_ATOMS:
        raise ValueError(f"master-equation reference is limited to N <= {ORACLE_MAX_ATOMS}")
    if state0.n_atoms != n_atoms:
        raise ValueError("state and parameters have different atom numbers")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or t_grid[0] < 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing and start at t >= 0")
    if dt is None:
        dt = 1e-5
    off = _block_offsets(n_atoms)
    vec = np.zeros(off[-1], dtype=complex)
    psi = state0.amplitudes
    vec[off[n_atoms] :] = np.outer(psi, psi.conj()).ravel()

    sups = {}
    steps = {}
    edges = sorted(set([0.0] + [float(t) for t in t_grid] + [t for t in schedule.breakpoints() if t < t_grid[-1]]))
    out = np.zeros((t_grid.size, len(MOMENT_NAMES)))
    traces = np.zeros(t_grid.size)
    record_at = {float(t): i for i, t in enumerate(t_grid)}
    if 0.0 in record_at:
        mom = _density_moments(vec, n_atoms)
        out[record_at[0.0]], traces[record_at[0.0]] = mom[:6], mom[6]
    for a, b in zip(edges, edges[1:]):
        rates = schedule.rates_at(0.5 * (a + b))
        if rates not in sups:
            sups[rates] = lindblad_superoperator(params, *rates)
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / n
        key = (rates, n, h)
        if key not in steps:
            steps[key] = np.linalg.matrix_power(_rk4_step_matrix(sups[rates], h), n)
        vec = _symmetrize(steps[key] @ vec, n_atoms)
        i = record_at.get(b)
        if i is not None:
            mom = _density_moments(vec, n_atoms)
            out[i], traces[i] = mom[:6], mom[6]
    if np.max(np.abs(traces - 1.0)) > 1e-8:
        raise StepSizeError(f"master-equation trace drift {np.max(np.abs(traces - 1)):.2e}")
    series = EnsembleSeries.from_moment_table(t_grid, out, np.zeros_like(out), n_traj=0)
    series.stderr["trace"] = traces
    return series
