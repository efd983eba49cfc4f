"""Command-line front end.

    bhdimer spectrum | evolve | scan | frequencies | entangled-fraction | verify [options]

Options may also come from a flat ``key = value`` file given with ``--config``;
command-line flags win. Output goes to ``--out`` or, if absent, to
``<command>.<format>`` inside $BHDIMER_OUTPUT_DIR (default: the current
directory). Every data file gets a ``.meta.json`` sidecar holding the resolved
configuration and the package version.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, OutOfRegimeError
from .model import DimerParams, PhasePoint, coherent_state

OUTPUT_DIR_ENV = "BHDIMER_OUTPUT_DIR"
COMMANDS = ("spectrum", "evolve", "scan", "frequencies", "entangled-fraction", "verify")
FLOAT_FMT = "{:.15e}"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

# per-command defaults for options whose sensible value depends on the experiment
COMMAND_DEFAULTS = {
    "spectrum": {},
    "evolve": {"t_final": 5.0, "dt_record": 0.01, "method": "step", "trajectories": 200},
    "scan": {"t_final": 1.0, "observable": "condensate_fraction"},
    "frequencies": {"t_final": 20.0, "dt_record": 0.01},
    "entangled-fraction": {"t_final": 3.0, "dt_record": 0.005, "method": "waiting", "trajectories": 200},
    "verify": {"trajectories": 2000},
}


class ConfigError(ValueError):
    pass


class VerificationFailed(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "spectrum"
    n_atoms: int = 40
    tunneling: float = 10.0
    interaction: float | None = None
    lam: float | None = None
    z0: float = 0.95
    phi0: float = math.pi
    t_final: float = 1.0
    dt_record: float = 0.01
    grid: str = "101x101"
    samples: int = 500
    trajectories: int = 200
    seed: int = 0
    loss: list = field(default_factory=list)
    out: str | None = None
    format: str = "csv"
    threads: int | None = None
    observable: str = "condensate_fraction"
    k: int = 3
    lambdas: str = "1.5,2,3,5,8,13,21"
    method: str = "step"
    dt: float | None = None
    propagator: str = "spectral"
    project_k: int | None = None
    measure: bool = False
    max_atoms: int = 12

    def params(self) -> DimerParams:
        if (self.interaction is None) == (self.lam is None):
            raise ConfigError("give exactly one of --interaction or --lambda")
        if self.lam is not None:
            return DimerParams.from_lambda(self.n_atoms, self.tunneling, self.lam)
        return DimerParams(self.n_atoms, self.tunneling, self.interaction)

    def point(self) -> PhasePoint:
        return PhasePoint(self.z0, self.phi0)

    def grid_shape(self) -> tuple[int, int]:
        parts = str(self.grid).lower().split("x")
        try:
            dims = [int(p) for p in parts]
        except ValueError:
            raise ConfigError(f"grid must look like 101x101, got {self.grid!r}") from None
        if len(dims) == 1:
            dims = dims * 2
        if len(dims) != 2 or min(dims) < 1:
            raise ConfigError(f"grid must look like 101x101, got {self.grid!r}")
        return dims[0], dims[1]

    def workers(self) -> int:
        return self.threads or os.cpu_count() or 1

    def record_grid(self) -> np.ndarray:
        if not self.dt_record > 0 or not self.t_final > 0:
            raise ConfigError("t-final and dt-record must be positive")
        n = int(math.floor(self.t_final / self.dt_record + 1e-9))
        return np.round(np.arange(n + 1) * self.dt_record, 12)

    def schedule(self):
        from .dissipation import LossSchedule

        return LossSchedule.from_specs([parse_loss(s, self.tunneling) for s in self.loss])

    def jump_config(self, n_trajectories: int | None = None):
        from .dissipation import JumpConfig

        return JumpConfig(
            dt=self.dt,
            rng_seed=self.seed,
            n_trajectories=n_trajectories or self.trajectories,
            method=self.method,
        )


def parse_loss(spec: str, tunneling: float) -> tuple[int, float, float, float]:
    """'well:rate:t0:t1'; a rate ending in J is in units of the tunneling rate."""
    parts = str(spec).split(":")
    if len(parts) != 4:
        raise ConfigError(f"loss spec must be well:rate:t0:t1, got {spec!r}")
    try:
        well = int(parts[0])
        rate_s = parts[1].strip()
        rate = float(rate_s[:-1]) * tunneling if rate_s.upper().endswith("J") else float(rate_s)
        t0, t1 = float(parts[2]), float(parts[3])
    except ValueError:
        raise ConfigError(f"cannot parse loss spec {spec!r}") from None
    if well not in (1, 2) or rate < 0 or not t1 > t0:
        raise ConfigError(f"invalid loss spec {spec!r}")
    return well, rate, t0, t1


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; repeated ``loss`` keys accumulate."""
    out: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if key == "loss":
            out.setdefault("loss", []).append(value)
        else:
            out[key] = value
    return out


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown option {key!r}")
    if value is None or key in ("loss", "command"):
        return value
    typ = _FIELD_TYPES[key]
    try:
        if "bool" in typ:
            if isinstance(value, bool):
                return value
            return str(value).strip().lower() in ("1", "true", "yes", "on")
        if "int" in typ:
            return int(value)
        if "float" in typ:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return str(value)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--n-atoms", type=int)
    g.add_argument("--tunneling", type=float, help="J in 1/s")
    inter = g.add_mutually_exclusive_group()
    inter.add_argument("--interaction", type=float, help="U in 1/s")
    inter.add_argument("--lambda", dest="lam", type=float, help="Lambda = U(N-1)/(2J)")
    e = common.add_argument_group("experiment")
    e.add_argument("--z0", type=float)
    e.add_argument("--phi0", type=float)
    e.add_argument("--t-final", type=float)
    e.add_argument("--dt-record", type=float)
    e.add_argument("--grid", help="NZxNPHI, e.g. 101x101")
    e.add_argument("--samples", type=int)
    e.add_argument("--trajectories", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--loss", action="append", help="well:rate:t0:t1, repeatable; rate may be given as e.g. 5J")
    e.add_argument("--method", choices=("step", "waiting"))
    e.add_argument("--dt", type=float, help="integration step (s): jump step for the step method, RK4 step for --propagator rk4")
    e.add_argument("--observable", choices=("condensate_fraction", "epr", "z", "projection_norm", "husimi"))
    e.add_argument("--k", type=int, help="number of eigenstates kept in projections")
    e.add_argument("--lambdas", help="comma-separated Lambda values for frequencies")
    e.add_argument("--propagator", choices=("spectral", "rk4"))
    e.add_argument("--project-k", type=int, help="evolve only the k dominant eigencomponents")
    e.add_argument("--measure", action="store_const", const=True, help="frequencies: also measure spectral peaks")
    e.add_argument("--max-atoms", type=int)
    o = common.add_argument_group("output")
    o.add_argument("--out")
    o.add_argument("--format", choices=("csv", "json"))
    o.add_argument("--threads", type=int)
    o.add_argument("--config", help="flat key = value file; flags override it")

    parser = _Parser(prog="bhdimer", description="Bose-Hubbard dimer simulations")
    parser.add_argument("--version", action="version", version=f"bhdimer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "spectrum": "energies, top-k projection and beat frequencies",
        "evolve": "time series of observables (unitary or with loss)",
        "scan": "observable over a (z, phi) grid of coherent initial states",
        "frequencies": "exact, mean-field and perturbative frequencies over a Lambda sweep",
        "entangled-fraction": "fraction of initial conditions with EPR > 0 over time",
        "verify": "revival, parity and trajectory-vs-master-equation checks",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values = {k: v for k, v in asdict(RunConfig()).items()}
    values.update(COMMAND_DEFAULTS.get(ns.command, {}))
    if ns.config:
        file_vals = read_config_file(ns.config)
        for key, val in file_vals.items():
            values[key] = _coerce(key, val)
        if "interaction" in file_vals and "lam" in file_vals:
            raise ConfigError("config file gives both interaction and lambda")
    flags = {k: v for k, v in vars(ns).items() if k not in ("config", "command") and v is not None}
    # a model flag replaces whichever of interaction / lambda came from the file
    if "interaction" in flags:
        values["lam"] = None
    if "lam" in flags:
        values["interaction"] = None
    values.update(flags)
    values["command"] = ns.command
    if values["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    return RunConfig(**values)


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def output_path(cfg: RunConfig, suffix: str | None = None) -> Path:
    if cfg.out:
        return Path(cfg.out)
    base = Path(os.environ.get(OUTPUT_DIR_ENV, "."))
    ext = suffix or cfg.format
    return base / f"{cfg.command}.{ext}"


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_table(cfg: RunConfig, columns: list, rows, meta: dict) -> Path:
    path = output_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    resolved = _jsonable(asdict(cfg))
    full_meta = {"command": cfg.command, "version": __version__, "config": resolved, "columns": columns}
    full_meta.update(_jsonable(meta))
    if cfg.format == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    else:
        payload = dict(full_meta)
        payload["rows"] = [dict(zip(columns, _jsonable(list(r)))) for r in rows]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(full_meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------- commands


def cmd_spectrum(cfg: RunConfig) -> Path:
    from .spectra import beats_near_fixed_point, diagonalize, energy_levels, project_top_k, top_k_indices

    params = cfg.params()
    eig = diagonalize(params)
    rows = [("energy", i, e) for i, e in enumerate(eig.energies)]
    rows += [("level", i, e) for i, e in enumerate(energy_levels(eig))]
    k = min(cfg.k, params.n_atoms + 1)
    state = coherent_state(params, cfg.point())
    coeffs, norm_sq = project_top_k(state, eig, k)
    idx = top_k_indices(state, eig, k)
    for rank, (i, c) in enumerate(zip(idx, coeffs)):
        rows += [("top_eigen_index", rank, int(i)), ("top_coefficient_abs", rank, abs(c)),
                 ("top_coefficient_re", rank, c.real), ("top_coefficient_im", rank, c.imag)]
    rows.append(("top_norm_sq", k, norm_sq))
    meta = {"beats": None}
    try:
        b = beats_near_fixed_point(eig)
        beats = {"f_fast": b.f_fast, "f_mid": b.f_mid, "f_sum": b.f_sum, "f_slow": b.f_slow}
        rows += [(name, "", v) for name, v in beats.items()]
        meta["beats"] = beats
    except OutOfRegimeError as exc:
        meta["beats_skipped"] = str(exc)
    return write_table(cfg, ["quantity", "index", "value"], rows, meta)


def cmd_evolve(cfg: RunConfig) -> Path:
    from .dissipation import run_ensemble
    from .dynamics import evolve_rk4, observable_series, truncate_to_top_k
    from .spectra import diagonalize

    params = cfg.params()
    times = cfg.record_grid()
    state = coherent_state(params, cfg.point())
    eig = diagonalize(params)
    if cfg.project_k:
        state = truncate_to_top_k(state, eig, cfg.project_k, normalize=False)
    schedule = cfg.schedule()
    cols = ["t", "z", "phi", "c", "epr", "atoms"]
    meta: dict = {"mode": "unitary"}
    if cfg.loss and not schedule.is_zero:
        series = run_ensemble(state, params, schedule, cfg.jump_config(), times)
        err_names = list(series.stderr)
        cols += [f"stderr_{n}" for n in err_names]
        data = [times, series.z, series.phi, series.condensate_fraction, series.epr, series.atoms]
        data += [series.stderr[n] for n in err_names]
        meta = {"mode": "ensemble", "n_trajectories": series.n_trajectories, "method": cfg.method,
                "schedule": [asdict(w) for w in schedule.windows]}
    elif cfg.propagator == "rk4":
        from .model import _observables

        amps = []
        psi = state
        prev = 0.0
        for t in times:
            psi = evolve_rk4(psi, params, t - prev, dt=cfg.dt)
            prev = t
            amps.append(psi.amplitudes)
        obs = _observables(np.array(amps))
        data = [times, obs["z"], obs["phi"], obs["condensate_fraction"], obs["epr"], obs["atom_count"]]
        meta["propagator"] = "rk4"
    else:
        ts = observable_series(state, eig, times)
        data = [times, ts.z, ts.phi, ts.condensate_fraction, ts.epr, ts.atom_count]
        meta["propagator"] = "spectral"
    return write_table(cfg, cols, zip(*data), meta)


def cmd_scan(cfg: RunConfig) -> Path:
    from .fields import PhaseGrid
    from .phasespace import husimi_field, scan_observable
    from .spectra import diagonalize, projection_norm_field

    params = cfg.params()
    n_z, n_phi = cfg.grid_shape()
    grid = PhaseGrid.uniform(n_z, n_phi)
    if cfg.observable == "projection_norm":
        f = projection_norm_field(params, grid, k=cfg.k)
    elif cfg.observable == "husimi":
        from .dynamics import evolve_spectral

        eig = diagonalize(params)
        state = evolve_spectral(coherent_state(params, cfg.point()), eig, cfg.t_final)
        f = husimi_field(state, grid)
    else:
        f = scan_observable(params, grid, cfg.t_final, cfg.observable, workers=cfg.workers())
    meta = {"observable": f.observable, "grid_shape": list(grid.shape), "t_final": cfg.t_final}
    return write_table(cfg, ["z", "phi", "value"], f.long_form(), meta)


def frequency_table(params_list, measure: bool = False, t_final: float = 20.0, dt_record: float = 0.01):
    """Rows of exact, mean-field and perturbative frequencies, one per parameter set."""
    from .dynamics import observable_series, power_spectrum
    from .meanfield import f_mf, self_trapping_z
    from .perturb import perturbative_frequencies, zeroth_order_frequencies
    from .spectra import beats_near_fixed_point, diagonalize

    nan = float("nan")
    rows = []
    for p in params_list:
        lam = p.lam
        eig = diagonalize(p)
        try:
            b = beats_near_fixed_point(eig)
            exact = (b.f_fast, b.f_mid, b.f_sum, b.f_slow)
        except OutOfRegimeError:
            exact = (nan,) * 4
        try:
            fm = f_mf(p)
        except OutOfRegimeError:
            fm = nan
        try:
            pt2 = perturbative_frequencies(p.n_atoms, p.tunneling, p.interaction)
        except OutOfRegimeError:
            pt2 = (nan, nan)
        pt0 = zeroth_order_frequencies(p.n_atoms, p.interaction) if p.n_atoms >= 2 else (nan, nan)
        rel_fast = pt2[0] / exact[0] - 1.0
        rel_slow = pt2[1] / exact[3] - 1.0
        row = [lam, p.interaction, *exact, fm, *pt0, *pt2, rel_fast, rel_slow, rel_fast * lam**4, rel_slow * lam**4]
        if measure:
            peak = nan
            if lam > 1:
                zs = self_trapping_z(lam)
                times = np.round(np.arange(int(round(t_final / dt_record)) + 1) * dt_record, 12)
                state = coherent_state(p, PhasePoint(max(-1.0, zs - 0.1), math.pi))
                ts = observable_series(state, eig, times)
                spec = power_spectrum(ts.condensate_fraction, times)
                hit = [pk for pk in spec.peaks if 0.5 * fm <= pk[0] <= 1.5 * fm]
                peak = hit[0][0] if hit else nan
            row.append(peak)
        rows.append(row)
    cols = ["lambda", "interaction", "f_fast", "f_mid", "f_sum", "f_slow", "f_mf",
            "f_fast_order0", "f_slow_order0", "f_fast_order2", "f_slow_order2",
            "rel_err_fast", "rel_err_slow", "rel_err_fast_x_lambda4", "rel_err_slow_x_lambda4"]
    if measure:
        cols.append("f_peak_condensate")
    return cols, rows


def cmd_frequencies(cfg: RunConfig) -> Path:
    try:
        lams = [float(x) for x in str(cfg.lambdas).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse lambdas {cfg.lambdas!r}") from None
    if not lams or cfg.n_atoms < 2:
        raise ConfigError("frequencies needs N >= 2 and at least one Lambda")
    plist = [DimerParams.from_lambda(cfg.n_atoms, cfg.tunneling, lam) for lam in lams]
    cols, rows = frequency_table(plist, cfg.measure, cfg.t_final, cfg.dt_record)
    return write_table(cfg, cols, rows, {"n_atoms": cfg.n_atoms, "tunneling": cfg.tunneling})


def cmd_entangled_fraction(cfg: RunConfig) -> Path:
    from .phasespace import entangled_fraction, sample_grid
    from .revival import revival_markers
    from .spectra import beats_near_fixed_point, diagonalize

    params = cfg.params()
    times = cfg.record_grid()
    grid = sample_grid(cfg.samples)
    free = entangled_fraction(params, grid, times)
    cols = ["t", "fraction"]
    data = [times, free.fraction]
    schedule = cfg.schedule()
    meta: dict = {"n_samples": free.n_samples, "grid_shape": list(grid.shape)}
    if cfg.loss and not schedule.is_zero:
        lossy = entangled_fraction(params, grid, times, schedule, cfg.jump_config(), workers=cfg.workers())
        cols.append("fraction_loss")
        data.append(lossy.fraction)
        meta["schedule"] = [asdict(w) for w in schedule.windows]
        meta["n_trajectories"] = cfg.trajectories
        meta["method"] = cfg.method
    marker = np.zeros(times.size, dtype=int)
    try:
        period = 1.0 / beats_near_fixed_point(diagonalize(params)).f_slow
        marks = revival_markers(times[-1], period)
        for tm in marks:
            marker[int(np.argmin(np.abs(times - tm)))] = 1
        meta["revival_period"] = period
        meta["revival_times"] = marks
    except (OutOfRegimeError, ValueError, ZeroDivisionError):
        meta["revival_period"] = None
    cols.append("revival_marker")
    data.append(marker)
    return write_table(cfg, cols, zip(*data), meta)


def run_verification(max_atoms: int = 12, n_states: int = 50, seed: int = 0, trajectories: int = 2000) -> dict:
    """Revival, parity and trajectory-vs-master-equation checks as a JSON-able report."""
    from .dissipation import JumpConfig, LossSchedule, master_equation_oracle, run_ensemble
    from .perturb import is_even_matrix, is_odd_matrix, verify_odd_order_vanishing
    from .revival import coherence_at_revival, revival_period, verify_observable_revival, verify_wavefunction_revival

    rng = np.random.default_rng(seed)
    checks = []

    def record(name, passed, **info):
        checks.append({"name": name, "passed": bool(passed), **_jsonable(info)})

    for n in range(1, max_atoms + 1):
        wf = obs = flip = double = 0.0
        for _ in range(n_states):
            u = rng.uniform(0.5, 5.0)
            s = coherent_state(n, PhasePoint(rng.uniform(-1, 1), rng.uniform(0, 2 * math.pi)))
            wf = max(wf, verify_wavefunction_revival(n, u, s))
            obs = max(obs, *verify_observable_revival(n, u, s))
            if n % 2 == 0:
                a, b = coherence_at_revival(n, u, s)
                flip = max(flip, abs(a + b))
                from .model import interaction_diagonal

                psi2 = s.amplitudes * np.exp(-2j * interaction_diagonal(n, u) * revival_period(u))
                double = max(double, float(np.max(np.abs(psi2 - s.amplitudes))))
        record(f"revival N={n}", wf < 1e-12 and obs < 1e-10 and flip < 1e-10 and double < 1e-12,
               wavefunction=wf, observables=obs, rho12_flip=flip, double_period=double)

    lemma_ok = True
    for _ in range(100):
        d = int(rng.integers(2, 15))
        i, j = np.indices((d, d))
        even = ((j - i) % 2 == 0).astype(float)
        a = rng.normal(size=(d, d)) * (1 - even)
        b = rng.normal(size=(d, d)) * (1 - even)
        e = rng.normal(size=(d, d)) * even
        lemma_ok &= is_odd_matrix(a) and is_even_matrix(e)
        lemma_ok &= is_even_matrix(a @ b, 1e-12) and is_odd_matrix(a @ e, 1e-12) and is_even_matrix(e @ e, 1e-12)
    record("parity lemmas (100 random instances)", lemma_ok)

    for n in (8, 12, 20):
        for level in range(3):
            rep = verify_odd_order_vanishing(n, level)
            record(f"third order N={n} level={level}", rep.passed, w3_diag_max=rep.w3_diag_max, skipped=rep.skipped)

    p = DimerParams.from_lambda(6, 10.0, 5.0)
    s = coherent_state(p, PhasePoint(-0.3, 1.0))
    sched = LossSchedule.single(2, 2.0, 0.5, 1.0)
    tg = np.linspace(0.1, 2.0, 20)
    ref = master_equation_oracle(s, p, sched, tg)
    ens = run_ensemble(s, p, sched, JumpConfig(rng_seed=seed, n_trajectories=trajectories), tg)
    worst = 0.0
    for name, a, b in (("n1", ens.n1, ref.n1), ("n2", ens.n2, ref.n2)):
        err = ens.stderr[name]
        worst = max(worst, float(np.max(np.abs(a - b) / np.where(err > 0, err, np.inf))))
    record("trajectories vs master equation N=6", worst <= 3.0, max_abs_z=worst, trajectories=trajectories)
    return {"passed": all(c["passed"] for c in checks), "checks": checks}


def cmd_verify(cfg: RunConfig) -> Path:
    report = run_verification(cfg.max_atoms, seed=cfg.seed, trajectories=cfg.trajectories)
    path = output_path(cfg, "json")
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"command": "verify", "version": __version__, "config": _jsonable(asdict(cfg)), **report}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump({"command": "verify", "version": __version__, "config": payload["config"]}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if not report["passed"]:
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        raise VerificationFailed("failed checks: " + ", ".join(failed))
    return path


HANDLERS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "scan": cmd_scan,
    "frequencies": cmd_frequencies,
    "entangled-fraction": cmd_entangled_fraction,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        path = HANDLERS[cfg.command](cfg)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except VerificationFailed as exc:
        print(f"bhdimer: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"bhdimer: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"bhdimer: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
