"""Dynamics from (z, phi) = (0.95, pi): exact, three-state truncation and mean field."""

import math

import numpy as np
from script_io import out_dir, save

from bhdimer.dynamics import observable_series, power_spectrum, truncate_to_top_k
from bhdimer.meanfield import MeanFieldState, integrate_meanfield
from bhdimer.model import DimerParams, PhasePoint, coherent_state
from bhdimer.spectra import diagonalize

params = DimerParams.from_lambda(40, 10.0, 5.0)
eig = diagonalize(params)
s0 = coherent_state(params, PhasePoint(0.95, math.pi))
t = np.round(np.arange(501) * 0.01, 10)
exact = observable_series(s0, eig, t)
three = observable_series(truncate_to_top_k(s0, eig, 3), eig, t)
mf = integrate_meanfield(MeanFieldState(0.95, math.pi), params, t)
dest = out_dir("fixed_point_dynamics")
save(dest / "dynamics.csv",
     ["t", "z", "c", "epr", "z_three_state", "c_three_state", "epr_three_state", "z_meanfield"],
     [t, exact.z, exact.condensate_fraction, exact.epr, three.z, three.condensate_fraction, three.epr, mf.z],
     {"z0": 0.95, "phi0": math.pi, "lambda": params.lam})
spec = power_spectrum(exact.condensate_fraction, t)
save(dest / "spectrum_c.csv", ["f", "power"], [spec.frequencies, spec.power])
print("strongest peaks (Hz):", [round(f, 3) for f, _ in spec.peaks[:4]])
