"""Share of 500 coherent initial states with EPR > 0 over time, with and without a loss pulse.

Two loss estimates are written: EPR of the 200-trajectory averaged moments per
initial state, and EPR of a single stochastic realisation per initial state.
"""

import numpy as np
from script_io import out_dir, save

from bhdimer.dissipation import JumpConfig, LossSchedule
from bhdimer.model import DimerParams
from bhdimer.phasespace import entangled_fraction, sample_grid
from bhdimer.revival import revival_markers
from bhdimer.spectra import beats_near_fixed_point, diagonalize

params = DimerParams.from_lambda(40, 10.0, 5.0)
grid = sample_grid(500)
t = np.round(np.arange(121) * 0.025, 10)
loss = LossSchedule.single(2, 5 * params.tunneling, 1.0, 1.25)
free = entangled_fraction(params, grid, t)
ens = entangled_fraction(params, grid, t, loss, JumpConfig(method="waiting", n_trajectories=200))
single = entangled_fraction(params, grid, t, loss, JumpConfig(method="waiting", n_trajectories=1, rng_seed=5))
period = 1.0 / beats_near_fixed_point(diagonalize(params)).f_slow
marker = np.isin(np.arange(t.size), [np.argmin(abs(t - m)) for m in revival_markers(t[-1], period)])
save(out_dir("entangled_fraction") / "fraction.csv",
     ["t", "no_loss", "loss_ensemble", "loss_single_realisation", "revival_marker"],
     [t, free.fraction, ens.fraction, single.fraction, marker],
     {"n_samples": free.n_samples, "revival_period": period, "loss": [2, 50.0, 1.0, 1.25]})
for tt in (1.6, 2.2, 2.8):
    i = int(np.argmin(abs(t - tt)))
    print(f"t={tt}: no loss {free.fraction[i]:.3f}  ensemble {ens.fraction[i]:.3f}  single {single.fraction[i]:.3f}")
