"""Loss pulse on well 2 during [1, 1.5] s from (0.95, pi): ensemble and single trajectories."""

import math

import numpy as np
from script_io import out_dir, save

from bhdimer.dissipation import JumpConfig, LossSchedule, run_ensemble, run_trajectory
from bhdimer.dynamics import observable_series
from bhdimer.model import DimerParams, PhasePoint, coherent_state
from bhdimer.spectra import diagonalize

params = DimerParams.from_lambda(40, 10.0, 5.0)
s0 = coherent_state(params, PhasePoint(0.95, math.pi))
t = np.round(np.arange(401) * 0.01, 10)
loss = LossSchedule.single(2, 5 * params.tunneling, 1.0, 1.5)
dest = out_dir("loss_dynamics")
free = observable_series(s0, diagonalize(params), t)
ens = run_ensemble(s0, params, loss, JumpConfig(n_trajectories=200, method="waiting"), t)
save(dest / "ensemble.csv", ["t", "c_no_loss", "epr_no_loss", "c_ensemble", "epr_ensemble", "atoms_ensemble"],
     [t, free.condensate_fraction, free.epr, ens.condensate_fraction, ens.epr, ens.atoms])
late = t >= 2
print(f"ensemble: mean c[2,4] {ens.condensate_fraction[late].mean():.5f} vs {free.condensate_fraction[late].mean():.5f}, "
      f"EPR>0 {100 * np.mean(ens.epr[late] > 0):.0f}%")
for seed in range(12):
    tr = run_trajectory(s0, params, loss, JumpConfig(rng_seed=seed, method="waiting"), t)
    save(dest / f"trajectory_{seed}.csv", ["t", "z", "c", "epr", "atoms"],
         [t, tr.z, tr.condensate_fraction, tr.epr, tr.atom_count])
    print(f"seed {seed}: lost {40 - tr.atom_count[-1]:.0f}, mean c[2,4] {tr.condensate_fraction[late].mean():.5f}, "
          f"EPR>0 {100 * np.mean(tr.epr[late] > 0):.0f}%")
