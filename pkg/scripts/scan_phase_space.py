"""Condensate fraction and EPR over coherent initial states at several times (N=40, Lambda=5)."""

import math

from script_io import out_dir, save

from bhdimer.model import DimerParams
from bhdimer.phasespace import PhaseGrid, scan_observable
from bhdimer.spectra import diagonalize

params = DimerParams.from_lambda(40, 10.0, 5.0)
eig = diagonalize(params)
grid = PhaseGrid.uniform(101, 101)
dest = out_dir("phase_space_scan")
for t in (0.1, 0.5, 1.0):
    for obs in ("condensate_fraction", "epr"):
        f = scan_observable(params, grid, t, obs, eig=eig)
        rows = f.long_form()
        save(dest / f"{obs}_t{t:g}.csv", ["z", "phi", obs], rows.T, {"t": t, "lambda": params.lam})
        if obs == "epr":
            pos = f.values > 0
            zz, pp = grid.mesh()
            if pos.any():
                dphi = abs((pp[pos] - math.pi + math.pi) % (2 * math.pi) - math.pi).max()
                print(f"t={t}: {pos.sum()} nodes with EPR>0, min|z|={abs(zz[pos]).min():.3f}, max|phi-pi|={dphi:.3f}")
