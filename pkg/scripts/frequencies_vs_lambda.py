"""Exact beat frequencies against mean-field and second-order perturbative estimates (N=40)."""

import numpy as np
from script_io import out_dir, save

from bhdimer.cli import frequency_table
from bhdimer.model import DimerParams

lams = np.round(np.concatenate([np.linspace(1.2, 3, 10), np.geomspace(3.5, 40, 16)]), 6)
cols, rows = frequency_table([DimerParams.from_lambda(40, 10.0, lam) for lam in lams], measure=True)
save(out_dir("frequencies") / "frequencies.csv", cols, np.array(rows).T, {"n_atoms": 40, "tunneling": 10.0})
for r in rows:
    d = dict(zip(cols, r))
    print(f"Lambda={d['lambda']:7.3f}  f_fast={d['f_fast']:9.4f}  rel2={d['rel_err_fast']:+.2e}  "
          f"f_slow={d['f_slow']:8.4f}  rel2={d['rel_err_slow']:+.2e}")
