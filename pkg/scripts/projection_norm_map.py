"""Weight of coherent states on the three highest eigenstates over the phase sphere."""

from script_io import out_dir, save

from bhdimer.model import DimerParams
from bhdimer.phasespace import PhaseGrid, lambert_project, projection_norm_field
from bhdimer.model import PhasePoint

dest = out_dir("projection_norm")
grid = PhaseGrid.uniform(101, 101)
for lam in (0.5, 2.0, 5.0):
    f = projection_norm_field(DimerParams.from_lambda(40, 10.0, lam), grid, k=3)
    rows = f.long_form()
    xy = [lambert_project(PhasePoint(z, p)) for z, p, _ in rows]
    save(dest / f"top3_lambda{lam:g}.csv", ["map_x", "map_y", "norm_sq"],
         [[a for a, _ in xy], [b for _, b in xy], rows[:, 2]], {"lambda": lam, "projection": "lambert"})
