"""
Cooling in the two-region trap
==============================

Runs the velocity-resolved rate equations with the default parameters and
prints the temperature, the applied field step and the number of
spontaneous decays per molecule.  Pass a duration in seconds as the first
argument for a quicker look (the default is a full 10 s run, about half a
minute).
"""
# %%
import sys

import numpy as np

from optocool.molphys import load_molecule
from optocool.ratesim import CoolingConfig, run_cooling
from optocool.scheme import build_default_scheme

duration = float(sys.argv[1]) if len(sys.argv) > 1 else 10.0
spec = load_molecule("CF3H")
cfg = CoolingConfig(spec, build_default_scheme(spec), duration=duration,
                    snapshot_times=tuple(t for t in (0.0, 0.2, 1.0, 5.0, 10.0) if t <= duration))


def progress(t, rec):
    if abs(t - round(t)) < 1e-9 and t > 0:
        print(f"t = {t:4.1f} s  T80 = {1e3 * rec.temperature_p80:8.2f} mK  "
              f"step = {rec.field_step / 1e5:6.2f} kV/cm  decays = {rec.cumulative_decays_per_molecule:5.2f}")


res = run_cooling(cfg, progress=progress)

# %%
# Conservation: nothing leaves the trap in this model.
print("N(t_end) / N(0) - 1 =", res.final.total / res.records[0].total_number - 1)

# %%
# Speed histograms at the snapshot times: the bulk moves to low speed.
speeds = res.config.grid.speeds
for t, ens in sorted(res.snapshots.items()):
    h = ens.kinetic_histogram()
    mean_v = float((h * speeds).sum() / h.sum())
    v80 = float(np.interp(0.8, np.cumsum(h) / h.sum(), speeds))
    print(f"t = {t:4.1f} s  mean speed {mean_v:5.2f} m/s  80% below {v80:5.2f} m/s")
