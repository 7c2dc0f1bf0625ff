"""
The six-level cooling scheme
============================

States, drives and decay of the default scheme, the potential step each
state climbs between the low- and high-field regions, and the rate matrices
the simulation uses.
"""
# %%
import numpy as np

from optocool.constants import KB
from optocool.molphys import load_molecule
from optocool.scheme import build_default_scheme, potential_steps, rate_matrices

spec = load_molecule("CF3H")
scheme = build_default_scheme(spec)
for i, s in enumerate(scheme.states):
    print(i, s.label(), "factor", s.stark_factor)

# %%
for d in scheme.drives:
    a, b = scheme.states[d.src], scheme.states[d.dst]
    print(f"region {d.region} {d.kind}: {a.label()} <-> {b.label()} at {d.rate:g} 1/s")
for lo, rate in scheme.decay:
    print(f"decay -> {scheme.states[lo].label()} at {rate:.2f} 1/s")

# %%
# Climbing from 5 to 20 kV/cm: strongly shifted states gain the most energy.
steps = potential_steps(spec, scheme, 5e5, 20e5)
for s, e in sorted(zip(scheme.states, steps.steps), key=lambda t: -t[1]):
    print(f"{s.label():>12}: {e / KB * 1e3:7.1f} mK")

# %%
# Rate matrices: entry (a', a) is the rate from a' into a.  Infrared pumping
# exists only in the low-field region.
rm = rate_matrices(scheme)
np.set_printoptions(precision=1, suppress=True, linewidth=120)
print("low field\n", rm.c1)
print("high field\n", rm.c2)
