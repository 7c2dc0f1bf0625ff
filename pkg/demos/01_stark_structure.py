"""
Rotor levels, Stark shifts and decay branching
==============================================

A tour of the rigid symmetric-top model: closed-form energies, the exact
Stark eigensystem of one (K, M) block, and where a v=1 molecule decays to,
with and without an applied field.
"""
# %%
from optocool.constants import KB
from optocool.molphys import (
    RotationalState, dressed_branching, first_order_stark, load_molecule, rigid_rotor_energy,
    stark_eigensystem, zero_field_branching_exact,
)

spec = load_molecule("CF3H")
print(spec.name, f"d = {spec.dipole / 3.33564e-30:.2f} D, gamma = {spec.decay_rate} 1/s")

# %%
# Zero-field ladder of the K = 2 stack; M does not matter here.
for J in range(2, 6):
    s = RotationalState(0, J, 2, -2)
    print(f"J={J}: {rigid_rotor_energy(spec, s) / KB * 1e3:8.2f} mK")

# %%
# The (K=2, M=-2) block in a growing field.  At low field the shift is the
# first-order KM/(J(J+1)) term; at 100 kV/cm the curvature is visible.
state = RotationalState(0, 2, 2, -2)
e0 = rigid_rotor_energy(spec, state)
for f_kv in (0.1, 5, 20, 50, 100):
    f = f_kv * 1e5
    exact = stark_eigensystem(spec, 2, -2, f).eigenvalues[0] - e0
    lin = first_order_stark(spec, state, f)
    print(f"{f_kv:6.1f} kV/cm  exact {exact / KB:.4f} K   linear {lin / KB:.4f} K   ratio {exact / lin:.4f}")

# %%
# Spontaneous decay of v=1 |2,2,-2>: five channels with rational weights.
for lower, frac in zero_field_branching_exact(RotationalState(1, 2, 2, -2)).items():
    print(f"  -> {lower.label():>12}  {str(frac):>5}  = {float(frac):.4f}")

# %%
# Field mixing admixes higher J into the dressed states; the fraction of
# decays that end in J >= 4 grows roughly with the square of the field.
for f_kv in (0, 20, 50, 75, 100):
    res = dressed_branching(spec, f_kv * 1e5, RotationalState(1, 2, 2, -2))
    print(f"{f_kv:4d} kV/cm  leak to J>=4: {100 * res.leak_high_j:.3f} %   sum {res.table.total:.12f}")

# %%
# The leak depends on B (level spacing against d E) but not on A.
for fb in (0.8, 1.0, 1.2):
    s = spec.replace(rot_const_B=fb * spec.rot_const_B)
    leak = dressed_branching(s, 1e7, RotationalState(1, 2, 2, -2)).leak_high_j
    print(f"B x {fb}: {100 * leak:.2f} %")
