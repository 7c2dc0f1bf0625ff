import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optocool.constants import AMU, DEBYE, KB
from optocool.errors import DomainError
from optocool.molphys import (
    MoleculeSpec, RotationalState, allowed_lower_states, available_molecules, dipole_coupling_sq,
    dressed_branching, first_order_stark, follow_block, kinetic_temperature, load_molecule,
    rigid_rotor_energy, stark_eigensystem, zero_field_branching, zero_field_branching_exact,
)

S = RotationalState
EXC = S(1, 2, 2, -2)


def test_shipped_molecules_load():
    names = available_molecules()
    assert "CF3H" in names and len(names) >= 5
    for n in names:
        spec = load_molecule(n)
        assert spec.mass > 0 and spec.dipole > 0


def test_molecule_round_trip(tmp_path, cf3h):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(cf3h.to_dict()))
    again = load_molecule(p)
    assert again.to_dict() == pytest.approx(cf3h.to_dict())


def test_invalid_molecule_rejected():
    with pytest.raises(DomainError):
        MoleculeSpec("x", -1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(FileNotFoundError):
        load_molecule("NoSuchMolecule")


def test_rigid_rotor_examples(cf3h):
    assert rigid_rotor_energy(cf3h, S(0, 0, 0, 0)) == 0.0
    B, A = cf3h.rot_const_B, cf3h.rot_const_A
    assert rigid_rotor_energy(cf3h, S(0, 2, 2, 0)) == pytest.approx(6 * B + 4 * (A - B), rel=1e-15)
    assert rigid_rotor_energy(cf3h, S(0, 3, 2, -1)) == rigid_rotor_energy(cf3h, S(0, 3, 2, -3))
    with pytest.raises(DomainError):
        rigid_rotor_energy(cf3h, S(0, 1, 2, 0))


def test_first_order_stark_examples(cf3h):
    # hand evaluation with CODATA constants
    e = first_order_stark(cf3h, S(0, 2, 2, -2), 20e5)
    assert e == pytest.approx(2 / 3 * 1.65 * 3.33564e-30 * 2e6, rel=1e-12)
    assert e == pytest.approx(7.34e-24, rel=1e-3)
    assert e / KB == pytest.approx(0.531, rel=1e-3)
    assert first_order_stark(cf3h, S(0, 2, 2, 0), 1e7) == 0.0
    e = first_order_stark(cf3h, S(0, 3, 2, -1), 5e5)
    assert e == pytest.approx(4.59e-25, rel=2e-3)
    assert e / KB == pytest.approx(33.2e-3, rel=2e-3)
    assert first_order_stark(cf3h, S(0, 0, 0, 0), 1e7) == 0.0
    with pytest.raises(DomainError):
        first_order_stark(cf3h, S(0, 2, 2, -2), -1.0)


def test_interaction_energy_one_debye():
    # 1 D in 100 kV/cm against (3/2) k_B * 1.61 K
    e = DEBYE * 1e7
    assert e == pytest.approx(1.5 * KB * 1.61, rel=5e-3)


def test_kinetic_temperature(cf3h):
    assert kinetic_temperature(cf3h, 0.0) == 0.0
    assert kinetic_temperature(cf3h, 11.7) == pytest.approx(70.013 * AMU * 11.7**2 / (3 * KB))
    assert kinetic_temperature(cf3h, 11.7) == pytest.approx(0.384, rel=2e-3)
    assert kinetic_temperature(cf3h, 2 * 3.3) == pytest.approx(4 * kinetic_temperature(cf3h, 3.3))


def test_dipole_coupling_selection_rules():
    assert dipole_coupling_sq(S(1, 2, 2, -2), S(0, 2, 3, -2)) == 0.0
    assert dipole_coupling_sq(S(1, 2, 2, -2), S(0, 1, 2, -2)) == 0.0
    assert dipole_coupling_sq(S(1, 2, 2, -2), S(0, 2, 2, -2)) == pytest.approx(4 / 9)
    total = sum(dipole_coupling_sq(EXC, lo) for lo in allowed_lower_states(EXC))
    assert total == pytest.approx(1.0, abs=1e-15)


def test_zero_field_branching_table():
    table = zero_field_branching_exact(EXC)
    assert table == {
        S(0, 2, 2, -2): Fraction(4, 9), S(0, 2, 2, -1): Fraction(2, 9),
        S(0, 3, 2, -3): Fraction(5, 21), S(0, 3, 2, -2): Fraction(5, 63),
        S(0, 3, 2, -1): Fraction(1, 63),
    }
    assert sum(table.values()) == 1
    bt = zero_field_branching(EXC)
    assert len(bt.entries) == 5 and bt.total == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DomainError):
        zero_field_branching(S(0, 2, 2, -2))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.data())
def test_zero_field_branching_normalised(J, data):
    K = data.draw(st.integers(-J, J))
    M = data.draw(st.integers(-J, J))
    table = zero_field_branching_exact(S(1, J, K, M))
    assert sum(table.values()) == 1
    assert all(lo.K == K and abs(lo.J - J) <= 1 and abs(lo.M - M) <= 1 for lo in table)


def test_zero_field_eigenvalues_all_blocks(cf3h):
    for K in range(0, 11):
        for M in range(-10, 11):
            blk = stark_eigensystem(cf3h, K, M, 0.0)
            for J, w in zip(blk.j_values, blk.eigenvalues):
                if J > 10:
                    break
                ref = rigid_rotor_energy(cf3h, S(0, int(J), K, M))
                assert abs(w - ref) <= 1e-10 * max(abs(ref), cf3h.rot_const_B)


def test_small_field_matches_first_order(cf3h):
    f = 1e4  # 100 V/cm
    for K, M in [(2, -2), (2, -1), (3, -3), (1, 1)]:
        blk = stark_eigensystem(cf3h, K, M, f)
        j0 = max(abs(K), abs(M))
        shift = blk.eigenvalues[0] - rigid_rotor_energy(cf3h, S(0, j0, K, M))
        ref = first_order_stark(cf3h, S(0, j0, K, M), f)
        assert shift == pytest.approx(ref, rel=0.01)


def test_second_order_shift(cf3h):
    # lowest J of the block: E - E0 - E1 ~ -(dE)^2 |<J+1|cos|J>|^2 / (E_{J+1} - E_J)
    from optocool.angular import direction_cosine
    K, M, f = 2, -2, 2e5
    blk = stark_eigensystem(cf3h, K, M, f)
    e0 = rigid_rotor_energy(cf3h, S(0, 2, K, M))
    e1 = first_order_stark(cf3h, S(0, 2, K, M), f)
    c = direction_cosine(3, K, M, 2, K, M)
    e2 = -(cf3h.dipole * f * c) ** 2 / (rigid_rotor_energy(cf3h, S(0, 3, K, M)) - e0)
    assert blk.eigenvalues[0] - e0 - e1 == pytest.approx(e2, rel=0.02)


def test_eigenvectors_orthonormal(cf3h):
    blk = stark_eigensystem(cf3h, 2, -2, 1e7)
    v = blk.eigenvectors
    assert np.max(np.abs(v.T @ v - np.eye(v.shape[1]))) < 1e-10


def test_truncation_guard(cf3h):
    with pytest.raises(DomainError):
        stark_eigensystem(cf3h, 2, -2, 1e6, j_max=5)
    blk = stark_eigensystem(cf3h, 2, -2, 1e7, check_convergence=True)
    assert blk.j_max == 32


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.floats(0, 1e7))
def test_m_reversal_symmetry(K, m, f):
    # (K, M) and (K, -M) blocks are mirror images: same spectrum as (-K, M)
    spec = load_molecule("CF3H")
    m = min(m, 6)
    a = stark_eigensystem(spec, K, -m, f).eigenvalues
    b = stark_eigensystem(spec, -K, m, f).eigenvalues
    assert np.allclose(a, b, rtol=1e-12, atol=1e-30)


def test_labels_follow_energy_order_within_block(cf3h):
    blk = follow_block(cf3h, 2, -2, 1e7)
    assert list(blk.labels[:10]) == list(range(2, 12))


def test_dressed_branching_zero_field_equals_zero_field_table(cf3h):
    res = dressed_branching(cf3h, 0.0, EXC)
    assert res.leak_high_j == 0.0
    ref = zero_field_branching(EXC).as_dict()
    got = res.table.as_dict()
    for lo, fr in ref.items():
        assert got[lo] == pytest.approx(fr, abs=1e-12)
    assert sum(v for k, v in got.items() if k not in ref) < 1e-20


@pytest.mark.parametrize("f", [1e5, 2e6, 5e6, 1e7])
def test_dressed_branching_complete(cf3h, f):
    res = dressed_branching(cf3h, f, EXC)
    assert res.table.total == pytest.approx(1.0, abs=1e-9)


def test_dressed_leak_grows_with_field(cf3h):
    leaks = [dressed_branching(cf3h, f, EXC).leak_high_j for f in (0.0, 2e6, 5e6, 1e7)]
    assert leaks == sorted(leaks)


def test_dressed_leak_frozen_value(cf3h):
    # regression lock on the computed value at 100 kV/cm with the shipped constants
    assert dressed_branching(cf3h, 1e7, EXC).leak_high_j == pytest.approx(0.01774, rel=2e-3)


def test_dressed_leak_independent_of_a(cf3h):
    # within a K block A only shifts all levels rigidly
    a = dressed_branching(cf3h, 1e7, EXC).leak_high_j
    b = dressed_branching(cf3h.replace(rot_const_A=2 * cf3h.rot_const_A), 1e7, EXC).leak_high_j
    assert a == pytest.approx(b, rel=1e-9)
