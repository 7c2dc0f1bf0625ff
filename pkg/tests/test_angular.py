import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from sympy import Rational, nsimplify
from sympy.physics.wigner import wigner_3j as sympy_3j

from optocool.angular import direction_cosine, line_strength_exact, wigner_3j, wigner_3j_squared


def _cases(jmax=4):
    for j1, j2, j3 in itertools.product(range(jmax + 1), repeat=3):
        for m1 in range(-j1, j1 + 1):
            for m2 in range(-j2, j2 + 1):
                yield j1, j2, j3, m1, m2, -m1 - m2


def test_3j_matches_sympy_exhaustively_small_j():
    n = 0
    for args in _cases(3):
        ref = float(sympy_3j(*args))
        assert wigner_3j(*args) == pytest.approx(ref, abs=1e-14)
        n += 1
    assert n > 500


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 12), st.integers(0, 2), st.data())
def test_3j_squared_exact_against_sympy(j1, j2, data):
    j3 = data.draw(st.integers(abs(j1 - j2), j1 + j2))
    m1 = data.draw(st.integers(-j1, j1))
    m2 = data.draw(st.integers(-j2, j2))
    m3 = -m1 - m2
    sign, sq = wigner_3j_squared(j1, j2, j3, m1, m2, m3)
    ref = sympy_3j(j1, j2, j3, m1, m2, m3)
    assert Rational(sq.numerator, sq.denominator) == ref**2
    if ref != 0:
        assert sign == (1 if ref > 0 else -1)


def test_3j_selection_zeroes():
    assert wigner_3j(1, 1, 3, 0, 0, 0) == 0.0  # triangle
    assert wigner_3j(1, 1, 1, 1, 0, 0) == 0.0  # m sum
    assert wigner_3j(1, 1, 1, 0, 0, 0) == 0.0  # odd j sum with all m = 0


def test_numpy_ints_accepted():
    import numpy as np
    assert wigner_3j(*np.array([2, 1, 2, -2, 0, 2])) == pytest.approx(float(sympy_3j(2, 1, 2, -2, 0, 2)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.data())
def test_line_strength_sum_over_lower_states_is_one(j_up, data):
    k = data.draw(st.integers(-j_up, j_up))
    m = data.draw(st.integers(-j_up, j_up))
    total = Fraction(0)
    for jl in (j_up - 1, j_up, j_up + 1):
        for ml in (m - 1, m, m + 1):
            total += line_strength_exact(j_up, k, m, jl, k, ml)
    assert total == 1


def test_direction_cosine_is_symmetric_for_q0():
    for j, jp in [(2, 3), (3, 4), (5, 5)]:
        for k, m in [(2, -2), (1, 1), (2, 0)]:
            if abs(k) > j or abs(m) > j:
                continue
            assert direction_cosine(jp, k, m, j, k, m) == pytest.approx(direction_cosine(j, k, m, jp, k, m))


def test_direction_cosine_diagonal_is_km_over_jj1():
    for j in range(1, 8):
        for k in range(-j, j + 1):
            for m in range(-j, j + 1):
                ref = k * m / (j * (j + 1))
                assert direction_cosine(j, k, m, j, k, m) == pytest.approx(ref, abs=1e-14)


def test_direction_cosine_squares_give_line_strength():
    for jl, ml in itertools.product((1, 2, 3), (-3, -2, -1)):
        if abs(ml) > jl or jl < 2:
            continue
        amp = direction_cosine(jl, 2, ml, 2, 2, -2)
        assert amp**2 == pytest.approx(float(line_strength_exact(2, 2, -2, jl, 2, ml)), abs=1e-15)


def test_3j_oracle_rationalizes():
    # square of the sympy value is rational, as is ours
    v = sympy_3j(3, 1, 2, 2, 0, -2) ** 2
    assert nsimplify(v) == Rational(*wigner_3j_squared(3, 1, 2, 2, 0, -2)[1].as_integer_ratio())
