"""Wigner 3-j symbols and symmetric-top direction-cosine matrix elements.

Only integer angular momenta occur for the rotor states treated here, so the
Racah sum is evaluated in exact rational arithmetic and rounded once.
"""
from fractions import Fraction
from functools import lru_cache
from math import factorial, isqrt, sqrt


def _triangle(a, b, c):
    return abs(a - b) <= c <= a + b


def wigner_3j_squared(j1, j2, j3, m1, m2, m3):
    """Exact square of the 3-j symbol together with its sign.

    Returns ``(sign, value)`` with ``value`` a :class:`Fraction`; the 3-j symbol
    equals ``sign * sqrt(value)``.
    """
    return _w3j_sq(int(j1), int(j2), int(j3), int(m1), int(m2), int(m3))


@lru_cache(maxsize=None)
def _w3j_sq(j1, j2, j3, m1, m2, m3):
    if m1 + m2 + m3 != 0 or not _triangle(j1, j2, j3):
        return 0, Fraction(0)
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return 0, Fraction(0)

    t1 = j2 - m1 - j3
    t2 = j1 + m2 - j3
    t3 = j1 + j2 - j3
    t4 = j1 - m1
    t5 = j2 + m2
    tmin = max(0, t1, t2)
    tmax = min(t3, t4, t5)

    racah = Fraction(0)
    for t in range(tmin, tmax + 1):
        racah += Fraction(
            -1 if t % 2 else 1,
            factorial(t) * factorial(t - t1) * factorial(t - t2)
            * factorial(t3 - t) * factorial(t4 - t) * factorial(t5 - t),
        )
    if racah == 0:
        return 0, Fraction(0)

    pref = Fraction(
        factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3)
        * factorial(j1 + m1) * factorial(j1 - m1)
        * factorial(j2 + m2) * factorial(j2 - m2)
        * factorial(j3 + m3) * factorial(j3 - m3),
        factorial(j1 + j2 + j3 + 1),
    )
    sign = (-1 if (j1 - j2 - m3) % 2 else 1) * (1 if racah > 0 else -1)
    return sign, pref * racah * racah


def _sqrt_fraction(x):
    # exact when numerator and denominator are perfect squares
    n, d = x.numerator, x.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return rn / rd
    return sqrt(float(x))


def wigner_3j(j1, j2, j3, m1, m2, m3):
    """Wigner 3-j symbol for integer arguments."""
    sign, sq = wigner_3j_squared(j1, j2, j3, m1, m2, m3)
    if sign == 0:
        return 0.0
    return sign * _sqrt_fraction(sq)


def direction_cosine(j_out, k_out, m_out, j_in, k_in, m_in, q=None):
    """Matrix element <j_out k_out m_out| D^1_{q,0}* |j_in k_in m_in>.

    This is the lab-frame spherical component ``q = m_out - m_in`` of the
    unit vector along the symmetry axis.  For ``q = 0`` it is the matrix
    element of cos(theta) that enters the Stark Hamiltonian, with the same
    phase convention, so Stark blocks and transition amplitudes built from it
    are mutually consistent.
    """
    if q is None:
        q = m_out - m_in
    if k_out != k_in or m_out - m_in != q or abs(q) > 1:
        return 0.0
    a = wigner_3j(j_out, 1, j_in, -m_out, q, m_in)
    if a == 0.0:
        return 0.0
    b = wigner_3j(j_out, 1, j_in, -k_out, 0, k_in)
    phase = -1.0 if (m_out - k_out) % 2 else 1.0
    return phase * sqrt((2 * j_in + 1) * (2 * j_out + 1)) * a * b


def line_strength_exact(j_up, k_up, m_up, j_lo, k_lo, m_lo):
    """Squared parallel-band direction-cosine element as an exact Fraction."""
    return _line_strength(int(j_up), int(k_up), int(m_up), int(j_lo), int(k_lo), int(m_lo))


@lru_cache(maxsize=None)
def _line_strength(j_up, k_up, m_up, j_lo, k_lo, m_lo):
    if k_up != k_lo or abs(j_up - j_lo) > 1 or abs(m_up - m_lo) > 1:
        return Fraction(0)
    if abs(k_up) > j_up or abs(m_up) > j_up or abs(k_lo) > j_lo or abs(m_lo) > j_lo:
        return Fraction(0)
    q = m_lo - m_up
    sa, a = wigner_3j_squared(j_lo, 1, j_up, -m_lo, q, m_up)
    sb, b = wigner_3j_squared(j_lo, 1, j_up, -k_lo, 0, k_up)
    if sa == 0 or sb == 0:
        return Fraction(0)
    return (2 * j_up + 1) * (2 * j_lo + 1) * a * b
