"""Symmetric tridiagonal eigensolver (implicit-shift QL with eigenvectors).

Follows the classic EISPACK ``tql2`` recurrence.  The Stark blocks passed in
here are a few dozen rows at most, so a compiled scalar loop beats LAPACK
call overhead and keeps the package free of a hard LAPACK dependency for
this path.
"""
import numpy as np
from numba import njit

from .errors import NumericError

MAX_SWEEPS = 60


@njit(cache=True)
def _tql2(d, e, z, max_sweeps):
    n = d.shape[0]
    eps = 2.0 ** -52
    f = 0.0
    tst1 = 0.0
    for l in range(n):
        tst1 = max(tst1, abs(d[l]) + abs(e[l]))
        m = l
        while m < n - 1:
            if abs(e[m]) <= eps * tst1:
                break
            m += 1
        if m > l:
            it = 0
            while True:
                it += 1
                if it > max_sweeps:
                    return l
                g = d[l]
                p = (d[l + 1] - g) / (2.0 * e[l])
                r = np.hypot(p, 1.0)
                if p < 0:
                    r = -r
                d[l] = e[l] / (p + r)
                d[l + 1] = e[l] * (p + r)
                dl1 = d[l + 1]
                h = g - d[l]
                for i in range(l + 2, n):
                    d[i] -= h
                f += h

                p = d[m]
                c = 1.0
                c2 = c
                c3 = c
                el1 = e[l + 1]
                s = 0.0
                s2 = 0.0
                for i in range(m - 1, l - 1, -1):
                    c3 = c2
                    c2 = c
                    s2 = s
                    g = c * e[i]
                    h = c * p
                    r = np.hypot(p, e[i])
                    e[i + 1] = s * r
                    s = e[i] / r
                    c = p / r
                    p = c * d[i] - s * g
                    d[i + 1] = h + s * (c * g + s * d[i])
                    for k in range(n):
                        h = z[k, i + 1]
                        z[k, i + 1] = s * z[k, i] + c * h
                        z[k, i] = c * z[k, i] - s * h
                p = -s * s2 * c3 * el1 * e[l] / dl1
                e[l] = s * p
                d[l] = c * p
                if abs(e[l]) <= eps * tst1:
                    break
        d[l] = d[l] + f
        e[l] = 0.0
    return -1


def eigh_tridiagonal(diag, offdiag, max_sweeps=MAX_SWEEPS):
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns).

    ``offdiag[i]`` couples rows ``i`` and ``i + 1``.
    """
    d = np.array(diag, dtype=np.float64)
    n = d.size
    off = np.asarray(offdiag, dtype=np.float64)
    if off.size != max(n - 1, 0):
        raise ValueError(f"offdiag must have length {n - 1}, got {off.size}")
    if n == 0:
        return d, np.zeros((0, 0))
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(off))):
        raise NumericError("non-finite matrix entries", {"n": n})

    # work in units of the largest entry
    scale = max(np.max(np.abs(d)), np.max(np.abs(off)) if n > 1 else 0.0)
    if scale == 0.0:
        return d, np.eye(n)
    d /= scale
    e = np.zeros(n)
    e[: n - 1] = off / scale
    z = np.eye(n)

    failed = _tql2(d, e, z, max_sweeps)
    if failed >= 0:
        raise NumericError(
            "QL iteration did not converge",
            {"index": int(failed), "n": n, "max_sweeps": max_sweeps,
             "residual_offdiag": float(np.max(np.abs(e))) * scale},
        )
    order = np.argsort(d, kind="stable")
    return d[order] * scale, z[:, order]
