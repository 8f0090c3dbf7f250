"""Shared test helpers: independent oracles and random-structure factories.

The oracles here deliberately avoid the code paths they are used to check:
the exponential oracle is a direct Taylor summation, residual slopes are
measured in 60-digit arithmetic, and quadrature results are compared
against plain Riemann sums.
"""

import mpmath
import numpy as np

from padeint import symplectic_form


def random_infinitesimal_symplectic(rng, n, norm=1.0):
    """Random element of sp(2n) as J^{-1} C with C symmetric, rescaled."""
    d = 2 * n
    c = rng.standard_normal((d, d))
    c = 0.5 * (c + c.T)
    b = (-symplectic_form(n)) @ c
    return b * (norm / np.abs(b).sum(axis=-1).max())


def taylor_expm(a, tol=1e-22):
    """Matrix exponential by direct Taylor summation (for moderate norms)."""
    a = np.asarray(a, dtype=float)
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, 200):
        term = term @ a / k
        out = out + term
        if np.abs(term).max() <= tol * np.abs(out).max():
            break
    return out


def _mp_poly(tb, coeffs, negate):
    result = mpmath.eye(tb.rows)
    power = mpmath.eye(tb.rows)
    sign = -1 if negate else 1
    for c in coeffs:
        power = power * (sign * tb)
        result += c * power
    return result


def _mp_coefficient_row(p, q):
    """Exact-rational coefficient row at working precision."""
    out = []
    if p:
        c = mpmath.mpf(p) / (p + q)
        out.append(c)
        for i in range(1, p):
            c = c * (p - i) / ((i + 1) * (p + q - i))
            out.append(c)
    return out


def mp_pade_residual(b, order, t, dps=60):
    """max |exp(tb) - P_(r,s)(tb)| in high-precision arithmetic.

    Both the exponential and the rational approximant are evaluated with
    mpmath, with coefficients recomputed as exact rationals at working
    precision: binary64 coefficient quantization (~1e-17 relative) would
    otherwise floor the measurable residual far above the true values at
    high orders.  The package's binary64 coefficients are tied to the same
    closed form by a separate test.
    """
    with mpmath.workdps(dps):
        tb = mpmath.matrix(np.asarray(b).tolist()) * mpmath.mpf(t)
        num = _mp_poly(tb, _mp_coefficient_row(order.r, order.s), negate=False)
        den = _mp_poly(tb, _mp_coefficient_row(order.s, order.r), negate=True)
        approx = den**-1 * num
        diff = mpmath.expm(tb) - approx
        worst = max(
            abs(diff[i, j]) for i in range(diff.rows) for j in range(diff.cols)
        )
        return float(worst)


def loglog_slope(x, y):
    """Least-squares slope of ln(y) against ln(x)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    design = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, _), *_ = np.linalg.lstsq(design, ly, rcond=None)
    return float(slope)


def mp_pade_residual_slope(b, order, ts, dps=60):
    """Log-log slope of the residual over the given scale factors."""
    errs = [mp_pade_residual(b, order, t, dps=dps) for t in ts]
    return loglog_slope(ts, errs)


def riemann_kernel_covariance(g, vec, h, npoints, rule="left"):
    """Riemann-sum evaluation of int_0^h K(t) K(t)^T dt, K(t) = exp((h-t) g) v.

    Deliberately brute force; the exponentials come from scipy, not from
    the package under test.
    """
    import scipy.linalg

    if rule == "left":
        ts = h * np.arange(npoints) / npoints
    elif rule == "midpoint":
        ts = h * (np.arange(npoints) + 0.5) / npoints
    else:
        raise ValueError(rule)
    weight = h / npoints
    kernels = scipy.linalg.expm((h - ts)[:, None, None] * g) @ vec
    return weight * np.einsum("qa,qb->ab", kernels, kernels)
