"""Dense small-matrix kernels shared by the whole package.

Provides the canonical antisymmetric form J, row-pivoted linear solves, a
reference matrix exponential, and the symplectic-structure predicates.  All
routines accept stacked operands: any leading axes before the final matrix
(or vector) axes are treated as a batch, which keeps the Monte-Carlo hot
loops inside vectorized numpy.

Norm conventions are fixed here so tolerances elsewhere are unambiguous:
structure defects are measured in the entrywise max norm, while scaling
decisions inside :func:`matrix_exp` use the operator infinity norm.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    MatrixExpOverflowError,
    OddDimensionError,
    SingularMatrixError,
)

# Pivot magnitudes below PIVOT_RTOL * max|A| count as singular.  The value is
# far above roundoff for the well-conditioned solves done here, so tripping
# it signals a genuinely singular denominator, not accumulated noise.
PIVOT_RTOL = 1e-14

# Inputs are rescaled until the operator norm is at most EXP_TARGET_NORM
# before the rational kernel is applied; more than EXP_MAX_SQUARINGS
# doublings would exceed the representable range.
EXP_TARGET_NORM = 0.5
EXP_MAX_SQUARINGS = 40

# Order of the diagonal rational kernel used by matrix_exp.  At scaled norm
# 0.5 the (6,6) approximant is accurate to ~1e-17 relative, comfortably
# inside the documented 1e-12 contract.
EXP_KERNEL_ORDER = 6


def symplectic_form(n: int) -> np.ndarray:
    """Return the standard antisymmetric matrix J of size 2n x 2n.

    J is the block matrix [[0, I_n], [-I_n, 0]]; it satisfies J^2 = -I and
    J^T = J^{-1} = -J.

    Parameters
    ----------
    n : int
        Half-dimension; the returned matrix is 2n x 2n.
    """
    if n < 1:
        raise ValueError(f"half-dimension must be >= 1, got {n}")
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def _require_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")


def _require_even(a: np.ndarray) -> int:
    _require_square(a)
    dim = a.shape[-1]
    if dim % 2 != 0:
        raise OddDimensionError(f"dimension {dim} is odd; expected 2n")
    return dim


def _solve_stacked(a: np.ndarray, rhs: np.ndarray, on_singular: str = "raise"):
    """Solve a @ x = rhs by Gaussian elimination with partial pivoting.

    ``a`` has shape (..., d, d) and ``rhs`` shape (..., d, k); the batch
    axes are broadcast.  With ``on_singular="mask"`` no exception is raised;
    instead a boolean mask marks the batch entries whose pivot fell below
    the threshold (their solutions are meaningless) and is returned next to
    the solution array.
    """
    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    d = a.shape[-1]
    batch = np.broadcast_shapes(a.shape[:-2], rhs.shape[:-2])
    u = np.ascontiguousarray(np.broadcast_to(a, batch + (d, d))).reshape(-1, d, d).copy()
    x = np.ascontiguousarray(np.broadcast_to(rhs, batch + rhs.shape[-2:])).reshape(
        -1, d, rhs.shape[-1]
    ).copy()
    nbatch = u.shape[0]
    rows = np.arange(nbatch)
    tol = PIVOT_RTOL * np.max(np.abs(u), axis=(1, 2))
    singular = np.zeros(nbatch, dtype=bool)

    for k in range(d):
        p = k + np.argmax(np.abs(u[:, k:, k]), axis=1)
        uk = u[rows, k].copy()
        u[rows, k] = u[rows, p]
        u[rows, p] = uk
        xk = x[rows, k].copy()
        x[rows, k] = x[rows, p]
        x[rows, p] = xk

        piv = u[:, k, k]
        bad = np.abs(piv) <= tol
        if bad.any():
            if on_singular == "raise":
                raise SingularMatrixError(
                    f"pivot {np.abs(piv[bad]).min():.3e} at elimination step {k} "
                    f"is below {PIVOT_RTOL:g} * max|A|; matrix is numerically singular"
                )
            singular |= bad
            # Keep eliminating with a harmless pivot; flagged results are
            # discarded by the caller.
            piv = np.where(bad, 1.0, piv)
            u[:, k, k] = piv

        if k + 1 < d:
            factors = u[:, k + 1 :, k] / piv[:, None]
            u[:, k + 1 :, k:] -= factors[:, :, None] * u[:, None, k, k:]
            x[:, k + 1 :, :] -= factors[:, :, None] * x[:, None, k, :]

    for k in range(d - 1, -1, -1):
        if k + 1 < d:
            x[:, k, :] -= np.einsum("bj,bjk->bk", u[:, k, k + 1 :], x[:, k + 1 :, :])
        x[:, k, :] /= u[:, k, k, None]

    x = x.reshape(batch + rhs.shape[-2:])
    if on_singular == "mask":
        return x, singular.reshape(batch)
    return x


def solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve the square system a @ x = b with row-pivoted elimination.

    Parameters
    ----------
    a : ndarray, shape (..., d, d)
    b : ndarray, shape (..., d)
        Right-hand side vector(s); batch axes broadcast against ``a``.

    Returns
    -------
    ndarray, shape (..., d)
        Solution with residual ||a x - b|| <= ~1e-12 ||b|| for
        well-conditioned inputs.

    Raises
    ------
    SingularMatrixError
        If any pivot magnitude falls below ``PIVOT_RTOL * max|a|``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _require_square(a)
    if b.shape[-1] != a.shape[-1]:
        raise ValueError(f"shape mismatch: a {a.shape}, b {b.shape}")
    x = _solve_stacked(a, b[..., None])
    return x[..., 0]


def matrix_exp(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring.

    The input is scaled by a power of two until its operator infinity norm
    is at most ``EXP_TARGET_NORM``, the diagonal (6,6) rational approximant
    of the exponential is applied, and the result is repeatedly squared.
    Relative accuracy is ~1e-12 or better in the operator-norm sense for
    moderate norms; this routine serves as the exact-solution reference for
    all flow maps in the package.

    Accepts stacked matrices (..., d, d); scaling is chosen per matrix.

    Raises
    ------
    MatrixExpOverflowError
        If more than ``EXP_MAX_SQUARINGS`` squarings would be needed, i.e.
        ||a|| > EXP_TARGET_NORM * 2**EXP_MAX_SQUARINGS.
    """
    from .pade import PadePair, pade_transfer_matrix

    a = np.asarray(a, dtype=float)
    _require_square(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")

    norm = np.abs(a).sum(axis=-1).max(axis=-1)
    with np.errstate(divide="ignore"):
        squarings = np.ceil(np.log2(norm / EXP_TARGET_NORM))
    squarings = np.where(norm > EXP_TARGET_NORM, squarings, 0.0).astype(np.int64)
    if np.any(squarings > EXP_MAX_SQUARINGS):
        raise MatrixExpOverflowError(
            f"norm {float(np.max(norm)):.3e} needs more than "
            f"{EXP_MAX_SQUARINGS} squarings"
        )

    scaled = a / (2.0 ** squarings)[..., None, None]
    result = pade_transfer_matrix(scaled, PadePair(EXP_KERNEL_ORDER, EXP_KERNEL_ORDER))

    if result.ndim == 2:
        for _ in range(int(squarings)):
            result = result @ result
        return result

    for k in range(int(squarings.max(initial=0))):
        mask = squarings > k
        result[mask] = result[mask] @ result[mask]
    return result


def infinitesimal_defect(b: np.ndarray) -> np.ndarray | float:
    """Entrywise-max norm of J b + b^T J (zero iff b generates symplectic flow)."""
    b = np.asarray(b, dtype=float)
    dim = _require_even(b)
    j = symplectic_form(dim // 2)
    resid = j @ b + np.swapaxes(b, -1, -2) @ j
    out = np.abs(resid).max(axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def is_infinitesimal_symplectic(b: np.ndarray, tol: float) -> bool | np.ndarray:
    """Whether ||J b + b^T J||_max <= tol.

    Raises
    ------
    OddDimensionError
        If the matrix dimension is odd.
    """
    return infinitesimal_defect(b) <= tol


def symplectic_defect(s: np.ndarray) -> np.ndarray | float:
    """Entrywise-max norm of s^T J s - J.

    Zero (to machine precision) exactly when ``s`` is a symplectic matrix.

    Raises
    ------
    OddDimensionError
        If the matrix dimension is odd.
    """
    s = np.asarray(s, dtype=float)
    dim = _require_even(s)
    j = symplectic_form(dim // 2)
    resid = np.swapaxes(s, -1, -2) @ j @ s - j
    out = np.abs(resid).max(axis=(-2, -1))
    return float(out) if out.ndim == 0 else out
