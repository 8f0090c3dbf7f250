"""Rational (r, s) approximants of the matrix exponential.

The approximant P_(r,s)(B) = D(B)^{-1} N(B) uses

    N(B) = I + sum_{i=1}^{r} a_i B^i,      a_i = (r+s-i)! r! / ((r+s)! i! (r-i)!),
    D(B) = I + sum_{j=1}^{s} b_j (-B)^j,   b_j = a_j with r and s exchanged,

and matches exp(B) through order r + s; the leading residual term has
magnitude r! s! / ((r+s)! (r+s+1)!) * B^{r+s+1}.  Coefficients are evaluated
by a multiplicative recurrence rather than factorial quotients, so there is
no intermediate overflow and small orders are exact in floating point.

Note: the closed-form expression above is authoritative for every order.
In particular the quadratic coefficient of the diagonal (4,4) approximant
is 3/28.

For diagonal orders (k, k) and an infinitesimal-symplectic argument, the
transfer matrix D^{-1} N is symplectic: splitting N = F + G and D = F - G
into even and odd parts gives N^T J N = D^T J D, which is the
symplecticity criterion for D^{-1} N.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SingularDenominatorError, SingularMatrixError
from .linalg import _require_square, _solve_stacked


@dataclass(frozen=True)
class PadePair:
    """Numerator/denominator degree pair (r, s) with r + s >= 1."""

    r: int
    s: int

    def __post_init__(self):
        if self.r < 0 or self.s < 0 or self.r != int(self.r) or self.s != int(self.s):
            raise ValueError(f"degrees must be nonnegative integers, got {self}")
        if self.r + self.s < 1:
            raise ValueError("need r + s >= 1")

    @property
    def total(self) -> int:
        return self.r + self.s

    def __str__(self) -> str:
        return f"({self.r},{self.s})"


@dataclass(frozen=True)
class PadeCoefficients:
    """Numerator coefficients a_1..a_r and denominator coefficients b_1..b_s."""

    a: tuple
    b: tuple


@lru_cache(maxsize=None)
def _coefficient_row(p: int, q: int) -> tuple:
    # Row for degree p against opposite degree q:
    #   c_1 = p / (p + q),  c_{i+1} = c_i * (p - i) / ((i + 1) (p + q - i)).
    if p == 0:
        return ()
    out = [p / (p + q)]
    for i in range(1, p):
        out.append(out[-1] * (p - i) / ((i + 1) * (p + q - i)))
    return tuple(out)


def pade_coefficients(order: PadePair) -> PadeCoefficients:
    """Coefficients of the (r, s) approximant of the exponential.

    All coefficients are positive, and a_1 = r/(r+s), b_1 = s/(r+s).
    """
    return PadeCoefficients(
        a=_coefficient_row(order.r, order.s),
        b=_coefficient_row(order.s, order.r),
    )


def residual_constant(order: PadePair) -> float:
    """Magnitude of the leading residual coefficient c_{r+s+1}."""
    # r! s! / ((r+s)! (r+s+1)!) accumulated multiplicatively.
    value = 1.0
    for i in range(1, order.s + 1):
        value *= i / (order.r + i)
    for i in range(1, order.total + 2):
        value /= i
    return value


def _matvec(b: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.matmul(b, x[..., None])[..., 0]


def _numerator_apply(b: np.ndarray, coeffs: tuple, x: np.ndarray) -> np.ndarray:
    # Horner form N(B) x = x + B (a_1 x + B (a_2 x + ... B (a_r x))), using
    # matrix-vector products only.
    if not coeffs:
        batch = np.broadcast_shapes(b.shape[:-2], x.shape[:-1])
        return np.ascontiguousarray(np.broadcast_to(x, batch + x.shape[-1:]))
    y = coeffs[-1] * x
    for c in reversed(coeffs[:-1]):
        y = c * x + _matvec(b, y)
    return x + _matvec(b, y)


def _polynomial_matrix(b: np.ndarray, coeffs: tuple) -> np.ndarray:
    # I + sum_i coeffs[i-1] * b^i, assembled by matrix Horner.
    eye = np.broadcast_to(np.eye(b.shape[-1]), b.shape)
    if not coeffs:
        return eye.copy()
    m = coeffs[-1] * eye
    for c in reversed(coeffs[:-1]):
        m = c * eye + b @ m
    return eye + b @ m


def pade_apply(b: np.ndarray, order: PadePair, x: np.ndarray) -> np.ndarray:
    """Apply the rational approximant: return D(b)^{-1} N(b) x.

    The numerator polynomial acts on the vector through Horner-style
    matrix-vector products; the denominator matrix is assembled explicitly
    and solved once with row-pivoted elimination.

    Parameters
    ----------
    b : ndarray, shape (..., d, d)
    order : PadePair
    x : ndarray, shape (..., d)

    Raises
    ------
    SingularDenominatorError
        If the denominator is numerically singular (step too large for
        this order).
    """
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    _require_square(b)
    if x.shape[-1] != b.shape[-1]:
        raise ValueError(f"shape mismatch: b {b.shape}, x {x.shape}")
    coeffs = pade_coefficients(order)
    num = _numerator_apply(b, coeffs.a, x)
    den = _polynomial_matrix(-b, coeffs.b)
    try:
        return _solve_stacked(den, num[..., None])[..., 0]
    except SingularMatrixError as exc:
        raise SingularDenominatorError(
            f"denominator of the {order} approximant is singular: {exc}"
        ) from None


def pade_transfer_matrix(b: np.ndarray, order: PadePair) -> np.ndarray:
    """Return the full transfer matrix D(b)^{-1} N(b).

    Used for symplecticity checks and for stepping many states through the
    same one-step map.

    Raises
    ------
    SingularDenominatorError
        As in :func:`pade_apply`.
    """
    b = np.asarray(b, dtype=float)
    _require_square(b)
    coeffs = pade_coefficients(order)
    num = _polynomial_matrix(b, coeffs.a)
    den = _polynomial_matrix(-b, coeffs.b)
    try:
        return _solve_stacked(den, num)
    except SingularMatrixError as exc:
        raise SingularDenominatorError(
            f"denominator of the {order} approximant is singular: {exc}"
        ) from None
