"""Reproducible randomness for path simulation.

Streams are counter-based: path ``i`` of a run seeded with ``s`` draws from
a Philox generator keyed by the pair ``(s, i)``, so any path can be
regenerated bit-exactly in isolation and a Monte-Carlo ensemble can be
split across workers without coordination.  Standard Gaussians are produced
by applying the inverse normal CDF to the uniform stream (one uniform per
Gaussian), a documented deterministic transform that makes the draw
sequence a pure function of ``(seed, path_index)``.

Besides raw Wiener increments this module provides the clamped increments
used by the implicit schemes, and the joint Gaussian law of the stochastic
integrals appearing in the additive-noise schemes (increment, exact-flow
integral, and rational-kernel integral per channel), with covariances
computed by Gauss-Legendre quadrature of the deterministic kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import (
    DegenerateStepError,
    QuadratureFailureError,
    SingularMatrixError,
)
from .linalg import matrix_exp
from .pade import PadePair, pade_transfer_matrix

DEFAULT_QUAD_NODES = 32

# Relative diagonal jitter applied if the joint covariance fails to factor
# (it is positive semidefinite by construction, so only roundoff-scale
# repair is ever needed).
CHOLESKY_JITTER = 1e-14


class NoiseStream:
    """Counter-based random stream for one path.

    Identical ``(seed, path_index)`` pairs reproduce identical draw
    sequences bit-exactly.  A stream is owned by a single consumer; it is
    cheap to construct, so make one per path rather than sharing.
    """

    def __init__(self, seed: int, path_index: int = 0):
        seed = int(seed)
        path_index = int(path_index)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not 0 <= path_index < 2**64:
            raise ValueError("path_index must fit in an unsigned 64-bit integer")
        self.seed = seed
        self.path_index = path_index
        self._gen = np.random.Generator(np.random.Philox(key=[seed, path_index]))

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms on [0, 1)."""
        return self._gen.random(n)

    def gaussians(self, n: int) -> np.ndarray:
        """Next ``n`` standard Gaussians via the inverse normal CDF."""
        u = self._gen.random(n)
        # random() can return exactly 0 (probability 2^-53 per draw); nudge
        # so the inverse CDF stays finite.
        u[u == 0.0] = 2.0**-53
        return ndtri(u)

    def __repr__(self) -> str:
        return f"NoiseStream(seed={self.seed}, path_index={self.path_index})"


def truncation_bound(h: float, ell: float) -> float:
    """Clamping level A_h = sqrt(2 ell |ln h|) for step size h in (0, 1)."""
    if not 0.0 < h < 1.0:
        raise DegenerateStepError(
            f"step size must lie in (0, 1) for the clamping bound, got {h}"
        )
    return float(np.sqrt(2.0 * ell * abs(np.log(h))))


def truncate(xi: float, a_h: float):
    """Clamp a draw to [-a_h, a_h] (elementwise on arrays)."""
    if a_h <= 0.0:
        raise ValueError(f"clamping bound must be positive, got {a_h}")
    return np.clip(xi, -a_h, a_h)


@dataclass(frozen=True)
class StepNoise:
    """Random data for one step of a linear-system scheme.

    ``xi`` holds the raw standard Gaussians (used by the exact-flow
    comparator); ``zeta`` the clamped values |zeta| <= a_h fed to the
    implicit schemes, with zeta == xi wherever |xi| <= a_h.
    """

    h: float
    xi: np.ndarray
    zeta: np.ndarray
    ell: float
    a_h: float


def step_noise(stream: NoiseStream, h: float, m: int, ell: float) -> StepNoise:
    """Draw the per-step noise for ``m`` channels.

    Raises
    ------
    DegenerateStepError
        If h is not in (0, 1), where the clamping bound is undefined.
    """
    if m < 1:
        raise ValueError(f"need at least one channel, got m={m}")
    if ell < 1.0:
        raise ValueError(f"truncation level must be >= 1, got {ell}")
    a_h = truncation_bound(h, ell)
    xi = stream.gaussians(m)
    return StepNoise(h=float(h), xi=xi, zeta=truncate(xi, a_h), ell=float(ell), a_h=a_h)


@dataclass(frozen=True)
class JointGaussianSpec:
    """Zero-mean joint law of (increment, exact integral, kernel integral).

    The stacked vector is laid out as ``m`` increments, then the ``m``
    exact-flow integral vectors (each of state dimension d), then the ``m``
    rational-kernel integral vectors.  Channels are independent, so the
    covariance is block structured; it is stored whole together with its
    (lower) Cholesky factor.
    """

    m: int
    dim: int
    h: float
    covariance: np.ndarray
    cholesky: np.ndarray

    @property
    def size(self) -> int:
        return self.m * (1 + 2 * self.dim)

    def split(self, stacked: np.ndarray):
        """Split stacked draw(s) (..., size) into (dw, i_exact, i_scheme).

        Returns arrays of shape (..., m), (..., m, d) and (..., m, d).
        """
        m, d = self.m, self.dim
        dw = stacked[..., :m]
        i_exact = stacked[..., m : m + m * d].reshape(stacked.shape[:-1] + (m, d))
        i_scheme = stacked[..., m + m * d :].reshape(stacked.shape[:-1] + (m, d))
        return dw, i_exact, i_scheme

    def transform(self, standard_normals: np.ndarray) -> np.ndarray:
        """Map standard-normal draws (..., size) to joint samples."""
        return standard_normals @ self.cholesky.T


def _gauss_legendre_nodes(h: float, quad_nodes: int):
    x, w = np.polynomial.legendre.leggauss(quad_nodes)
    return 0.5 * h * (x + 1.0), 0.5 * h * w


def additive_joint_spec(
    g: np.ndarray,
    rvecs,
    h: float,
    scheme_order: PadePair,
    quad_nodes: int = DEFAULT_QUAD_NODES,
) -> JointGaussianSpec:
    """Joint Gaussian law for one step of the additive-noise schemes.

    For each channel ``i`` with noise direction ``v_i`` (the state-space
    vector multiplying dW^i), the step consumes three correlated Gaussian
    objects: the scalar increment dW^i over [0, h], the exact-flow integral
    int_0^h exp((h-t) g) v_i dW^i(t), and the kernel integral with
    exp replaced by the (r, s) rational approximant of ``scheme_order``.
    By the Ito isometry every covariance block is an ordinary integral of
    products of smooth kernels; these are evaluated with ``quad_nodes``-point
    Gauss-Legendre quadrature on [0, h].  The covariance is assembled as a
    positively weighted sum of outer products, hence positive semidefinite
    by construction, and factored with a roundoff-scale diagonal jitter if
    the bare factorization fails.

    Parameters
    ----------
    g : ndarray, shape (d, d)
        Drift generator of the additive system (d = 2n).
    rvecs : sequence of ndarray, shape (d,)
        Noise directions, one per channel.
    h : float
        Step size (> 0).
    scheme_order : PadePair
        Order of the rational kernel used by the integral-variant scheme.
    quad_nodes : int
        Number of quadrature nodes, at least 8.

    Raises
    ------
    QuadratureFailureError
        If the rational kernel is singular at any quadrature node.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"generator must be a square matrix, got shape {g.shape}")
    if h <= 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    if quad_nodes < 8:
        raise ValueError(f"need at least 8 quadrature nodes, got {quad_nodes}")
    rvecs = np.atleast_2d(np.asarray(rvecs, dtype=float))
    m, d = rvecs.shape
    if d != g.shape[0]:
        raise ValueError(f"noise vectors of length {d} do not match generator {g.shape}")

    theta, weights = _gauss_legendre_nodes(h, quad_nodes)
    scaled = (h - theta)[:, None, None] * g
    exact_kernels = matrix_exp(scaled)
    try:
        scheme_kernels = pade_transfer_matrix(scaled, scheme_order)
    except SingularMatrixError as exc:
        raise QuadratureFailureError(
            f"kernel of order {scheme_order} singular at a quadrature node: {exc}"
        ) from None

    size = m * (1 + 2 * d)
    cov = np.zeros((size, size))
    for i in range(m):
        ke = exact_kernels @ rvecs[i]  # (nodes, d)
        ks = scheme_kernels @ rvecs[i]
        stacked = np.concatenate(
            [np.ones((quad_nodes, 1)), ke, ks], axis=1
        )  # (nodes, 1 + 2d)
        block = np.einsum("q,qa,qb->ab", weights, stacked, stacked)
        idx = np.concatenate(
            [
                [i],
                m + i * d + np.arange(d),
                m + m * d + i * d + np.arange(d),
            ]
        )
        cov[np.ix_(idx, idx)] = block

    return JointGaussianSpec(
        m=m, dim=d, h=float(h), covariance=cov, cholesky=_psd_cholesky(cov)
    )


def _psd_cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a positive-semidefinite matrix.

    Zero diagonal entries force zero rows/columns (the matrix is PSD by
    construction), so only the nonzero principal submatrix is factored;
    that keeps structurally silent channels exactly silent.  A genuinely
    near-singular submatrix gets a roundoff-scale diagonal jitter.
    """
    size = cov.shape[0]
    live = np.flatnonzero(np.diag(cov) > 0.0)
    sub = cov[np.ix_(live, live)]
    chol = np.zeros_like(cov)
    if live.size:
        try:
            factor = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            jitter = CHOLESKY_JITTER * np.trace(sub)
            factor = np.linalg.cholesky(sub + jitter * np.eye(live.size))
        chol[np.ix_(live, live)] = factor
    return chol


def sample_joint(spec: JointGaussianSpec, stream: NoiseStream) -> np.ndarray:
    """Draw one stacked vector (increments, exact integrals, kernel integrals)."""
    return spec.cholesky @ stream.gaussians(spec.size)
