"""System definitions and exact-solution maps.

Two families are supported, both with quadratic Hamiltonian structure:

* :class:`LinearSHS` -- a 2n-dimensional linear Stratonovich system
  dX = A0 X dt + sum_i Ai X o dW^i with every generator infinitesimal
  symplectic (equivalently J Ai symmetric).
* :class:`AdditiveSHS` -- a 2n-dimensional Ito system
  dZ = J^{-1} C0 Z dt + sum_i J^{-1} R_i dW^i with C0 symmetric and
  constant noise vectors R_i derived from linear noise Hamiltonians.

The built-in examples are the Kubo oscillator and the linear stochastic
oscillator, each with a closed-form or semi-closed-form exact solution used
as the strong-error comparator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NonCommutingGeneratorsError,
    NotInfinitesimalSymplecticError,
    NotSymmetricError,
)
from .linalg import infinitesimal_defect, matrix_exp, symplectic_form
from .noise import StepNoise

INF_SYMPLECTIC_TOL = 1e-10
SYMMETRY_TOL = 1e-12
COMMUTE_TOL = 1e-12


class LinearSHS:
    """Validated linear Stratonovich system dX = A0 X dt + sum Ai X o dW^i.

    Parameters
    ----------
    generators : sequence of (2n, 2n) arrays
        The drift generator A0 followed by the m diffusion generators.

    Raises
    ------
    NotInfinitesimalSymplecticError
        Identifying the first generator with ||J Ai + Ai^T J||_max above
        ``INF_SYMPLECTIC_TOL``.
    """

    def __init__(self, generators):
        arr = np.array(generators, dtype=float)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(
                f"expected a stack of square generator matrices, got shape {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise ValueError("need at least the drift generator")
        if arr.shape[1] % 2 != 0:
            raise ValueError(f"phase-space dimension {arr.shape[1]} must be even")
        if not np.all(np.isfinite(arr)):
            raise ValueError("generator entries must be finite")
        for i, gen in enumerate(arr):
            defect = infinitesimal_defect(gen)
            if defect > INF_SYMPLECTIC_TOL:
                raise NotInfinitesimalSymplecticError(i, defect)
        arr.setflags(write=False)
        self.generators = arr
        self.dim = arr.shape[1]
        self.n = self.dim // 2
        self.m = arr.shape[0] - 1
        self.commuting = self._max_commutator() <= COMMUTE_TOL
        # Drift Hamiltonian matrix C0 = J A0 (symmetric by validation).
        self.drift_hamiltonian_matrix = symplectic_form(self.n) @ arr[0]

    def _max_commutator(self) -> float:
        worst = 0.0
        for i in range(len(self.generators)):
            for j in range(i + 1, len(self.generators)):
                a, b = self.generators[i], self.generators[j]
                worst = max(worst, float(np.abs(a @ b - b @ a).max()))
        return worst

    def __repr__(self) -> str:
        return f"LinearSHS(n={self.n}, m={self.m}, commuting={self.commuting})"


class AdditiveSHS:
    """Validated Ito system dZ = J^{-1} C0 Z dt + sum J^{-1} R_i dW^i.

    ``c1`` and ``c2`` hold, per channel, the n-dimensional coefficient
    vectors of the linear noise Hamiltonians <c1, P> - <c2, Q>; the derived
    noise direction in state space is J^{-1} R_i with R_i = (c1_i, -c2_i).

    Raises
    ------
    NotSymmetricError
        If the drift Hamiltonian matrix C0 is not symmetric.
    """

    def __init__(self, c0, c1, c2):
        c0 = np.array(c0, dtype=float)
        if c0.ndim != 2 or c0.shape[0] != c0.shape[1] or c0.shape[0] % 2 != 0:
            raise ValueError(f"C0 must be square of even dimension, got {c0.shape}")
        if not np.all(np.isfinite(c0)):
            raise ValueError("C0 entries must be finite")
        asym = float(np.abs(c0 - c0.T).max())
        if asym > SYMMETRY_TOL:
            raise NotSymmetricError(f"C0 is not symmetric (max |C0 - C0^T| = {asym:.3e})")
        self.dim = c0.shape[0]
        self.n = self.dim // 2
        c1 = np.atleast_2d(np.asarray(c1, dtype=float))
        c2 = np.atleast_2d(np.asarray(c2, dtype=float))
        if c1.shape != c2.shape or c1.shape[1] != self.n:
            raise ValueError(
                f"per-channel coefficient vectors must both be (m, {self.n}), "
                f"got {c1.shape} and {c2.shape}"
            )
        self.m = c1.shape[0]
        j = symplectic_form(self.n)
        jinv = -j
        c0.setflags(write=False)
        self.c0 = c0
        self.c1 = c1
        self.c2 = c2
        # R_i = (c1_i, -c2_i); state-space noise directions J^{-1} R_i.
        rmat = np.concatenate([c1, -c2], axis=1)
        self.drift_generator = jinv @ c0
        self.noise_vectors = rmat @ jinv.T
        self.noise_vectors.setflags(write=False)

    def __repr__(self) -> str:
        return f"AdditiveSHS(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class KuboParams:
    """Kubo oscillator dP = -aQ dt - sigma Q o dW, dQ = aP dt + sigma P o dW."""

    a: float = 1.0
    sigma: float = 0.5
    p0: float = 1.0
    q0: float = 0.0


@dataclass(frozen=True)
class OscillatorParams:
    """Linear stochastic oscillator dp = -q dt + sigma dW, dq = p dt."""

    sigma: float = 0.3
    p0: float = 0.0
    q0: float = 1.0


_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def kubo_system(params: KuboParams) -> LinearSHS:
    """Kubo oscillator as a one-channel linear system."""
    return LinearSHS([params.a * _ROTATION, params.sigma * _ROTATION])


def kubo_initial(params: KuboParams) -> np.ndarray:
    return np.array([params.p0, params.q0])


def kubo_energy_matrix() -> np.ndarray:
    """Quadratic-form matrix of the conserved quantity p^2 + q^2."""
    return 2.0 * np.eye(2)


def oscillator_system(params: OscillatorParams) -> AdditiveSHS:
    """Linear stochastic oscillator as a one-channel additive system.

    The drift Hamiltonian is (p^2 + q^2)/2 and the noise Hamiltonian is
    -sigma q, giving the state-space noise direction (sigma, 0).
    """
    return AdditiveSHS(np.eye(2), [[0.0]], [[params.sigma]])


def oscillator_initial(params: OscillatorParams) -> np.ndarray:
    return np.array([params.p0, params.q0])


def exact_linear_step(
    sys: LinearSHS, x: np.ndarray, h: float, noise: StepNoise
) -> np.ndarray:
    """Advance the exact flow of a commuting linear system by one step.

    Uses the raw (unclamped) Gaussians of ``noise``: the exact solution is
    driven by the true Wiener increments, while the schemes consume the
    clamped ones; the difference is part of the method error being
    measured.

    Raises
    ------
    NonCommutingGeneratorsError
        If the generator family does not commute pairwise (tolerance
        ``COMMUTE_TOL``); the exact flow is a plain matrix exponential only
        in the commuting case.
    """
    if not sys.commuting:
        raise NonCommutingGeneratorsError(
            "exact one-step flow requires pairwise-commuting generators"
        )
    exponent = h * sys.generators[0] + np.einsum(
        "i,ijk->jk", np.sqrt(h) * noise.xi, sys.generators[1:]
    )
    return matrix_exp(exponent) @ np.asarray(x, dtype=float)


def exact_kubo(params: KuboParams, t: float, w: float) -> np.ndarray:
    """Closed-form Kubo solution at time t given the Wiener value W(t) = w.

    The state rotates by the angle a t + sigma w, so p^2 + q^2 is conserved
    exactly.
    """
    angle = params.a * t + params.sigma * w
    c, s = np.cos(angle), np.sin(angle)
    return np.array(
        [params.p0 * c - params.q0 * s, params.p0 * s + params.q0 * c]
    )


def exact_additive_step(sys: AdditiveSHS, z: np.ndarray, h: float, i_exact) -> np.ndarray:
    """Advance the exact flow of an additive system by one step.

    ``i_exact`` holds, per channel, the exact-flow stochastic integral for
    this step (the middle block of a joint draw); the update is
    exp(h G) z + sum_i i_exact[i].
    """
    z = np.asarray(z, dtype=float)
    out = matrix_exp(h * sys.drift_generator) @ z
    for vec in np.atleast_2d(np.asarray(i_exact, dtype=float)):
        out = out + vec
    return out


def hamiltonian_quadratic(c: np.ndarray, x: np.ndarray):
    """Quadratic Hamiltonian H(x) = x^T c x / 2 (batched over leading axes)."""
    c = np.asarray(c, dtype=float)
    if np.abs(c - c.T).max() > SYMMETRY_TOL:
        raise NotSymmetricError("quadratic-form matrix must be symmetric")
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.einsum("...i,ij,...j->...", x, c, x)
    return float(out) if out.ndim == 0 else out
