"""One-step maps and the trajectory driver.

Schemes come in three families:

* :class:`LinearSchemeSpec` -- the implicit (r, s) rational scheme for
  linear systems, x_{n+1} = D(B)^{-1} N(B) x_n with
  B = h A0 + sum_i sqrt(h) zeta_i Ai built from clamped increments.  The
  implicit relation is solved directly (the system is linear, so one
  pivoted solve per step is exact and cheaper than iteration).
* :class:`AdditiveSchemeSpec` -- for additive-noise systems, a rational
  drift factor of order (r_hat, s_hat) plus either the jointly sampled
  kernel integrals (``variant="integral"``) or a left-rectangle increment
  term pushed through the (1, 1) factor (``variant="left_rectangle"``).
* :class:`EulerMaruyamaSpec` -- explicit Euler increment map, kept as a
  non-symplectic control for the invariant-drift experiments.

:class:`ExactSolutionSpec` selects the exact flow itself as the "scheme",
which the analysis layer uses for coupling self-tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateStepError,
    PathFailureError,
    QuadratureFailureError,
    SingularMatrixError,
    SpecMismatchError,
)
from .linalg import matrix_exp, symplectic_defect
from .noise import (
    NoiseStream,
    StepNoise,
    additive_joint_spec,
    sample_joint,
    step_noise,
)
from .pade import PadePair, pade_apply, pade_transfer_matrix
from .systems import AdditiveSHS, LinearSHS, hamiltonian_quadratic

# Step failures worth wrapping with their step index; anything else is a
# programming error and propagates unchanged.
_STEP_FAILURES = (SingularMatrixError, QuadratureFailureError, DegenerateStepError)


@dataclass(frozen=True)
class LinearSchemeSpec:
    """Order pair and clamping level for the linear-system schemes.

    ``ell`` defaults to r + s, the level required for the scheme to attain
    mean-square order (r + s)/2.
    """

    order: PadePair
    ell: Optional[float] = None

    def __post_init__(self):
        if self.ell is None:
            object.__setattr__(self, "ell", float(self.order.total))
        if self.ell < 1.0:
            raise ValueError(f"truncation level must be >= 1, got {self.ell}")


VARIANT_INTEGRAL = "integral"
VARIANT_LEFT_RECTANGLE = "left_rectangle"


@dataclass(frozen=True)
class AdditiveSchemeSpec:
    """Drift/kernel order pair and noise-term variant for additive systems.

    The integral variant requires drift order r + s to equal kernel order
    plus 2 (with both kernel degrees >= 1), the regime in which the scheme
    attains mean-square order r_check + s_check + 1.
    """

    drift_order: PadePair
    kernel_order: PadePair = PadePair(1, 1)
    variant: str = VARIANT_INTEGRAL

    def __post_init__(self):
        if self.variant not in (VARIANT_INTEGRAL, VARIANT_LEFT_RECTANGLE):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == VARIANT_INTEGRAL:
            if self.kernel_order.r < 1 or self.kernel_order.s < 1:
                raise ValueError("integral variant needs kernel degrees >= 1")
            if self.drift_order.total != self.kernel_order.total + 2:
                raise ValueError(
                    "integral variant needs drift degree sum = kernel degree sum + 2, "
                    f"got {self.drift_order} and {self.kernel_order}"
                )
        else:
            if self.drift_order.r < 1 or self.drift_order.s < 1:
                raise ValueError("left-rectangle variant needs drift degrees >= 1")


@dataclass(frozen=True)
class EulerMaruyamaSpec:
    """Explicit Euler increment map (non-symplectic control)."""


@dataclass(frozen=True)
class ExactSolutionSpec:
    """Marker: use the exact flow as the scheme (coupling self-tests)."""


@dataclass
class Trajectory:
    """Uniformly spaced trajectory with optional per-step diagnostics."""

    times: np.ndarray
    states: np.ndarray
    hamiltonians: Optional[np.ndarray] = None
    defects: Optional[np.ndarray] = None

    def __post_init__(self):
        steps = np.diff(self.times)
        if len(steps) and (
            steps[0] <= 0.0 or not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0)
        ):
            raise ValueError("trajectory times must be uniformly spaced and increasing")


def step_linear(
    sys: LinearSHS,
    spec: LinearSchemeSpec,
    x: np.ndarray,
    h: float,
    noise: StepNoise,
) -> np.ndarray:
    """One step of the (r, s) scheme: assemble B and apply D^{-1} N.

    Raises
    ------
    SpecMismatchError
        If the noise was generated for a different step size or clamping
        level than the scheme specifies.
    SingularDenominatorError
        If the denominator is singular (step too large for this order and
        noise draw).
    """
    if abs(noise.h - h) > 1e-15 * max(1.0, abs(h)) or noise.ell != spec.ell:
        raise SpecMismatchError(
            f"noise (h={noise.h}, ell={noise.ell}) does not match "
            f"step (h={h}, ell={spec.ell})"
        )
    bbar = _linear_step_generator(sys, h, noise.zeta)
    return pade_apply(bbar, spec.order, np.asarray(x, dtype=float))


def _linear_step_generator(sys: LinearSHS, h: float, zeta: np.ndarray) -> np.ndarray:
    """B = h A0 + sum_i sqrt(h) zeta_i Ai, batched over leading axes of zeta."""
    zeta = np.asarray(zeta, dtype=float)
    return h * sys.generators[0] + np.einsum(
        "...i,ijk->...jk", np.sqrt(h) * zeta, sys.generators[1:]
    )


def linear_transfer_matrix(
    sys: LinearSHS, spec: LinearSchemeSpec, h: float, noise: StepNoise
) -> np.ndarray:
    """Full one-step transfer matrix for the given noise draw."""
    bbar = _linear_step_generator(sys, h, noise.zeta)
    return pade_transfer_matrix(bbar, spec.order)


def step_additive(
    sys: AdditiveSHS,
    spec: AdditiveSchemeSpec,
    z: np.ndarray,
    h: float,
    joint,
) -> np.ndarray:
    """One step of an additive-noise scheme.

    For the integral variant ``joint`` must be the (m, d) array of kernel
    integral vectors from a joint draw; for the left-rectangle variant it
    must be the (m,) array of Wiener increments.

    Raises
    ------
    SpecMismatchError
        If the shape of ``joint`` disagrees with the variant.
    SingularDenominatorError
        If a rational factor is singular at this step size.
    """
    z = np.asarray(z, dtype=float)
    joint = np.asarray(joint, dtype=float)
    drift = pade_transfer_matrix(h * sys.drift_generator, spec.drift_order)
    out = drift @ z
    if spec.variant == VARIANT_INTEGRAL:
        if joint.shape != (sys.m, sys.dim):
            raise SpecMismatchError(
                f"integral variant expects kernel integrals of shape "
                f"({sys.m}, {sys.dim}), got {joint.shape}"
            )
        return out + joint.sum(axis=0)
    if joint.shape != (sys.m,):
        raise SpecMismatchError(
            f"left-rectangle variant expects increments of shape ({sys.m},), "
            f"got {joint.shape}"
        )
    cayley = pade_transfer_matrix(h * sys.drift_generator, PadePair(1, 1))
    return out + (cayley @ sys.noise_vectors.T) @ joint


def _jacobian_defect(matrix: np.ndarray) -> float:
    return float(symplectic_defect(matrix))


def integrate(
    sys,
    spec,
    x0: np.ndarray,
    h: float,
    steps: int,
    stream: NoiseStream,
    record_hamiltonian: Optional[np.ndarray] = None,
    record_defect: bool = False,
    t0: float = 0.0,
) -> Trajectory:
    """Iterate the one-step map of (sys, spec) over a uniform grid.

    Diagnostics are opt-in: pass a symmetric quadratic-form matrix as
    ``record_hamiltonian`` to record H(x_k) at every node, and/or set
    ``record_defect`` to record the symplectic defect of each step's
    state-to-state Jacobian.  The result is deterministic given the
    stream's (seed, path_index).

    Raises
    ------
    PathFailureError
        Wrapping any step failure together with the failing step index.
    """
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    x0 = np.asarray(x0, dtype=float)
    times = t0 + h * np.arange(steps + 1)
    states = np.empty((steps + 1, sys.dim))
    states[0] = x0
    defects = np.empty(steps) if record_defect else None

    if isinstance(sys, LinearSHS):
        stepper = _make_linear_stepper(sys, spec, h, stream, record_defect)
    elif isinstance(sys, AdditiveSHS):
        stepper = _make_additive_stepper(sys, spec, h, stream, record_defect)
    else:
        raise TypeError(f"unsupported system type {type(sys).__name__}")

    for k in range(steps):
        try:
            new_state, defect = stepper(states[k])
        except _STEP_FAILURES as exc:
            raise PathFailureError(k, exc) from exc
        states[k + 1] = new_state
        if record_defect:
            defects[k] = defect

    hams = None
    if record_hamiltonian is not None:
        hams = hamiltonian_quadratic(record_hamiltonian, states)
    return Trajectory(times=times, states=states, hamiltonians=hams, defects=defects)


def _make_linear_stepper(sys, spec, h, stream, record_defect):
    if isinstance(spec, LinearSchemeSpec):

        def stepper(x):
            # A channel-free system is the deterministic special case.
            zeta = (
                step_noise(stream, h, sys.m, spec.ell).zeta if sys.m else np.zeros(0)
            )
            bbar = _linear_step_generator(sys, h, zeta)
            defect = None
            if record_defect:
                transfer = pade_transfer_matrix(bbar, spec.order)
                defect = _jacobian_defect(transfer)
                return transfer @ x, defect
            return pade_apply(bbar, spec.order, x), defect

    elif isinstance(spec, EulerMaruyamaSpec):

        def stepper(x):
            xi = stream.gaussians(sys.m)
            braw = _linear_step_generator(sys, h, xi)
            update = np.eye(sys.dim) + braw
            defect = _jacobian_defect(update) if record_defect else None
            return update @ x, defect

    elif isinstance(spec, ExactSolutionSpec):

        def stepper(x):
            xi = stream.gaussians(sys.m)
            exponent = _linear_step_generator(sys, h, xi)
            flow = matrix_exp(exponent)
            defect = _jacobian_defect(flow) if record_defect else None
            return flow @ x, defect

    else:
        raise TypeError(f"unsupported scheme {type(spec).__name__} for a linear system")
    return stepper


def _make_additive_stepper(sys, spec, h, stream, record_defect):
    if isinstance(spec, AdditiveSchemeSpec):
        joint = additive_joint_spec(
            sys.drift_generator, sys.noise_vectors, h, spec.kernel_order
        )
        drift = pade_transfer_matrix(h * sys.drift_generator, spec.drift_order)
        defect = _jacobian_defect(drift) if record_defect else None
        if spec.variant == VARIANT_INTEGRAL:

            def stepper(z):
                _, _, i_scheme = joint.split(sample_joint(joint, stream))
                return drift @ z + i_scheme.sum(axis=0), defect

        else:
            cayley = pade_transfer_matrix(h * sys.drift_generator, PadePair(1, 1))
            noise_mat = cayley @ sys.noise_vectors.T  # (d, m)

            def stepper(z):
                dw, _, _ = joint.split(sample_joint(joint, stream))
                return drift @ z + noise_mat @ dw, defect

    elif isinstance(spec, ExactSolutionSpec):
        joint = additive_joint_spec(
            sys.drift_generator, sys.noise_vectors, h, PadePair(1, 1)
        )
        flow = matrix_exp(h * sys.drift_generator)
        defect = _jacobian_defect(flow) if record_defect else None

        def stepper(z):
            _, i_exact, _ = joint.split(sample_joint(joint, stream))
            return flow @ z + i_exact.sum(axis=0), defect

    else:
        raise TypeError(
            f"unsupported scheme {type(spec).__name__} for an additive system"
        )
    return stepper
