"""Structure-preserving rational-approximant schemes for stochastic
Hamiltonian systems, with a Monte-Carlo strong-error harness.

The package covers two system families (linear multiplicative-noise
Hamiltonian systems in the Stratonovich sense, and additive-noise
Hamiltonian systems in the Ito sense), the implicit (r, s)
rational-approximant one-step maps for both, exact-solution comparators,
and the analysis layer that measures mean-square convergence orders and
geometric invariants.
"""

from .errors import (
    ConfigError,
    DegenerateSeriesError,
    DegenerateStepError,
    MatrixExpOverflowError,
    MissingDiagnosticsError,
    NonCommutingGeneratorsError,
    NonIntegralStepCountError,
    NotInfinitesimalSymplecticError,
    NotSymmetricError,
    OddDimensionError,
    PadeIntError,
    PathFailureError,
    QuadratureFailureError,
    SingularDenominatorError,
    SingularMatrixError,
    SpecMismatchError,
)
from .linalg import (
    infinitesimal_defect,
    is_infinitesimal_symplectic,
    matrix_exp,
    solve_linear,
    symplectic_defect,
    symplectic_form,
)
from .pade import (
    PadeCoefficients,
    PadePair,
    pade_apply,
    pade_coefficients,
    pade_transfer_matrix,
    residual_constant,
)
from .noise import (
    JointGaussianSpec,
    NoiseStream,
    StepNoise,
    additive_joint_spec,
    sample_joint,
    step_noise,
    truncate,
    truncation_bound,
)
from .systems import (
    AdditiveSHS,
    KuboParams,
    LinearSHS,
    OscillatorParams,
    exact_additive_step,
    exact_kubo,
    exact_linear_step,
    hamiltonian_quadratic,
    kubo_energy_matrix,
    kubo_initial,
    kubo_system,
    oscillator_initial,
    oscillator_system,
)
from .integrators import (
    AdditiveSchemeSpec,
    EulerMaruyamaSpec,
    ExactSolutionSpec,
    LinearSchemeSpec,
    Trajectory,
    integrate,
    linear_transfer_matrix,
    step_additive,
    step_linear,
)
from .analysis import (
    ErrorSeries,
    MomentSeries,
    OrderFit,
    convergence_series,
    filtered_for_fit,
    fit_order,
    hamiltonian_drift,
    second_moment_growth,
    strong_error,
    zero_crossings,
)

__version__ = "0.1.0"
