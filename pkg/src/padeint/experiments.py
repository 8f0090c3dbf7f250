"""Named built-in experiments with their reference parameterizations.

Each entry couples one of the two bundled systems (Kubo oscillator, linear
stochastic oscillator) with one scheme and the grids, horizons and path
counts used by the standard reproduction runs, plus the pass/fail
thresholds evaluated in ``--check`` mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .integrators import (
    AdditiveSchemeSpec,
    EulerMaruyamaSpec,
    LinearSchemeSpec,
    VARIANT_LEFT_RECTANGLE,
)
from .pade import PadePair
from .systems import (
    KuboParams,
    OscillatorParams,
    kubo_energy_matrix,
    kubo_initial,
    kubo_system,
    oscillator_initial,
    oscillator_system,
)

DEFAULT_SEED = 1

# The Kubo drift rate is fixed at 1; the noise amplitude is a harness
# choice: it must be large enough that the stochastic error (order
# (r+s)/2) dominates the deterministic one (order r+s) on the standard
# grid, and large enough that the highest-order errors stay above the
# float64 coupling floor at 1000 paths.
KUBO_A = 1.0
KUBO_SIGMA = 1.0

OSCILLATOR_SIGMA = 0.3

KUBO_CONV_GRID = (0.01, 0.02, 0.025, 0.05, 0.1)
OSC_CONV_GRID = (0.2, 0.1, 0.05, 0.04)


@dataclass(frozen=True)
class CheckSpec:
    """Threshold evaluated in --check mode.

    kind is one of ``slope`` (|slope - expected| <= tolerance),
    ``moment_slope`` (relative tolerance), ``drift_max`` (drift must stay
    at or below the threshold) or ``drift_min`` (drift must exceed it; used
    by the non-symplectic control).
    """

    kind: str
    expected: float
    tolerance: float


@dataclass(frozen=True)
class BuiltinExperiment:
    name: str
    description: str
    system_kind: str  # "linear" | "additive"
    make_system: Callable
    make_initial: Callable
    energy_matrix: Callable
    scheme: object
    conv_T: Optional[float] = None
    conv_grid: Optional[tuple] = None
    conv_paths: Optional[int] = None
    conv_check: Optional[CheckSpec] = None
    traj_T: Optional[float] = None
    traj_h: Optional[float] = None
    inv_T: Optional[float] = None
    inv_h: Optional[float] = None
    inv_check: Optional[CheckSpec] = None
    moment_T: Optional[float] = None
    moment_h: Optional[float] = None
    moment_paths: Optional[int] = None
    moment_check: Optional[CheckSpec] = None


def _kubo_builtin(k: int) -> BuiltinExperiment:
    return BuiltinExperiment(
        name=f"kubo-pade-{k}-{k}",
        description=(
            f"Kubo oscillator (a={KUBO_A}, sigma={KUBO_SIGMA}, start (1,0)), "
            f"implicit ({k},{k}) rational scheme; convergence: T=5, "
            f"h={list(KUBO_CONV_GRID)}, 1000 paths, expected slope {k}; "
            "invariants: T=100, h=0.02, energy p^2+q^2"
        ),
        system_kind="linear",
        make_system=lambda: kubo_system(KuboParams(a=KUBO_A, sigma=KUBO_SIGMA)),
        make_initial=lambda: kubo_initial(KuboParams(a=KUBO_A, sigma=KUBO_SIGMA)),
        energy_matrix=kubo_energy_matrix,
        scheme=LinearSchemeSpec(PadePair(k, k)),
        conv_T=5.0,
        conv_grid=KUBO_CONV_GRID,
        conv_paths=1000,
        conv_check=CheckSpec(kind="slope", expected=float(k), tolerance=0.25),
        traj_T=100.0,
        traj_h=0.02,
        inv_T=100.0,
        inv_h=0.02,
        inv_check=CheckSpec(kind="drift_max", expected=0.0, tolerance=1e-8),
    )


def _registry() -> dict:
    entries = [_kubo_builtin(k) for k in (1, 2, 3, 4)]
    entries.append(
        BuiltinExperiment(
            name="kubo-euler-maruyama",
            description=(
                f"Kubo oscillator (a={KUBO_A}, sigma={KUBO_SIGMA}, start (1,0)), "
                "explicit Euler increment map; non-symplectic control whose "
                "energy drift must exceed 1e-2 over T=100, h=0.02"
            ),
            system_kind="linear",
            make_system=lambda: kubo_system(KuboParams(a=KUBO_A, sigma=KUBO_SIGMA)),
            make_initial=lambda: kubo_initial(KuboParams(a=KUBO_A, sigma=KUBO_SIGMA)),
            energy_matrix=kubo_energy_matrix,
            scheme=EulerMaruyamaSpec(),
            traj_T=100.0,
            traj_h=0.02,
            inv_T=100.0,
            inv_h=0.02,
            inv_check=CheckSpec(kind="drift_min", expected=0.0, tolerance=1e-2),
        )
    )
    osc_params = OscillatorParams(sigma=OSCILLATOR_SIGMA)
    entries.append(
        BuiltinExperiment(
            name="oscillator-integral",
            description=(
                f"Linear stochastic oscillator (sigma={OSCILLATOR_SIGMA}, start "
                "(0,1)), (2,2) drift factor with jointly sampled (1,1) kernel "
                f"integrals; convergence: T=20, h={list(OSC_CONV_GRID)}, 500 "
                "paths, expected slope 3; moment growth: T=500, h=0.1, 500 "
                "paths, expected slope sigma^2"
            ),
            system_kind="additive",
            make_system=lambda: oscillator_system(osc_params),
            make_initial=lambda: oscillator_initial(osc_params),
            energy_matrix=lambda: np.eye(2),
            scheme=AdditiveSchemeSpec(PadePair(2, 2), PadePair(1, 1)),
            conv_T=20.0,
            conv_grid=OSC_CONV_GRID,
            conv_paths=500,
            conv_check=CheckSpec(kind="slope", expected=3.0, tolerance=0.3),
            traj_T=20.0,
            traj_h=0.1,
            moment_T=500.0,
            moment_h=0.1,
            moment_paths=500,
            moment_check=CheckSpec(
                kind="moment_slope",
                expected=OSCILLATOR_SIGMA**2,
                tolerance=0.10,
            ),
        )
    )
    entries.append(
        BuiltinExperiment(
            name="oscillator-rectangle",
            description=(
                f"Linear stochastic oscillator (sigma={OSCILLATOR_SIGMA}, start "
                "(0,1)), explicit (1,1) drift factor with left-rectangle "
                f"increments; convergence: T=20, h={list(OSC_CONV_GRID)}, 1000 "
                "paths, expected slope 1; moment growth: T=500, h=0.1, 500 "
                "paths, expected slope sigma^2"
            ),
            system_kind="additive",
            make_system=lambda: oscillator_system(osc_params),
            make_initial=lambda: oscillator_initial(osc_params),
            energy_matrix=lambda: np.eye(2),
            scheme=AdditiveSchemeSpec(
                PadePair(1, 1), PadePair(1, 1), variant=VARIANT_LEFT_RECTANGLE
            ),
            conv_T=20.0,
            conv_grid=OSC_CONV_GRID,
            conv_paths=1000,
            conv_check=CheckSpec(kind="slope", expected=1.0, tolerance=0.2),
            traj_T=20.0,
            traj_h=0.1,
            moment_T=500.0,
            moment_h=0.1,
            moment_paths=500,
            moment_check=CheckSpec(
                kind="moment_slope",
                expected=OSCILLATOR_SIGMA**2,
                tolerance=0.10,
            ),
        )
    )
    return {e.name: e for e in entries}


REGISTRY = _registry()


def get_builtin(name: str) -> BuiltinExperiment:
    try:
        return REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise KeyError(f"unknown builtin {name!r}; available: {known}") from None


def list_builtins():
    return [REGISTRY[name] for name in sorted(REGISTRY)]
