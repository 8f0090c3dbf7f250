"""Command-line front end: experiment configuration, CSV emission, seeds.

Subcommands
-----------
convergence   strong-error grid sweep with a log-log order fit
trajectory    one sample path, optional energy / defect diagnostics
invariants    one path with energy and symplectic-defect columns forced on
moment-growth sample second moment over time with a fitted slope

Experiments come either from a named builtin (``--builtin``, see
``--list``) or from a TOML config file (``--config``); the schema is
documented in the README.  Every command honours ``--seed`` (default from
the PADEINT_SEED environment variable) and repeated invocations with the
same seed produce byte-identical CSV files; ``--deterministic-reduce``
keeps this true for any ``--workers`` count.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 threshold failure in ``--check`` mode.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis
from .errors import ConfigError, PadeIntError
from .experiments import DEFAULT_SEED, CheckSpec, get_builtin, list_builtins
from .integrators import (
    AdditiveSchemeSpec,
    EulerMaruyamaSpec,
    LinearSchemeSpec,
    VARIANT_INTEGRAL,
    VARIANT_LEFT_RECTANGLE,
    integrate,
)
from .noise import NoiseStream
from .pade import PadePair
from .systems import AdditiveSHS, LinearSHS
from .linalg import symplectic_form

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

SEED_ENV = "PADEINT_SEED"


@dataclass
class RunSetup:
    label: str
    system: object
    scheme: object
    x0: np.ndarray
    energy_matrix: np.ndarray
    T: float
    grid: list
    paths: int
    seed: int
    check: Optional[CheckSpec]


def _fmt(value) -> str:
    return format(float(value), ".17g")


def _emit(out: Optional[str], header, rows, footer) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    lines.extend(f"# {item}" for item in footer)
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _scheme_label(spec) -> str:
    if isinstance(spec, LinearSchemeSpec):
        return f"pade-linear-{spec.order}-ell-{spec.ell:g}"
    if isinstance(spec, AdditiveSchemeSpec):
        if spec.variant == VARIANT_INTEGRAL:
            return f"additive-integral-{spec.drift_order}-{spec.kernel_order}"
        return f"additive-left-rectangle-{spec.drift_order}"
    if isinstance(spec, EulerMaruyamaSpec):
        return "euler-maruyama"
    return type(spec).__name__


# ---------------------------------------------------------------------------
# configuration


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _cfg_get(table: dict, section: str, key: str, required: bool = False, default=None):
    if key not in table:
        if required:
            raise ConfigError(f"[{section}] is missing required key {key!r}")
        return default
    return table[key]


def _as_matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a nested array of numbers") from None
    if arr.ndim != 2:
        raise ConfigError(f"{where} must be a 2-d nested array, got shape {arr.shape}")
    return arr


def _build_system_from_config(cfg: dict):
    if "system" not in cfg:
        raise ConfigError("config is missing the [system] table")
    table = cfg["system"]
    kind = _cfg_get(table, "system", "kind", required=True)
    try:
        if kind == "linear":
            gens = _cfg_get(table, "system", "generators", required=True)
            if not isinstance(gens, list) or not gens:
                raise ConfigError("[system].generators must be a nonempty list of matrices")
            system = LinearSHS([_as_matrix(g, "[system].generators[i]") for g in gens])
            energy = symplectic_form(system.n) @ system.generators[0]
        elif kind == "additive":
            system = AdditiveSHS(
                _as_matrix(_cfg_get(table, "system", "c0", required=True), "[system].c0"),
                _as_matrix(_cfg_get(table, "system", "c1", required=True), "[system].c1"),
                _as_matrix(_cfg_get(table, "system", "c2", required=True), "[system].c2"),
            )
            energy = system.c0
        else:
            raise ConfigError(f"[system].kind must be 'linear' or 'additive', got {kind!r}")
    except PadeIntError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[system] is invalid: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"[system] is invalid: {exc}") from None
    return system, energy


def _pair(value, where: str) -> PadePair:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) for v in value)
    ):
        raise ConfigError(f"{where} must be a pair of integers, e.g. [1, 1]")
    try:
        return PadePair(value[0], value[1])
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _build_scheme_from_config(cfg: dict, system) -> object:
    if "scheme" not in cfg:
        raise ConfigError("config is missing the [scheme] table")
    table = cfg["scheme"]
    kind = _cfg_get(table, "scheme", "kind", required=True)
    try:
        if kind == "pade-linear":
            spec = LinearSchemeSpec(
                _pair(_cfg_get(table, "scheme", "order", required=True), "[scheme].order"),
                ell=_cfg_get(table, "scheme", "ell"),
            )
        elif kind == "euler-maruyama":
            spec = EulerMaruyamaSpec()
        elif kind == "additive-integral":
            spec = AdditiveSchemeSpec(
                _pair(
                    _cfg_get(table, "scheme", "drift_order", required=True),
                    "[scheme].drift_order",
                ),
                _pair(
                    _cfg_get(table, "scheme", "kernel_order", required=True),
                    "[scheme].kernel_order",
                ),
                variant=VARIANT_INTEGRAL,
            )
        elif kind == "additive-left-rectangle":
            spec = AdditiveSchemeSpec(
                _pair(
                    _cfg_get(table, "scheme", "drift_order", required=True),
                    "[scheme].drift_order",
                ),
                PadePair(1, 1),
                variant=VARIANT_LEFT_RECTANGLE,
            )
        else:
            raise ConfigError(f"[scheme].kind {kind!r} is not recognised")
    except ValueError as exc:
        raise ConfigError(f"[scheme] is invalid: {exc}") from None

    linear_scheme = isinstance(spec, (LinearSchemeSpec, EulerMaruyamaSpec))
    if linear_scheme != isinstance(system, LinearSHS):
        raise ConfigError(
            f"[scheme].kind {kind!r} does not apply to a "
            f"{'linear' if isinstance(system, LinearSHS) else 'additive'} system"
        )
    return spec


def _build_check_from_config(cfg: dict) -> Optional[CheckSpec]:
    if "check" not in cfg:
        return None
    table = cfg["check"]
    kind = _cfg_get(table, "check", "kind", required=True)
    if kind not in ("slope", "moment_slope", "drift_max", "drift_min"):
        raise ConfigError(f"[check].kind {kind!r} is not recognised")
    return CheckSpec(
        kind=kind,
        expected=float(_cfg_get(table, "check", "expected", default=0.0)),
        tolerance=float(_cfg_get(table, "check", "tolerance", required=True)),
    )


def _resolve_seed(args, cfg_run: dict) -> int:
    if args.seed is not None:
        seed = args.seed
    elif "seed" in cfg_run:
        seed = cfg_run["seed"]
    elif os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    else:
        seed = DEFAULT_SEED
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _validate_grid(grid, T: float) -> list:
    if not grid:
        raise ConfigError("step-size grid must not be empty")
    out = []
    for h in grid:
        h = float(h)
        if not 0.0 < h < 1.0:
            raise ConfigError(f"grid step sizes must lie in (0, 1), got {h}")
        steps = round(T / h)
        if steps < 1 or abs(T / h - steps) > 1e-9:
            raise ConfigError(f"T/h must be an integer; T={T}, h={h}")
        out.append(h)
    return out


def _setup(args, command: str) -> RunSetup:
    if args.builtin and args.config:
        raise ConfigError("give either --builtin or --config, not both")
    if args.builtin:
        try:
            builtin = get_builtin(args.builtin)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        system = builtin.make_system()
        scheme = builtin.scheme
        x0 = builtin.make_initial()
        energy = builtin.energy_matrix()
        label = builtin.name
        if command == "convergence":
            if builtin.conv_grid is None:
                raise ConfigError(f"builtin {builtin.name!r} has no convergence run")
            T, grid, paths = builtin.conv_T, list(builtin.conv_grid), builtin.conv_paths
            check = builtin.conv_check
        elif command == "trajectory":
            T, grid, paths = builtin.traj_T, [builtin.traj_h], 1
            check = None
        elif command == "invariants":
            T, grid, paths = builtin.inv_T, [builtin.inv_h], 1
            check = builtin.inv_check
        else:  # moment-growth
            if builtin.moment_T is None:
                raise ConfigError(f"builtin {builtin.name!r} has no moment-growth run")
            T, grid, paths = builtin.moment_T, [builtin.moment_h], builtin.moment_paths
            check = builtin.moment_check
        cfg_run = {}
    elif args.config:
        cfg = _load_toml(args.config)
        system, energy = _build_system_from_config(cfg)
        scheme = _build_scheme_from_config(cfg, system)
        check = _build_check_from_config(cfg)
        cfg_run = cfg.get("run", {})
        label = os.path.basename(args.config)
        initial = _cfg_get(cfg_run, "run", "initial", required=True)
        x0 = np.asarray(initial, dtype=float)
        if x0.shape != (system.dim,):
            raise ConfigError(
                f"[run].initial must have {system.dim} entries, got {list(initial)}"
            )
        if "energy_matrix" in cfg_run:
            energy = _as_matrix(cfg_run["energy_matrix"], "[run].energy_matrix")
        T = float(_cfg_get(cfg_run, "run", "t_final", required=True))
        grid = _cfg_get(cfg_run, "run", "grid", required=True)
        if not isinstance(grid, list):
            raise ConfigError("[run].grid must be a list of step sizes")
        paths = int(_cfg_get(cfg_run, "run", "paths", default=1000))
    else:
        raise ConfigError("an experiment is required: pass --builtin NAME or --config PATH")

    if args.paths is not None:
        if args.paths < 1:
            raise ConfigError(f"--paths must be positive, got {args.paths}")
        paths = args.paths
    seed = _resolve_seed(args, cfg_run)
    grid = _validate_grid(grid, T)
    if T is None or T <= 0:
        raise ConfigError(f"final time must be positive, got {T}")
    return RunSetup(
        label=label,
        system=system,
        scheme=scheme,
        x0=x0,
        energy_matrix=energy,
        T=float(T),
        grid=grid,
        paths=int(paths),
        seed=seed,
        check=check,
    )


# ---------------------------------------------------------------------------
# commands


def _footer_common(setup: RunSetup) -> list:
    return [
        f"system = {setup.label}",
        f"scheme = {_scheme_label(setup.scheme)}",
        f"seed = {setup.seed}",
    ]


def cmd_convergence(args) -> int:
    setup = _setup(args, "convergence")
    if len(setup.grid) < 3:
        raise ConfigError("convergence needs a grid of at least 3 step sizes")
    series = analysis.convergence_series(
        setup.system,
        setup.scheme,
        setup.x0,
        setup.T,
        setup.grid,
        setup.paths,
        setup.seed,
        workers=args.workers,
        deterministic=args.deterministic_reduce or args.workers <= 1,
    )
    fit_series, dropped = analysis.filtered_for_fit(series)
    fit = analysis.fit_order(fit_series)
    rows = list(zip(series.h_values, series.rms_errors, series.stderrs))
    footer = [
        f"fitted_slope = {_fmt(fit.slope)}",
        f"fit_intercept = {_fmt(fit.intercept)}",
        f"fit_max_residual = {_fmt(fit.max_residual)}",
        "dropped_points = " + (",".join(_fmt(h) for h in dropped) if dropped else "none"),
        f"paths = {series.paths}",
        f"aborted_paths = {series.aborted_paths}",
        f"T = {_fmt(setup.T)}",
    ] + _footer_common(setup)
    _emit(args.out, ["h", "rms_error", "stderr"], rows, footer)
    if args.check:
        return _evaluate_check(setup.check, slope=fit.slope)
    return EXIT_OK


def _single_path(setup: RunSetup, record_energy: bool, record_defect: bool):
    h = setup.grid[0]
    steps = round(setup.T / h)
    stream = NoiseStream(setup.seed, 0)
    return integrate(
        setup.system,
        setup.scheme,
        setup.x0,
        h,
        steps,
        stream,
        record_hamiltonian=setup.energy_matrix if record_energy else None,
        record_defect=record_defect,
    )


def _component_names(system) -> list:
    n = system.n
    if n == 1:
        return ["p", "q"]
    return [f"p{i + 1}" for i in range(n)] + [f"q{i + 1}" for i in range(n)]


def cmd_trajectory(args) -> int:
    setup = _setup(args, "trajectory")
    if len(setup.grid) != 1:
        raise ConfigError("trajectory needs exactly one step size in the grid")
    record_energy = args.record_energy
    record_defect = args.record_defect
    traj = _single_path(setup, record_energy, record_defect)
    header = ["t"] + _component_names(setup.system)
    columns = [traj.times] + [traj.states[:, i] for i in range(setup.system.dim)]
    if record_energy:
        header.append("H")
        columns.append(traj.hamiltonians)
    if record_defect:
        header.append("defect")
        # Row k carries the defect of the step arriving at node k; node 0 has
        # no step, so its entry is 0.
        columns.append(np.concatenate([[0.0], traj.defects]))
    rows = list(zip(*columns))
    footer = [f"h = {_fmt(setup.grid[0])}", f"T = {_fmt(setup.T)}"] + _footer_common(setup)
    _emit(args.out, header, rows, footer)
    return EXIT_OK


def cmd_invariants(args) -> int:
    setup = _setup(args, "invariants")
    if len(setup.grid) != 1:
        raise ConfigError("invariants needs exactly one step size in the grid")
    traj = _single_path(setup, record_energy=True, record_defect=True)
    defects = np.concatenate([[0.0], traj.defects])
    rows = list(zip(traj.times, traj.hamiltonians, defects))
    drift = analysis.hamiltonian_drift(traj)
    footer = [
        f"h = {_fmt(setup.grid[0])}",
        f"T = {_fmt(setup.T)}",
        f"max_relative_energy_drift = {_fmt(drift)}",
        f"max_step_defect = {_fmt(float(traj.defects.max()))}",
    ] + _footer_common(setup)
    _emit(args.out, ["t", "H", "defect"], rows, footer)
    if args.check:
        return _evaluate_check(setup.check, drift=drift)
    return EXIT_OK


def cmd_moment_growth(args) -> int:
    setup = _setup(args, "moment-growth")
    if len(setup.grid) != 1:
        raise ConfigError("moment-growth needs exactly one step size in the grid")
    series, slope = analysis.second_moment_growth(
        setup.system,
        setup.scheme,
        setup.x0,
        setup.T,
        setup.grid[0],
        setup.paths,
        setup.seed,
        workers=args.workers,
        deterministic=args.deterministic_reduce or args.workers <= 1,
    )
    rows = list(zip(series.times, series.second_moment))
    footer = [
        f"fitted_slope = {_fmt(slope)}",
        f"paths = {series.paths}",
        f"h = {_fmt(setup.grid[0])}",
        f"T = {_fmt(setup.T)}",
    ] + _footer_common(setup)
    _emit(args.out, ["t", "second_moment"], rows, footer)
    if args.check:
        return _evaluate_check(setup.check, slope=slope)
    return EXIT_OK


def _evaluate_check(check: Optional[CheckSpec], slope=None, drift=None) -> int:
    if check is None:
        raise ConfigError("--check requested but no thresholds are defined for this run")
    if check.kind == "slope":
        ok = slope is not None and abs(slope - check.expected) <= check.tolerance
        detail = f"slope {slope} vs expected {check.expected} +/- {check.tolerance}"
    elif check.kind == "moment_slope":
        ok = (
            slope is not None
            and abs(slope - check.expected) <= check.tolerance * abs(check.expected)
        )
        detail = (
            f"slope {slope} vs expected {check.expected} "
            f"+/- {check.tolerance * 100:g}% relative"
        )
    elif check.kind == "drift_max":
        ok = drift is not None and drift <= check.tolerance
        detail = f"drift {drift} vs bound {check.tolerance}"
    else:  # drift_min
        ok = drift is not None and drift > check.tolerance
        detail = f"drift {drift} must exceed {check.tolerance}"
    status = "pass" if ok else "FAIL"
    print(f"check {status}: {detail}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# entry point


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--builtin", help="name of a built-in experiment (see --list)")
    sub.add_argument("--config", help="path to a TOML experiment config")
    sub.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    sub.add_argument("--paths", type=int, default=None, help="override the path count")
    sub.add_argument("--workers", type=int, default=1, help="process-pool size")
    sub.add_argument(
        "--deterministic-reduce",
        action="store_true",
        help="accumulate Monte-Carlo partial sums in a fixed order",
    )
    sub.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    sub.add_argument(
        "--check",
        action="store_true",
        help="evaluate the run's pass/fail thresholds and set the exit code",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padeint",
        description=(
            "Structure-preserving rational-approximant schemes for stochastic "
            "Hamiltonian systems: convergence, trajectory and invariant "
            "experiments with CSV output."
        ),
    )
    parser.add_argument(
        "--list", action="store_true", help="list built-in experiments and exit"
    )
    sub = parser.add_subparsers(dest="command")

    conv = sub.add_parser("convergence", help="strong-error grid sweep and order fit")
    _add_common(conv)

    traj = sub.add_parser("trajectory", help="one sample path")
    _add_common(traj)
    traj.add_argument(
        "--record-energy", action="store_true", help="append an energy column"
    )
    traj.add_argument(
        "--record-defect", action="store_true", help="append a symplectic-defect column"
    )

    inv = sub.add_parser("invariants", help="energy and defect series for one path")
    _add_common(inv)

    mom = sub.add_parser("moment-growth", help="sample second moment over time")
    _add_common(mom)
    return parser


_COMMANDS = {
    "convergence": cmd_convergence,
    "trajectory": cmd_trajectory,
    "invariants": cmd_invariants,
    "moment-growth": cmd_moment_growth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.list:
        for builtin in list_builtins():
            print(f"{builtin.name}: {builtin.description}")
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        print("error: a subcommand or --list is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PadeIntError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
