"""Monte-Carlo strong-error estimation and invariant statistics.

The strong (mean-square) error of a scheme is measured with exact coupling:
each path advances the scheme and an exact comparator on the *same*
realization of the driving noise, so the terminal difference contains
method error only.  For commuting linear systems the comparator is the
terminal-time matrix exponential of the accumulated generator (stepwise and
terminal evaluation coincide when the generators commute); for
non-commuting systems it falls back to the same scheme on a grid refined
by ``REFERENCE_REFINE``, with fine increments summed to the coarse ones.
Additive systems couple through the jointly sampled (increment, exact
integral, kernel integral) blocks.

Paths are independent work items: they are processed in fixed-size chunks,
each chunk vectorized across its paths, and chunks can be distributed over
a process pool.  Chunk boundaries do not depend on the worker count, and
per-path draws depend only on (seed, path_index), so results are
reproducible; with ``deterministic=True`` partial sums are also reduced in
chunk order, making reruns bit-identical regardless of parallelism.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateSeriesError,
    MissingDiagnosticsError,
    NonIntegralStepCountError,
)
from .integrators import (
    AdditiveSchemeSpec,
    EulerMaruyamaSpec,
    ExactSolutionSpec,
    LinearSchemeSpec,
    Trajectory,
    VARIANT_INTEGRAL,
    _linear_step_generator,
)
from .linalg import _solve_stacked, matrix_exp
from .noise import NoiseStream, additive_joint_spec, truncation_bound
from .pade import (
    PadePair,
    _numerator_apply,
    _polynomial_matrix,
    pade_coefficients,
    pade_transfer_matrix,
)
from .systems import AdditiveSHS, LinearSHS, hamiltonian_quadratic

DEFAULT_CHUNK = 256
REFERENCE_REFINE = 64

# Grid points whose error is statistically indistinguishable from zero are
# dropped before the order fit (see filtered_for_fit).
MIN_FIT_SNR = 4.0


@dataclass
class ErrorSeries:
    """RMS terminal errors over a step-size grid, with standard errors."""

    h_values: list
    rms_errors: list
    stderrs: list
    paths: int
    seed: int
    aborted_paths: int = 0

    def __post_init__(self):
        if not (len(self.h_values) == len(self.rms_errors) == len(self.stderrs)):
            raise ValueError("h_values, rms_errors and stderrs must align")
        if any(r < 0 for r in self.rms_errors):
            raise ValueError("RMS errors cannot be negative")


@dataclass
class OrderFit:
    """Least-squares fit of ln(rms) against ln(h)."""

    slope: float
    intercept: float
    max_residual: float


@dataclass
class MomentSeries:
    """Sample second moment E|X_n|^2 at every grid node."""

    times: np.ndarray
    second_moment: np.ndarray
    paths: int


def _check_grid(T: float, h: float) -> int:
    steps = round(T / h)
    if steps < 1 or abs(T / h - steps) > 1e-9:
        raise NonIntegralStepCountError(f"T/h = {T / h!r} is not an integer")
    return steps


def _chunk_ranges(paths: int, chunk: int):
    return [(lo, min(lo + chunk, paths)) for lo in range(0, paths, chunk)]


def _map_chunks(worker, argslist, workers: int, deterministic: bool):
    if workers <= 1:
        return [worker(a) for a in argslist]
    results = [None] * len(argslist)
    completion = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = {ex.submit(worker, a): i for i, a in enumerate(argslist)}
        for fut in as_completed(futures):
            i = futures[fut]
            results[i] = fut.result()
            completion.append(i)
    if deterministic:
        return results
    return [results[i] for i in completion]


# ---------------------------------------------------------------------------
# strong error


def strong_error(
    sys,
    spec,
    x0,
    T: float,
    h: float,
    paths: int,
    seed: int,
    workers: int = 1,
    deterministic: bool = True,
) -> float:
    """RMS terminal-state error sqrt(E |X_exact(T) - X_scheme(T)|^2).

    Exact and scheme states advance on the same noise draws per path; see
    the module docstring for the comparator used in each regime.  Failed
    paths (singular denominator mid-trajectory) are excluded from the
    average and counted, not fatal.

    Raises
    ------
    NonIntegralStepCountError
        If T/h is not an integer within 1e-9.
    """
    rms, _, _ = _strong_error_stats(
        sys, spec, x0, T, h, paths, seed, workers, deterministic
    )
    return rms


def _strong_error_stats(sys, spec, x0, T, h, paths, seed, workers, deterministic):
    steps = _check_grid(T, h)
    if paths < 2:
        raise ValueError(f"need at least two paths, got {paths}")
    args = [
        (sys, spec, np.asarray(x0, dtype=float), h, steps, seed, lo, hi)
        for lo, hi in _chunk_ranges(paths, DEFAULT_CHUNK)
    ]
    chunks = _map_chunks(_strong_error_chunk, args, workers, deterministic)
    n_ok = sum(c[0] for c in chunks)
    aborted = sum(c[1] for c in chunks)
    if n_ok == 0:
        raise DegenerateSeriesError("every path aborted; no error samples")
    sum_sq = 0.0
    sum_sq2 = 0.0
    for c in chunks:
        sum_sq += c[2]
        sum_sq2 += c[3]
    mean_sq = sum_sq / n_ok
    rms = float(np.sqrt(mean_sq))
    var_sq = max(sum_sq2 / n_ok - mean_sq**2, 0.0)
    se_mean_sq = float(np.sqrt(var_sq / n_ok))
    stderr = se_mean_sq / (2.0 * rms) if rms > 0.0 else 0.0
    return rms, stderr, aborted


def _strong_error_chunk(args):
    sys, spec, x0, h, steps, seed, lo, hi = args
    if isinstance(sys, LinearSHS):
        diff, alive = _linear_coupled_terminal(sys, spec, x0, h, steps, seed, lo, hi)
    elif isinstance(sys, AdditiveSHS):
        diff, alive = _additive_coupled_terminal(sys, spec, x0, h, steps, seed, lo, hi)
    else:
        raise TypeError(f"unsupported system type {type(sys).__name__}")
    sq = np.einsum("pd,pd->p", diff, diff)
    sq = sq[alive]
    return int(alive.sum()), int((~alive).sum()), float(sq.sum()), float((sq**2).sum())


def _draw_gaussian_block(seed, lo, hi, count):
    """Per-path Gaussians, shape (hi - lo, count); row i is path lo + i."""
    out = np.empty((hi - lo, count))
    for i in range(hi - lo):
        out[i] = NoiseStream(seed, lo + i).gaussians(count)
    return out


def _advance_linear_scheme(sys, order, x, bbar, alive):
    coeffs = pade_coefficients(order)
    num = _numerator_apply(bbar, coeffs.a, x)
    den = _polynomial_matrix(-bbar, coeffs.b)
    sol, singular = _solve_stacked(den, num[..., None], on_singular="mask")
    alive &= ~singular
    return sol[..., 0]


def _linear_scheme_terminal(sys, spec, x0, h, xi, alive):
    """Run the scheme over all steps; xi has shape (paths, steps, m)."""
    paths, steps, _ = xi.shape
    x = np.broadcast_to(x0, (paths, sys.dim)).copy()
    if isinstance(spec, LinearSchemeSpec):
        a_h = truncation_bound(h, spec.ell)
        zeta = np.clip(xi, -a_h, a_h)
        for n in range(steps):
            bbar = _linear_step_generator(sys, h, zeta[:, n, :])
            x = _advance_linear_scheme(sys, spec.order, x, bbar, alive)
        return x
    if isinstance(spec, EulerMaruyamaSpec):
        for n in range(steps):
            braw = _linear_step_generator(sys, h, xi[:, n, :])
            x = x + np.matmul(braw, x[..., None])[..., 0]
        return x
    raise TypeError(f"unsupported scheme {type(spec).__name__} for a linear system")


def _linear_exact_terminal(sys, x0, T, xi_sums):
    """Terminal exact flow exp(T A0 + sum_i W_i Ai) x0 for commuting systems."""
    exponent = T * sys.generators[0] + np.einsum(
        "pi,ijk->pjk", xi_sums, sys.generators[1:]
    )
    return matrix_exp(exponent) @ x0


def _linear_coupled_terminal(sys, spec, x0, h, steps, seed, lo, hi):
    m = sys.m
    alive = np.ones(hi - lo, dtype=bool)
    if sys.commuting:
        xi = _draw_gaussian_block(seed, lo, hi, steps * m).reshape(-1, steps, m)
        exact = _linear_exact_terminal(sys, x0, steps * h, np.sqrt(h) * xi.sum(axis=1))
        if isinstance(spec, ExactSolutionSpec):
            scheme = _linear_exact_terminal(
                sys, x0, steps * h, np.sqrt(h) * xi.sum(axis=1)
            )
        else:
            scheme = _linear_scheme_terminal(sys, spec, x0, h, xi, alive)
        return scheme - exact, alive

    # Non-commuting: reference is the same scheme on a refined grid, with
    # fine increments aggregated to the coarse ones.
    refine = REFERENCE_REFINE
    fine = _draw_gaussian_block(seed, lo, hi, steps * refine * m).reshape(
        -1, steps * refine, m
    )
    coarse = fine.reshape(-1, steps, refine, m).sum(axis=2) / np.sqrt(refine)
    if isinstance(spec, ExactSolutionSpec):
        ref_spec = LinearSchemeSpec(PadePair(2, 2))
        exact = _linear_scheme_terminal(sys, ref_spec, x0, h / refine, fine, alive)
        scheme = exact.copy()
        return scheme - exact, alive
    exact = _linear_scheme_terminal(sys, spec, x0, h / refine, fine, alive)
    scheme = _linear_scheme_terminal(sys, spec, x0, h, coarse, alive)
    return scheme - exact, alive


def _additive_coupled_terminal(sys, spec, z0, h, steps, seed, lo, hi):
    kernel_order = (
        spec.kernel_order if isinstance(spec, AdditiveSchemeSpec) else PadePair(1, 1)
    )
    joint = additive_joint_spec(sys.drift_generator, sys.noise_vectors, h, kernel_order)
    gauss = _draw_gaussian_block(seed, lo, hi, steps * joint.size).reshape(
        -1, steps, joint.size
    )
    samples = joint.transform(gauss)
    dw, i_exact, i_scheme = joint.split(samples)  # (p, steps, m[, d])

    paths = hi - lo
    alive = np.ones(paths, dtype=bool)
    flow = matrix_exp(h * sys.drift_generator)
    exact = np.broadcast_to(z0, (paths, sys.dim)).copy()
    for n in range(steps):
        exact = exact @ flow.T + i_exact[:, n].sum(axis=1)

    if isinstance(spec, ExactSolutionSpec):
        scheme = np.broadcast_to(z0, (paths, sys.dim)).copy()
        for n in range(steps):
            scheme = scheme @ flow.T + i_exact[:, n].sum(axis=1)
        return scheme - exact, alive

    drift = pade_transfer_matrix(h * sys.drift_generator, spec.drift_order)
    scheme = np.broadcast_to(z0, (paths, sys.dim)).copy()
    if spec.variant == VARIANT_INTEGRAL:
        for n in range(steps):
            scheme = scheme @ drift.T + i_scheme[:, n].sum(axis=1)
    else:
        cayley = pade_transfer_matrix(h * sys.drift_generator, PadePair(1, 1))
        noise_mat = cayley @ sys.noise_vectors.T  # (d, m)
        for n in range(steps):
            scheme = scheme @ drift.T + dw[:, n] @ noise_mat.T
    return scheme - exact, alive


def convergence_series(
    sys,
    spec,
    x0,
    T: float,
    h_values,
    paths: int,
    seed: int,
    workers: int = 1,
    deterministic: bool = True,
) -> ErrorSeries:
    """Strong errors over a grid of step sizes, for order fitting."""
    rms_list, se_list = [], []
    aborted = 0
    for h in h_values:
        rms, se, bad = _strong_error_stats(
            sys, spec, x0, T, h, paths, seed, workers, deterministic
        )
        rms_list.append(rms)
        se_list.append(se)
        aborted += bad
    return ErrorSeries(
        h_values=list(h_values),
        rms_errors=rms_list,
        stderrs=se_list,
        paths=paths,
        seed=seed,
        aborted_paths=aborted,
    )


# ---------------------------------------------------------------------------
# order fitting


def fit_order(series: ErrorSeries) -> OrderFit:
    """Least-squares slope of ln(rms) against ln(h).

    Raises
    ------
    DegenerateSeriesError
        If fewer than 3 distinct step sizes are given or any rms is zero.
    """
    h = np.asarray(series.h_values, dtype=float)
    rms = np.asarray(series.rms_errors, dtype=float)
    if len(h) < 3 or len(np.unique(h)) != len(h):
        raise DegenerateSeriesError("need at least 3 distinct step sizes")
    if np.any(rms <= 0.0):
        raise DegenerateSeriesError("zero RMS error cannot be order-fitted")
    x = np.log(h)
    y = np.log(rms)
    design = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return OrderFit(
        slope=float(slope),
        intercept=float(intercept),
        max_residual=float(np.abs(resid).max()),
    )


def filtered_for_fit(series: ErrorSeries, min_snr: float = MIN_FIT_SNR):
    """Drop grid points whose error is below ``min_snr`` standard errors.

    Near the Monte-Carlo noise floor an RMS estimate carries no order
    information; such points are excluded from the fit and reported.  If
    fewer than 3 points would remain the series is returned unchanged.

    Returns
    -------
    (ErrorSeries, list)
        The series to fit and the list of dropped step sizes.
    """
    rms = np.asarray(series.rms_errors)
    se = np.asarray(series.stderrs)
    keep = rms >= min_snr * se
    if keep.all() or keep.sum() < 3:
        return series, []
    dropped = [h for h, k in zip(series.h_values, keep) if not k]
    filtered = ErrorSeries(
        h_values=[h for h, k in zip(series.h_values, keep) if k],
        rms_errors=list(rms[keep]),
        stderrs=list(se[keep]),
        paths=series.paths,
        seed=series.seed,
        aborted_paths=series.aborted_paths,
    )
    return filtered, dropped


# ---------------------------------------------------------------------------
# invariants and moments


def hamiltonian_drift(traj: Trajectory, c: Optional[np.ndarray] = None) -> float:
    """Worst relative drift max_k |H(x_k) - H(x_0)| / max(1, |H(x_0)|).

    Uses the Hamiltonian values recorded on the trajectory; alternatively a
    quadratic-form matrix ``c`` can be supplied to evaluate them from the
    states.

    Raises
    ------
    MissingDiagnosticsError
        If no Hamiltonian series was recorded and no matrix is given.
    """
    if traj.hamiltonians is not None:
        values = np.asarray(traj.hamiltonians, dtype=float)
    elif c is not None:
        values = hamiltonian_quadratic(c, traj.states)
    else:
        raise MissingDiagnosticsError(
            "trajectory has no recorded Hamiltonian values and no quadratic form "
            "was supplied"
        )
    h0 = values[0]
    return float(np.abs(values - h0).max() / max(1.0, abs(h0)))


def second_moment_growth(
    sys: AdditiveSHS,
    spec,
    z0,
    T: float,
    h: float,
    paths: int,
    seed: int,
    workers: int = 1,
    deterministic: bool = True,
):
    """Sample average of |Z_n|^2 at every node, with its fitted slope in t.

    Returns
    -------
    (MomentSeries, float)
    """
    steps = _check_grid(T, h)
    if paths < 100:
        raise ValueError(f"need at least 100 paths for moment statistics, got {paths}")
    args = [
        (sys, spec, np.asarray(z0, dtype=float), h, steps, seed, lo, hi)
        for lo, hi in _chunk_ranges(paths, DEFAULT_CHUNK)
    ]
    chunks = _map_chunks(_moment_chunk, args, workers, deterministic)
    total = np.zeros(steps + 1)
    for c in chunks:
        total += c
    moment = total / paths
    times = h * np.arange(steps + 1)
    design = np.stack([times, np.ones_like(times)], axis=1)
    (slope, _), *_ = np.linalg.lstsq(design, moment, rcond=None)
    return MomentSeries(times=times, second_moment=moment, paths=paths), float(slope)


def _moment_chunk(args):
    sys, spec, z0, h, steps, seed, lo, hi = args
    joint = additive_joint_spec(
        sys.drift_generator,
        sys.noise_vectors,
        h,
        spec.kernel_order if isinstance(spec, AdditiveSchemeSpec) else PadePair(1, 1),
    )
    gauss = _draw_gaussian_block(seed, lo, hi, steps * joint.size).reshape(
        -1, steps, joint.size
    )
    samples = joint.transform(gauss)
    dw, i_exact, i_scheme = joint.split(samples)
    paths = hi - lo
    z = np.broadcast_to(z0, (paths, sys.dim)).copy()
    sums = np.empty(steps + 1)
    sums[0] = np.einsum("pd,pd->", z, z)
    if isinstance(spec, ExactSolutionSpec):
        flow = matrix_exp(h * sys.drift_generator)
        for n in range(steps):
            z = z @ flow.T + i_exact[:, n].sum(axis=1)
            sums[n + 1] = np.einsum("pd,pd->", z, z)
        return sums
    drift = pade_transfer_matrix(h * sys.drift_generator, spec.drift_order)
    if spec.variant == VARIANT_INTEGRAL:
        for n in range(steps):
            z = z @ drift.T + i_scheme[:, n].sum(axis=1)
            sums[n + 1] = np.einsum("pd,pd->", z, z)
    else:
        cayley = pade_transfer_matrix(h * sys.drift_generator, PadePair(1, 1))
        noise_mat = cayley @ sys.noise_vectors.T
        for n in range(steps):
            z = z @ drift.T + dw[:, n] @ noise_mat.T
            sums[n + 1] = np.einsum("pd,pd->", z, z)
    return sums


def zero_crossings(traj: Trajectory, component: int) -> list:
    """Linearly interpolated sign-change times of one state component."""
    x = traj.states[:, component]
    t = traj.times
    if len(x) == 0:
        raise ValueError("trajectory is empty")
    out = []
    for k in range(len(x) - 1):
        if x[k] == 0.0:
            if k == 0 or x[k - 1] != 0.0:
                out.append(float(t[k]))
        elif x[k] * x[k + 1] < 0.0:
            out.append(float(t[k] + (t[k + 1] - t[k]) * x[k] / (x[k] - x[k + 1])))
    if x[-1] == 0.0 and (len(x) < 2 or x[-2] != 0.0):
        out.append(float(t[-1]))
    return out
