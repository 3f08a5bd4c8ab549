"""Coupled driver simulation and sublinear/conjugate expectation estimates.

One driver path carries, on a shared grid, the standard Brownian increments
``dW``, the volatility-scaled motion ``B`` (increments ``gamma * dW``), the
companion motion ``B_tilde`` (increments ``dW / gamma``), and the analytic
quadratic/cross variations::

    d<B>        = gamma**2 dt
    d<B_tilde>  = dt / gamma**2
    d<B,B_tilde> = dt

Variations are computed from ``gamma`` (not as realized sums of squared
increments): for piecewise-constant ``gamma`` these are the exact limits,
which makes the band bounds on ``<B>`` deterministic rather than
statistical.

Arrays are ``(n_steps+1,)`` for a single path or ``(n_paths, n_steps+1)``
with a leading path axis for a batch; terminal functionals written with
``arr[..., -1]`` indexing work on both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .scenarios import (
    CONTROL_STREAM,
    DW_STREAM,
    Constant,
    ScenarioFamily,
    TimeGrid,
    VolatilityBand,
    VolControl,
    derive_seed,
    gen_control,
    make_rng,
)


def _cumsum0(x: np.ndarray) -> np.ndarray:
    """Cumulative sum along the last axis with a leading zero."""
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 1,))
    np.cumsum(x, axis=-1, out=out[..., 1:])
    return out


@dataclass(frozen=True, eq=False)
class DriverPath:
    """A simulated driver path (or batch of paths) on a grid.

    ``gamma``, ``dW`` and ``rho`` are per step; the path arrays include the
    initial point, so ``B[..., 0] == 0`` etc.  ``control`` references the
    generating control for single paths and is None for batches with
    per-path gamma draws.
    """

    grid: TimeGrid
    gamma: np.ndarray
    dW: np.ndarray
    B: np.ndarray
    B_tilde: np.ndarray
    qv: np.ndarray
    qv_tilde: np.ndarray
    cross_qv: np.ndarray
    rho: np.ndarray
    control: VolControl | None = None

    @property
    def n_paths(self) -> int:
        return 1 if self.B.ndim == 1 else self.B.shape[0]


def paths_from_increments(
    grid: TimeGrid, gamma: np.ndarray, dW: np.ndarray, control: VolControl | None = None
) -> DriverPath:
    """Build a driver path from given Gaussian increments.

    ``gamma`` broadcasts against ``dW``; both have ``n_steps`` entries on
    the last axis.  This is the deterministic kernel behind
    :func:`simulate_driver` and the batch estimator, and the natural entry
    point for hand-built oracle paths in tests.
    """
    gamma = np.asarray(gamma, dtype=float)
    dW = np.asarray(dW, dtype=float)
    n = grid.n_steps
    if gamma.shape[-1] != n or dW.shape[-1] != n:
        raise InvalidArgumentError("gamma and dW must have one entry per step")
    dt = grid.dt
    gamma2 = np.square(gamma)
    B = _cumsum0(gamma * dW)
    B_tilde = _cumsum0(dW / gamma)
    # Shared-gamma rows stay one-dimensional and are broadcast as views.
    step_shape = np.broadcast_shapes(gamma.shape, dW.shape)
    qv = np.broadcast_to(_cumsum0(gamma2 * dt), B.shape)
    qv_tilde = np.broadcast_to(_cumsum0(dt / gamma2), B.shape)
    cross = np.broadcast_to(grid.t, B.shape)
    rho = np.broadcast_to(1.0 / gamma2, step_shape)
    return DriverPath(grid, gamma, dW, B, B_tilde, qv, qv_tilde, cross, rho, control)


def gaussian_increments(grid: TimeGrid, n_paths: int, master_seed: int) -> np.ndarray:
    """Common-random-number dW matrix of shape (n_paths, n_steps).

    Row j is the stream for path index j; it depends on (master_seed, j)
    only, never on the scenario, and is stable under enlarging n_paths.
    """
    rng = make_rng(derive_seed(master_seed, DW_STREAM))
    z = rng.standard_normal((int(n_paths), grid.n_steps))
    return z * np.sqrt(grid.dt)


def simulate_driver(grid: TimeGrid, control: VolControl, seed) -> DriverPath:
    """Simulate one path under a fixed control; deterministic given seed."""
    if not grid.matches(control.grid):
        raise InvalidArgumentError("control was generated on a different grid")
    rng = make_rng(seed)
    dW = rng.standard_normal(grid.n_steps) * np.sqrt(grid.dt)
    return paths_from_increments(grid, control.gamma, dW, control)


def check_qv_bounds(path: DriverPath, band: VolatilityBand) -> bool:
    """True iff sigma_lo**2 * t <= <B>_t <= sigma_hi**2 * t at every grid point.

    The bounds are accumulated with the same cumulative rule as the path's
    analytic quadratic variation, so the comparison is exact (tolerance 0):
    term-wise domination survives floating-point summation because rounding
    is monotone.
    """
    dt = path.grid.dt
    lo = _cumsum0(band.var_lo * dt)
    hi = _cumsum0(band.var_hi * dt)
    return bool(np.all(path.qv >= lo) and np.all(path.qv <= hi))


@dataclass(frozen=True)
class IntervalEstimate:
    """Monte Carlo estimate of the sublinear/conjugate expectation pair.

    ``upper`` estimates max over the scenario family of the linear means,
    ``lower`` the min.  Both are biased toward the inside of the true
    interval (finite family) and the max of sample means is biased upward
    in the usual order-statistics sense; the reported standard errors are
    those of the arg-max / arg-min scenario means.
    """

    upper: float
    lower: float
    se_upper: float
    se_lower: float
    per_scenario_means: tuple
    per_scenario_ses: tuple
    labels: tuple
    n_paths: int

    def __post_init__(self):
        if self.lower > self.upper:
            raise InvalidArgumentError("lower exceeds upper")

    @property
    def argmax_label(self) -> str:
        return self.labels[self.per_scenario_means.index(self.upper)]

    @property
    def argmin_label(self) -> str:
        return self.labels[self.per_scenario_means.index(self.lower)]


def _mean_and_se(values: np.ndarray) -> tuple[float, float]:
    # math.fsum is exactly rounded, hence order independent: reductions are
    # deterministic no matter how the paths were produced or scheduled.
    n = values.size
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def scenario_gammas(
    spec, band: VolatilityBand, grid: TimeGrid, master_seed: int, scenario_index: int, n_paths: int
) -> np.ndarray:
    """Per-path gamma draws for one scenario.

    Constant specs return a shared (n_steps,) row; random specs draw one
    control per path from the (master_seed, scenario, path) sub-stream.
    """
    if isinstance(spec, Constant):
        return gen_control(spec, band, grid, 0).gamma
    rows = np.empty((n_paths, grid.n_steps))
    for j in range(n_paths):
        seed = derive_seed(master_seed, CONTROL_STREAM, scenario_index, j)
        rows[j] = gen_control(spec, band, grid, seed).gamma
    return rows


def estimate_sublinear(
    functional,
    family: ScenarioFamily,
    grid: TimeGrid,
    n_paths: int,
    master_seed: int,
) -> IntervalEstimate:
    """Estimate (upper, lower) = (max, min) of scenario means of a functional.

    ``functional`` maps a driver path batch to one value per path; it must
    vectorize over the leading path axis (library functionals written with
    ``arr[..., -1]`` do).  All scenarios share the same dW stream per path
    index (common random numbers), which removes increment noise from the
    max/min over scenarios.
    """
    if len(family) == 0:
        raise InvalidArgumentError("scenario family is empty")
    if n_paths < 2:
        raise InvalidArgumentError("need at least 2 paths for a standard error")
    dW = gaussian_increments(grid, n_paths, master_seed)
    means, ses = [], []
    for i, (label, spec) in enumerate(family.members):
        gamma = scenario_gammas(spec, family.band, grid, master_seed, i, n_paths)
        batch = paths_from_increments(grid, gamma, dW)
        values = np.asarray(functional(batch), dtype=float)
        if values.ndim == 0:
            values = np.full(n_paths, float(values))
        if values.shape != (n_paths,):
            raise InvalidArgumentError(
                f"functional must return one value per path, got shape {values.shape}"
            )
        m, se = _mean_and_se(values)
        means.append(m)
        ses.append(se)
    i_up = int(np.argmax(means))
    i_lo = int(np.argmin(means))
    return IntervalEstimate(
        upper=means[i_up],
        lower=means[i_lo],
        se_upper=ses[i_up],
        se_lower=ses[i_lo],
        per_scenario_means=tuple(means),
        per_scenario_ses=tuple(ses),
        labels=family.labels,
        n_paths=int(n_paths),
    )


# Handy terminal functionals (work on single paths and batches).
def terminal_B(d: DriverPath):
    return d.B[..., -1]


def terminal_B_tilde(d: DriverPath):
    return d.B_tilde[..., -1]


def terminal_qv(d: DriverPath):
    return d.qv[..., -1]


def terminal_qv_tilde(d: DriverPath):
    return d.qv_tilde[..., -1]


def terminal_B_squared(d: DriverPath):
    return d.B[..., -1] ** 2
