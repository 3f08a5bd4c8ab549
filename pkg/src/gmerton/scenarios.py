"""Time grids, volatility bands, and volatility-scenario generation.

Uncertainty is an interval of volatilities ``[sigma_lo, sigma_hi]``.  A
*scenario* is a piecewise-constant adapted volatility path ``gamma`` on a
time grid, one value per step.  A finite family of scenarios indexes the
linear expectations whose max/min give the sublinear and conjugate
estimates in :mod:`gmerton.driver`.  Because the family is finite, the max
is a *lower* bound on the true sublinear expectation (and the min an upper
bound on the conjugate one); the two constant extreme scenarios are always
included, which is enough to make several key functionals exact.

Randomness policy
-----------------
All draws use the Philox bit generator (counter based, platform stable).
Sub-streams are derived with ``SeedSequence(master_seed, spawn_key=...)``:

* Gaussian increment streams use ``(DW_STREAM, ...)`` keys that do *not*
  include the scenario index, so every scenario sees the same increments
  per path index (common random numbers).
* Scenario-control streams use ``(CONTROL_STREAM, scenario_index,
  path_index)``.

Identical seeds therefore reproduce identical paths bitwise on any
platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidArgumentError

DW_STREAM = 0
CONTROL_STREAM = 1


def derive_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Deterministic sub-seed for stream ``key`` under ``master_seed``."""
    return np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(k) for k in key)
    )


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int seed or a ``SeedSequence``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing grid with ``t[0] = 0`` and ``t[-1] = horizon``."""

    t: np.ndarray

    def __post_init__(self):
        t = _freeze(np.asarray(self.t, dtype=float))
        if t.ndim != 1 or t.size < 2:
            raise InvalidArgumentError("grid needs at least one step")
        if t[0] != 0.0:
            raise InvalidArgumentError("grid must start at t=0")
        dt = np.diff(t)
        if not np.all(dt > 0):
            raise InvalidArgumentError("grid times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "_dt", _freeze(dt))

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def dt(self) -> np.ndarray:
        return self._dt

    def matches(self, other: "TimeGrid") -> bool:
        return self is other or np.array_equal(self.t, other.t)


def make_grid(horizon: float, n_steps: int) -> TimeGrid:
    """Uniform grid on ``[0, horizon]`` with ``n_steps`` steps."""
    if not horizon > 0:
        raise InvalidArgumentError(f"horizon must be positive, got {horizon}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise InvalidArgumentError(f"n_steps must be a positive integer, got {n_steps}")
    return TimeGrid(np.linspace(0.0, float(horizon), int(n_steps) + 1))


@dataclass(frozen=True)
class VolatilityBand:
    """Volatility uncertainty interval ``0 < sigma_lo <= sigma_hi``."""

    sigma_lo: float
    sigma_hi: float

    def __post_init__(self):
        if not (0.0 < self.sigma_lo <= self.sigma_hi):
            raise InvalidArgumentError(
                f"need 0 < sigma_lo <= sigma_hi, got [{self.sigma_lo}, {self.sigma_hi}]"
            )

    @property
    def is_degenerate(self) -> bool:
        return self.sigma_lo == self.sigma_hi

    @property
    def var_lo(self) -> float:
        return self.sigma_lo**2

    @property
    def var_hi(self) -> float:
        return self.sigma_hi**2

    @property
    def rho_lo(self) -> float:
        """Smallest reachable rho value, 1 / sigma_hi**2."""
        return 1.0 / self.sigma_hi**2

    @property
    def rho_hi(self) -> float:
        """Largest reachable rho value, 1 / sigma_lo**2."""
        return 1.0 / self.sigma_lo**2


# --------------------------------------------------------------------------
# Generator specs.  Each spec is a recipe turning (band, grid, seed) into a
# concrete piecewise-constant control.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """gamma[k] = value for every step."""

    value: float

    @property
    def label(self) -> str:
        return f"constant({self.value:g})"


@dataclass(frozen=True)
class BangBang:
    """gamma[k] in {sigma_lo, sigma_hi}; flips with per-step probability."""

    switch_prob: float

    @property
    def label(self) -> str:
        return f"bang_bang({self.switch_prob:g})"


@dataclass(frozen=True)
class UniformIID:
    """gamma[k] drawn i.i.d. uniformly inside the band."""

    @property
    def label(self) -> str:
        return "uniform_iid"


GeneratorSpec = Union[Constant, BangBang, UniformIID]


@dataclass(frozen=True, eq=False)
class VolControl:
    """One piecewise-constant volatility path on a grid, inside a band."""

    grid: TimeGrid
    gamma: np.ndarray
    band: VolatilityBand

    def __post_init__(self):
        g = _freeze(np.asarray(self.gamma, dtype=float))
        if g.shape != (self.grid.n_steps,):
            raise InvalidArgumentError(
                f"gamma must have one value per step, got shape {g.shape}"
            )
        if np.any(g < self.band.sigma_lo) or np.any(g > self.band.sigma_hi):
            raise InvalidArgumentError("gamma leaves the volatility band")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True, eq=False)
class RhoPath:
    """Stepwise rho[k] = 1 / gamma[k]**2."""

    grid: TimeGrid
    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _freeze(self.rho))


def gen_control(spec: GeneratorSpec, band: VolatilityBand, grid: TimeGrid, seed) -> VolControl:
    """Generate one control from a spec; deterministic for a fixed seed.

    ``constant(v)`` requires v inside the band.  ``bang_bang(p)`` draws the
    first value uniformly from the two extremes and then flips with
    per-step probability p.  ``uniform_iid`` draws each step uniformly in
    the band.  A degenerate band forces every spec to the same constant
    control.
    """
    n = grid.n_steps
    if isinstance(spec, Constant):
        if not (band.sigma_lo <= spec.value <= band.sigma_hi):
            raise InvalidArgumentError(
                f"constant value {spec.value} outside band [{band.sigma_lo}, {band.sigma_hi}]"
            )
        gamma = np.full(n, float(spec.value))
    elif isinstance(spec, BangBang):
        if not (0.0 <= spec.switch_prob <= 1.0):
            raise InvalidArgumentError(f"switch_prob must be in [0,1], got {spec.switch_prob}")
        rng = make_rng(seed)
        start_hi = rng.random() >= 0.5
        flips = rng.random(n - 1) < spec.switch_prob if n > 1 else np.empty(0, dtype=bool)
        # state at step k = start state XOR parity of flips seen so far
        parity = np.concatenate(([False], np.cumsum(flips) % 2 == 1))
        on_hi = np.logical_xor(np.full(n, start_hi), parity)
        gamma = np.where(on_hi, band.sigma_hi, band.sigma_lo)
    elif isinstance(spec, UniformIID):
        rng = make_rng(seed)
        gamma = rng.uniform(band.sigma_lo, band.sigma_hi, n)
    else:
        raise InvalidArgumentError(f"unknown generator spec {spec!r}")
    return VolControl(grid, gamma, band)


def rho_of(control: VolControl) -> RhoPath:
    """Stepwise transform rho[k] = 1 / gamma[k]**2.

    Band positivity rules out division by zero; rho stays inside
    ``[1/sigma_hi**2, 1/sigma_lo**2]`` because both the squaring and the
    reciprocal are monotone.
    """
    return RhoPath(control.grid, 1.0 / np.square(control.gamma))


@dataclass(frozen=True, init=False)
class ScenarioFamily:
    """A finite scenario family; always contains both constant extremes.

    Extra members are given as ``(label, spec)`` pairs or bare specs (the
    spec's own label is used).  Labels must be unique.
    """

    band: VolatilityBand
    members: tuple  # of (label, GeneratorSpec)

    def __init__(self, band: VolatilityBand, extras=()):
        members = [("const_lo", Constant(band.sigma_lo))]
        if not band.is_degenerate:
            members.append(("const_hi", Constant(band.sigma_hi)))
        for item in extras:
            if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], str):
                label, spec = item
            else:
                spec = item
                label = spec.label
            if isinstance(spec, Constant) and any(
                isinstance(s, Constant) and s.value == spec.value for _, s in members
            ):
                continue
            members.append((label, spec))
        labels = [lab for lab, _ in members]
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError(f"duplicate scenario labels in {labels}")
        object.__setattr__(self, "band", band)
        object.__setattr__(self, "members", tuple(members))

    def __len__(self) -> int:
        return len(self.members)

    @property
    def labels(self):
        return tuple(lab for lab, _ in self.members)

    def control(self, index: int, grid: TimeGrid, seed) -> VolControl:
        label, spec = self.members[index]
        return gen_control(spec, self.band, grid, seed)
