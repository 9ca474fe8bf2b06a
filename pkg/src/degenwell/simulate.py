"""Time stepping: noisy paths, the noiseless flow, controlled flows, ensembles.

The stochastic integrator is Euler-Maruyama with one scalar Gaussian increment
per step feeding both components (the model's single noise source).  The
deterministic and controlled flows use the classic fourth-order one-step
scheme.  No state clamping anywhere: a run that leaves the floating range
aborts with a diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _kernels
from .model import Params, State, diffusion_coeff, drift

__all__ = [
    "SimConfig",
    "Trajectory",
    "Region",
    "OccupationHistogram",
    "SimulationDiverged",
    "step_sde",
    "simulate_sde",
    "simulate_flow",
    "simulate_controlled",
    "run_ensemble",
    "band_region",
    "outside_ball_region",
]

# Steps per block handed to the compiled kernel / region predicates.
_CHUNK = 1 << 18

# Euler becomes useless (and the cubic drift unstable) for coarse steps, so
# every entry point enforces lambda1 * dt below this bound.
_MAX_LAMBDA1_DT = 0.1


class SimulationDiverged(RuntimeError):
    """A path left the floating range; carries the first bad time and state."""

    def __init__(self, t: float, x: float, y: float, path_index: int | None = None):
        self.t = t
        self.x = x
        self.y = y
        self.path_index = path_index
        where = f" (path {path_index})" if path_index is not None else ""
        super().__init__(f"state became non-finite at t={t:.6g}{where}: x={x!r}, y={y!r}")


@dataclass(frozen=True)
class SimConfig:
    """Run length, step, seed and starting point shared by the integrators."""

    dt: float
    t_final: float
    seed: int
    initial: State

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not (self.t_final >= self.dt):
            raise ValueError(f"t_final must be at least dt, got {self.t_final}")
        if int(self.seed) != self.seed:
            raise ValueError(f"seed must be an integer, got {self.seed!r}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_final / self.dt - 1e-9))


@dataclass(frozen=True)
class Trajectory:
    """Sampled path: times (n,) against states (n, 2)."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.shape != (self.times.shape[0], 2):
            raise ValueError("times must be (n,) and states (n, 2)")
        if self.times[0] != 0.0:
            raise ValueError("trajectories start at t=0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 1]

    def final_state(self) -> State:
        return State(float(self.states[-1, 0]), float(self.states[-1, 1]))


@dataclass(frozen=True)
class Region:
    """Named region of the plane given by a vectorized membership predicate."""

    name: str
    contains: Callable[[np.ndarray, np.ndarray], np.ndarray]


def band_region(index: int, delta: float) -> Region:
    """Vertical band of half-width delta around the x-coordinate of well 1, 2 or 3."""
    center = {1: -1.0, 2: 0.0, 3: 1.0}[index]
    return Region(
        name=f"K{index}",
        contains=lambda xs, ys, c=center, d=delta: np.abs(xs - c) <= d,
    )


def outside_ball_region(radius: float) -> Region:
    """Complement of the closed ball of the given radius around the origin."""
    return Region(
        name=f"outside_ball_{radius:g}",
        contains=lambda xs, ys, r2=radius * radius: xs * xs + ys * ys > r2,
    )


@dataclass(frozen=True)
class OccupationHistogram:
    """Post burn-in time spent in each region, aggregated over paths.

    Counts are integer numbers of dt-long samples, which makes aggregation an
    exact (order-free) operation; times and fractions are derived views.
    """

    region_names: tuple[str, ...]
    region_counts: tuple[int, ...]
    total_count: int
    dt: float
    burn_in_time: float
    n_paths: int

    def __post_init__(self):
        if len(self.region_names) != len(self.region_counts):
            raise ValueError("one count per region required")
        if any(c < 0 for c in self.region_counts) or self.total_count < 0:
            raise ValueError("occupation counts must be nonnegative")
        if any(c > self.total_count for c in self.region_counts):
            raise ValueError("a region cannot be occupied longer than the total time")

    @property
    def total_time(self) -> float:
        return self.total_count * self.dt

    def time_in(self, name: str) -> float:
        return self.region_counts[self.region_names.index(name)] * self.dt

    def fraction(self, name: str) -> float:
        if self.total_count == 0:
            return 0.0
        return self.region_counts[self.region_names.index(name)] / self.total_count

    def merge(self, other: "OccupationHistogram") -> "OccupationHistogram":
        if self.region_names != other.region_names or self.dt != other.dt:
            raise ValueError("histograms must share regions and step size")
        return OccupationHistogram(
            region_names=self.region_names,
            region_counts=tuple(a + b for a, b in zip(self.region_counts, other.region_counts)),
            total_count=self.total_count + other.total_count,
            dt=self.dt,
            burn_in_time=self.burn_in_time + other.burn_in_time,
            n_paths=self.n_paths + other.n_paths,
        )


def _check_step(p: Params, dt: float) -> None:
    if p.lambda1 * dt >= _MAX_LAMBDA1_DT:
        raise ValueError(
            f"step too coarse: lambda1*dt = {p.lambda1 * dt:.3g} "
            f"must stay below {_MAX_LAMBDA1_DT}"
        )


def _rng_for_path(seed: int, path_index: int) -> np.random.Generator:
    # Counter-based generator on a substream keyed by (seed, path index):
    # path i draws the same increments no matter which paths run, or in
    # what order.
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(path_index,))
    return np.random.Generator(np.random.Philox(ss))


def step_sde(p: Params, s: State, dt: float, dw: float) -> State:
    """One Euler-Maruyama step from s with Gaussian increment dw ~ N(0, dt).

    Both components receive the same scalar increment, scaled by the common
    amplitude and split along (cos(theta), sin(theta)).
    """
    b1, b2 = drift(p, s)
    amp = p.epsilon * diffusion_coeff(p, s.x)
    a = amp * dw
    return State(
        s.x + b1 * dt + math.cos(p.theta) * a,
        s.y + b2 * dt + math.sin(p.theta) * a,
    )


def _sde_blocks(
    p: Params, c: SimConfig, rng: np.random.Generator
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (start_step, states_block) covering steps 1..n_steps in order.

    Block row j holds the state after step start_step + 1 + j.  Divergence is
    reported at the first non-finite sample.
    """
    n = c.n_steps
    sqrt_dt = math.sqrt(c.dt)
    cos_t = math.cos(p.theta)
    sin_t = math.sin(p.theta)
    x, y = c.initial.x, c.initial.y
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        dw = rng.standard_normal(m)
        dw *= sqrt_dt
        out = np.empty((m, 2))
        x, y = _kernels.euler_maruyama_chunk(
            x, y, p.lambda1, p.lambda2, p.lambda3,
            p.epsilon, cos_t, sin_t, p.sigma0, p.sigma1, c.dt, dw, out,
        )
        if not (math.isfinite(x) and math.isfinite(y)):
            bad = np.flatnonzero(~np.isfinite(out).all(axis=1))[0]
            t_bad = (done + int(bad) + 1) * c.dt
            raise SimulationDiverged(t_bad, float(out[bad, 0]), float(out[bad, 1]))
        yield done, out
        done += m


def simulate_sde(p: Params, c: SimConfig) -> Trajectory:
    """Integrate the noisy system; deterministic function of (p, c).

    With epsilon = 0 the increments are drawn but have no effect and the
    output is the Euler discretization of the noiseless flow.
    """
    _check_step(p, c.dt)
    n = c.n_steps
    states = np.empty((n + 1, 2))
    states[0] = (c.initial.x, c.initial.y)
    rng = _rng_for_path(c.seed, 0)
    for start, block in _sde_blocks(p, c, rng):
        states[start + 1 : start + 1 + block.shape[0]] = block
    return Trajectory(times=np.arange(n + 1) * c.dt, states=states)


def _rk4_path(
    c: SimConfig, rhs: Callable[[float, float, float], tuple[float, float]]
) -> Trajectory:
    n = c.n_steps
    dt = c.dt
    states = np.empty((n + 1, 2))
    x, y = c.initial.x, c.initial.y
    states[0] = (x, y)
    half = 0.5 * dt
    for k in range(n):
        t = k * dt
        k1x, k1y = rhs(t, x, y)
        k2x, k2y = rhs(t + half, x + half * k1x, y + half * k1y)
        k3x, k3y = rhs(t + half, x + half * k2x, y + half * k2y)
        k4x, k4y = rhs(t + dt, x + dt * k3x, y + dt * k3y)
        x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (dt / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise SimulationDiverged((k + 1) * dt, x, y)
        states[k + 1] = (x, y)
    return Trajectory(times=np.arange(n + 1) * dt, states=states)


def simulate_flow(p: Params, c: SimConfig) -> Trajectory:
    """Integrate the noiseless flow with the fourth-order one-step scheme."""
    _check_step(p, c.dt)

    def rhs(t: float, x: float, y: float) -> tuple[float, float]:
        cubic = x * (1.0 - x * x)
        return (p.lambda1 * cubic, -p.lambda2 * y + p.lambda3 * cubic)

    return _rk4_path(c, rhs)


def simulate_controlled(
    p: Params, c: SimConfig, phi: Callable[[float], float] | None
) -> Trajectory:
    """Integrate the flow steered through the noise channel by the control phi.

    The control enters exactly where the noise would: both components receive
    epsilon * (sigma0 + sigma1 x) * phi(t) along (cos(theta), sin(theta)).
    phi=None means no forcing and reproduces simulate_flow.
    """
    _check_step(p, c.dt)
    if phi is None:
        return simulate_flow(p, c)
    cos_t = math.cos(p.theta)
    sin_t = math.sin(p.theta)

    def rhs(t: float, x: float, y: float) -> tuple[float, float]:
        cubic = x * (1.0 - x * x)
        forcing = p.epsilon * (p.sigma0 + p.sigma1 * x) * phi(t)
        return (
            p.lambda1 * cubic + cos_t * forcing,
            -p.lambda2 * y + p.lambda3 * cubic + sin_t * forcing,
        )

    return _rk4_path(c, rhs)


def run_ensemble(
    p: Params,
    base: SimConfig,
    n_paths: int,
    regions: Sequence[Region],
    burn_in_fraction: float = 0.1,
    path_offset: int = 0,
) -> OccupationHistogram:
    """Accumulate post burn-in occupation of the regions over n_paths paths.

    Path i draws from the substream keyed by (base.seed, path_offset + i) and
    starts at base.initial; paths are independent and the aggregate does not
    depend on execution order.  Each post-step sample counts dt toward every
    region containing it once its time exceeds burn_in_fraction * t_final.
    Divergence aborts the whole ensemble, annotated with the path index.
    """
    _check_step(p, base.dt)
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    if not (0 <= burn_in_fraction < 1):
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    n = base.n_steps
    n_burn = int(round(burn_in_fraction * n))
    counts = [0] * len(regions)
    total = 0
    for i in range(n_paths):
        rng = _rng_for_path(base.seed, path_offset + i)
        try:
            for start, block in _sde_blocks(p, base, rng):
                # rows hold steps start+1 .. start+m; keep those beyond burn-in
                skip = max(0, n_burn - start)
                if skip >= block.shape[0]:
                    continue
                xs = block[skip:, 0]
                ys = block[skip:, 1]
                total += xs.shape[0]
                for j, region in enumerate(regions):
                    counts[j] += int(np.count_nonzero(region.contains(xs, ys)))
        except SimulationDiverged as err:
            raise SimulationDiverged(err.t, err.x, err.y, path_index=path_offset + i) from None
    return OccupationHistogram(
        region_names=tuple(r.name for r in regions),
        region_counts=tuple(counts),
        total_count=total,
        dt=base.dt,
        burn_in_time=n_burn * base.dt * n_paths,
        n_paths=n_paths,
    )
