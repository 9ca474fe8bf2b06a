"""Path cost for the scalar component driven against its double-well drift.

For a scalar path w on [0, T] the cost density is

    L(w, wdot) = 0.5 * ((wdot - lambda1 * w * (1 - w**2)) / (sigma0 + sigma1 * w))**2

and the raw cost carries the prefactor 1 / (epsilon * cos(theta))**2; the
normalized cost drops it, which removes every epsilon from comparisons.
Zero-cost paths ride the drift; crossing a well costs a positive amount with
explicit extremal paths and values when sigma1 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .model import Params

__all__ = [
    "ScalarPath",
    "ActionValue",
    "DegenerateDiffusion",
    "lagrangian",
    "action",
    "extremal_path",
    "extremal_control",
    "closed_form_action",
    "read_scalar_path",
    "write_scalar_path",
]

# An |amplitude| below this multiple of sigma0 counts as a vanishing
# diffusion coefficient (the cost density blows up there).
ZERO_AMP_REL = 1e-9


class DegenerateDiffusion(ValueError):
    """The path touches the line where the noise amplitude vanishes."""


@dataclass(frozen=True)
class ScalarPath:
    """Scalar path sampled on a uniform grid starting at t = 0."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be matching 1-d arrays")
        if self.times.shape[0] < 3:
            raise ValueError("a path needs at least three nodes")
        if self.times[0] != 0.0:
            raise ValueError("paths start at t = 0")
        steps = np.diff(self.times)
        if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("time grid must be uniform and increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class ActionValue:
    """Raw cost (with the 1/(epsilon*cos(theta))**2 prefactor) and normalized cost."""

    raw: float
    normalized: float

    def __post_init__(self):
        if self.raw < 0 or self.normalized < 0:
            raise ValueError("costs are nonnegative")


def _amplitude(p: Params, w):
    amp = p.sigma0 + p.sigma1 * w
    if np.any(np.abs(amp) < ZERO_AMP_REL * p.sigma0):
        raise DegenerateDiffusion(
            "noise amplitude vanishes on the path (|sigma0 + sigma1*w| "
            f"below {ZERO_AMP_REL:g} * sigma0)"
        )
    return amp


def lagrangian(p: Params, w: float, wdot: float) -> float:
    """Instantaneous normalized cost density at (w, wdot)."""
    amp = _amplitude(p, w)
    resid = (wdot - p.lambda1 * w * (1.0 - w * w)) / amp
    return 0.5 * float(resid * resid)


def action(p: Params, path: ScalarPath) -> ActionValue:
    """Cost of a sampled path: second-order differences and trapezoid weights.

    Time derivatives use centered differences inside and one-sided
    second-order stencils at the endpoints, so the value converges at second
    order in the step for smooth paths.
    """
    w = path.values
    dt = path.dt
    wdot = np.gradient(w, dt, edge_order=2)
    amp = _amplitude(p, w)
    resid = (wdot - p.lambda1 * w * (1.0 - w * w)) / amp
    normalized = float(np.trapezoid(0.5 * resid * resid, dx=dt))
    prefactor = (p.epsilon * math.cos(p.theta)) ** 2
    return ActionValue(raw=normalized / prefactor, normalized=normalized)


def _require_sigma1_zero(p: Params) -> None:
    if p.sigma1 != 0.0:
        raise ValueError("closed-form extremals require sigma1 = 0")


def extremal_path(
    p: Params, w0: float, horizon: float, n: int, direction: str = "reverse"
) -> ScalarPath:
    """Sampled zero- or least-cost path from w0 (sigma1 = 0 only).

    direction="forward" rides the drift toward the nearest well (cost zero);
    direction="reverse" runs the drift backwards toward the origin, the
    minimizing shape for uphill passages.  Needs w0 strictly inside (-1, 1)
    and, for "reverse", away from 0 to be nontrivial.
    """
    _require_sigma1_zero(p)
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    if not -1.0 <= w0 <= 1.0:
        raise ValueError(f"w0 must lie in [-1, 1], got {w0}")
    if n < 3:
        raise ValueError("need at least three nodes")
    times = np.linspace(0.0, horizon, n)
    if direction == "reverse":
        decay = np.exp(-p.lambda1 * times)
        values = w0 * decay / np.sqrt(1.0 - w0 * w0 + w0 * w0 * decay * decay)
    elif w0 == 0.0:
        values = np.zeros_like(times)
    else:
        # Written with decaying exponentials so large horizons cannot overflow.
        decay = np.exp(-2.0 * p.lambda1 * times)
        values = math.copysign(1.0, w0) * np.sqrt(
            w0 * w0 / (w0 * w0 + (1.0 - w0 * w0) * decay)
        )
    return ScalarPath(times=times, values=values)


def extremal_control(p: Params, w0: float, t):
    """Forcing that realizes the reverse extremal through the noise channel.

    Feeding this into the controlled flow (with sigma1 = 0) makes the scalar
    component track extremal_path(..., direction="reverse") exactly.
    Accepts scalar or array t.
    """
    _require_sigma1_zero(p)
    decay = np.exp(-p.lambda1 * np.asarray(t, dtype=float))
    denom = (1.0 - w0 * w0 + w0 * w0 * decay * decay) ** 1.5
    out = (
        -2.0
        * p.lambda1
        * w0
        * (1.0 - w0 * w0)
        * decay
        / (p.epsilon * p.sigma0 * math.cos(p.theta) * denom)
    )
    return float(out) if np.isscalar(t) else out


def closed_form_action(p: Params, w0: float, w_end: float) -> float:
    """Normalized cost of the optimal passage from w0 to w_end (sigma1 = 0).

    Valid for endpoints reachable by a single monotone reverse-drift segment:
    same sign, |w_end| <= |w0| <= 1.  The value is
    lambda1/(2*sigma0**2) * ((w_end**2 - 1)**2 - (w0**2 - 1)**2).
    """
    _require_sigma1_zero(p)
    if abs(w0) > 1.0:
        raise ValueError(f"w0 must lie in [-1, 1], got {w0}")
    if w0 * w_end < 0.0 or abs(w_end) > abs(w0):
        raise ValueError(
            "endpoint not reachable by one reverse-drift segment: need the same "
            f"sign and |w_end| <= |w0|, got w0={w0}, w_end={w_end}"
        )
    return (
        p.lambda1
        / (2.0 * p.sigma0**2)
        * ((w_end * w_end - 1.0) ** 2 - (w0 * w0 - 1.0) ** 2)
    )


def write_scalar_path(path: ScalarPath, stream: TextIO) -> None:
    """Write a path as t,w delimited text with a header row."""
    stream.write("t,w\n")
    for t, w in zip(path.times, path.values):
        stream.write(f"{t:.17g},{w:.17g}\n")


def read_scalar_path(stream: TextIO) -> ScalarPath:
    """Read a path written by write_scalar_path."""
    header = stream.readline().strip()
    if header != "t,w":
        raise ValueError(f"expected header 't,w', got {header!r}")
    rows = [line.split(",") for line in stream.read().split()]
    data = np.array([[float(a), float(b)] for a, b in rows])
    return ScalarPath(times=data[:, 0], values=data[:, 1])
