"""Passage costs between the wells and the small-noise concentration verdict.

Normalized passage costs between points on the x-axis reduce to a line
integral: moving against the drift costs 2 * |drift| / amplitude**2 per unit
length, moving with it costs nothing.  An independent route discretizes the
path cost of the action module and minimizes it over fixed-endpoint paths.
Costs between the three wells feed a minimization over rooted arrow graphs
whose per-well minima order the wells by stability; the well(s) attaining the
overall minimum carry the vanishing-noise limit of the stationary law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.linalg import solve_banded

from .action import ScalarPath, action
from .model import Params

__all__ = [
    "Well",
    "CostMatrix",
    "WellCosts",
    "LimitMeasure",
    "PathOptimizationFailed",
    "ClassificationInconsistency",
    "default_delta",
    "wells_for",
    "passage_cost_integral",
    "passage_cost_pathopt",
    "cost_matrix",
    "global_costs",
    "classify_limit_measure",
]

WELL_X = {1: -1.0, 2: 0.0, 3: 1.0}

# Argmin ties in the global costs are resolved within this relative slack.
TIE_REL_TOL = 1e-9


class PathOptimizationFailed(RuntimeError):
    """Descent did not reach the gradient tolerance within the iteration cap."""

    def __init__(self, grad_norm: float, iterations: int, best_cost: float):
        self.grad_norm = grad_norm
        self.iterations = iterations
        self.best_cost = best_cost
        super().__init__(
            f"no convergence after {iterations} iterations: "
            f"gradient norm {grad_norm:.3g}, best cost {best_cost:.6g}"
        )


class ClassificationInconsistency(RuntimeError):
    """Cost-based verdict disagrees with the sign-of-sigma1 rule."""


@dataclass(frozen=True)
class Well:
    """Band of half-width delta around one of the three rest points."""

    index: int
    delta: float

    def __post_init__(self):
        if self.index not in WELL_X:
            raise ValueError(f"well index must be 1, 2 or 3, got {self.index}")
        if not 0.0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0, 0.5), got {self.delta}")

    @property
    def center_x(self) -> float:
        return WELL_X[self.index]

    def edge_toward(self, other_index: int) -> float:
        """x-coordinate of this band's edge facing the other well."""
        direction = math.copysign(1.0, WELL_X[other_index] - self.center_x)
        return self.center_x + direction * self.delta


def default_delta(p: Params) -> float:
    """Band half-width: 0.1, shrunk so the amplitude stays positive on the bands."""
    if p.sigma1 == 0.0:
        return 0.1
    return min(0.1, (p.sigma0 - abs(p.sigma1)) / (2.0 * abs(p.sigma1)))


def wells_for(p: Params, delta: float | None = None) -> tuple[Well, Well, Well]:
    d = default_delta(p) if delta is None else delta
    if p.sigma1 != 0.0:
        amp_cap = (p.sigma0 - abs(p.sigma1)) / abs(p.sigma1)
        if d >= amp_cap:
            raise ValueError(
                f"delta = {d} too wide: the noise amplitude must stay positive "
                f"on |x| <= 1 + delta (needs delta < {amp_cap})"
            )
    return (Well(1, d), Well(2, d), Well(3, d))


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        x1 = 0.5 * (x0 + x2)
        lm = 0.5 * (x0 + x1)
        rm = 0.5 * (x1 + x2)
        flm = f(lm)
        frm = f(rm)
        h = x2 - x0
        left = h / 12.0 * (f0 + 4.0 * flm + f1)
        right = h / 12.0 * (f1 + 4.0 * frm + f2)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, x1, f0, flm, f1, left, 0.5 * tol, depth - 1) + recurse(
            x1, x2, f1, frm, f2, right, 0.5 * tol, depth - 1
        )

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 48)


def passage_cost_integral(p: Params, from_x: float, to_x: float, tol: float = 1e-10) -> float:
    """Normalized least cost of moving from from_x to to_x along the axis.

    Splits the segment at the drift's sign changes (-1, 0, 1); with-drift
    pieces cost exactly zero, against-drift pieces integrate
    2 * |drift| / amplitude**2 by adaptive Simpson.
    """
    if from_x == to_x:
        return 0.0
    lo, hi = min(from_x, to_x), max(from_x, to_x)
    # Amplitude must keep one sign on the segment (it is affine: check ends).
    amp_lo = p.sigma0 + p.sigma1 * lo
    amp_hi = p.sigma0 + p.sigma1 * hi
    if min(abs(amp_lo), abs(amp_hi)) < 1e-9 * p.sigma0 or amp_lo * amp_hi <= 0:
        raise ValueError(
            f"noise amplitude vanishes on [{lo}, {hi}]: passage cost undefined"
        )
    travel = math.copysign(1.0, to_x - from_x)

    def integrand(u: float) -> float:
        amp = p.sigma0 + p.sigma1 * u
        return 2.0 * abs(p.lambda1 * u * (1.0 - u * u)) / (amp * amp)

    cuts = sorted({lo, hi} | {c for c in (-1.0, 0.0, 1.0) if lo < c < hi})
    cost = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        drift_mid = p.lambda1 * mid * (1.0 - mid * mid)
        if travel * drift_mid < 0.0:
            cost += _adaptive_simpson(integrand, a, b, tol)
    return cost


def _action_and_gradient(p: Params, w: np.ndarray, dt: float):
    """Segment-rule discretized cost and its gradient in the node values.

    Each segment contributes dt * L(midpoint, forward difference).  The
    centered stencil used for evaluating given paths is useless here: it
    cannot see zigzag components, so minimizing it collapses the cost to
    zero through sawtooth paths.  The segment rule is free of such null
    modes and is still second-order accurate.
    """
    v = np.diff(w) / dt
    m = 0.5 * (w[:-1] + w[1:])
    amp = p.sigma0 + p.sigma1 * m
    drift = p.lambda1 * m * (1.0 - m * m)
    e = v - drift
    r = e / (amp * amp)
    value = 0.5 * dt * float(e @ r)
    # dL/d(midpoint) and dL/d(slope) per segment, pushed to the two nodes.
    half_dt_Lm = 0.5 * dt * (-r * p.lambda1 * (1.0 - 3.0 * m * m) - e * r * p.sigma1 / amp)
    grad = np.zeros_like(w)
    grad[:-1] += half_dt_Lm - r
    grad[1:] += half_dt_Lm + r
    return value, grad


def passage_cost_pathopt(
    p: Params,
    from_x: float,
    to_x: float,
    horizon: float = 20.0,
    n: int = 400,
    max_iter: int = 10_000,
    grad_tol: float = 1e-8,
) -> float:
    """Normalized passage cost by direct minimization over discretized paths.

    Descent on the interior node values from the straight-line path, endpoints
    pinned.  The search direction preconditions the gradient with the
    tridiagonal stiffness of the velocity term at frozen coefficients (the
    usual semi-implicit treatment; plain gradient steps crawl once dt is
    small), the step length rescales by the previous-pair spectral estimate
    (flat directions need steps far beyond the Newton scale), and a
    backtracking line search against the worst of the last few accepted values
    guards both.  Raises PathOptimizationFailed when the interior gradient
    stays above tolerance for max_iter iterations.
    """
    if n < 5:
        raise ValueError("need at least five nodes")
    dt = horizon / (n - 1)
    w = np.linspace(from_x, to_x, n)

    value, grad = _action_and_gradient(p, w, dt)
    recent = [value]
    prev_w = None
    prev_grad = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        interior = grad[1:-1]
        gnorm = float(np.max(np.abs(interior)))
        if gnorm <= grad_tol:
            return value
        mid = 0.5 * (w[:-1] + w[1:])
        amp2 = (p.sigma0 + p.sigma1 * mid) ** 2
        stiff = 1.0 / (dt * amp2)
        banded = np.zeros((3, n - 2))
        banded[0, 1:] = -stiff[1:-1]
        banded[1, :] = stiff[:-1] + stiff[1:] + dt
        banded[2, :-1] = -stiff[1:-1]
        direction = solve_banded((1, 1), banded, interior)
        if prev_w is not None:
            s = (w - prev_w)[1:-1]
            y = interior - prev_grad
            num = float(s @ y)
            den = float(y @ solve_banded((1, 1), banded, y))
            step = num / den if (num > 0.0 and den > 0.0) else 1.0
            step = min(max(step, 1e-12), 1e8)
        else:
            step = 1.0
        slope = float(interior @ direction)
        bar = max(recent)
        prev_w, prev_grad = w.copy(), interior.copy()
        accepted = False
        for _ in range(60):
            trial = w.copy()
            trial[1:-1] -= step * direction
            trial_value, trial_grad = _action_and_gradient(p, trial, dt)
            if math.isfinite(trial_value) and trial_value <= bar - 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w = trial
        value = trial_value
        grad = trial_grad
        recent.append(value)
        if len(recent) > 10:
            recent.pop(0)
    gnorm = float(np.max(np.abs(grad[1:-1])))
    if gnorm <= grad_tol:
        return value
    raise PathOptimizationFailed(gnorm, iterations, value)


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise passage costs between the well bands (rows = from, cols = to).

    Entries use 1-based well indices through cost(); the saddle row and the
    diagonal are structurally zero, and crossings between the outer wells
    match the cost of reaching the middle band (every crossing goes through
    it).
    """

    entries: np.ndarray
    delta: float
    method: str

    def __post_init__(self):
        if self.entries.shape != (3, 3):
            raise ValueError("cost matrix is 3x3")
        if np.any(np.diag(self.entries) != 0.0):
            raise ValueError("diagonal entries must be zero")
        if self.entries[1, 0] != 0.0 or self.entries[1, 2] != 0.0:
            raise ValueError("leaving the middle band is free in both directions")
        finite = self.entries[np.isfinite(self.entries)]
        if np.any(finite < 0.0):
            raise ValueError("costs are nonnegative")

    def cost(self, i: int, j: int) -> float:
        return float(self.entries[i - 1, j - 1])


def _traversal_time(p: Params, from_x: float, to_x: float) -> float:
    """Crossing time of the against-flow extremal between two x values.

    Zero-energy minimizers climb at exactly |drift| speed whatever the noise
    profile, so the closed-form x-flow gives the time directly:
    t = (g(|from|) - g(|to|)) / lambda1 with g(u) = log(u / sqrt(1 - u**2)).
    Pinning the optimizer to this horizon keeps the discrete minimizer on the
    direct climb; with a much larger horizon the cheapest path detours through
    the nearby stable point first, which is a different quantity than the
    band-edge passage cost.
    """
    a, b = abs(from_x), abs(to_x)
    if not (0.0 < b < a < 1.0):
        raise ValueError("traversal time needs 0 < |to| < |from| < 1")

    def g(u: float) -> float:
        return math.log(u) - 0.5 * math.log(1.0 - u * u)

    return (g(a) - g(b)) / p.lambda1


def cost_matrix(
    p: Params,
    delta: float | None = None,
    method: str = "integral",
    horizon: float | None = None,
    n: int = 400,
) -> CostMatrix:
    """All pairwise band-to-band costs with the chosen method.

    Endpoints are the facing band edges (the cheapest entry/exit points).
    With-drift passages (out of the middle band, and the diagonal) are zero by
    construction; outer-to-outer passages equal the cost into the middle band.
    The path-opt horizon defaults to the extremal traversal time per entry;
    pass horizon to override it for every entry.
    """
    if method not in ("integral", "path-opt"):
        raise ValueError(f"method must be 'integral' or 'path-opt', got {method!r}")
    w1, w2, w3 = wells_for(p, delta)

    def cost(a: Well, b: Well) -> float:
        src = a.edge_toward(b.index)
        dst = b.edge_toward(a.index)
        if method == "integral":
            return passage_cost_integral(p, src, dst)
        t_cross = _traversal_time(p, src, dst) if horizon is None else horizon
        return passage_cost_pathopt(p, src, dst, horizon=t_cross, n=n)

    v12 = cost(w1, w2)
    v32 = cost(w3, w2)
    entries = np.array(
        [
            [0.0, v12, v12],
            [0.0, 0.0, 0.0],
            [v32, v32, 0.0],
        ]
    )
    return CostMatrix(entries=entries, delta=w1.delta, method=method)


# For each root, the cycle-free arrow graphs on {1, 2, 3} with one outgoing
# arrow per non-root well: (a->r, b->r), (a->r, b->a), (a->b, b->r).
_ROOTED_GRAPHS: dict[int, tuple[tuple[tuple[int, int], ...], ...]] = {}
for _root in (1, 2, 3):
    _a, _b = sorted(set((1, 2, 3)) - {_root})
    _ROOTED_GRAPHS[_root] = (
        ((_a, _root), (_b, _root)),
        ((_a, _root), (_b, _a)),
        ((_a, _b), (_b, _root)),
    )


@dataclass(frozen=True)
class WellCosts:
    """Per-well global costs and the set of minimizing wells."""

    costs: tuple[float, float, float]
    argmin: tuple[int, ...]

    def cost(self, i: int) -> float:
        return self.costs[i - 1]


def global_costs(cm: CostMatrix) -> WellCosts:
    """Minimize the summed arrow costs over the rooted graphs for each well.

    Infinite entries saturate sums; ties within a small relative slack all
    enter the argmin set.
    """
    costs = []
    for root in (1, 2, 3):
        best = math.inf
        for graph in _ROOTED_GRAPHS[root]:
            total = sum(cm.cost(i, j) for i, j in graph)
            best = min(best, total)
        costs.append(best)
    low = min(costs)
    tol = TIE_REL_TOL * max(1.0, abs(low))
    argmin = tuple(i + 1 for i, c in enumerate(costs) if c <= low + tol)
    return WellCosts(costs=(costs[0], costs[1], costs[2]), argmin=argmin)


@dataclass(frozen=True)
class LimitMeasure:
    """Weights on the stable wells carried by the vanishing-noise limit."""

    weights: Mapping[int, float]

    def __post_init__(self):
        if set(self.weights) - {1, 3}:
            raise ValueError("only the outer wells can carry mass")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to one, got {total}")

    @property
    def label(self) -> str:
        points = {1: "delta_(-1,0)", 3: "delta_(1,0)"}
        parts = []
        for well in (1, 3):
            weight = self.weights.get(well, 0.0)
            if weight == 0.0:
                continue
            parts.append(points[well] if weight == 1.0 else f"{weight:g}*{points[well]}")
        return "+".join(parts)


def classify_limit_measure(p: Params, delta: float | None = None) -> LimitMeasure:
    """Verdict of the cost comparison between the two outer wells.

    Computes integral-method global costs and selects the minimizing stable
    well(s); cross-checks against the amplitude rule (the well where the noise
    amplitude is smaller wins: sigma1 > 0 favors the left well, sigma1 < 0 the
    right one, sigma1 = 0 splits the mass evenly) and raises on disagreement.
    """
    wc = global_costs(cost_matrix(p, delta=delta, method="integral"))
    w1, w3 = wc.cost(1), wc.cost(3)
    tol = TIE_REL_TOL * max(1.0, abs(w1), abs(w3))
    if abs(w1 - w3) <= tol:
        from_costs = LimitMeasure(weights={1: 0.5, 3: 0.5})
    elif w1 < w3:
        from_costs = LimitMeasure(weights={1: 1.0})
    else:
        from_costs = LimitMeasure(weights={3: 1.0})

    if p.sigma1 > 0:
        from_sign = LimitMeasure(weights={1: 1.0})
    elif p.sigma1 < 0:
        from_sign = LimitMeasure(weights={3: 1.0})
    else:
        from_sign = LimitMeasure(weights={1: 0.5, 3: 0.5})

    if dict(from_costs.weights) != dict(from_sign.weights):
        raise ClassificationInconsistency(
            f"cost verdict {from_costs.label} disagrees with the amplitude rule "
            f"{from_sign.label} (sigma1 = {p.sigma1})"
        )
    return from_costs
