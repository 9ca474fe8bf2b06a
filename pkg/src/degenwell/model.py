"""Model definition for a planar double-well diffusion driven by one noise source.

The state (x, y) follows

    dx = lambda1 * x * (1 - x**2) dt + epsilon * cos(theta) * (sigma0 + sigma1 * x) dB
    dy = (-lambda2 * y + lambda3 * x * (1 - x**2)) dt + epsilon * sin(theta) * (sigma0 + sigma1 * x) dB

with a single scalar Brownian motion B shared by both components, so the noise
always pushes along the fixed direction (cos(theta), sin(theta)) with a
state-dependent amplitude that vanishes on the line x = -sigma0/sigma1.

The noiseless flow has two stable equilibria at (-1, 0), (1, 0) and a saddle at
the origin; the y-axis separates the two basins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

__all__ = [
    "PARAM_KEYS",
    "ANGLE_TOL",
    "InvalidParams",
    "Params",
    "State",
    "Equilibrium",
    "EQUILIBRIA",
    "ScalarField",
    "param_violations",
    "validate_params",
    "forbidden_thetas",
    "drift",
    "diffusion_coeff",
    "generator_apply",
    "bracket_determinant",
]

PARAM_KEYS = (
    "lambda1",
    "lambda2",
    "lambda3",
    "sigma0",
    "sigma1",
    "theta",
    "epsilon",
    "epsilon0",
)

# Absolute tolerance used when testing theta against an excluded angle.
ANGLE_TOL = 1e-12


class InvalidParams(ValueError):
    """Parameter record violates the standing model assumptions."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Params:
    """Model parameters.

    Construction does not validate: `validate_params` is the gate that enforces
    the standing assumptions.  Building a Params directly (e.g. with epsilon=0
    to study the noiseless flow) is allowed.
    """

    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    sigma0: float = 1.0
    sigma1: float = 0.0
    theta: float = math.pi / 4
    epsilon: float = 0.1
    epsilon0: float = 0.5


@dataclass(frozen=True)
class State:
    """A point of the plane."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"state coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Equilibrium:
    """Rest point of the noiseless flow with its stability kind."""

    index: int  # 1 = left well, 2 = saddle, 3 = right well
    point: State
    kind: str  # "stable" or "saddle"

    def __post_init__(self):
        if self.kind not in ("stable", "saddle"):
            raise ValueError(f"unknown equilibrium kind {self.kind!r}")
        if (self.kind == "saddle") != (self.index == 2):
            raise ValueError("the saddle is the middle rest point and vice versa")


EQUILIBRIA: tuple[Equilibrium, ...] = (
    Equilibrium(1, State(-1.0, 0.0), "stable"),
    Equilibrium(2, State(0.0, 0.0), "saddle"),
    Equilibrium(3, State(1.0, 0.0), "stable"),
)


def forbidden_thetas(lambda1: float, lambda2: float, lambda3: float) -> tuple[float, ...]:
    """Angles at which the noise direction degenerates.

    Includes +-pi/2 and, when 2*lambda1 != lambda2, both angles in (-pi, pi)
    with tan(theta) = 2*lambda3 / (2*lambda1 - lambda2): at those angles the
    noise direction and its drift commutator become colinear at the wells (the
    bracket determinant below vanishes).
    """
    angles = [-math.pi / 2, math.pi / 2]
    denom = 2.0 * lambda1 - lambda2
    if denom != 0.0:
        principal = math.atan(2.0 * lambda3 / denom)
        angles.append(principal)
        angles.append(principal - math.pi if principal > 0 else principal + math.pi)
    return tuple(angles)


def _angular_distance(a: float, b: float) -> float:
    d = abs(a - b) % (2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


def param_violations(record: Mapping[str, object]) -> list[str]:
    """Check a raw key->value record; return one message per violated clause.

    An empty list means the record defines admissible parameters.
    """
    violations: list[str] = []
    unknown = sorted(set(record) - set(PARAM_KEYS))
    if unknown:
        violations.append(f"unknown parameter keys: {', '.join(unknown)}")

    values: dict[str, float] = {}
    for key in PARAM_KEYS:
        if key not in record:
            values[key] = float(getattr(Params, key))
            continue
        try:
            v = float(record[key])  # type: ignore[arg-type]
        except (TypeError, ValueError):
            violations.append(f"{key} is not a number: {record[key]!r}")
            continue
        if not math.isfinite(v):
            violations.append(f"{key} must be finite, got {v}")
            continue
        values[key] = v

    if len(values) < len(PARAM_KEYS):
        return violations

    for key in ("lambda1", "lambda2", "lambda3"):
        if values[key] <= 0:
            violations.append(f"{key} must be positive, got {values[key]}")
    if values["sigma0"] <= 0:
        violations.append(f"sigma0 must be positive, got {values['sigma0']}")
    elif not (-values["sigma0"] < values["sigma1"] < values["sigma0"]):
        violations.append(
            f"sigma1 must lie in (-sigma0, sigma0), got sigma1={values['sigma1']} "
            f"with sigma0={values['sigma0']}"
        )
    theta = values["theta"]
    if not (-math.pi < theta < math.pi):
        violations.append(f"theta must lie in the open interval (-pi, pi), got {theta}")
    elif all(v > 0 for v in (values["lambda1"], values["lambda2"], values["lambda3"])):
        for bad in forbidden_thetas(values["lambda1"], values["lambda2"], values["lambda3"]):
            if _angular_distance(theta, bad) <= ANGLE_TOL:
                violations.append(f"theta forbidden: within {ANGLE_TOL:g} of excluded angle {bad!r}")
                break
    if values["epsilon0"] <= 0:
        violations.append(f"epsilon0 must be positive, got {values['epsilon0']}")
    if not (0 < values["epsilon"] < values["epsilon0"]):
        violations.append(
            f"epsilon must lie in (0, epsilon0), got epsilon={values['epsilon']} "
            f"with epsilon0={values['epsilon0']}"
        )
    return violations


def validate_params(record: Mapping[str, object]) -> Params:
    """Build Params from a raw record, enforcing every standing assumption.

    Missing keys fall back to the Params defaults.  Raises InvalidParams
    carrying the full list of violated clauses.
    """
    violations = param_violations(record)
    if violations:
        raise InvalidParams(violations)
    return Params(**{k: float(record.get(k, getattr(Params, k))) for k in PARAM_KEYS})


def drift(p: Params, s: State) -> tuple[float, float]:
    """Deterministic vector field at s."""
    cubic = s.x * (1.0 - s.x * s.x)
    return (p.lambda1 * cubic, -p.lambda2 * s.y + p.lambda3 * cubic)


def diffusion_coeff(p: Params, x: float) -> float:
    """Noise amplitude factor sigma0 + sigma1 * x (signed; vanishes at x = -sigma0/sigma1)."""
    return p.sigma0 + p.sigma1 * x


@dataclass(frozen=True)
class ScalarField:
    """Twice-differentiable observable given by value/gradient/Hessian callbacks.

    gradient(x, y) returns (f_x, f_y); hessian(x, y) returns a 2x2 nested
    sequence ((f_xx, f_xy), (f_yx, f_yy)), expected symmetric.
    """

    value: Callable[[float, float], float]
    gradient: Callable[[float, float], tuple[float, float]]
    hessian: Callable[[float, float], Sequence[Sequence[float]]]


def generator_apply(p: Params, f: ScalarField, s: State) -> float:
    """Apply the diffusion generator to the observable f at s.

    The second-order part couples f_xx, f_yy and f_xy through the rank-one
    noise: the full coefficient of f_xy is epsilon**2 * amp**2 * sin * cos
    (both mixed halves combined).
    """
    fx, fy = f.gradient(s.x, s.y)
    hess = f.hessian(s.x, s.y)
    fxx = float(hess[0][0])
    fyy = float(hess[1][1])
    fxy = 0.5 * (float(hess[0][1]) + float(hess[1][0]))
    b1, b2 = drift(p, s)
    cos_t = math.cos(p.theta)
    sin_t = math.sin(p.theta)
    noise2 = (p.epsilon * diffusion_coeff(p, s.x)) ** 2
    return (
        b1 * fx
        + b2 * fy
        + 0.5 * noise2 * (cos_t * cos_t * fxx + sin_t * sin_t * fyy)
        + noise2 * sin_t * cos_t * fxy
    )


def _bracket_matrix(p: Params) -> tuple[tuple[float, float], tuple[float, float]]:
    # Columns: drift commutator of the noise direction and the noise direction
    # itself, both evaluated at a well and stripped of the common positive
    # amplitude factor.
    cos_t = math.cos(p.theta)
    sin_t = math.sin(p.theta)
    return (
        (2.0 * p.lambda1 * cos_t, cos_t),
        (2.0 * p.lambda3 * cos_t + p.lambda2 * sin_t, sin_t),
    )


def bracket_determinant(p: Params) -> float:
    """Determinant pairing the noise direction with its drift commutator at a well.

    Nonzero exactly when theta avoids the excluded angles, i.e. when the noise
    direction together with its commutator spans the plane (the hypoellipticity
    condition making the law of the diffusion smooth).
    """
    m = _bracket_matrix(p)
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]
