"""Drift-condition certificates for the quartic observable W = 1 + x**4 + a*y**2.

A certificate is a triple (alpha, alpha1, alpha2) with

    (generator W)(x, y)  <=  alpha1 - alpha2 * W(x, y)   for all (x, y)

and every noise size epsilon <= epsilon_max.  Such a bound yields moment
control and tightness of occupation measures.  The search evaluates the
closed-form left side on a rectangular grid and closes the complement with an
explicit polynomial tail bound built from a weighted Young inequality: the
degree-six decay of the drift term dominates every other contribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Params, State

__all__ = [
    "GridSpec",
    "LyapunovCertificate",
    "CertificateNotFound",
    "default_alpha",
    "alpha_upper_bound",
    "lyapunov_W",
    "generator_on_W",
    "find_certificate",
    "grid_slack",
    "tail_bound",
    "certificate_record",
]


class CertificateNotFound(RuntimeError):
    """Search failed; carries the reason and the worst grid node seen."""

    def __init__(self, reason: str, worst_node: tuple[float, float] | None = None):
        self.reason = reason
        self.worst_node = worst_node
        where = f" (worst node {worst_node})" if worst_node is not None else ""
        super().__init__(reason + where)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation grid: bounds and node counts per axis."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("grid bounds must be ordered")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least two nodes per axis")

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.linspace(self.x_min, self.x_max, self.nx)
        ys = np.linspace(self.y_min, self.y_max, self.ny)
        return np.meshgrid(xs, ys, indexing="ij")


DEFAULT_GRID = GridSpec(-3.0, 3.0, -3.0, 3.0, 601, 601)


def alpha_upper_bound(p: Params) -> float:
    """Largest admissible weight of y**2 in the observable."""
    return 8.0 * p.lambda1 * p.lambda2 / p.lambda3**2


def default_alpha(p: Params) -> float:
    """Default weight: half the admissible upper bound."""
    return 4.0 * p.lambda1 * p.lambda2 / p.lambda3**2


@dataclass(frozen=True)
class LyapunovCertificate:
    """Verified drift-condition data.

    alpha_bound records the admissibility threshold for alpha used at
    construction; min_slack is the smallest margin alpha1 - alpha2*W - LW
    observed on the grid.
    """

    alpha: float
    alpha_bound: float
    alpha1: float
    alpha2: float
    grid: GridSpec
    epsilon_max: float
    min_slack: float

    def __post_init__(self):
        if not (0.0 < self.alpha < self.alpha_bound):
            raise ValueError(
                f"alpha must lie in (0, {self.alpha_bound!r}), got {self.alpha!r}"
            )
        if self.alpha1 <= 0 or self.alpha2 <= 0:
            raise ValueError("alpha1 and alpha2 must be positive")
        if self.epsilon_max < 0:
            raise ValueError("epsilon_max must be nonnegative")


def lyapunov_W(alpha: float, s: State) -> float:
    """Observable value 1 + x**4 + alpha * y**2."""
    return 1.0 + s.x**4 + alpha * s.y * s.y


def _gen_W(p: Params, alpha: float, x, y, eps):
    # Closed form of the generator applied to W; x, y may be arrays.
    cubic = x * (1.0 - x * x)
    cos_t = math.cos(p.theta)
    sin_t = math.sin(p.theta)
    noise2 = (eps * (p.sigma0 + p.sigma1 * x)) ** 2
    return (
        4.0 * p.lambda1 * x**4 * (1.0 - x * x)
        - 2.0 * alpha * y * (p.lambda2 * y - p.lambda3 * cubic)
        + noise2 * (6.0 * x * x * cos_t * cos_t + alpha * sin_t * sin_t)
    )


def generator_on_W(p: Params, alpha: float, s: State, epsilon: float | None = None) -> float:
    """Generator applied to W at s, in closed form (epsilon defaults to p.epsilon)."""
    eps = p.epsilon if epsilon is None else epsilon
    return float(_gen_W(p, alpha, s.x, s.y, eps))


def _young_weight(p: Params, alpha: float) -> float:
    # Fraction q of the available -2*alpha*lambda2*y**2 spent absorbing the
    # cross term; any q above alpha*lambda3**2/(8*lambda1*lambda2) keeps the
    # leading x**6 coefficient negative, and admissible alphas put that
    # threshold below one.  Take the midpoint.
    threshold = alpha * p.lambda3**2 / (8.0 * p.lambda1 * p.lambda2)
    return 0.5 * (threshold + 1.0)


def alpha2_cap(p: Params, alpha: float) -> float:
    """Largest alpha2 the tail bound supports for this alpha."""
    q = _young_weight(p, alpha)
    return 2.0 * p.lambda2 * (1.0 - q)


def tail_bound(p: Params, alpha: float, alpha2: float, eps: float) -> float:
    """Global upper bound for (generator W) + alpha2 * W.

    Young's inequality with weight q on the cross term and the elementary
    bound (sigma0 + sigma1*x)**2 <= 2*sigma0**2 + 2*sigma1**2*x**2 reduce the
    expression to a cubic in u = x**2 with negative leading coefficient plus a
    nonpositive multiple of y**2; the cubic's maximum over u >= 0 is explicit.
    Requires alpha2 <= alpha2_cap.
    """
    q = _young_weight(p, alpha)
    if alpha2 > 2.0 * p.lambda2 * (1.0 - q):
        raise ValueError(
            f"alpha2 = {alpha2!r} exceeds the tail bound cap {alpha2_cap(p, alpha)!r}"
        )
    beta = alpha * p.lambda3**2 / (2.0 * p.lambda2 * q)
    cos2 = math.cos(p.theta) ** 2
    sin2 = math.sin(p.theta) ** 2
    e2 = eps * eps
    c3 = beta - 4.0 * p.lambda1
    c2 = 4.0 * p.lambda1 - 2.0 * beta + 12.0 * e2 * p.sigma1**2 * cos2 + alpha2
    c1 = beta + 12.0 * e2 * p.sigma0**2 * cos2 + 2.0 * alpha * e2 * p.sigma1**2 * sin2
    c0 = 2.0 * alpha * e2 * p.sigma0**2 * sin2 + alpha2
    # max over u >= 0 of c3*u**3 + c2*u**2 + c1*u + c0 (c3 < 0, c1 >= 0): the
    # larger critical point of the derivative.
    disc = 4.0 * c2 * c2 - 12.0 * c3 * c1
    u_star = max(0.0, (-2.0 * c2 - math.sqrt(disc)) / (6.0 * c3))
    return ((c3 * u_star + c2) * u_star + c1) * u_star + c0


def find_certificate(
    p: Params,
    grid: GridSpec = DEFAULT_GRID,
    epsilon_max: float | None = None,
    alpha2: float | None = None,
) -> LyapunovCertificate:
    """Search a certificate valid on the grid and, by the tail bound, beyond it.

    alpha is fixed to default_alpha(p).  alpha2 defaults to half the tail cap;
    alpha1 is the larger of the grid maximum and the tail bound, plus a
    positive margin so the certified slack is strictly positive.
    """
    if grid.x_min > -3.0 or grid.x_max < 3.0 or grid.y_min > -3.0 or grid.y_max < 3.0:
        raise ValueError("grid must contain the square [-3, 3] x [-3, 3]")
    eps = p.epsilon0 if epsilon_max is None else epsilon_max
    alpha = default_alpha(p)
    cap = alpha2_cap(p, alpha)
    a2 = 0.5 * cap if alpha2 is None else alpha2

    X, Y = grid.mesh()
    gvals = _gen_W(p, alpha, X, Y, eps) + a2 * (1.0 + X**4 + alpha * Y * Y)
    flat = int(np.argmax(gvals))
    worst_node = (float(X.flat[flat]), float(Y.flat[flat]))
    grid_max = float(gvals.flat[flat])

    if a2 <= 0 or a2 > cap:
        raise CertificateNotFound(
            f"alpha2 = {a2!r} outside the tail-supported range (0, {cap!r}]",
            worst_node,
        )
    alpha1 = max(grid_max, tail_bound(p, alpha, a2, eps))
    alpha1 += max(1e-9, 1e-6 * abs(alpha1))
    return LyapunovCertificate(
        alpha=alpha,
        alpha_bound=alpha_upper_bound(p),
        alpha1=alpha1,
        alpha2=a2,
        grid=grid,
        epsilon_max=eps,
        min_slack=alpha1 - grid_max,
    )


def grid_slack(p: Params, cert: LyapunovCertificate, epsilon: float | None = None) -> float:
    """Smallest alpha1 - alpha2*W - (generator W) over the certificate grid.

    Nonnegative slack at epsilon <= epsilon_max re-verifies the certificate on
    the grid (the generator term only grows with epsilon).
    """
    eps = cert.epsilon_max if epsilon is None else epsilon
    X, Y = cert.grid.mesh()
    w = 1.0 + X**4 + cert.alpha * Y * Y
    slack = cert.alpha1 - cert.alpha2 * w - _gen_W(p, cert.alpha, X, Y, eps)
    return float(slack.min())


def certificate_record(cert: LyapunovCertificate) -> str:
    """Flat key = value rendering of a certificate."""
    lines = [
        f"alpha = {cert.alpha:.17g}",
        f"alpha_bound = {cert.alpha_bound:.17g}",
        f"alpha1 = {cert.alpha1:.17g}",
        f"alpha2 = {cert.alpha2:.17g}",
        f"x_min = {cert.grid.x_min:.17g}",
        f"x_max = {cert.grid.x_max:.17g}",
        f"y_min = {cert.grid.y_min:.17g}",
        f"y_max = {cert.grid.y_max:.17g}",
        f"nx = {cert.grid.nx}",
        f"ny = {cert.grid.ny}",
        f"epsilon_max = {cert.epsilon_max:.17g}",
        f"min_slack = {cert.min_slack:.17g}",
    ]
    return "\n".join(lines) + "\n"
