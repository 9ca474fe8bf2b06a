"""Compiled inner loop for the stochastic time stepper."""

from __future__ import annotations

from numba import njit


@njit(cache=True)
def euler_maruyama_chunk(x, y, lam1, lam2, lam3, eps, cos_t, sin_t, sig0, sig1, dt, dw, out):
    """Advance (x, y) over len(dw) Euler steps, one shared Gaussian increment per step.

    dw holds ready increments (already scaled by sqrt(dt)); out receives the
    post-step states row by row.  Returns the final (x, y).  The arithmetic
    mirrors simulate.step_sde operation for operation so single steps and
    compiled runs agree bitwise.
    """
    for k in range(dw.shape[0]):
        cubic = x * (1.0 - x * x)
        b1 = lam1 * cubic
        b2 = -lam2 * y + lam3 * cubic
        amp = eps * (sig0 + sig1 * x)
        a = amp * dw[k]
        x = x + b1 * dt + cos_t * a
        y = y + b2 * dt + sin_t * a
        out[k, 0] = x
        out[k, 1] = y
    return x, y
