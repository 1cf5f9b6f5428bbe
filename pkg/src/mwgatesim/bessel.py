"""Bessel functions J0, J1 by power series.

The drive ratios used by the gate keep the argument 2*Omega/delta well
below 1, so a fixed 20-term alternating series is exact to double
precision on the validated range |x| <= 2 (remainder < 1e-15).
"""

from __future__ import annotations

N_TERMS = 20
MAX_ARGUMENT = 2.0


class BesselRangeError(ValueError):
    pass


def j0_series(x: float) -> float:
    """J0(x) = sum_k (-1)^k (x^2/4)^k / (k!)^2."""
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    for k in range(1, N_TERMS):
        term *= -q / (k * k)
        total += term
    return total


def j1_series(x: float) -> float:
    """J1(x) = (x/2) sum_k (-1)^k (x^2/4)^k / (k! (k+1)!)."""
    q = 0.25 * x * x
    term = 0.5 * x
    total = term
    for k in range(1, N_TERMS):
        term *= -q / (k * (k + 1))
        total += term
    return total


def bessel_j(order: int, x: float) -> float:
    """First-kind Bessel function of order 0 or 1 on the validated range."""
    if abs(x) > MAX_ARGUMENT:
        raise BesselRangeError(
            f"|x| = {abs(x)} outside validated range {MAX_ARGUMENT}"
        )
    if order == 0:
        return j0_series(float(x))
    if order == 1:
        return j1_series(float(x))
    raise ValueError("only orders 0 and 1 are provided")
