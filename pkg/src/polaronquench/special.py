"""Bessel functions of the first kind, integer order.

Two independent evaluations are provided: a power series (used for the
device-parameter mapping) and Miller's downward recurrence (used for the
Chebyshev coefficients). Each one serves as a cross-check for the other.
"""

import math

import numpy as np


def bessel_j_series(order: int, x: float, tol: float = 1e-17) -> float:
    """J_order(x) from the ascending power series.

    Suitable for moderate |x| (say |x| < 20); terms alternate, so the
    cancellation error grows roughly like exp(|x|) * eps.
    """
    if order < 0:
        return (-1) ** order * bessel_j_series(-order, x, tol)
    half = 0.5 * x
    term = half**order / math.factorial(order)
    total = term
    k = 0
    while True:
        k += 1
        term *= -(half * half) / (k * (k + order))
        total += term
        if abs(term) <= tol * max(abs(total), 1e-300) and k > 2:
            break
        if k > 500:
            break
    return total


def bessel_j_miller(nmax: int, x: float) -> np.ndarray:
    """J_0(x) ... J_nmax(x) by Miller's downward recurrence.

    The unnormalized sequence is started well above both nmax and |x| and
    normalized with the Neumann sum J_0 + 2 * sum_k J_2k = 1.
    """
    if nmax < 0:
        raise ValueError("nmax must be non-negative")
    x = float(x)
    out = np.zeros(nmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    ax = abs(x)
    start = int(max(nmax, ax) + 30 + 4 * math.sqrt(max(nmax, ax)))
    start += start % 2
    j_next = 0.0
    j_cur = 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        j_prev = 2.0 * k / ax * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if k - 1 <= nmax:
            out[k - 1] = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
        # rescale to avoid overflow for large start
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            out *= 1e-250
            norm *= 1e-250
    norm += j_cur  # k - 1 == 0 term
    out /= norm
    if x < 0:
        out[1::2] *= -1.0
    return out
