"""Cylindrical Bessel and Hankel functions of integer order.

Thin wrappers over :mod:`scipy.special` that fix the conventions used in the
rest of the package: integer order of either sign, real non-negative argument,
and the second-kind Hankel function ``H2 = J - jY`` (outgoing for an
``exp(+jwt)`` time factor).
"""

import numpy as np
from scipy import special


def _neg_order_sign(n):
    # J_{-n} = (-1)^n J_n, same for Y_n and H_n
    n = np.asarray(n)
    return np.where((n < 0) & (np.abs(n) % 2 == 1), -1.0, 1.0)


def bessel_j(n, x):
    """Bessel function of the first kind, ``J_n(x)`` for integer ``n``, ``x >= 0``."""
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_j requires x >= 0")
    if not np.issubdtype(n.dtype, np.integer):
        raise TypeError("order must be an integer")
    return _neg_order_sign(n) * special.jv(np.abs(n), x)


def bessel_y(n, x):
    """Bessel function of the second kind, ``Y_n(x)``; singular at ``x = 0``."""
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bessel_y requires x > 0 (logarithmic singularity at 0)")
    if not np.issubdtype(n.dtype, np.integer):
        raise TypeError("order must be an integer")
    return _neg_order_sign(n) * special.yv(np.abs(n), x)


def hankel2(n, x):
    """Hankel function of the second kind, ``H2_n(x) = J_n(x) - j Y_n(x)``."""
    return bessel_j(n, x) - 1j * bessel_y(n, x)


def hankel2_derivative(n, x):
    """Derivative ``d/dx H2_n(x)`` from the standard recurrence."""
    n = np.asarray(n)
    return 0.5 * (hankel2(n - 1, x) - hankel2(n + 1, x))


def bessel_j_derivative(n, x):
    n = np.asarray(n)
    return 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
