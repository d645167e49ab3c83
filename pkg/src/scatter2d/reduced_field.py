"""Field of the J0 (homogeneous) part of the contrast currents, computed from data.

For receivers on a circle of radius ``R`` enclosing the domain, Graf's
addition theorem turns the scattered field into a cylindrical-harmonic series
whose coefficients can be re-expanded with regular ``J_n`` functions.  The
result is the convolution of the unknown currents with ``J0``, obtained
without knowing the currents:

    sum_m E_s(r_m) K(r_m, r) dl_m  =  -j k^2/4  *  int J0(k|r - r'|) W(r') dr'

``K`` is the truncated series kernel built by :func:`kernel_ktm`.  The
``-j k^2/4`` factor is divided out here, so :func:`e_j0_from_data` returns the
raw J0 integral; :func:`reduced_incident` puts the factor back.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .specfun import bessel_j, hankel2

log = logging.getLogger(__name__)

DEFAULT_SLACK = 3


class DegradedApertureWarning(UserWarning):
    """Receivers do not cover the full circle uniformly; the identity is approximate."""


@dataclass
class KernelKTM:
    values: np.ndarray  # (receivers, cells)
    n_max: int


def truncation_order(k, ball_radius, slack=DEFAULT_SLACK):
    return int(np.ceil(k * ball_radius)) + int(slack)


def kernel_ktm(grid, setup, n_slack=DEFAULT_SLACK, ball_radius=None, n_max=None, points=None):
    """Truncated series kernel between receivers and cell centers (or ``points``).

    Only orders ``|n| <= n_max`` with ``n_max = ceil(k a) + n_slack`` are kept,
    ``a`` being the radius of a disc that encloses the domain.
    """
    k = setup.wavenumber
    R = setup.radius
    if R <= 0:
        raise ValueError("receiver radius must be positive")
    if n_max is None:
        a = grid.enclosing_radius if ball_radius is None else ball_radius
        n_max = truncation_order(k, a, n_slack)
    pts = grid.centers if points is None else np.asarray(points, float)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    n = np.arange(-n_max, n_max + 1)
    hr = hankel2(n, k * R)
    if np.any(hr == 0) or not np.all(np.isfinite(hr)):
        raise ValueError("Hankel function vanished or overflowed at the receiver radius")
    jn = bessel_j(n[:, None], k * rho[None, :])  # (orders, cells)
    # K[m, p] = 1/(2 pi R) sum_n J_n(k rho_p) / H_n(k R) exp(jn(phi_p - phi_m))
    left = np.exp(-1j * np.outer(setup.rx_angles, n)) / hr[None, :]  # (receivers, orders)
    right = jn * np.exp(1j * np.outer(n, phi))  # (orders, cells)
    return KernelKTM(left @ right / (2 * np.pi * R), n_max)


def _arc_weights(angles):
    """Trapezoid weights (radians) for possibly non-uniform angles on the circle."""
    order = np.argsort(np.mod(angles, 2 * np.pi))
    a = np.mod(angles, 2 * np.pi)[order]
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    w = np.empty_like(a)
    w[order] = 0.5 * (gaps + np.roll(gaps, 1))
    return w


def e_j0_from_data(scattered, grid, setup, kernel=None, n_slack=DEFAULT_SLACK, **kernel_kw):
    """J0 integral of the currents on the cell centers, one column per view.

    ``scattered`` is ``(receivers, views)``; NaN marks missing samples (limited
    aspect), which are dropped from the quadrature and trigger a
    :class:`DegradedApertureWarning`.
    """
    es = np.asarray(scattered, dtype=complex)
    if es.ndim == 1:
        es = es[:, None]
    if kernel is None:
        kernel = kernel_ktm(grid, setup, n_slack=n_slack, **kernel_kw)
    missing = np.isnan(es)
    if setup.rx_uniform and not missing.any():
        dl = np.full(setup.n_receivers, 2 * np.pi * setup.radius / setup.n_receivers)
    else:
        warnings.warn(
            "receivers do not sample the full circle uniformly; E_J0 is approximate",
            DegradedApertureWarning,
            stacklevel=2,
        )
        dl = setup.radius * _arc_weights(setup.rx_angles)
    data = np.where(missing, 0.0, es) * dl[:, None]
    k = setup.wavenumber
    return (4j / k**2) * (kernel.values.T @ data)


def e_j0_far_field(pattern, grid, setup, directions=None):
    """J0 integral of the currents from a far-field pattern on uniform directions.

    ``pattern`` is ``(directions, views)`` and follows the convention
    ``E_s(r) ~ exp(-j k r) / sqrt(r) * pattern(r_hat)`` (see
    :func:`far_field_pattern`).  With an ``exp(+jwt)`` time factor the test
    function is ``exp(-j k r . r_hat)``.
    """
    pattern = np.asarray(pattern, dtype=complex)
    if pattern.ndim == 1:
        pattern = pattern[:, None]
    ang = setup.rx_angles if directions is None else np.asarray(directions, float)
    d = np.column_stack([np.cos(ang), np.sin(ang)])
    k = setup.wavenumber
    test = np.exp(-1j * k * grid.centers @ d.T)  # (cells, directions)
    integral = test @ pattern * (2 * np.pi / ang.size)
    # pattern = c * int exp(jk r_hat.r') W dr'  (large-argument Hankel asymptotics)
    c = -0.25j * k**2 * np.sqrt(2.0 / (np.pi * k)) * np.exp(0.25j * np.pi)
    return integral / (2 * np.pi * c)


def far_field_pattern(scattered, setup):
    """Strip the cylindrical spreading ``exp(-jkR)/sqrt(R)`` from receiver data."""
    k = setup.wavenumber
    R = setup.radius
    return np.asarray(scattered) * np.sqrt(R) * np.exp(1j * k * R)


def radiating_currents_tsvd(scattered, Ae, threshold):
    """Minimum-norm TSVD solution of ``Ae W = E_s`` keeping ``s_i >= threshold * s_1``."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    es = np.asarray(scattered, dtype=complex)
    u, s, vh = linalg.svd(Ae, full_matrices=False)
    keep = s >= threshold * s[0]
    coef = (u[:, keep].conj().T @ es) / (s[keep][:, None] if es.ndim == 2 else s[keep])
    return vh[keep].conj().T @ coef


def reduced_incident(incident, e_j0, k):
    """``E_i - j k^2/4 E_J0``: the known part of the total field in the Y0 model."""
    incident = np.asarray(incident)
    e_j0 = np.asarray(e_j0)
    if incident.shape != e_j0.shape:
        raise ValueError(f"shape mismatch: {incident.shape} vs {e_j0.shape}")
    return incident - 0.25j * k**2 * e_j0
