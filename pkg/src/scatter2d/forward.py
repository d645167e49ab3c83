"""Synthetic data: MoM forward solver, noise model and the analytic cylinder oracle."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .operators import (
    ConvolutionOperator,
    dense_from_table,
    external_operator,
    kernel_table,
    radiation_matrix,
)
from .specfun import bessel_j, bessel_j_derivative, hankel2, hankel2_derivative

log = logging.getLogger(__name__)


def line_source_field(points, sources, k):
    """Field of unit TM line sources, ``-(j/4) H0(k |r - r_t|)``; shape ``(points, sources)``."""
    d = np.linalg.norm(points[:, None, :] - sources[None, :, :], axis=-1)
    if np.any(d == 0):
        raise ValueError("field point coincides with a line source")
    return -0.25j * hankel2(0, k * d)


def incident_field(grid, setup):
    """Incident field on the cell centers, one column per view."""
    setup.check_outside(grid)
    return line_source_field(grid.centers, setup.tx_positions, setup.wavenumber)


@dataclass
class ForwardSolution:
    """Fields of one forward solve; cell quantities are ``(num_cells, views)``."""

    grid: object
    setup: object
    chi: np.ndarray
    incident: np.ndarray
    total: np.ndarray
    currents: np.ndarray
    scattered: np.ndarray

    def total_field_at(self, points):
        """Total field at arbitrary points outside the source cells (e.g. another grid)."""
        k = self.setup.wavenumber
        support = np.flatnonzero(self.chi)
        ei = line_source_field(points, self.setup.tx_positions, k)
        if support.size == 0:
            return ei
        out = ei.copy()
        for start in range(0, len(points), 1024):
            sl = slice(start, start + 1024)
            G = radiation_matrix(points[sl], self.grid.centers[support], k, self.grid.cell_radius)
            out[sl] += G @ self.currents[support]
        return out


def solve_forward(chi, grid, setup, Ae=None):
    """Solve the state equation per view and radiate the currents to the receivers.

    Only the rows of ``(I - Ai X) E_t = E_i`` on the support of ``chi`` are
    coupled, so a dense LU on the support gives the exact discrete solution;
    the total field elsewhere follows from one convolution.
    """
    chi = np.asarray(chi, dtype=complex)
    k = setup.wavenumber
    ei = incident_field(grid, setup)
    support = np.flatnonzero(chi)
    w = np.zeros_like(ei)
    if support.size:
        table = kernel_table(grid, k)
        a_ss = dense_from_table(table, "full", support, support)
        sys_mat = -a_ss * chi[support][None, :]
        sys_mat[np.diag_indices_from(sys_mat)] += 1.0
        try:
            lu = linalg.lu_factor(sys_mat, check_finite=True)
        except linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("singular state equation (resonant contrast?)") from exc
        scale = max(1.0, np.abs(sys_mat).max())
        if np.any(np.abs(np.diag(lu[0])) <= 1e-13 * scale):
            raise np.linalg.LinAlgError("singular state equation (resonant contrast?)")
        et_s = linalg.lu_solve(lu, ei[support])
        w[support] = chi[support, None] * et_s
        total = ei + ConvolutionOperator(table, "full").matvec(w)
        total[support] = et_s
    else:
        total = ei.copy()
    if Ae is None:
        Ae = external_operator(grid, setup)
    scattered = Ae @ w
    return ForwardSolution(grid, setup, chi, ei, total, w, scattered)


def add_noise(data, snr_db, seed=None, rng=None):
    """Add circular complex white Gaussian noise at an exact per-view SNR.

    ``data`` is ``(receivers, views)``.  ``snr_db=inf`` returns a copy.  Noise
    in each column is rescaled so ``10 log10(|E_s|^2 / |noise|^2)`` equals
    ``snr_db`` exactly.  Entries that are NaN (missing) stay NaN.
    """
    data = np.array(data, dtype=complex)
    if np.isinf(snr_db) and snr_db > 0:
        return data
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    rng = np.random.default_rng(seed) if rng is None else rng
    noise = rng.standard_normal(data.shape) + 1j * rng.standard_normal(data.shape)
    valid = ~np.isnan(data)
    noise[~valid] = 0
    cols = data[:, None] if data.ndim == 1 else data
    nz = noise[:, None] if noise.ndim == 1 else noise
    sig = np.sqrt(np.nansum(np.abs(cols) ** 2, axis=0))
    nrm = np.linalg.norm(nz, axis=0)
    scale = np.where(nrm > 0, sig * 10 ** (-snr_db / 20) / np.where(nrm > 0, nrm, 1), 0.0)
    return data + (nz * scale).reshape(data.shape)


def realized_snr(clean, noisy):
    clean = np.atleast_2d(np.asarray(clean).T).T
    noisy = np.atleast_2d(np.asarray(noisy).T).T
    return 10 * np.log10(
        np.linalg.norm(clean, axis=0) ** 2 / np.linalg.norm(noisy - clean, axis=0) ** 2
    )


# -- analytic circular cylinder ------------------------------------------------


def mie_order(k, radius, extra=15):
    return int(np.ceil(k * radius)) + extra


def mie_coefficients(k, radius, eps_r, n_max):
    """Scattering coefficients ``a_n`` (``n = -n_max..n_max``) of a centered TM cylinder.

    The exterior field for an incident ``J_n`` harmonic is ``J_n + a_n H2_n``.
    """
    n = np.arange(-n_max, n_max + 1)
    k1 = k * np.sqrt(complex(eps_r))
    ka = k * radius
    k1a = k1 * radius
    if np.iscomplexobj(k1a) and abs(k1a.imag) > 0:
        raise ValueError("only lossless cylinders are supported")
    k1a = float(np.real(k1a))
    k1 = float(np.real(k1))
    j_in, dj_in = bessel_j(n, k1a), bessel_j_derivative(n, k1a)
    j_out, dj_out = bessel_j(n, ka), bessel_j_derivative(n, ka)
    h, dh = hankel2(n, ka), hankel2_derivative(n, ka)
    num = k1 * dj_in * j_out - k * j_in * dj_out
    den = k * j_in * dh - k1 * dj_in * h
    return n, num / den


def mie_reference(radius, eps_r, setup, n_max=None):
    """Scattered field of a centered homogeneous cylinder at the receivers.

    Line-source illumination is expanded with Graf's theorem; valid for
    receivers and transmitters outside the cylinder.  Returns
    ``(receivers, views)`` in the same normalisation as :func:`solve_forward`.
    """
    k = setup.wavenumber
    if n_max is None:
        n_max = mie_order(k, radius)
    n, a = mie_coefficients(k, radius, eps_r, n_max)
    ht = hankel2(n, k * setup.tx_radius)
    hr = hankel2(n, k * setup.radius)
    phase = np.exp(1j * n[:, None, None] * (setup.rx_angles[None, :, None] - setup.tx_angles[None, None, :]))
    # incident: -(j/4) sum_n J_n(k rho) H_n(k R_t) e^{jn(phi - phi_t)}
    terms = (-0.25j * a * ht * hr)[:, None, None] * phase
    return terms.sum(axis=0)
