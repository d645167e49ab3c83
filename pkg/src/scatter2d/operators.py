"""Discretised radiation operators and their spectral norms.

Pulse basis with point matching.  Each square cell is replaced by the disc of
equal area (radius ``a``), for which the cell integral of the Green's function
has a closed form (circular-cell equivalence):

* off-diagonal, ``rho > a``:  ``-(j pi k a / 2) J1(ka) H0(k rho)``
* self cell:                  ``-(j pi k a / 2) H1(ka) - 1``
* J0 part, any ``rho``:       ``-(j pi k a / 2) J1(ka) J0(k rho)``

The third line is exact for every separation (Graf's addition theorem holds
for the regular kernel everywhere), so ``AiJ0`` has a finite diagonal and
``AiY0 = Ai - AiJ0`` carries the whole singular self-term.
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import linalg

from .scene import Grid, make_grid
from .specfun import bessel_j, hankel2

log = logging.getLogger(__name__)

MAX_DENSE_CELLS = 80 * 80


def greens(r, r_src, k):
    """Background Green's function ``-(j/4) k^2 H0(k |r - r_src|)``."""
    d = np.linalg.norm(np.asarray(r, float) - np.asarray(r_src, float), axis=-1)
    if np.any(d == 0):
        raise ValueError("Green's function is singular at coincident points")
    return -0.25j * k**2 * hankel2(0, k * d)


def cell_weight(k, a):
    """Common factor ``-(j pi k a / 2) J1(ka)`` of the off-diagonal entries."""
    return -0.5j * np.pi * k * a * bessel_j(1, k * a)


def self_term(k, a):
    """Integral of the Green's function over a disc of radius ``a``, observed at its center."""
    return -0.5j * np.pi * k * a * hankel2(1, k * a) - 1.0


def radiation_matrix(obs, src, k, a):
    """Cell-integrated Green's function from source cells to observation points.

    ``obs`` must lie outside every source disc.  Used for ``Ae`` and for
    evaluating fields on points of a different grid.
    """
    d = np.linalg.norm(obs[:, None, :] - src[None, :, :], axis=-1)
    if np.any(d <= a):
        raise ValueError("observation point inside a source cell")
    return cell_weight(k, a) * hankel2(0, k * d)


@dataclass
class KernelTable:
    """Translation-invariant kernel sampled on all ``(2n-1)^2`` cell offsets.

    ``full`` is the ``Ai`` kernel and ``j0`` the ``AiJ0`` kernel; entry
    ``[dy + n - 1, dx + n - 1]`` couples cells whose index offsets are
    ``(dx, dy)``.
    """

    grid: Grid
    k: float
    full: np.ndarray
    j0: np.ndarray

    @property
    def y0(self):
        return self.full - self.j0

    def kernel(self, part):
        return {"full": self.full, "j0": self.j0, "y0": self.y0}[part]


def kernel_table(grid, k):
    n, a = grid.n, grid.cell_radius
    off = np.arange(-(n - 1), n) * grid.delta
    dx, dy = np.meshgrid(off, off, indexing="xy")
    rho = np.hypot(dx, dy)
    w = cell_weight(k, a)
    j0 = w * bessel_j(0, k * rho)
    full = np.empty_like(j0)
    nz = rho > 0
    full[nz] = w * hankel2(0, k * rho[nz])
    full[~nz] = self_term(k, a)
    return KernelTable(grid, k, full, j0)


def dense_from_table(table, part="full", rows=None, cols=None):
    """Expand a kernel table into a dense matrix (optionally a sub-block)."""
    g = table.grid
    n = g.n
    rows = np.arange(g.num_cells) if rows is None else np.asarray(rows)
    cols = np.arange(g.num_cells) if cols is None else np.asarray(cols)
    ix_r, iy_r = rows % n, rows // n
    ix_c, iy_c = cols % n, cols // n
    kern = table.kernel(part)
    return kern[(iy_r[:, None] - iy_c[None, :]) + n - 1, (ix_r[:, None] - ix_c[None, :]) + n - 1]


class ConvolutionOperator:
    """FFT application of a translation-invariant grid operator.

    Works on stacks of vectors shaped ``(num_cells, views)``; the adjoint uses
    the conjugated, point-reflected kernel.
    """

    def __init__(self, table, part="full"):
        self.grid = table.grid
        n = self.grid.n
        self.shape = (self.grid.num_cells, self.grid.num_cells)
        self._size = (2 * n - 1, 2 * n - 1)
        kern = table.kernel(part)
        self._fk = sfft.fft2(kern, s=self._size)
        self._fk_adj = sfft.fft2(np.conj(kern[::-1, ::-1]), s=self._size)

    def _apply(self, fk, x):
        n = self.grid.n
        x = np.asarray(x)
        vec = x.ndim == 1
        img = x.reshape(n, n, -1) if not vec else x.reshape(n, n, 1)
        fx = sfft.fft2(img, s=self._size, axes=(0, 1))
        out = sfft.ifft2(fk[:, :, None] * fx, axes=(0, 1))[n - 1 : 2 * n - 1, n - 1 : 2 * n - 1]
        out = out.reshape(n * n, -1)
        return out[:, 0] if vec else out

    def matvec(self, x):
        return self._apply(self._fk, x)

    def rmatvec(self, x):
        return self._apply(self._fk_adj, x)

    __matmul__ = matvec


@dataclass
class DiscreteOperators:
    """Dense operators on one grid for one measurement setup."""

    grid: Grid
    k: float
    Ae: np.ndarray
    Ai: np.ndarray
    AiJ0: np.ndarray

    @property
    def AiY0(self):
        return self.Ai - self.AiJ0


def external_operator(grid, setup):
    return radiation_matrix(setup.rx_positions, grid.centers, setup.wavenumber, grid.cell_radius)


def assemble(grid, setup, max_cells=MAX_DENSE_CELLS):
    """Assemble ``Ae``, ``Ai`` and ``AiJ0`` as dense matrices."""
    if grid.num_cells > max_cells:
        raise MemoryError(
            f"{grid.num_cells} cells exceeds the dense assembly limit ({max_cells}); "
            "use ConvolutionOperator instead"
        )
    k = setup.wavenumber
    table = kernel_table(grid, k)
    return DiscreteOperators(
        grid, k, external_operator(grid, setup), dense_from_table(table, "full"),
        dense_from_table(table, "j0"),
    )


def operator_norm(A, method="svd", tol=1e-10, max_iter=5000, seed=0):
    """Largest singular value of ``A``.

    ``method="power"`` runs power iteration on ``A^H A``; it accepts any object
    with ``matvec``/``rmatvec`` as well as arrays.
    """
    if method == "svd":
        return float(linalg.svdvals(np.asarray(A))[0]) if np.size(A) else 0.0
    if isinstance(A, np.ndarray):
        fwd, adj, ncol = (lambda v: A @ v), (lambda v: A.conj().T @ v), A.shape[1]
    else:
        fwd, adj, ncol = A.matvec, A.rmatvec, A.shape[1]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(ncol) + 1j * rng.standard_normal(ncol)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(max_iter):
        y = adj(fwd(x))
        lam = np.linalg.norm(y)
        if lam == 0:
            return 0.0
        x = y / lam
        new = np.sqrt(lam)
        if abs(new - sigma) <= tol * new:
            return float(new)
        sigma = new
    log.warning("power iteration did not reach tol=%g in %d steps", tol, max_iter)
    return float(sigma)


@dataclass
class NormSweep:
    radii: np.ndarray
    norm_ai: np.ndarray
    norm_aiy0: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["R_over_lambda", "norm_Ai", "norm_AiY0"])
            for row in zip(self.radii, self.norm_ai, self.norm_aiy0):
                w.writerow([repr(float(v)) for v in row])


def circular_domain_operators(radius_over_lambda, cells_per_lambda):
    """``Ai`` and ``AiY0`` restricted to the cells of a disc of radius ``R``.

    Lengths are in wavelengths (``k = 2 pi``), which is all the operators
    depend on for a lossless background.
    """
    R = float(radius_over_lambda)
    n = max(2, int(np.ceil(2 * R * cells_per_lambda)))
    grid = make_grid(n / cells_per_lambda, n)
    inside = np.flatnonzero(np.hypot(grid.centers[:, 0], grid.centers[:, 1]) < R)
    table = kernel_table(grid, 2 * np.pi)
    ai = dense_from_table(table, "full", inside, inside)
    aij0 = dense_from_table(table, "j0", inside, inside)
    return ai, ai - aij0


def norm_sweep(radii, cells_per_lambda=10):
    """Operator 2-norms of ``Ai`` and ``AiY0`` over circular domains of growing radius."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    n_ai, n_y0 = [], []
    for R in radii:
        ai, aiy0 = circular_domain_operators(R, cells_per_lambda)
        n_ai.append(operator_norm(ai) if ai.size else 0.0)
        n_y0.append(operator_norm(aiy0) if aiy0.size else 0.0)
        log.info("R/lambda=%.3f  |Ai|=%.4f  |AiY0|=%.4f", R, n_ai[-1], n_y0[-1])
    return NormSweep(radii, np.array(n_ai), np.array(n_y0))


def neumann_series_apply(Ai, chi, field, terms):
    """Partial sum ``sum_{p=0..terms} (Ai X)^p field`` with ``X = diag(chi)``."""
    chi = np.asarray(chi)
    x = np.asarray(field, dtype=complex)
    scale = chi if x.ndim == 1 else chi[:, None]
    term = x.copy()
    total = x.copy()
    for _ in range(terms):
        term = Ai @ (scale * term)
        total += term
    return total
