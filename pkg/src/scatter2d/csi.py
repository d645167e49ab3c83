"""Contrast source inversion for the classical (H02) and the Y0 state equations.

Both models minimise

    Phi(W, chi) = sum_v |chi E_v + chi A W_v - W_v|^2 / |E_v|^2
                + sum_v |d_v - Ae W_v|^2 / |d_v|^2

with ``(A, E) = (Ai, E_i)`` for ``h02`` and ``(AiY0, E_i - j k^2/4 E_J0)`` for
``y0``.  Each outer iteration takes one Polak-Ribiere conjugate-gradient step
on all contrast sources (exact line search, the functional being quadratic in
``W``) and then minimises over ``chi`` with ``W`` fixed.  Both sub-steps are
exact minimisations, so ``Phi`` never increases.

Gradients are returned as ``2 dPhi/d conj(W)``: the real and imaginary parts
are the partial derivatives with respect to ``Re W`` and ``Im W``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .forward import incident_field
from .linear_inv import InversionResult, nmse
from .operators import ConvolutionOperator, external_operator, kernel_table
from .reduced_field import e_j0_from_data, reduced_incident

log = logging.getLogger(__name__)

MODELS = ("h02", "y0")


class _DenseOp:
    def __init__(self, A):
        self.A = A
        self.shape = A.shape

    def matvec(self, x):
        return self.A @ x

    def rmatvec(self, x):
        return self.A.conj().T @ x


def _as_op(A):
    return A if hasattr(A, "rmatvec") else _DenseOp(np.asarray(A))


@dataclass
class CsiProblem:
    """Everything fixed during the iterations."""

    model: str
    A: object  # internal operator (matvec / rmatvec)
    Ae: np.ndarray
    incident: np.ndarray  # E_i (h02) or reduced incident field (y0), (cells, views)
    data: np.ndarray  # (receivers, views), NaN where not measured
    grid: object = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown CSI model {self.model!r}")
        self.A = _as_op(self.A)
        self.mask = ~np.isnan(self.data)
        self.d = np.where(self.mask, self.data, 0.0)
        self.eta_d = _inv_sq_norms(self.d, "data")
        self.eta_s = _inv_sq_norms(self.incident, "incident field")

    @property
    def n_views(self):
        return self.d.shape[1]


def _inv_sq_norms(x, what):
    n2 = np.linalg.norm(x, axis=0) ** 2
    if np.any(n2 == 0):
        raise ValueError(f"zero normaliser: some view has an all-zero {what}")
    return 1.0 / n2


def make_problem(model, scattered, grid, setup, table=None, Ae=None, incident=None):
    """Assemble the operators and known fields of ``h02`` or ``y0`` CSI."""
    k = setup.wavenumber
    table = kernel_table(grid, k) if table is None else table
    Ae = external_operator(grid, setup) if Ae is None else Ae
    ei = incident_field(grid, setup) if incident is None else incident
    if model == "h02":
        return CsiProblem(model, ConvolutionOperator(table, "full"), Ae, ei, scattered, grid)
    if model == "y0":
        e_hat = reduced_incident(ei, e_j0_from_data(scattered, grid, setup), k)
        return CsiProblem(model, ConvolutionOperator(table, "y0"), Ae, e_hat, scattered, grid)
    raise ValueError(f"unknown CSI model {model!r}")


@dataclass
class CsiState:
    W: np.ndarray
    chi: np.ndarray
    iteration: int = 0
    phi: float = np.nan
    data_term: float = np.nan
    state_term: float = np.nan


def _residuals(problem, W, chi, AW=None):
    AW = problem.A.matvec(W) if AW is None else AW
    E = problem.incident + AW
    r = chi[:, None] * E - W
    rho = problem.mask * (problem.d - problem.Ae @ W)
    return E, r, rho


def _terms(problem, r, rho):
    state = float(np.sum(problem.eta_s * np.linalg.norm(r, axis=0) ** 2))
    data = float(np.sum(problem.eta_d * np.linalg.norm(rho, axis=0) ** 2))
    return state, data


def csi_functional(W, chi, problem):
    """Value of the cost functional; returns ``(phi, state_term, data_term)``."""
    _, r, rho = _residuals(problem, W, chi)
    state, data = _terms(problem, r, rho)
    return state + data, state, data


def gradient_w(W, chi, problem, residuals=None):
    """Analytic gradient of the functional with respect to the contrast sources."""
    _, r, rho = _residuals(problem, W, chi) if residuals is None else residuals
    g_state = problem.A.rmatvec(np.conj(chi)[:, None] * r) - r
    g_data = -(problem.Ae.conj().T @ rho)
    return 2 * (problem.eta_s * g_state + problem.eta_d * g_data)


def update_chi(W, E, weights=None, positive=False):
    """Cellwise least-squares contrast for fixed sources and fields.

    Minimises ``sum_v w_v |chi E_v - W_v|^2`` per cell.  Cells where every
    field sample vanishes get ``chi = 0``.  ``positive`` projects onto the
    passive set ``Re chi >= 0, Im chi <= 0``.
    """
    W = np.atleast_2d(np.asarray(W).T).T
    E = np.atleast_2d(np.asarray(E).T).T
    w = np.ones(W.shape[1]) if weights is None else np.asarray(weights)
    num = np.sum(w * W * np.conj(E), axis=1)
    den = np.sum(w * np.abs(E) ** 2, axis=1)
    chi = np.zeros(W.shape[0], dtype=complex)
    ok = den > 0
    chi[ok] = num[ok] / den[ok]
    if (~ok).any():
        log.debug("%d cells without field; contrast set to zero", int((~ok).sum()))
    if positive:
        chi = np.maximum(chi.real, 0) + 1j * np.minimum(chi.imag, 0)
    return chi


def backpropagation_init(data, Ae):
    """``W_v = a_v Ae^H d_v`` with ``a_v`` minimising ``|d_v - a_v Ae Ae^H d_v|``."""
    d = np.nan_to_num(np.asarray(data, dtype=complex))
    bp = Ae.conj().T @ d
    abp = Ae @ bp
    den = np.linalg.norm(abp, axis=0) ** 2
    num = np.sum(np.conj(abp) * d, axis=0)
    alpha = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return alpha * bp


# -- total-variation penalty -----------------------------------------------------


def _diff_ops(n):
    d1 = sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))
    eye = sparse.identity(n)
    # row-major images: x varies fastest
    return sparse.kron(eye, d1).tocsr(), sparse.kron(d1, eye).tocsr()


@dataclass
class TVPenalty:
    """``(k^2/2)(|eta Dh chi|^2 + |eta Dv chi|^2)`` with forward differences.

    ``eta`` is refreshed from the previous iterate as
    ``1 / sqrt(|grad chi|^2 + delta^2)``, ``delta^2`` being the mean squared
    gradient magnitude.  ``k`` defaults to ``1 / N_c``.
    """

    n: int
    k: float | None = None
    eta: np.ndarray | None = None
    _ops: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.k is None:
            self.k = 1.0 / (self.n * self.n)
        if self.eta is None:
            self.eta = np.ones(self.n * self.n)
        self._ops = _diff_ops(self.n)

    def _weights(self):
        dh, dv = self._ops
        # each difference takes the weight of the cell it starts from
        eta = self.eta
        wh = (sparse.kron(sparse.identity(self.n), _drop_last(self.n)) @ eta)
        wv = (sparse.kron(_drop_last(self.n), sparse.identity(self.n)) @ eta)
        return wh, wv

    def value_and_gradient(self, chi):
        dh, dv = self._ops
        wh, wv = self._weights()
        gh, gv = dh @ chi, dv @ chi
        c = 0.5 * self.k**2
        value = c * (np.sum(np.abs(wh * gh) ** 2) + np.sum(np.abs(wv * gv) ** 2))
        grad = self.k**2 * (dh.T @ (wh**2 * gh) + dv.T @ (wv**2 * gv))
        return float(value), grad

    def hessian(self):
        """Sparse ``H`` with penalty ``= (1/2) chi^H H chi``."""
        dh, dv = self._ops
        wh, wv = self._weights()
        return self.k**2 * (dh.T @ sparse.diags(wh**2) @ dh + dv.T @ sparse.diags(wv**2) @ dv)

    def refresh(self, chi_prev):
        img = np.asarray(chi_prev).reshape(self.n, self.n)
        gx = np.diff(img, axis=1, append=img[:, -1:])
        gy = np.diff(img, axis=0, append=img[-1:, :])
        mag2 = (np.abs(gx) ** 2 + np.abs(gy) ** 2).ravel()
        delta2 = max(mag2.mean(), 1e-12)
        self.eta = 1.0 / np.sqrt(mag2 + delta2)


def _drop_last(n):
    return sparse.eye(n - 1, n)


def tv_penalty(chi, eta, n, k=None):
    """Value and gradient (``2 d/d conj(chi)``) of the TV penalty on an ``n x n`` grid."""
    return TVPenalty(n, k, np.asarray(eta, dtype=float)).value_and_gradient(np.asarray(chi))


def _update_chi_tv(W, E, weights, tv, positive):
    S = np.sum(weights * np.abs(E) ** 2, axis=1)
    b = np.sum(weights * W * np.conj(E), axis=1)
    M = sparse.diags(S) + 0.5 * tv.hessian()
    # cells with no field and no penalty coupling would make M singular
    M = M + sparse.diags(np.where(S > 0, 0.0, 1.0))
    chi = spsolve(M.tocsc(), b)
    if positive:
        chi = np.maximum(chi.real, 0) + 1j * np.minimum(chi.imag, 0)
    return chi


# -- driver ------------------------------------------------------------------------


def initial_state(problem, positive=False):
    W = backpropagation_init(problem.d, problem.Ae)
    E = problem.incident + problem.A.matvec(W)
    chi = update_chi(W, E, problem.eta_s, positive)
    phi, s, d = csi_functional(W, chi, problem)
    return CsiState(W, chi, 0, phi, d, s)


def csi_iterate(problem, state=None, max_iter=2000, tol=1e-6, truth=None, tv=False,
                positive=False, callback=None):
    """Run CSI from ``state`` (back-propagation start when omitted).

    Stops when the relative change of the functional falls below ``tol`` or
    after ``max_iter`` iterations.  ``tv`` adds the total-variation penalty to
    the contrast update (experimental data).  ``history`` holds one row per
    iteration: ``(iteration, phi, data_term, state_term, nmse)``.
    """
    state = initial_state(problem, positive) if state is None else state
    W, chi = state.W.copy(), state.chi.copy()
    penalty = TVPenalty(problem.grid.n) if tv else None
    eta_s, eta_d = problem.eta_s, problem.eta_d

    AW = problem.A.matvec(W)
    E, r, rho = _residuals(problem, W, chi, AW)
    s_term, d_term = _terms(problem, r, rho)
    phi = s_term + d_term
    history = [(state.iteration, phi, d_term, s_term, _maybe_nmse(chi, truth))]
    g_prev = d_prev = None
    it = state.iteration
    for it in range(state.iteration + 1, state.iteration + max_iter + 1):
        g = gradient_w(W, chi, problem, (E, r, rho))
        if g_prev is None:
            d = -g
        else:
            beta = np.real(np.vdot(g, g - g_prev)) / np.real(np.vdot(g_prev, g_prev))
            d = -g + max(beta, 0.0) * d_prev
        Ad = problem.A.matvec(d)
        Ld = chi[:, None] * Ad - d
        Dd = problem.mask * (problem.Ae @ d)
        num = eta_s * np.sum(np.conj(Ld) * r, axis=0) - eta_d * np.sum(np.conj(Dd) * rho, axis=0)
        den = eta_s * np.linalg.norm(Ld, axis=0) ** 2 + eta_d * np.linalg.norm(Dd, axis=0) ** 2
        alpha = -np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        W = W + alpha * d
        AW = AW + alpha * Ad
        rho = rho - alpha * Dd
        E = problem.incident + AW

        if penalty is not None:
            penalty.refresh(chi)
            chi = _update_chi_tv(W, E, eta_s, penalty, positive)
        else:
            chi = update_chi(W, E, eta_s, positive)
        r = chi[:, None] * E - W
        s_term, d_term = _terms(problem, r, rho)
        phi_new = s_term + d_term
        if penalty is not None:
            phi_new += penalty.value_and_gradient(chi)[0]
        if not np.isfinite(phi_new):
            raise FloatingPointError(f"CSI diverged at iteration {it}")
        history.append((it, phi_new, d_term, s_term, _maybe_nmse(chi, truth)))
        if callback is not None:
            callback(it, W, chi, phi_new)
        g_prev, d_prev = g, d
        rel = abs(phi - phi_new) / max(phi, 1e-300)
        phi = phi_new
        if rel < tol:
            break

    result = InversionResult(
        chi=chi,
        nmse=_maybe_nmse(chi, truth),
        residual=phi,
        iterations=it,
        history=history,
        info={"model": problem.model, "W": W},
    )
    log.info("%s-CSI: %d iterations, phi=%.4g, nmse=%s", problem.model, it, phi, result.nmse)
    return result


def _maybe_nmse(chi, truth):
    return None if truth is None else nmse(chi, truth)


def run_csi(model, scattered, grid, setup, max_iter=2000, tol=1e-6, truth=None, tv=False,
            positive=False):
    problem = make_problem(model, scattered, grid, setup)
    return csi_iterate(problem, None, max_iter, tol, truth, tv, positive)
