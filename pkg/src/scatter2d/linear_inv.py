"""Linearised inversions of the data equation: Born, Y0-Born and the known-field benchmark."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .forward import incident_field
from .operators import external_operator
from .reduced_field import e_j0_from_data, reduced_incident

log = logging.getLogger(__name__)

FIELD_MODELS = ("born", "y0", "ideal")
DEFAULT_THRESHOLDS = np.logspace(-3, -1, 21)


@dataclass
class LinearProblem:
    """``B chi = d`` with rows ordered view-major: row ``v * M + m``."""

    kernel: np.ndarray
    data: np.ndarray
    field_model: str
    n_views: int
    n_receivers: int
    valid: np.ndarray | None = None  # mask of measured rows (limited aspect)

    def __post_init__(self):
        if self.field_model not in FIELD_MODELS:
            raise ValueError(f"unknown field model {self.field_model!r}")
        rows = self.n_views * self.n_receivers if self.valid is None else self.valid.sum()
        if self.kernel.shape[0] != rows:
            raise ValueError("kernel rows must equal the number of measured pairs")


@dataclass
class InversionResult:
    chi: np.ndarray
    nmse: float | None = None
    threshold: float | None = None
    rank: int | None = None
    residual: float = 0.0
    iterations: int = 0
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def build_linear(field_approx, Ae, data, field_model):
    """Stack ``B[(v, m), p] = Ae[m, p] * E_v(p)`` and ``d[(v, m)] = E_s[m, v]``.

    NaN entries of ``data`` mark unmeasured pairs; their rows are dropped.
    """
    E = np.asarray(field_approx)
    es = np.asarray(data)
    if E.ndim != 2 or es.ndim != 2:
        raise ValueError("fields must be (cells, views) and data (receivers, views)")
    if E.shape[0] != Ae.shape[1] or es.shape[0] != Ae.shape[0] or E.shape[1] != es.shape[1]:
        raise ValueError(f"shape mismatch: Ae {Ae.shape}, field {E.shape}, data {es.shape}")
    n_views, n_rx = es.shape[1], es.shape[0]
    B = (Ae[None, :, :] * E.T[:, None, :]).reshape(n_views * n_rx, -1)
    d = es.T.ravel()
    valid = ~np.isnan(d)
    if valid.all():
        return LinearProblem(B, d, field_model, n_views, n_rx)
    return LinearProblem(B[valid], d[valid], field_model, n_views, n_rx, valid)


def nmse(estimate, truth):
    """Normalised mean square error ``|chi - chi~|^2 / |chi|^2``."""
    truth = np.asarray(truth)
    ref = np.linalg.norm(truth) ** 2
    if ref == 0:
        raise ValueError("NMSE undefined for an all-zero reference contrast")
    return float(np.linalg.norm(np.asarray(estimate) - truth) ** 2 / ref)


class TSVD:
    """Cached SVD of a linear problem, solvable at any truncation level."""

    def __init__(self, problem):
        self.problem = problem
        B = problem.kernel
        if not np.any(B):
            raise ValueError("degenerate problem: all-zero kernel")
        self.u, self.s, self.vh = linalg.svd(B, full_matrices=False)
        self.coef = self.u.conj().T @ problem.data

    def rank(self, threshold):
        return int(np.count_nonzero(self.s >= threshold * self.s[0]))

    def solve(self, threshold):
        if not 0 < threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        r = self.rank(threshold)
        return self.vh[:r].conj().T @ (self.coef[:r] / self.s[:r])

    def residual(self, threshold):
        # B x - d = U_r U_r^H d - d for the TSVD solution
        r = self.rank(threshold)
        return float(np.linalg.norm(self.problem.data - self.u[:, :r] @ self.coef[:r]))


def tsvd_solve(problem, threshold, truth=None):
    """Keep singular values ``s_i >= threshold * s_1`` and solve in the least-squares sense."""
    svd = problem if isinstance(problem, TSVD) else TSVD(problem)
    chi = svd.solve(threshold)
    return InversionResult(
        chi=chi,
        nmse=None if truth is None else nmse(chi, truth),
        threshold=float(threshold),
        rank=svd.rank(threshold),
        residual=svd.residual(threshold),
    )


def select_threshold(svd, thresholds=DEFAULT_THRESHOLDS, rule="discrepancy",
                     noise_level=None, truth=None, tau=1.0):
    """Pick a truncation threshold from ``thresholds``.

    ``best``
        smallest NMSE against ``truth`` (benchmark mode, simulated data only).
    ``discrepancy``
        largest threshold whose residual is below ``tau * noise_level``; when
        no threshold reaches that level (model error dominates), falls back to
        ``lcurve``.
    ``lcurve``
        corner of the ``(log residual, log |chi|)`` curve, by maximum curvature.
    """
    ths = np.sort(np.asarray(thresholds, dtype=float))[::-1]
    if rule == "best":
        if truth is None:
            raise ValueError("threshold rule 'best' needs the true contrast")
        errs = [nmse(svd.solve(t), truth) for t in ths]
        return float(ths[int(np.argmin(errs))])
    if rule == "discrepancy":
        if noise_level is None:
            raise ValueError("discrepancy rule needs the noise level")
        for t in ths:
            if svd.residual(t) <= tau * noise_level:
                return float(t)
        log.info("discrepancy level not reached; using the L-curve corner")
        rule = "lcurve"
    if rule == "lcurve":
        res = np.array([svd.residual(t) for t in ths])
        nrm = np.array([np.linalg.norm(svd.solve(t)) for t in ths])
        return float(ths[_lcurve_corner(res, nrm)])
    raise ValueError(f"unknown threshold rule {rule!r}")


def _lcurve_corner(res, nrm):
    x, y = np.log(np.maximum(res, 1e-300)), np.log(np.maximum(nrm, 1e-300))
    if len(x) < 3:
        return 0
    dx, dy = np.gradient(x), np.gradient(y)
    ddx, ddy = np.gradient(dx), np.gradient(dy)
    curv = (dx * ddy - dy * ddx) / np.maximum((dx**2 + dy**2) ** 1.5, 1e-300)
    curv[~np.isfinite(curv)] = -np.inf
    return int(np.argmax(curv))


def approximate_field(model, scattered, grid, setup, exact_total=None, incident=None):
    """Field used to linearise the data equation under ``model``."""
    ei = incident_field(grid, setup) if incident is None else incident
    if model == "born":
        return ei
    if model == "y0":
        return reduced_incident(ei, e_j0_from_data(scattered, grid, setup), setup.wavenumber)
    if model == "ideal":
        if exact_total is None:
            raise ValueError("the ideal benchmark needs the exact total field")
        return exact_total
    raise ValueError(f"unknown field model {model!r}")


def run_linear(model, scattered, grid, setup, thresholds=DEFAULT_THRESHOLDS,
               rule="discrepancy", noise_level=None, truth=None, exact_total=None,
               Ae=None, incident=None):
    """Linearise with ``model`` and invert by TSVD with an automatic threshold."""
    Ae = external_operator(grid, setup) if Ae is None else Ae
    E = approximate_field(model, scattered, grid, setup, exact_total, incident)
    svd = TSVD(build_linear(E, Ae, scattered, model))
    if len(thresholds) == 1:
        th = float(thresholds[0])
    else:
        th = select_threshold(svd, thresholds, rule, noise_level, truth)
    result = tsvd_solve(svd, th, truth)
    result.info.update(model=model, rule=rule)
    log.info("%s: threshold %.3g rank %d nmse %s", model, th, result.rank, result.nmse)
    return result


def run_y0_ba(scattered, grid, setup, threshold=None, **kw):
    """Y0-Born: E_J0 from the data, reduced incident field, TSVD inversion.

    With an explicit ``threshold`` the truncation is fixed; otherwise it is
    selected by ``run_linear``'s rule.
    """
    if threshold is not None:
        kw["thresholds"] = [threshold]
    return run_linear("y0", scattered, grid, setup, **kw)


def run_ba(scattered, grid, setup, threshold=None, **kw):
    if threshold is not None:
        kw["thresholds"] = [threshold]
    return run_linear("born", scattered, grid, setup, **kw)
