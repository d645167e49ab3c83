"""Scenario execution: scene -> data -> inversion -> files on disk."""

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import io as sio
from .config import LINEAR_METHODS, ScenarioError
from .csi import make_problem, csi_iterate
from .forward import add_noise, incident_field, realized_snr, solve_forward
from .linear_inv import TSVD, approximate_field, build_linear, nmse, select_threshold, tsvd_solve
from .operators import ConvolutionOperator, external_operator, kernel_table, norm_sweep
from .reduced_field import e_j0_from_data, reduced_incident
from .scene import (
    austria, circle, kite, make_grid, make_setup, nested_circles, rasterize, two_circles,
    wavelength,
)

log = logging.getLogger(__name__)

_MODEL = {"ba": "born", "y0ba": "y0", "ideal": "ideal", "csi": "h02", "y0csi": "y0"}


@dataclass
class SceneData:
    """Everything an inversion needs, synthetic or measured."""

    grid: object
    setup: object
    scattered: np.ndarray  # (receivers, views), NaN where not measured
    truth: np.ndarray | None = None  # contrast on the inversion grid
    exact_total: np.ndarray | None = None  # total field on the inversion grid
    forward: object = None  # ForwardSolution on the forward grid
    clean: np.ndarray | None = None
    info: dict | None = None


def make_phantom(scene, lam):
    c = scene.contrast
    wl = lambda v: None if v is None else v * lam  # noqa: E731
    if scene.phantom == "kite":
        return kite(c, size=wl(scene.size_wl))
    if scene.phantom == "austria":
        return austria(c)
    if scene.phantom == "circle":
        return circle(wl(scene.radius_wl), c)
    if scene.phantom == "two_circles":
        return two_circles(wl(scene.radius_wl), wl(scene.separation_wl), c)
    inner = c if scene.inner_contrast is None else scene.inner_contrast
    return nested_circles(wl(scene.radius_wl), wl(scene.inner_radius_wl), (c, inner))


def _side(scene, lam):
    return scene.side_m if scene.side_m is not None else scene.side_wl * lam


def synthetic_setup(sc):
    f = sc.setup.frequency
    lam = wavelength(f)
    side = _side(sc.scene, lam)
    setup = make_setup(f, sc.setup.radius_wl * lam, sc.setup.n_tx, sc.setup.n_rx, side=side)
    return setup, side, lam


def build_scene(sc, with_total=False):
    """Generate (phantom) or load (data file) the measurements of a scenario."""
    f = sc.setup.frequency
    lam = wavelength(f)
    if sc.uses_data_file:
        ds = sio.parse_fresnel(sc.data_path)
        setup = ds.setup(f)
        grid = make_grid(_side(sc.scene, lam), sc.scene.grid)
        setup.check_outside(grid)
        info = {"data_file": os.path.basename(sc.data_path),
                "data_shape": list(ds.shape(f)), "limited_aspect": ds.limited_aspect(f)}
        if sc.scene.calibrate:
            es, factor = ds.calibrated_scattered(f)
            info["calibration"] = [factor.real, factor.imag]
        else:
            es = ds.scattered(f)
        return SceneData(grid, setup, es, info=info)

    setup, side, lam = synthetic_setup(sc)
    grid = make_grid(side, sc.scene.grid)
    fgrid = make_grid(side, sc.scene.forward_grid)
    phantom = make_phantom(sc.scene, lam)
    sol = solve_forward(rasterize(phantom, fgrid), fgrid, setup)
    es = add_noise(sol.scattered, sc.noise.snr_db, seed=sc.noise.seed)
    truth = rasterize(phantom, grid)
    total = sol.total_field_at(grid.centers) if with_total else None
    info = {"forward_grid": fgrid.n,
            "snr_db_realized": realized_snr(sol.scattered, es) if np.isfinite(sc.noise.snr_db)
            else None}
    return SceneData(grid, setup, es, truth, total, sol, sol.scattered, info)


def _noise_level(sd, sc):
    if sd.clean is None or not np.isfinite(sc.noise.snr_db):
        return None
    return float(np.linalg.norm(sd.scattered - sd.clean))


def invert(sc, sd):
    """Run the scenario's method; returns ``(result, sweep_rows)``."""
    name = sc.method.name
    model = _MODEL[name]
    if name in LINEAR_METHODS:
        Ae = external_operator(sd.grid, sd.setup)
        E = approximate_field(model, sd.scattered, sd.grid, sd.setup, sd.exact_total)
        svd = TSVD(build_linear(E, Ae, sd.scattered, model))
        ths = sc.thresholds
        rule = sc.method.rule
        noise = _noise_level(sd, sc)
        if rule == "discrepancy" and noise is None:
            raise ScenarioError("the discrepancy rule needs noisy synthetic data")
        th = select_threshold(svd, ths, rule, noise, sd.truth)
        result = tsvd_solve(svd, th, sd.truth)
        sweep = []
        for t in np.sort(ths):
            chi_t = svd.solve(t)
            sweep.append((t, svd.rank(t), svd.residual(t),
                          np.nan if sd.truth is None else nmse(chi_t, sd.truth)))
        result.info.update(model=model, rule=rule)
        return result, sweep
    problem = make_problem(model, sd.scattered, sd.grid, sd.setup)
    m = sc.method
    result = csi_iterate(problem, None, m.max_iter, m.tol, sd.truth, m.tv, m.positive)
    return result, None


# -- output ------------------------------------------------------------------------


def _map_csv(path, grid, columns):
    x, y = grid.centers.T
    names = ["x_m", "y_m"]
    cols = [x, y]
    for label, values in columns:
        names += [f"{label}_re", f"{label}_im"]
        cols += [np.real(values), np.imag(values)]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.10g")


def _json_value(v):
    if isinstance(v, np.ndarray):
        return _json_value(v.tolist())
    if isinstance(v, (np.floating, float)):
        return None if not np.isfinite(v) else float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def write_metrics(path, metrics):
    with open(path, "w") as fh:
        json.dump(_json_value(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_scenario(sc, out_dir=None):
    """Execute a parsed scenario; returns the metrics dictionary.

    Writes into the output directory: ``chi.txt`` (and ``chi_true.txt`` for
    phantoms) in the matrix format, ``contrast_map.csv`` with true and
    recovered contrast per cell, ``metrics.json``, and ``iterations.csv``
    (CSI) or ``threshold_sweep.csv`` (TSVD methods).
    """
    out = out_dir or sc.output.directory
    os.makedirs(out, exist_ok=True)
    sd = build_scene(sc, with_total=sc.method.name == "ideal")
    result, sweep = invert(sc, sd)
    chi = result.chi
    if not np.all(np.isfinite(chi)):
        raise FloatingPointError("reconstruction contains non-finite values")

    g, lam = sd.grid, sd.setup.wavelength
    sio.export_matrix(g.to_image(chi), os.path.join(out, "chi.txt"), g.side, lam)
    cols = [("chi", chi)]
    if sd.truth is not None:
        sio.export_matrix(g.to_image(sd.truth), os.path.join(out, "chi_true.txt"), g.side, lam)
        cols.insert(0, ("chi_true", sd.truth))
    _map_csv(os.path.join(out, "contrast_map.csv"), g, cols)

    if sweep is not None:
        np.savetxt(os.path.join(out, "threshold_sweep.csv"), np.array(sweep, dtype=float),
                   delimiter=",", header="threshold,rank,residual,nmse", comments="",
                   fmt="%.10g")
    else:
        np.savetxt(os.path.join(out, "iterations.csv"),
                   np.array([[np.nan if v is None else v for v in row] for row in result.history],
                            dtype=float),
                   delimiter=",", header="iteration,phi,data_term,state_term,nmse",
                   comments="", fmt="%.12g")

    metrics = {
        "method": sc.method.name,
        "model": _MODEL[sc.method.name],
        "grid": g.n,
        "side_m": g.side,
        "frequency_hz": sd.setup.frequency,
        "wavelength_m": lam,
        "views": sd.setup.n_views,
        "receivers": sd.setup.n_receivers,
        "nmse": result.nmse,
        "threshold": result.threshold,
        "rank": result.rank,
        "residual": result.residual,
        "iterations": result.iterations,
        "chi_max_abs": float(np.max(np.abs(chi))),
    }
    if sd.truth is not None:
        metrics.update(phantom=sc.scene.phantom, snr_db=sc.noise.snr_db, seed=sc.noise.seed)
    metrics.update(sd.info or {})
    write_metrics(os.path.join(out, "metrics.json"), metrics)
    return metrics


def run_forward_only(sc, out_dir=None):
    """Synthetic data only: writes the scattered field and a Fresnel-format file."""
    if sc.uses_data_file:
        raise ScenarioError("forward-only needs a phantom scenario")
    out = out_dir or sc.output.directory
    os.makedirs(out, exist_ok=True)
    sd = build_scene(sc)
    setup = sd.setup
    sio.export_matrix(sd.scattered, os.path.join(out, "scattered.txt"), sd.grid.side,
                      setup.wavelength)
    sol = sd.forward
    inc = _incident_at_receivers(setup)
    sio.write_fresnel(
        os.path.join(out, "data.fresnel"), np.rad2deg(setup.tx_angles),
        np.rad2deg(setup.rx_angles), setup.tx_radius, setup.radius,
        {setup.frequency: (inc + sd.scattered, inc)}, target=sc.scene.phantom,
    )
    metrics = {"phantom": sc.scene.phantom, "support_cells": int(np.count_nonzero(sol.chi)),
               "forward_grid": sol.grid.n, "scattered_norm": float(np.linalg.norm(sd.scattered))}
    metrics.update(sd.info)
    write_metrics(os.path.join(out, "metrics.json"), metrics)
    return metrics


def _incident_at_receivers(setup):
    from .forward import line_source_field

    # a receiver sitting on its transmitter (monostatic pair) has no finite
    # incident field; it is written as not measured
    rx, tx = setup.rx_positions, setup.tx_positions
    d = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)
    same = d <= 1e-9 * setup.radius
    inc = np.full(d.shape, np.nan, dtype=complex)
    for v in range(tx.shape[0]):
        ok = ~same[:, v]
        inc[ok, v] = line_source_field(rx[ok], tx[[v]], setup.wavenumber)[:, 0]
    return inc


def validate_ej0(sc):
    """Health check of the data-derived J0 field on the forward grid.

    Returns ``(identity_error, state_residual)``: the relative error between
    the data-derived and the current-derived J0 field, and the relative
    residual of the Y0 state equation ``chi E^_i + chi A_i^Y0 W - W``.
    """
    if sc.uses_data_file:
        raise ScenarioError("validate-ej0 needs a phantom scenario")
    sd = build_scene(sc)
    sol = sd.forward
    g, setup = sol.grid, sd.setup
    k = setup.wavenumber
    table = kernel_table(g, k)
    W = sol.currents
    ej0 = e_j0_from_data(sd.scattered, g, setup)
    ref = ConvolutionOperator(table, "j0").matvec(W) / (-0.25j * k**2)
    ident = float(np.linalg.norm(ej0 - ref) / np.linalg.norm(ref))
    e_hat = reduced_incident(incident_field(g, setup), ej0, k)
    chi = sol.chi[:, None]
    resid = chi * e_hat + chi * ConvolutionOperator(table, "y0").matvec(W) - W
    state = float(np.linalg.norm(resid) / np.linalg.norm(W))
    return ident, state


def sweep_norms(r_min, r_max, points, cells_per_lambda, out_dir):
    radii = np.linspace(r_min, r_max, points)
    sweep = norm_sweep(radii, cells_per_lambda)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "norm_sweep.csv")
    sweep.to_csv(path)
    return sweep, path
