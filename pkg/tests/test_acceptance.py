"""Acceptance criteria, each run at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line; the lines are printed as they
are produced (visible with ``-s``) and repeated in the terminal summary.
Reported runtimes are wall-clock seconds and count towards the verdict.
"""

import copy
import functools
import json
import os
import time

import numpy as np
import pytest
from scipy import ndimage

from scatter2d.config import load_scenario
from scatter2d.csi import csi_functional, gradient_w, make_problem
from scatter2d.forward import add_noise, mie_reference, solve_forward
from scatter2d.io import parse_fresnel
from scatter2d.operators import assemble, norm_sweep
from scatter2d.pipeline import build_scene, invert, validate_ej0
from scatter2d.scene import (
    circle, make_grid, make_setup, nested_circles, rasterize, two_circles,
)
from scatter2d.specfun import bessel_j, bessel_y

from .conftest import ACCEPTANCE, DATA, F0, LAM0, SCENARIOS, rel


def _record(n, title, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    line = (f"{'PASS' if ok else 'FAIL'} criterion {n:2d} {title}: {detail} "
            f"[{elapsed:.1f} s, limit {limit:g} s]")
    ACCEPTANCE[n] = line
    print("\n" + line)
    assert ok, line


def _scenario(name):
    return load_scenario(os.path.join(SCENARIOS, name + ".ini"))


def test_criterion_01_decomposition_identity():
    t0 = time.perf_counter()
    ops = assemble(make_grid(LAM0, 30), make_setup(F0, 3 * LAM0, 2, 2))
    err = float(np.max(np.abs(ops.Ai - (ops.AiJ0 + ops.AiY0)) / np.abs(ops.Ai)))
    _record(1, "Ai = AiJ0 + AiY0", err < 1e-12, f"max relative deviation {err:.2e} (< 1e-12)",
            time.perf_counter() - t0, 10)


def test_criterion_02_norm_sweep():
    t0 = time.perf_counter()
    sw = norm_sweep(np.linspace(0.1, 1.5, 10), cells_per_lambda=10)
    below = bool(np.all(sw.norm_aiy0 < sw.norm_ai))
    inc = bool(np.all(np.diff(sw.norm_ai) > 0) and np.all(np.diff(sw.norm_aiy0) > 0))
    detail = (f"|AiY0| < |Ai| everywhere: {below}; both strictly increasing: {inc}; "
              f"at R = 1.5 lambda {sw.norm_aiy0[-1]:.3f} vs {sw.norm_ai[-1]:.3f}")
    _record(2, "norm sweep", below and inc, detail, time.perf_counter() - t0, 300)


def test_criterion_03_mie_validation():
    t0 = time.perf_counter()
    g = make_grid(LAM0, 15)
    s = make_setup(F0, 10 * LAM0, 12, 12)
    es = solve_forward(rasterize(circle(0.25 * LAM0, 0.5), g), g, s).scattered
    err = rel(es, mie_reference(0.25 * LAM0, 1.5, s))
    _record(3, "forward vs Mie", err < 0.01, f"relative RMS error {err:.4f} (< 0.01)",
            time.perf_counter() - t0, 60)


def test_criterion_04_pivotal_identity():
    t0 = time.perf_counter()
    sc = _scenario("kite_chi03_y0ba")
    clean = copy.deepcopy(sc)
    clean.noise.snr_db = np.inf
    e_clean, _ = validate_ej0(clean)
    e_noisy, _ = validate_ej0(sc)
    ok = e_clean < 0.02 and e_noisy < 0.05
    detail = f"noiseless {e_clean:.2e} (< 0.02), 30 dB {e_noisy:.2e} (< 0.05)"
    _record(4, "E_J0 from data = AiJ0 W", ok, detail, time.perf_counter() - t0, 60)


KITE_REFERENCE = {"03": (0.13, 0.17, 0.26), "05": (0.13, 0.22, 0.43),
           "07": (0.13, 0.30, 0.64), "10": (0.13, 0.63, 0.96)}
METHODS = ("ideal", "y0ba", "ba")


def _linear_runs(prefix, seeds):
    """NMSE per method, one forward solve shared by all seeds and methods."""
    sc = {m: _scenario(f"{prefix}_{m}") for m in METHODS}
    sd = build_scene(sc["ideal"], with_total=True)
    out = {m: [] for m in METHODS}
    for seed in seeds:
        sd.scattered = add_noise(sd.clean, sc["ideal"].noise.snr_db, seed=seed)
        for m in METHODS:
            out[m].append(invert(sc[m], sd)[0].nmse)
    return {m: float(np.mean(v)) for m, v in out.items()}


@pytest.mark.slow
def test_criterion_05_kite_linear_benchmark():
    t0 = time.perf_counter()
    ok, parts = True, []
    for chi, ref in KITE_REFERENCE.items():
        got = _linear_runs(f"kite_chi{chi}", range(5))
        vals = [got[m] for m in METHODS]
        order = vals[0] <= vals[1] <= vals[2]
        close = all(abs(v - r) <= 0.10 for v, r in zip(vals, ref))
        ok &= order and close
        parts.append(f"chi=0.{chi[1]}" if chi != "10" else "chi=1.0")
        parts[-1] += " " + "/".join(f"{v:.2f}" for v in vals) + ("" if order and close else " (!)")
    detail = "ideal/Y0-BA/BA over 5 seeds: " + "; ".join(parts) + " (reference +-0.10, ordered)"
    _record(5, "kite linear benchmark", ok, detail, time.perf_counter() - t0, 600)


@pytest.mark.slow
def test_criterion_06_austria_linear():
    t0 = time.perf_counter()
    got = _linear_runs("austria", [_scenario("austria_ideal").noise.seed])
    ideal, y0, ba = (got[m] for m in METHODS)
    ok_y0 = abs(y0 - 0.40) <= 0.15
    ok_ba = abs(ba - 0.89) <= 0.15
    order = ideal < y0 < ba
    detail = (f"ideal {ideal:.2f}, Y0-BA {y0:.2f} (0.40 +-0.15: {ok_y0}), "
              f"BA {ba:.2f} (0.89 +-0.15: {ok_ba}), strict ordering: {order}")
    _record(6, "Austria linear", ok_y0 and ok_ba and order, detail, time.perf_counter() - t0, 600)


def test_criterion_07_csi_gradient():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    g = make_grid(0.7 * LAM0, 5)
    s = make_setup(F0, 2 * LAM0, 3, 7)
    chi_data = 0.5 * rng.uniform(0, 1, g.num_cells) - 0.2j * rng.uniform(0, 1, g.num_cells)
    es = solve_forward(chi_data, g, s).scattered
    errs = {}
    for model in ("h02", "y0"):
        p = make_problem(model, es, g, s)
        W = 1e-2 * (rng.standard_normal(p.incident.shape) + 1j * rng.standard_normal(p.incident.shape))
        chi = rng.standard_normal(g.num_cells) + 1j * rng.standard_normal(g.num_cells)
        grad = gradient_w(W, chi, p)
        fd = np.zeros_like(grad)
        h = 1e-6
        for idx in np.ndindex(W.shape):
            for unit in (1.0, 1j):
                Wp, Wm = W.copy(), W.copy()
                Wp[idx] += unit * h
                Wm[idx] -= unit * h
                d = (csi_functional(Wp, chi, p)[0] - csi_functional(Wm, chi, p)[0]) / (2 * h)
                fd[idx] += d if unit == 1.0 else 1j * d
        errs[model] = rel(fd, grad)
    ok = max(errs.values()) < 1e-6
    detail = f"relative error H02 {errs['h02']:.1e}, Y0 {errs['y0']:.1e} (< 1e-6)"
    _record(7, "CSI gradient", ok, detail, time.perf_counter() - t0, 10)


@functools.lru_cache(maxsize=None)
def _csi_run(name):
    t0 = time.perf_counter()
    sc = _scenario(name)
    sd = build_scene(sc)
    result, _ = invert(sc, sd)
    return result, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_08_csi_monotone():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, label in (("csi_kite_csi", "H02"), ("csi_kite_y0csi", "Y0")):
        res, _ = _csi_run(name)
        phi = np.array([row[1] for row in res.history])
        rises = int(np.sum(np.diff(phi) > 1e-12 * phi[0]))
        ok &= res.iterations == 500 and rises == 0
        parts.append(f"{label} {res.iterations} iterations, {rises} increases, "
                     f"phi {phi[0]:.3g} -> {phi[-1]:.3g}")
    _record(8, "CSI monotonicity", ok, "; ".join(parts), time.perf_counter() - t0, 300)


@pytest.mark.slow
def test_criterion_09_nonlinear_comparison():
    runs = {n: _csi_run(n) for n in ("csi_kite_csi", "csi_kite_y0csi",
                                      "csi_austria_csi", "csi_austria_y0csi")}
    nm = {n: r.nmse for n, (r, _) in runs.items()}
    k_h, k_y = nm["csi_kite_csi"], nm["csi_kite_y0csi"]
    a_h, a_y = nm["csi_austria_csi"], nm["csi_austria_y0csi"]
    checks = {
        "kite Y0 < H02": k_y < k_h,
        "kite Y0 <= 0.35": k_y <= 0.35,
        "Austria Y0 <= 0.30": a_y <= 0.30,
        "Austria H02 >= 0.6": a_h >= 0.6,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"kite Y0 {k_y:.3f} / H02 {k_h:.3f}; Austria Y0 {a_y:.3f} / H02 {a_h:.3f}"
              + (f"; failed: {', '.join(failed)}" if failed else ""))
    # each scenario has its own 30 min budget: report the slowest one
    slowest = max(t for _, t in runs.values())
    _record(9, "nonlinear comparison", not failed, detail, slowest, 1800)


def test_criterion_10_special_functions():
    t0 = time.perf_counter()
    with open(os.path.join(DATA, "bessel_reference.json")) as fh:
        rows = np.array(json.load(fh)["rows"])
    n, x = rows[:, 0].astype(int), rows[:, 1]
    ej = np.max(np.abs(bessel_j(n, x) - rows[:, 2]) / np.abs(rows[:, 2]))
    ey = np.max(np.abs(bessel_y(n, x) - rows[:, 3]) / np.abs(rows[:, 3]))
    nn = np.arange(0, 60)[:, None]
    xx = np.logspace(-3, np.log10(500), 120)[None, :]
    w = bessel_j(nn + 1, xx) * bessel_y(nn, xx) - bessel_j(nn, xx) * bessel_y(nn + 1, xx)
    ew = np.max(np.abs(w * np.pi * xx / 2 - 1))
    ok = max(ej, ey, ew) < 1e-10
    detail = f"table J {ej:.1e}, Y {ey:.1e}; Wronskian {ew:.1e} (< 1e-10)"
    _record(10, "special functions", ok, detail, time.perf_counter() - t0, 10)


# true targets of the bundled synthetic files (see scripts/make_fresnel_data.py)
FRESNEL = {
    "twindiel_y0ba": ("twindiel_synthetic.fresnel", 4e9, (72, 36), two_circles(0.015, 0.09, 2.0)),
    "foamdielint_y0ba": ("foamdielint_synthetic.fresnel", 3e9, (45, 36),
                         nested_circles(0.04, 0.015, (0.45, 2.0))),
}


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::scatter2d.reduced_field.DegradedApertureWarning")
def test_criterion_11_fresnel_ingestion():
    t0 = time.perf_counter()
    ok, parts = True, []
    for name, (fname, f, shape, phantom) in FRESNEL.items():
        ds = parse_fresnel(os.path.join(SCENARIOS, "data", fname))
        sc = _scenario(name)
        sd = build_scene(sc)
        chi = invert(sc, sd)[0].chi
        support = ndimage.binary_dilation(
            sd.grid.to_image(rasterize(phantom, sd.grid) != 0), iterations=2).ravel()
        frac = float(np.sum(np.abs(chi[support]) ** 2) / np.sum(np.abs(chi) ** 2))
        good = ds.shape(f) == shape and np.all(np.isfinite(chi)) and frac > 0.5
        ok &= good
        parts.append(f"{fname.split('_')[0]} {ds.shape(f)} at {f / 1e9:g} GHz, "
                     f"{frac:.0%} of |chi|^2 in support")
    _record(11, "Fresnel ingestion", ok, "; ".join(parts) + " (> 50%)",
            time.perf_counter() - t0, 300)
