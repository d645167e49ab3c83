import warnings

import numpy as np
import pytest
from scipy import linalg, special

from scatter2d.forward import (
    add_noise,
    incident_field,
    line_source_field,
    mie_coefficients,
    mie_order,
    mie_reference,
    realized_snr,
    solve_forward,
)
from scatter2d.operators import dense_from_table, external_operator, kernel_table
from scatter2d.scene import MeasurementSetup, circle, kite, make_grid, make_setup, rasterize

from .conftest import F0, K0, LAM0, rel


def test_incident_matches_hankel(small_grid, small_setup):
    ei = incident_field(small_grid, small_setup)
    p, v = 17, 3
    d = np.linalg.norm(small_grid.centers[p] - small_setup.tx_positions[v])
    h = special.jv(0, K0 * d) - 1j * special.yv(0, K0 * d)
    assert ei[p, v] == pytest.approx(-0.25j * h, rel=1e-13)
    assert ei.shape == (small_grid.num_cells, small_setup.n_views)


def test_incident_cylindrical_spreading():
    src = np.array([[0.0, 0.0]])
    pts = np.array([[50 * LAM0, 0.0], [200 * LAM0, 0.0]])
    e = np.abs(line_source_field(pts, src, K0))[:, 0]
    assert e[0] / e[1] == pytest.approx(2.0, rel=1e-2)


def test_incident_mirror_symmetry():
    g = make_grid(LAM0, 10)
    s = MeasurementSetup(F0, 3 * LAM0, [0.0, np.pi], [0.0])
    ei = incident_field(g, s)
    img0 = g.to_image(ei[:, 0])
    img1 = g.to_image(ei[:, 1])
    assert np.allclose(img0, img1[:, ::-1], rtol=1e-12)


def test_transmitter_inside_domain_rejected():
    g = make_grid(LAM0, 10)
    with pytest.raises(ValueError):
        incident_field(g, make_setup(F0, 0.5 * LAM0, 2, 2))


def test_zero_contrast(small_grid, small_setup):
    sol = solve_forward(np.zeros(small_grid.num_cells), small_grid, small_setup)
    assert np.all(sol.scattered == 0)
    assert np.array_equal(sol.total, sol.incident)


def test_support_solve_matches_full_system(small_grid, small_setup):
    g = small_grid
    chi = rasterize(kite(0.8 - 0.2j), g)
    sol = solve_forward(chi, g, small_setup)
    Ai = dense_from_table(kernel_table(g, K0))
    full = linalg.solve(np.eye(g.num_cells) - Ai * chi[None, :], sol.incident)
    assert rel(sol.total, full) < 1e-11
    assert np.array_equal(sol.currents, chi[:, None] * sol.total)
    assert np.array_equal(sol.scattered, external_operator(g, small_setup) @ sol.currents)


def test_total_field_at_receivers_adds_scattered(small_grid):
    s = MeasurementSetup(F0, 3 * LAM0, [0.0, 2.0], [0.5, 1.5, 4.0])
    sol = solve_forward(rasterize(circle(0.3 * LAM0, 0.5), small_grid), small_grid, s)
    rx = s.rx_positions
    ei = line_source_field(rx, s.tx_positions, K0)
    assert rel(sol.total_field_at(rx) - ei, sol.scattered) < 1e-12


def test_reciprocity():
    g = make_grid(LAM0, 16)
    s = make_setup(F0, 4 * LAM0, 8, 8)
    chi = rasterize(kite(1.0 - 0.3j), g)
    es = solve_forward(chi, g, s).scattered
    # receiver m sits where transmitter m is: swapping them leaves E_s unchanged
    assert np.max(np.abs(es - es.T)) <= 1e-8 * np.max(np.abs(es))


def test_singular_system_reported():
    g = make_grid(LAM0, 8)
    s = make_setup(F0, 3 * LAM0, 2, 2)
    A = dense_from_table(kernel_table(g, K0))
    chi = np.zeros(g.num_cells, dtype=complex)
    chi[20] = 1.0 / A[20, 20]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(np.linalg.LinAlgError, match="singular"):
            solve_forward(chi, g, s)


# -- Mie oracle ---------------------------------------------------------------------


def test_mie_vacuum_cylinder_scatters_nothing():
    s = make_setup(F0, 10 * LAM0, 4, 6)
    scale = np.abs(mie_reference(0.25 * LAM0, 1.5, s)).max()
    assert np.abs(mie_reference(0.25 * LAM0, 1.0, s)).max() < 1e-14 * scale


def test_mie_series_converged():
    s = make_setup(F0, 10 * LAM0, 3, 12)
    a = mie_reference(0.25 * LAM0, 1.5, s)
    n = mie_order(K0, 0.25 * LAM0)
    b = mie_reference(0.25 * LAM0, 1.5, s, n_max=2 * n)
    assert rel(b, a) < 1e-10


@pytest.mark.parametrize("eps_r,ka", [(1.5, 1.57), (3.0, 0.9), (6.0, 4.0)])
def test_mie_coefficients_lossless_energy(eps_r, ka):
    # optical theorem mode by mode: |1 + 2 a_n| = 1, i.e. Re a_n = -|a_n|^2
    n, a = mie_coefficients(1.0, ka, eps_r, 25)
    assert np.max(np.abs(np.abs(1 + 2 * a) - 1)) < 1e-10
    assert np.max(np.abs(a.real + np.abs(a) ** 2)) < 1e-10
    assert np.allclose(a, a[::-1])  # a_{-n} = a_n


def test_mie_rejects_lossy():
    with pytest.raises(ValueError):
        mie_coefficients(1.0, 1.0, 2.0 - 0.5j, 5)


def test_forward_converges_to_mie():
    s = make_setup(F0, 10 * LAM0, 4, 12)
    ref = mie_reference(0.25 * LAM0, 1.5, s)
    errs = []
    for cells in (15, 40):
        g = make_grid(LAM0, cells)
        es = solve_forward(rasterize(circle(0.25 * LAM0, 0.5), g), g, s).scattered
        errs.append(rel(es, ref))
    assert errs[1] < errs[0]
    assert errs[1] < 0.02


# -- noise --------------------------------------------------------------------------


@pytest.fixture
def clean():
    rng = np.random.default_rng(7)
    return rng.standard_normal((20, 5)) + 1j * rng.standard_normal((20, 5))


@pytest.mark.parametrize("snr", [0.0, 20.0, 30.0, 45.5])
def test_noise_exact_snr_per_view(clean, snr):
    noisy = add_noise(clean, snr, seed=3)
    assert np.max(np.abs(realized_snr(clean, noisy) - snr)) < 0.01


def test_noise_deterministic(clean):
    a = add_noise(clean, 30, seed=11)
    b = add_noise(clean, 30, seed=11)
    c = add_noise(clean, 30, seed=12)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_infinite_snr_is_copy(clean):
    out = add_noise(clean, np.inf, seed=0)
    assert np.array_equal(out, clean) and out is not clean


def test_noise_keeps_missing_entries(clean):
    data = clean.copy()
    data[2, 1] = np.nan
    out = add_noise(data, 20, seed=0)
    assert np.isnan(out[2, 1])
    assert np.isfinite(np.delete(out.ravel(), 2 * 5 + 1)).all()


def test_noise_rejects_nan_snr(clean):
    with pytest.raises(ValueError):
        add_noise(clean, np.nan)
    with pytest.raises(ValueError):
        add_noise(clean, -np.inf)
