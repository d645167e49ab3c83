"""Generate synthetic Fresnel-format files for the two experimental targets.

The geometry follows the published set-ups: TwinDiel has 36 sources, 72
receivers, a 0.72 m source radius, a 0.76 m receiver radius and no receivers
within 60 degrees of the source.  FoamDielInt is reduced to a 45 x 36 matrix
on a 1.67 m circle, with receivers never on a source angle.  The data are
simulated with the package's forward solver, scaled by an arbitrary complex
factor and corrupted with 30 dB noise to mimic uncalibrated measurements.

    python scripts/make_fresnel_data.py scenarios/data
"""

import sys
from pathlib import Path

import numpy as np

from scatter2d.forward import add_noise, line_source_field, solve_forward
from scatter2d.io import write_fresnel
from scatter2d.scene import MeasurementSetup, make_grid, nested_circles, rasterize, two_circles

GAIN = 0.8 * np.exp(0.3j)


def simulate(phantom, side, n_fine, freqs, tx_deg, rx_deg, tx_radius, rx_radius, blind_deg, seed):
    fields = {}
    for i, f in enumerate(freqs):
        setup = MeasurementSetup(f, rx_radius, np.deg2rad(tx_deg), np.deg2rad(rx_deg),
                                 tx_radius=tx_radius)
        grid = make_grid(side, n_fine)
        sol = solve_forward(rasterize(phantom, grid), grid, setup)
        es = add_noise(sol.scattered, 30.0, seed=seed + i)
        inc = line_source_field(setup.rx_positions, setup.tx_positions, setup.wavenumber)
        sep = np.abs(np.angle(np.exp(1j * np.deg2rad(rx_deg[:, None] - tx_deg[None, :]))))
        blind = sep < np.deg2rad(blind_deg) - 1e-9
        total, inc = GAIN * (inc + es), GAIN * inc
        total[blind] = np.nan
        inc[blind] = np.nan
        fields[f] = (total, inc)
    return fields


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    tx = np.arange(36) * 10.0
    rx = np.arange(72) * 5.0
    twin = two_circles(0.015, 0.09, 2.0)
    fields = simulate(twin, 0.15, 160, [4e9, 6e9], tx, rx, 0.72, 0.76, 60.0, seed=1)
    write_fresnel(out / "twindiel_synthetic.fresnel", tx, rx, 0.72, 0.76, fields,
                  target="TwinDiel (synthetic)")

    rx = 5.0 + np.arange(45) * 8.0
    foam = nested_circles(0.04, 0.015, (0.45, 2.0))
    fields = simulate(foam, 0.2, 128, [3e9], tx, rx, 1.67, 1.67, 0.0, seed=3)
    write_fresnel(out / "foamdielint_synthetic.fresnel", tx, rx, 1.67, 1.67, fields,
                  target="FoamDielInt (synthetic)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "scenarios/data")
