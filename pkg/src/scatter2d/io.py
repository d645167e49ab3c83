"""File formats: complex grid matrices and Fresnel-style multistatic measurements.

Matrix files
------------
Plain text.  The first line holds ``rows cols side wavelength``; each of the
following ``rows`` lines holds ``cols`` complex values written as
whitespace-separated ``re im`` pairs.  Floats are written with ``repr`` so a
round trip is bit-exact, and ``numpy.loadtxt(path, skiprows=1)`` reads the
body directly.

Fresnel ASCII files
-------------------
Lines starting with ``#`` are comments, except ``# key = value`` lines which
carry geometry metadata (``tx_radius_m``, ``rx_radius_m``, optional
``target``).  Every other non-blank line is one measurement with seven
columns::

    tx_angle_deg  rx_angle_deg  freq_ghz  re_total  im_total  re_incident  im_incident

``nan`` marks a value that was not recorded.  This is the column order of the
Institut Fresnel databases (total and incident fields per transmitter /
receiver / frequency triple) flattened into one table.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class FormatError(ValueError):
    """Malformed input file; message names the file and line."""


# -- matrices ----------------------------------------------------------------------


def _num(x):
    # shortest repr that round-trips; float() drops numpy's scalar wrapper
    return repr(float(x))


def export_matrix(values, path, side=0.0, wavelength=0.0):
    values = np.atleast_2d(np.asarray(values, dtype=complex))
    rows, cols = values.shape
    lines = [f"{rows} {cols} {float(side)!r} {float(wavelength)!r}"]
    for row in values:
        lines.append(" ".join(f"{_num(v.real)} {_num(v.imag)}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class MatrixFile:
    values: np.ndarray
    side: float
    wavelength: float


def import_matrix(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise FormatError(f"{path}:1: expected 'rows cols side wavelength'")
        rows, cols = int(header[0]), int(header[1])
        out = np.empty((rows, cols), dtype=complex)
        for i in range(rows):
            parts = fh.readline().split()
            if len(parts) != 2 * cols:
                raise FormatError(f"{path}:{i + 2}: expected {2 * cols} numbers, got {len(parts)}")
            nums = np.array([float(p) for p in parts])
            out[i] = nums[0::2] + 1j * nums[1::2]
    return MatrixFile(out, float(header[2]), float(header[3]))


# -- Fresnel data --------------------------------------------------------------------


@dataclass
class FresnelDataset:
    """Measurements at one or more frequencies, indexed by angle.

    ``total`` and ``incident`` map a frequency (Hz) to ``(receivers, views)``
    arrays (NaN where not measured) over the sorted unique ``rx_angles`` and
    ``tx_angles`` (radians).
    """

    tx_angles: np.ndarray
    rx_angles: np.ndarray
    tx_radius: float
    rx_radius: float
    total: dict
    incident: dict
    meta: dict = field(default_factory=dict)

    @property
    def frequencies(self):
        return sorted(self.total)

    def _pick(self, frequency):
        for f in self.total:
            if math.isclose(f, frequency, rel_tol=1e-6):
                return f
        raise KeyError(f"frequency {frequency / 1e9:g} GHz not in dataset "
                       f"(have {[f / 1e9 for f in self.frequencies]})")

    def scattered(self, frequency):
        """``total - incident`` where both were measured, NaN elsewhere."""
        f = self._pick(frequency)
        return self.total[f] - self.incident[f]

    def shape(self, frequency):
        return self.scattered(frequency).shape

    def limited_aspect(self, frequency):
        return bool(np.isnan(self.scattered(frequency)).any())

    def setup(self, frequency):
        from .scene import MeasurementSetup

        return MeasurementSetup(
            float(self._pick(frequency)), self.rx_radius, self.tx_angles, self.rx_angles,
            tx_radius=self.tx_radius,
        )

    def calibrated_scattered(self, frequency):
        """Scattered field rescaled to the unit line-source convention.

        A single complex factor per frequency is fitted between measured and
        simulated incident fields at, for each view, the measured receiver
        closest to the transmitter.  Returns ``(scattered, factor)``.
        """
        from .forward import line_source_field

        f = self._pick(frequency)
        setup = self.setup(f)
        inc = self.incident[f]
        sim = line_source_field(setup.rx_positions, setup.tx_positions, setup.wavenumber)
        meas_pts, sim_pts = [], []
        for v, ta in enumerate(self.tx_angles):
            ok = ~np.isnan(inc[:, v])
            if not ok.any():
                continue
            sep = np.abs(np.angle(np.exp(1j * (self.rx_angles - ta))))
            sep[~ok] = np.inf
            m = int(np.argmin(sep))
            meas_pts.append(inc[m, v])
            sim_pts.append(sim[m, v])
        if not meas_pts:
            raise FormatError("no incident-field samples available for calibration")
        meas_pts, sim_pts = np.array(meas_pts), np.array(sim_pts)
        factor = np.vdot(sim_pts, meas_pts) / np.vdot(sim_pts, sim_pts)
        return self.scattered(f) / factor, complex(factor)


def _parse_meta(line, meta):
    body = line.lstrip("#").strip()
    if "=" in body:
        key, val = (s.strip() for s in body.split("=", 1))
        meta[key] = val


def parse_fresnel(path):
    """Read a Fresnel ASCII file (see module docstring)."""
    meta = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                _parse_meta(s, meta)
                continue
            parts = s.split()
            if len(parts) == 5:
                raise FormatError(f"{path}:{lineno}: missing incident-field columns")
            if len(parts) != 7:
                raise FormatError(f"{path}:{lineno}: expected 7 columns, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no measurements")
    for key in ("tx_radius_m", "rx_radius_m"):
        if key not in meta:
            raise FormatError(f"{path}: missing '# {key} = ...' header")
    data = np.array(rows)
    tx = np.unique(np.round(data[:, 0], 9))
    rx = np.unique(np.round(data[:, 1], 9))
    total, incident = {}, {}
    for fghz in np.unique(data[:, 2]):
        sel = data[data[:, 2] == fghz]
        f = float(fghz) * 1e9
        t = np.full((rx.size, tx.size), np.nan, dtype=complex)
        i = np.full_like(t, np.nan)
        iv = np.searchsorted(tx, np.round(sel[:, 0], 9))
        im = np.searchsorted(rx, np.round(sel[:, 1], 9))
        t[im, iv] = sel[:, 3] + 1j * sel[:, 4]
        i[im, iv] = sel[:, 5] + 1j * sel[:, 6]
        total[f], incident[f] = t, i
    return FresnelDataset(
        np.deg2rad(tx), np.deg2rad(rx), float(meta["tx_radius_m"]), float(meta["rx_radius_m"]),
        total, incident, meta,
    )


def write_fresnel(path, tx_deg, rx_deg, tx_radius, rx_radius, fields, target=""):
    """Write measurements in the Fresnel ASCII layout.

    ``fields`` maps frequency (Hz) to ``(total, incident)`` arrays shaped
    ``(receivers, views)``; pairs where both are NaN are omitted.
    """
    lines = [
        "# Fresnel-format multistatic measurements",
        f"# tx_radius_m = {_num(tx_radius)}",
        f"# rx_radius_m = {_num(rx_radius)}",
    ]
    if target:
        lines.append(f"# target = {target}")
    lines.append("# tx_deg rx_deg freq_ghz re_total im_total re_incident im_incident")
    for f in sorted(fields):
        tot, inc = fields[f]
        for v, ta in enumerate(tx_deg):
            for m, ra in enumerate(rx_deg):
                a, b = tot[m, v], inc[m, v]
                if np.isnan(a) and np.isnan(b):
                    continue
                vals = (ta, ra, f / 1e9, a.real, a.imag, b.real, b.imag)
                lines.append(" ".join(_num(x) for x in vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
