"""Investigation-domain grid, canonical phantoms and antenna rings."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import constants

MU0 = constants.mu_0
EPS0 = constants.epsilon_0


@dataclass(frozen=True)
class Grid:
    """Square domain ``[-L/2, L/2]^2`` split into ``n x n`` pulse cells.

    Cells are numbered row-major: index ``p = iy * n + ix`` with ``x``
    growing along ``ix`` and ``y`` along ``iy``.
    """

    side: float
    n: int

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError(f"side length must be positive, got {self.side}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need at least 2 cells per side, got {self.n}")

    @property
    def delta(self):
        return self.side / self.n

    @property
    def cell_area(self):
        return self.delta**2

    @property
    def cell_radius(self):
        """Radius of the disc with the same area as one cell."""
        return self.delta / np.sqrt(np.pi)

    @property
    def num_cells(self):
        return self.n * self.n

    @property
    def enclosing_radius(self):
        return self.side / np.sqrt(2.0)

    @cached_property
    def axis(self):
        return -self.side / 2 + (np.arange(self.n) + 0.5) * self.delta

    @cached_property
    def centers(self):
        """Cell centers, shape ``(n*n, 2)``."""
        xx, yy = np.meshgrid(self.axis, self.axis, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def to_image(self, values):
        """Reshape a flat cell vector to an ``(n, n)`` image (row = y index)."""
        return np.asarray(values).reshape(self.n, self.n)


def make_grid(side, n):
    return Grid(float(side), int(n))


# -- phantoms ---------------------------------------------------------------

_KITE_T = np.linspace(0.0, 2 * np.pi, 2001)
_KITE_X = np.cos(_KITE_T) + 0.65 * np.cos(2 * _KITE_T) - 0.65
_KITE_Y = 1.5 * np.sin(_KITE_T)


@dataclass(frozen=True)
class Phantom:
    """A piecewise-homogeneous target described by simple geometry.

    ``kind`` is one of ``kite``, ``austria``, ``circle``, ``two_circles`` or
    ``nested_circles``.  ``params`` holds the shape parameters in meters;
    ``contrast`` is a single complex value or, for ``nested_circles``, a pair
    ``(outer, inner)``.
    """

    kind: str
    contrast: complex | tuple = 0.3
    params: dict = field(default_factory=dict)

    KINDS = ("kite", "austria", "circle", "two_circles", "nested_circles")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown phantom kind {self.kind!r}")

    def extent(self, side):
        """Half-width of the axis-aligned box that contains the phantom."""
        return _phantom_extent(self, side)


def kite(contrast=0.3, size=None, center=(0.0, 0.0)):
    """Standard kite curve; ``size`` is the height of its bounding box."""
    return Phantom("kite", contrast, {"size": size, "center": tuple(center)})


def austria(contrast=0.4):
    return Phantom("austria", contrast)


def circle(radius, contrast=0.5, center=(0.0, 0.0)):
    return Phantom("circle", contrast, {"radius": radius, "center": tuple(center)})


def two_circles(radius, separation, contrast=0.5):
    return Phantom("two_circles", contrast, {"radius": radius, "separation": separation})


def nested_circles(outer_radius, inner_radius, contrast=(0.45, 2.0), center=(0.0, 0.0)):
    return Phantom(
        "nested_circles",
        tuple(contrast),
        {"outer_radius": outer_radius, "inner_radius": inner_radius, "center": tuple(center)},
    )


def _kite_scale(side, size):
    # bounding box of the unit curve is 2.65... wide and 3 tall
    height = 0.8 * side if size is None else size
    return height / (_KITE_Y.max() - _KITE_Y.min())


def _kite_polygon(side, params):
    s = _kite_scale(side, params.get("size"))
    cx, cy = params.get("center", (0.0, 0.0))
    # center the bounding box on the requested point
    x0 = 0.5 * (_KITE_X.max() + _KITE_X.min())
    return s * (_KITE_X - x0) + cx, s * _KITE_Y + cy


def _austria_discs(side):
    h = side / 2
    discs = [((-0.3 * h, 0.6 * h), 0.2 * h), ((0.3 * h, 0.6 * h), 0.2 * h)]
    ring = ((0.0, -0.2 * h), 0.6 * h, 0.3 * h)
    return discs, ring


def _phantom_extent(ph, side):
    p = ph.params
    if ph.kind == "kite":
        x, y = _kite_polygon(side, p)
        return max(np.abs(x).max(), np.abs(y).max())
    if ph.kind == "austria":
        return 0.8 * side / 2
    if ph.kind == "circle":
        cx, cy = p.get("center", (0.0, 0.0))
        return max(abs(cx), abs(cy)) + p["radius"]
    if ph.kind == "two_circles":
        return p["separation"] / 2 + p["radius"]
    cx, cy = p.get("center", (0.0, 0.0))
    return max(abs(cx), abs(cy)) + p["outer_radius"]


def _inside_polygon(px, py, x, y):
    # even-odd ray casting, vectorised over query points
    inside = np.zeros(px.shape, dtype=bool)
    xj, yj = np.roll(x, 1), np.roll(y, 1)
    for xa, ya, xb, yb in zip(x, y, xj, yj):
        crosses = (ya > py) != (yb > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xa + (py - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (px < xint)
    return inside


def rasterize(phantom, grid):
    """Sample ``phantom`` at cell centers; returns a flat complex contrast vector."""
    half = grid.side / 2
    if phantom.extent(grid.side) >= half:
        raise ValueError(f"{phantom.kind} phantom does not fit inside the domain")
    px, py = grid.centers[:, 0], grid.centers[:, 1]
    chi = np.zeros(grid.num_cells, dtype=complex)
    p = phantom.params

    def disc(c, r):
        return (px - c[0]) ** 2 + (py - c[1]) ** 2 < r**2

    if phantom.kind == "kite":
        x, y = _kite_polygon(grid.side, p)
        chi[_inside_polygon(px, py, x[:-1], y[:-1])] = phantom.contrast
    elif phantom.kind == "austria":
        discs, (rc, ro, ri) = _austria_discs(grid.side)
        mask = disc(rc, ro) & ~disc(rc, ri)
        for c, r in discs:
            mask |= disc(c, r)
        chi[mask] = phantom.contrast
    elif phantom.kind == "circle":
        chi[disc(p.get("center", (0.0, 0.0)), p["radius"])] = phantom.contrast
    elif phantom.kind == "two_circles":
        d = p["separation"] / 2
        mask = disc((-d, 0.0), p["radius"]) | disc((d, 0.0), p["radius"])
        chi[mask] = phantom.contrast
    else:
        outer, inner = phantom.contrast
        c = p.get("center", (0.0, 0.0))
        chi[disc(c, p["outer_radius"])] = outer
        chi[disc(c, p["inner_radius"])] = inner
    return chi


def phantom_area(phantom, side):
    """Exact area of the phantom support (for convergence checks)."""
    p = phantom.params
    if phantom.kind == "kite":
        x, y = _kite_polygon(side, p)
        return 0.5 * abs(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))
    if phantom.kind == "austria":
        discs, (_, ro, ri) = _austria_discs(side)
        return sum(np.pi * r**2 for _, r in discs) + np.pi * (ro**2 - ri**2)
    if phantom.kind == "circle":
        return np.pi * p["radius"] ** 2
    if phantom.kind == "two_circles":
        return 2 * np.pi * p["radius"] ** 2
    return np.pi * p["outer_radius"] ** 2


# -- measurement configuration ----------------------------------------------


@dataclass(frozen=True)
class MeasurementSetup:
    """Single-frequency multiview-multistatic configuration.

    Receivers sit on a circle of radius ``radius``; transmitters on a circle of
    radius ``tx_radius`` (defaults to the same circle).  Angles are in radians.
    """

    frequency: float
    radius: float
    tx_angles: np.ndarray
    rx_angles: np.ndarray
    eps_b: float = EPS0
    mu_b: float = MU0
    tx_radius: float | None = None

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not self.radius > 0:
            raise ValueError("receiver radius must be positive")
        object.__setattr__(self, "tx_angles", np.asarray(self.tx_angles, dtype=float))
        object.__setattr__(self, "rx_angles", np.asarray(self.rx_angles, dtype=float))
        if self.tx_radius is None:
            object.__setattr__(self, "tx_radius", self.radius)

    @property
    def omega(self):
        return 2 * np.pi * self.frequency

    @property
    def wavenumber(self):
        return self.omega * np.sqrt(self.mu_b * self.eps_b)

    @property
    def wavelength(self):
        return 2 * np.pi / self.wavenumber

    @property
    def n_views(self):
        return self.tx_angles.size

    @property
    def n_receivers(self):
        return self.rx_angles.size

    @property
    def tx_positions(self):
        a = self.tx_angles
        return self.tx_radius * np.column_stack([np.cos(a), np.sin(a)])

    @property
    def rx_positions(self):
        a = self.rx_angles
        return self.radius * np.column_stack([np.cos(a), np.sin(a)])

    @property
    def rx_uniform(self):
        """True when receivers are equispaced over the full circle."""
        m = self.n_receivers
        if m < 1:
            return False
        d = np.sort(np.mod(self.rx_angles - self.rx_angles[0], 2 * np.pi))
        return np.allclose(d, 2 * np.pi * np.arange(m) / m, atol=1e-9)

    def check_outside(self, grid):
        half_diag = grid.side / np.sqrt(2)
        if self.radius <= half_diag or self.tx_radius <= half_diag:
            raise ValueError(
                f"antenna circle (R={min(self.radius, self.tx_radius):.4g} m) "
                f"intersects the domain (half diagonal {half_diag:.4g} m)"
            )


def ring_angles(count, offset=0.0):
    return offset + 2 * np.pi * np.arange(count) / count


def make_setup(frequency, radius, n_tx, n_rx, eps_b=EPS0, mu_b=MU0, side=None):
    """Equiangular transmitter and receiver rings on a common circle.

    If ``side`` is given the circle is checked against the square domain.
    """
    if n_tx < 1 or n_rx < 1:
        raise ValueError("need at least one transmitter and one receiver")
    setup = MeasurementSetup(
        float(frequency), float(radius), ring_angles(n_tx), ring_angles(n_rx), eps_b, mu_b
    )
    if side is not None:
        setup.check_outside(make_grid(side, 2))
    return setup


def wavelength(frequency, eps_r=1.0):
    return constants.c / (frequency * np.sqrt(eps_r))
