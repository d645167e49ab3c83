"""Scenario files.

A scenario is an INI file with the sections below.  Every key is a typed
scalar; unknown sections or keys are rejected.  Lengths ending in ``_wl`` are
in background wavelengths, ``_m`` in meters.

``[scene]``
    ``side_wl`` or ``side_m`` (exactly one), ``grid`` (cells per side),
    ``forward_grid`` (finer grid for synthetic data, default ``2 * grid``),
    and exactly one of ``phantom`` or ``data_file``.

    ``phantom`` is ``kite``, ``austria``, ``circle``, ``two_circles`` or
    ``nested_circles``; ``contrast`` is a complex literal such as ``1-0.6j``.
    Shape keys: ``size_wl`` (kite height), ``radius_wl``, ``separation_wl``,
    ``inner_radius_wl``, ``inner_contrast``.

    ``data_file`` is a Fresnel ASCII file, resolved relative to the scenario
    file.  ``calibrate`` (default true) rescales it to the line-source model.

``[setup]``
    ``frequency`` in Hz (required).  For phantoms: ``n_tx``, ``n_rx``
    (default ``n_tx``) and ``radius_wl``.

``[noise]``
    ``snr_db`` (``inf`` for noiseless, default 30) and ``seed`` (default 0).
    Only valid with a phantom.

``[method]``
    ``name``: ``ba``, ``y0ba``, ``ideal``, ``csi`` or ``y0csi``.
    Linear methods: ``rule`` (``best``, ``discrepancy`` or ``lcurve``),
    ``threshold`` (fixed) or ``threshold_min``, ``threshold_max``,
    ``threshold_count`` (log-spaced sweep).
    CSI methods: ``max_iter``, ``tol``, ``tv``, ``positive``.

``[output]``
    ``directory`` (required, relative to the working directory).
"""

import configparser
import math
import os
from dataclasses import MISSING, dataclass, field, fields

METHODS = ("ba", "y0ba", "ideal", "csi", "y0csi")
LINEAR_METHODS = ("ba", "y0ba", "ideal")
PHANTOMS = ("kite", "austria", "circle", "two_circles", "nested_circles")
RULES = ("best", "discrepancy", "lcurve")


class ScenarioError(ValueError):
    """Invalid scenario text."""


@dataclass
class Scene:
    grid: int
    side_wl: float | None = None
    side_m: float | None = None
    forward_grid: int | None = None
    phantom: str | None = None
    contrast: complex = 0.3
    size_wl: float | None = None
    radius_wl: float | None = None
    separation_wl: float | None = None
    inner_radius_wl: float | None = None
    inner_contrast: complex | None = None
    data_file: str | None = None
    calibrate: bool = True


@dataclass
class Setup:
    frequency: float
    n_tx: int | None = None
    n_rx: int | None = None
    radius_wl: float | None = None


@dataclass
class Noise:
    snr_db: float = 30.0
    seed: int = 0


@dataclass
class Method:
    name: str
    rule: str = "best"
    threshold: float | None = None
    threshold_min: float = 1e-3
    threshold_max: float = 1e-1
    threshold_count: int = 21
    max_iter: int = 2000
    tol: float = 1e-6
    tv: bool = False
    positive: bool = False


@dataclass
class Output:
    directory: str


@dataclass
class Scenario:
    scene: Scene
    setup: Setup
    method: Method
    output: Output
    noise: Noise = field(default_factory=Noise)
    base_dir: str = "."

    @property
    def uses_data_file(self):
        return self.scene.data_file is not None

    @property
    def data_path(self):
        if self.scene.data_file is None:
            return None
        return os.path.normpath(os.path.join(self.base_dir, self.scene.data_file))

    @property
    def thresholds(self):
        import numpy as np

        m = self.method
        if m.threshold is not None:
            return np.array([m.threshold])
        return np.logspace(math.log10(m.threshold_min), math.log10(m.threshold_max),
                           m.threshold_count)


_SECTIONS = {"scene": Scene, "setup": Setup, "noise": Noise, "method": Method, "output": Output}
_REQUIRED = ("scene", "setup", "method", "output")


def _convert(section, key, text, typ):
    text = text.strip()
    base = typ
    if getattr(typ, "__args__", None):  # X | None
        base = next(t for t in typ.__args__ if t is not type(None))
    try:
        if base is bool:
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if base is int:
            return int(text)
        if base is float:
            return float(text)
        if base is complex:
            return complex(text.replace(" ", ""))
        return text
    except ValueError as exc:
        raise ScenarioError(f"[{section}] {key}: {exc}") from None


def _build(section, cls, items):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, text in items:
        if key not in known:
            raise ScenarioError(f"[{section}] unknown key {key!r}")
        kwargs[key] = _convert(section, key, text, known[key].type)
    missing = [
        f.name for f in fields(cls)
        if f.name not in kwargs and f.default is MISSING and f.default_factory is MISSING
    ]
    if missing:
        raise ScenarioError(f"[{section}] missing required key {missing[0]!r}")
    return cls(**kwargs)


def parse_scenario(text, base_dir="."):
    """Parse and validate scenario text; raises :class:`ScenarioError`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(str(exc).splitlines()[0]) from None
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ScenarioError(f"unknown section [{name}]")
    for name in _REQUIRED:
        if not cp.has_section(name):
            raise ScenarioError(f"missing section [{name}]")
    parts = {name: _build(name, _SECTIONS[name], cp.items(name)) for name in cp.sections()}
    sc = Scenario(
        scene=parts["scene"], setup=parts["setup"], method=parts["method"],
        output=parts["output"], noise=parts.get("noise", Noise()), base_dir=base_dir,
    )
    _validate(sc, has_noise=cp.has_section("noise"))
    return sc


def load_scenario(path):
    with open(path) as fh:
        return parse_scenario(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))


def _validate(sc, has_noise):
    s, st, m = sc.scene, sc.setup, sc.method
    if (s.phantom is None) == (s.data_file is None):
        raise ScenarioError("[scene] needs exactly one of 'phantom' or 'data_file'")
    if (s.side_wl is None) == (s.side_m is None):
        raise ScenarioError("[scene] needs exactly one of 'side_wl' or 'side_m'")
    if s.grid < 2:
        raise ScenarioError("[scene] grid must be at least 2")
    if m.name not in METHODS:
        raise ScenarioError(f"[method] name must be one of {', '.join(METHODS)}")
    if not st.frequency > 0:
        raise ScenarioError("[setup] frequency must be positive")

    if s.phantom is not None:
        if s.phantom not in PHANTOMS:
            raise ScenarioError(f"[scene] unknown phantom {s.phantom!r}")
        for key in ("n_tx", "radius_wl"):
            if getattr(st, key) is None:
                raise ScenarioError(f"[setup] missing required key {key!r} for a phantom")
        if st.n_rx is None:
            st.n_rx = st.n_tx
        if s.forward_grid is None:
            s.forward_grid = 2 * s.grid
        needs = {"circle": ("radius_wl",), "two_circles": ("radius_wl", "separation_wl"),
                 "nested_circles": ("radius_wl", "inner_radius_wl")}.get(s.phantom, ())
        for key in needs:
            if getattr(s, key) is None:
                raise ScenarioError(f"[scene] phantom {s.phantom!r} needs {key!r}")
    else:
        if m.name == "ideal":
            raise ScenarioError("method 'ideal' needs the exact total field, so a phantom")
        if m.rule in ("best", "discrepancy"):
            raise ScenarioError(f"threshold rule {m.rule!r} needs a phantom; use 'lcurve'")
        if has_noise:
            raise ScenarioError("[noise] applies to synthetic data only, not to 'data_file'")
        clash = [k for k in ("n_tx", "n_rx", "radius_wl") if getattr(st, k) is not None]
        if clash:
            raise ScenarioError(f"[setup] {clash[0]!r} conflicts with 'data_file' geometry")
        if s.forward_grid is not None:
            raise ScenarioError("[scene] 'forward_grid' conflicts with 'data_file'")

    if m.rule not in RULES:
        raise ScenarioError(f"[method] rule must be one of {', '.join(RULES)}")
    if m.threshold is not None and not 0 < m.threshold <= 1:
        raise ScenarioError("[method] threshold must lie in (0, 1]")
    if not 0 < m.threshold_min <= m.threshold_max <= 1 or m.threshold_count < 1:
        raise ScenarioError("[method] need 0 < threshold_min <= threshold_max <= 1")
    if m.max_iter < 1 or m.tol < 0:
        raise ScenarioError("[method] max_iter must be >= 1 and tol >= 0")
    if m.tv and m.name not in ("csi", "y0csi"):
        raise ScenarioError("[method] 'tv' applies to CSI methods only")
