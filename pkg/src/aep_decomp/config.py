"""Scenario files: INI-style ``key = value`` pairs under a ``[scenario]`` section."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidParameterError
from .geometry import build_lattice, discretize_dipole, wavelength
from .mom import PortTermination, tune_to_resonance

MODES = ("oracle", "estimate", "compare", "synthesize", "bench")


@dataclass(frozen=True)
class Scenario:
    nx: int = 5
    ny: int = 5
    dx_wavelengths: float = 0.14
    dy_wavelengths: float = 0.12
    frequency_hz: float = 10e9
    dipole_length_wavelengths: float = 0.12
    wire_radius_wavelengths: float = 0.001
    segments_per_element: int = 11
    load_impedance_ohms: tuple = (50.0, 0.0)
    element_axis: str = "x"
    tune_to_resonance: bool = True
    grid_step_deg: float = 0.5
    cut_phis_deg: tuple = (0.0, 90.0)
    uv_points: int = 101
    steer_thetas_deg: tuple = (0.0, 15.0, 25.0)
    steer_phi_deg: float = 0.0
    taper: str = "none"
    bench_sizes: tuple = ((3, 3), (5, 4), (7, 5), (9, 7))
    bench_repeats: int = 3
    mode: str = "compare"
    output_dir: str = "out"

    def lattice(self):
        return build_lattice(self.nx, self.ny, self.dx_wavelengths, self.dy_wavelengths,
                             self.frequency_hz)

    def element(self):
        lam = wavelength(self.frequency_hz)
        el = discretize_dipole(self.dipole_length_wavelengths * lam,
                               self.wire_radius_wavelengths * lam,
                               self.segments_per_element).oriented(self.element_axis)
        return tune_to_resonance(el, self.frequency_hz) if self.tune_to_resonance else el

    def termination(self):
        re, im = self.load_impedance_ohms
        return PortTermination(complex(re, im))

    def to_dict(self):
        return asdict(self)


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _sizes(text):
    out = []
    for tok in text.replace(",", " ").split():
        a, _, b = tok.lower().partition("x")
        out.append((int(a), int(b)))
    return tuple(out)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _steer_list(text):
    """Either an explicit list or ``start:stop:step`` (inclusive)."""
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return tuple(float(x) for x in np.round(start + step * np.arange(n), 10))
    return _floats(text)


_PARSERS = {
    "nx": int, "ny": int,
    "dx_wavelengths": float, "dy_wavelengths": float, "frequency_hz": float,
    "dipole_length_wavelengths": float, "wire_radius_wavelengths": float,
    "segments_per_element": int,
    "load_impedance_ohms": _floats,
    "element_axis": str.strip,
    "tune_to_resonance": _bool,
    "grid_step_deg": float,
    "cut_phis_deg": _floats,
    "uv_points": int,
    "steer_thetas_deg": _steer_list,
    "steer_phi_deg": float,
    "taper": str.strip,
    "bench_sizes": _sizes,
    "bench_repeats": int,
    "mode": str.strip,
    "output_dir": str.strip,
}


def parse_scenario(text: str, **overrides) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if "scenario" not in cp:
        raise ConfigError("config needs a [scenario] section")
    values = {}
    errors = []
    for key, raw in cp["scenario"].items():
        if key not in _PARSERS:
            errors.append(f"{key}: unknown field")
            continue
        try:
            values[key] = _PARSERS[key](raw)
        except (ValueError, TypeError) as exc:
            errors.append(f"{key}: {exc}")
    if errors:
        raise ConfigError("; ".join(errors))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return validate(Scenario(**values))


def load_scenario(path, **overrides) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_scenario(text, **overrides)


def validate(s: Scenario) -> Scenario:
    errors = []

    def need(cond, msg):
        if not cond:
            errors.append(msg)

    need(s.nx >= 1, "nx: must be >= 1")
    need(s.ny >= 1, "ny: must be >= 1")
    need(s.dx_wavelengths > 0, "dx_wavelengths: must be positive")
    need(s.dy_wavelengths > 0, "dy_wavelengths: must be positive")
    need(s.frequency_hz > 0, "frequency_hz: must be positive")
    need(len(s.load_impedance_ohms) == 2, "load_impedance_ohms: expected 'real, imag'")
    if len(s.load_impedance_ohms) == 2:
        need(s.load_impedance_ohms[0] >= 0, "load_impedance_ohms: real part must be >= 0")
    need(s.element_axis in ("x", "y", "z"), "element_axis: must be x, y or z")
    need(s.grid_step_deg > 0, "grid_step_deg: must be positive")
    need(len(s.cut_phis_deg) >= 1, "cut_phis_deg: need at least one cut")
    need(s.uv_points >= 3, "uv_points: must be >= 3")
    need(len(s.steer_thetas_deg) >= 1, "steer_thetas_deg: need at least one angle")
    need(all(-90 <= t <= 90 for t in s.steer_thetas_deg), "steer_thetas_deg: must lie in [-90, 90]")
    need(s.taper in ("none", "uniform", "cosine"), "taper: must be none, uniform or cosine")
    need(all(a >= 1 and b >= 1 for a, b in s.bench_sizes), "bench_sizes: entries must be NxM with N, M >= 1")
    need(s.bench_repeats >= 1, "bench_repeats: must be >= 1")
    need(s.mode in MODES, f"mode: must be one of {', '.join(MODES)}")
    if not errors:
        try:
            s.element()
        except InvalidParameterError as exc:
            errors.append(f"element: {exc}")
        lam_frac = s.dipole_length_wavelengths
        if s.element_axis == "x":
            need(lam_frac < s.dx_wavelengths, "dipole_length_wavelengths: x-directed dipoles overlap neighbours")
        if s.element_axis == "y":
            need(lam_frac < s.dy_wavelengths, "dipole_length_wavelengths: y-directed dipoles overlap neighbours")
    if errors:
        raise ConfigError("; ".join(errors))
    return s


def with_overrides(s: Scenario, **kw) -> Scenario:
    return validate(replace(s, **{k: v for k, v in kw.items() if v is not None}))
