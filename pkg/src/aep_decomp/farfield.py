"""Far fields of segment currents, array synthesis, steering and PMM.

Far-field phase convention: ``exp(+j k u.r)`` for a source at ``r``, the
counterpart of the ``exp(-jkR)`` kernel used by the solver.  The Green's
function prefactor ``-j omega mu / 4 pi`` is dropped; compare patterns
only after peak normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .geometry import ArrayLattice, ElementMesh


@dataclass(frozen=True)
class AngleGrid:
    """Flat list of observation directions; ``shape`` restores the layout."""

    theta_deg: np.ndarray
    phi_deg: np.ndarray
    shape: tuple

    def __len__(self):
        return self.theta_deg.size

    def directions(self) -> np.ndarray:
        return unit_vectors(self.theta_deg, self.phi_deg)

    def same_as(self, other: "AngleGrid") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.theta_deg, other.theta_deg)
            and np.array_equal(self.phi_deg, other.phi_deg)
        )


def cut_grid(step_deg=0.5, phis_deg=(0.0, 90.0), theta_range=(-90.0, 90.0)) -> AngleGrid:
    """Principal-plane cuts; theta runs through zenith so negative values are allowed."""
    if not step_deg > 0:
        raise InvalidParameterError(f"grid step must be positive, got {step_deg}")
    n = int(round((theta_range[1] - theta_range[0]) / step_deg)) + 1
    theta = np.linspace(theta_range[0], theta_range[1], n)
    phis = np.atleast_1d(np.asarray(phis_deg, dtype=float))
    t, p = np.meshgrid(theta, phis, indexing="ij")
    return AngleGrid(t.T.ravel(), p.T.ravel(), (len(phis), n))


def uv_grid(n=101) -> AngleGrid:
    """``n x n`` grid over direction cosines; points outside the unit circle are dropped."""
    u, v = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n), indexing="ij")
    rho = np.hypot(u, v)
    keep = rho <= 1.0
    theta = np.degrees(np.arcsin(np.clip(rho[keep], 0, 1)))
    phi = np.degrees(np.arctan2(v[keep], u[keep]))
    return AngleGrid(theta, phi, (int(keep.sum()),))


def unit_vectors(theta_deg, phi_deg):
    t, p = np.radians(theta_deg), np.radians(phi_deg)
    return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)


def _theta_phi_hats(grid: AngleGrid):
    t, p = np.radians(grid.theta_deg), np.radians(grid.phi_deg)
    th = np.stack([np.cos(t) * np.cos(p), np.cos(t) * np.sin(p), -np.sin(t)], axis=-1)
    ph = np.stack([-np.sin(p), np.cos(p), np.zeros_like(p)], axis=-1)
    return th, ph


@dataclass(frozen=True)
class FarFieldPattern:
    grid: AngleGrid
    e_theta: np.ndarray
    e_phi: np.ndarray
    frequency: float
    normalization: str = "raw"

    def magnitude(self, component="total") -> np.ndarray:
        if component == "theta":
            return np.abs(self.e_theta)
        if component == "phi":
            return np.abs(self.e_phi)
        return np.sqrt(np.abs(self.e_theta) ** 2 + np.abs(self.e_phi) ** 2)

    def normalized(self) -> "FarFieldPattern":
        peak = self.magnitude().max()
        if peak == 0:
            raise InvalidParameterError("cannot normalize an all-zero pattern")
        return FarFieldPattern(self.grid, self.e_theta / peak, self.e_phi / peak,
                               self.frequency, "peak-normalized")

    def db(self, component="total", floor_db=-300.0) -> np.ndarray:
        """Magnitude in dB, clipped at ``floor_db``.

        Raw patterns are referenced to their own peak of ``component``;
        peak-normalized patterns are taken as already referenced.
        """
        mag = self.magnitude(component)
        ref = mag.max() if self.normalization == "raw" else 1.0
        with np.errstate(divide="ignore"):
            out = 20 * np.log10(mag / ref)
        return np.maximum(out, floor_db)


def _source_points(lattice: ArrayLattice, element: ElementMesh):
    pos = lattice.element_positions[:, None, :] + element.midpoints[None, :, :]
    return pos.reshape(-1, 3)


def _moments(values, element: ElementMesh):
    """Cartesian current moments ``t * I * length`` per segment, shape (..., M_total, 3)."""
    il = values * element.lengths
    return il[..., None] * element.tangents


def radiate_vector(current, lattice: ArrayLattice, element: ElementMesh, grid: AngleGrid):
    """Cartesian far-field vectors, shape ``(len(grid), 3)``."""
    return radiate_many_vector([current], lattice, element, grid)[0]


def radiate_many_vector(currents, lattice, element, grid):
    if len(grid) == 0:
        raise InvalidParameterError("empty angle grid")
    vals = np.stack([np.asarray(getattr(c, "values", c)) for c in currents])
    if vals.shape[1:] != (lattice.n_ports, element.m):
        raise InvalidParameterError(
            f"current shape {vals.shape[1:]} does not match lattice/element "
            f"({lattice.n_ports}, {element.m})"
        )
    k = lattice.wavenumber
    u = grid.directions()
    phase = np.exp(1j * k * (u @ _source_points(lattice, element).T))
    p = _moments(vals, element).reshape(len(vals), -1, 3)
    n_src = p.shape[1]
    e = (phase @ p.transpose(1, 0, 2).reshape(n_src, -1)).reshape(len(u), len(vals), 3)
    e = e.transpose(1, 0, 2)
    # rebuild from the transverse basis; subtracting the radial part loses
    # relative precision where the raw field is nearly radial
    th, ph = _theta_phi_hats(grid)
    et = np.einsum("caj,aj->ca", e, th)
    ep = np.einsum("caj,aj->ca", e, ph)
    return et[..., None] * th[None] + ep[..., None] * ph[None]


def radiate(current, lattice, element, grid) -> FarFieldPattern:
    return radiate_many([current], lattice, element, grid)[0]


def radiate_many(currents, lattice, element, grid) -> list[FarFieldPattern]:
    e = radiate_many_vector(currents, lattice, element, grid)
    th, ph = _theta_phi_hats(grid)
    et = np.einsum("caj,aj->ca", e, th)
    ep = np.einsum("caj,aj->ca", e, ph)
    return [FarFieldPattern(grid, et[i], ep[i], lattice.frequency) for i in range(len(e))]


def synthesize(aeps, w) -> FarFieldPattern:
    w = np.asarray(w, dtype=complex)
    if len(aeps) != len(w):
        raise InvalidParameterError(f"{len(aeps)} patterns but {len(w)} weights")
    grid = aeps[0].grid
    if any(not a.grid.same_as(grid) for a in aeps[1:]):
        raise InvalidParameterError("patterns are sampled on different grids")
    et = np.tensordot(w, np.stack([a.e_theta for a in aeps]), axes=1)
    ep = np.tensordot(w, np.stack([a.e_phi for a in aeps]), axes=1)
    return FarFieldPattern(grid, et, ep, aeps[0].frequency)


def steering_weights(lattice: ArrayLattice, theta0_deg, phi0_deg, taper=None) -> np.ndarray:
    """Progressive phase that points the array factor at (theta0, phi0)."""
    t, p = np.radians(theta0_deg), np.radians(phi0_deg)
    pos = lattice.element_positions
    phase = -lattice.wavenumber * (pos[:, 0] * np.sin(t) * np.cos(p) + pos[:, 1] * np.sin(t) * np.sin(p))
    w = np.exp(1j * phase)
    if taper is not None:
        w = w * np.asarray(taper, dtype=float).ravel()
    return w


def taper_weights(lattice: ArrayLattice, kind="none") -> np.ndarray:
    """Separable real amplitude taper in port order; ``cosine`` never reaches zero."""
    if kind in (None, "none", "uniform"):
        return np.ones(lattice.n_ports)
    if kind == "cosine":
        tu = np.sin(np.pi * np.arange(1, lattice.nx + 1) / (lattice.nx + 1))
        tv = np.sin(np.pi * np.arange(1, lattice.ny + 1) / (lattice.ny + 1))
        return np.outer(tu, tv).ravel()
    raise InvalidParameterError(f"unknown taper {kind!r}")


def array_factor(lattice: ArrayLattice, w, grid: AngleGrid) -> np.ndarray:
    u = grid.directions()
    return np.exp(1j * lattice.wavenumber * (u @ lattice.element_positions.T)) @ np.asarray(w, dtype=complex)


def pmm_isolated(isolated: FarFieldPattern, lattice: ArrayLattice, w) -> FarFieldPattern:
    """Pattern multiplication: isolated element pattern times the array factor."""
    af = array_factor(lattice, w, isolated.grid)
    return FarFieldPattern(isolated.grid, isolated.e_theta * af, isolated.e_phi * af,
                           isolated.frequency)
