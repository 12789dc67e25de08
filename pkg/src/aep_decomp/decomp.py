"""Directional decomposition of 2-D array currents into two 1-D problems.

Per mesh ``m`` the isolated-element current normalizes the 1-D array
currents into an ``n x n`` transfer block ``C[m][i, k]`` (element ``i``,
excited port ``k``).  The 2-D block for mesh ``m`` is the Kronecker product
of the u-axis and v-axis blocks, and the estimated 2-D current is the
isolated current times that block.

The isolated current enters as a diagonal matrix, so normalization is an
elementwise division per mesh.  Coefficients are stored mesh-major with
shape ``(m, n, n)``; the 2-D blocks are never materialized unless asked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormalizationError, InvalidParameterError
from .geometry import ArrayLattice, ElementMesh, port_uv
from .mom import CurrentDistribution, PortTermination, solve_1d_array, solve_isolated

DIVISION_GUARD = 1e-9


@dataclass(frozen=True)
class AxisTransferSet:
    axis: str
    coefficients: np.ndarray  # (m, element, port)

    @property
    def n(self) -> int:
        return self.coefficients.shape[1]

    @property
    def m(self) -> int:
        return self.coefficients.shape[0]

    def block(self, mesh: int) -> np.ndarray:
        return self.coefficients[mesh]


@dataclass(frozen=True)
class TransferMatrix2D:
    """Implicit Kronecker product of a u-axis and a v-axis transfer set."""

    u: AxisTransferSet
    v: AxisTransferSet

    @property
    def nx(self) -> int:
        return self.u.n

    @property
    def ny(self) -> int:
        return self.v.n

    @property
    def m(self) -> int:
        return self.u.m

    def block(self, mesh: int) -> np.ndarray:
        return np.kron(self.u.block(mesh), self.v.block(mesh))

    def entry(self, mesh: int, element: int, port: int) -> complex:
        """Single coefficient; ``element`` and ``port`` are 1-based 2-D indices."""
        ui, vi = port_uv(element, self.nx, self.ny)
        uk, vk = port_uv(port, self.nx, self.ny)
        return self.u.coefficients[mesh, ui - 1, uk - 1] * self.v.coefficients[mesh, vi - 1, vk - 1]

    def materialize(self) -> np.ndarray:
        n = self.nx * self.ny
        c = np.einsum("mac,mbd->mabcd", self.u.coefficients, self.v.coefficients)
        return c.reshape(self.m, n, n)


def build_axis_transfer(j_iso: CurrentDistribution, j_axis, axis="u") -> AxisTransferSet:
    iso = np.asarray(j_iso.values).reshape(-1)
    mag = np.abs(iso)
    peak = mag.max()
    ratio = mag / peak if peak > 0 else np.zeros_like(mag)
    bad = np.flatnonzero(ratio <= DIVISION_GUARD)
    if bad.size:
        raise DegenerateNormalizationError(int(bad[0]), float(ratio[bad[0]]))
    n = len(j_axis)
    for c in j_axis:
        if c.values.shape != (n, iso.size):
            raise InvalidParameterError(
                f"axis current shape {c.values.shape} does not match ({n}, {iso.size})"
            )
    ports = sorted(c.excited_port for c in j_axis)
    if ports != list(range(1, n + 1)):
        raise InvalidParameterError(f"axis currents must cover ports 1..{n}, got {ports}")
    j = np.stack([c.values for c in sorted(j_axis, key=lambda c: c.excited_port)], axis=-1)
    # j is (element, mesh, port) -> (mesh, element, port)
    return AxisTransferSet(axis, np.transpose(j, (1, 0, 2)) / iso[:, None, None])


def kron_expand(cu: AxisTransferSet, cv: AxisTransferSet) -> TransferMatrix2D:
    if cu.m != cv.m:
        raise InvalidParameterError(f"mesh counts differ: u has {cu.m}, v has {cv.m}")
    return TransferMatrix2D(cu, cv)


def estimate_currents_2d(j_iso: CurrentDistribution, c2d: TransferMatrix2D, k: int) -> CurrentDistribution:
    uk, vk = port_uv(k, c2d.nx, c2d.ny)
    cu = c2d.u.coefficients[:, :, uk - 1]  # (m, nx)
    cv = c2d.v.coefficients[:, :, vk - 1]  # (m, ny)
    iso = np.asarray(j_iso.values).reshape(-1)
    block = (cu[:, :, None] * cv[:, None, :]).reshape(c2d.m, -1)
    return CurrentDistribution((iso[:, None] * block).T, k, "array-2d-estimated")


def estimate_all_ports(j_iso: CurrentDistribution, c2d: TransferMatrix2D) -> list[CurrentDistribution]:
    iso = np.asarray(j_iso.values).reshape(-1)
    n = c2d.nx * c2d.ny
    # (port_u, port_v, elem_u, elem_v, mesh)
    est = np.einsum("m,mac,mbd->cdabm", iso, c2d.u.coefficients, c2d.v.coefficients)
    est = est.reshape(n, n, c2d.m)
    return [CurrentDistribution(est[p], p + 1, "array-2d-estimated") for p in range(n)]


@dataclass(frozen=True)
class Decomposition:
    isolated: CurrentDistribution
    u_currents: list
    v_currents: list
    transfer: TransferMatrix2D
    estimates: list


def decompose(lattice: ArrayLattice, element: ElementMesh, termination: PortTermination) -> Decomposition:
    """Isolated solve, two 1-D array solves, transfer sets and all 2-D estimates."""
    iso = solve_isolated(element, lattice.frequency, termination.v_source)
    ju = solve_1d_array("u", lattice, element, termination)
    jv = solve_1d_array("v", lattice, element, termination)
    c2d = kron_expand(build_axis_transfer(iso, ju, "u"), build_axis_transfer(iso, jv, "v"))
    return Decomposition(iso, ju, jv, c2d, estimate_all_ports(iso, c2d))
