"""Array lattices, thin-wire element meshes and the port-index convention.

Ports are numbered 1-based and u-major: ``k = (u - 1) * ny + v``.  With
0-based arrays this is plain C-order flattening of an ``(nx, ny)`` grid,
which is also the ordering produced by ``np.kron(C_u, C_v)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

SPEED_OF_LIGHT = 299792458.0

# cyclic coordinate permutations: proper rotations taking z to each axis
_ROTATE_FROM_Z = {"z": [0, 1, 2], "x": [2, 0, 1], "y": [1, 2, 0]}


def wavelength(frequency: float) -> float:
    return SPEED_OF_LIGHT / frequency


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrayLattice:
    """Rectangular ``nx`` by ``ny`` grid of element positions on z = 0.

    Spacings ``dx`` and ``dy`` are in wavelengths; positions are in meters,
    stored in port order (row ``k - 1`` holds port ``k``).
    """

    nx: int
    ny: int
    dx: float
    dy: float
    frequency: float
    element_positions: np.ndarray = field(repr=False)

    @property
    def wavelength(self) -> float:
        return wavelength(self.frequency)

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def n_ports(self) -> int:
        return self.nx * self.ny

    def port_index(self, u: int, v: int) -> int:
        return port_index(u, v, self.nx, self.ny)

    def port_uv(self, k: int) -> tuple[int, int]:
        return port_uv(k, self.nx, self.ny)

    def axis_lattice(self, axis: str) -> "ArrayLattice":
        """The ``nx x 1`` (axis ``u``) or ``1 x ny`` (axis ``v``) sub-lattice."""
        if axis == "u":
            return build_lattice(self.nx, 1, self.dx, self.dy, self.frequency)
        if axis == "v":
            return build_lattice(1, self.ny, self.dx, self.dy, self.frequency)
        raise InvalidParameterError(f"axis must be 'u' or 'v', got {axis!r}")


def build_lattice(nx: int, ny: int, dx: float, dy: float, frequency: float) -> ArrayLattice:
    for name, value in (("nx", nx), ("ny", ny), ("dx", dx), ("dy", dy), ("frequency", frequency)):
        if not np.isfinite(value) or value <= 0:
            raise InvalidParameterError(f"{name} must be positive, got {value!r}")
    if int(nx) != nx or int(ny) != ny:
        raise InvalidParameterError("nx and ny must be integers")
    nx, ny = int(nx), int(ny)
    lam = wavelength(frequency)
    u, v = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pos = np.zeros((nx * ny, 3))
    pos[:, 0] = u.ravel() * dx * lam
    pos[:, 1] = v.ravel() * dy * lam
    return ArrayLattice(nx, ny, float(dx), float(dy), float(frequency), _frozen(pos))


def port_index(u: int, v: int, nx: int, ny: int) -> int:
    if not (1 <= u <= nx and 1 <= v <= ny):
        raise InvalidParameterError(f"(u, v) = ({u}, {v}) outside 1..{nx} x 1..{ny}")
    return (u - 1) * ny + v


def port_uv(k: int, nx: int, ny: int) -> tuple[int, int]:
    if not 1 <= k <= nx * ny:
        raise InvalidParameterError(f"port {k} outside 1..{nx * ny}")
    u, v = divmod(k - 1, ny)
    return u + 1, v + 1


@dataclass(frozen=True)
class ElementMesh:
    """Straight-segment discretization of one wire element.

    Segment ``i`` is centered at ``midpoints[i]`` and runs along the unit
    vector ``tangents[i]`` for ``lengths[i]`` meters.  ``loads`` are lumped
    series impedances (ohms) carried by each segment; they belong to the
    element, not to the port.
    """

    midpoints: np.ndarray
    tangents: np.ndarray
    lengths: np.ndarray
    radius: float
    feed_index: int
    loads: np.ndarray = None

    def __post_init__(self):
        loads = np.zeros(len(self.lengths), dtype=complex) if self.loads is None else self.loads
        loads = np.array(loads, dtype=complex)
        if loads.shape != (len(self.lengths),):
            raise InvalidParameterError("one load per segment required")
        loads.setflags(write=False)
        object.__setattr__(self, "loads", loads)

    @property
    def m(self) -> int:
        return len(self.lengths)

    def segments(self):
        return [
            (self.midpoints[i], self.tangents[i], float(self.lengths[i]), self.radius)
            for i in range(self.m)
        ]

    def translated(self, offset) -> "ElementMesh":
        return ElementMesh(
            _frozen(self.midpoints + np.asarray(offset, dtype=float)),
            self.tangents,
            self.lengths,
            self.radius,
            self.feed_index,
            self.loads,
        )

    def with_loads(self, loads) -> "ElementMesh":
        return ElementMesh(self.midpoints, self.tangents, self.lengths, self.radius,
                           self.feed_index, loads)

    def oriented(self, axis: str) -> "ElementMesh":
        """Rotate a z-directed mesh about the origin so it lies along ``axis``."""
        if axis not in _ROTATE_FROM_Z:
            raise InvalidParameterError(f"axis must be one of x, y, z; got {axis!r}")
        perm = _ROTATE_FROM_Z[axis]
        return ElementMesh(
            _frozen(self.midpoints[:, perm]),
            _frozen(self.tangents[:, perm]),
            self.lengths,
            self.radius,
            self.feed_index,
            self.loads,
        )


def discretize_dipole(length: float, radius: float, m: int) -> ElementMesh:
    """Center-fed straight dipole along z, split into ``m`` equal segments."""
    if int(m) != m or m < 3 or m % 2 == 0:
        raise InvalidParameterError(f"segment count must be odd and >= 3, got {m}")
    if not length > 0:
        raise InvalidParameterError(f"length must be positive, got {length}")
    m = int(m)
    if not 0 < radius < length / (2 * m):
        raise InvalidParameterError(
            f"radius {radius} violates thin-wire limit length/(2m) = {length / (2 * m)}"
        )
    delta = length / m
    z = -length / 2 + delta * (np.arange(m) + 0.5)
    mid = np.zeros((m, 3))
    mid[:, 2] = z
    tan = np.tile([0.0, 0.0, 1.0], (m, 1))
    return ElementMesh(
        _frozen(mid), _frozen(tan), _frozen(np.full(m, delta)), float(radius), (m - 1) // 2
    )


def place_elements(element: ElementMesh, lattice: ArrayLattice) -> list[ElementMesh]:
    return [element.translated(p) for p in lattice.element_positions]
