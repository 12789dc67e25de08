"""Thin-wire method-of-moments solver.

Pulse-basis currents, point matching at segment centers, and charge
smeared over cells centered on segment endpoints (Harrington's
finite-difference treatment of the scalar potential).  The kernel is the
reduced thin-wire kernel ``exp(-jkR)/R`` with ``R`` measured from the
source axis to a point at one wire radius.  Time convention ``exp(+jwt)``.
"""

from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg
from scipy.constants import epsilon_0, mu_0
from scipy.spatial import cKDTree

from .errors import InvalidParameterError, NumericalFailureError, SingularGeometryError, SizeGuardError
from .geometry import ArrayLattice, ElementMesh, place_elements

log = logging.getLogger(__name__)

ORACLE_MAX_UNKNOWNS = 20_000
COND_LIMIT = 1e14
RESIDUAL_TOL = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
# rows of Z are filled in blocks to bound temporary memory
_ROW_BLOCK = 256


@dataclass(frozen=True)
class ImpedanceMatrix:
    """Dense MoM matrix; ``feeds`` holds each element's feed segment in port order."""

    entries: np.ndarray
    frequency: float
    n_elements: int
    m: int
    feeds: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class PortTermination:
    z_load: complex = 50.0 + 0.0j
    v_source: complex = 1.0 + 0.0j

    def __post_init__(self):
        if complex(self.z_load).real < 0:
            raise InvalidParameterError(f"load must be passive, got {self.z_load}")


@dataclass(frozen=True)
class CurrentDistribution:
    """Segment currents (amperes) for one excitation, shape ``(n_elements, m)``."""

    values: np.ndarray
    excited_port: int
    context: str

    @property
    def n_elements(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


def line_kernel(points, centers, tangents, lengths, radius, k):
    """Mean of ``exp(-jkR)/R`` over straight source lines, for every point.

    ``R`` is measured to a point one ``radius`` off the line axis.  Returns
    an array of shape ``(len(points), len(centers))``.  The static ``1/R``
    part is integrated analytically; the smooth remainder by Gauss-Legendre
    on two sub-intervals split at the foot of the perpendicular.
    """
    d = points[:, None, :] - centers[None, :, :]
    s0 = np.einsum("pcj,cj->pc", d, tangents)
    b2 = np.maximum(np.einsum("pcj,pcj->pc", d, d) - s0**2, 0.0) + radius**2
    b = np.sqrt(b2)
    h = 0.5 * lengths[None, :]
    static = np.arcsinh((h - s0) / b) + np.arcsinh((h + s0) / b)

    split = np.clip(s0, -h, h)
    smooth = np.zeros(s0.shape, dtype=complex)
    for lo, hi in ((-h, split), (split, h)):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        for x, w in zip(_GL_NODES, _GL_WEIGHTS):
            r = np.sqrt((s0 - (mid + half * x)) ** 2 + b2)
            smooth += w * half * np.expm1(-1j * k * r) / r
    return (static + smooth) / (2.0 * h)


def _charge_cells(centers, tangents, lengths, element_ids):
    """Unique endpoint cells and the signed segment-to-cell incidence matrix."""
    ends = np.concatenate([centers - 0.5 * lengths[:, None] * tangents,
                           centers + 0.5 * lengths[:, None] * tangents])
    scale = max(float(lengths.min()), 1e-300)
    key = np.column_stack([
        np.repeat(element_ids[None, :], 2, axis=0).ravel(),
        np.round(ends / (1e-6 * scale)),
    ])
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    n_seg = len(lengths)
    incidence = np.zeros((len(first), n_seg))
    seg = np.arange(n_seg)
    incidence[inverse[:n_seg], seg] -= 1.0
    incidence[inverse[n_seg:], seg] += 1.0
    src = np.concatenate([np.arange(n_seg), np.arange(n_seg)])[first]
    return ends[first], tangents[src], lengths[src], incidence


def fill_impedance(meshes: list[ElementMesh], frequency: float) -> ImpedanceMatrix:
    if not meshes:
        raise InvalidParameterError("no elements to fill")
    m = meshes[0].m
    if any(e.m != m for e in meshes):
        raise InvalidParameterError("all elements must share one segment count")
    centers = np.concatenate([e.midpoints for e in meshes])
    tangents = np.concatenate([e.tangents for e in meshes])
    lengths = np.concatenate([e.lengths for e in meshes])
    radius = meshes[0].radius
    element_ids = np.repeat(np.arange(len(meshes)), m)

    close = cKDTree(centers).query_pairs(2.0 * radius)
    if close:
        a, b = sorted(close)[0]
        raise SingularGeometryError(
            f"segments {a} and {b} are closer than one wire diameter"
        )

    omega = 2.0 * np.pi * frequency
    k = omega * np.sqrt(mu_0 * epsilon_0)
    cells, cell_tan, cell_len, inc = _charge_cells(centers, tangents, lengths, element_ids)

    n = len(lengths)
    z = np.empty((n, n), dtype=complex)
    coupling = (tangents @ tangents.T) * np.outer(lengths, lengths)
    for r0 in range(0, n, _ROW_BLOCK):
        r1 = min(n, r0 + _ROW_BLOCK)
        z[r0:r1] = (1j * omega * mu_0 / (4 * np.pi)) * coupling[r0:r1] * line_kernel(
            centers[r0:r1], centers, tangents, lengths, radius, k
        )
    psi = np.empty((len(cells), len(cells)), dtype=complex)
    for r0 in range(0, len(cells), _ROW_BLOCK):
        r1 = min(len(cells), r0 + _ROW_BLOCK)
        psi[r0:r1] = line_kernel(cells[r0:r1], cells, cell_tan, cell_len, radius, k)
    z += (inc.T @ psi @ inc) / (1j * omega * 4 * np.pi * epsilon_0)
    z[np.diag_indices(n)] += np.concatenate([e.loads for e in meshes])

    feeds = np.array([i * m + e.feed_index for i, e in enumerate(meshes)])
    return ImpedanceMatrix(z, float(frequency), len(meshes), m, feeds)


def apply_terminations(z: ImpedanceMatrix, feeds, excited: int, termination: PortTermination):
    """Load every non-excited feed and build the delta-gap excitation.

    ``excited`` is a 1-based port number indexing ``feeds``.
    """
    feeds = np.asarray(feeds, dtype=int)
    if len(set(feeds.tolist())) != len(feeds):
        raise InvalidParameterError("feed segments must be distinct")
    if not 1 <= excited <= len(feeds):
        raise InvalidParameterError(f"unknown port {excited}; have 1..{len(feeds)}")
    loaded = z.entries.copy()
    others = np.delete(feeds, excited - 1)
    loaded[others, others] += termination.z_load
    v = np.zeros(z.size, dtype=complex)
    v[feeds[excited - 1]] = termination.v_source
    return loaded, v


def _check_conditioning(lu_piv, anorm, scenario):
    lu = lu_piv[0]
    rcond, info = scipy.linalg.lapack.zgecon(lu, anorm)
    if info != 0 or not np.isfinite(rcond) or rcond * COND_LIMIT < 1.0:
        raise NumericalFailureError(
            f"{scenario or 'system'}: condition estimate {1 / max(rcond, 1e-300):.3e} "
            f"exceeds {COND_LIMIT:.0e}"
        )


def _factor(a, scenario):
    if not np.all(np.isfinite(a)):
        raise NumericalFailureError(f"{scenario or 'system'}: non-finite matrix entries")
    lu_piv = scipy.linalg.lu_factor(a, check_finite=False)
    if np.any(np.diag(lu_piv[0]) == 0):
        raise NumericalFailureError(f"{scenario or 'system'}: singular matrix")
    _check_conditioning(lu_piv, np.abs(a).sum(axis=0).max(), scenario)
    return lu_piv


def _check_residual(a, x, b, scenario):
    res = np.linalg.norm(a @ x - b, axis=0) / np.linalg.norm(b, axis=0)
    if np.any(res > RESIDUAL_TOL):
        raise NumericalFailureError(
            f"{scenario or 'system'}: relative residual {res.max():.3e} > {RESIDUAL_TOL:.0e}"
        )
    return res


def solve_currents(loaded, v, *, n_elements=1, excited_port=1, context="isolated", scenario=""):
    """Dense LU solve of ``loaded @ I = v``; residual and conditioning checked."""
    loaded = np.asarray(loaded)
    v = np.asarray(v, dtype=complex)
    lu_piv = _factor(loaded, scenario)
    i = scipy.linalg.lu_solve(lu_piv, v, check_finite=False)
    _check_residual(loaded, i[:, None], v[:, None], scenario)
    return CurrentDistribution(i.reshape(n_elements, -1), excited_port, context)


def solve_all_ports(meshes, frequency, termination: PortTermination, *, context, scenario=""):
    """Currents for every port excitation from one fill and one factorization.

    Factoring with every feed loaded gives a single matrix for all ports;
    removing the load from the excited feed is a rank-one change whose
    effect on the solution is the scalar ``1 / (1 - z_load * I_feed)``.
    """
    z = fill_impedance(meshes, frequency)
    return solve_all_ports_from(z, termination, context=context, scenario=scenario)


def solve_all_ports_from(z: ImpedanceMatrix, termination, *, context, scenario=""):
    feeds = z.feeds
    n_ports = len(feeds)
    zl = complex(termination.z_load)
    all_loaded = z.entries.copy()
    all_loaded[feeds, feeds] += zl
    lu_piv = _factor(all_loaded, scenario)
    rhs = np.zeros((z.size, n_ports), dtype=complex)
    rhs[feeds, np.arange(n_ports)] = termination.v_source
    x = scipy.linalg.lu_solve(lu_piv, rhs, check_finite=False)
    x_feed = x[feeds, np.arange(n_ports)]
    denom = 1.0 - zl * x_feed / termination.v_source
    if np.any(denom == 0):
        raise NumericalFailureError(f"{scenario or 'system'}: degenerate port loading")
    x = x / denom

    # residual against each port's own system: all loaded, excited feed unloaded
    resid = all_loaded @ x - rhs
    resid[feeds, np.arange(n_ports)] -= zl * x[feeds, np.arange(n_ports)]
    rel = np.linalg.norm(resid, axis=0) / np.linalg.norm(rhs, axis=0)
    if np.any(rel > RESIDUAL_TOL):
        raise NumericalFailureError(
            f"{scenario or 'system'}: relative residual {rel.max():.3e} > {RESIDUAL_TOL:.0e}"
        )
    n_el, m = z.n_elements, z.m
    return [
        CurrentDistribution(x[:, p].reshape(n_el, m), p + 1, context) for p in range(n_ports)
    ]


def solve_isolated(element: ElementMesh, frequency: float, v_source=1.0 + 0.0j) -> CurrentDistribution:
    z = fill_impedance([element], frequency)
    _, v = apply_terminations(z, z.feeds, 1, PortTermination(v_source=v_source))
    return solve_currents(z.entries, v, context="isolated", scenario="isolated element")


def input_impedance(current: CurrentDistribution, element: ElementMesh, v_source=1.0) -> complex:
    return v_source / current.values[0, element.feed_index]


def tune_to_resonance(element: ElementMesh, frequency: float) -> ElementMesh:
    """Add a series reactance at the feed that cancels the isolated input reactance."""
    x = input_impedance(solve_isolated(element, frequency), element).imag
    loads = element.loads.copy()
    loads[element.feed_index] -= 1j * x
    return element.with_loads(loads)


def solve_1d_array(axis, lattice: ArrayLattice, element: ElementMesh, termination: PortTermination):
    sub = lattice.axis_lattice(axis)
    return solve_all_ports(
        place_elements(element, sub), lattice.frequency, termination,
        context=f"array-1d-{axis}", scenario=f"{sub.nx}x{sub.ny} {axis}-axis array",
    )


def solve_2d_oracle(lattice: ArrayLattice, element: ElementMesh, termination: PortTermination):
    unknowns = lattice.n_ports * element.m
    if unknowns > ORACLE_MAX_UNKNOWNS:
        raise SizeGuardError(
            f"{lattice.nx}x{lattice.ny} array with {element.m} segments per element is "
            f"{unknowns} unknowns; the dense oracle is limited to {ORACLE_MAX_UNKNOWNS}"
        )
    log.info("oracle fill: %d unknowns", unknowns)
    return solve_all_ports(
        place_elements(element, lattice), lattice.frequency, termination,
        context="array-2d", scenario=f"{lattice.nx}x{lattice.ny} oracle",
    )
