import numpy as np
import pytest

from aep_decomp.config import Scenario
from aep_decomp.geometry import discretize_dipole, wavelength
from aep_decomp.mom import PortTermination, tune_to_resonance

F10 = 10e9
LAM10 = wavelength(F10)


@pytest.fixture(scope="session")
def lam():
    return LAM10


@pytest.fixture(scope="session")
def z_dipole():
    """Plain 0.47 wavelength z-directed dipole, 11 segments."""
    return discretize_dipole(0.47 * LAM10, 0.001 * LAM10, 11)


@pytest.fixture(scope="session")
def array_element():
    """The array element used by the desk scenarios: tuned short x-directed dipole."""
    return Scenario().element()


@pytest.fixture(scope="session")
def termination():
    return PortTermination()


def tuned_x_dipole(length_wl=0.12, m=11):
    el = discretize_dipole(length_wl * LAM10, 0.001 * LAM10, m).oriented("x")
    return tune_to_resonance(el, F10)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b).max() / np.abs(b).max()


def mirror_map(lattice, element, axis):
    """Image of every (element, segment) under reflection through the array's mid-plane.

    Returns ``(port_image, seg_image, sign)`` where ``port_image[i]`` is the
    0-based element the i-th element maps to, ``seg_image[s]`` the segment,
    and ``sign`` the factor relating an image current to the original
    (reflection of the current direction times reflection of the source).
    """
    j = {"x": 0, "y": 1}[axis]
    pos = lattice.element_positions
    center = 0.5 * (pos[:, j].min() + pos[:, j].max())
    refl = pos.copy()
    refl[:, j] = 2 * center - refl[:, j]
    port_image = np.array([np.argmin(np.linalg.norm(pos - r, axis=1)) for r in refl])
    mid = element.midpoints.copy()
    mid[:, j] = -mid[:, j]
    seg_image = np.array([np.argmin(np.linalg.norm(element.midpoints - p, axis=1)) for p in mid])
    t = element.tangents.copy()
    t[:, j] = -t[:, j]
    seg_sign = np.einsum("ij,ij->i", t, element.tangents[seg_image])
    f = element.feed_index
    return port_image, seg_image, seg_sign * seg_sign[f]


def mirror_currents(values, port_image, seg_image, sign):
    """Apply the reflection to an (element, segment) current array."""
    out = np.empty_like(values)
    out[np.ix_(port_image, seg_image)] = values * sign[None, :]
    return out
