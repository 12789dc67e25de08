"""Estimator quality and cost: current spectra, pattern errors, scaling."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import time

import numpy as np

from .decomp import build_axis_transfer, estimate_all_ports, kron_expand
from .errors import DegenerateRegionError, InvalidParameterError, SizeGuardError
from .farfield import FarFieldPattern
from .geometry import build_lattice, place_elements
from .mom import (
    ORACLE_MAX_UNKNOWNS,
    PortTermination,
    fill_impedance,
    solve_all_ports_from,
)

log = logging.getLogger(__name__)

FALLBACK_HALF_WIDTH_DEG = 10.0
# dynamic range used when comparing AEPs in dB
COMPARE_FLOOR_DB = -80.0
PHASE_FLOOR_DB = -20.0


@dataclass(frozen=True)
class CurrentSpectrum:
    grid_db: np.ndarray  # (nx, ny)


def current_spectrum(currents, nx: int, ny: int) -> CurrentSpectrum:
    """Per-element mean segment current magnitude, averaged over all excitations.

    The result is in dB with the grid maximum at 0 dB.
    """
    vals = np.stack([np.asarray(c.values) for c in currents])
    if vals.shape[0] != nx * ny or vals.shape[1] != nx * ny:
        raise InvalidParameterError(
            f"need {nx * ny} port excitations over {nx * ny} elements, got {vals.shape[:2]}"
        )
    mean_mag = np.abs(vals).mean(axis=2).mean(axis=0)
    db = 20 * np.log10(mean_mag / mean_mag.max())
    return CurrentSpectrum(db.reshape(nx, ny))


@dataclass(frozen=True)
class MseReport:
    theta0_deg: float
    phi0_deg: float
    method: str
    mse_db: float
    region_theta_deg: tuple
    fallback: bool


def _cut(pattern: FarFieldPattern, phi0_deg: float):
    """Indices of the cut containing azimuth ``phi0`` and the signed theta of each sample."""
    g = pattern.grid
    phi = np.mod(g.phi_deg, 360.0)
    p0 = np.mod(phi0_deg, 360.0)
    same = np.isclose(phi, p0)
    opposite = np.isclose(phi, np.mod(p0 + 180.0, 360.0))
    idx = np.flatnonzero(same | opposite)
    if idx.size == 0:
        raise DegenerateRegionError(f"pattern has no samples in the phi = {phi0_deg} cut")
    theta = np.where(same[idx], g.theta_deg[idx], -g.theta_deg[idx])
    order = np.argsort(theta, kind="stable")
    theta, idx = theta[order], idx[order]
    keep = np.concatenate([[True], np.diff(theta) > 1e-9])
    return idx[keep], theta[keep]


def main_lobe_region(reference: FarFieldPattern, theta0_deg, phi0_deg, component="theta"):
    """Grid indices of the main lobe around the steering direction.

    Starting from the sample nearest ``theta0``, climb to the local peak and
    walk down both sides to the first nulls (local minima).  When either
    side runs off the cut without a null the fixed window
    ``theta0 +- 10 deg`` is used instead.
    """
    idx, theta = _cut(reference, phi0_deg)
    mag = reference.magnitude(component)[idx]
    i = int(np.argmin(np.abs(theta - theta0_deg)))
    while True:
        nbrs = [j for j in (i - 1, i + 1) if 0 <= j < len(mag) and mag[j] > mag[i]]
        if not nbrs:
            break
        i = max(nbrs, key=lambda j: mag[j])
    lo = i
    while lo > 0 and mag[lo - 1] < mag[lo]:
        lo -= 1
    hi = i
    while hi < len(mag) - 1 and mag[hi + 1] < mag[hi]:
        hi += 1
    if lo == 0 or hi == len(mag) - 1:
        sel = np.abs(theta - theta0_deg) <= FALLBACK_HALF_WIDTH_DEG + 1e-9
        fallback = True
    else:
        sel = np.zeros(len(mag), dtype=bool)
        sel[lo + 1:hi] = True
        fallback = False
    if not sel.any():
        raise DegenerateRegionError(f"empty main-lobe region at theta0 = {theta0_deg}")
    return idx[sel], theta[sel], fallback


def mse_db(reference: FarFieldPattern, test: FarFieldPattern, region, component="theta") -> float:
    if not reference.grid.same_as(test.grid):
        raise InvalidParameterError("patterns are sampled on different grids")
    region = np.asarray(region)
    if region.size == 0:
        raise DegenerateRegionError("empty region")
    d = reference.db(component)[region] - test.db(component)[region]
    return float(np.mean(d**2))


def main_lobe_mse(reference, test, theta0_deg, phi0_deg, method="proposed", component="theta") -> MseReport:
    """Mean squared dB error over the reference main lobe; both patterns peak-normalized."""
    for p in (reference, test):
        if p.normalization != "peak-normalized":
            raise InvalidParameterError("main-lobe MSE needs peak-normalized patterns")
    region, thetas, fallback = main_lobe_region(reference, theta0_deg, phi0_deg, component)
    return MseReport(
        float(theta0_deg), float(phi0_deg), method,
        mse_db(reference, test, region, component),
        (float(thetas.min()), float(thetas.max())), fallback,
    )


def aep_errors(oracle: FarFieldPattern, estimate: FarFieldPattern):
    """Max magnitude error (dB) and max phase error (degrees) between two AEPs.

    Magnitudes are compared on the total field, each referenced to its own
    peak and clipped at ``COMPARE_FLOOR_DB``.  Phase is compared on the
    oracle's dominant component wherever the oracle is within
    ``PHASE_FLOOR_DB`` of its peak.
    """
    mag_err = np.abs(oracle.db(floor_db=COMPARE_FLOOR_DB) - estimate.db(floor_db=COMPARE_FLOOR_DB)).max()
    use_theta = np.abs(oracle.e_theta) >= np.abs(oracle.e_phi)
    po = np.where(use_theta, oracle.e_theta, oracle.e_phi)
    pe = np.where(use_theta, estimate.e_theta, estimate.e_phi)
    strong = oracle.db() >= PHASE_FLOOR_DB
    # phases referenced to each pattern's peak sample to drop the arbitrary source phase
    ref = np.argmax(oracle.magnitude())
    dphi = np.angle((pe / pe[ref]) * np.conj(po / po[ref]))
    phase_err = np.degrees(np.abs(dphi[strong])).max() if strong.any() else 0.0
    return float(mag_err), float(phase_err)


@dataclass
class ScalingRow:
    nx: int
    ny: int
    unknowns_decomp: int
    unknowns_oracle: int
    t_decomp_fill_ms: float
    t_decomp_solve_ms: float
    t_decomp_ms: float
    t_oracle_fill_ms: float
    t_oracle_solve_ms: float
    t_oracle_ms: float

    @property
    def speedup(self) -> float:
        return self.t_oracle_ms / self.t_decomp_ms


@dataclass
class ScalingReport:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    exponent_decomp: float = float("nan")
    exponent_oracle: float = float("nan")


def _time_decomposed(lattice, element, termination):
    t0 = time.perf_counter()
    z_iso = fill_impedance([element], lattice.frequency)
    z_u = fill_impedance(place_elements(element, lattice.axis_lattice("u")), lattice.frequency)
    z_v = fill_impedance(place_elements(element, lattice.axis_lattice("v")), lattice.frequency)
    t1 = time.perf_counter()
    iso = solve_all_ports_from(z_iso, PortTermination(termination.z_load, termination.v_source),
                               context="isolated")[0]
    ju = solve_all_ports_from(z_u, termination, context="array-1d-u")
    jv = solve_all_ports_from(z_v, termination, context="array-1d-v")
    c2d = kron_expand(build_axis_transfer(iso, ju, "u"), build_axis_transfer(iso, jv, "v"))
    estimate_all_ports(iso, c2d)
    t2 = time.perf_counter()
    return t1 - t0, t2 - t1


def _time_oracle(lattice, element, termination):
    t0 = time.perf_counter()
    z = fill_impedance(place_elements(element, lattice), lattice.frequency)
    t1 = time.perf_counter()
    solve_all_ports_from(z, termination, context="array-2d")
    t2 = time.perf_counter()
    return t1 - t0, t2 - t1


def _best_of(fn, repeats, *args):
    fn(*args)  # warm-up, discarded
    runs = [fn(*args) for _ in range(repeats)]
    return min(runs, key=sum)


def scaling_benchmark(sizes, element, *, frequency, dx, dy, termination=None, repeats=3) -> ScalingReport:
    """Time the decomposed and full-array paths over a ladder of array sizes.

    Each path is run once as warm-up and then ``repeats`` times; the fastest
    run is kept.  Pattern evaluation and I/O are not timed.
    """
    termination = termination or PortTermination()
    report = ScalingReport()
    for nx, ny in sizes:
        unknowns = element.m * nx * ny
        if unknowns > ORACLE_MAX_UNKNOWNS:
            msg = f"skipping {nx}x{ny}: {unknowns} unknowns exceeds the oracle guard"
            log.warning(msg)
            report.skipped.append((nx, ny, msg))
            continue
        lattice = build_lattice(nx, ny, dx, dy, frequency)
        fd, sd = _best_of(_time_decomposed, repeats, lattice, element, termination)
        fo, so = _best_of(_time_oracle, repeats, lattice, element, termination)
        report.rows.append(ScalingRow(
            nx, ny, element.m * (nx + ny), unknowns,
            fd * 1e3, sd * 1e3, (fd + sd) * 1e3, fo * 1e3, so * 1e3, (fo + so) * 1e3,
        ))
    if len(report.rows) >= 2:
        n = np.log([r.nx * r.ny for r in report.rows])
        report.exponent_decomp = float(np.polyfit(n, np.log([r.t_decomp_ms for r in report.rows]), 1)[0])
        report.exponent_oracle = float(np.polyfit(n, np.log([r.t_oracle_ms for r in report.rows]), 1)[0])
    return report


def check_scaling_report(report: ScalingReport):
    if not report.rows and not report.skipped:
        raise SizeGuardError("benchmark produced no rows")
