"""Command-line entry point: ``aep-decomp <mode> --config <file>``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import MODES, load_scenario
from .decomp import decompose
from .errors import (
    ConfigError,
    DegenerateNormalizationError,
    DegenerateRegionError,
    InvalidParameterError,
    NumericalFailureError,
    SingularGeometryError,
    SizeGuardError,
)
from .farfield import (
    cut_grid,
    pmm_isolated,
    radiate,
    radiate_many,
    steering_weights,
    synthesize,
    taper_weights,
    uv_grid,
)
from .geometry import build_lattice, place_elements
from .metrics import aep_errors, current_spectrum, main_lobe_mse, scaling_benchmark
from .mom import fill_impedance, solve_2d_oracle

log = logging.getLogger("aep_decomp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_GUARD = 0, 2, 3, 4


def six_ports(nx, ny):
    """Corner, edge and center ports in a fixed order, duplicates dropped."""
    cu, cv = math.ceil(nx / 2), math.ceil(ny / 2)
    picks = [(1, 1), (cu, 1), (nx, 1), (1, cv), (cu, cv), (nx, ny)]
    seen = []
    for p in picks:
        if p not in seen:
            seen.append(p)
    return seen


class Run:
    """Shared state for one scenario invocation."""

    def __init__(self, scenario, out, dump_z=False, dump_transfer=False):
        self.s = scenario
        self.out = Path(out)
        self.dump_z = dump_z
        self.dump_transfer = dump_transfer
        self.lattice = scenario.lattice()
        self.element = scenario.element()
        self.termination = scenario.termination()
        self.grid = cut_grid(scenario.grid_step_deg, scenario.cut_phis_deg)
        self.artifacts = []
        self.summary = {}
        self._oracle = None
        self._decomp = None

    def write(self, fn, rel, *args):
        self.artifacts.append(str(fn(self.out / rel, *args).relative_to(self.out)))

    @property
    def oracle(self):
        if self._oracle is None:
            self._oracle = solve_2d_oracle(self.lattice, self.element, self.termination)
        return self._oracle

    @property
    def decomposition(self):
        if self._decomp is None:
            self._decomp = decompose(self.lattice, self.element, self.termination)
        return self._decomp

    def write_currents(self, rel, currents):
        rows = (
            (c.excited_port, i + 1, s + 1, c.values[i, s].real, c.values[i, s].imag)
            for c in currents for i in range(c.n_elements) for s in range(c.m)
        )
        self.write(io.write_rows, rel, ["port", "element", "segment", "re", "im"], rows)

    def write_aeps(self, tag, patterns):
        for k, p in enumerate(patterns, start=1):
            self.write(io.write_pattern, f"aep/{tag}/port_{k:03d}.csv", p)


def run_oracle(run: Run):
    currents = run.oracle
    aeps = radiate_many(currents, run.lattice, run.element, run.grid)
    run.write_aeps("oracle", aeps)
    run.write_currents("currents_oracle.csv", currents)
    run.write(io.write_spectrum, "spectrum_oracle.csv",
              current_spectrum(currents, run.lattice.nx, run.lattice.ny))
    if run.dump_z:
        z = fill_impedance(place_elements(run.element, run.lattice), run.lattice.frequency)
        run.write(io.write_complex_matrix, "z_oracle.csv", z.entries)
    return aeps


def run_estimate(run: Run):
    d = run.decomposition
    aeps = radiate_many(d.estimates, run.lattice, run.element, run.grid)
    run.write_aeps("estimated", aeps)
    run.write_currents("currents_estimated.csv", d.estimates)
    run.write(io.write_spectrum, "spectrum_estimated.csv",
              current_spectrum(d.estimates, run.lattice.nx, run.lattice.ny))
    if run.dump_z:
        f = run.lattice.frequency
        run.write(io.write_complex_matrix, "z_isolated.csv", fill_impedance([run.element], f).entries)
        for axis in ("u", "v"):
            sub = run.lattice.axis_lattice(axis)
            z = fill_impedance(place_elements(run.element, sub), f)
            run.write(io.write_complex_matrix, f"z_{axis}.csv", z.entries)
    if run.dump_transfer:
        c = d.transfer.materialize()
        with np.errstate(divide="ignore"):
            mag_db = 20 * np.log10(np.abs(c))
        rows = ((m + 1, i + 1, k + 1, mag_db[m, i, k])
                for m in range(c.shape[0]) for i in range(c.shape[1]) for k in range(c.shape[2]))
        run.write(io.write_rows, "transfer_2d.csv", ["mesh", "element", "port", "magnitude_db"], rows)
    return aeps


def run_compare(run: Run):
    ora = run_oracle(run)
    est = run_estimate(run)
    lat = run.lattice
    rows = []
    worst_mag = worst_phase = 0.0
    for k in range(1, lat.n_ports + 1):
        mag, ph = aep_errors(ora[k - 1], est[k - 1])
        u, v = lat.port_uv(k)
        rows.append((k, u, v, mag, ph))
        worst_mag, worst_phase = max(worst_mag, mag), max(worst_phase, ph)
    run.write(io.write_rows, "compare_summary.csv",
              ["port", "u", "v", "max_mag_err_db", "max_phase_err_deg"], rows)

    picks = six_ports(lat.nx, lat.ny)
    cut = np.flatnonzero(np.isclose(run.grid.phi_deg, run.s.cut_phis_deg[0]))
    six_rows = []
    for u, v in picks:
        k = lat.port_index(u, v)
        o, e = ora[k - 1], est[k - 1]
        od, ed = o.db(), e.db()
        for i in cut:
            six_rows.append((k, u, v, run.grid.theta_deg[i], od[i], ed[i],
                             np.degrees(np.angle(o.e_theta[i])), np.degrees(np.angle(e.e_theta[i]))))
    run.write(io.write_rows, "six_port_cut.csv",
              ["port", "u", "v", "theta_deg", "oracle_db", "estimated_db",
               "oracle_phase_deg", "estimated_phase_deg"], six_rows)

    so = current_spectrum(run.oracle, lat.nx, lat.ny)
    se = current_spectrum(run.decomposition.estimates, lat.nx, lat.ny)
    run.summary.update(
        ports=lat.n_ports,
        max_mag_err_db=worst_mag,
        max_phase_err_deg=worst_phase,
        spectrum_max_dev_db=float(np.abs(so.grid_db - se.grid_db).max()),
        six_ports=[lat.port_index(u, v) for u, v in picks],
    )


def run_synthesize(run: Run):
    s, lat, el = run.s, run.lattice, run.element
    phi0 = s.steer_phi_deg
    grid = cut_grid(s.grid_step_deg, (phi0,))
    uv = uv_grid(s.uv_points)
    ora_c, est_c = run.oracle, run.decomposition.estimates
    ora = radiate_many(ora_c, lat, el, grid)
    est = radiate_many(est_c, lat, el, grid)
    single = build_lattice(1, 1, lat.dx, lat.dy, lat.frequency)
    iso = radiate(run.decomposition.isolated, single, el, grid)
    iso_uv = radiate(run.decomposition.isolated, single, el, uv)
    taper = taper_weights(lat, s.taper)
    ora_vals = np.stack([c.values for c in ora_c])
    est_vals = np.stack([c.values for c in est_c])

    mse_rows = []
    for th0 in s.steer_thetas_deg:
        w = steering_weights(lat, th0, phi0, taper)
        pats = {
            "oracle": synthesize(ora, w).normalized(),
            "proposed": synthesize(est, w).normalized(),
            "pmm-isolated": pmm_isolated(iso, lat, w).normalized(),
        }
        tag = f"synth/theta_{th0:+06.1f}"
        for name, p in pats.items():
            run.write(io.write_pattern, f"{tag}/pattern_{name}.csv", p)
        for name in ("proposed", "pmm-isolated"):
            r = main_lobe_mse(pats["oracle"], pats[name], th0, phi0, method=name)
            mse_rows.append((th0, phi0, name, r.mse_db, *r.region_theta_deg, int(r.fallback)))

        # synthesis is linear, so the u-v maps radiate the weighted current sums directly
        uv_pats = {
            "oracle": radiate(np.tensordot(w, ora_vals, axes=1), lat, el, uv),
            "proposed": radiate(np.tensordot(w, est_vals, axes=1), lat, el, uv),
            "pmm-isolated": pmm_isolated(iso_uv, lat, w),
        }
        ref_db = uv_pats["oracle"].db(floor_db=-80.0)
        run.write(io.write_uv_map, f"{tag}/uv_oracle.csv", uv, ref_db)
        for name in ("proposed", "pmm-isolated"):
            err = uv_pats[name].db(floor_db=-80.0) - ref_db
            run.write(io.write_uv_map, f"{tag}/uv_error_{name}.csv", uv, err, "error_db")
    run.write(io.write_rows, "mse_vs_steering.csv",
              ["theta0_deg", "phi0_deg", "method", "mse_db2", "region_lo_deg", "region_hi_deg",
               "fallback"], mse_rows)
    run.summary["mse"] = [
        {"theta0_deg": r[0], "method": r[2], "mse_db2": r[3]} for r in mse_rows
    ]


def run_bench(run: Run):
    s = run.s
    report = scaling_benchmark(s.bench_sizes, run.element, frequency=s.frequency_hz,
                               dx=s.dx_wavelengths, dy=s.dy_wavelengths,
                               termination=run.termination, repeats=s.bench_repeats)
    rows = [(r.nx, r.ny, r.unknowns_decomp, r.unknowns_oracle, r.t_decomp_ms, r.t_oracle_ms,
             r.speedup) for r in report.rows]
    run.write(io.write_rows, "bench.csv",
              ["nx", "ny", "unknowns_decomp", "unknowns_oracle", "t_decomp_ms", "t_oracle_ms",
               "speedup"], rows)
    detail = [(r.nx, r.ny, r.t_decomp_fill_ms, r.t_decomp_solve_ms, r.t_oracle_fill_ms,
               r.t_oracle_solve_ms) for r in report.rows]
    run.write(io.write_rows, "bench_breakdown.csv",
              ["nx", "ny", "t_decomp_fill_ms", "t_decomp_factor_solve_ms", "t_oracle_fill_ms",
               "t_oracle_factor_solve_ms"], detail)
    lines = [f"{'size':>7} {'N_dec':>6} {'N_ora':>6} {'t_dec ms':>10} {'t_ora ms':>10} {'speedup':>8}"]
    for r in report.rows:
        lines.append(f"{r.nx:>3}x{r.ny:<3} {r.unknowns_decomp:>6} {r.unknowns_oracle:>6} "
                     f"{r.t_decomp_ms:>10.2f} {r.t_oracle_ms:>10.2f} {r.speedup:>8.2f}")
    for _, _, msg in report.skipped:
        lines.append(f"skipped: {msg}")
    lines.append(f"fitted exponent vs nx*ny: decomposed {report.exponent_decomp:.2f}, "
                 f"oracle {report.exponent_oracle:.2f}")
    (run.out / "bench_summary.txt").write_text("\n".join(lines) + "\n")
    run.artifacts.append("bench_summary.txt")
    print("\n".join(lines))
    run.summary.update(exponent_decomp=report.exponent_decomp,
                       exponent_oracle=report.exponent_oracle,
                       skipped=[f"{a}x{b}" for a, b, _ in report.skipped])


RUNNERS = {
    "oracle": run_oracle,
    "estimate": run_estimate,
    "compare": run_compare,
    "synthesize": run_synthesize,
    "bench": run_bench,
}


def execute(mode, scenario, out, dump_z=False, dump_transfer=False) -> Run:
    run = Run(scenario, out, dump_z, dump_transfer)
    run.out.mkdir(parents=True, exist_ok=True)
    RUNNERS[mode](run)
    manifest = {"mode": mode, "config": scenario.to_dict(), "artifacts": sorted(run.artifacts)}
    if mode != "bench":
        manifest["summary"] = run.summary
    io.write_manifest(run.out / "manifest.json", manifest)
    return run


def build_parser():
    p = argparse.ArgumentParser(prog="aep-decomp", description=__doc__)
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="scenario file ([scenario] key = value)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--dump-z", action="store_true", help="write impedance matrices as CSV")
    p.add_argument("--dump-transfer", action="store_true", help="write 2-D transfer magnitudes")
    p.add_argument("--grid-step-deg", type=float, help="theta step of the pattern cuts")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.config, mode=args.mode, output_dir=args.out,
                                 grid_step_deg=args.grid_step_deg)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        execute(args.mode, scenario, scenario.output_dir, args.dump_z, args.dump_transfer)
    except SizeGuardError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (NumericalFailureError, SingularGeometryError, DegenerateNormalizationError,
            DegenerateRegionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
