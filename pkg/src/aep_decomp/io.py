"""CSV and manifest writers.  Floats are written with ``repr`` so reruns are bit-identical."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return x


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def write_pattern(path, pattern):
    """theta_deg, phi_deg, re/im of E_theta and E_phi, normalized total magnitude in dB."""
    g = pattern.grid
    db = pattern.db(floor_db=-300.0)
    rows = zip(g.theta_deg, g.phi_deg, pattern.e_theta.real, pattern.e_theta.imag,
               pattern.e_phi.real, pattern.e_phi.imag, db)
    return write_rows(path, ["theta_deg", "phi_deg", "re_Etheta", "im_Etheta",
                             "re_Ephi", "im_Ephi", "mag_db_normalized"], rows)


def write_uv_map(path, grid, values, column="mag_db"):
    t, p = np.radians(grid.theta_deg), np.radians(grid.phi_deg)
    u, v = np.sin(t) * np.cos(p), np.sin(t) * np.sin(p)
    return write_rows(path, ["u", "v", column], zip(u, v, values))


def write_complex_matrix(path, a):
    """Sparse-style dump: row, col, re, im (0-based indices)."""
    a = np.atleast_2d(a)
    r, c = np.indices(a.shape)
    return write_rows(path, ["row", "col", "re", "im"],
                      zip(r.ravel(), c.ravel(), a.real.ravel(), a.imag.ravel()))


def write_spectrum(path, spectrum):
    nx, ny = spectrum.grid_db.shape
    rows = ((u + 1, v + 1, spectrum.grid_db[u, v]) for u in range(nx) for v in range(ny))
    return write_rows(path, ["u", "v", "mean_current_db"], rows)


def write_manifest(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")
