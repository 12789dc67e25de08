"""Active element patterns of planar arrays by directional decomposition.

Two 1-D array solves (one per lattice axis) and one isolated-element solve
give per-mesh transfer matrices whose Kronecker product predicts the
currents, and hence the active element patterns, of the full 2-D array.
"""

from .decomp import (
    AxisTransferSet,
    TransferMatrix2D,
    build_axis_transfer,
    decompose,
    estimate_all_ports,
    estimate_currents_2d,
    kron_expand,
)
from .farfield import (
    AngleGrid,
    FarFieldPattern,
    cut_grid,
    pmm_isolated,
    radiate,
    radiate_many,
    steering_weights,
    synthesize,
    uv_grid,
)
from .geometry import ArrayLattice, ElementMesh, build_lattice, discretize_dipole, port_index, port_uv
from .mom import (
    CurrentDistribution,
    ImpedanceMatrix,
    PortTermination,
    apply_terminations,
    fill_impedance,
    solve_1d_array,
    solve_2d_oracle,
    solve_currents,
    solve_isolated,
)

__version__ = "0.1.0"
