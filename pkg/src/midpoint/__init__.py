"""Midpoint subdivision surfaces of arbitrary degree and their C1 analysis."""

from .charmap import (
    C1Certificate,
    CharacteristicMap,
    certify_C1,
    cone_test,
    edge_directions,
    evaluate,
    evaluate_derivatives,
    extract_spline_ring,
)
from .mesh import PolyMesh, average_A, build_mesh, midpoint_Mn, refine_R
from .meshio import read_mesh, read_obj, read_off, write_obj
from .ringnet import (
    FrameK,
    NetOrder,
    Ringnet,
    compare_nets,
    core_mesh,
    frame_K,
    half_segment,
    influence_range,
    kind_for_degree,
    make_grid_mesh,
    min_max_norm,
    omega,
    rho,
    subdivide_ringnet,
    symmetry_check,
)
from .spectral import (
    SpectralReport,
    SubdivisionMatrix,
    assemble_matrix,
    block_norm_bounds,
    block_partition,
    characteristic_mesh,
    dominant_pair_per_frequency,
    frequency_blocks,
    multiplicity,
    spectral_report,
)
from .stencil import StencilTable, regular_mask

__version__ = "0.1.0"
