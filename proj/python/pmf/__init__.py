"""Dense bijective shape correspondence via kernel density estimation in
the product space, solved as a sequence of linear assignment problems."""

from ._core import (
    AuctionConfig,
    KernelParams,
    MatchSet,
    MetricSpace,
    Permutation,
    PmfConfig,
    PmfResult,
    SamplingHierarchy,
    ThreePointResult,
    TriMesh,
    WidenPolicy,
    color_transfer_export,
    default_level_schedule,
    default_thresholds,
    error_curve,
    farthest_point_sampling,
    geodesic_errors,
    kernel_matrix,
    kernel_value,
    lap_auction,
    lap_bruteforce,
    lap_exact,
    load_mesh,
    mesh_area,
    payoff_dense,
    pmf_multiscale,
    pmf_single_scale,
    pointwise_estimate,
    set_thread_count,
    shape_diameter,
    three_point_1d,
    write_mesh,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
