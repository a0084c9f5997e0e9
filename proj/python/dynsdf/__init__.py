"""Dynamic-aware neural SDF mapping from lidar scans."""

from ._dynsdf import (
    Box3D,
    DynamicMask,
    Error,
    FormatError,
    ValidationError,
    accuracy,
    ate_rmse,
    box_to_mask,
    chamfer_l1,
    completion,
    f_score,
    fourier_encode,
    infill_ground,
    marching_cubes,
    query_sdf,
    read_ply,
    read_scan_bin,
    run_map,
    synth,
    write_ply,
    write_scan_bin,
)

__all__ = [name for name in dir() if not name.startswith("_")]
