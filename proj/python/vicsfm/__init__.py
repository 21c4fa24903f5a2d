"""Structure-from-motion toolkit for texture-poor image sequences.

Thin re-export of the compiled core. Images are numpy uint8 arrays: (H, W)
grayscale or (H, W, 3) RGB.
"""

from ._core import (  # noqa: F401
    CameraIntrinsics,
    MatchCurve,
    Mesh,
    MetricsRow,
    Pose,
    Reconstruction,
    ReprojectionStats,
    SyntheticScene,
    Translator,
    VicsfmError,
    anchor_match_curve,
    apply_synthetic_dye,
    crop,
    cycle_error,
    detect_sift,
    extract_channel,
    fit_plane_ransac,
    format_percent,
    hash_file_hex,
    load_image,
    load_mesh_ply,
    load_reconstruction_json,
    localize_frame,
    make_radial_gradient,
    make_scene,
    match_exhaustive,
    mesh_from_points,
    pipeline_stage_names,
    promote_to_rgb,
    reconstruct_incremental,
    remove_outliers_plane,
    reprojection_stats,
    resize_bilinear,
    run_pipeline,
    save_image,
    save_localization_ply,
    save_mesh_ply,
    save_point_cloud_ply,
    save_reconstruction_json,
    table_metrics,
    texture_mesh,
    track_pixels,
    tracks_to_matches,
)

__version__ = "0.1.0"
