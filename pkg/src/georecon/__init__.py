"""Geometry-aware frame sampling, patch masking and reconstruction losses for multi-view scenes."""
from .coverage import (
    SamplerConfig,
    SceneDepths,
    SelectionReport,
    adaptive_sample,
    coverage_of,
    exhaustive_max_coverage,
    greedy_max_coverage,
    run_adaptive,
    uniform_sample,
)
from .errors import (
    DegenerateInputError,
    FormatError,
    GeoreconError,
    InputError,
    OutputError,
    ParameterError,
    SceneSpecError,
)
from .figure import emit_coverage_figure
from .geometry import (
    RenderConfig,
    VisibilityBuffer,
    VisibilitySet,
    back_project,
    merge_point_clouds,
    project_point,
    render_visibility,
    visible_set,
    voxel_downsample,
    warp_depth,
)
from .kernels import BACKEND
from .losses import (
    LossConfig,
    LossReport,
    ProjectorWeights,
    cosine_distance,
    frame_recon_loss,
    fuse_tokens,
    fusion_target,
    merge_patches_2x2,
    object_recon_loss,
    total_loss,
)
from .masking import (
    FrameMask,
    MaskRng,
    ObjectRecord,
    PatchMask,
    frame_level_mask,
    object_level_mask,
    object_patch_overlap,
    salient_objects,
)
from .scene import (
    CameraExtrinsics,
    CameraIntrinsics,
    DepthMap,
    FeatureGrid,
    Frame,
    PointCloud,
    SceneManifest,
    SegmentationMap,
    validate_scene,
)
from .synthetic import SyntheticSceneSpec, build_synthetic, gen_synthetic

__version__ = "0.1.0"
