"""Deformable layout-segmentation operators and boundary-centric evaluation."""

from .dataset import (
    CATEGORIES,
    CATEGORY_ABBREVS,
    COLLECTIONS,
    SPLITS,
    DocumentRecord,
    ManifestError,
    RegionInstance,
    generate_anchors,
    load_manifest,
    repeat_factors,
    save_manifest,
    split_stats,
)
from .defgrid import (
    DeformableGrid,
    GcnWeights,
    apply_offsets,
    area_uniformity_loss,
    build_grid,
    cell_feature_variance_loss,
    extract_region_polygons,
    neighbor_direction_loss,
    reconstruction_loss,
    residual_gcn_forward,
    triangle_areas,
    upsample_mask,
)
from .deform_conv import (
    ConvKernel,
    OffsetField,
    deformable_conv2d,
    deformable_conv2d_backward,
    offset_generation,
    regular_conv2d,
)
from .evaluation import (
    DEFAULT_IOU_THRESHOLDS,
    EvalConfig,
    MetricReport,
    average_precision,
    ap_range,
    evaluate_manifests,
    match_instances,
)
from .distances import (
    avg_hausdorff,
    boundary_points,
    directed_hd,
    directed_hd_brute,
    hausdorff,
    hd95,
)
from .numeric import bilinear_sample, bilinear_sample_grad, central_finite_difference
from .rasterize import mask_iou, rasterize_polygon

__version__ = "0.1.0"
