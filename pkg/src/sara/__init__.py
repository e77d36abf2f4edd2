"""RoI pooling kernels (plain and shape-aware), a 64-bit oracle, refining
arithmetic, scenario generators, and a bit-exact tensor container."""

from . import errors
from .bench import run_bench
from .io import read_tensor_file, tensor_bytes, tensor_read, tensor_write, write_tensor_file
from .kernels import (
    DEFAULT_GRID,
    BilinearStencil,
    JobResult,
    PoolJob,
    SamplePoint,
    batch_run,
    bilinear_sample,
    bilinear_stencil,
    make_sample_points,
    prob_sample,
    roi_align_backward,
    roi_align_forward,
    roi_to_prob_coords,
    sa_roi_align_backward,
    sa_roi_align_forward,
)
from .oracle import (
    GradCheckReport,
    finite_diff_grad,
    gradcheck,
    oracle_roi_align,
    oracle_sa_roi_align,
)
from .refine import (
    ClassScores,
    FusionWeight,
    MaskStack,
    assign_pseudo_label,
    fuse_mask_features,
    fuse_scores,
    iou,
    nms,
    select_class_mask,
)
from .synth import (
    HuddleScenario,
    RandomCase,
    crop_mask_to_roi,
    export_scenario,
    feature_separability,
    gen_huddle,
    gen_random_case,
)
from .tensors import (
    BinGrid,
    FeatureMap,
    GradBundle,
    PooledGrid,
    ProbMap,
    RoiBox,
    validate_feature_map,
    validate_prob_map,
)

__version__ = "0.1.0"
