"""Frequency-selective mesh-to-grid resampling toolkit."""

from .baselines import bicubic_resample, bilinear_resample, cubic_kernel
from .core import (
    BasisIndex,
    BlockModel,
    BlockResult,
    FsmrParams,
    MeshSample,
    NoSamplesError,
    dct_basis_eval,
    energy_reduction,
    estimate_coefficient,
    fsmr_block,
    resample_to_grid,
    select_basis,
    weight_freq,
    weights_spatial,
)
from .geometry import (
    AffineTransform,
    MeshCloud,
    forward_map,
    identity,
    resize_transform,
    rotation_about,
    translation,
    zoom_about,
)
from .metrics import QualityReport, psnr, quality_report, ssim
from .patterns import BandLimitedPattern, make_pattern
from .pipeline import (
    AugmentationPlan,
    ClassBoxStats,
    DatasetManifest,
    ManifestEntry,
    OutputManifest,
    PlanRecord,
    apply_method,
    build_plan,
    class_std_stats,
    discover_tree,
    execute_plan,
    split_dataset,
)
from .raster import RasterImage, read_image, write_image

__version__ = "0.1.0"
