"""mdseg: multi-dataset semantic segmentation tooling.

Project dataset masks into one shared label space, balance and schedule
joint training over nine datasets, augment training pairs, fuse
multi-scale/flip test-time predictions from an external model, and score
results with per-dataset class mIoU.
"""

from .augment import AugConfig, AugDraws, PhotometricParams, apply_pipeline, train_pipeline
from .catalog import (
    DatasetDescriptor,
    Manifest,
    SampleRecord,
    build_manifest,
    builtin_catalog,
    catalog_by_name,
    class_histogram,
    load_manifest,
    save_manifest,
    verify_manifest,
)
from .errors import (
    DataError,
    InversionError,
    ParseError,
    PredictorError,
    ScheduleError,
    StrictFailure,
    ToolkitError,
)
from .evaluate import (
    ConfusionMatrix,
    EvalConfig,
    IoUReport,
    accumulate,
    evaluate_dataset,
    iou_report,
    masked_cross_entropy,
    merge,
)
from .label_space import (
    ClassDef,
    LabelSpace,
    MappingTable,
    MaskImage,
    ProjectionLUT,
    apply_overlay,
    build_lut,
    invert_mapping,
    load_label_space,
    load_mapping,
    parse_label_space,
    parse_mapping,
    project_mask,
    projected_class_count,
    unified_template,
    validate_mapping,
)
from .rng import RngStream, stream_key
from .sampler import (
    BatchSpec,
    PhaseSpec,
    RepeatPlan,
    TrainingMeta,
    TrainSchedule,
    build_repeat_plan,
    build_schedule,
    default_phases,
    next_batch,
    plan_to_json,
    repeat_factor,
)
from .sglt import read_sglt, write_sglt
from .tta import (
    CallablePredictor,
    LogitMap,
    SubprocessPredictor,
    TtaConfig,
    aggregate,
    argmax_mask,
    hflip_logits,
    rescale_logits,
    run_tta,
)

__version__ = "0.1.0"
