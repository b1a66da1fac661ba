"""Per-beat cuffless blood-pressure estimation from single-site PPG.

Pipeline: bandpass filter + min-max normalization -> systolic peak
detection and beat segmentation -> outlier cleaning -> 160-element
zero-padded beat vectors -> per-subject two-hidden-layer MLP
regression of (SBP, DBP, MAP) -> AAMI-style evaluation, plus a
resource/energy budget profiler for edge deployment.
"""

from .ann import (
    MlpModel,
    TrainConfig,
    TrainReport,
    forward,
    init_model,
    load_model,
    loss_and_gradient,
    save_model,
    split_dataset,
    train,
)
from .config import PipelineConfig, SegmentationConfig
from .dataset import LabeledBeats, read_beats, write_beats
from .dsp import (
    BiquadCascade,
    FilterSpec,
    NormalizedSignal,
    apply_filter,
    design_bandpass,
    frequency_response,
    normalize_minmax,
    reset_state,
)
from .errors import DataError, FormatError, NumericError, PipelineError
from .metrics import (
    BlandAltmanSeries,
    EvalReport,
    MetricSet,
    aami_check,
    bland_altman,
    compute_metrics,
    evaluate_predictions,
    render_report,
)
from .pipeline import PreparedRecord, infer_beats, merge_prepared, prepare_record
from .profiler import (
    EnergyModel,
    ProfileReport,
    StageCost,
    build_profile,
    count_ann_ops,
    count_preproc_ops,
    measure_latency,
    model_energy,
    render_profile,
)
from .records import (
    BpLabel,
    LabelStats,
    RawRecord,
    discard_label_outliers,
    extract_bp_label,
    label_stats,
    load_record,
    save_record,
)
from .segmentation import (
    BeatSegment,
    BeatVector,
    CleaningStats,
    PeakList,
    clean_beats,
    detect_peaks,
    segment_beats,
    to_vector,
)
from .synth import generate_subject, generate_window

__version__ = "0.1.0"
