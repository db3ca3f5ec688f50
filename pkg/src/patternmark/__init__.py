"""Combinatorial-pattern watermarks for token sequences.

Generation biases each position toward the vocabulary subset that a cyclic
tag pattern names; detection counts sliding windows whose tags form a cyclic
slice of that pattern and localizes edits from per-token window scores.
"""
from .bounds import (
    AlignmentProfile,
    estimate_alignment,
    false_alarm_bound,
    miss_detection_bound,
    robustness_bound,
    token_adherence_lower_bound,
    watermark_power_bound,
    watermark_type1_bound,
)
from .corpus import TokenSequence, read_corpus, write_corpus
from .detection import (
    DetectionReport,
    EditReport,
    detect_edits,
    detect_statistic,
    detect_watermark,
    edit_statistics,
    fast_detect,
)
from .edits import EditOp, EditPlan, apply_edits, sample_edit_plan
from .errors import (
    BoundInapplicable,
    CalibrationError,
    GenerationImpossible,
    InfeasiblePlan,
    InsufficientProfile,
    InvalidArgument,
    InvalidInput,
    InvalidPattern,
    InvalidPlan,
    InvalidToken,
    PatternmarkError,
)
from .evaluation import (
    calibrate_edit_threshold,
    calibrate_watermark_threshold,
    detection_accuracy,
    evaluate_suite,
    type1_error_rate,
)
from .generation import GenerationConfig, generate_unwatermarked, generate_watermarked, make_model
from .pattern import Pattern, VocabPartition, parse_pattern, partition_vocabulary, valid_windows

__version__ = "0.1.0"
