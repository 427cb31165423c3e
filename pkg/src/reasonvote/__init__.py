"""Diverse chain-of-thought sampling, verification, and weighted voting."""

from .aggregation import (
    AggregateResult,
    AggregationMethod,
    AlignmentError,
    MissingScoreError,
    Tally,
    VerifierScore,
    aggregate,
    align_scores,
    load_scores,
    majority_vote,
    read_score_file,
    save_scores,
    scores_for_paths,
    verifier_argmax,
    voting_verifier,
)
from .core import (
    Exemplar,
    NormalizationError,
    NormalizedAnswer,
    Question,
    ReasoningPath,
    Step,
    StepLabel,
    TaskKind,
    extract_final_answer,
    extract_intermediate_result,
    normalize_answer,
    parse_path,
    segment_steps,
    step_spans,
)
from .generation import (
    GenerationClient,
    GenerationError,
    GenerationRecord,
    HttpCompletionClient,
    ParseWarning,
    RunConfig,
    generate_dataset,
    load_paths,
    load_paths_by_question,
    sample_paths,
)
from .harness import (
    DiversityStats,
    EvalReport,
    SweepError,
    diversity_stats,
    evaluate,
    load_dataset,
    subsample_training,
    sweep_m,
)
from .labeling import (
    EquivalenceOracle,
    OracleError,
    OracleKind,
    TrainingRecord,
    build_training_set,
    label_path,
    label_steps,
    load_training_records,
    save_training_records,
    steps_equivalent,
)
from .prompts import (
    ExemplarPool,
    PoolExhaustedError,
    Prompt,
    bootstrap_pool,
    build_prompts,
    load_pool,
    render_prompt,
    save_pool,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "AggregationMethod",
    "AlignmentError",
    "DiversityStats",
    "EquivalenceOracle",
    "EvalReport",
    "Exemplar",
    "ExemplarPool",
    "GenerationClient",
    "GenerationError",
    "GenerationRecord",
    "HttpCompletionClient",
    "MissingScoreError",
    "NormalizationError",
    "NormalizedAnswer",
    "OracleError",
    "OracleKind",
    "ParseWarning",
    "PoolExhaustedError",
    "Prompt",
    "Question",
    "ReasoningPath",
    "RunConfig",
    "Step",
    "StepLabel",
    "SweepError",
    "Tally",
    "TaskKind",
    "TrainingRecord",
    "VerifierScore",
    "aggregate",
    "align_scores",
    "bootstrap_pool",
    "build_prompts",
    "build_training_set",
    "diversity_stats",
    "evaluate",
    "extract_final_answer",
    "extract_intermediate_result",
    "generate_dataset",
    "label_path",
    "label_steps",
    "load_dataset",
    "load_paths",
    "load_paths_by_question",
    "load_pool",
    "load_scores",
    "load_training_records",
    "majority_vote",
    "normalize_answer",
    "parse_path",
    "read_score_file",
    "render_prompt",
    "sample_paths",
    "save_pool",
    "save_scores",
    "save_training_records",
    "scores_for_paths",
    "segment_steps",
    "step_spans",
    "steps_equivalent",
    "subsample_training",
    "sweep_m",
    "verifier_argmax",
    "voting_verifier",
]
