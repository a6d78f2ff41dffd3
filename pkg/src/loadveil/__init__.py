"""loadveil: smart-meter load-profile obfuscation with a privacy budget.

A load batch is sparse-coded against a trained over-complete dictionary,
the activation vector is randomized (randomized response over positions),
and the perturbed activation is re-aggregated into the obfuscated profile.
A greedy NILM attack quantifies how much behavioral signal survives.
"""

from .meterdata import (
    ApplianceProfile,
    GroundTruthStates,
    MeterCsvError,
    ReadingBatch,
    generate_synthetic,
    load_csv,
    load_truth_csv,
    write_csv,
    write_truth_csv,
)
from .sparse_coding import (
    Activation,
    Dictionary,
    DivergenceError,
    TrainingConfig,
    TrainingResult,
    infer_activation,
    init_dictionary,
    kkt_residual,
    load_dictionary,
    objective,
    renormalize_columns,
    save_dictionary,
    sparsity,
    train_dictionary,
)
from .randomized_response import (
    InvalidPrivacyParams,
    PrivacyParams,
    TransitionMatrix,
    UnboundedPrivacyBudget,
    build_transition_matrix,
    compose_parallel,
    epsilon_closed_form,
    epsilon_empirical,
    perturb_activation,
    rappor_bit,
)
from .pipeline import (
    BatchProcessingError,
    ObfuscationResult,
    compose_stream_budget,
    obfuscate_batch,
    process_stream,
    reaggregate,
)
from .evaluation import (
    AttackConfig,
    DetectionScores,
    EvalReport,
    UtilityMetrics,
    compare_report,
    f1_score,
    nilm_attack,
    utility_metrics,
)
from .scenarios import standard_four_appliance

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "ApplianceProfile",
    "AttackConfig",
    "BatchProcessingError",
    "DetectionScores",
    "Dictionary",
    "DivergenceError",
    "EvalReport",
    "GroundTruthStates",
    "InvalidPrivacyParams",
    "MeterCsvError",
    "ObfuscationResult",
    "PrivacyParams",
    "ReadingBatch",
    "TrainingConfig",
    "TrainingResult",
    "TransitionMatrix",
    "UnboundedPrivacyBudget",
    "UtilityMetrics",
    "build_transition_matrix",
    "compare_report",
    "compose_parallel",
    "compose_stream_budget",
    "epsilon_closed_form",
    "epsilon_empirical",
    "f1_score",
    "generate_synthetic",
    "infer_activation",
    "init_dictionary",
    "kkt_residual",
    "load_csv",
    "load_dictionary",
    "load_truth_csv",
    "nilm_attack",
    "obfuscate_batch",
    "objective",
    "perturb_activation",
    "process_stream",
    "rappor_bit",
    "reaggregate",
    "renormalize_columns",
    "save_dictionary",
    "sparsity",
    "standard_four_appliance",
    "train_dictionary",
    "utility_metrics",
    "write_csv",
    "write_truth_csv",
]
