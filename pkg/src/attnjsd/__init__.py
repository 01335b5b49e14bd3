"""Jensen-Shannon objectives, sign-gradient adaptation, and scoring
for discrete attention distributions."""

from .distributions import (
    FLOOR_EPS,
    SUM_TOLERANCE,
    DistributionSet,
    ProbField,
    entropy,
    entropy_normalized,
    floor_distribution,
    jsd,
    jsd_normalized,
    kl_divergence,
    mixture,
)
from .errors import (
    AttnJsdError,
    DataError,
    DimensionMismatchError,
    DivergenceUndefinedError,
    DumpError,
    DumpFormatError,
    DumpSizeError,
    DumpVersionError,
    MalformedDistributionError,
    MissingBlockError,
    NumericalError,
)
from .objective import (
    LossConfig,
    ObjectiveBreakdown,
    PromptSpec,
    SubjectGroup,
    diversity_penalty,
    inter_separation,
    intra_coherence,
    jedi_loss,
    jedi_value_and_grad,
    logits_breakdown,
    loss_gradient,
    nt_xent_loss,
    nt_xent_value_and_grad,
    softmax_fields,
    softmax_matrix,
)
from .adaptation import (
    AdaptationResult,
    LatentState,
    LoopConfig,
    ModelInterface,
    SweepEntry,
    SyntheticAttentionModel,
    TraceEntry,
    alpha_sweep,
    fgsm_update,
    run_adaptation,
    write_trace_csv,
)
from .extraction import (
    KIND_RAW_LOGITS,
    KIND_SOFTMAXED,
    DegenerateExtractionWarning,
    JointAttentionMatrix,
    extract_pool,
    extract_token_field,
)
from .dump import (
    FORMAT_VERSION,
    AttentionDump,
    DumpManifest,
    read_dump,
    write_dump,
)
from .score import (
    LATE_WINDOW_START,
    ScoreSeries,
    disentanglement_score,
    export_series_csv,
    series_summary,
)
from .toy import ToyConfig, ToyMetrics, ToyResult, run_toy, toy_prompt

__version__ = "0.1.0"

__all__ = [
    "AdaptationResult",
    "AttentionDump",
    "AttnJsdError",
    "DataError",
    "DegenerateExtractionWarning",
    "DimensionMismatchError",
    "DistributionSet",
    "DivergenceUndefinedError",
    "DumpError",
    "DumpFormatError",
    "DumpManifest",
    "DumpSizeError",
    "DumpVersionError",
    "FLOOR_EPS",
    "FORMAT_VERSION",
    "JointAttentionMatrix",
    "KIND_RAW_LOGITS",
    "KIND_SOFTMAXED",
    "LATE_WINDOW_START",
    "LatentState",
    "LoopConfig",
    "LossConfig",
    "MalformedDistributionError",
    "MissingBlockError",
    "ModelInterface",
    "NumericalError",
    "ObjectiveBreakdown",
    "ProbField",
    "PromptSpec",
    "ScoreSeries",
    "SubjectGroup",
    "SweepEntry",
    "SyntheticAttentionModel",
    "SUM_TOLERANCE",
    "ToyConfig",
    "ToyMetrics",
    "ToyResult",
    "TraceEntry",
    "alpha_sweep",
    "disentanglement_score",
    "diversity_penalty",
    "entropy",
    "entropy_normalized",
    "export_series_csv",
    "extract_pool",
    "extract_token_field",
    "fgsm_update",
    "floor_distribution",
    "inter_separation",
    "intra_coherence",
    "jedi_loss",
    "jedi_value_and_grad",
    "jsd",
    "jsd_normalized",
    "kl_divergence",
    "logits_breakdown",
    "loss_gradient",
    "mixture",
    "nt_xent_loss",
    "nt_xent_value_and_grad",
    "read_dump",
    "run_adaptation",
    "run_toy",
    "series_summary",
    "softmax_fields",
    "softmax_matrix",
    "toy_prompt",
    "write_dump",
    "write_trace_csv",
]
