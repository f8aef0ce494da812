"""Deterministic text-guided visual token selection.

Scores every visual token by fusing encoder-attention saliency with
query-embedding relevance, keeps the top scorers, and fills the rest of the
budget with a diversity-preserving subset of the remainder. Ships with
coverage/stability/cost verification tools, a binary tensor format, a
synthetic fixture generator, and a CLI.
"""

from .core import (
    DEFAULT_EPS,
    RAW,
    SIMPLEX,
    UNIT_INTERVAL,
    FeatureError,
    ScoreError,
    ScoreVector,
    as_features,
    as_scores,
    l2_normalize_rows,
    minmax_normalize,
    quantile,
    similarity_matrix,
    softmax,
)
from .fixtures import SyntheticFixture, synth_fixture
from .metrics import (
    GroundTruthBox,
    TokenGrid,
    attention_distance,
    score_entropy,
    token_box_iou,
)
from .oracle import oracle_residual_prune
from .partition import (
    SelectionConfig,
    SelectionResult,
    partition_important,
    residual_prune,
    residual_prune_geometric,
    residual_prune_threshold,
    select_tokens,
)
from .relevance import (
    ExtrinsicResult,
    FusionParams,
    GatedText,
    Projector,
    SharpenParams,
    aggregate_similarity,
    extrinsic_relevance,
    fuse,
    gate_text,
    intrinsic_saliency,
    project_visual,
    sharpen,
)
from .results import read_result, render_result, write_result
from .tensorfile import TensorFormatError, read_tensor, write_tensor
from .theory import (
    CostProbe,
    CostReport,
    CoverReport,
    StabilityReport,
    chain_depths,
    check_cover,
    check_stability,
    geometric_series_cost,
    metric_perturbation,
    probe_cost,
)

__version__ = "0.1.0"
