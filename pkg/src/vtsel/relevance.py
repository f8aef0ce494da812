"""Per-token relevance scoring: intrinsic saliency, query relevance, fusion.

The pipeline is: normalize encoder attention into an intrinsic score, project
visual features into the text-embedding space, gate and normalize the text
tokens, aggregate cross-modal similarity per patch, sharpen it into a sparse
extrinsic score, and finally blend the two channels with a weighted geometric
mean computed in the log domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    DEFAULT_EPS,
    FeatureError,
    ScoreError,
    ScoreVector,
    UNIT_INTERVAL,
    as_features,
    as_scores,
    l2_normalize_rows,
    minmax_normalize,
    quantile,
    similarity_matrix,
    softmax,
)


@dataclass
class Projector:
    """Affine map from the visual space (D_v) into the text space (D_llm).

    ``weight`` has shape (D_llm, D_v); ``bias``, when present, has length D_llm.
    """

    weight: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.weight = as_features(self.weight)
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.ndim != 1 or self.bias.size != self.weight.shape[0]:
                raise FeatureError("projector bias length must equal output dimension")
            if not np.all(np.isfinite(self.bias)):
                raise FeatureError("projector bias contains non-finite values")

    @property
    def dim_out(self) -> int:
        return self.weight.shape[0]

    @property
    def dim_in(self) -> int:
        return self.weight.shape[1]


@dataclass
class SharpenParams:
    """Contrastive-sharpening knobs.

    Defaults: aggregation temperature 0.05, sharpening temperature 0.01,
    power exponent 2.5, top-p keep fraction 0.005, attenuation factor 0.1.
    """

    tau_agg: float = 0.05
    tau_sharp: float = 0.01
    gamma: float = 2.5
    top_p: float = 0.005
    attenuation: float = 0.1

    def __post_init__(self) -> None:
        if self.tau_agg <= 0 or self.tau_sharp <= 0 or self.gamma <= 0:
            raise ValueError("temperatures and gamma must be positive")
        if not 0.0 < self.top_p < 1.0:
            raise ValueError("top_p must lie in (0, 1)")
        if not 0.0 <= self.attenuation <= 1.0:
            raise ValueError("attenuation must lie in [0, 1]")


@dataclass
class FusionParams:
    """Geometric-mean fusion weight eta in [0, 1] and the shared epsilon."""

    eta: float = 0.5
    eps: float = DEFAULT_EPS

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


class GatedText(NamedTuple):
    """Normalized text embeddings plus the per-token norm gates (diagnostic)."""

    normalized: np.ndarray
    gates: np.ndarray


class ExtrinsicResult(NamedTuple):
    scores: ScoreVector
    no_query: bool


def intrinsic_saliency(attention, eps: float = DEFAULT_EPS) -> ScoreVector:
    """Min-max normalize per-patch attention mass (already head-averaged)."""
    arr = as_scores(attention)
    if arr.size and arr.min() < 0:
        raise ScoreError("attention mass must be non-negative")
    return minmax_normalize(arr, eps)


def project_visual(v, proj: Projector, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Map visual features through the projector and L2-normalize rows."""
    v = as_features(v)
    if v.shape[1] != proj.dim_in:
        raise FeatureError(
            f"visual dimension {v.shape[1]} does not match projector input {proj.dim_in}"
        )
    out = v @ proj.weight.T
    if proj.bias is not None:
        out = out + proj.bias
    return l2_normalize_rows(out, eps)


def gate_text(t_raw, eps: float = DEFAULT_EPS) -> GatedText:
    """Weight text tokens by relative norm, then re-normalize rows.

    The gate g_j = |t_j| / (max_k |t_k| + eps) suppresses low-magnitude
    (stopword-like) tokens. Re-normalization restores unit norm for nonzero
    rows, so the gate's lasting effect is the zero-row convention; the raw
    gates are returned so callers can reuse them as aggregation weights.
    """
    t_raw = as_features(t_raw)
    if t_raw.shape[0] < 1:
        raise FeatureError("text matrix needs at least one row")
    norms = np.sqrt(np.einsum("ij,ij->i", t_raw, t_raw))
    gates = norms / (norms.max() + eps)
    gated = t_raw * gates[:, None]
    return GatedText(l2_normalize_rows(gated, eps), gates)


def aggregate_similarity(s_cross, tau_agg: float = 0.05) -> ScoreVector:
    """Collapse each patch's text-similarity row into one score.

    Per row, a softmax at temperature ``tau_agg`` weights the similarities,
    and the score is the weighted sum (a convex combination of the row).
    """
    if not tau_agg > 0:
        raise ValueError("tau_agg must be positive")
    if np.asarray(s_cross).ndim == 2 and np.asarray(s_cross).shape[1] == 0:
        raise FeatureError("no text tokens")
    s = as_features(s_cross)
    z = s / tau_agg
    z = z - z.max(axis=1, keepdims=True)
    w = np.exp(z)
    w /= w.sum(axis=1, keepdims=True)
    return ScoreVector(np.einsum("ij,ij->i", w, s), "raw")


def sharpen(s_text, params: SharpenParams | None = None, eps: float = DEFAULT_EPS) -> ScoreVector:
    """Multi-stage contrastive sharpening of aggregated similarities.

    Steps: low-temperature softmax over patches, elementwise power, min-max
    rescale, then attenuate everything below the (1 - top_p) quantile and
    min-max rescale once more.
    """
    params = params or SharpenParams()
    s1 = softmax(as_scores(s_text), params.tau_sharp).values
    s2 = s1 ** params.gamma
    s3 = minmax_normalize(s2, eps).values
    t_p = quantile(s3, 1.0 - params.top_p)
    s4 = np.where(s3 >= t_p, s3, params.attenuation * s3)
    return minmax_normalize(s4, eps)


def fuse(intrinsic: ScoreVector, extrinsic: ScoreVector, params: FusionParams | None = None) -> ScoreVector:
    """Blend the two unit-interval channels with a log-domain geometric mean.

    raw[i] = exp((1-eta) ln(intr[i] + eps) + eta ln(extr[i] + eps)), rescaled
    to [0, 1) by min-max normalization.
    """
    params = params or FusionParams()
    if intrinsic.tag != UNIT_INTERVAL or extrinsic.tag != UNIT_INTERVAL:
        raise ScoreError("fusion inputs must be unit-interval tagged")
    a = intrinsic.values
    b = extrinsic.values
    if a.size != b.size:
        raise ScoreError("fusion inputs must have equal length")
    eta = params.eta
    eps = params.eps
    raw = np.exp((1.0 - eta) * np.log(a + eps) + eta * np.log(b + eps))
    return minmax_normalize(raw, eps)


def extrinsic_relevance(
    v,
    t_raw,
    proj: Projector,
    params: SharpenParams | None = None,
    eps: float = DEFAULT_EPS,
) -> ExtrinsicResult:
    """Full query-relevance chain, or a zero vector when there is no query.

    ``t_raw`` may be None or an all-zero matrix; both count as "no query"
    and yield zeros with the flag set, letting the caller fall back to
    attention-only scoring.
    """
    v = as_features(v)
    n = v.shape[0]
    if t_raw is None:
        return ExtrinsicResult(ScoreVector(np.zeros(n), UNIT_INTERVAL), True)
    t_raw = as_features(t_raw)
    if not np.any(t_raw):
        return ExtrinsicResult(ScoreVector(np.zeros(n), UNIT_INTERVAL), True)
    params = params or SharpenParams()
    if t_raw.shape[1] != proj.dim_out:
        raise FeatureError(
            f"text dimension {t_raw.shape[1]} does not match projector output {proj.dim_out}"
        )
    v_proj = project_visual(v, proj, eps)
    t_norm = gate_text(t_raw, eps).normalized
    s_cross = similarity_matrix(v_proj, t_norm)
    s_text = aggregate_similarity(s_cross, params.tau_agg)
    return ExtrinsicResult(sharpen(s_text, params, eps), False)
