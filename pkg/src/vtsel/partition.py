"""Token budget partitioning and diversity-preserving residual pruning.

The budget is split into an "important" set (top fused scores) and a
"diverse" set kept from the remaining candidates by iterative bipartite
pruning: each round splits the residual list into even/odd positions,
scores every even-position token by its maximum similarity to the odd side,
and drops the most redundant ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import DEFAULT_EPS, ScoreVector, as_features, as_scores, l2_normalize_rows
from .relevance import (
    ExtrinsicResult,
    FusionParams,
    Projector,
    SharpenParams,
    extrinsic_relevance,
    fuse,
    intrinsic_saliency,
)

MODES = ("budget", "threshold", "geometric")


@dataclass
class SelectionConfig:
    """Hyperparameters for one selection run.

    ``t_keep`` is the total token budget. ``split_ratio`` controls how much
    of it goes to the important set (round-half-up, so a budget of 33 splits
    17/16). ``mode`` picks the residual-pruning variant: fixed-step budget
    pruning, similarity-threshold pruning, or geometric-fraction pruning.
    """

    t_keep: int
    split_ratio: float = 0.5
    step_k: int = 8
    mode: str = "budget"
    tau_threshold: float = 0.9
    alpha: float = 0.5
    sharpen: SharpenParams = field(default_factory=SharpenParams)
    fusion: FusionParams = field(default_factory=FusionParams)
    eps: float = DEFAULT_EPS

    def __post_init__(self) -> None:
        if self.t_keep < 0:
            raise ValueError("t_keep must be non-negative")
        if not 0.0 <= self.split_ratio <= 1.0:
            raise ValueError("split_ratio must lie in [0, 1]")
        if self.step_k < 1:
            raise ValueError("step_k must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "threshold" and not 0.0 < self.tau_threshold < 1.0:
            raise ValueError("tau_threshold must lie in (0, 1)")
        if self.mode == "geometric" and not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def t_imp(self) -> int:
        # round-half-up keeps odd budgets deterministic (33 -> 17/16)
        return int(np.floor(self.split_ratio * self.t_keep + 0.5))

    @property
    def t_div(self) -> int:
        return self.t_keep - self.t_imp


@dataclass
class SelectionResult:
    """Ordered index sets plus provenance counters for one selection run."""

    important: list[int]
    diverse: list[int]
    fused_scores: ScoreVector
    sim_eval_count: int
    iterations: int
    no_query: bool
    removal_log: list[tuple[int, int]] | None = None

    @property
    def kept(self) -> list[int]:
        return self.important + self.diverse


class PruneResult(NamedTuple):
    kept: list[int]
    sim_evals: int
    iterations: int
    eval_trace: list[int]


class ThresholdPruneResult(NamedTuple):
    kept: list[int]
    removal_log: list[tuple[int, int]]
    sim_evals: int
    iterations: int


def partition_important(fused, t_imp: int) -> tuple[list[int], list[int]]:
    """Stable descending sort of fused scores; ties go to the lower index.

    Returns the top ``t_imp`` indices and the remaining candidates, both in
    sorted order.
    """
    scores = as_scores(fused)
    n = scores.size
    if t_imp > n:
        raise ValueError(f"t_imp={t_imp} exceeds token count {n}")
    order = np.argsort(-scores, kind="stable")
    return list(map(int, order[:t_imp])), list(map(int, order[t_imp:]))


def _bipartite_redundancy(features: np.ndarray, positions: np.ndarray):
    """Max similarity of each even-position member against the odd side.

    Returns (even positions, odd positions, per-even max score, per-even
    argmax position into the odd side, pair count). Empty odd side yields
    empty score arrays.
    """
    even = positions[0::2]
    odd = positions[1::2]
    if odd.size == 0 or even.size == 0:
        return even, odd, np.empty(0), np.empty(0, dtype=np.intp), 0
    sims = features[even] @ features[odd].T
    return even, odd, sims.max(axis=1), sims.argmax(axis=1), even.size * odd.size


def _top_redundant(s_pair: np.ndarray, even: np.ndarray, r: int) -> np.ndarray:
    """Positions of the r most redundant even-side members.

    Ties prefer the later residual position (the lower-ranked candidate).
    """
    order = np.lexsort((-even, -s_pair))
    return even[order[:r]]


def residual_prune(
    candidates: list[int], features, t_div: int, step_k: int = 8
) -> PruneResult:
    """Fixed-step bipartite pruning down to a target residual size.

    ``features`` holds the L2-normalized candidate rows in candidate order.
    Each iteration removes r = min(step_k, excess) of the most redundant
    even-position members. A budget larger than the candidate list returns
    everything unpruned.
    """
    feats = as_features(features)
    if feats.shape[0] != len(candidates):
        raise ValueError("features must have one row per candidate")
    resid = list(range(len(candidates)))
    sim_evals = 0
    iterations = 0
    trace: list[int] = []
    while len(resid) > t_div:
        r = min(step_k, len(resid) - t_div)
        positions = np.asarray(resid, dtype=np.intp)
        even, odd, s_pair, _, evals = _bipartite_redundancy(feats, positions)
        sim_evals += evals
        trace.append(evals)
        iterations += 1
        if odd.size == 0:
            # degenerate single-token residual: drop from the low-score tail
            del resid[-1:]
            continue
        drop = set(map(int, _top_redundant(s_pair, even, min(r, even.size))))
        resid = [p for p in resid if p not in drop]
    return PruneResult(
        [candidates[p] for p in resid], sim_evals, iterations, trace
    )


def residual_prune_geometric(
    candidates: list[int], features, t_div: int, alpha: float = 0.5
) -> PruneResult:
    """Bipartite pruning removing a fixed fraction alpha per iteration.

    Identical to :func:`residual_prune` except the per-iteration removal
    count is r = min(ceil(alpha * |residual|), excess), which realizes a
    geometrically decaying residual size.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    feats = as_features(features)
    if feats.shape[0] != len(candidates):
        raise ValueError("features must have one row per candidate")
    resid = list(range(len(candidates)))
    sim_evals = 0
    iterations = 0
    trace: list[int] = []
    while len(resid) > t_div:
        r = min(int(np.ceil(alpha * len(resid))), len(resid) - t_div)
        positions = np.asarray(resid, dtype=np.intp)
        even, odd, s_pair, _, evals = _bipartite_redundancy(feats, positions)
        sim_evals += evals
        trace.append(evals)
        iterations += 1
        if odd.size == 0:
            del resid[-1:]
            continue
        drop = set(map(int, _top_redundant(s_pair, even, min(r, even.size))))
        resid = [p for p in resid if p not in drop]
    return PruneResult(
        [candidates[p] for p in resid], sim_evals, iterations, trace
    )


def residual_prune_threshold(
    candidates: list[int], features, tau: float
) -> ThresholdPruneResult:
    """Bipartite pruning driven by a similarity threshold instead of a budget.

    Each pass removes every even-position member whose best match on the odd
    side reaches ``tau``; the loop ends on the first pass with no removal.
    The removal log pairs each removed candidate index with its anchor (the
    maximizing odd-side member at removal time), in removal order.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    feats = as_features(features)
    if feats.shape[0] != len(candidates):
        raise ValueError("features must have one row per candidate")
    resid = list(range(len(candidates)))
    removal_log: list[tuple[int, int]] = []
    sim_evals = 0
    iterations = 0
    while True:
        positions = np.asarray(resid, dtype=np.intp)
        even, odd, s_pair, anchors, evals = _bipartite_redundancy(feats, positions)
        sim_evals += evals
        if odd.size == 0 or even.size == 0:
            break
        iterations += 1
        hit = s_pair >= tau
        if not np.any(hit):
            break
        for pos, anchor_col in zip(even[hit], anchors[hit]):
            removal_log.append((candidates[int(pos)], candidates[int(odd[anchor_col])]))
        drop = set(map(int, even[hit]))
        resid = [p for p in resid if p not in drop]
    return ThresholdPruneResult(
        [candidates[p] for p in resid], removal_log, sim_evals, iterations
    )


def select_tokens(
    v,
    attention,
    t_raw,
    proj: Projector,
    cfg: SelectionConfig,
) -> SelectionResult:
    """End-to-end selection: relevance fusion, split, residual pruning.

    With no query (``t_raw`` None or all-zero) the fused score IS the
    intrinsic score, so the important set degrades to attention-only top-k.
    When the budget covers all tokens, everything is returned as important.
    """
    v = as_features(v)
    n = v.shape[0]
    attn = as_scores(attention)
    if attn.size != n:
        raise ValueError("attention length must match the number of visual tokens")

    intrinsic = intrinsic_saliency(attn, cfg.eps)
    ext: ExtrinsicResult = extrinsic_relevance(v, t_raw, proj, cfg.sharpen, cfg.eps)
    if ext.no_query:
        fused = intrinsic
    else:
        fused = fuse(intrinsic, ext.scores, cfg.fusion)

    if n <= cfg.t_keep:
        important, _ = partition_important(fused, n)
        return SelectionResult(important, [], fused, 0, 0, ext.no_query)

    important, candidates = partition_important(fused, cfg.t_imp)
    cand_feats = l2_normalize_rows(v[candidates], cfg.eps)

    removal_log = None
    if cfg.mode == "budget":
        pruned = residual_prune(candidates, cand_feats, cfg.t_div, cfg.step_k)
        diverse, sim_evals, iterations = pruned.kept, pruned.sim_evals, pruned.iterations
    elif cfg.mode == "geometric":
        pruned = residual_prune_geometric(candidates, cand_feats, cfg.t_div, cfg.alpha)
        diverse, sim_evals, iterations = pruned.kept, pruned.sim_evals, pruned.iterations
    else:
        pruned = residual_prune_threshold(candidates, cand_feats, cfg.tau_threshold)
        diverse, sim_evals, iterations = pruned.kept, pruned.sim_evals, pruned.iterations
        removal_log = pruned.removal_log

    return SelectionResult(
        important, diverse, fused, sim_evals, iterations, ext.no_query, removal_log
    )
