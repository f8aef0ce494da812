"""Empirical checks of the pruning guarantees: coverage, stability, cost.

Cosine dissimilarity d(u, v) = 1 - <u, v> over unit-norm rows is the working
metric. Threshold pruning at tau implies every removed token sits within
delta = 1 - tau of its anchor; these checkers measure how far that local
fact carries: the realized cover radius of the retained set, its behaviour
under metric perturbation, and the similarity-evaluation cost of pruning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_features
from .partition import residual_prune, residual_prune_geometric

_UNIT_TOL = 1e-6


@dataclass
class CoverReport:
    """Realized coverage of the retained set over all tokens."""

    delta_nominal: float
    cover_radius: float
    max_chain_depth: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class StabilityReport:
    """Cover radius re-measured under a perturbed metric."""

    epsilon_metric: float
    cover_radius_perturbed: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.cover_radius_perturbed <= self.bound + 1e-9


@dataclass
class CostReport:
    """Similarity-evaluation count for one pruning run at size n."""

    n: int
    mode: str
    sim_evals: int
    predicted: float | None
    ratio: float | None


@dataclass
class CostProbe:
    reports: list[CostReport]
    growth_exponent: float | None


def _require_unit_rows(feats: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", feats, feats))
    if norms.size and np.max(np.abs(norms - 1.0)) > _UNIT_TOL:
        raise ValueError("coverage checks require unit-norm feature rows")
    return feats


def chain_depths(removal_log: list[tuple[int, int]]) -> dict[int, int]:
    """Hops from each removed token to a retained anchor.

    An anchor that is itself removed later extends the chain; the log is in
    removal order, so chains only point forward in time and cannot cycle.
    """
    anchor_of = dict(removal_log)
    depths: dict[int, int] = {}

    def depth(tok: int) -> int:
        if tok in depths:
            return depths[tok]
        anchor = anchor_of[tok]
        d = 1 + depth(anchor) if anchor in anchor_of else 1
        depths[tok] = d
        return d

    for removed, _ in removal_log:
        depth(removed)
    return depths


def check_cover(
    retained: list[int],
    pruned: list[int],
    features,
    delta: float,
    removal_log: list[tuple[int, int]] | None = None,
) -> CoverReport:
    """Measure the max cosine distance from any pruned token to the retained set.

    With a removal log, each pruned token is held to the chain bound
    depth * delta; without one, the nominal delta is used and the depth is
    reported as 0 (unknown).
    """
    feats = _require_unit_rows(as_features(features))
    if pruned and not retained:
        raise ValueError("cannot cover pruned tokens with an empty retained set")
    if not pruned:
        return CoverReport(delta, 0.0, 0, 0)

    sims = feats[np.asarray(pruned, dtype=np.intp)] @ feats[np.asarray(retained, dtype=np.intp)].T
    dists = 1.0 - sims.max(axis=1)
    cover_radius = float(dists.max())

    if removal_log is None:
        violations = int(np.sum(dists > delta + 1e-9))
        return CoverReport(delta, cover_radius, 0, violations)

    depths = chain_depths(removal_log)
    max_depth = max(depths.values(), default=0)
    violations = 0
    for tok, dist in zip(pruned, dists):
        bound = depths.get(tok, 1) * delta
        if dist > bound + 1e-9:
            violations += 1
    return CoverReport(delta, cover_radius, max_depth, violations)


def metric_perturbation(features, features_perturbed, max_exhaustive: int = 256) -> float:
    """Largest |d - d'| over token pairs (exhaustive up to ``max_exhaustive`` rows).

    Beyond the cap, an evenly strided row subset is compared exhaustively so
    the measurement stays deterministic.
    """
    a = _require_unit_rows(as_features(features))
    b = _require_unit_rows(as_features(features_perturbed))
    if a.shape != b.shape:
        raise ValueError("perturbed features must match the original shape")
    n = a.shape[0]
    if n > max_exhaustive:
        idx = np.linspace(0, n - 1, max_exhaustive).astype(np.intp)
        a, b = a[idx], b[idx]
    # |d - d'| = |<u,v> - <u',v'>| pairwise
    diff = np.abs(a @ a.T - b @ b.T)
    return float(diff.max(initial=0.0))


def check_stability(
    retained: list[int],
    features,
    features_perturbed,
    delta: float,
) -> StabilityReport:
    """Re-measure coverage under a perturbed metric against the delta + eps bound."""
    feats = _require_unit_rows(as_features(features))
    pert = _require_unit_rows(as_features(features_perturbed))
    if feats.shape != pert.shape:
        raise ValueError("perturbed features must match the original shape")
    eps_metric = metric_perturbation(feats, pert)
    all_idx = set(range(feats.shape[0]))
    pruned = sorted(all_idx - set(retained))
    if pruned:
        sims = pert[np.asarray(pruned, dtype=np.intp)] @ pert[np.asarray(retained, dtype=np.intp)].T
        radius = float((1.0 - sims.max(axis=1)).max())
    else:
        radius = 0.0
    return StabilityReport(eps_metric, radius, delta + eps_metric)


def geometric_series_cost(n: int, alpha: float) -> float:
    """Closed-form bipartite cost model: n^2/4 * 1/(1 - (1-alpha)^2)."""
    return n * n / 4.0 / (1.0 - (1.0 - alpha) ** 2)


def _redundant_features(n: int, dim: int, seed: int) -> np.ndarray:
    """Unit-norm rows drawn around a few shared directions (high redundancy)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n_centers = max(2, n // 32)
    centers = rng.standard_normal((n_centers, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rows = centers[rng.integers(0, n_centers, size=n)] + 0.05 * rng.standard_normal((n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def probe_cost(
    n_values: list[int],
    mode: str = "geometric",
    alpha_or_k: float = 0.5,
    t_div: int = 16,
    dim: int = 16,
    seed: int = 0,
) -> CostProbe:
    """Run residual pruning at each n and compare counters to the cost model.

    Geometric mode reports the measured/predicted ratio against the closed
    form; budget mode has no closed form, so only raw counts are reported.
    Either way a log-log growth exponent is fitted when two or more sizes
    are probed.
    """
    if mode not in ("geometric", "budget"):
        raise ValueError("probe mode must be 'geometric' or 'budget'")
    reports = []
    for n in n_values:
        feats = _redundant_features(n, dim, seed + n)
        cands = list(range(n))
        if mode == "geometric":
            res = residual_prune_geometric(cands, feats, t_div, float(alpha_or_k))
            predicted = geometric_series_cost(n, float(alpha_or_k))
            ratio = res.sim_evals / predicted
        else:
            res = residual_prune(cands, feats, t_div, int(alpha_or_k))
            predicted = None
            ratio = None
        reports.append(CostReport(n, mode, res.sim_evals, predicted, ratio))
    exponent = None
    if len(reports) >= 2 and all(r.sim_evals > 0 for r in reports):
        logs_n = np.log([r.n for r in reports])
        logs_c = np.log([r.sim_evals for r in reports])
        exponent = float(np.polyfit(logs_n, logs_c, 1)[0])
    return CostProbe(reports, exponent)
