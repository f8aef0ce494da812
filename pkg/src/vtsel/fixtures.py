"""Seeded synthetic fixtures: planted feature clusters on a token grid.

The grid is partitioned into rectangular blocks, one per cluster. Cluster
members are unit vectors within a configurable cosine of their center, the
attention channel is biased toward a distractor cluster, and the text
embedding is aligned with the query cluster's center through an
identity-block projector. Everything is drawn from a PCG64 stream and
quantized to float32, so in-memory fixtures match their on-disk form
byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import GroundTruthBox, TokenGrid
from .relevance import Projector

# keep sampled member-center cosines clear of the floor so float32
# quantization cannot push them below it
_FLOOR_MARGIN = 1e-5


@dataclass
class SyntheticFixture:
    visual: np.ndarray
    attention: np.ndarray
    text: np.ndarray
    projector: Projector
    grid: TokenGrid
    box: GroundTruthBox
    centers: np.ndarray
    cluster_of: np.ndarray
    query_cluster: int
    distractor_cluster: int
    intra_cosine_floor: float
    seed: int

    def cluster_box(self, cluster: int) -> GroundTruthBox:
        return _block_box(self.grid, _block_layout(self.grid, len(self.centers)), cluster)


def _grid_for(n_tokens: int) -> TokenGrid:
    """Most-square grid whose cell count is exactly n_tokens."""
    h = 1
    for d in range(1, int(np.sqrt(n_tokens)) + 1):
        if n_tokens % d == 0:
            h = d
    return TokenGrid(h, n_tokens // h)


def _block_layout(grid: TokenGrid, n_clusters: int) -> tuple[list[int], list[int]]:
    """Band sizes splitting the grid into a br x bc rectangle of blocks."""
    br = 1
    for d in range(1, int(np.sqrt(n_clusters)) + 1):
        if n_clusters % d == 0:
            br = d
    bc = n_clusters // br
    if br > grid.height or bc > grid.width:
        raise ValueError(
            f"cannot tile a {grid.height}x{grid.width} grid with {n_clusters} blocks"
        )
    rows = [grid.height // br + (1 if i < grid.height % br else 0) for i in range(br)]
    cols = [grid.width // bc + (1 if i < grid.width % bc else 0) for i in range(bc)]
    return rows, cols


def _block_box(grid: TokenGrid, layout: tuple[list[int], list[int]], cluster: int) -> GroundTruthBox:
    rows, cols = layout
    bc = len(cols)
    bi, bj = divmod(cluster, bc)
    r0 = sum(rows[:bi])
    c0 = sum(cols[:bj])
    return GroundTruthBox(r0, c0, r0 + rows[bi] - 1, c0 + cols[bj] - 1)


def _cluster_assignment(grid: TokenGrid, layout: tuple[list[int], list[int]]) -> np.ndarray:
    rows, cols = layout
    row_band = np.repeat(np.arange(len(rows)), rows)
    col_band = np.repeat(np.arange(len(cols)), cols)
    cell_rows = np.arange(grid.size) // grid.width
    cell_cols = np.arange(grid.size) % grid.width
    return row_band[cell_rows] * len(cols) + col_band[cell_cols]


def _unit_sphere(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _separated_centers(
    rng: np.random.Generator, count: int, dim: int, max_sim: float | None
) -> np.ndarray:
    """Cluster centers, greedily resampled to respect a pairwise cosine cap."""
    if max_sim is None:
        return _unit_sphere(rng, count, dim)
    centers = np.empty((count, dim))
    for k in range(count):
        for _ in range(5000):
            cand = _unit_sphere(rng, 1, dim)[0]
            if k == 0 or float((centers[:k] @ cand).max()) <= max_sim:
                centers[k] = cand
                break
        else:
            raise ValueError(
                f"could not place {count} centers with pairwise cosine <= {max_sim} in {dim} dims"
            )
    return centers


def _member_around(rng: np.random.Generator, center: np.ndarray, cos_floor: float) -> np.ndarray:
    """Unit vector with cosine to ``center`` drawn uniformly from [floor, 1]."""
    dim = center.size
    cos_t = rng.uniform(min(cos_floor + _FLOOR_MARGIN, 1.0), 1.0)
    raw = rng.standard_normal(dim)
    ortho = raw - (raw @ center) * center
    norm = np.linalg.norm(ortho)
    if norm < 1e-12:
        return center.copy()
    ortho /= norm
    return cos_t * center + np.sqrt(max(0.0, 1.0 - cos_t * cos_t)) * ortho


def _quantize(arr: np.ndarray) -> np.ndarray:
    """Round-trip through float32 so memory and disk agree exactly."""
    return arr.astype(np.float32).astype(np.float64)


def synth_fixture(
    seed: int,
    n_tokens: int,
    dim: int,
    n_clusters: int,
    intra_cosine_floor: float,
    query_cluster: int,
    distractor_cluster: int | None = None,
    center_max_sim: float | None = 0.3,
    text_rows: int = 2,
) -> SyntheticFixture:
    """Deterministic planted-cluster fixture for the selection pipeline.

    ``center_max_sim`` caps pairwise center cosines via rejection sampling
    (pass None to disable). The attention channel is high on the distractor
    cluster and low elsewhere; the first text row is the query cluster's
    center, followed by low-norm noise rows.
    """
    if not 0.0 < intra_cosine_floor < 1.0:
        raise ValueError("intra_cosine_floor must lie in (0, 1)")
    if n_clusters > n_tokens:
        raise ValueError("n_clusters cannot exceed n_tokens")
    if not 0 <= query_cluster < n_clusters:
        raise ValueError("query_cluster out of range")
    if distractor_cluster is None:
        distractor_cluster = (query_cluster + 1) % n_clusters
    if not 0 <= distractor_cluster < n_clusters:
        raise ValueError("distractor_cluster out of range")

    rng = np.random.Generator(np.random.PCG64(seed))
    grid = _grid_for(n_tokens)
    layout = _block_layout(grid, n_clusters)
    cluster_of = _cluster_assignment(grid, layout)

    centers = _separated_centers(rng, n_clusters, dim, center_max_sim)
    visual = np.empty((n_tokens, dim))
    for i in range(n_tokens):
        visual[i] = _member_around(rng, centers[cluster_of[i]], intra_cosine_floor)

    attention = np.where(
        cluster_of == distractor_cluster,
        rng.uniform(0.55, 1.0, size=n_tokens),
        rng.uniform(0.02, 0.25, size=n_tokens),
    )

    text = np.zeros((max(1, text_rows), dim))
    text[0] = centers[query_cluster]
    for j in range(1, text.shape[0]):
        text[j] = 0.2 * _unit_sphere(rng, 1, dim)[0]

    weight = np.eye(dim)
    box = _block_box(grid, layout, query_cluster)

    return SyntheticFixture(
        visual=_quantize(visual),
        attention=_quantize(attention),
        text=_quantize(text),
        projector=Projector(_quantize(weight)),
        grid=grid,
        box=box,
        centers=_quantize(centers),
        cluster_of=cluster_of,
        query_cluster=query_cluster,
        distractor_cluster=distractor_cluster,
        intra_cosine_floor=intra_cosine_floor,
        seed=seed,
    )
