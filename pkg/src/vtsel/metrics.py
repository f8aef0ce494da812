"""Selection-quality metrics over a square token grid with ground-truth boxes.

Tokens are grid cells in row-major order; a ground-truth box is an inclusive
rectangle of cells. The three metrics capture spatial alignment (centroid
distance to the box center), score concentration (Shannon entropy), and
semantic overlap (cell IoU between the selection and the box).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_scores


@dataclass(frozen=True)
class TokenGrid:
    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError("grid dimensions must be positive")

    @property
    def size(self) -> int:
        return self.height * self.width

    def cell(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.size:
            raise ValueError(f"token index {index} outside grid of {self.size} cells")
        return index // self.width, index % self.width


@dataclass(frozen=True)
class GroundTruthBox:
    """Inclusive cell-coordinate rectangle."""

    row_min: int
    col_min: int
    row_max: int
    col_max: int

    def __post_init__(self) -> None:
        if not (0 <= self.row_min <= self.row_max and 0 <= self.col_min <= self.col_max):
            raise ValueError("box coordinates must be ordered and non-negative")

    def validate_for(self, grid: TokenGrid) -> None:
        if self.row_max >= grid.height or self.col_max >= grid.width:
            raise ValueError("box extends beyond the grid")

    @property
    def center(self) -> tuple[float, float]:
        return (self.row_min + self.row_max) / 2.0, (self.col_min + self.col_max) / 2.0

    def cells(self, grid: TokenGrid) -> set[int]:
        self.validate_for(grid)
        return {
            r * grid.width + c
            for r in range(self.row_min, self.row_max + 1)
            for c in range(self.col_min, self.col_max + 1)
        }


def attention_distance(scores, grid: TokenGrid, box: GroundTruthBox) -> float:
    """Euclidean distance from the score-weighted centroid to the box center."""
    arr = as_scores(scores)
    if arr.size != grid.size:
        raise ValueError("score length must equal the grid size")
    box.validate_for(grid)
    total = float(arr.sum())
    if total <= 0.0:
        raise ValueError("no focus mass")
    rows = np.arange(grid.size) // grid.width
    cols = np.arange(grid.size) % grid.width
    cr = float((arr * rows).sum()) / total
    cc = float((arr * cols).sum()) / total
    br, bc = box.center
    return float(np.hypot(cr - br, cc - bc))


def score_entropy(scores) -> float:
    """Shannon entropy (nats) of the sum-normalized score distribution."""
    arr = as_scores(scores)
    if arr.size and arr.min() < 0:
        raise ValueError("scores must be non-negative")
    total = float(arr.sum())
    if total <= 0.0:
        raise ValueError("cannot normalize an all-zero score vector")
    p = arr / total
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def token_box_iou(selected, grid: TokenGrid, box: GroundTruthBox) -> float:
    """Cell-level intersection over union between a selection and the box."""
    box_cells = box.cells(grid)
    sel = set()
    for idx in selected:
        grid.cell(int(idx))  # bounds check
        sel.add(int(idx))
    if not sel:
        return 0.0
    union = len(sel | box_cells)
    return len(sel & box_cells) / union
