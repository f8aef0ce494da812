"""Shared numerical primitives: normalizations, softmax, quantile, similarity.

All functions are pure and deterministic for fixed inputs. Score vectors
carry a range tag so downstream stages can assert what they receive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPS = 1e-6

RAW = "raw"
UNIT_INTERVAL = "unit-interval"
SIMPLEX = "simplex"

_TAGS = (RAW, UNIT_INTERVAL, SIMPLEX)

# Tolerance used when validating tagged vectors (simplex sum, unit bounds).
_TAG_TOL = 1e-6


class ScoreError(ValueError):
    """Raised when a score vector violates its declared contract."""


class FeatureError(ValueError):
    """Raised when a feature matrix violates its construction invariants."""


@dataclass
class ScoreVector:
    """A length-N vector of per-token scores with a declared value range.

    ``tag`` is one of ``raw`` (unrestricted), ``unit-interval`` (all values
    in [0, 1]) or ``simplex`` (non-negative, sums to 1).
    """

    values: np.ndarray
    tag: str = RAW

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ScoreError("score vector must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ScoreError("score vector contains non-finite values")
        if self.tag not in _TAGS:
            raise ScoreError(f"unknown range tag {self.tag!r}")
        if self.tag == UNIT_INTERVAL:
            if self.values.size and (
                self.values.min() < -_TAG_TOL or self.values.max() > 1.0 + _TAG_TOL
            ):
                raise ScoreError("unit-interval vector has values outside [0, 1]")
        elif self.tag == SIMPLEX:
            if self.values.size == 0 or self.values.min() < -_TAG_TOL:
                raise ScoreError("simplex vector must be non-empty and non-negative")
            if abs(float(self.values.sum()) - 1.0) > _TAG_TOL:
                raise ScoreError("simplex vector does not sum to 1")

    def __len__(self) -> int:
        return int(self.values.size)


def as_scores(v) -> np.ndarray:
    """Coerce a ScoreVector or array-like to a validated float64 1-D array."""
    if isinstance(v, ScoreVector):
        return v.values
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ScoreError("score vector must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ScoreError("score vector contains non-finite values")
    return arr


def as_features(m) -> np.ndarray:
    """Coerce an array-like to a validated 2-D float64 feature matrix.

    Rows are tokens, columns are embedding coordinates. Zero rows are legal;
    zero columns are not.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise FeatureError("feature matrix must be two-dimensional")
    if arr.shape[1] < 1:
        raise FeatureError("feature matrix needs at least one column")
    if not np.all(np.isfinite(arr)):
        raise FeatureError("feature matrix contains non-finite values")
    return arr


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    return eps


def minmax_normalize(v, eps: float = DEFAULT_EPS) -> ScoreVector:
    """Rescale to [0, 1) via (v - min) / (max - min + eps).

    Constant input maps to all zeros; the minimum always maps to exactly 0.
    """
    eps = _check_eps(eps)
    arr = as_scores(v)
    if arr.size == 0:
        raise ScoreError("empty score vector")
    lo = arr.min()
    hi = arr.max()
    out = (arr - lo) / (hi - lo + eps)
    return ScoreVector(out, UNIT_INTERVAL)


def l2_normalize_rows(m, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Scale each row to unit Euclidean norm; all-zero rows stay zero.

    The denominator is max(norm, eps), so rows with norm >= eps come out
    exactly unit length and zero rows pass through unchanged.
    """
    eps = _check_eps(eps)
    arr = as_features(m)
    norms = np.sqrt(np.einsum("ij,ij->i", arr, arr))
    return arr / np.maximum(norms, eps)[:, None]


def softmax(v, temperature: float = 1.0) -> ScoreVector:
    """Temperature-scaled softmax, stabilized by max subtraction."""
    if not float(temperature) > 0.0:
        raise ValueError("temperature must be positive")
    arr = as_scores(v)
    if arr.size == 0:
        raise ScoreError("empty score vector")
    z = arr / float(temperature)
    z = z - z.max()
    e = np.exp(z)
    return ScoreVector(e / e.sum(), SIMPLEX)


def quantile(v, q: float) -> float:
    """Linear-interpolation quantile: h = (n-1)q between adjacent order stats."""
    q = float(q)
    if q < 0.0 or q > 1.0:
        raise ValueError("quantile level must lie in [0, 1]")
    arr = as_scores(v)
    if arr.size == 0:
        raise ScoreError("empty score vector")
    return float(np.quantile(arr, q, method="linear"))


def similarity_matrix(a, b) -> np.ndarray:
    """Dense dot-product similarity: out[i, j] = <a_i, b_j>."""
    a = as_features(a)
    b = as_features(b)
    if a.shape[1] != b.shape[1]:
        raise FeatureError(
            f"column mismatch: {a.shape[1]} vs {b.shape[1]} feature dimensions"
        )
    return a @ b.T
