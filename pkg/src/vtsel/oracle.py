"""Reference re-implementation of fixed-step residual pruning, for tests.

Deliberately naive and shares no code with :mod:`vtsel.partition`: each
iteration recomputes the full pairwise similarity matrix of the residual
set, then walks the even/odd split with explicit loops. Capped at desk
scale so it can only be used as a verification oracle.
"""

from __future__ import annotations

import numpy as np

ORACLE_MAX_CANDIDATES = 256


def oracle_residual_prune(
    candidates: list[int], features, t_div: int, step_k: int = 8
) -> list[int]:
    """Slow literal trace of the fixed-step pruning loop.

    Returns the surviving candidate indices in candidate order; must agree
    exactly with ``residual_prune`` on any instance within the size cap.
    """
    if len(candidates) > ORACLE_MAX_CANDIDATES:
        raise ValueError(
            f"oracle capped at {ORACLE_MAX_CANDIDATES} candidates, got {len(candidates)}"
        )
    feats = np.asarray(features, dtype=np.float64)
    resid = list(range(len(candidates)))
    while len(resid) > t_div:
        r = min(step_k, len(resid) - t_div)
        rows = feats[resid]
        full_sims = rows @ rows.T  # recomputed from scratch every pass
        evens = [i for i in range(len(resid)) if i % 2 == 0]
        odds = [i for i in range(len(resid)) if i % 2 == 1]
        if not odds:
            resid.pop()
            continue
        scored = []
        for i in evens:
            best = max(full_sims[i][j] for j in odds)
            scored.append((best, resid[i]))
        # most redundant first; equal scores drop the later (lower-ranked) position
        scored.sort(key=lambda t: (-t[0], -t[1]))
        doomed = {pos for _, pos in scored[: min(r, len(scored))]}
        resid = [p for p in resid if p not in doomed]
    return [candidates[p] for p in resid]
