"""Deterministic result documents: JSON-shaped text with fixed key order.

Floats are emitted with 9 significant digits (prune_ratio with 4 decimals),
so identical runs produce byte-identical files. The documents stay valid
JSON for downstream parsers.
"""

from __future__ import annotations

import json
from pathlib import Path

from .partition import SelectionConfig, SelectionResult


class _Raw:
    """Pre-formatted number that the emitter passes through verbatim."""

    def __init__(self, text: str):
        self.text = text


def _fmt_float(x: float) -> str:
    return "%.9g" % float(x)


def _emit(value) -> str:
    if isinstance(value, _Raw):
        return value.text
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _fmt_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_emit(v) for v in value) + "]"
    if isinstance(value, dict):
        parts = (f"{json.dumps(k)}: {_emit(v)}" for k, v in value.items())
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def config_echo(cfg: SelectionConfig, seed: int) -> dict:
    """Effective configuration after defaulting; insertion order is the schema."""
    return {
        "keep": cfg.t_keep,
        "split_ratio": cfg.split_ratio,
        "step_k": cfg.step_k,
        "mode": cfg.mode,
        "tau_threshold": cfg.tau_threshold if cfg.mode == "threshold" else None,
        "alpha": cfg.alpha if cfg.mode == "geometric" else None,
        "eta": cfg.fusion.eta,
        "tau_agg": cfg.sharpen.tau_agg,
        "tau_sharp": cfg.sharpen.tau_sharp,
        "gamma": cfg.sharpen.gamma,
        "top_p": cfg.sharpen.top_p,
        "attenuation": cfg.sharpen.attenuation,
        "eps": cfg.eps,
        "seed": seed,
    }


def render_result(result: SelectionResult, cfg: SelectionConfig, seed: int = 0) -> str:
    n = len(result.fused_scores)
    kept = result.kept
    prune_ratio = 1.0 - len(kept) / n if n else 0.0
    doc = {
        "kept_indices": kept,
        "important_indices": result.important,
        "diverse_indices": result.diverse,
        "fused_scores": [float(x) for x in result.fused_scores.values],
        "config_echo": config_echo(cfg, seed),
        "stats": {
            "n_tokens": n,
            "kept": len(kept),
            "sim_evals": result.sim_eval_count,
            "iterations": result.iterations,
            "prune_ratio": _Raw("%.4f" % prune_ratio),
            "no_query": result.no_query,
        },
    }
    return _emit(doc) + "\n"


def write_result(result: SelectionResult, path: str | Path, cfg: SelectionConfig, seed: int = 0) -> None:
    Path(path).write_bytes(render_result(result, cfg, seed).encode("ascii"))


def read_result(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="ascii"))
