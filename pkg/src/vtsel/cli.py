"""Command-line surface: select / synth / verify / metrics / bench.

Exit codes: 0 success, 1 usage error, 2 data error (bad files, shape or
format violations).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import DEFAULT_EPS, FeatureError, ScoreError, l2_normalize_rows
from .fixtures import synth_fixture
from .metrics import GroundTruthBox, TokenGrid, attention_distance, score_entropy, token_box_iou
from .partition import (
    SelectionConfig,
    residual_prune_threshold,
    select_tokens,
)
from .relevance import FusionParams, Projector, SharpenParams
from .results import read_result, write_result
from .tensorfile import TensorFormatError, read_tensor, write_tensor
from .theory import check_cover, check_stability, probe_cost

USAGE_ERROR = 1
DATA_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtsel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sel = sub.add_parser("select", help="run the selection pipeline on tensor files")
    sel.add_argument("--visual", required=True)
    sel.add_argument("--attention", required=True)
    sel.add_argument("--text", default=None)
    sel.add_argument("--projector", required=True)
    sel.add_argument("--keep", type=int, required=True)
    sel.add_argument("--split", type=float, default=0.5)
    sel.add_argument("--eta", type=float, default=0.5)
    sel.add_argument("--tau-agg", type=float, default=0.05)
    sel.add_argument("--tau-sharp", type=float, default=0.01)
    sel.add_argument("--gamma", type=float, default=2.5)
    sel.add_argument("--top-p", type=float, default=0.005)
    sel.add_argument("--attenuation", type=float, default=0.1)
    sel.add_argument("--step-k", type=int, default=8)
    sel.add_argument("--mode", choices=["budget", "threshold", "geometric"], default="budget")
    sel.add_argument("--tau-threshold", type=float, default=0.9)
    sel.add_argument("--alpha", type=float, default=0.5)
    sel.add_argument("--eps", type=float, default=DEFAULT_EPS)
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--out", required=True)

    syn = sub.add_parser("synth", help="emit a seeded synthetic fixture")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--tokens", type=int, default=576)
    syn.add_argument("--dim", type=int, default=16)
    syn.add_argument("--clusters", type=int, default=9)
    syn.add_argument("--cosine-floor", type=float, default=0.97)
    syn.add_argument("--query-cluster", type=int, default=0)
    syn.add_argument("--distractor-cluster", type=int, default=None)
    syn.add_argument("--out-dir", required=True)

    ver = sub.add_parser("verify", help="coverage / stability / cost probes")
    ver.add_argument("--mode", choices=["cover", "stability", "cost"], required=True)
    ver.add_argument("--tau", type=float, default=0.9)
    ver.add_argument("--trials", type=int, default=20)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--tokens", type=int, default=96)
    ver.add_argument("--dim", type=int, default=16)
    ver.add_argument("--clusters", type=int, default=8)
    ver.add_argument("--cosine-floor", type=float, default=None)
    ver.add_argument("--noise", type=float, default=0.01)
    ver.add_argument("--cost-mode", choices=["geometric", "budget"], default="geometric")
    ver.add_argument("--alpha", type=float, default=0.5)
    ver.add_argument("--step-k", type=int, default=8)
    ver.add_argument("--sizes", default="128,256,512")
    ver.add_argument("--t-div", type=int, default=16)

    met = sub.add_parser("metrics", help="score a result file against a box file")
    met.add_argument("--result", required=True)
    met.add_argument("--boxes", required=True)

    ben = sub.add_parser("bench", help="sweep token budgets over synthetic fixtures")
    ben.add_argument("--budgets", default="128,64,32")
    ben.add_argument("--trials", type=int, default=5)
    ben.add_argument("--tokens", type=int, default=576)
    ben.add_argument("--dim", type=int, default=16)
    ben.add_argument("--clusters", type=int, default=9)
    ben.add_argument("--cosine-floor", type=float, default=0.97)
    ben.add_argument("--seed", type=int, default=0)
    return parser


def _config_from_args(args) -> SelectionConfig:
    return SelectionConfig(
        t_keep=args.keep,
        split_ratio=args.split,
        step_k=args.step_k,
        mode=args.mode,
        tau_threshold=args.tau_threshold,
        alpha=args.alpha,
        sharpen=SharpenParams(
            tau_agg=args.tau_agg,
            tau_sharp=args.tau_sharp,
            gamma=args.gamma,
            top_p=args.top_p,
            attenuation=args.attenuation,
        ),
        fusion=FusionParams(eta=args.eta, eps=args.eps),
        eps=args.eps,
    )


def _cmd_select(args) -> int:
    visual = read_tensor(args.visual)
    attention = read_tensor(args.attention)
    text = read_tensor(args.text) if args.text else None
    weight = read_tensor(args.projector)
    cfg = _config_from_args(args)
    result = select_tokens(visual, attention, text, Projector(weight), cfg)
    write_result(result, args.out, cfg, args.seed)
    print(
        f"kept {len(result.kept)}/{len(result.fused_scores)} tokens "
        f"({len(result.important)} important, {len(result.diverse)} diverse) -> {args.out}"
    )
    return 0


def _cmd_synth(args) -> int:
    fx = synth_fixture(
        seed=args.seed,
        n_tokens=args.tokens,
        dim=args.dim,
        n_clusters=args.clusters,
        intra_cosine_floor=args.cosine_floor,
        query_cluster=args.query_cluster,
        distractor_cluster=args.distractor_cluster,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(fx.visual, out / "visual.fvlm")
    write_tensor(fx.attention, out / "attention.fvlm")
    write_tensor(fx.text, out / "text.fvlm")
    write_tensor(fx.projector.weight, out / "projector.fvlm")
    meta = {
        "grid": {"height": fx.grid.height, "width": fx.grid.width},
        "box": {
            "row_min": fx.box.row_min,
            "col_min": fx.box.col_min,
            "row_max": fx.box.row_max,
            "col_max": fx.box.col_max,
        },
        "query_cluster": fx.query_cluster,
        "distractor_cluster": fx.distractor_cluster,
        "n_clusters": int(fx.centers.shape[0]),
        "seed": fx.seed,
    }
    (out / "boxes.json").write_bytes(
        (json.dumps(meta, indent=2) + "\n").encode("ascii")
    )
    print(f"fixture seed={args.seed} tokens={args.tokens} -> {out}")
    return 0


def _floor_for_tau(tau: float) -> float:
    # mutual intra-cluster coverage: pairwise cosine >= 2f^2 - 1 >= tau
    return min(0.999, float(np.sqrt((1.0 + tau) / 2.0)) + 0.01)


def _cmd_verify(args) -> int:
    if args.mode == "cost":
        sizes = [int(s) for s in args.sizes.split(",") if s]
        alpha_or_k = args.alpha if args.cost_mode == "geometric" else args.step_k
        probe = probe_cost(sizes, args.cost_mode, alpha_or_k, t_div=args.t_div, seed=args.seed)
        for rep in probe.reports:
            if rep.predicted is None:
                print(f"n={rep.n} mode={rep.mode} sim_evals={rep.sim_evals}")
            else:
                print(
                    f"n={rep.n} mode={rep.mode} sim_evals={rep.sim_evals} "
                    f"predicted={rep.predicted:.1f} ratio={rep.ratio:.4f}"
                )
        if probe.growth_exponent is not None:
            print(f"log-log growth exponent: {probe.growth_exponent:.3f}")
        return 0

    tau = args.tau
    floor = args.cosine_floor if args.cosine_floor is not None else _floor_for_tau(tau)
    delta = 1.0 - tau
    failures = 0
    for trial in range(args.trials):
        fx = synth_fixture(
            seed=args.seed + trial,
            n_tokens=args.tokens,
            dim=args.dim,
            n_clusters=args.clusters,
            intra_cosine_floor=floor,
            query_cluster=trial % args.clusters,
        )
        feats = l2_normalize_rows(fx.visual)
        all_idx = list(range(args.tokens))
        pruned_res = residual_prune_threshold(all_idx, feats, tau)
        retained = pruned_res.kept
        pruned = sorted(set(all_idx) - set(retained))

        if args.mode == "cover":
            lemma_bad = sum(
                1
                for rem, anc in pruned_res.removal_log
                if float(feats[rem] @ feats[anc]) < tau
            )
            rep = check_cover(retained, pruned, feats, delta, pruned_res.removal_log)
            ok = lemma_bad == 0 and (rep.max_chain_depth != 1 or rep.cover_radius <= delta + 1e-9)
            failures += 0 if ok else 1
            print(
                f"trial={trial} retained={len(retained)} pruned={len(pruned)} "
                f"cover_radius={rep.cover_radius:.6f} depth={rep.max_chain_depth} "
                f"lemma_violations={lemma_bad} {'ok' if ok else 'FAIL'}"
            )
        else:
            rng = np.random.Generator(np.random.PCG64(1_000_003 + args.seed + trial))
            noise = args.noise * rng.standard_normal(feats.shape)
            pert = l2_normalize_rows(feats + noise)
            rep = check_stability(retained, feats, pert, delta)
            failures += 0 if rep.passed else 1
            print(
                f"trial={trial} eps_metric={rep.epsilon_metric:.6f} "
                f"perturbed_radius={rep.cover_radius_perturbed:.6f} "
                f"bound={rep.bound:.6f} {'ok' if rep.passed else 'FAIL'}"
            )
    print(f"{args.mode}: {args.trials - failures}/{args.trials} trials ok")
    return 0 if failures == 0 else DATA_ERROR


def _cmd_metrics(args) -> int:
    doc = read_result(args.result)
    meta = json.loads(Path(args.boxes).read_text(encoding="ascii"))
    grid = TokenGrid(meta["grid"]["height"], meta["grid"]["width"])
    b = meta["box"]
    box = GroundTruthBox(b["row_min"], b["col_min"], b["row_max"], b["col_max"])
    scores = np.asarray(doc["fused_scores"], dtype=np.float64)
    kept = [int(i) for i in doc["kept_indices"]]
    dist = attention_distance(scores, grid, box)
    ent = score_entropy(scores)
    iou = token_box_iou(kept, grid, box)
    print(f"attention_distance={dist:.4f}")
    print(f"score_entropy={ent:.4f}")
    print(f"token_box_iou={iou:.4f}")
    return 0


def _cmd_bench(args) -> int:
    budgets = [int(b) for b in args.budgets.split(",") if b]
    header = (
        f"{'budget':>6} {'prune%':>7} {'iou_fused':>9} {'iou_intr':>8} "
        f"{'ent_fused':>9} {'ent_intr':>8} {'dist_fused':>10} {'dist_intr':>9}"
    )
    print(header)
    for budget in budgets:
        rows = []
        for trial in range(args.trials):
            fx = synth_fixture(
                seed=args.seed + trial,
                n_tokens=args.tokens,
                dim=args.dim,
                n_clusters=args.clusters,
                intra_cosine_floor=args.cosine_floor,
                query_cluster=trial % args.clusters,
            )
            cfg = SelectionConfig(t_keep=budget)
            fused = select_tokens(fx.visual, fx.attention, fx.text, fx.projector, cfg)
            intr = select_tokens(fx.visual, fx.attention, None, fx.projector, cfg)
            rows.append(
                (
                    token_box_iou(fused.kept, fx.grid, fx.box),
                    token_box_iou(intr.kept, fx.grid, fx.box),
                    score_entropy(fused.fused_scores),
                    score_entropy(intr.fused_scores),
                    attention_distance(fused.fused_scores, fx.grid, fx.box),
                    attention_distance(intr.fused_scores, fx.grid, fx.box),
                )
            )
        mean = np.mean(np.asarray(rows), axis=0)
        prune = 100.0 * (1.0 - budget / args.tokens)
        print(
            f"{budget:>6} {prune:>7.1f} {mean[0]:>9.4f} {mean[1]:>8.4f} "
            f"{mean[2]:>9.4f} {mean[3]:>8.4f} {mean[4]:>10.4f} {mean[5]:>9.4f}"
        )
    return 0


_COMMANDS = {
    "select": _cmd_select,
    "synth": _cmd_synth,
    "verify": _cmd_verify,
    "metrics": _cmd_metrics,
    "bench": _cmd_bench,
}


def cli_dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse prints its own message; fold --help into success
        return 0 if exc.code == 0 else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (TensorFormatError, FeatureError, ScoreError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    raise SystemExit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
