import numpy as np
import pytest

from vtsel.core import l2_normalize_rows
from vtsel.oracle import ORACLE_MAX_CANDIDATES, oracle_residual_prune
from vtsel.partition import (
    SelectionConfig,
    partition_important,
    residual_prune,
    residual_prune_geometric,
    residual_prune_threshold,
    select_tokens,
)
from vtsel.relevance import Projector


def _unit_rows(rng, n, dim):
    m = rng.standard_normal((n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _clustered_rows(rng, n_clusters, members, dim, noise=0.03):
    centers = _unit_rows(rng, n_clusters, dim)
    rows = np.repeat(centers, members, axis=0) + noise * rng.standard_normal(
        (n_clusters * members, dim)
    )
    return l2_normalize_rows(rows), np.repeat(np.arange(n_clusters), members)


class TestPartitionImportant:
    def test_hand_sort(self):
        important, candidates = partition_important([0.9, 0.1, 0.5], 1)
        assert important == [0]
        assert candidates == [2, 1]

    def test_tie_prefers_lower_index(self):
        important, _ = partition_important([0.5, 0.5], 1)
        assert important == [0]

    def test_empty_split(self):
        important, candidates = partition_important([0.3, 0.7], 0)
        assert important == []
        assert candidates == [1, 0]

    def test_over_budget_rejected(self):
        with pytest.raises(ValueError):
            partition_important([0.5], 2)


class TestResidualPrune:
    def test_duplicate_pair_removes_even_position(self):
        rng = np.random.default_rng(0)
        others = _unit_rows(rng, 4, 8)
        dup = _unit_rows(rng, 1, 8)[0]
        feats = np.vstack([dup, dup, others])
        candidates = list(range(10, 16))
        out = residual_prune(candidates, feats, t_div=5, step_k=8)
        assert out.kept == [11, 12, 13, 14, 15]  # position 0 dropped
        assert out.iterations == 1

    def test_orthogonal_ties_drop_later_positions(self):
        feats = np.eye(6)
        out = residual_prune(list(range(6)), feats, t_div=4, step_k=8)
        # S_pair all zero for positions 0,2,4; ties remove later positions 4 then 2
        assert out.kept == [0, 1, 3, 5]
        assert out.iterations == 1
        assert out.sim_evals == 9

    def test_budget_already_met(self):
        feats = np.eye(3)
        out = residual_prune([4, 5, 6], feats, t_div=3, step_k=8)
        assert out.kept == [4, 5, 6]
        assert out.iterations == 0
        assert out.sim_evals == 0

    def test_budget_above_supply_returns_all(self):
        feats = np.eye(3)
        out = residual_prune([0, 1, 2], feats, t_div=7, step_k=8)
        assert out.kept == [0, 1, 2]

    def test_prunes_to_zero(self):
        rng = np.random.default_rng(1)
        feats = _unit_rows(rng, 5, 4)
        out = residual_prune(list(range(5)), feats, t_div=0, step_k=2)
        assert out.kept == []

    def test_each_iteration_shrinks(self):
        rng = np.random.default_rng(2)
        feats = _unit_rows(rng, 33, 8)
        out = residual_prune(list(range(33)), feats, t_div=4, step_k=8)
        assert len(out.kept) == 4
        assert out.iterations <= 33 - 4


class TestResidualPruneGeometric:
    def test_halving_trace(self):
        rng = np.random.default_rng(3)
        feats = _unit_rows(rng, 128, 8)
        out = residual_prune_geometric(list(range(128)), feats, t_div=16, alpha=0.5)
        assert len(out.kept) == 16
        assert out.iterations == 3
        assert out.sim_evals == 64 * 64 + 32 * 32 + 16 * 16

    def test_small_alpha_floors_at_one(self):
        rng = np.random.default_rng(4)
        feats = _unit_rows(rng, 10, 4)
        out = residual_prune_geometric(list(range(10)), feats, t_div=8, alpha=0.01)
        assert len(out.kept) == 8
        # ceil(0.01 * n) == 1, so two single-removal iterations
        assert out.iterations == 2

    def test_series_matches_within_ten_percent(self):
        rng = np.random.default_rng(5)
        feats = _unit_rows(rng, 512, 8)
        out = residual_prune_geometric(list(range(512)), feats, t_div=16, alpha=0.5)
        predicted = 512**2 / 4 / (1 - 0.25)
        assert abs(out.sim_evals / predicted - 1.0) < 0.10

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            residual_prune_geometric([0], np.eye(1), 0, alpha=1.0)


class TestResidualPruneThreshold:
    def test_duplicate_pair_logged_with_twin_anchor(self):
        rng = np.random.default_rng(6)
        others = np.eye(4, 6)
        dup = _unit_rows(rng, 1, 6)[0]
        # keep the duplicate clearly apart from the basis rows
        feats = np.vstack([dup, dup, others])
        out = residual_prune_threshold(list(range(6)), feats, tau=0.9)
        assert out.removal_log == [(0, 1)]
        assert out.kept == [1, 2, 3, 4, 5]

    def test_orthogonal_set_untouched(self):
        out = residual_prune_threshold(list(range(5)), np.eye(5), tau=0.5)
        assert out.kept == [0, 1, 2, 3, 4]
        assert out.removal_log == []

    def test_clusters_each_retain_a_token(self):
        rng = np.random.default_rng(7)
        feats, labels = _clustered_rows(rng, 3, 10, 16)
        out = residual_prune_threshold(list(range(30)), feats, tau=0.9)
        kept_labels = set(labels[out.kept])
        assert kept_labels == {0, 1, 2}
        for removed, anchor in out.removal_log:
            assert float(feats[removed] @ feats[anchor]) >= 0.9

    def test_tau_validation(self):
        with pytest.raises(ValueError):
            residual_prune_threshold([0], np.eye(1), tau=1.0)


class TestOracleEquivalence:
    def test_size_cap(self):
        n = ORACLE_MAX_CANDIDATES + 1
        with pytest.raises(ValueError):
            oracle_residual_prune(list(range(n)), np.eye(n), 0)

    def test_duplicate_fixture_agrees(self):
        rng = np.random.default_rng(8)
        others = _unit_rows(rng, 4, 8)
        dup = _unit_rows(rng, 1, 8)[0]
        feats = np.vstack([dup, dup, others])
        cands = list(range(6))
        assert oracle_residual_prune(cands, feats, 5) == residual_prune(cands, feats, 5).kept

    def test_identity_when_budget_met(self):
        assert oracle_residual_prune([3, 1, 2], np.eye(3), 3) == [3, 1, 2]

    def test_random_instances_match_exactly(self):
        rng = np.random.default_rng(2024)
        for trial in range(200):
            n = int(rng.integers(1, 65))
            dim = int(rng.integers(2, 9))
            t_div = int(rng.integers(0, n + 1))
            step_k = int(rng.integers(1, 12))
            if trial % 3 == 0:
                feats, _ = _clustered_rows(rng, max(1, n // 6), 1, dim)
                feats = feats[rng.integers(0, feats.shape[0], size=n)]
                feats = l2_normalize_rows(feats + 0.01 * rng.standard_normal((n, dim)))
            else:
                feats = _unit_rows(rng, n, dim)
            cands = [int(x) for x in rng.permutation(n * 2)[:n]]
            fast = residual_prune(cands, feats, t_div, step_k).kept
            slow = oracle_residual_prune(cands, feats, t_div, step_k)
            assert fast == slow, f"divergence at trial {trial}"


class TestSelectionConfig:
    def test_odd_budget_rounds_half_up(self):
        cfg = SelectionConfig(t_keep=33)
        assert (cfg.t_imp, cfg.t_div) == (17, 16)

    def test_even_budget_balanced(self):
        cfg = SelectionConfig(t_keep=128)
        assert (cfg.t_imp, cfg.t_div) == (64, 64)

    def test_validation(self):
        with pytest.raises(ValueError):
            SelectionConfig(t_keep=-1)
        with pytest.raises(ValueError):
            SelectionConfig(t_keep=8, mode="random")
        with pytest.raises(ValueError):
            SelectionConfig(t_keep=8, split_ratio=1.5)


class TestSelectTokens:
    def _inputs(self, rng, n=48, dim=8):
        v = rng.standard_normal((n, dim))
        attention = rng.uniform(size=n)
        text = rng.standard_normal((2, dim))
        return v, attention, text, Projector(np.eye(dim))

    def test_budget_split_and_disjointness(self):
        rng = np.random.default_rng(9)
        v, attention, text, proj = self._inputs(rng)
        res = select_tokens(v, attention, text, proj, SelectionConfig(t_keep=20))
        assert len(res.important) == 10 and len(res.diverse) == 10
        assert not set(res.important) & set(res.diverse)
        assert not res.no_query

    def test_important_is_stable_top_of_fused(self):
        rng = np.random.default_rng(10)
        v, attention, text, proj = self._inputs(rng)
        res = select_tokens(v, attention, text, proj, SelectionConfig(t_keep=20))
        order = np.argsort(-res.fused_scores.values, kind="stable")
        assert res.important == [int(i) for i in order[:10]]

    def test_budget_exceeding_supply_keeps_everything(self):
        rng = np.random.default_rng(11)
        v, attention, text, proj = self._inputs(rng, n=10)
        res = select_tokens(v, attention, text, proj, SelectionConfig(t_keep=50))
        assert sorted(res.important) == list(range(10))
        assert res.diverse == []

    def test_no_query_uses_intrinsic_ranking(self):
        rng = np.random.default_rng(12)
        v, attention, _, proj = self._inputs(rng)
        res = select_tokens(v, attention, None, proj, SelectionConfig(t_keep=20))
        assert res.no_query
        intr_order = np.argsort(-res.fused_scores.values, kind="stable")
        top = np.argsort(-np.asarray(attention), kind="stable")[:10]
        assert res.important == [int(i) for i in top]
        assert list(intr_order[:10]) == list(top)

    def test_threshold_mode_carries_removal_log(self):
        rng = np.random.default_rng(13)
        v, attention, text, proj = self._inputs(rng)
        cfg = SelectionConfig(t_keep=20, mode="threshold", tau_threshold=0.9)
        res = select_tokens(v, attention, text, proj, cfg)
        assert res.removal_log is not None

    def test_attention_length_mismatch(self):
        rng = np.random.default_rng(14)
        v, _, text, proj = self._inputs(rng)
        with pytest.raises(ValueError):
            select_tokens(v, np.ones(3), text, proj, SelectionConfig(t_keep=8))

    def test_permuting_tokens_permutes_feature_multiset(self):
        rng = np.random.default_rng(15)
        v, attention, text, proj = self._inputs(rng, n=32)
        cfg = SelectionConfig(t_keep=12)
        base = select_tokens(v, attention, text, proj, cfg)
        perm = rng.permutation(32)
        res = select_tokens(v[perm], attention[perm], text, proj, cfg)
        # index-level invariance is broken by positional splitting, but the
        # selected feature multiset survives a joint permutation without ties
        base_feats = sorted(map(tuple, np.round(v[base.kept], 9)))
        perm_feats = sorted(map(tuple, np.round(v[perm][res.kept], 9)))
        assert base_feats == perm_feats
