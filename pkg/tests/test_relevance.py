import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vtsel.core import FeatureError, ScoreError, UNIT_INTERVAL, ScoreVector, softmax
from vtsel.metrics import score_entropy
from vtsel.relevance import (
    FusionParams,
    Projector,
    SharpenParams,
    aggregate_similarity,
    extrinsic_relevance,
    fuse,
    gate_text,
    intrinsic_saliency,
    project_visual,
    sharpen,
)

EPS = 1e-6


class TestIntrinsicSaliency:
    def test_formula(self):
        out = intrinsic_saliency([0.1, 0.2, 0.7], EPS)
        expected = [0.0, 0.1 / (0.6 + EPS), 0.6 / (0.6 + EPS)]
        np.testing.assert_allclose(out.values, expected, atol=1e-12)

    def test_uniform_attention_is_all_zero(self):
        out = intrinsic_saliency([0.25] * 4)
        np.testing.assert_array_equal(out.values, 0.0)

    def test_already_normalized_pair(self):
        out = intrinsic_saliency([0.0, 1.0])
        np.testing.assert_allclose(out.values, [0.0, 1.0], atol=1e-5)

    def test_negative_mass_rejected(self):
        with pytest.raises(ScoreError, match="non-negative"):
            intrinsic_saliency([0.5, -0.1])


class TestProjectVisual:
    def test_identity_on_unit_rows(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((6, 4))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        out = project_visual(v, Projector(np.eye(4)))
        np.testing.assert_allclose(out, v, atol=1e-6)

    def test_normalization_only(self):
        out = project_visual([[2.0, 0.0]], Projector(np.eye(2)))
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-12)

    def test_project_then_normalize(self):
        out = project_visual([[1.0, 1.0]], Projector([[1.0, 0.0], [0.0, 0.0]]))
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-12)

    def test_bias_applied_before_normalization(self):
        proj = Projector(np.eye(2), bias=[1.0, 0.0])
        out = project_visual([[0.0, 0.0]], proj)
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(FeatureError):
            project_visual([[1.0, 2.0, 3.0]], Projector(np.eye(2)))

    def test_bad_bias_length(self):
        with pytest.raises(FeatureError):
            Projector(np.eye(2), bias=[1.0])


class TestGateText:
    def test_single_row(self):
        out = gate_text([[3.0, 4.0]], EPS)
        assert out.gates[0] == pytest.approx(5.0 / (5.0 + EPS), abs=1e-15)
        np.testing.assert_allclose(out.normalized, [[0.6, 0.8]], atol=1e-9)

    def test_zero_row_stays_zero(self):
        out = gate_text([[1.0, 0.0], [0.0, 0.0]], EPS)
        np.testing.assert_allclose(out.normalized, [[1.0, 0.0], [0.0, 0.0]], atol=1e-9)
        assert out.gates[1] == 0.0

    def test_identical_rows_identical_gates(self):
        out = gate_text([[1.0, 2.0], [1.0, 2.0]], EPS)
        norm = np.sqrt(5.0)
        assert out.gates[0] == out.gates[1] == pytest.approx(norm / (norm + EPS), abs=1e-15)
        np.testing.assert_array_equal(out.normalized[0], out.normalized[1])

    def test_all_zero_matrix_degenerates(self):
        out = gate_text(np.zeros((3, 4)), EPS)
        np.testing.assert_array_equal(out.normalized, np.zeros((3, 4)))


class TestAggregateSimilarity:
    def test_constant_row_is_convex_identity(self):
        out = aggregate_similarity([[0.4, 0.4, 0.4]], 0.05)
        assert out.values[0] == pytest.approx(0.4, abs=1e-12)

    def test_dominant_entry_takes_all_weight(self):
        out = aggregate_similarity([[1.0, 0.0]], 0.05)
        # softmax weight on the 1.0 entry is 1/(1 + e^-20)
        expected = 1.0 / (1.0 + np.exp(-20.0))
        assert out.values[0] == pytest.approx(expected, abs=1e-12)
        assert out.values[0] == pytest.approx(1.0, abs=1e-8)

    def test_single_token_weight_one(self):
        out = aggregate_similarity([[0.5]], 0.05)
        assert out.values[0] == 0.5

    def test_no_text_tokens_rejected(self):
        with pytest.raises(FeatureError, match="no text tokens"):
            aggregate_similarity(np.zeros((3, 0)))

    @given(
        arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)),
               elements=st.floats(-1, 1, allow_nan=False)),
        st.floats(0.01, 1.0),
    )
    @settings(max_examples=50)
    def test_convex_combination_bounds(self, s, tau):
        out = aggregate_similarity(s, tau).values
        lo = s.min(axis=1) - 1e-9
        hi = s.max(axis=1) + 1e-9
        assert np.all(out >= lo) and np.all(out <= hi)


class TestSharpen:
    def test_constant_collapses_to_zero(self):
        out = sharpen([0.3] * 5)
        np.testing.assert_array_equal(out.values, 0.0)

    def test_two_point_endpoints(self):
        out = sharpen([1.0, 0.0])
        assert out.values[1] == 0.0
        assert out.values[0] == pytest.approx(1.0, abs=1e-5)

    def test_top_p_gate_keeps_few(self):
        rng = np.random.default_rng(42)
        s_text = rng.uniform(size=200)
        p = SharpenParams()
        # reproduce the gate threshold independently
        s1 = softmax(s_text, p.tau_sharp).values
        s3_ref = (s1 ** p.gamma - (s1 ** p.gamma).min()) / (
            (s1 ** p.gamma).max() - (s1 ** p.gamma).min() + EPS
        )
        t_p = np.quantile(s3_ref, 1 - p.top_p)
        kept = int(np.sum(s3_ref >= t_p))
        assert kept <= int(np.ceil(p.top_p * 200)) + 1

    @given(
        arrays(np.float64, st.integers(2, 64),
               elements=st.floats(-5, 5, allow_nan=False)),
    )
    @settings(max_examples=80)
    def test_never_increases_entropy_vs_unit_softmax(self, s_text):
        assume(s_text.max() - s_text.min() > 1e-6)
        out = sharpen(s_text).values
        assume(out.sum() > 0)
        sharp_entropy = score_entropy(out)
        base_entropy = score_entropy(softmax(s_text, 1.0).values)
        assert sharp_entropy <= base_entropy + 1e-9


class TestFuse:
    def _unit(self, values):
        return ScoreVector(values, UNIT_INTERVAL)

    def test_eta_zero_keeps_intrinsic_order(self):
        rng = np.random.default_rng(3)
        a = self._unit(rng.uniform(size=32))
        b = self._unit(rng.uniform(size=32))
        fused = fuse(a, b, FusionParams(eta=0.0))
        np.testing.assert_array_equal(
            np.argsort(-fused.values, kind="stable"),
            np.argsort(-a.values, kind="stable"),
        )

    def test_equal_inputs_are_fixed_point(self):
        v = np.array([0.1, 0.9, 0.4])
        fused = fuse(self._unit(v), self._unit(v))
        np.testing.assert_allclose(fused.values, (v - v.min()) / (v.max() - v.min() + EPS), atol=1e-9)

    def test_symmetric_disagreement_collapses(self):
        fused = fuse(self._unit([1.0, 0.0]), self._unit([0.0, 1.0]))
        np.testing.assert_array_equal(fused.values, [0.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(ScoreError):
            fuse(self._unit([0.1]), self._unit([0.1, 0.2]))

    def test_requires_unit_interval_tags(self):
        with pytest.raises(ScoreError):
            fuse(ScoreVector([0.5]), self._unit([0.5]))

    @given(
        arrays(np.float64, st.integers(1, 32), elements=st.floats(0, 1, allow_nan=False)),
        arrays(np.float64, st.integers(1, 32), elements=st.floats(0, 1, allow_nan=False)),
        st.floats(0.0, 1.0),
    )
    @settings(max_examples=80)
    def test_geometric_mean_identity(self, a, b, eta):
        if a.size != b.size:
            b = np.resize(b, a.size)
        params = FusionParams(eta=eta)
        raw = np.exp(
            (1 - eta) * np.log(a + params.eps) + eta * np.log(b + params.eps)
        )
        direct = (a + params.eps) ** (1 - eta) * (b + params.eps) ** eta
        np.testing.assert_allclose(raw, direct, atol=1e-9)
        fused = fuse(self._unit(a), self._unit(b), params)
        expected = (raw - raw.min()) / (raw.max() - raw.min() + params.eps)
        np.testing.assert_allclose(fused.values, expected, atol=1e-12)


class TestExtrinsicRelevance:
    def test_absent_query_flags_and_zeroes(self):
        v = np.eye(3)
        out = extrinsic_relevance(v, None, Projector(np.eye(3)))
        assert out.no_query
        np.testing.assert_array_equal(out.scores.values, 0.0)

    def test_all_zero_text_counts_as_absent(self):
        out = extrinsic_relevance(np.eye(3), np.zeros((2, 3)), Projector(np.eye(3)))
        assert out.no_query

    def test_matching_token_attains_top(self):
        v = np.eye(4)
        text = np.array([[0.0, 1.0, 0.0, 0.0]])
        out = extrinsic_relevance(v, text, Projector(np.eye(4)))
        assert not out.no_query
        assert int(np.argmax(out.scores.values)) == 1
        assert out.scores.values[1] == pytest.approx(1.0, abs=1e-5)

    def test_duplicate_rows_score_equally(self):
        rng = np.random.default_rng(5)
        base = rng.standard_normal((4, 6))
        v = np.vstack([base, base[1]])
        text = rng.standard_normal((2, 6))
        out = extrinsic_relevance(v, text, Projector(np.eye(6)))
        assert out.scores.values[1] == out.scores.values[4]

    def test_text_dimension_mismatch(self):
        with pytest.raises(FeatureError):
            extrinsic_relevance(np.eye(3), np.ones((1, 4)), Projector(np.eye(3)))

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(9)
        v = rng.standard_normal((10, 8))
        text = rng.standard_normal((3, 8))
        proj = Projector(rng.standard_normal((8, 8)))
        perm = rng.permutation(10)
        direct = extrinsic_relevance(v[perm], text, proj).scores.values
        permuted = extrinsic_relevance(v, text, proj).scores.values[perm]
        np.testing.assert_allclose(direct, permuted, atol=1e-12)


def test_param_validation():
    with pytest.raises(ValueError):
        SharpenParams(tau_agg=0.0)
    with pytest.raises(ValueError):
        SharpenParams(top_p=1.0)
    with pytest.raises(ValueError):
        SharpenParams(attenuation=1.5)
    with pytest.raises(ValueError):
        FusionParams(eta=1.2)
