"""
嵌入层与 DDI 图先验测试
"""
import numpy as np
import pytest

from src.autodiff import Tensor, grad_check, ops
from src.data.graphs import DdiGraph
from src.errors import DataFormatError, LayoutError, ShapeError, UnknownCodeError
from src.model.embedding import (embed_codes_pooled, encode_demographics, encode_labs, homograph_refine,
                                 neighbor_weights)
from src.model.graph_prior import (assemble_inter_bias, build_kv_layout, ddi_pair_count,
                                   visit_pair_ddi_density)


# =============================================================================
# 嵌入
# =============================================================================

class TestEmbedding:

    def test_pooled_sum(self, rng):
        table = Tensor(rng.normal(size=(5, 3)))
        out = embed_codes_pooled([1, 3], table)
        np.testing.assert_array_equal(out.data, (table.data[1] + table.data[3])[None, :])

    def test_empty_set_is_zero(self, rng):
        out = embed_codes_pooled([], Tensor(rng.normal(size=(5, 3))))
        np.testing.assert_array_equal(out.data, np.zeros((1, 3)))

    def test_single_lab_event(self, rng):
        w = Tensor(rng.normal(size=(2, 4)))
        x = np.array([[0.25, 0.8]])
        np.testing.assert_allclose(encode_labs(x, w).data, np.maximum(x @ w.data, 0.0), atol=1e-15)

    def test_labs_averaged_within_visit(self, rng):
        w = Tensor(rng.normal(size=(2, 4)))
        x = np.array([[0.0, 0.1], [0.5, 0.9], [1.0, 0.3]])
        expected = np.maximum(x @ w.data, 0.0).mean(axis=0, keepdims=True)
        np.testing.assert_allclose(encode_labs(x, w).data, expected, atol=1e-15)

    def test_no_labs_is_zero(self, rng):
        out = encode_labs(np.zeros((0, 2)), Tensor(rng.normal(size=(2, 4))))
        np.testing.assert_array_equal(out.data, np.zeros((1, 4)))

    def test_demographics(self, rng):
        g_table = Tensor(rng.normal(size=(2, 3)))
        a_proj = Tensor(rng.normal(size=(1, 3)))
        g_e, a_e = encode_demographics(1, 50.0, g_table, a_proj)
        np.testing.assert_array_equal(g_e.data, g_table.data[1:2])
        np.testing.assert_allclose(a_e.data, 0.5 * a_proj.data, rtol=1e-15)

    def test_invalid_gender(self, rng):
        with pytest.raises(DataFormatError):
            encode_demographics(2, 50.0, Tensor(np.zeros((2, 3))), Tensor(np.zeros((1, 3))))


class TestHomographRefine:

    def test_matches_mean_aggregate_plus_residual(self, rng):
        n, d = 4, 3
        adj = np.zeros((n, n))
        adj[0, 2] = adj[2, 0] = 1.0
        adj[1, 3] = adj[3, 1] = 1.0
        table = Tensor(rng.normal(size=(n, d)))
        refine = Tensor(rng.normal(size=(d, d)))
        codes = [0, 1]
        pooled = embed_codes_pooled(codes, table)

        message = (table.data[2] + table.data[3]) / 2.0
        expected = pooled.data + np.maximum(message @ refine.data, 0.0)
        out = homograph_refine(pooled, codes, adj, table, refine)
        np.testing.assert_allclose(out.data, expected[None, :], atol=1e-14)

    def test_codes_without_neighbors_pass_through(self, rng):
        table = Tensor(rng.normal(size=(3, 2)))
        pooled = embed_codes_pooled([0], table)
        assert homograph_refine(pooled, [0], np.zeros((3, 3)), table, Tensor(np.eye(2))) is pooled

    def test_neighbor_weights_normalized_by_degree(self):
        adj = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
        np.testing.assert_allclose(neighbor_weights([0], adj), [0.0, 0.5, 0.5])

    def test_adjacency_must_match_table(self, rng):
        table = Tensor(rng.normal(size=(3, 2)))
        with pytest.raises(ShapeError):
            homograph_refine(embed_codes_pooled([0], table), [0], np.zeros((4, 4)), table, Tensor(np.eye(2)))

    def test_gradient_through_refinement(self, rng):
        adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        refine = Tensor(rng.normal(size=(2, 2)))

        def f(t):
            out = homograph_refine(embed_codes_pooled([0, 1], t), [0, 1], adj, t, refine)
            return ops.sum(ops.mul(out, Tensor([[0.7, -1.3]])))
        assert grad_check(f, rng.uniform(0.5, 1.0, size=(3, 2))) < 1e-6


# =============================================================================
# DDI 图先验
# =============================================================================

@pytest.fixture
def ddi4():
    return DdiGraph.from_pairs(4, [(0, 1), (2, 3)])


class TestGraphPrior:

    def test_density_counts_ordered_cross_pairs(self, ddi4):
        assert visit_pair_ddi_density([0], [1], ddi4) == 1.0
        assert visit_pair_ddi_density([0, 2], [1, 3], ddi4) == pytest.approx(0.5)
        assert visit_pair_ddi_density([0], [2, 3], ddi4) == 0.0

    def test_density_with_empty_set(self, ddi4):
        assert visit_pair_ddi_density([], [1], ddi4) == 0.0

    def test_density_unknown_index(self, ddi4):
        with pytest.raises(UnknownCodeError):
            visit_pair_ddi_density([7], [1], ddi4)

    def test_layout(self):
        assert build_kv_layout(0, use_labs=True) == [(-1, "null")]
        assert build_kv_layout(2, use_labs=False) == [(0, "diag"), (0, "proc"), (0, "med"),
                                                     (1, "diag"), (1, "proc"), (1, "med")]
        assert len(build_kv_layout(3, use_labs=True)) == 12

    def test_bias_only_on_medication_positions(self, ddi4):
        layout = build_kv_layout(2, use_labs=False)
        bias = assemble_inter_bias([0, 2], [[1, 3], [0]], layout, ddi4)
        np.testing.assert_allclose(bias.matrix, [[0.0, 0.0, 0.5, 0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(bias.med_mask_kv, [False, False, True, False, False, True])

    def test_null_layout_has_zero_bias(self, ddi4):
        bias = assemble_inter_bias([0], [], build_kv_layout(0, use_labs=False), ddi4)
        np.testing.assert_array_equal(bias.matrix, [[0.0]])

    def test_layout_naming_missing_visit(self, ddi4):
        with pytest.raises(LayoutError):
            assemble_inter_bias([0], [[1]], build_kv_layout(2, use_labs=False), ddi4)

    def test_pair_count(self, ddi4):
        assert ddi_pair_count([0, 1, 2], ddi4) == (1, 3)
