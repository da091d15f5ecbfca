import math

import numpy as np
import pytest
import scipy.sparse as sp

import graphcomplete as gc
import graphcomplete.autodiff as ad
from graphcomplete.nn import ParamStore, cosine_matrix
from graphcomplete.objective import (
    ContrastiveConfig,
    feature_contrastive_loss,
    structure_contrastive_loss,
    total_contrastive_loss,
)

from conftest import gradcheck, sbm_fixture


def infonce_oracle(U, V, t):
    """Scalar-loop reference: softmax cross-entropy on cosine rows, summed."""
    S = cosine_matrix(U, V) / t
    total = 0.0
    for i in range(S.shape[0]):
        total += math.log(sum(math.exp(s) for s in S[i])) - S[i, i]
    return total


class TestConfig:
    def test_temperature_positive(self):
        with pytest.raises(ValueError, match="temperature"):
            ContrastiveConfig(temperature=0.0)

    def test_self_negatives_rejected(self):
        with pytest.raises(ValueError, match="positive pair"):
            ContrastiveConfig(include_self_in_negatives=True)


class TestFeatureTerm:
    def test_single_node_is_zero(self):
        # with one row, log-sum-exp over the row equals the diagonal term
        loss = feature_contrastive_loss(np.array([[1.0, 2.0]]),
                                        np.array([[3.0, 1.0]]), 0.5)
        assert loss.value == pytest.approx(0.0, abs=1e-12)

    def test_orthonormal_rows_known_value(self):
        # views both equal to [e1; e2] at t=1: similarity is the identity,
        # each row contributes log(e^1 + e^0) - 1 = log(1 + e^-1)
        I2 = np.eye(2)
        loss = feature_contrastive_loss(I2, I2, 1.0)
        expected = 2.0 * math.log(1.0 + math.exp(-1.0))
        assert loss.value == pytest.approx(expected, rel=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(0)
        U = rng.normal(size=(6, 4))
        V = rng.normal(size=(6, 4))
        loss = feature_contrastive_loss(U, V, 0.7)
        assert loss.value == pytest.approx(infonce_oracle(U, V, 0.7), rel=1e-10)

    def test_aligned_views_at_low_temperature_vanish(self):
        rng = np.random.default_rng(1)
        U = rng.normal(size=(5, 8))
        loss = feature_contrastive_loss(U, 2.5 * U, 0.01)
        assert 0.0 <= loss.value < 1e-6

    def test_row_rescaling_invariance(self):
        rng = np.random.default_rng(2)
        U = rng.normal(size=(5, 4))
        V = rng.normal(size=(5, 4))
        scales = rng.uniform(0.1, 10.0, size=(5, 1))
        a = feature_contrastive_loss(U, V, 0.5).value
        b = feature_contrastive_loss(U * scales, V, 0.5).value
        assert b == pytest.approx(a, abs=1e-10)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        U = rng.normal(size=(6, 4))
        V = rng.normal(size=(6, 4))
        perm = rng.permutation(6)
        a = feature_contrastive_loss(U, V, 0.5).value
        b = feature_contrastive_loss(U[perm], V[perm], 0.5).value
        assert b == pytest.approx(a, rel=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(4)
        n, t = 7, 0.5
        U = rng.normal(size=(n, 5))
        V = rng.normal(size=(n, 5))
        loss = feature_contrastive_loss(U, V, t).value
        assert loss >= 0.0
        # each row's log-sum-exp is at most log(n) + max similarity gap 2/t
        assert loss <= n * (math.log(n) + 2.0 / t)

    def test_gradcheck(self):
        rng = np.random.default_rng(5)
        store = ParamStore()
        store.add("u", rng.normal(size=(4, 3)))
        store.add("v", rng.normal(size=(4, 3)))
        gradcheck(lambda s: feature_contrastive_loss(s["u"], s["v"], 0.5), store)


class TestStructureTerm:
    def test_sparse_and_dense_rows_agree(self):
        rng = np.random.default_rng(6)
        A = rng.random((5, 5))
        rows = np.where(rng.random((5, 5)) > 0.5, rng.random((5, 5)), 0.0)
        dense = structure_contrastive_loss(A, rows, 0.5).value
        sparse = structure_contrastive_loss(A, sp.csr_array(rows), 0.5).value
        assert sparse == pytest.approx(dense, rel=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(7)
        A = rng.random((6, 6))
        rows = rng.random((6, 6))
        loss = structure_contrastive_loss(A, sp.csr_array(rows), 0.3)
        assert loss.value == pytest.approx(infonce_oracle(A, rows, 0.3), rel=1e-10)

    def test_zero_diffusion_row_is_floored_not_nan(self):
        A = np.random.default_rng(8).random((3, 3))
        rows = np.array([[1.0, 0.0, 0.0],
                         [0.0, 0.0, 0.0],
                         [0.0, 0.0, 2.0]])
        loss = structure_contrastive_loss(A, sp.csr_array(rows), 0.5)
        assert np.isfinite(loss.value)

    def test_gradcheck_with_sparse_constant(self):
        rng = np.random.default_rng(9)
        rows = sp.csr_array(np.where(rng.random((4, 4)) > 0.4,
                                     rng.random((4, 4)), 0.0))
        store = ParamStore()
        store.add("a", rng.random((4, 4)) + 0.5)
        gradcheck(lambda s: structure_contrastive_loss(s["a"], rows, 0.5), store)


class TestTotal:
    def test_sum_of_parts(self):
        rng = np.random.default_rng(10)
        U, V = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        A, rows = rng.random((5, 5)), rng.random((5, 5))
        total, l_f, l_s = total_contrastive_loss(U, V, A, rows,
                                                 ContrastiveConfig(0.5))
        assert total.value == pytest.approx(l_f.value + l_s.value, rel=1e-14)
        assert l_f.value == pytest.approx(
            feature_contrastive_loss(U, V, 0.5).value, rel=1e-14)

    def test_training_decreases_loss_across_seeds(self):
        # the full reconstruction objective should fall for essentially
        # every random initialization
        ds = gc.apply_mask(sbm_fixture(), gc.MaskSpec(0.3, 0.3, "entry", 0))
        cfg = gc.ReconTrainConfig(epochs=30)
        wins = 0
        for seed in range(10):
            state = gc.run_reconstruction(ds, cfg, seed=seed)
            if state.loss_history[-1, 2] < state.loss_history[0, 2]:
                wins += 1
        assert wins >= 9
