import numpy as np
import pytest
import scipy.sparse as sp

from mplexnet.baselines import (
    BASELINE_KINDS,
    GRAPH_READOUT_HIDDEN,
    INTERMEDIATE_HIDDEN,
    NO_FUSION_HIDDEN,
    GcnMonoplex,
    MlpClassifier,
    PlaneSample,
    RelationalGcn,
    VectorSample,
    complete_graph_normalized,
    fit_and_score,
    load_scores_csv,
    modality_plane_adjacencies,
    normalized_adjacency,
    run_late_fusion_avg,
    scores_csv_rows,
)
from mplexnet.diffcore import LrSchedule, Tensor, softmax, softmax_cross_entropy
from mplexnet.training import FitConfig, predict_proba

from conftest import check_grad_entries


class TestArchitectureWidths:
    def test_flat_hidden_widths(self):
        assert NO_FUSION_HIDDEN == (400, 20)
        assert INTERMEDIATE_HIDDEN == (150, 20)
        assert GRAPH_READOUT_HIDDEN == (100, 20)

    def test_mlp_layer_shapes(self):
        model = MlpClassifier(2048, NO_FUSION_HIDDEN)
        shapes = [w.data.shape for w, _ in model.layers]
        assert shapes == [(2048, 400), (400, 20), (20, 5)]

    def test_early_fusion_native_width(self):
        # concatenating the six native modalities gives 8125 inputs
        d = 2048 + 4081 + 29 + 1726 + 233 + 8
        assert d == 8125
        model = MlpClassifier(d, NO_FUSION_HIDDEN)
        assert model.layers[0][0].data.shape == (8125, 400)

    def test_five_class_output(self, rng):
        model = MlpClassifier(6, (4,))
        out = model.forward_t(VectorSample(rng.normal(size=6), 0))
        assert out.data.shape == (1, 5)

    def test_kind_registry(self):
        assert len(BASELINE_KINDS) == 7
        assert "late_fusion_avg" in BASELINE_KINDS


class TestMlpForward:
    def test_zero_weights_uniform(self, rng):
        model = MlpClassifier(4, (3,))
        for w, b in model.layers:
            w.data[:] = 0.0
            b.data[:] = 0.0
        probs = softmax(model.forward_t(VectorSample(rng.normal(size=4), 0)).data)
        assert np.allclose(probs, 0.2, atol=1e-15)

    def test_gradients_match_finite_differences(self, rng):
        model = MlpClassifier(5, (4, 3), seed=1)
        s = VectorSample(rng.normal(size=5), 2)
        params = model.parameters()
        entries = [(name, 0) for name in sorted(params)]
        check_grad_entries(
            lambda: softmax_cross_entropy(model.forward_t(s), [s.label]),
            params, entries,
        )


class TestNormalizedAdjacency:
    def test_path_graph_hand_values(self):
        # 0-1-2 path with self-loops: degrees (2, 3, 2)
        a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        n = normalized_adjacency(a).toarray()
        deg = np.array([2.0, 3.0, 2.0])
        expected = (a + np.eye(3)) / np.sqrt(np.outer(deg, deg))
        assert np.allclose(n, expected, atol=1e-15)

    def test_rows_of_complete_graph_uniform(self):
        n = complete_graph_normalized(7).toarray()
        assert np.allclose(n, 1.0 / 7, atol=1e-15)

    def test_isolated_node_keeps_self_loop(self):
        n = normalized_adjacency(np.zeros((3, 3))).toarray()
        assert np.allclose(n, np.eye(3), atol=1e-15)

    def test_symmetric_output(self, rng):
        a = (rng.random((6, 6)) < 0.4).astype(float)
        a = np.triu(a, 1)
        a = a + a.T
        n = normalized_adjacency(a).toarray()
        assert np.allclose(n, n.T, atol=1e-15)


class TestModalityPlanes:
    def test_block_structure(self):
        planes = modality_plane_adjacencies([2, 3])
        assert len(planes) == 2
        p0 = planes[0].toarray()
        # plane 0 touches only the first block (plus its self-loops)
        assert np.allclose(p0[:2, :2], 0.5)
        assert np.count_nonzero(p0[2:]) == 3  # bare self-loops elsewhere

    def test_plane_count_matches_blocks(self):
        assert len(modality_plane_adjacencies([4, 4, 4])) == 3


class TestRelationalGcn:
    def _sample(self, rng, p, planes):
        return PlaneSample(rng.normal(size=p), planes, 0)

    def test_single_layer_loop_oracle(self, rng):
        # one layer, identity-free check against an explicit double loop
        p, k = 5, 2
        planes = [
            normalized_adjacency((lambda a: np.triu(a, 1) + np.triu(a, 1).T)(
                (rng.random((p, p)) < 0.5).astype(float)))
            for _ in range(k)
        ]
        model = RelationalGcn(p, k, num_layers=1, hidden_width=2, seed=0)
        s = self._sample(rng, p, planes)
        weights, bias = model.layers[0]
        pre = np.zeros((p, 2))
        for a_hat, w in zip(planes, weights):
            prop = a_hat.toarray() @ s.x.reshape(-1, 1)
            pre += prop @ w.data + bias.data
        expected = np.where(pre >= 0, pre, 0.01 * pre)
        h = Tensor(s.x.reshape(-1, 1))
        from mplexnet.diffcore import add, affine, leaky_relu, spmm
        total = None
        for a_hat, w in zip(planes, weights):
            term = affine(spmm(a_hat, h), w, bias)
            total = term if total is None else add(total, term)
        got = leaky_relu(total, 0.01).data
        assert np.allclose(got, expected, atol=1e-12)

    def test_monoplex_reduces_to_single_plane(self, rng):
        # GcnMonoplex with plane A equals RelationalGcn(K=1) with plane A
        p = 4
        plane = complete_graph_normalized(p)
        mono = GcnMonoplex(p, seed=3)
        multi = RelationalGcn(p, 1, seed=3)
        s = PlaneSample(rng.normal(size=p), [plane], 1)
        assert np.array_equal(mono.forward_t(s).data, multi.forward_t(s).data)

    def test_complete_monoplex_collapses_node_information(self, rng):
        # with every normalized entry 1/P, the first propagation maps any
        # input to P copies of its mean: node identity is lost
        p = 6
        plane = complete_graph_normalized(p)
        x = rng.normal(size=p)
        prop = plane.toarray() @ x.reshape(-1, 1)
        assert np.allclose(prop, x.mean(), atol=1e-12)

    def test_plane_count_mismatch_rejected(self, rng):
        model = RelationalGcn(4, 2, seed=0)
        s = PlaneSample(rng.normal(size=4), [complete_graph_normalized(4)], 0)
        with pytest.raises(ValueError, match="planes"):
            model.forward_t(s)

    def test_gradients_match_finite_differences(self, rng):
        p, k = 4, 2
        planes = [complete_graph_normalized(p),
                  normalized_adjacency(np.array(
                      [[0, 1, 0, 0], [1, 0, 1, 0],
                       [0, 1, 0, 1], [0, 0, 1, 0]], dtype=float))]
        model = RelationalGcn(p, k, readout_hidden=(6,), seed=0)
        s = PlaneSample(rng.normal(size=p), planes, 2)
        params = model.parameters()
        entries = [(name, 0) for name in sorted(params)]
        check_grad_entries(
            lambda: softmax_cross_entropy(model.forward_t(s), [s.label]),
            params, entries,
        )


class TestLateFusion:
    def test_identical_inputs_identity(self):
        probs = np.array([[0.2, 0.8], [0.6, 0.4]])
        out = run_late_fusion_avg([probs, probs, probs])
        assert np.allclose(out, probs, atol=1e-15)

    def test_two_set_hand_average(self):
        a = np.array([[0.2, 0.8]])
        b = np.array([[0.6, 0.4]])
        assert np.allclose(run_late_fusion_avg([a, b]), [[0.4, 0.6]], atol=1e-15)

    def test_rows_renormalized(self, rng):
        sets = [rng.random((10, 5)) for _ in range(3)]
        sets = [s / s.sum(axis=1, keepdims=True) for s in sets]
        out = run_late_fusion_avg(sets)
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_single_set_rejected(self):
        with pytest.raises(ValueError, match="2"):
            run_late_fusion_avg([np.ones((2, 5)) / 5])

    def test_shape_disagreement_rejected(self):
        with pytest.raises(ValueError, match="disagree"):
            run_late_fusion_avg([np.ones((2, 5)) / 5, np.ones((3, 5)) / 5])


def make_vector_task(rng, n=24, d=6, margin=0.0):
    """Linearly separable 5-class toy problem; optionally require the
    winning logit to beat the runner-up by `margin`."""
    samples = []
    w = rng.normal(size=(d, 5))
    while len(samples) < n:
        x = rng.normal(size=d)
        logits = np.sort(x @ w)
        if logits[-1] - logits[-2] < margin:
            continue
        samples.append(VectorSample(x, int(np.argmax(x @ w))))
    return samples


class TestTrainingIntegration:
    def test_probabilities_valid_after_training(self, rng):
        samples = make_vector_task(rng)
        model = MlpClassifier(6, (8,), seed=0)
        cfg = FitConfig(epochs=5, batch_size=8, seed=0)
        _, val_probs, test_probs = fit_and_score(
            model, samples[:16], samples[16:20], samples[20:], cfg
        )
        for probs in (val_probs, test_probs):
            assert np.all(probs >= 0.0)
            assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_overfits_separable_toy(self, rng):
        samples = make_vector_task(rng, n=16, margin=0.5)
        model = MlpClassifier(6, (16,), seed=0)
        cfg = FitConfig(epochs=60, batch_size=4, seed=0,
                        schedule=LrSchedule(0.02, 0.1, 40))
        result, _, _ = fit_and_score(model, samples, samples, samples, cfg)
        probs = predict_proba(model, samples)
        acc = np.mean(np.argmax(probs, axis=1) == [s.label for s in samples])
        assert acc == 1.0

    def test_scores_csv_roundtrip(self, rng, tmp_path):
        ids = [f"p{i}" for i in range(4)]
        probs = rng.random((4, 5))
        probs /= probs.sum(axis=1, keepdims=True)
        path = tmp_path / "scores.csv"
        path.write_text("\n".join(scores_csv_rows(ids, probs)) + "\n")
        got_ids, got = load_scores_csv(str(path))
        assert got_ids == ids
        assert np.array_equal(got, probs)
