import numpy as np
import pytest

from qqual import optim, qdnn, qsim


class TestBuild:
    def test_default_param_count(self):
        m = qdnn.build_default_qdnn(8, 2)
        assert m.circuit.n_params == 8 * 2 * 2
        # trainable affine map adds scale and offset
        assert m.params.size == 32 + 2

    def test_feature_count_cap(self):
        with pytest.raises(ValueError):
            qdnn.build_default_qdnn(13, 1)

    def test_seeded_build_reproducible(self):
        a = qdnn.build_default_qdnn(4, 2, seed=5)
        b = qdnn.build_default_qdnn(4, 2, seed=5)
        assert np.array_equal(a.params, b.params)

    def test_paired_encoding_feature_capacity(self):
        m = qdnn.build_paired_feature_qdnn(16, 2, task="classification")
        assert m.circuit.n_qubits == 8
        assert m.n_features == 16

    def test_classification_map_is_frozen(self):
        m = qdnn.build_default_qdnn(8, 2, task="classification")
        assert not m.trainable_map
        assert m.params.size == m.circuit.n_params


class TestForward:
    def test_zero_layer_identity_map_on_zero_input(self):
        m = qdnn.build_default_qdnn(3, 0)
        m.scale, m.offset = 1.0, 0.0
        assert qdnn.qdnn_forward(m, [0.0, 0.0, 0.0]) == pytest.approx(1.0)

    def test_single_feature_zero_layers_is_cosine(self):
        m = qdnn.build_default_qdnn(1, 0, seed=2)
        for x in (0.0, 0.4, 1.3):
            expect = m.scale * np.cos(x) + m.offset
            assert qdnn.qdnn_forward(m, [x]) == pytest.approx(expect, abs=1e-12)

    def test_mean_z_on_product_state(self):
        m = qdnn.build_default_qdnn(4, 0)
        x = np.array([0.2, 0.9, 1.5, -0.4])
        assert m.readout_expectations(x.reshape(1, -1))[0] == pytest.approx(
            np.mean(np.cos(x)), abs=1e-12)

    def test_raw_readout_bounded(self):
        rng = np.random.default_rng(0)
        m = qdnn.build_default_qdnn(5, 2, seed=1)
        X = rng.normal(scale=3.0, size=(16, 5))
        e = m.readout_expectations(X)
        assert np.all(np.abs(e) <= 1.0 + 1e-12)

    def test_classification_output_in_unit_interval(self):
        rng = np.random.default_rng(4)
        m = qdnn.build_default_qdnn(4, 2, task="classification", seed=3)
        X = rng.normal(scale=2.0, size=(32, 4))
        p = m.forward(X)
        assert np.all((p >= 0.0) & (p <= 1.0))


class TestGradient:
    def test_loss_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        m = qdnn.build_default_qdnn(2, 1, seed=7)
        X = rng.normal(size=(6, 2))
        y = rng.normal(size=6)
        _, g = m.loss_and_grad(X, y, "mse")
        p0 = m.params.copy()
        h = 1e-6
        for i in range(p0.size):
            up = p0.copy()
            up[i] += h
            m.params = up
            lp = m.loss_and_grad(X, y, "mse")[0]
            dn = p0.copy()
            dn[i] -= h
            m.params = dn
            lm = m.loss_and_grad(X, y, "mse")[0]
            m.params = p0
            assert g[i] == pytest.approx((lp - lm) / (2 * h), abs=1e-6)

    def test_classification_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        m = qdnn.build_default_qdnn(2, 1, task="classification", seed=8)
        X = rng.normal(size=(6, 2))
        y = rng.integers(0, 2, 6).astype(float)
        _, g = m.loss_and_grad(X, y, "bce")
        p0 = m.params.copy()
        h = 1e-6
        for i in range(p0.size):
            up = p0.copy()
            up[i] += h
            m.params = up
            lp = m.loss_and_grad(X, y, "bce")[0]
            dn = p0.copy()
            dn[i] -= h
            m.params = dn
            lm = m.loss_and_grad(X, y, "bce")[0]
            m.params = p0
            assert g[i] == pytest.approx((lp - lm) / (2 * h), rel=1e-4, abs=1e-6)


class TestRescaleFeatures:
    def test_maps_columns_onto_angle_range(self):
        X = np.array([[0.0, 5.0], [2.0, 7.0], [1.0, 6.0]])
        out = qdnn.rescale_features(X)
        assert out.min(axis=0).tolist() == [0.0, 0.0]
        assert out.max(axis=0).tolist() == [np.pi, np.pi]
        assert out[2, 0] == pytest.approx(np.pi / 2)

    def test_constant_column_lands_on_lo(self):
        out = qdnn.rescale_features(np.full((4, 2), 3.0), lo=0.25, hi=1.0)
        assert np.all(out == 0.25)

    def test_requires_matrix(self):
        with pytest.raises(ValueError):
            qdnn.rescale_features(np.ones(5))


class TestTrain:
    def test_zero_epochs_unchanged(self):
        m = qdnn.build_default_qdnn(2, 1, seed=0)
        p0 = m.params.copy()
        _, hist = qdnn.train_qdnn(m, np.zeros((4, 2)), np.zeros(4),
                                  optim.TrainConfig(epochs=0), "mse")
        assert hist == []
        assert np.array_equal(m.params, p0)

    def test_exactly_representable_target_is_learned(self):
        # model class {scale*cos(x + theta) + offset}: embed RX(x) then RX(theta)
        circuit = qsim.CircuitSpec(
            1, [[qsim.rx(0, feature=0)], [qsim.rx(0, param=0)]], [(0, "z")])
        m = qdnn.QdnnModel(circuit, [0.05], "mean_z", scale=1.0, offset=0.0)
        X = np.array([[-1.0], [0.0], [1.0], [2.0]])
        y = 0.8 * np.cos(X[:, 0] + 0.4) - 0.1
        _, hist = qdnn.train_qdnn(m, X, y, optim.TrainConfig(epochs=500, seed=1), "mse")
        assert hist[-1] < 1e-3

    def test_bitwise_deterministic_history(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(12, 3))
        y = rng.normal(size=12)
        runs = []
        for _ in range(2):
            m = qdnn.build_default_qdnn(3, 1, seed=4)
            _, hist = qdnn.train_qdnn(m, X, y, optim.TrainConfig(epochs=6, seed=4), "mse")
            runs.append((hist, m.params.copy()))
        assert runs[0][0] == runs[1][0]
        assert np.array_equal(runs[0][1], runs[1][1])

    def test_divergence_reports_epoch(self):
        m = qdnn.build_default_qdnn(1, 1, seed=0)
        X = np.array([[0.3]])
        y = np.array([1.0])
        with pytest.raises(optim.TrainingDivergence):
            qdnn.train_qdnn(m, X, y, optim.TrainConfig(
                epochs=2000, optimizer="sgd", learning_rate=1e150), "mse")


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        m = qdnn.build_default_qdnn(3, 2, task="classification", seed=6)
        X = rng.normal(size=(9, 3))
        path = tmp_path / "model.json"
        qdnn.save_checkpoint(m, path, optim.TrainConfig(), seed=6)
        loaded = qdnn.load_checkpoint(path)
        assert np.allclose(loaded.forward(X), m.forward(X), atol=1e-15)
        assert loaded.readout == m.readout


@pytest.mark.slow
class TestLossImprovement:
    def test_benchmark_task_improves_for_most_seeds(self):
        xs = np.linspace(-2.0, 4.0, 100)
        wins = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            ys = np.cos(4.0 * xs) + 0.1 * rng.normal(size=xs.size)
            X = np.repeat(xs.reshape(-1, 1), 8, axis=1)
            m = qdnn.build_default_qdnn(8, 2, seed=seed)
            _, hist = qdnn.train_qdnn(m, X, ys, optim.TrainConfig(epochs=20, seed=seed), "mse")
            if np.mean(hist[-10:]) < np.mean(hist[:10]):
                wins += 1
        assert wins >= 8
