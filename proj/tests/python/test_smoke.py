"""Smoke tests for the python bindings: shapes, determinism, and agreement
with numpy's linear algebra on small instances."""

import numpy as np
import pytest

import descentlab as dl


def make_split_dataset(seed=3, n_train=40, n_test=20):
    ds = dl.synth_gaussian_classes(seed, 30, 3, 5, 2.0)
    return dl.subsample_and_split(ds, seed, n_train, n_test)


def test_dataset_shapes_and_invariants():
    ds = make_split_dataset()
    assert ds.inputs.shape == (90, 5)
    assert ds.targets.shape == (90, 3)
    assert np.all(ds.targets.sum(axis=1) == 1.0)
    assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0
    assert len(ds.train) == 40 and len(ds.test) == 20
    assert not set(ds.train) & set(ds.test)


def test_feature_map_nesting():
    small = dl.make_feature_map(42, 5, 10)
    large = dl.make_feature_map(42, 5, 25)
    np.testing.assert_array_equal(small.projection, large.projection[:10])
    x = np.random.default_rng(0).random((7, 5))
    ys = dl.transform(small, x)
    yl = dl.transform(large, x)
    np.testing.assert_array_equal(ys[:, :10], yl[:, :10])
    assert np.all(ys[:, -1] == 1.0)  # bias column
    assert ys.min() >= 0.0


def test_min_norm_matches_numpy_pinv():
    rng = np.random.default_rng(1)
    phi = rng.standard_normal((4, 9))
    z = rng.standard_normal((4, 2))
    sol = dl.min_norm_solve(phi, z)
    expected = np.linalg.pinv(phi) @ z
    np.testing.assert_allclose(sol.weights, expected, atol=1e-10)
    assert sol.rank == 4
    assert sol.train_mse < 1e-20


def test_anchored_ridge_matches_numpy_solve():
    rng = np.random.default_rng(2)
    phi = rng.standard_normal((6, 4))
    z = rng.standard_normal((6, 2))
    anchor = rng.standard_normal((4, 2))
    lam = 0.05
    sol = dl.anchored_ridge_solve(phi, z, lam, anchor)
    expected = np.linalg.solve(
        phi.T @ phi + lam * np.eye(4), phi.T @ z + lam * anchor
    )
    np.testing.assert_allclose(sol.weights, expected, atol=1e-10)


def test_solution_set_dimension():
    desc = dl.solution_set(np.array([[1.0, 0.0]]), np.array([1.0]))
    assert desc.dim == 1
    np.testing.assert_allclose(desc.particular, [1.0, 0.0], atol=1e-12)


def test_mlp_roundtrip_and_growth():
    state = dl.init_mlp(7, 5, 4, 3, 0.1)
    assert state.param_count == 4 * 5 + 4 + 3 * 4 + 3
    x = np.random.default_rng(3).random((6, 5))
    out = dl.mlp_forward(state, x)
    assert out.shape == (6, 3)

    grown = dl.grow_hidden(state, 11, 6)
    np.testing.assert_array_equal(grown.w1[:4], state.w1)
    assert grown.hidden == 6


def test_training_reduces_loss():
    ds = make_split_dataset(seed=9)
    state = dl.init_mlp(1, ds.input_dim, 8, ds.num_classes, 0.1)
    cfg = dl.TrainConfig()
    cfg.learning_rate = 0.05
    cfg.batch_size = 10
    cfg.max_epochs = 40
    cfg.seed = 4
    log = dl.train_mlp(state, ds, cfg)
    assert len(log.epochs) == 40
    assert log.epochs[-1].train_mse < log.epochs[0].train_mse
    assert state.stop_reason == dl.MlpState.StopReason.EpochCap


def test_feature_sweep_determinism():
    cfg = dl.SweepConfig()
    cfg.experiment = dl.Experiment.FeatureSweep
    cfg.data.n_train = 30
    cfg.data.n_test = 15
    cfg.data.seed = 2
    cfg.data.synth_classes = 3
    cfg.data.synth_dim = 4
    cfg.d_grid = [0, 4, 16]
    cfg.repeats = 2
    points = dl.run_feature_sweep(cfg)
    again = dl.run_feature_sweep(cfg)
    assert len(points) == 6
    assert [p.test_mse for p in points] == [p.test_mse for p in again]
    summary = dl.summarize([p for p in points if p.lambda_ == 1e-8])
    assert summary.tail_test_mse > 0


def test_error_maps_to_python_exception():
    with pytest.raises(dl.DescentlabError):
        dl.load_mnist_idx("no-such-images", "no-such-labels")
    with pytest.raises(dl.DescentlabError):
        dl.min_norm_solve(np.ones((2, 2)), np.ones((3, 1)))


def test_config_text_roundtrip():
    cfg = dl.parse_config_text(dl.default_config_text())
    text = dl.serialize_config(cfg)
    again = dl.parse_config_text(text)
    assert dl.serialize_config(again) == text
    assert dl.config_hash(cfg) == dl.config_hash(again)
