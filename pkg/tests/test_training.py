import json
import math

import numpy as np
import pytest

from jamcast.errors import ConfigError, ValidationError
from jamcast.evaluation import split_train_test
from jamcast.trees.grower import sigmoid
from jamcast.trees.training import (
    Ensemble,
    TrainConfig,
    load_model,
    model_to_doc,
    predict,
    predict_margin,
    save_model,
    train_gbt,
    train_rf,
    train_xgb,
)


def _linearly_separable():
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    y = np.array([False, False, True, True])
    return x, y


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(n_trees=-1).validate()
    with pytest.raises(ConfigError):
        TrainConfig(max_depth=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(lam=-1).validate()
    with pytest.raises(ConfigError):
        TrainConfig(n_workers=0).validate()
    TrainConfig().validate()


def test_xgb_zero_trees_predicts_base_rate():
    x, y = _linearly_separable()
    model = train_xgb(x, y, TrainConfig(n_trees=0))
    p = predict(model, x)
    assert np.allclose(p, sigmoid(model.base_margin))
    assert model.base_margin == pytest.approx(math.log(0.5 / 0.5), abs=1e-12)


def test_xgb_separable_stump_perfect_training_accuracy():
    x, y = _linearly_separable()
    model = train_xgb(x, y, TrainConfig(n_trees=1, max_depth=1, lam=0.0, min_child_weight=0.0))
    p = predict(model, x)
    assert ((p >= 0.5) == y).all()
    assert len(model.trees) == 1
    internal = [n for n in model.trees[0].nodes if not n.is_leaf]
    assert len(internal) == 1
    assert internal[0].threshold == 2.0


def test_gbt_zero_trees_base_rate():
    x, y = _linearly_separable()
    model = train_gbt(x, y, TrainConfig(n_trees=0))
    assert np.allclose(predict(model, x), 0.5)


def test_gbt_first_order_leaf_weights():
    # with h == 1 per row, leaf weight -G/(count + lam)
    x, y = _linearly_separable()
    model = train_gbt(x, y, TrainConfig(n_trees=1, max_depth=1, lam=0.0, min_child_weight=0.0))
    tree = model.trees[0]
    leaves = [n for n in tree.nodes if n.is_leaf]
    # g at base margin 0 is +-0.5; each side has two rows: weight = -(-1)/2 or -(1)/2
    assert sorted(round(n.value, 12) for n in leaves) == [-0.5, 0.5]


def test_gbt_and_xgb_first_trees_differ_with_lambda():
    # lambda rescales gains differently under h=1 vs h=p(1-p), flipping the
    # chosen split on this frozen dataset
    rng = np.random.default_rng(0)
    x = rng.integers(0, 6, size=(20, 3)).astype(float)
    y = rng.random(20) < 0.5
    tc = TrainConfig(n_trees=2, max_depth=3, max_leaves=8, lam=1.0, seed=0)
    mx = train_xgb(x, y, tc)
    mg = train_gbt(x, y, tc)
    sx = [(n.feature, n.bin_threshold) for n in mx.trees[0].nodes]
    sg = [(n.feature, n.bin_threshold) for n in mg.trees[0].nodes]
    assert sx != sg


def test_rf_single_tree_reduction_case():
    rng = np.random.default_rng(5)
    x = rng.integers(0, 6, size=(60, 3)).astype(float)
    y = rng.random(60) < 0.5
    tc = TrainConfig(
        n_trees=1, max_depth=4, subsample_rows=1.0, subsample_features=1.0, bootstrap=False
    )
    model = train_rf(x, y, tc)
    assert len(model.trees) == 1
    # every training row lands in a leaf whose value is that leaf's class fraction
    p = predict(model, x)
    assert ((p >= 0.0) & (p <= 1.0)).all()
    # plain tree: training with a different seed gives the identical tree
    model2 = train_rf(x, y, TrainConfig(
        n_trees=1, max_depth=4, subsample_rows=1.0, subsample_features=1.0,
        bootstrap=False, seed=999,
    ))
    assert json.dumps(model_to_doc(model)["trees"]) == json.dumps(model_to_doc(model2)["trees"])


def test_rf_all_true_labels():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((30, 2))
    y = np.ones(30, dtype=bool)
    model = train_rf(x, y, TrainConfig(n_trees=3, max_depth=3))
    assert np.allclose(predict(model, x), 1.0)


def test_rf_seed_determinism_across_workers(small_matrix):
    tc1 = TrainConfig(n_trees=2, max_depth=3, seed=3, n_workers=1, subsample_features=0.5)
    tc2 = TrainConfig(n_trees=2, max_depth=3, seed=3, n_workers=4, subsample_features=0.5)
    m1 = train_rf(small_matrix, config=tc1)
    m2 = train_rf(small_matrix, config=tc2)
    assert json.dumps(model_to_doc(m1), sort_keys=True) == json.dumps(
        model_to_doc(m2), sort_keys=True
    )


def test_boosting_worker_invariance(small_matrix):
    docs = []
    for w in (1, 2, 4):
        tc = TrainConfig(n_trees=3, max_depth=4, seed=9, n_workers=w)
        model = train_xgb(small_matrix, config=tc)
        docs.append(json.dumps(model_to_doc(model), sort_keys=True))
    assert docs[0] == docs[1] == docs[2]


def test_margin_update_identity(small_matrix):
    train, _ = split_train_test(small_matrix, 0.75, 1)
    tc = TrainConfig(n_trees=4, max_depth=4, seed=2)
    model = train_xgb(train, config=tc)
    # recompute margins from scratch over all trees
    margins = np.full(train.n_rows, model.base_margin)
    for tree in model.trees:
        margins += model.learning_rate * tree.predict_values(train.values)
    recomputed = predict_margin(model, train)
    np.testing.assert_allclose(margins, recomputed, atol=1e-9, rtol=0)


def test_monotone_binning_invariance():
    # strictly increasing transforms leave binned decisions, hence
    # predictions on the training rows, bit-identical
    rng = np.random.default_rng(8)
    x = rng.integers(0, 50, size=(120, 3)).astype(float)
    y = rng.random(120) < 0.4
    tc = TrainConfig(n_trees=3, max_depth=3, max_bins=256)
    p_base = predict(train_xgb(x, y, tc), x)
    x2 = np.stack([np.exp(x[:, 0] / 10.0), x[:, 1] ** 3, 5.0 * x[:, 2] - 7.0], axis=1)
    p_trans = predict(train_xgb(x2, y, tc), x2)
    assert np.array_equal(p_base, p_trans)


def test_predict_contracts():
    x, y = _linearly_separable()
    model = train_xgb(x, y, TrainConfig(n_trees=1, max_depth=1))
    # empty boosting ensemble with base margin zero predicts one half
    empty = Ensemble(
        kind="xgb", trees=[], learning_rate=0.3, base_margin=0.0,
        n_features=1, schema_fingerprint="raw:1", config=TrainConfig(),
    )
    assert predict(empty, x).tolist() == [0.5] * 4
    with pytest.raises(ValidationError):
        predict(model, np.zeros((2, 7)))


def test_predict_stump_sigmoid_values():
    from jamcast.trees.grower import DecisionTree, TreeNode

    stump = DecisionTree(
        nodes=[
            TreeNode(feature=0, bin_threshold=0, threshold=1.5, left=1, right=2, gain=1.0),
            TreeNode(value=1.0),
            TreeNode(value=-1.0),
        ]
    )
    model = Ensemble(
        kind="xgb", trees=[stump], learning_rate=1.0, base_margin=0.0,
        n_features=1, schema_fingerprint="raw:1", config=TrainConfig(),
    )
    p = predict(model, np.array([[1.0], [2.0]]))
    assert p[0] == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-12)
    assert p[1] == pytest.approx(1 / (1 + math.exp(1)), abs=1e-12)


def test_rf_prediction_averages():
    from jamcast.trees.grower import DecisionTree, TreeNode

    t1 = DecisionTree(nodes=[TreeNode(value=1.0)])
    t2 = DecisionTree(nodes=[TreeNode(value=0.0)])
    model = Ensemble(
        kind="rf", trees=[t1, t2], learning_rate=1.0, base_margin=0.0,
        n_features=2, schema_fingerprint="raw:2", config=TrainConfig(),
    )
    assert predict(model, np.zeros((3, 2))).tolist() == [0.5, 0.5, 0.5]


def test_missing_values_routed_by_direction():
    x = np.array([[1.0], [4.0], [np.nan], [np.nan], [2.0], [3.0]])
    y = np.array([False, True, True, True, False, True])
    model = train_xgb(x, y, TrainConfig(n_trees=3, max_depth=2, min_child_weight=0.0, lam=0.1))
    p = predict(model, x)
    assert np.isfinite(p).all()
    # NaN rows got pushed toward the positive side by the learned direction
    assert p[2] > 0.5 and p[3] > 0.5


def test_model_serialization_round_trip(tmp_path, small_matrix):
    tc = TrainConfig(n_trees=2, max_depth=3, seed=4)
    model = train_xgb(small_matrix, config=tc)
    path = tmp_path / "model.json"
    save_model(path, model, run_id="deadbeef")
    loaded = load_model(path)
    assert loaded.kind == "xgb"
    assert loaded.base_margin == model.base_margin
    assert loaded.schema_fingerprint == model.schema_fingerprint
    np.testing.assert_array_equal(
        predict(loaded, small_matrix), predict(model, small_matrix)
    )
    # saving the loaded model reproduces the file byte for byte
    path2 = tmp_path / "model2.json"
    save_model(path2, loaded, run_id="deadbeef")
    assert path.read_bytes() == path2.read_bytes()


def test_model_doc_excludes_worker_count(small_matrix):
    tc = TrainConfig(n_trees=1, max_depth=2, n_workers=4)
    doc = model_to_doc(train_xgb(small_matrix, config=tc))
    assert "n_workers" not in doc["config"]
    assert doc["config"]["max_depth"] == 2


def test_schema_fingerprint_checked(small_matrix):
    from jamcast.ingest import FeatureMatrix, schema_for

    model = train_xgb(small_matrix, config=TrainConfig(n_trees=1, max_depth=2))
    honest = FeatureMatrix(
        values=small_matrix.values[:10, :10],
        labels=small_matrix.labels[:10],
        schema=schema_for("honest"),
    )
    with pytest.raises(ValidationError):
        predict(model, honest)
