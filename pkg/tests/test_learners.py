import json

import numpy as np
import pytest

from handsel.errors import ClassMissingError, ConfigError, DimensionMismatchError, ModelFormatError
from handsel.learners import (
    TrainConfig,
    TreeEnsemble,
    TwoTargetModel,
    load_model,
    predict,
    predict_proba,
    save_model,
    scoreline,
    softmax,
    train_gbt,
    train_random_forest,
    train_tree,
    train_two_target,
)
from builders import ensemble_from_dicts

SMALL = TrainConfig(n_trees=10, max_depth=3, min_samples_leaf=1, bootstrap=False, seed=1)


def brute_force_root_split(X, y, min_leaf):
    """Exhaustive (feature, midpoint) search on squared error with the documented tie rule."""
    best = None
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2
            left, right = y[X[:, f] <= thr], y[X[:, f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            sse = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
            key = (round(sse, 9), f, thr)
            if best is None or key < best:
                best = key
    return best


def gini_root_split(X, y, k, min_leaf):
    best = None
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2
            imp = 0.0
            for part in (y[X[:, f] <= thr], y[X[:, f] > thr]):
                if len(part) < min_leaf:
                    imp = None
                    break
                p = np.bincount(part, minlength=k) / len(part)
                imp += len(part) * (1 - (p**2).sum())
            if imp is None:
                continue
            key = (round(imp, 9), f, thr)
            if best is None or key < best:
                best = key
    return best


class TestTree:
    def test_constant_target(self):
        t = train_tree(np.arange(10.0).reshape(-1, 1), np.full(10, 4.0), SMALL)
        assert t.n_nodes == 1 and t.value[0, 0] == 4.0 and t.cover[0] == 10

    def test_stump(self):
        x = np.array([0.1, 0.2, 0.3, 0.45, 0.55, 0.7, 0.9])
        y = (x > 0.5).astype(float)
        t = train_tree(x.reshape(-1, 1), y, TrainConfig(max_depth=1, min_samples_leaf=1))
        assert t.feature[0] == 0 and 0.45 < t.threshold[0] < 0.55
        assert t.threshold[0] == pytest.approx(0.5)
        assert np.array_equal(t.predict(x.reshape(-1, 1))[:, 0], y)

    def test_xor(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        t = train_tree(X, y, TrainConfig(max_depth=2, min_samples_leaf=1), "classification", 2)
        assert np.array_equal(np.argmax(t.predict(X), axis=1), y)
        # no single split helps, so the root falls back to feature 0 by the tie rule
        assert t.feature[0] == 0

    @pytest.mark.parametrize("seed", range(25))
    def test_root_split_matches_exhaustive_search(self, seed):
        rng = np.random.default_rng(seed)
        X = np.round(rng.normal(size=(30, 4)), 1)
        y = np.round(X[:, 1] * 2 + rng.normal(size=30), 2)
        t = train_tree(X, y, TrainConfig(max_depth=1, min_samples_leaf=3))
        _, f, thr = brute_force_root_split(X, y, 3)
        assert (t.feature[0], t.threshold[0]) == (f, pytest.approx(thr))

    @pytest.mark.parametrize("seed", range(15))
    def test_gini_split_matches_exhaustive_search(self, seed):
        rng = np.random.default_rng(100 + seed)
        X = rng.integers(0, 6, size=(40, 3)).astype(float)
        y = ((X[:, 2] > 2) + (rng.random(40) < 0.3)).astype(int)
        t = train_tree(X, y, TrainConfig(max_depth=1, min_samples_leaf=2), "classification", 3)
        _, f, thr = gini_root_split(X, y, 3, 2)
        assert (t.feature[0], t.threshold[0]) == (f, pytest.approx(thr))

    def test_tie_breaks_to_lowest_feature(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
        t = train_tree(X, np.array([1.0, 5.0, 1.0, 5.0]), TrainConfig(max_depth=1, min_samples_leaf=1))
        assert t.feature[0] == 0

    def test_covers_add_up(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(200, 5))
        t = train_tree(X, X[:, 0] + rng.normal(size=200), TrainConfig(max_depth=5, min_samples_leaf=4))
        assert t.cover[0] == 200
        for i in range(t.n_nodes):
            if not t.is_leaf(i):
                assert t.cover[i] == t.cover[t.left[i]] + t.cover[t.right[i]]
                assert not t.value[i].any()
            else:
                assert t.cover[i] >= 4
        assert t.max_depth <= 5

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(60, 3))
        y = X[:, 0] - X[:, 2] + 0.1 * rng.normal(size=60)
        perm = rng.permutation(60)
        cfg = TrainConfig(max_depth=4, min_samples_leaf=2)
        a, b = train_tree(X, y, cfg), train_tree(X[perm], y[perm], cfg)
        assert np.array_equal(a.feature, b.feature) and np.allclose(a.threshold, b.threshold, equal_nan=True)
        assert np.allclose(a.value, b.value, rtol=0, atol=1e-12)

    def test_errors(self):
        with pytest.raises(DimensionMismatchError):
            train_tree(np.zeros((10, 0)), np.zeros(10), SMALL)
        with pytest.raises(ConfigError):
            train_tree(np.zeros((3, 1)), np.zeros(3), TrainConfig(min_samples_leaf=2))
        with pytest.raises(ValueError):
            train_tree(np.array([[np.nan], [1.0]]), np.zeros(2), SMALL)


class TestForest:
    def test_identical_trees_without_bootstrap(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(50, 1))
        y = (X[:, 0] > 0).astype(float)
        cfg = TrainConfig(n_trees=5, max_depth=1, min_samples_leaf=1, bootstrap=False)
        forest = train_random_forest(X, y, cfg)
        single = train_tree(X, y, cfg)
        assert np.array_equal(forest.predict(X), single.predict(X)[:, 0])

    def test_mean_of_trees(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(80, 4))
        forest = train_random_forest(X, X[:, 1] + rng.normal(size=80), TrainConfig(n_trees=7, seed=3))
        per_tree = np.mean([t.predict(X)[:, 0] for t in forest.trees], axis=0)
        assert np.allclose(forest.predict(X), per_tree, rtol=0, atol=1e-12)

    def test_two_tree_forest_by_hand(self):
        trees = [{"value": [10.0], "cover": 5.0}, {"value": [20.0], "cover": 5.0}]
        ens = ensemble_from_dicts(trees, 2, kind="forest_mean")
        assert predict(ens, np.zeros((1, 2)))[0] == 15.0

    def test_single_leaf(self):
        ens = ensemble_from_dicts([{"value": [3.5], "cover": 1.0}], 3)
        assert ens.predict(np.ones((2, 3))).tolist() == [3.5, 3.5]

    def test_probabilities_normalised(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(150, 5))
        y = np.digitize(X[:, 0] + 0.5 * rng.normal(size=150), [-0.5, 0.5])
        for model in (train_random_forest(X, y, TrainConfig(n_trees=15, seed=1), "classification", 3),
                      train_gbt(X, y, TrainConfig(n_trees=15, max_depth=2, seed=1), "classification", 3)):
            P = predict_proba(model, rng.normal(size=(300, 5)))
            assert np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-9)
            assert np.all(P >= 0)

    def test_reproducible(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(100, 6))
        y = X[:, 0] * X[:, 1]
        cfg = TrainConfig(n_trees=12, max_depth=4, seed=11)
        assert train_random_forest(X, y, cfg).equals(train_random_forest(X, y, cfg))
        assert not train_random_forest(X, y, cfg).equals(train_random_forest(X, y, TrainConfig(n_trees=12, max_depth=4, seed=12)))

    def test_missing_class(self):
        X = np.random.default_rng(0).normal(size=(20, 2))
        with pytest.raises(ClassMissingError):
            train_random_forest(X, np.array([0, 2] * 10), SMALL, "classification", 3)


class TestBoosting:
    def test_linear_target(self):
        x = np.linspace(0, 1, 200).reshape(-1, 1)
        y = 2 * x[:, 0]
        model = train_gbt(x, y, TrainConfig(n_trees=300, max_depth=3, min_samples_leaf=1, learning_rate=0.3, seed=0))
        rmse = np.sqrt(np.mean((model.predict(x) - y) ** 2))
        assert rmse < 0.05 * y.std()

    def test_loss_non_increasing(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(120, 4))
        y = X[:, 0] ** 2 + rng.normal(size=120)
        reg = train_gbt(X, y, TrainConfig(n_trees=40, max_depth=3, seed=2))
        assert all(b <= a + 1e-12 for a, b in zip(reg.metadata["train_loss"], reg.metadata["train_loss"][1:]))
        labels = np.digitize(X[:, 1], [-0.4, 0.4])
        clf = train_gbt(X, labels, TrainConfig(n_trees=40, max_depth=2, seed=2), "classification", 3)
        losses = clf.metadata["train_loss"]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_base_scores(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(60, 2))
        y = rng.normal(5, 1, 60)
        assert train_gbt(X, y, TrainConfig(n_trees=2)).base_score[0] == pytest.approx(y.mean())
        labels = np.array([0] * 30 + [1] * 20 + [2] * 10)
        clf = train_gbt(X, labels, TrainConfig(n_trees=2), "classification", 3)
        assert np.allclose(clf.base_score, np.log([0.5, 1 / 3, 1 / 6]))

    def test_softmax(self):
        assert np.allclose(softmax(np.zeros(3)), [1 / 3] * 3)
        assert np.allclose(softmax(np.array([1000.0, 0.0, 0.0])), [1.0, 0.0, 0.0])


class TestTwoTarget:
    def test_identical_targets_identical_models_with_equal_seeds(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(80, 3))
        y = X[:, 0] * 3 + 28
        cfg = TrainConfig(n_trees=10, max_depth=3, subsample=1.0, seed=4)
        m = train_two_target(X, y, y, train_gbt, cfg)
        pred = m.predict(rng.normal(size=(20, 3)))
        assert np.array_equal(pred[:, 0], pred[:, 1])
        assert m.away.metadata["train_config"]["seed"] == 5

    def test_constant_targets(self):
        X = np.random.default_rng(13).normal(size=(40, 3))
        m = train_two_target(X, np.full(40, 30.0), np.full(40, 25.0), train_random_forest,
                             TrainConfig(n_trees=5, seed=0))
        assert np.all(m.predict(X) == [30.0, 25.0])

    def test_scoreline(self):
        assert scoreline(31.6, 24.2) == "32-24"

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            train_two_target(np.zeros((10, 2)), np.zeros(10), np.zeros(9))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(90, 4))
        y = np.digitize(X[:, 0], [-0.5, 0.5])
        names = ["a", "b", "c", "d"]
        models = [
            train_random_forest(X, y, TrainConfig(n_trees=4, seed=1), "classification", 3, names),
            train_gbt(X, y, TrainConfig(n_trees=4, seed=1), "classification", 3, names),
            train_two_target(X, X[:, 1], X[:, 2], train_gbt, TrainConfig(n_trees=4), names),
        ]
        for i, m in enumerate(models):
            back = load_model(save_model(m, tmp_path / f"m{i}.json"))
            assert back.equals(m)
            assert np.array_equal(back.predict(X), m.predict(X))
            assert save_model(back, tmp_path / "again.json").read_bytes() == (tmp_path / f"m{i}.json").read_bytes()
        assert isinstance(load_model(tmp_path / "m2.json"), TwoTargetModel)

    def test_nodes_carry_cover(self, tmp_path):
        m = train_gbt(np.arange(40.0).reshape(-1, 2), np.arange(20.0), TrainConfig(n_trees=2, min_samples_leaf=2))
        doc = json.loads(save_model(m, tmp_path / "m.json").read_text())

        def walk(node):
            assert node["cover"] > 0
            for child in ("left", "right"):
                if child in node:
                    walk(node[child])

        for t in doc["trees"]:
            walk(t)

    def test_rejects_foreign_documents(self):
        with pytest.raises(ModelFormatError):
            TreeEnsemble.from_dict({"format": "other", "version": 1})
        with pytest.raises(ModelFormatError):
            ensemble_from_dicts([{"feature": 0, "threshold": 0.0, "left": {"value": [1.0], "cover": 1.0},
                                  "right": {"value": [2.0]}, "cover": 2.0}], 1)
        with pytest.raises(ModelFormatError):
            ensemble_from_dicts([{"value": [1.0], "cover": 1.0}], 1, kind="bagged")

    def test_dimension_check(self):
        ens = ensemble_from_dicts([{"value": [1.0], "cover": 1.0}], 3)
        with pytest.raises(DimensionMismatchError):
            ens.predict(np.zeros((1, 4)))
