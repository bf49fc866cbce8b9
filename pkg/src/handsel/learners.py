"""Decision-tree ensembles: CART trees, random forests, gradient boosting.

Trees are stored as flat node arrays (``feature == -1`` marks a leaf); a row
goes left when ``x[feature] <= threshold``. Every node records its cover,
the number of training rows that reached it, which the tree explainer
needs later.

Split search is exhaustive over midpoints between consecutive distinct
sorted values. Ties go to the lowest feature index, then the smallest
threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ClassMissingError, ConfigError, DimensionMismatchError, ModelFormatError

FORMAT = "handsel.ensemble"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 300
    max_depth: int = 6
    min_samples_leaf: int = 5
    features_per_split: int | None = None  # None: sqrt(n_features) for forests, all for boosting
    learning_rate: float = 0.1
    subsample: float = 1.0
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "min_samples_leaf"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("features_per_split must be positive")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("learning_rate must be in (0, 1]")
        if not 0 < self.subsample <= 1:
            raise ConfigError("subsample must be in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


FOREST_DEFAULTS = TrainConfig(n_trees=300, max_depth=6, min_samples_leaf=5)
GBT_DEFAULTS = TrainConfig(n_trees=200, max_depth=3, min_samples_leaf=10, learning_rate=0.05, subsample=0.8)


@dataclass(eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_outputs(self) -> int:
        return self.value.shape[1]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    @property
    def max_depth(self) -> int:
        def depth(node):
            if self.is_leaf(node):
                return 0
            return 1 + max(depth(self.left[node]), depth(self.right[node]))

        return depth(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            n = node[active]
            go_left = X[rows[active], self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self, node: int = 0) -> dict:
        if self.is_leaf(node):
            return {"value": [float(v) for v in self.value[node]], "cover": float(self.cover[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "cover": float(self.cover[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, root: dict, n_outputs: int) -> "Tree":
        b = _TreeBuilder(n_outputs)

        def visit(d):
            if "cover" not in d:
                raise ModelFormatError("tree node without cover")
            if "value" in d:
                if len(d["value"]) != n_outputs:
                    raise ModelFormatError("leaf value length does not match n_outputs")
                return b.leaf(np.asarray(d["value"], dtype=float), float(d["cover"]))
            node = b.split(int(d["feature"]), float(d["threshold"]), float(d["cover"]))
            b.set_children(node, visit(d["left"]), visit(d["right"]))
            return node

        visit(root)
        return b.build()

    def equals(self, other: "Tree") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=f == "threshold")
            for f in ("feature", "threshold", "left", "right", "value", "cover")
        )


class _TreeBuilder:
    def __init__(self, n_outputs: int):
        self.n_outputs = n_outputs
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.cover = [], []

    def _add(self, feature, threshold, value, cover) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.cover.append(cover)
        return len(self.feature) - 1

    def leaf(self, value, cover) -> int:
        return self._add(-1, math.nan, np.asarray(value, dtype=float), cover)

    def split(self, feature, threshold, cover, value=None) -> int:
        if value is None:
            value = np.zeros(self.n_outputs)
        return self._add(feature, threshold, np.asarray(value, dtype=float), cover)

    def set_children(self, node, left, right):
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=float),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=float).reshape(len(self.feature), self.n_outputs),
            cover=np.array(self.cover, dtype=float),
        )


# --- split search -----------------------------------------------------------

@njit(cache=True)
def _split_scores(X, order, in_node, n_node, stats, candidates, min_leaf):
    """Per candidate feature: best child score and its threshold (``-inf`` when none is valid).

    ``order`` holds each column's stable argsort over all of the tree's rows;
    rows outside the node are skipped, so no node ever sorts again.
    """
    n = X.shape[0]
    m = stats.shape[1]
    total = np.zeros(m)
    for r in range(n):
        if in_node[r]:
            for c in range(m):
                total[c] += stats[r, c]
    k = len(candidates)
    best = np.full(k, -np.inf)
    thresholds = np.zeros(k)
    left = np.empty(m)
    for j in range(k):
        f = candidates[j]
        left[:] = 0.0
        count = 0
        prev = -1
        for idx in range(n):
            r = order[idx, f]
            if not in_node[r]:
                continue
            if prev >= 0:
                n_right = n_node - count
                if n_right < min_leaf:
                    break
                lo, hi = X[prev, f], X[r, f]
                if count >= min_leaf and hi > lo:
                    s_left = 0.0
                    s_right = 0.0
                    for c in range(m):
                        s_left += left[c] ** 2
                        s_right += (total[c] - left[c]) ** 2
                    score = s_left / count + s_right / n_right
                    if score > best[j]:
                        best[j] = score
                        t = 0.5 * (lo + hi)
                        thresholds[j] = t if t < hi else lo
            for c in range(m):
                left[c] += stats[r, c]
            count += 1
            prev = r
    parent = 0.0
    for c in range(m):
        parent += total[c] ** 2
    return best, thresholds, parent / n_node


def _best_split(X, order, rows, stats, candidates, min_leaf):
    """Best ``(gain, feature, threshold)`` for the node holding ``rows``, or None.

    ``stats`` is ``(n, m)``; the impurity score of a child with column sums
    ``S`` and ``c`` rows is ``sum(S**2) / c``, which covers both squared
    error (``m = 1``) and Gini on one-hot targets.
    """
    in_node = np.zeros(len(X), dtype=np.bool_)
    in_node[rows] = True
    best, thresholds, parent = _split_scores(X, order, in_node, len(rows), stats,
                                             np.asarray(candidates, dtype=np.int64), min_leaf)
    # strict comparison in candidate order keeps the lowest feature on ties
    j = int(np.argmax(best))
    if best[j] == -np.inf:
        return None
    return best[j] - parent, int(candidates[j]), float(thresholds[j])


def _presort(X) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))


@njit(cache=True)
def _subset_order(order, counts):
    """Column orders of ``X[rows]`` from those of ``X``, for sorted ``rows`` with multiplicities ``counts``.

    Equal to a stable argsort of the subset: copies of a row sit next to
    each other, in the same place the row holds in the full ordering.
    """
    n, p = order.shape
    start = np.zeros(n, np.int64)
    total = 0
    for r in range(n):
        start[r] = total
        total += counts[r]
    out = np.empty((total, p), np.int64)
    for f in range(p):
        idx = 0
        for i in range(n):
            r = order[i, f]
            for c in range(counts[r]):
                out[idx, f] = start[r] + c
                idx += 1
    return out


def _rows_order(order, rows, n):
    return _subset_order(order, np.bincount(rows, minlength=n).astype(np.int64))


def _grow(X, stats, leaf_value, config: TrainConfig, max_features: int, rng, n_outputs, order=None):
    """Grow one tree depth first. ``leaf_value(rows)`` gives a leaf's output."""
    n_features = X.shape[1]
    b = _TreeBuilder(n_outputs)
    X = np.ascontiguousarray(X)
    stats = np.ascontiguousarray(stats, dtype=float)
    if order is None:
        order = _presort(X)

    def pure(rows):
        s = stats[rows]
        return bool(np.all(s == s[0]))

    def node(rows, depth):
        cover = float(len(rows))
        if depth >= config.max_depth or len(rows) < 2 * config.min_samples_leaf or pure(rows):
            return b.leaf(leaf_value(rows), cover)
        if max_features >= n_features:
            candidates = np.arange(n_features)
        else:
            candidates = np.sort(rng.choice(n_features, size=max_features, replace=False))
        found = _best_split(X, order, rows, stats, candidates, config.min_samples_leaf)
        if found is None:
            return b.leaf(leaf_value(rows), cover)
        _, f, thr = found
        idx = b.split(f, thr, cover)
        go_left = X[rows, f] <= thr
        left = node(rows[go_left], depth + 1)
        right = node(rows[~go_left], depth + 1)
        b.set_children(idx, left, right)
        return idx

    node(np.arange(len(X)), 0)
    return b.build()


def _check_X(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError("X must be a 2-D matrix")
    if X.shape[1] == 0:
        raise DimensionMismatchError("X has zero columns")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains missing or non-finite values; impute upstream")
    return X


def _check_rows(X, y, config: TrainConfig) -> None:
    if len(y) != len(X):
        raise DimensionMismatchError(f"{len(X)} rows but {len(y)} targets")
    if len(X) < 2 * config.min_samples_leaf:
        raise ConfigError(f"need at least {2 * config.min_samples_leaf} rows, got {len(X)}")


def train_tree(
    X,
    y,
    config: TrainConfig = TrainConfig(),
    task: str = "regression",
    n_classes: int | None = None,
    rng: np.random.Generator | None = None,
    max_features: int | None = None,
) -> Tree:
    """Fit one CART tree.

    Regression trees minimise squared error and store leaf means;
    classification trees minimise Gini impurity and store class
    frequencies (``y`` holds labels ``0..n_classes-1``).
    """
    X = _check_X(X)
    y = np.asarray(y)
    _check_rows(X, y, config)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return _fit_tree(X, y, config, task, n_classes, rng, max_features)


def _fit_tree(X, y, config, task, n_classes, rng, max_features, order=None) -> Tree:
    max_features = max_features or config.features_per_split or X.shape[1]
    max_features = min(max_features, X.shape[1])
    if task == "regression":
        stats = y.astype(float).reshape(-1, 1)
        return _grow(X, stats, lambda rows: [stats[rows, 0].mean()], config, max_features, rng, 1, order)
    if task == "classification":
        k = int(n_classes if n_classes is not None else y.max() + 1)
        stats = np.eye(k)[y.astype(int)]
        return _grow(X, stats, lambda rows: stats[rows].mean(axis=0), config, max_features, rng, k, order)
    raise ConfigError(f"unknown task {task!r}")


# --- ensembles --------------------------------------------------------------

def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@njit(cache=True)
def _leaf_sum(X, feature, threshold, left, right, value, roots):
    out = np.zeros((X.shape[0], value.shape[1]))
    for i in range(X.shape[0]):
        for t in range(len(roots)):
            node = roots[t]
            while feature[node] >= 0:
                node = left[node] if X[i, feature[node]] <= threshold[node] else right[node]
            for k in range(value.shape[1]):
                out[i, k] += value[node, k]
    return out


@dataclass(eq=False)
class TreeEnsemble:
    trees: list[Tree]
    kind: str  # forest_mean | boosted_sum
    task: str  # regression | classification
    base_score: np.ndarray
    n_features: int
    feature_names: list[str]
    learning_rate: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.base_score = np.asarray(self.base_score, dtype=float).reshape(-1)
        if self.kind not in ("forest_mean", "boosted_sum"):
            raise ModelFormatError(f"unknown ensemble kind {self.kind!r}")
        for t in self.trees:
            if np.any(t.feature >= self.n_features):
                raise ModelFormatError("tree references a feature beyond n_features")

    @property
    def n_outputs(self) -> int:
        return len(self.base_score)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatchError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def cached(self, name, build):
        """Memoise ``build()`` until the list of trees changes.

        Trees are treated as immutable once they belong to an ensemble.
        """
        key = tuple(map(id, self.trees))
        memo = self.__dict__.setdefault("_memo", {})
        if name not in memo or memo[name][0] != key:
            memo[name] = (key, build())
        return memo[name][1]

    def packed(self):
        """All trees as one node table: ``(feature, threshold, left, right, value, cover, roots)``.

        Child indices are shifted to the table; leaves keep ``-1``.
        """
        return self.cached("packed", self._pack)

    def _pack(self):
        if not self.trees:
            return (np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64),
                    np.zeros((0, self.n_outputs)), np.zeros(0), np.zeros(0, np.int64))
        sizes = np.array([t.n_nodes for t in self.trees])
        roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

        def children(name):
            return np.concatenate([np.where(getattr(t, name) >= 0, getattr(t, name) + r, -1)
                                   for t, r in zip(self.trees, roots)]).astype(np.int64)

        return (
            np.concatenate([t.feature for t in self.trees]).astype(np.int64),
            np.concatenate([t.threshold for t in self.trees]).astype(float),
            children("left"),
            children("right"),
            np.concatenate([t.value for t in self.trees]).astype(float),
            np.concatenate([t.cover for t in self.trees]).astype(float),
            roots,
        )

    def raw(self, X) -> np.ndarray:
        """Model output in score space, shape ``(n_rows, n_outputs)``."""
        X = np.ascontiguousarray(self._check(X))
        feature, threshold, left, right, value, _, roots = self.packed()
        total = _leaf_sum(X, feature, threshold, left, right, value, roots)
        if self.kind == "forest_mean":
            return self.base_score + total / max(len(self.trees), 1)
        return self.base_score + self.learning_rate * total

    def predict(self, X) -> np.ndarray:
        """Regression values ``(n_rows,)`` or, for classifiers, class labels."""
        if self.task == "classification":
            return np.argmax(self.predict_proba(X), axis=1)
        return self.raw(X)[:, 0]

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "classification":
            raise ConfigError("predict_proba needs a classifier")
        raw = self.raw(X)
        if self.kind == "boosted_sum":
            return softmax(raw)
        return raw / raw.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "task": self.task,
            "base_score": [float(v) for v in self.base_score],
            "learning_rate": float(self.learning_rate),
            "n_features": self.n_features,
            "feature_names": list(self.feature_names),
            "metadata": self.metadata,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        if d.get("format") != FORMAT or d.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format {d.get('format')!r} v{d.get('version')}")
        n_out = len(d["base_score"])
        return cls(
            trees=[Tree.from_dict(t, n_out) for t in d["trees"]],
            kind=d["kind"],
            task=d["task"],
            base_score=np.asarray(d["base_score"], dtype=float),
            n_features=int(d["n_features"]),
            feature_names=list(d["feature_names"]),
            learning_rate=float(d["learning_rate"]),
            metadata=d.get("metadata", {}),
        )

    def equals(self, other: "TreeEnsemble") -> bool:
        return (
            self.kind == other.kind
            and self.task == other.task
            and np.array_equal(self.base_score, other.base_score)
            and self.n_features == other.n_features
            and self.feature_names == other.feature_names
            and self.learning_rate == other.learning_rate
            and self.metadata == other.metadata
            and len(self.trees) == len(other.trees)
            and all(a.equals(b) for a, b in zip(self.trees, other.trees))
        )


def predict(ensemble: TreeEnsemble, X) -> np.ndarray:
    return ensemble.predict(X)


def predict_proba(ensemble: TreeEnsemble, X) -> np.ndarray:
    return ensemble.predict_proba(X)


def _class_labels(y, n_classes):
    y = np.asarray(y)
    if not np.all(y == np.round(y)) or y.min() < 0:
        raise ConfigError("classification targets must be labels 0..C-1")
    y = y.astype(int)
    k = int(n_classes if n_classes is not None else y.max() + 1)
    counts = np.bincount(y, minlength=k)
    if len(counts) > k:
        raise ConfigError(f"label {y.max()} outside 0..{k - 1}")
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ClassMissingError(f"classes {missing.tolist()} absent from training targets")
    return y, k, counts


def _names(feature_names, n_features):
    if feature_names is None:
        return [f"x{i}" for i in range(n_features)]
    if len(feature_names) != n_features:
        raise DimensionMismatchError("feature_names length does not match X")
    return list(feature_names)


def train_random_forest(
    X, y, config: TrainConfig = FOREST_DEFAULTS, task: str = "regression",
    n_classes: int | None = None, feature_names=None,
) -> TreeEnsemble:
    """Bagged CART trees with per-split feature sampling.

    Classification forests average per-tree class frequencies (soft voting).
    """
    X = _check_X(X)
    n, p = X.shape
    k = 1
    if task == "classification":
        y, k, _ = _class_labels(y, n_classes)
    else:
        y = np.asarray(y, dtype=float)
    _check_rows(X, y, config)
    max_features = config.features_per_split or max(1, int(math.sqrt(p)))
    order = _presort(X)
    trees = []
    for child in np.random.SeedSequence(config.seed).spawn(config.n_trees):
        rng = np.random.default_rng(child)
        # sorted draws keep duplicates adjacent, so the full-matrix ordering carries over
        rows = np.sort(rng.integers(0, n, size=n)) if config.bootstrap else np.arange(n)
        trees.append(_fit_tree(X[rows], y[rows], config, task, k, rng, max_features, _rows_order(order, rows, n)))
    return TreeEnsemble(
        trees=trees,
        kind="forest_mean",
        task=task,
        base_score=np.zeros(k),
        n_features=p,
        feature_names=_names(feature_names, p),
        metadata={"model": "forest", "train_config": config.to_dict()},
    )


def _subsample_rows(n, config, rng):
    if config.subsample >= 1.0:
        return np.arange(n)
    m = max(2 * config.min_samples_leaf, int(round(config.subsample * n)))
    return np.sort(rng.choice(n, size=min(m, n), replace=False))


def train_gbt(
    X, y, config: TrainConfig = GBT_DEFAULTS, task: str = "regression",
    n_classes: int | None = None, feature_names=None,
) -> TreeEnsemble:
    """Gradient boosting with shrinkage.

    Regression fits each tree to the current residuals under squared loss,
    starting from the target mean. Classification fits one tree per class
    and round to the multinomial-deviance gradient, with Newton leaf steps
    and a softmax link, starting from the log class priors. Per-round
    training losses land in ``metadata["train_loss"]``.
    """
    X = _check_X(X)
    n, p = X.shape
    _check_rows(X, y, config)
    rng = np.random.default_rng(config.seed)
    max_features = config.features_per_split or p
    order = _presort(X)
    trees, losses = [], []

    if task == "regression":
        y = np.asarray(y, dtype=float)
        base = np.array([y.mean()])
        F = np.full(n, base[0])
        for _ in range(config.n_trees):
            rows = _subsample_rows(n, config, rng)
            tree = _fit_tree(X[rows], (y - F)[rows], config, "regression", None, rng, max_features,
                             _rows_order(order, rows, n))
            trees.append(tree)
            F = F + config.learning_rate * tree.predict(X)[:, 0]
            losses.append(float(np.mean((y - F) ** 2)))
    elif task == "classification":
        y, k, counts = _class_labels(y, n_classes)
        base = np.log(counts / n)
        Y = np.eye(k)[y]
        F = np.tile(base, (n, 1))
        for _ in range(config.n_trees):
            P = softmax(F)
            R = Y - P
            rows = _subsample_rows(n, config, rng)
            update = np.zeros_like(F)
            round_order = _rows_order(order, rows, n)
            for c in range(k):
                r = R[:, c]
                tree = _fit_tree(X[rows], r[rows], config, "regression", None, rng, max_features, round_order)
                leaves = tree.apply(X[rows])
                value = np.zeros((tree.n_nodes, k))
                for leaf in np.unique(leaves):
                    rr = r[rows][leaves == leaf]
                    den = np.sum(np.abs(rr) * (1.0 - np.abs(rr)))
                    value[leaf, c] = (k - 1) / k * rr.sum() / den if den > 1e-12 else 0.0
                tree.value = value
                trees.append(tree)
                update += tree.predict(X)
            F = F + config.learning_rate * update
            losses.append(float(-np.mean(np.log(softmax(F)[np.arange(n), y]))))
    else:
        raise ConfigError(f"unknown task {task!r}")

    return TreeEnsemble(
        trees=trees,
        kind="boosted_sum",
        task=task,
        base_score=base,
        n_features=p,
        feature_names=_names(feature_names, p),
        learning_rate=config.learning_rate,
        metadata={"model": "gbt", "train_config": config.to_dict(), "train_loss": losses},
    )


TRAINERS = {"forest": train_random_forest, "gbt": train_gbt}


@dataclass(eq=False)
class TwoTargetModel:
    """Independent home-goal and away-goal regressors sharing hyperparameters."""

    home: TreeEnsemble
    away: TreeEnsemble

    @property
    def feature_names(self) -> list[str]:
        return self.home.feature_names

    def predict(self, X) -> np.ndarray:
        return np.column_stack([self.home.predict(X), self.away.predict(X)])

    def to_dict(self) -> dict:
        return {"format": FORMAT + ".two_target", "version": FORMAT_VERSION,
                "home": self.home.to_dict(), "away": self.away.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TwoTargetModel":
        if d.get("format") != FORMAT + ".two_target":
            raise ModelFormatError(f"not a two-target model: {d.get('format')!r}")
        return cls(TreeEnsemble.from_dict(d["home"]), TreeEnsemble.from_dict(d["away"]))

    def equals(self, other: "TwoTargetModel") -> bool:
        return self.home.equals(other.home) and self.away.equals(other.away)


def train_two_target(X, y_home, y_away, trainer=train_gbt, config: TrainConfig | None = None,
                     feature_names=None) -> TwoTargetModel:
    if not len(y_home) == len(y_away) == len(X):
        raise DimensionMismatchError("X, y_home and y_away must have equal row counts")
    if config is None:
        config = GBT_DEFAULTS if trainer is train_gbt else FOREST_DEFAULTS
    home = trainer(X, y_home, config, "regression", feature_names=feature_names)
    away = trainer(X, y_away, replace(config, seed=config.seed + 1), "regression",
                   feature_names=feature_names)
    return TwoTargetModel(home, away)


def scoreline(home: float, away: float) -> str:
    """Presentation-only rounded score, e.g. ``"32-24"``."""
    return f"{int(round(home))}-{int(round(away))}"


def save_model(model, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_model(path):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("format") == FORMAT + ".two_target":
        return TwoTargetModel.from_dict(d)
    return TreeEnsemble.from_dict(d)
