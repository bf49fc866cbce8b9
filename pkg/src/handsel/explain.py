"""Shapley-value explanations for tree ensembles.

``tree_shap`` is the polynomial-time path-dependent algorithm: it walks
each tree once, carrying the set of features seen on the current path with
their "zero" (cover-weighted) and "one" (follows the instance) fractions,
and extends or unwinds the path weights at every split. ``shap_bruteforce``
enumerates every feature subset against the same cover-weighted value
function and serves as its oracle.

Attributions are in the ensemble's score space (pre-softmax for boosted
classifiers), where ``base_value + sum(contributions) == prediction``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import DimensionMismatchError, EmptyInputError, MissingCoverError, TooManyFeaturesError
from .learners import Tree, TreeEnsemble

BRUTEFORCE_MAX_FEATURES = 12


@dataclass
class ShapExplanation:
    base_value: np.ndarray  # (n_outputs,)
    contributions: np.ndarray  # (n_features, n_outputs)
    prediction: np.ndarray  # (n_outputs,)
    feature_names: list[str]
    feature_values: np.ndarray

    def output(self, k: int = 0) -> "ShapExplanation":
        return ShapExplanation(
            self.base_value[k : k + 1],
            self.contributions[:, k : k + 1],
            self.prediction[k : k + 1],
            self.feature_names,
            self.feature_values,
        )

    @property
    def additivity_residual(self) -> float:
        return float(np.max(np.abs(self.base_value + self.contributions.sum(axis=0) - self.prediction)))


def _check_cover(tree: Tree) -> None:
    if tree.n_nodes == 0 or not np.all(np.isfinite(tree.cover)) or np.any(tree.cover <= 0):
        raise MissingCoverError("every node needs a positive cover")


def _check_instance(ensemble: TreeEnsemble, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != ensemble.n_features:
        raise DimensionMismatchError(f"expected {ensemble.n_features} features, got {x.shape[0]}")
    return x


def tree_expected_value(tree: Tree) -> np.ndarray:
    _check_cover(tree)
    leaves = tree.feature < 0
    return (tree.cover[leaves, None] * tree.value[leaves]).sum(axis=0) / tree.cover[0]


def _combine(ensemble: TreeEnsemble, per_tree):
    total = np.sum(per_tree, axis=0) if per_tree else 0.0
    if ensemble.kind == "forest_mean":
        return total / max(len(ensemble.trees), 1)
    return ensemble.learning_rate * total


def expected_value(ensemble: TreeEnsemble) -> np.ndarray:
    """Cover-weighted mean output of the ensemble over its training distribution."""
    return ensemble.cached("expected_value", lambda: ensemble.base_score + _combine(
        ensemble, [tree_expected_value(t) for t in ensemble.trees])).copy()


def _checked_table(ensemble: TreeEnsemble):
    def build():
        for t in ensemble.trees:
            _check_cover(t)
        return ensemble.packed()
    return ensemble.cached("shap_table", build)


# --- path-dependent TreeSHAP ------------------------------------------------

@njit(cache=True)
def _extend(feat, zero, one, weight, depth, zero_fraction, one_fraction, feature):
    feat[depth] = feature
    zero[depth] = zero_fraction
    one[depth] = one_fraction
    weight[depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        weight[i + 1] += one_fraction * weight[i] * (i + 1) / (depth + 1)
        weight[i] = zero_fraction * weight[i] * (depth - i) / (depth + 1)


@njit(cache=True)
def _unwind(feat, zero, one, weight, depth, index):
    one_fraction = one[index]
    zero_fraction = zero[index]
    next_one = weight[depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = weight[i]
            weight[i] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - weight[i] * zero_fraction * (depth - i) / (depth + 1)
        else:
            weight[i] = weight[i] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(index, depth):
        feat[i] = feat[i + 1]
        zero[i] = zero[i + 1]
        one[i] = one[i + 1]


@njit(cache=True)
def _unwound_sum(zero, one, weight, depth, index):
    one_fraction = one[index]
    zero_fraction = zero[index]
    next_one = weight[depth]
    total = 0.0
    if one_fraction != 0.0:
        for i in range(depth - 1, -1, -1):
            tmp = next_one / ((i + 1) * one_fraction)
            total += tmp
            next_one = weight[i] - tmp * zero_fraction * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += weight[i] / (zero_fraction * (depth - i))
    return total * (depth + 1)


@njit(cache=True)
def _max_level(left, right, roots):
    level = np.zeros(len(left), np.int64)
    stack = np.empty(len(left) + 1, np.int64)
    deepest = 0
    for t in range(len(roots)):
        stack[0] = roots[t]
        top = 1
        while top:
            top -= 1
            node = stack[top]
            deepest = max(deepest, level[node])
            if left[node] >= 0:
                for child in (left[node], right[node]):
                    level[child] = level[node] + 1
                    stack[top] = child
                    top += 1
    return deepest


@njit(cache=True)
def _walk(x, feature, threshold, left, right, value, cover, phi, root,
          feat, zero, one, weight, s_node, s_depth, s_zero, s_one, s_feature, s_level):
    """One tree's attributions, depth first with an explicit stack.

    Row ``L`` of the path buffers holds the path of the node being visited at
    tree level ``L``; a child copies its parent's row, which stays intact
    until the parent's whole subtree is done.
    """
    s_node[0] = root
    s_depth[0] = 0
    s_zero[0] = 1.0
    s_one[0] = 1.0
    s_feature[0] = -1
    s_level[0] = 0
    top = 1
    while top:
        top -= 1
        node, depth, level = s_node[top], s_depth[top], s_level[top]
        if level:
            for i in range(depth):
                feat[level, i] = feat[level - 1, i]
                zero[level, i] = zero[level - 1, i]
                one[level, i] = one[level - 1, i]
                weight[level, i] = weight[level - 1, i]
        pf, pz, po, pw = feat[level], zero[level], one[level], weight[level]
        _extend(pf, pz, po, pw, depth, s_zero[top], s_one[top], s_feature[top])

        f = feature[node]
        if f < 0:
            for i in range(1, depth + 1):
                w = _unwound_sum(pz, po, pw, depth, i)
                scale = w * (po[i] - pz[i])
                for k in range(value.shape[1]):
                    phi[pf[i], k] += scale * value[node, k]
            continue

        if x[f] <= threshold[node]:
            hot, cold = left[node], right[node]
        else:
            hot, cold = right[node], left[node]
        incoming_zero = 1.0
        incoming_one = 1.0
        # a feature already on the path is unwound and re-entered with merged fractions
        for k in range(1, depth + 1):
            if pf[k] == f:
                incoming_zero = pz[k]
                incoming_one = po[k]
                _unwind(pf, pz, po, pw, depth, k)
                depth -= 1
                break
        # cold below hot, so the hot subtree is visited first
        for child, one_fraction in ((cold, 0.0), (hot, incoming_one)):
            s_node[top] = child
            s_depth[top] = depth + 1
            s_zero[top] = cover[child] / cover[node] * incoming_zero
            s_one[top] = one_fraction
            s_feature[top] = f
            s_level[top] = level + 1
            top += 1


@njit(cache=True)
def _ensemble_phi(X, feature, threshold, left, right, value, cover, roots, n_features):
    """Summed per-tree attributions for every row, shape ``(n_rows, n_features, n_outputs)``."""
    phi = np.zeros((X.shape[0], n_features, value.shape[1]))
    size = _max_level(left, right, roots) + 2
    feat = np.zeros((size, size), np.int64)
    zero = np.zeros((size, size))
    one = np.zeros((size, size))
    weight = np.zeros((size, size))
    s_node = np.empty(2 * size, np.int64)
    s_depth = np.empty(2 * size, np.int64)
    s_zero = np.empty(2 * size)
    s_one = np.empty(2 * size)
    s_feature = np.empty(2 * size, np.int64)
    s_level = np.empty(2 * size, np.int64)
    for i in range(X.shape[0]):
        for t in range(len(roots)):
            _walk(X[i], feature, threshold, left, right, value, cover, phi[i], roots[t],
                  feat, zero, one, weight, s_node, s_depth, s_zero, s_one, s_feature, s_level)
    return phi


def _contributions(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    feature, threshold, left, right, value, cover, roots = _checked_table(ensemble)
    phi = _ensemble_phi(np.ascontiguousarray(X, dtype=float), feature, threshold, left, right, value,
                        cover, roots, ensemble.n_features)
    if ensemble.kind == "forest_mean":
        return phi / max(len(ensemble.trees), 1)
    return ensemble.learning_rate * phi


def tree_shap(ensemble: TreeEnsemble, x) -> ShapExplanation:
    """Exact path-dependent Shapley values of one instance."""
    x = _check_instance(ensemble, x)
    return ShapExplanation(
        base_value=expected_value(ensemble),
        contributions=_contributions(ensemble, x.reshape(1, -1))[0],
        prediction=ensemble.raw(x)[0],
        feature_names=list(ensemble.feature_names),
        feature_values=x,
    )


# --- brute-force oracle ------------------------------------------------------

def _subset_values(tree: Tree, x: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Cover-weighted expectation of one tree for every subset (row of ``masks``).

    Inside a subset the walk follows ``x``; outside it averages both
    children by cover.
    """

    def walk(node):
        if tree.feature[node] < 0:
            return np.broadcast_to(tree.value[node], (len(masks), tree.n_outputs))
        f = tree.feature[node]
        lo, hi = tree.left[node], tree.right[node]
        v_left, v_right = walk(lo), walk(hi)
        follow = v_left if x[f] <= tree.threshold[node] else v_right
        averaged = (tree.cover[lo] * v_left + tree.cover[hi] * v_right) / tree.cover[node]
        return np.where(masks[:, f : f + 1], follow, averaged)

    return walk(0)


def shap_bruteforce(ensemble: TreeEnsemble, x) -> ShapExplanation:
    """Shapley values by enumerating all ``2**n_features`` coalitions."""
    x = _check_instance(ensemble, x)
    m = ensemble.n_features
    if m > BRUTEFORCE_MAX_FEATURES:
        raise TooManyFeaturesError(f"{m} features; brute force supports at most {BRUTEFORCE_MAX_FEATURES}")
    for t in ensemble.trees:
        _check_cover(t)
    subsets = np.arange(2**m)
    masks = ((subsets[:, None] >> np.arange(m)) & 1).astype(bool)
    if ensemble.trees:
        v = ensemble.base_score + _combine(ensemble, [_subset_values(t, x, masks) for t in ensemble.trees])
    else:
        v = np.tile(ensemble.base_score, (len(subsets), 1))
    sizes = masks.sum(axis=1)
    weights = np.array([math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m) for s in range(m)])
    phi = np.zeros((m, ensemble.n_outputs))
    for i in range(m):
        without = subsets[~masks[:, i]]
        w = weights[sizes[without]]
        phi[i] = (w[:, None] * (v[without | (1 << i)] - v[without])).sum(axis=0)
    return ShapExplanation(
        base_value=v[0].copy(),
        contributions=phi,
        prediction=v[-1].copy(),
        feature_names=list(ensemble.feature_names),
        feature_values=x,
    )


# --- global importance and export -------------------------------------------

def shap_matrix(ensemble: TreeEnsemble, X) -> np.ndarray:
    """Contributions for every row, shape ``(n_rows, n_features, n_outputs)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != ensemble.n_features:
        raise DimensionMismatchError(f"expected rows of {ensemble.n_features} features")
    return _contributions(ensemble, X)


def global_importance(ensemble: TreeEnsemble, X, output: int | None = 0) -> list[tuple[str, float]]:
    """Mean absolute contribution per feature, largest first (ties by name).

    ``output=None`` averages over all outputs of a multi-output model.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyInputError("global importance needs at least one row")
    return rank_importance(shap_matrix(ensemble, X), ensemble.feature_names, output)


def rank_importance(phi: np.ndarray, feature_names, output: int | None = 0) -> list[tuple[str, float]]:
    """Ranking from a precomputed :func:`shap_matrix`, so several outputs share one pass."""
    phi = np.abs(phi)
    imp = phi.mean(axis=(0, 2)) if output is None else phi[:, :, output].mean(axis=0)
    ranked = sorted(zip(feature_names, imp.tolist()), key=lambda t: (-t[1], t[0]))
    return [(name, float(v)) for name, v in ranked]


def write_importance(ranking, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "importance"])
        for rank, (name, value) in enumerate(ranking, start=1):
            w.writerow([rank, name, repr(value)])
    return path


BASE_ROW = "<base_value>"
PREDICTION_ROW = "<prediction>"


def export_force_data(explanation: ShapExplanation, path, output: int = 0, unit: str = "goals") -> Path:
    """Write ``(feature, value, contribution)`` rows, largest signed contribution first.

    The file opens with a rounded ``# Prediction: 32 goals`` line, followed
    by the CSV header, the full-precision prediction and base value rows,
    then one row per feature.
    """
    path = Path(path)
    contrib = explanation.contributions[:, output]
    order = sorted(range(len(contrib)), key=lambda i: (-contrib[i], explanation.feature_names[i]))
    prediction = float(explanation.prediction[output])
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# Prediction: {int(round(prediction))} {unit}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "value", "contribution"])
        w.writerow([PREDICTION_ROW, "", repr(prediction)])
        w.writerow([BASE_ROW, "", repr(float(explanation.base_value[output]))])
        for i in order:
            w.writerow([explanation.feature_names[i], repr(float(explanation.feature_values[i])), repr(float(contrib[i]))])
    return path


def read_force_data(path) -> dict:
    """Parse a force-data file back into prediction, base value and per-feature rows."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        title = fh.readline().lstrip("# ").strip()
        rows = list(csv.DictReader(fh))
    out = {"title": title, "features": {}, "values": {}}
    for row in rows:
        if row["feature"] == PREDICTION_ROW:
            out["prediction"] = float(row["contribution"])
        elif row["feature"] == BASE_ROW:
            out["base_value"] = float(row["contribution"])
        else:
            out["features"][row["feature"]] = float(row["contribution"])
            out["values"][row["feature"]] = float(row["value"])
    out["order"] = list(out["features"])
    return out
