"""From-scratch supervised classifiers: L2 logistic regression, linear SVM,
and a random forest, all seeded and deterministic."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, SingleClass


@dataclass
class TrainConfig:
    C: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-6
    n_trees: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.C <= 0 or self.max_iter <= 0 or self.tol <= 0 or self.n_trees <= 0:
            raise ValueError("C, max_iter, tol, and n_trees must all be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


@dataclass
class FeatureMatrix:
    values: np.ndarray
    row_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {self.values.shape}")
        self.row_ids = tuple(self.row_ids)
        if len(self.row_ids) != self.values.shape[0]:
            raise ValueError(
                f"{len(self.row_ids)} row ids for {self.values.shape[0]} rows"
            )
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteInput("feature matrix contains NaN or infinite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def concat_features(embedding: np.ndarray, lex: np.ndarray) -> np.ndarray:
    """Embedding entries followed by (standardized) lexicon entries; an empty
    lexicon block leaves the embedding unchanged."""
    e = np.asarray(embedding, dtype=np.float64).ravel()
    l = np.asarray(lex, dtype=np.float64).ravel()
    if not np.all(np.isfinite(e)) or (l.size and not np.all(np.isfinite(l))):
        raise NonFiniteInput("non-finite value in features to concatenate")
    if l.size == 0:
        return e
    return np.concatenate([e, l])


@dataclass
class LinearModel:
    weights: np.ndarray  # (1, d) binary, (K, d) one-vs-rest
    biases: np.ndarray  # (1,) or (K,)
    family: str  # "logistic" | "hinge"
    classes: tuple
    hyperparams: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class ForestModel:
    trees: list  # nested dicts: {"feature","threshold","left","right"} | {"counts"}
    seed: int
    classes: tuple
    hyperparams: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.hyperparams["dim"]


def _as_matrix(X) -> tuple[np.ndarray, tuple[str, ...] | None]:
    if isinstance(X, FeatureMatrix):
        return X.values, X.row_ids
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("feature matrix contains NaN or infinite entries")
    return arr, None


def _resolve_classes(y, classes) -> tuple:
    present = list(dict.fromkeys(y))
    if classes is None:
        return tuple(sorted(present, key=lambda c: (str(type(c)), c)))
    classes = tuple(classes)
    unknown = [c for c in present if c not in classes]
    if unknown:
        raise ValueError(f"labels {unknown} not in declared classes {classes}")
    return classes


def _canonical_order(Xv: np.ndarray, y_idx: np.ndarray) -> np.ndarray:
    # Full-batch sums are order-free mathematically; fixing a canonical row
    # order makes them order-free bitwise, so training is exactly invariant
    # to row permutation.
    keys = [y_idx] + [Xv[:, j] for j in range(Xv.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_objective(Xv, ys, w, b, C) -> float:
    """J(w, b) = 0.5 ||w||^2 + C * sum log(1 + exp(-y (w.x + b))); bias unregularized."""
    margins = ys * (Xv @ w + b)
    return 0.5 * float(w @ w) + C * float(np.logaddexp(0.0, -margins).sum())


def logistic_gradient(Xv, ys, w, b, C) -> tuple[np.ndarray, float]:
    margins = ys * (Xv @ w + b)
    s = _sigmoid(-margins)
    coef = ys * s
    gw = w - C * (Xv.T @ coef)
    gb = -C * float(coef.sum())
    return gw, gb


def hinge_objective(Xv, ys, w, b, C) -> float:
    """J(w, b) = 0.5 ||w||^2 + C * sum max(0, 1 - y (w.x + b))."""
    margins = ys * (Xv @ w + b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def _fit_logreg_binary(Xv, ys, C, max_iter, tol) -> tuple[np.ndarray, float]:
    n, d = Xv.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(max_iter):
        gw, gb = logistic_gradient(Xv, ys, w, b, C)
        gnorm2 = float(gw @ gw) + gb * gb
        if math.sqrt(gnorm2) <= tol:
            break
        j0 = logistic_objective(Xv, ys, w, b, C)
        # backtracking line search (Armijo), guarantees a non-increasing objective
        t = 1.0
        while True:
            w2 = w - t * gw
            b2 = b - t * gb
            if logistic_objective(Xv, ys, w2, b2, C) <= j0 - 1e-4 * t * gnorm2:
                break
            t *= 0.5
            if t < 1e-14:  # no descent step representable: numerically converged
                return w, b
        w, b = w2, b2
    return w, b


def _fit_svm_binary(Xv, ys, C, max_iter) -> tuple[np.ndarray, float]:
    n, d = Xv.shape
    w = np.zeros(d)
    b = 0.0
    best_obj = hinge_objective(Xv, ys, w, b, C)
    best = (w.copy(), b)
    for t in range(max_iter):
        margins = ys * (Xv @ w + b)
        active = margins < 1.0
        gw = w - C * (Xv[active].T @ ys[active])
        gb = -C * float(ys[active].sum())
        eta = 1.0 / (1.0 + t)
        w = w - eta * gw
        b = b - eta * gb
        obj = hinge_objective(Xv, ys, w, b, C)
        if obj < best_obj:
            best_obj = obj
            best = (w.copy(), b)
    return best


def _train_linear(X, y, cfg, classes, family) -> LinearModel:
    Xv, _ = _as_matrix(X)
    y = list(y)
    if len(y) != Xv.shape[0]:
        raise ValueError(f"{len(y)} labels for {Xv.shape[0]} rows")
    classes = _resolve_classes(y, classes)
    if len(set(y)) < 2:
        raise SingleClass(f"training labels are all {y[0]!r}")

    cls_index = {c: k for k, c in enumerate(classes)}
    y_idx = np.array([cls_index[lbl] for lbl in y], dtype=np.int64)
    order = _canonical_order(Xv, y_idx)
    Xs = Xv[order]
    ys_idx = y_idx[order]

    def fit(target_class_idx: int) -> tuple[np.ndarray, float]:
        ys = np.where(ys_idx == target_class_idx, 1.0, -1.0)
        if family == "logistic":
            return _fit_logreg_binary(Xs, ys, cfg.C, cfg.max_iter, cfg.tol)
        return _fit_svm_binary(Xs, ys, cfg.C, cfg.max_iter)

    if len(classes) == 2:
        # one (w, b) pair; the first declared class is the positive side
        w, b = fit(0)
        weights = w[None, :]
        biases = np.array([b])
    else:
        pairs = [fit(k) for k in range(len(classes))]
        weights = np.stack([w for w, _ in pairs])
        biases = np.array([b for _, b in pairs])

    hyper = {"C": cfg.C, "max_iter": cfg.max_iter, "tol": cfg.tol, "seed": cfg.seed}
    return LinearModel(weights=weights, biases=biases, family=family, classes=classes, hyperparams=hyper)


def train_logreg(X, y, cfg: TrainConfig, classes: Sequence | None = None) -> LinearModel:
    """Deterministic full-batch gradient descent with backtracking line search,
    started at zero, stopping at gradient norm <= tol or max_iter."""
    return _train_linear(X, y, cfg, classes, "logistic")


def train_linear_svm(X, y, cfg: TrainConfig, classes: Sequence | None = None) -> LinearModel:
    """Deterministic full-batch subgradient descent with step 1/(1+t),
    returning the best-objective iterate."""
    return _train_linear(X, y, cfg, classes, "hinge")


def _gini_best_split(col: np.ndarray, y_idx: np.ndarray, n_classes: int):
    """Best (threshold, weighted Gini) over midpoints of sorted unique values,
    or None when the column is constant."""
    order = np.argsort(col, kind="stable")
    sv = col[order]
    sy = y_idx[order]
    boundaries = np.nonzero(sv[1:] != sv[:-1])[0]  # split after these positions
    if boundaries.size == 0:
        return None
    n = sv.shape[0]
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), sy] = 1.0
    cum = np.cumsum(onehot, axis=0)
    left = cum[boundaries]  # (B, K)
    total = cum[-1]
    right = total - left
    nl = left.sum(axis=1)
    nr = right.sum(axis=1)
    # weighted Gini = 1 - (sum_l c^2/nl + sum_r c^2/nr) / n
    score = 1.0 - ((left**2).sum(axis=1) / nl + (right**2).sum(axis=1) / nr) / n
    best = int(np.argmin(score))
    pos = boundaries[best]
    threshold = (sv[pos] + sv[pos + 1]) / 2.0
    return float(threshold), float(score[best])


def _grow_tree(Xn, y_idx, rng, n_feats, n_classes):
    counts = np.bincount(y_idx, minlength=n_classes)
    if Xn.shape[0] < 2 or counts.max() == Xn.shape[0]:
        return {"counts": counts.tolist()}
    feats = rng.choice(Xn.shape[1], size=n_feats, replace=False)
    best = None  # (gini, feature, threshold); first strict improvement wins
    for f in feats:
        found = _gini_best_split(Xn[:, f], y_idx, n_classes)
        if found is None:
            continue
        threshold, gini = found
        if best is None or gini < best[0]:
            best = (gini, int(f), threshold)
    if best is None:
        return {"counts": counts.tolist()}
    _, f, threshold = best
    mask = Xn[:, f] <= threshold
    return {
        "feature": f,
        "threshold": threshold,
        "left": _grow_tree(Xn[mask], y_idx[mask], rng, n_feats, n_classes),
        "right": _grow_tree(Xn[~mask], y_idx[~mask], rng, n_feats, n_classes),
    }


def train_random_forest(X, y, cfg: TrainConfig, classes: Sequence | None = None) -> ForestModel:
    """Bagged Gini trees: per-tree bootstrap seeded as seed + tree index,
    ceil(sqrt(d)) features per node, grown until pure or under two samples.
    Single-class data is allowed (every tree is a constant leaf)."""
    Xv, _ = _as_matrix(X)
    y = list(y)
    if len(y) != Xv.shape[0]:
        raise ValueError(f"{len(y)} labels for {Xv.shape[0]} rows")
    if Xv.shape[0] < 2:
        raise ValueError("random forest needs at least two rows")
    classes = _resolve_classes(y, classes)
    cls_index = {c: k for k, c in enumerate(classes)}
    y_idx = np.array([cls_index[lbl] for lbl in y], dtype=np.int64)

    n, d = Xv.shape
    n_feats = int(math.ceil(math.sqrt(d)))
    trees = []
    for tree_i in range(cfg.n_trees):
        rng = np.random.default_rng(cfg.seed + tree_i)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(Xv[boot], y_idx[boot], rng, n_feats, len(classes)))

    hyper = {"n_trees": cfg.n_trees, "dim": d, "seed": cfg.seed}
    return ForestModel(trees=trees, seed=cfg.seed, classes=classes, hyperparams=hyper)


def decision_scores(model: LinearModel, X) -> np.ndarray:
    Xv, _ = _as_matrix(X)
    if Xv.shape[1] != model.dim:
        raise DimensionMismatch(
            f"model expects {model.dim} features, matrix has {Xv.shape[1]}"
        )
    return Xv @ model.weights.T + model.biases


def _tree_votes(tree, Xv, out, row_idx) -> None:
    if "counts" in tree:
        out[row_idx] = int(np.argmax(tree["counts"]))  # ties: lowest class index
        return
    mask = Xv[row_idx, tree["feature"]] <= tree["threshold"]
    if mask.any():
        _tree_votes(tree["left"], Xv, out, row_idx[mask])
    if (~mask).any():
        _tree_votes(tree["right"], Xv, out, row_idx[~mask])


def predict(model, X) -> list:
    """Labels for each row; every tie (zero score, equal votes, equal argmax)
    breaks toward the earlier class in declared order."""
    Xv, _ = _as_matrix(X)
    if isinstance(model, LinearModel):
        scores = decision_scores(model, Xv)
        if len(model.classes) == 2:
            pos, neg = model.classes
            return [pos if s >= 0.0 else neg for s in scores[:, 0]]
        idx = np.argmax(scores, axis=1)
        return [model.classes[i] for i in idx]
    if isinstance(model, ForestModel):
        if Xv.shape[1] != model.dim:
            raise DimensionMismatch(
                f"model expects {model.dim} features, matrix has {Xv.shape[1]}"
            )
        votes = np.zeros((Xv.shape[0], len(model.classes)), dtype=np.int64)
        picked = np.zeros(Xv.shape[0], dtype=np.int64)
        for tree in model.trees:
            _tree_votes(tree, Xv, picked, np.arange(Xv.shape[0]))
            votes[np.arange(Xv.shape[0]), picked] += 1
        return [model.classes[i] for i in np.argmax(votes, axis=1)]
    raise TypeError(f"cannot predict with {type(model).__name__}")


def model_to_json(model) -> str:
    """Self-describing portable record; floats keep full repr precision, so
    identical models serialize to identical bytes."""
    if isinstance(model, LinearModel):
        doc = {
            "family": model.family,
            "classes": list(model.classes),
            "hyperparams": model.hyperparams,
            "weights": [[float(v) for v in row] for row in model.weights],
            "biases": [float(v) for v in model.biases],
        }
    elif isinstance(model, ForestModel):
        doc = {
            "family": "forest",
            "classes": list(model.classes),
            "hyperparams": model.hyperparams,
            "seed": model.seed,
            "trees": model.trees,
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def model_from_json(text: str):
    doc = json.loads(text)
    classes = tuple(doc["classes"])
    if doc["family"] in ("logistic", "hinge"):
        return LinearModel(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            biases=np.asarray(doc["biases"], dtype=np.float64),
            family=doc["family"],
            classes=classes,
            hyperparams=doc.get("hyperparams", {}),
        )
    if doc["family"] == "forest":
        return ForestModel(
            trees=doc["trees"],
            seed=doc["seed"],
            classes=classes,
            hyperparams=doc.get("hyperparams", {}),
        )
    raise ValueError(f"unknown model family {doc['family']!r}")
