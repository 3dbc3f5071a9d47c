"""Bag-of-words baseline classifiers and the grid-search harness.

Four families: multinomial naive Bayes, ridge regression on +/-1 targets,
k-nearest neighbours with cosine similarity, and a small feedforward network
(five hidden layers of eight units). All prediction ties resolve to HOF,
matching the CNN's decision rule.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import EncodedExample, kfold
from .metrics import macro_f1
from .seeding import derived_rng

__all__ = [
    "BowFeaturizer",
    "featurize",
    "MnbModel",
    "mnb_train",
    "mnb_predict",
    "RidgeModel",
    "ridge_train",
    "ridge_predict",
    "knn_predict",
    "DnnConfig",
    "DnnModel",
    "make_baseline",
    "BASELINE_FAMILIES",
    "grid_search",
    "GridSearchResult",
]

HOF, NOT = 1, 0


class BowFeaturizer:
    """Bag-of-words featurizer; TF-IDF uses idf = ln((1+N)/(1+df)) + 1."""

    def __init__(self, vocab_size: int, scheme: str = "tfidf"):
        if scheme not in ("count", "tfidf"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.vocab_size = vocab_size
        self.scheme = scheme
        self.idf: Optional[np.ndarray] = None

    def fit(self, examples: Sequence[EncodedExample]) -> "BowFeaturizer":
        df = np.zeros(self.vocab_size, dtype=np.float64)
        for ex in examples:
            for wid in set(ex.ids):
                df[wid] += 1.0
        n = len(examples)
        self.idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
        return self

    def vector(self, ex: EncodedExample) -> dict:
        """Sparse token-id -> weight map."""
        counts: dict = {}
        for wid in ex.ids:
            counts[wid] = counts.get(wid, 0.0) + 1.0
        if self.scheme == "tfidf":
            if self.idf is None:
                raise RuntimeError("featurizer must be fit before tfidf transform")
            return {wid: c * self.idf[wid] for wid, c in counts.items()}
        return counts

    def dense(self, ex: EncodedExample) -> np.ndarray:
        out = np.zeros(self.vocab_size, dtype=np.float64)
        for wid, val in self.vector(ex).items():
            out[wid] = val
        return out

    def matrix(self, examples: Sequence[EncodedExample]) -> np.ndarray:
        return np.stack([self.dense(ex) for ex in examples]) if examples else np.zeros(
            (0, self.vocab_size)
        )


def featurize(ex: EncodedExample, featurizer: BowFeaturizer) -> dict:
    """Sparse bag-of-words vector for one example under a fitted featurizer."""
    return featurizer.vector(ex)


# -- multinomial naive Bayes -------------------------------------------------


@dataclass
class MnbModel:
    log_prior: np.ndarray  # indexed by label (NOT=0, HOF=1)
    log_lik: np.ndarray  # (2, V) log token likelihoods with Laplace smoothing
    alpha: float


def mnb_train(
    examples: Sequence[EncodedExample], vocab_size: int, alpha: float = 1.0
) -> MnbModel:
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    counts = np.zeros((2, vocab_size), dtype=np.float64)
    class_n = np.zeros(2, dtype=np.float64)
    for ex in examples:
        class_n[ex.label] += 1.0
        for wid in ex.ids:
            counts[ex.label, wid] += 1.0
    if class_n.min() == 0:
        raise ValueError("both classes must appear in the training data")
    log_prior = np.log(class_n / class_n.sum())
    totals = counts.sum(axis=1, keepdims=True)
    log_lik = np.log(counts + alpha) - np.log(totals + alpha * vocab_size)
    return MnbModel(log_prior, log_lik, alpha)


def mnb_predict(model: MnbModel, bow: dict) -> tuple:
    """Class plus log-posteriors (up to the shared evidence constant)."""
    scores = model.log_prior.copy()
    for wid, cnt in bow.items():
        scores += cnt * model.log_lik[:, wid]
    label = HOF if scores[HOF] >= scores[NOT] else NOT
    return label, scores


# -- ridge classifier --------------------------------------------------------


@dataclass
class RidgeModel:
    w: np.ndarray  # feature weights
    b: float  # unpenalized bias
    lam: float


def _cg_solve(matvec, b: np.ndarray, diag: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradient for an SPD system."""
    precond = np.where(diag > 0, diag, 1.0)
    x = np.zeros_like(b)
    r = b - matvec(x)
    z = r / precond
    p = z.copy()
    rz = float(r @ z)
    for _ in range(max_iter):
        if float(np.linalg.norm(r)) < tol:
            return x
        ap = matvec(p)
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = r / precond
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if float(np.linalg.norm(r)) < tol:
        return x
    raise RuntimeError(f"conjugate gradient did not converge in {max_iter} iterations")


def ridge_train(x: np.ndarray, y: np.ndarray, lam: float) -> RidgeModel:
    """L2-penalized least squares on +/-1 targets, bias unpenalized.

    Solves the normal equations with conjugate gradient; the stopping
    residual is 1e-8 (relative to ||b|| for conditioning) and the iteration
    budget is 10 per unknown.
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    n, v = x.shape
    xa = np.hstack([x, np.ones((n, 1))])  # bias column last
    rhs = xa.T @ y
    penalty = np.full(v + 1, lam)
    penalty[-1] = 0.0  # bias unpenalized

    def matvec(w):
        return xa.T @ (xa @ w) + penalty * w

    tol = 1e-8 * max(1.0, float(np.linalg.norm(rhs)))
    diag = (xa * xa).sum(axis=0) + penalty
    w = _cg_solve(matvec, rhs, diag, tol, max_iter=10 * (v + 1))
    return RidgeModel(w[:-1], float(w[-1]), lam)


def ridge_predict(model: RidgeModel, x: np.ndarray) -> int:
    score = float(x @ model.w) + model.b
    return HOF if score >= 0.0 else NOT


# -- k-nearest neighbours ----------------------------------------------------


def _cosine_rows(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise cosine; zero-norm rows or query give similarity 0."""
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        return np.zeros(matrix.shape[0])
    norms = np.linalg.norm(matrix, axis=1)
    sims = np.zeros(matrix.shape[0])
    nz = norms > 0
    sims[nz] = (matrix[nz] @ q) / (norms[nz] * qn)
    return sims


def knn_predict(q: np.ndarray, train: np.ndarray, labels: Sequence[int], k: int) -> int:
    """Majority vote among the k most cosine-similar training vectors.

    Similarity ties keep training order (lower index wins); vote ties go to
    HOF.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if train.shape[0] == 0:
        raise ValueError("training set is empty")
    sims = _cosine_rows(train, q)
    order = np.argsort(-sims, kind="stable")[:k]
    votes = sum(1 if labels[int(i)] == HOF else -1 for i in order)
    return HOF if votes >= 0 else NOT


# -- feedforward network -----------------------------------------------------


@dataclass(frozen=True)
class DnnConfig:
    hidden: tuple = (8, 8, 8, 8, 8)
    lr: float = 0.04
    epochs: int = 200
    batch_size: int = 32
    dropout_input: float = 0.5
    dropout_h1: float = 0.5
    dropout_h2: float = 0.5
    seed: int = 0


class DnnModel:
    """Five ReLU hidden layers of eight units, 2-way softmax, plain SGD.

    Inverted dropout on the input vector and the first two hidden
    activations, per-site rates from the config.
    """

    def __init__(self, input_dim: int, cfg: DnnConfig = DnnConfig()):
        self.cfg = cfg
        self.input_dim = input_dim
        rng = derived_rng(cfg.seed, "dnn-init")
        dims = [input_dim, *cfg.hidden, 2]
        self.params = {}
        for i in range(len(dims) - 1):
            bound = np.sqrt(6.0 / (dims[i] + dims[i + 1]))
            self.params[f"w{i}"] = rng.uniform(-bound, bound, size=(dims[i], dims[i + 1]))
            self.params[f"b{i}"] = np.zeros(dims[i + 1])
        self.n_layers = len(dims) - 1

    # masks[i] applies to the activation feeding layer i (0 = input vector)
    def make_masks(self, rng: np.random.Generator) -> dict:
        cfg = self.cfg
        masks = {}
        for idx, rate, size in (
            (0, cfg.dropout_input, self.input_dim),
            (1, cfg.dropout_h1, cfg.hidden[0]),
            (2, cfg.dropout_h2, cfg.hidden[1]),
        ):
            keep = 1.0 - rate
            masks[idx] = (rng.random(size) < keep).astype(np.float64) / keep
        return masks

    def _forward(self, x: np.ndarray, masks: Optional[dict]):
        acts = []  # post-dropout activation feeding each layer
        zs = []
        a = x * masks[0] if masks is not None else x
        for i in range(self.n_layers):
            acts.append(a)
            z = a @ self.params[f"w{i}"] + self.params[f"b{i}"]
            zs.append(z)
            if i < self.n_layers - 1:
                a = np.maximum(z, 0.0)
                if masks is not None and (i + 1) in masks:
                    a = a * masks[i + 1]
        z_out = zs[-1]
        shifted = z_out - z_out.max()
        exp = np.exp(shifted)
        probs = exp / exp.sum()
        return acts, zs, probs

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self._forward(x, None)[2]

    def predict(self, x: np.ndarray) -> int:
        probs = self.predict_proba(x)
        return HOF if probs[HOF] >= probs[NOT] else NOT

    def batch_loss(self, xs: np.ndarray, ys: Sequence[int], masks_list=None) -> float:
        total = 0.0
        for i in range(xs.shape[0]):
            masks = masks_list[i] if masks_list is not None else None
            probs = self._forward(xs[i], masks)[2]
            total += -np.log(max(probs[ys[i]], 1e-12))
        return total / xs.shape[0]

    def batch_loss_grads(self, xs: np.ndarray, ys: Sequence[int], masks_list=None):
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        total = 0.0
        for i in range(xs.shape[0]):
            masks = masks_list[i] if masks_list is not None else None
            acts, zs, probs = self._forward(xs[i], masks)
            total += -np.log(max(probs[ys[i]], 1e-12))
            delta = probs.copy()
            delta[ys[i]] -= 1.0  # d(cross-entropy)/d(output logits)
            for layer in range(self.n_layers - 1, -1, -1):
                grads[f"w{layer}"] += np.outer(acts[layer], delta)
                grads[f"b{layer}"] += delta
                if layer == 0:
                    break
                da = self.params[f"w{layer}"] @ delta
                if masks is not None and layer in masks:
                    da = da * masks[layer]
                delta = da * (zs[layer - 1] > 0)
        inv = 1.0 / xs.shape[0]
        for k in grads:
            grads[k] *= inv
        return total / xs.shape[0], grads

    def fit(self, xs: np.ndarray, ys: Sequence[int]) -> list:
        cfg = self.cfg
        shuffle_rng = derived_rng(cfg.seed, "dnn-shuffle")
        mask_rng = derived_rng(cfg.seed, "dnn-dropout")
        n = xs.shape[0]
        losses = []
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(n)
            running = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                batch_x = xs[idx]
                batch_y = [ys[int(i)] for i in idx]
                masks_list = [self.make_masks(mask_rng) for _ in idx]
                loss, grads = self.batch_loss_grads(batch_x, batch_y, masks_list)
                if not np.isfinite(loss):
                    raise RuntimeError(f"DNN diverged: non-finite loss at epoch {epoch}")
                for k in self.params:
                    self.params[k] -= cfg.lr * grads[k]
                running += loss * len(idx)
            losses.append(running / n)
        return losses


# -- uniform wrapper + grid search -------------------------------------------


class _BaselineWrapper:
    """fit/predict facade over a baseline family for grid search and the CLI."""

    def __init__(self, family: str, params: dict, vocab_size: int):
        self.family = family
        self.params = dict(params)
        self.vocab_size = vocab_size
        self._fitted = None
        self._featurizer = None
        self._train_matrix = None
        self._train_labels = None

    def fit(self, examples: Sequence[EncodedExample]) -> "_BaselineWrapper":
        p = self.params
        if self.family == "mnb":
            self._featurizer = BowFeaturizer(self.vocab_size, "count")
            self._fitted = mnb_train(examples, self.vocab_size, p.get("alpha", 1.0))
        elif self.family == "ridge":
            self._featurizer = BowFeaturizer(self.vocab_size, "tfidf").fit(examples)
            x = self._featurizer.matrix(examples)
            y = np.array([1.0 if ex.label == HOF else -1.0 for ex in examples])
            self._fitted = ridge_train(x, y, p.get("lambda", 1.0))
        elif self.family == "knn":
            self._featurizer = BowFeaturizer(self.vocab_size, "tfidf").fit(examples)
            self._train_matrix = self._featurizer.matrix(examples)
            self._train_labels = [ex.label for ex in examples]
        elif self.family == "dnn":
            self._featurizer = BowFeaturizer(self.vocab_size, "tfidf").fit(examples)
            cfg = DnnConfig(
                lr=p.get("lr", 0.04),
                epochs=p.get("epochs", 200),
                batch_size=p.get("batch_size", 32),
                seed=p.get("seed", 0),
            )
            model = DnnModel(self.vocab_size, cfg)
            model.fit(
                self._featurizer.matrix(examples), [ex.label for ex in examples]
            )
            self._fitted = model
        else:
            raise ValueError(f"unknown baseline family {self.family!r}")
        return self

    def predict(self, ex: EncodedExample) -> int:
        if self.family == "mnb":
            return mnb_predict(self._fitted, self._featurizer.vector(ex))[0]
        if self.family == "ridge":
            return ridge_predict(self._fitted, self._featurizer.dense(ex))
        if self.family == "knn":
            return knn_predict(
                self._featurizer.dense(ex),
                self._train_matrix,
                self._train_labels,
                self.params.get("k", 5),
            )
        return self._fitted.predict(self._featurizer.dense(ex))

    def predict_batch(self, examples: Sequence[EncodedExample]) -> list:
        return [self.predict(ex) for ex in examples]


BASELINE_FAMILIES = ("mnb", "ridge", "knn", "dnn")

DEFAULT_GRIDS = {
    "mnb": {"alpha": [0.1, 0.5, 1.0, 2.0]},
    "ridge": {"lambda": [0.1, 1.0, 10.0]},
    "knn": {"k": [1, 3, 5, 9]},
    "dnn": {"epochs": [100], "lr": [0.04]},
}


def make_baseline(family: str, params: dict, vocab_size: int) -> _BaselineWrapper:
    if family not in BASELINE_FAMILIES:
        raise ValueError(f"unknown baseline family {family!r}")
    return _BaselineWrapper(family, params, vocab_size)


def expand_grid(grid) -> list:
    """dict-of-lists -> list of parameter dicts, in key/value declaration order."""
    if isinstance(grid, list):
        return [dict(g) for g in grid]
    keys = list(grid)
    combos = itertools.product(*(grid[k] for k in keys))
    return [dict(zip(keys, combo)) for combo in combos]


@dataclass
class GridSearchResult:
    rows: list  # (params, fold_scores, mean) per grid point, in grid order
    best_index: int

    @property
    def best_params(self) -> dict:
        return self.rows[self.best_index][0]


def grid_search(
    family: str,
    grid,
    examples: Sequence[EncodedExample],
    vocab_size: int,
    folds: int = 10,
    seed: int = 0,
) -> GridSearchResult:
    """Exhaustive search scored by mean macro-F1 over k-fold cross-validation.

    Ties keep the first grid point in declaration order.
    """
    points = expand_grid(grid)
    if not points:
        raise ValueError("empty parameter grid")
    partitions = kfold(len(examples), folds, seed)
    rows = []
    best_index = 0
    best_mean = -1.0
    for gi, params in enumerate(points):
        scores = []
        for train_idx, test_idx in partitions:
            train = [examples[i] for i in train_idx]
            test = [examples[i] for i in test_idx]
            model = make_baseline(family, params, vocab_size).fit(train)
            preds = model.predict_batch(test)
            scores.append(macro_f1(preds, [ex.label for ex in test]))
        mean = sum(scores) / len(scores)
        rows.append((params, scores, mean))
        if mean > best_mean:
            best_mean = mean
            best_index = gi
    return GridSearchResult(rows, best_index)
