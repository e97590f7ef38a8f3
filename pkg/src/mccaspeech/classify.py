"""Classifiers on flattened reduced representations, and feature ranking.

Probabilities are for the "pathological" class (label 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ArgumentError, ConfigError, NumericError, PersistenceError, TrainingError
from .matrixio import as_array

# Hidden-layer grid searched for the MLP: {2,3,4} layers x {64,128} units.
MLP_GRID = tuple({"hidden_layers": h, "units": u} for h in (2, 3, 4) for u in (64, 128))


@dataclass(eq=False)
class SampleTable:
    features: np.ndarray  # n x d
    labels: np.ndarray  # n, values in {0, 1}
    speaker_ids: list[str]
    feature_names: list[str]

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.array(self.labels, dtype=np.int64)
        self.speaker_ids = [str(s) for s in self.speaker_ids]
        self.feature_names = list(self.feature_names)
        n, d = self.features.shape
        if self.labels.shape != (n,) or len(self.speaker_ids) != n:
            raise ArgumentError("features, labels and speaker_ids disagree on the sample count")
        if len(self.feature_names) != d:
            raise ArgumentError(f"{len(self.feature_names)} feature names for {d} features")
        if n < 1 or d < 1:
            raise ArgumentError(f"empty sample table ({n} x {d})")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ArgumentError("labels must be 0 or 1")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def rows(self, mask) -> SampleTable:
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return SampleTable(
            self.features[idx], self.labels[idx],
            [self.speaker_ids[i] for i in idx], self.feature_names,
        )

    def columns(self, idx) -> SampleTable:
        idx = np.asarray(idx, dtype=np.int64)
        return SampleTable(
            self.features[:, idx], self.labels, self.speaker_ids,
            [self.feature_names[i] for i in idx],
        )


def flat_feature_names(n_rows: int, n_components: int) -> list[str]:
    return [f"bin{f}:comp{c}" for f in range(n_rows) for c in range(n_components)]


def table_from_matrices(matrices, labels, speaker_ids) -> SampleTable:
    """Flatten equally-shaped F x t matrices row-major (feature index f*t + c)."""
    arrays = [as_array(m) for m in matrices]
    if not arrays:
        raise ArgumentError("no matrices to tabulate")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ArgumentError("all matrices must share one shape")
    feats = np.stack([a.reshape(-1) for a in arrays])
    return SampleTable(feats, labels, speaker_ids, flat_feature_names(*shape))


def _check_two_classes(labels):
    if np.unique(labels).size < 2:
        raise TrainingError("training data must contain both classes")


# --- logistic regression ------------------------------------------------------

@dataclass(eq=False)
class LogRegModel:
    weights: np.ndarray
    bias: float
    l2: float
    seed: int = 0
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias


def logreg_loss_and_grad(w, b, x, y, l2):
    """Mean cross-entropy plus ``l2/2 ||w||^2``, and its gradient in (w, b)."""
    z = x @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = (expit(z) - y) / y.shape[0]
    return loss, x.T @ r + l2 * w, np.sum(r)


def train_logreg(data: SampleTable, l2: float = 1e-2, seed: int = 0,
                 max_iter: int = 10_000, tol: float = 1e-6) -> LogRegModel:
    """Full-batch gradient descent with Armijo backtracking, from zero weights.

    Stops when the gradient infinity-norm drops to ``tol`` or after
    ``max_iter`` iterations. ``seed`` is recorded only; training is
    deterministic from the zero start.
    """
    _check_two_classes(data.labels)
    x = data.features
    y = data.labels.astype(np.float64)
    w = np.zeros(x.shape[1])
    b = 0.0
    loss, gw, gb = logreg_loss_and_grad(w, b, x, y, l2)
    history = [float(loss)]
    step = 1.0
    for _ in range(max_iter):
        if max(np.max(np.abs(gw)), abs(gb)) <= tol:
            break
        g2 = gw @ gw + gb * gb
        step = min(step * 2.0, 1e6)
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            z = x @ w_new + b_new
            new_loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w_new @ w_new)
            if new_loss <= loss - 0.5 * step * g2:
                break
            step *= 0.5
            if step < 1e-30:
                break
        if step < 1e-30:
            break
        w, b = w_new, b_new
        loss, gw, gb = logreg_loss_and_grad(w, b, x, y, l2)
        if not np.isfinite(loss):
            raise NumericError("logistic regression loss became non-finite")
        history.append(float(loss))
    return LogRegModel(w, float(b), float(l2), int(seed), history)


# --- MLP ----------------------------------------------------------------------

@dataclass(frozen=True)
class MlpConfig:
    hidden_layers: int = 2
    units: int = 64
    max_iterations: int = 3000
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 200
    # stop once the training loss improves by less than tol for n_no_change epochs
    tol: float = 1e-4
    n_no_change: int = 10

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ConfigError("the MLP needs at least one hidden layer")
        if self.units < 1 or self.batch_size < 1 or self.max_iterations < 1:
            raise ConfigError("units, batch_size and max_iterations must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


@dataclass(eq=False)
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int
    config: MlpConfig = field(default_factory=MlpConfig)
    n_iterations: int = 0

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return (h @ self.weights[-1] + self.biases[-1])[:, 0]


def init_mlp(layer_sizes, seed: int):
    """He-scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def mlp_loss_and_grad(weights, biases, x, y):
    """Mean binary cross-entropy of a ReLU MLP with sigmoid output, with gradients."""
    acts = [x]
    pre = []
    h = x
    for w, b in zip(weights[:-1], biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    z = (h @ weights[-1] + biases[-1])[:, 0]
    n = x.shape[0]
    loss = np.mean(np.logaddexp(0.0, z) - y * z)

    delta = ((expit(z) - y) / n)[:, None]
    gw = [None] * len(weights)
    gb = [None] * len(biases)
    for i in range(len(weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i].T) * (pre[i - 1] > 0)
    return loss, gw, gb


def train_mlp(data: SampleTable, config: MlpConfig = MlpConfig(), seed: int = 0,
              validation: SampleTable | None = None) -> MlpModel:
    """Mini-batch training with Adam updates.

    One iteration is one pass over the shuffled training set. With a
    validation table, training stops after ``config.patience`` iterations
    without a validation-loss improvement and the best parameters are kept.
    """
    _check_two_classes(data.labels)
    x = data.features
    y = data.labels.astype(np.float64)
    n, d = x.shape
    sizes = [d] + [config.units] * config.hidden_layers + [1]
    weights, biases = init_mlp(sizes, seed)
    rng = np.random.default_rng([seed, 1])
    params = weights + biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step_count = 0
    batch = min(config.batch_size, n)

    best_val = np.inf
    best_params = None
    since_best = 0
    best_train = np.inf
    no_change = 0
    epoch = 0
    for epoch in range(1, config.max_iterations + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            loss, gw, gb = mlp_loss_and_grad(weights, biases, x[idx], y[idx])
            if not np.isfinite(loss):
                raise NumericError(f"MLP loss diverged at iteration {epoch}")
            epoch_loss += loss * idx.shape[0]
            step_count += 1
            lr = config.learning_rate * math.sqrt(1 - beta2 ** step_count) / (1 - beta1 ** step_count)
            for p, g, a, v in zip(params, gw + gb, m1, m2):
                a *= beta1
                a += (1 - beta1) * g
                v *= beta2
                v += (1 - beta2) * g * g
                p -= lr * a / (np.sqrt(v) + eps)
        epoch_loss /= n

        if validation is not None:
            val_loss, _, _ = mlp_loss_and_grad(
                weights, biases, validation.features, validation.labels.astype(np.float64)
            )
            if val_loss < best_val:
                best_val = val_loss
                best_params = [p.copy() for p in params]
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    break
        if epoch_loss > best_train - config.tol:
            no_change += 1
            if no_change >= config.n_no_change:
                break
        else:
            no_change = 0
        best_train = min(best_train, epoch_loss)

    if best_params is not None:
        for p, saved in zip(params, best_params):
            p[...] = saved
    return MlpModel(sizes, weights, biases, int(seed), config, epoch)


# --- prediction -----------------------------------------------------------------

def predict_proba(model, features) -> np.ndarray:
    """P(pathological) per row; a single row may be given as a vector."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.n_inputs:
        raise ArgumentError(f"model expects {model.n_inputs} features, got {x.shape[1]}")
    p = expit(model.logits(x))
    return p[0] if single else p


def accuracy(model, data: SampleTable) -> float:
    return float(np.mean((predict_proba(model, data.features) >= 0.5) == data.labels))


# --- feature ranking ----------------------------------------------------------

@dataclass(eq=False)
class FeatureRanking:
    scores: np.ndarray
    order: np.ndarray
    std: np.ndarray | None = None
    feature_names: list[str] | None = None

    @classmethod
    def from_scores(cls, scores, std=None, feature_names=None) -> FeatureRanking:
        scores = np.asarray(scores, dtype=np.float64)
        # descending score, ascending index on ties
        order = np.lexsort((np.arange(scores.size), -scores))
        return cls(scores, order, None if std is None else np.asarray(std), feature_names)

    def subset(self, indices) -> FeatureRanking:
        """Ranking of a table holding only ``indices`` (in that column order)."""
        indices = np.asarray(indices, dtype=np.int64)
        names = None if self.feature_names is None else [self.feature_names[i] for i in indices]
        std = None if self.std is None else self.std[indices]
        return FeatureRanking.from_scores(self.scores[indices], std, names)

    def top(self, k: int) -> list[str] | np.ndarray:
        idx = self.order[:k]
        return idx if self.feature_names is None else [self.feature_names[i] for i in idx]


def permutation_importance(model, data: SampleTable, repeats: int = 10, seed: int = 0) -> FeatureRanking:
    """Mean accuracy drop when one column at a time is shuffled."""
    n, d = data.features.shape
    if n < 10:
        raise ArgumentError(f"permutation importance needs at least 10 samples, got {n}")
    if repeats < 1:
        raise ArgumentError("repeats must be >= 1")
    x = data.features
    y = data.labels
    base = float(np.mean((predict_proba(model, x) >= 0.5) == y))
    rng = np.random.default_rng(seed)
    drops = np.empty((repeats, d))
    linear = isinstance(model, LogRegModel)
    z = model.logits(x) if linear else None
    for r in range(repeats):
        for j in range(d):
            perm = rng.permutation(n)
            if linear:
                zj = z + model.weights[j] * (x[perm, j] - x[:, j])
                pred = zj >= 0.0
            else:
                xp = x.copy()
                xp[:, j] = x[perm, j]
                pred = predict_proba(model, xp) >= 0.5
            drops[r, j] = base - np.mean(pred == y)
    return FeatureRanking.from_scores(drops.mean(axis=0), drops.std(axis=0), data.feature_names)


def top_k_count(d: int, percent: float) -> int:
    if not 0 < percent <= 100:
        raise ArgumentError(f"percent must be in (0, 100], got {percent}")
    return max(1, math.floor(percent * d / 100.0))


def select_top_k(data: SampleTable, ranking: FeatureRanking, percent: float) -> SampleTable:
    """Keep the ``max(1, floor(percent/100 * d))`` best-ranked columns, in rank order."""
    if ranking.order.size != data.n_features:
        raise ArgumentError("ranking does not match the table's feature count")
    k = top_k_count(data.n_features, percent)
    return data.columns(ranking.order[:k])


# --- persistence ------------------------------------------------------------------

def _g17(v) -> str:
    return format(float(v), ".17g")


def _json17(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json17(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json17(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _json17(obj.tolist())
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ArgumentError("cannot serialise non-finite parameters")
        return _g17(obj)
    return json.dumps(obj)


def model_to_dict(model) -> dict:
    if isinstance(model, LogRegModel):
        return {
            "type": "logreg",
            "layer_sizes": [model.n_inputs, 1],
            "weights": model.weights,
            "bias": model.bias,
            "l2": model.l2,
            "seed": model.seed,
        }
    if isinstance(model, MlpModel):
        return {
            "type": "mlp",
            "layer_sizes": model.layer_sizes,
            "weights": [w.reshape(-1) for w in model.weights],
            "biases": [b for b in model.biases],
            "seed": model.seed,
            "config": vars(model.config),
            "n_iterations": model.n_iterations,
        }
    raise ArgumentError(f"unsupported model type {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("type")
    if kind == "logreg":
        return LogRegModel(np.array(d["weights"], dtype=np.float64), float(d["bias"]),
                           float(d["l2"]), int(d.get("seed", 0)))
    if kind == "mlp":
        sizes = [int(s) for s in d["layer_sizes"]]
        weights = [np.array(w, dtype=np.float64).reshape(a, b)
                   for w, a, b in zip(d["weights"], sizes[:-1], sizes[1:])]
        biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        return MlpModel(sizes, weights, biases, int(d["seed"]), MlpConfig(**d["config"]),
                        int(d.get("n_iterations", 0)))
    raise ConfigError(f"unknown model type {kind!r}")


def save_model(model, path) -> None:
    try:
        Path(path).write_text(_json17(model_to_dict(model)) + "\n", encoding="utf-8")
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc


def load_model(path):
    try:
        return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
