"""Insider identification with a small numpy multilayer perceptron.

Sigmoid hidden layers, softmax output, mean cross-entropy loss and
full-batch gradient descent with momentum. Weight matrices are stored as
(fan_out, fan_in).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BadLayout, DegenerateClasses, InsufficientSamples, LabelMismatch, ShapeMismatch
from .features import FeatureSet, fit_normalizer, normalize

log = logging.getLogger(__name__)


@dataclass
class MlpModel:
    layer_sizes: tuple
    weights: list
    biases: list
    activation: str = "sigmoid"
    seed: int = 0

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.activation, self.seed)

    def params(self):
        return self.weights + self.biases


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple = (64,)
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 500
    seed: int = 7

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")


def mlp_init(layer_sizes, seed: int = 0) -> MlpModel:
    """Uniform(-1, 1)/sqrt(fan_in) weights, zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise BadLayout(f"need >= 2 layers of size >= 1, got {sizes}")
    rng = np.random.default_rng(seed)
    weights = [rng.uniform(-1.0, 1.0, (n_out, n_in)) / np.sqrt(n_in)
               for n_in, n_out in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(n_out) for n_out in sizes[1:]]
    return MlpModel(sizes, weights, biases, "sigmoid", seed)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward(model, X):
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W.T + b
        h = _softmax(z) if k == last else _sigmoid(z)
        acts.append(h)
    return acts


def _one_hot(y, k):
    Y = np.zeros((len(y), k))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def mlp_loss(model: MlpModel, X, y) -> float:
    """Mean cross-entropy of integer labels ``y``."""
    P = _forward(model, np.asarray(X, dtype=float))[-1]
    y = np.asarray(y)
    return float(-np.mean(np.log(np.maximum(P[np.arange(len(y)), y], 1e-300))))


def mlp_gradients(model: MlpModel, X, y):
    """Gradients of :func:`mlp_loss`, ordered like ``model.params()``."""
    X = np.asarray(X, dtype=float)
    acts = _forward(model, X)
    delta = (acts[-1] - _one_hot(np.asarray(y), model.n_classes)) / X.shape[0]
    gw, gb = [], []
    for k in range(len(model.weights) - 1, -1, -1):
        gw.append(delta.T @ acts[k])
        gb.append(delta.sum(axis=0))
        if k > 0:
            a = acts[k]
            delta = (delta @ model.weights[k]) * a * (1.0 - a)
    return gw[::-1] + gb[::-1]


def mlp_train(model: MlpModel, X, y, cfg: TrainConfig = TrainConfig()):
    """Train a copy of ``model``; returns (trained model, loss history).

    The history holds the loss before training and after every epoch.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise LabelMismatch(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if X.shape[1] != model.layer_sizes[0]:
        raise ShapeMismatch(f"inputs have {X.shape[1]} features, model expects {model.layer_sizes[0]}")
    k = model.n_classes
    if y.min() < 0 or y.max() >= k:
        raise LabelMismatch(f"labels must lie in 0..{k - 1}")
    missing = np.setdiff1d(np.arange(k), y)
    if missing.size:
        raise DegenerateClasses(f"classes without samples: {missing.tolist()}")
    model = model.copy()
    params = model.params()
    velocity = [np.zeros_like(p) for p in params]
    history = [mlp_loss(model, X, y)]
    for _ in range(cfg.epochs):
        grads = mlp_gradients(model, X, y)
        for p, v, g in zip(params, velocity, grads):
            v *= cfg.momentum
            v -= cfg.learning_rate * g
            p += v
        history.append(mlp_loss(model, X, y))
    return model, history


def mlp_predict(model: MlpModel, x) -> np.ndarray:
    """Class probabilities for one vector or a stack of vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.layer_sizes[0]:
        raise ShapeMismatch(f"input has {x.shape[-1]} features, model expects {model.layer_sizes[0]}")
    single = x.ndim == 1
    P = _forward(model, np.atleast_2d(x))[-1]
    return P[0] if single else P


@dataclass
class ScenarioResult:
    accuracy: float
    users: list
    confusion: np.ndarray
    train_seconds: list = field(default_factory=list)

    @property
    def n_test(self) -> int:
        return int(self.confusion.sum())

    def per_user_accuracy(self) -> dict:
        totals = self.confusion.sum(axis=1)
        return {u: float(self.confusion[i, i] / totals[i]) if totals[i] else float("nan")
                for i, u in enumerate(self.users)}


def _fit_and_score(train: FeatureSet, test: FeatureSet, users, cfg):
    index = {u: i for i, u in enumerate(users)}
    nz = fit_normalizer(train.X)
    Xtr = normalize(train.X, nz)
    ytr = np.array([index[u] for u in train.user_ids])
    model = mlp_init((Xtr.shape[1], *cfg.hidden_sizes, len(users)), cfg.seed)
    t0 = time.perf_counter()
    model, _ = mlp_train(model, Xtr, ytr, cfg)
    elapsed = time.perf_counter() - t0
    pred = mlp_predict(model, normalize(test.X, nz)).argmax(axis=1)
    truth = np.array([index[u] for u in test.user_ids])
    conf = np.zeros((len(users), len(users)), dtype=int)
    np.add.at(conf, (truth, pred), 1)
    return conf, elapsed


def _pick(fs: FeatureSet, k, rng, pool=None):
    """Indices of k samples per user, chosen without replacement."""
    chosen = []
    for u in fs.users:
        idx = np.flatnonzero(fs.user_ids == u)
        if pool is not None:
            idx = np.intersect1d(idx, pool)
        if idx.size < k:
            raise InsufficientSamples(f"user {u!r} has {idx.size} samples, need {k}")
        chosen.extend(rng.permutation(idx)[:k].tolist())
    return np.sort(np.array(chosen, dtype=int))


def run_scenario(train: FeatureSet, test: FeatureSet | None, k_train_per_user: int,
                 cfg: TrainConfig = TrainConfig(), folds: int = 5) -> ScenarioResult:
    """Identification accuracy.

    With ``test`` None (same-dataset scenario) each user's samples are split
    into ``folds`` folds; every fold is tested once against a model trained on
    k samples per user drawn from the other folds. Otherwise (cross-dataset
    scenario) the model is trained on k samples per user of ``train`` and
    tested on all of ``test``. Features are normalized with bounds fitted on
    the training split.
    """
    if k_train_per_user < 1:
        raise InsufficientSamples("k_train_per_user must be >= 1")
    users = sorted(train.users)
    rng = np.random.default_rng(cfg.seed)
    conf = np.zeros((len(users), len(users)), dtype=int)
    seconds = []
    if test is not None:
        missing = set(users) ^ set(test.users)
        if missing:
            raise InsufficientSamples(f"users not present in both sets: {sorted(missing)}")
        tr = train.subset(_pick(train, k_train_per_user, rng))
        c, t = _fit_and_score(tr, test, users, cfg)
        conf += c
        seconds.append(t)
    else:
        fold_of = np.empty(len(train), dtype=int)
        for u in users:
            idx = rng.permutation(np.flatnonzero(train.user_ids == u))
            if idx.size < folds:
                raise InsufficientSamples(f"user {u!r} has {idx.size} samples, need >= {folds} for {folds}-fold CV")
            fold_of[idx] = np.arange(idx.size) % folds
        for f in range(folds):
            pool = np.flatnonzero(fold_of != f)
            tr = train.subset(_pick(train, k_train_per_user, rng, pool))
            c, t = _fit_and_score(tr, train.subset(fold_of == f), users, cfg)
            conf += c
            seconds.append(t)
    for t in seconds:
        log.info("model trained in %.3f s (k=%d, %d users)", t, k_train_per_user, len(users))
    return ScenarioResult(float(np.trace(conf) / conf.sum()), users, conf, seconds)
