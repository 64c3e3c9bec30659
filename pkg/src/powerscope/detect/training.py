"""Shared training loop, metrics, cross-validation and gradient checking.

Training is mini-batch gradient descent with per-parameter adaptive step
scaling (running first/second moment normalization) on cross-entropy
(ae_mlp adds a weighted reconstruction-MSE term inside its loss).  Early
stopping monitors a held-out run-granularity validation fold; the best
epoch's weights are kept.  Everything is deterministic given the config
seed.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .. import rng as rngmod
from ..corpus import as_arrays
from ..errors import ParameterError, TrainingError
from ..features import apply_scaler, fit_scaler
from ..tracegen import CLASS_ORDER, ClassLabel
from .nets import ARCH_NAMES, LinearArch, get_arch

PREDICT_CHUNK = 512


@dataclass(frozen=True)
class DetectorConfig:
    """Hyperparameters shared by all architectures (unused fields are
    ignored by architectures that do not need them)."""

    arch: str = "lstm"
    hidden: int = 32
    tcn_channels: int = 16
    tcn_dilations: tuple = (1, 2, 4)
    kernel: int = 3
    latent: int = 8
    mlp_hidden: int = 16
    lr: float = 1e-3
    batch: int = 32
    max_epochs: int = 50
    patience: int = 5
    folds: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCH_NAMES:
            raise ParameterError(
                f"unknown architecture {self.arch!r}; valid: {', '.join(ARCH_NAMES)}")
        if self.patience >= self.max_epochs:
            raise ParameterError("patience must be < max_epochs")
        if self.folds < 2:
            raise ParameterError("folds must be >= 2")
        if self.lr <= 0 or self.batch < 1 or self.hidden < 1 or self.latent < 1:
            raise ParameterError("lr, batch, hidden and latent must be positive")

    def to_dict(self):
        d = self.__dict__.copy()
        d["tcn_dilations"] = list(self.tcn_dilations)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "tcn_dilations" in d:
            d["tcn_dilations"] = tuple(d["tcn_dilations"])
        return cls(**d)


@dataclass
class ClassProbs:
    """Probability vector over (idle, iot_service, mirai)."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.shape != (len(CLASS_ORDER),):
            raise ParameterError("ClassProbs needs one probability per class")
        if (self.p < 0).any() or abs(float(self.p.sum()) - 1.0) > 1e-6:
            raise ParameterError("probabilities must be >= 0 and sum to 1")

    @property
    def argmax_label(self):
        return CLASS_ORDER[int(np.argmax(self.p))]


@dataclass
class Metrics:
    """Macro-averaged classification metrics plus the raw confusion
    matrix (rows = true class, columns = predicted class)."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: np.ndarray

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        n_cls = len(CLASS_ORDER)
        conf = np.zeros((n_cls, n_cls), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            conf[t, p] += 1
        total = conf.sum()
        acc = float(np.trace(conf)) / total
        precisions, recalls, f1s = [], [], []
        for k in range(n_cls):
            col = conf[:, k].sum()
            row = conf[k, :].sum()
            prec = conf[k, k] / col if col else 0.0
            rec = conf[k, k] / row if row else 0.0
            precisions.append(prec)
            recalls.append(rec)
            f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
        return cls(acc, float(np.mean(precisions)), float(np.mean(recalls)),
                   float(np.mean(f1s)), conf)


@dataclass
class DetectorModel:
    """A trained, immutable detector: weights + the scaler fitted on its
    training split + a manifest describing how it was produced."""

    arch: str
    params: dict
    scaler: object
    config: DetectorConfig
    manifest: dict = field(default_factory=dict)

    def predict_proba_std(self, x_std):
        """Class probabilities for standardized windows (n, 150)."""
        x = np.atleast_2d(np.asarray(x_std, dtype=np.float64))
        arch = get_arch(self.arch)
        out = []
        for lo in range(0, len(x), PREDICT_CHUNK):
            out.append(arch.predict_proba(self.config, self.params,
                                          x[lo:lo + PREDICT_CHUNK]))
        return np.concatenate(out) if len(out) > 1 else out[0]

    def predict_proba(self, windows_or_raw):
        """Class probabilities for raw-µA windows or LabeledWindow lists."""
        x = _raw_matrix(windows_or_raw)
        return self.predict_proba_std(apply_scaler(self.scaler, x))

    def predict_labels(self, windows_or_raw):
        return np.argmax(self.predict_proba(windows_or_raw), axis=1)


def _raw_matrix(windows_or_raw):
    if isinstance(windows_or_raw, np.ndarray):
        return np.atleast_2d(windows_or_raw)
    x, _ = as_arrays(list(windows_or_raw))
    return x


def forward(model, window_std):
    """Spec-level single-window forward: standardized window -> ClassProbs."""
    return ClassProbs(model.predict_proba_std(window_std)[0])


# ---------------------------------------------------------------------------
# Optimizer


class AdaptiveSgd:
    """Per-parameter step scaling via running first/second moments, with
    global-norm gradient clipping for recurrent stability."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip_norm=1.0):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.clip_norm = clip_norm
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        if self.clip_norm is not None:
            total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if total > self.clip_norm:
                scale = self.clip_norm / total
                grads = {k: g * scale for k, g in grads.items()}
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            mhat = self.m[k] / b1c
            vhat = self.v[k] / b2c
            params[k] = params[k] - self.lr * mhat / (np.sqrt(vhat) + self.eps)


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainReport:
    train_loss: list
    val_loss: list
    best_epoch: int
    stopped_epoch: int


def _check_classes(windows):
    present = {w.label for w in windows}
    missing = [label.value for label in CLASS_ORDER if label not in present]
    if missing:
        raise TrainingError(f"training data lacks class(es): {', '.join(missing)}")


def _holdout_split(windows, folds, rng):
    """Carve one run-granularity fold per class for early stopping."""
    runs = {}
    for w in windows:
        runs.setdefault((w.label, w.run_id), []).append(w)
    train_w, val_w = [], []
    for label in CLASS_ORDER:
        ids = sorted(rid for (lab, rid) in runs if lab is label)
        rng.shuffle(ids)
        n_val = max(1, len(ids) // folds)
        val_ids = set(ids[:n_val])
        for rid in ids:
            (val_w if rid in val_ids else train_w).extend(runs[(label, rid)])
    return train_w, val_w


def _epoch_loss(arch, config, params, x, y):
    loss, _, _ = arch.loss_grads(config, params, x, y)
    return float(loss)


def train_on_arrays(config, x_train, y_train, x_val, y_val, scaler,
                    manifest=None):
    """Core loop over pre-standardized arrays; returns (model, report)."""
    arch = get_arch(config.arch)
    init_rng = rngmod.stream(config.seed, rngmod.DOMAIN_MODEL, 0)
    shuffle_rng = rngmod.stream(config.seed, rngmod.DOMAIN_MODEL, 1)
    params = arch.init(config, init_rng)
    opt = AdaptiveSgd(params, config.lr)

    n = len(x_train)
    best_val = np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    best_epoch = 0
    bad_epochs = 0
    train_losses, val_losses = [], []
    stopped = config.max_epochs - 1

    for epoch in range(config.max_epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, config.batch):
            idx = order[lo:lo + config.batch]
            loss, grads, _ = arch.loss_grads(config, params, x_train[idx],
                                             y_train[idx])
            opt.step(params, grads)
            epoch_loss += float(loss)
            n_batches += 1
        train_losses.append(epoch_loss / max(n_batches, 1))

        val_loss = _epoch_loss(arch, config, params, x_val, y_val)
        val_losses.append(val_loss)
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in params.items()}
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                stopped = epoch
                break
    else:
        stopped = config.max_epochs - 1

    model_manifest = {
        "seed": config.seed,
        "final_epoch": best_epoch,
        "stopped_epoch": stopped,
        "n_train_windows": int(n),
        "n_val_windows": int(len(x_val)),
    }
    if manifest:
        model_manifest.update(manifest)
    model = DetectorModel(config.arch, best_params, scaler, config,
                          model_manifest)
    report = TrainReport(train_losses, val_losses, best_epoch, stopped)
    return model, report


def train_with_val(config, train_windows, val_windows, manifest=None):
    """Train on explicit train/validation window lists."""
    _check_classes(train_windows)
    if not val_windows:
        raise TrainingError("validation split is empty")
    x_tr_raw, y_tr = as_arrays(train_windows)
    x_va_raw, y_va = as_arrays(val_windows)
    scaler = fit_scaler(x_tr_raw)
    return train_on_arrays(config, apply_scaler(scaler, x_tr_raw), y_tr,
                           apply_scaler(scaler, x_va_raw), y_va, scaler,
                           manifest)


def train(config, train_windows, manifest=None):
    """Train a detector on a corpus train split.

    A run-granularity slice (one fold of ``config.folds``) is held out
    from ``train_windows`` to drive early stopping.
    """
    _check_classes(train_windows)
    split_rng = rngmod.stream(config.seed, rngmod.DOMAIN_MODEL, 2)
    inner_train, inner_val = _holdout_split(train_windows, config.folds,
                                            split_rng)
    return train_with_val(config, inner_train, inner_val, manifest)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(model, windows):
    """Argmax-class metrics of a model over labeled windows."""
    windows = list(windows)
    if not windows:
        raise ParameterError("evaluate needs a nonempty window list")
    x, y = as_arrays(windows)
    y_pred = np.argmax(model.predict_proba(x), axis=1)
    return Metrics.from_predictions(y, y_pred)


def cross_validate(config, corpus):
    """Run-granularity k-fold cross-validation over a corpus train split.

    Returns (per-fold Metrics list, mean dict, std dict).
    """
    windows = corpus.train
    _check_classes(windows)
    runs = {}
    for w in windows:
        runs.setdefault((w.label, w.run_id), []).append(w)
    per_class_runs = {
        label: sorted(rid for (lab, rid) in runs if lab is label)
        for label in CLASS_ORDER}
    min_runs = min(len(v) for v in per_class_runs.values())
    if config.folds > min_runs:
        raise ParameterError(
            f"folds={config.folds} exceeds the smallest per-class run count "
            f"({min_runs})")

    fold_rng = rngmod.stream(config.seed, rngmod.DOMAIN_MODEL, 3)
    fold_of = {}
    for label in CLASS_ORDER:
        ids = list(per_class_runs[label])
        fold_rng.shuffle(ids)
        for i, rid in enumerate(ids):
            fold_of[(label, rid)] = i % config.folds

    fold_metrics = []
    for fold in range(config.folds):
        tr, va = [], []
        for key, ws in runs.items():
            (va if fold_of[key] == fold else tr).extend(ws)
        model, _ = train_with_val(config, tr, va)
        fold_metrics.append(evaluate(model, va))

    def agg(fn):
        return {name: float(fn([getattr(m, name) for m in fold_metrics]))
                for name in ("accuracy", "precision", "recall", "f1")}

    return fold_metrics, agg(np.mean), agg(np.std)


# ---------------------------------------------------------------------------
# Gradient checking


def count_params(params):
    return sum(v.size for v in params.values())


def gradient_check(arch_name, config=None, window_len=8, batch=3, seed=3,
                   h=1e-5, max_params=500):
    """Max relative error between backprop and central finite differences.

    Runs on random data at tiny scale; architectures must stay under
    ``max_params`` parameters so the sweep is cheap.  ``arch_name`` may
    also be "linear" (degenerate 0-hidden softmax regression).

    The default seed is frozen to a test point whose gradients all sit
    well above the float64 noise floor of the h=1e-5 central difference
    (coordinates with |g| ~ 1e-8 make the relative error meaningless).
    """
    if config is None:
        config = DetectorConfig(arch="lstm", hidden=4, tcn_channels=2,
                                tcn_dilations=(1, 2), latent=2, mlp_hidden=4)
    rng = np.random.default_rng(seed)
    if arch_name == "linear":
        arch = LinearArch()
        params = arch.init(config, rng, n_features=window_len)
    else:
        arch = get_arch(arch_name)
        params = arch.init(config, rng)
    n_params = count_params(params)
    if n_params > max_params:
        raise ParameterError(
            f"gradient_check is for tiny models; {arch_name} has {n_params} "
            f"parameters (> {max_params})")

    x = rng.normal(size=(batch, window_len))
    y = rng.integers(0, 3, size=batch)
    _, grads, _ = arch.loss_grads(config, params, x, y)

    worst = 0.0
    for name in sorted(params):
        w = params[name]
        flat = w.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _, _ = arch.loss_grads(config, params, x, y)
            flat[i] = orig - h
            lm, _, _ = arch.loss_grads(config, params, x, y)
            flat[i] = orig
            g_num = (lp - lm) / (2.0 * h)
            g_ana = gflat[i]
            rel = abs(g_ana - g_num) / max(abs(g_ana), abs(g_num), 1e-8)
            worst = max(worst, rel)
    return worst
