"""Training protocol: Adam on categorical cross-entropy with accuracy-based
early stopping, plus the situation-partitioned k-fold cross-validation runner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import metrics, numcore as nc
from .features import Dataset, FoldPlan, fold_split
from .models import SequenceModel


class EmptyDataset(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 20
    patience: int = 10          # epochs without eval improvement before stopping
    max_epochs: int = 200
    seed: int = 0
    shuffle: bool = True
    holdout_frac: float = 0.0   # >0 carves a validation split out of the training
                                # data for early stopping instead of the eval set


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    eval_acc: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    best_eval_acc: float = 0.0
    final_eval_acc: float = 0.0
    stop_reason: str = ""

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,eval_acc"]
        for e in self.epochs:
            lines.append(f"{e.epoch},{e.train_loss:.6f},{e.train_acc:.6f},{e.eval_acc:.6f}")
        return "\n".join(lines) + "\n"


def _one_hot(labels: np.ndarray, C: int, dtype) -> np.ndarray:
    out = np.zeros((len(labels), C), dtype=dtype)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def predict_proba_batched(model: SequenceModel, X: np.ndarray, batch: int = 512) -> np.ndarray:
    parts = [model.predict_proba(X[i:i + batch]) for i in range(0, len(X), batch)]
    return np.concatenate(parts) if parts else np.empty((0, model.config.C))


def _check_compat(model: SequenceModel, ds: Dataset, name: str):
    if ds.m != model.config.m or ds.L != model.config.L:
        raise nc.ShapeMismatch(
            f"{name} dataset is ({ds.m}, {ds.L}) but model expects "
            f"({model.config.m}, {model.config.L})")
    if len(ds.label_names) != model.config.C:
        raise nc.ShapeMismatch(
            f"{name} dataset has {len(ds.label_names)} labels, model has {model.config.C}")


def fit(model: SequenceModel, train_ds: Dataset, eval_ds: Dataset,
        config: TrainConfig | None = None) -> tuple[SequenceModel, TrainHistory]:
    """Mini-batch Adam with early stopping on eval top-1 accuracy.

    Stops once the monitored accuracy has not improved for ``patience``
    consecutive epochs (or at max_epochs) and restores the best-epoch
    parameters. Fully reproducible from the config seed.
    """
    config = config or TrainConfig()
    if len(train_ds) == 0:
        raise EmptyDataset("training dataset is empty")
    if len(eval_ds) == 0:
        raise EmptyDataset("eval dataset is empty")
    _check_compat(model, train_ds, "train")
    _check_compat(model, eval_ds, "eval")

    rng = np.random.default_rng(config.seed)
    X = train_ds.windows
    y = train_ds.labels
    if config.holdout_frac > 0:
        perm = rng.permutation(len(X))
        n_val = max(1, int(len(X) * config.holdout_frac))
        val_idx, tr_idx = perm[:n_val], perm[n_val:]
        monitor_X, monitor_y = X[val_idx], y[val_idx]
        X, y = X[tr_idx], y[tr_idx]
    else:
        monitor_X, monitor_y = eval_ds.windows, eval_ds.labels

    C = model.config.C
    history = TrainHistory()
    best_params = model.params.copy_arrays()
    non_improve = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(X)) if config.shuffle else np.arange(len(X))
        losses = []
        correct = 0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            xb = X[idx].astype(model.dtype)
            onehot = _one_hot(y[idx], C, model.dtype)
            probs = model.forward(xb)
            loss = nc.cross_entropy(probs, onehot)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss {loss_val} at epoch {epoch}, batch {lo // config.batch_size}")
            losses.append(loss_val * len(idx))
            correct += int((probs.data.argmax(axis=1) == y[idx]).sum())
            model.params.zero_grad()
            loss.backward()
            nc.adam_step(model.params, lr=config.lr)
        eval_probs = predict_proba_batched(model, monitor_X)
        eval_acc = metrics.topn_accuracy(eval_probs, monitor_y, 1)
        history.epochs.append(EpochStats(
            epoch=epoch,
            train_loss=sum(losses) / len(X),
            train_acc=correct / len(X),
            eval_acc=eval_acc,
        ))
        if eval_acc > history.best_eval_acc or history.best_epoch < 0:
            history.best_eval_acc = eval_acc
            history.best_epoch = epoch
            best_params = model.params.copy_arrays()
            non_improve = 0
        else:
            non_improve += 1
            if non_improve >= max(config.patience, 1):
                history.stop_reason = f"no improvement for {non_improve} epochs"
                break
    if not history.stop_reason:
        history.stop_reason = "max_epochs reached"
    model.params.load_arrays(best_params)
    history.final_eval_acc = history.best_eval_acc
    return model, history


@dataclass
class FoldOutcome:
    fold: int
    train_examples: int
    test_examples: int
    accuracies: dict          # {"train": {n: acc}, "test": {n: acc}}
    history: TrainHistory


@dataclass
class KFoldResult:
    arch: str
    variant: str
    m: int
    folds: list[FoldOutcome] = field(default_factory=list)

    def mean_std(self, split: str, n: int) -> tuple[float, float]:
        vals = [f.accuracies[split][n] for f in self.folds]
        return metrics.summarize_folds(vals)

    def report_input(self) -> dict:
        return {
            "arch": self.arch, "variant": self.variant, "m": self.m,
            "folds": [
                {split: {str(n): acc for n, acc in accs.items()}
                 for split, accs in f.accuracies.items()}
                for f in self.folds
            ],
        }


def run_kfold(dataset: Dataset, plan: FoldPlan, model_builder,
              config: TrainConfig | None = None,
              ns: tuple[int, ...] = (1, 2, 3)) -> KFoldResult:
    """Train one model per fold; report top-n accuracy per split and fold.

    ``model_builder(seed)`` must return a fresh SequenceModel; fold i trains
    with seed ``config.seed + i``.
    """
    config = config or TrainConfig()
    ns = tuple(n for n in ns if n <= len(dataset.label_names))
    result: KFoldResult | None = None
    for i in range(plan.k):
        train_idx, test_idx = fold_split(dataset, plan, i)
        train_ds = dataset.subset(train_idx)
        test_ds = dataset.subset(test_idx)
        fold_seed = config.seed + i
        model = model_builder(fold_seed)
        if result is None:
            result = KFoldResult(model.arch, dataset.variant, dataset.m)
        fold_config = TrainConfig(**{**config.__dict__, "seed": fold_seed})
        model, history = fit(model, train_ds, test_ds, fold_config)
        accs = {}
        for split, ds in (("train", train_ds), ("test", test_ds)):
            probs = predict_proba_batched(model, ds.windows)
            accs[split] = {n: metrics.topn_accuracy(probs, ds.labels, n) for n in ns}
        result.folds.append(FoldOutcome(
            fold=i, train_examples=len(train_ds), test_examples=len(test_ds),
            accuracies=accs, history=history))
    return result
