import numpy as np
import pytest

from gazecontrol import features, metrics, numcore as nc, scene, train
from gazecontrol.models import LstmConfig, build_lstm
from gazecontrol.train import (
    EmptyDataset, TrainConfig, TrainingDiverged, fit, run_kfold,
)


def small_dataset(n=20, m=4, L=28, C=5, seed=0, situations=10):
    rng = np.random.default_rng(seed)
    windows = rng.uniform(0, 1, size=(n, m, L)).astype(np.float32)
    labels = rng.integers(0, C, size=n)
    # make the task learnable: plant the label into a feature channel
    for i in range(n):
        windows[i, :, 0] = labels[i] / (C - 1)
    return features.Dataset(scene.TWO_D, m, L, windows, labels,
                            rng.integers(0, situations, size=n),
                            scene.LABELS[scene.TWO_D])


def builder(seed, m=4):
    return build_lstm(LstmConfig(m=m, L=28, C=5, units=12), seed=seed)


class TestFit:
    def test_memorizes_tiny_dataset(self):
        ds = small_dataset(20, seed=1)
        model, history = fit(builder(0), ds, ds,
                             TrainConfig(max_epochs=150, patience=150, seed=0))
        assert history.best_eval_acc == 1.0
        final_train = history.epochs[history.best_epoch].train_acc
        assert final_train >= 0.95

    def test_patience_zero_stops_at_first_plateau(self):
        ds = small_dataset(30, seed=2)
        _, history = fit(builder(1), ds, ds,
                         TrainConfig(max_epochs=100, patience=0, seed=0))
        # the epoch after the best one is the last one run
        assert len(history.epochs) == history.best_epoch + 2 or \
            history.stop_reason == "max_epochs reached"

    def test_deterministic_history(self):
        ds = small_dataset(40, seed=3)
        cfg = TrainConfig(max_epochs=5, patience=5, seed=9)
        _, h1 = fit(builder(2), ds, ds, cfg)
        _, h2 = fit(builder(2), ds, ds, cfg)
        assert [(e.train_loss, e.eval_acc) for e in h1.epochs] == \
            [(e.train_loss, e.eval_acc) for e in h2.epochs]

    def test_returned_model_matches_best_epoch(self):
        ds = small_dataset(40, seed=4)
        eval_ds = small_dataset(20, seed=5)
        model, history = fit(builder(3), ds, eval_ds,
                             TrainConfig(max_epochs=12, patience=12, seed=1))
        probs = train.predict_proba_batched(model, eval_ds.windows)
        acc = metrics.topn_accuracy(probs, eval_ds.labels, 1)
        assert abs(acc - history.best_eval_acc) < 1e-12
        assert history.best_eval_acc == max(e.eval_acc for e in history.epochs)

    def test_empty_dataset_rejected(self):
        ds = small_dataset(10)
        empty = ds.subset(np.array([], dtype=int))
        with pytest.raises(EmptyDataset):
            fit(builder(0), empty, ds)
        with pytest.raises(EmptyDataset):
            fit(builder(0), ds, empty)

    def test_shape_mismatch_rejected(self):
        ds = small_dataset(10, m=4)
        model = builder(0, m=6)
        with pytest.raises(nc.ShapeMismatch):
            fit(model, ds, ds)

    def test_divergence_detected(self):
        ds = small_dataset(10, seed=6)
        model = builder(4)
        model.params["head.W"].data[...] = np.nan
        with pytest.raises(TrainingDiverged):
            fit(model, ds, ds, TrainConfig(max_epochs=1, patience=1))

    def test_holdout_flag_carves_validation(self):
        ds = small_dataset(50, seed=7)
        eval_ds = small_dataset(10, seed=8)
        cfg = TrainConfig(max_epochs=3, patience=3, seed=2, holdout_frac=0.2)
        model, history = fit(builder(5), ds, eval_ds, cfg)
        assert len(history.epochs) >= 1  # monitor ran on the carved split

    def test_history_csv_shape(self):
        ds = small_dataset(20, seed=9)
        _, history = fit(builder(6), ds, ds, TrainConfig(max_epochs=2, patience=2))
        lines = history.to_csv().strip().splitlines()
        assert lines[0] == "epoch,train_loss,train_acc,eval_acc"
        assert len(lines) == len(history.epochs) + 1


class TestKFold:
    def test_cardinality_and_aggregation(self):
        ds = small_dataset(120, seed=10, situations=20)
        plan = features.plan_folds(ds, k=10, seed=0)
        cfg = TrainConfig(max_epochs=2, patience=2, seed=3)
        result = run_kfold(ds, plan, lambda seed: builder(seed), cfg)
        assert len(result.folds) == 10
        for n in (1, 2, 3):
            mean, std = result.mean_std("test", n)
            vals = [f.accuracies["test"][n] for f in result.folds]
            assert abs(mean - np.mean(vals)) < 1e-12
        # every example lands in exactly one test fold
        assert sum(f.test_examples for f in result.folds) == len(ds)

    def test_report_input_round_trip(self):
        ds = small_dataset(60, seed=11, situations=12)
        plan = features.plan_folds(ds, k=10, seed=1)
        cfg = TrainConfig(max_epochs=1, patience=1, seed=4)
        result = run_kfold(ds, plan, lambda seed: builder(seed), cfg)
        rows = metrics.build_report([result.report_input()])
        test_rows = [r for r in rows if r.split == "test" and r.n == 1]
        assert len(test_rows) == 1
        mean, _ = result.mean_std("test", 1)
        assert abs(test_rows[0].mean - mean) < 1e-12
