"""Train both sequence classifiers on a small planted-oracle corpus.

Uses a sparse window grid so the whole script runs in a couple of minutes;
the acceptance suite runs the full protocol.
"""
import numpy as np

from gazecontrol import features, metrics, models, oracle, scene, train

timeline = scene.compile_timeline(scene.enumerate_situations_2d())
personas = oracle.make_default_personas(5, seed=42, deterministic=True,
                                        variation=0.0, latency_ticks=12)
ds = oracle.synth_corpus(timeline, personas, m=24, step=48, stagger=True)
print(f"corpus: {len(ds)} examples, labels {np.bincount(ds.labels, minlength=5)}")

plan = features.plan_folds(ds, k=10, seed=42)
train_idx, test_idx = features.fold_split(ds, plan, 0)
train_ds, test_ds = ds.subset(train_idx), ds.subset(test_idx)
print(f"fold 0: {len(train_ds)} train / {len(test_ds)} test examples")

config = train.TrainConfig(max_epochs=6, patience=3, seed=42)

lstm = models.build_lstm(models.LstmConfig(m=24, L=28, C=5), seed=42)
print(f"\nLSTM ({lstm.param_count()} parameters):")
lstm, history = train.fit(lstm, train_ds, test_ds, config)
for e in history.epochs:
    print(f"  epoch {e.epoch}: loss {e.train_loss:.4f} "
          f"train {e.train_acc:.4f} test {e.eval_acc:.4f}")

probs = train.predict_proba_batched(lstm, test_ds.windows)
for n in (1, 2, 3):
    print(f"  top-{n} accuracy: {metrics.topn_accuracy(probs, test_ds.labels, n):.4f}")

models.save_checkpoint(lstm, "/tmp/lstm_demo.ckpt")
reloaded = models.load_checkpoint("/tmp/lstm_demo.ckpt")
same = np.array_equal(reloaded.predict_proba(test_ds.windows[:16]),
                      lstm.predict_proba(test_ds.windows[:16]))
print(f"  checkpoint round-trip bit-identical: {same}")

tf = models.build_transformer(models.TransformerConfig(m=24, L=28, C=5), seed=42)
print(f"\nTransformer ({tf.param_count()} parameters):")
tf, history = train.fit(tf, train_ds, test_ds,
                        train.TrainConfig(max_epochs=4, patience=2, seed=42))
probs = train.predict_proba_batched(tf, test_ds.windows)
print(f"  test top-1: {metrics.topn_accuracy(probs, test_ds.labels, 1):.4f}")
maps = tf.attention_maps(test_ds.windows[:2])
print(f"  attention maps per block: {[m.shape for m in maps]}")
