"""From gaze signals to training examples.

Shows the two resamplers, label resolution against scene frames, and the
sliding-window dataset builder with situation-partitioned folds.
"""
import numpy as np

from gazecontrol import features, oracle, scene
from gazecontrol.features import GazeSample

# 1000 Hz eye-tracker trace -> 24 fps frames (42/42/41 block means)
trace = [GazeSample(i / 1000, point=(100 + 0.1 * i, 540.0)) for i in range(1000)]
frames = features.resample_eyelink(trace)
print(f"eyelink: {len(trace)} samples -> {len(frames)} frames; "
      f"first x values {[round(f.point[0], 2) for f in frames[:4]]}")

# irregular headset yaw -> uniform 0.04 s ticks
yaw = [GazeSample(t, yaw=30 * np.sin(t)) for t in np.cumsum(np.full(100, 0.037))]
ticks = features.resample_vr(yaw)
print(f"vr: {len(yaw)} samples -> {len(ticks)} ticks at 0.04 s")

# labels on a compiled timeline
timeline = scene.compile_timeline(scene.enumerate_situations_2d())
persona = oracle.make_default_personas(1, seed=7, deterministic=True)[0]
sim = oracle.simulate_gazer(timeline, persona)
labeled = features.label_frames(timeline, sim.samples)
resolved = np.array([lf.label for lf in labeled])
print(f"\nlabels resolved on {len(labeled)} frames; "
      f"agreement with simulator ground truth: {(resolved == sim.truth).mean():.3f}")
print(f"label distribution: {np.bincount(resolved[resolved >= 0], minlength=5)}")

ds = features.window_dataset(labeled, m=24, step=8)
print(f"\nwindowed dataset: {len(ds)} examples of shape ({ds.m}, {ds.L})")

plan = features.plan_folds(ds, k=10, seed=0)
sizes = [len(s) for s in plan.test_situations]
print(f"10-fold plan: test situations per fold {sizes}")

features.write_dataset_jsonl(ds, "/tmp/demo_dataset.jsonl")
errors = features.validate_dataset_jsonl("/tmp/demo_dataset.jsonl")
print(f"wrote /tmp/demo_dataset.jsonl; validate -> {'OK' if not errors else errors[:1]}")
