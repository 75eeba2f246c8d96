"""Replay a compiled timeline through the real-time head-pan controller.

Drives the controller with a heuristic predictor (no training needed) and
shows warmup, target switches under hysteresis, and the pan rate limit.
"""
import numpy as np

from gazecontrol import baselines, controller, scene

timeline = scene.compile_timeline(scene.enumerate_situations_2d()[:12])
weights = baselines.HeuristicWeights(
    "product", {**{c: 1.0 for c in baselines.CUE_NAMES},
                "waving": 6.0, "pointing": 4.0, "talking": 3.0},
    alpha=0.25, sigma_deg=60.0, w_box=0.5)
policy = controller.ControllerPolicy(min_dwell_s=0.5, switch_margin=0.1,
                                     max_pan_rate_dps=120.0)
ctl = controller.GazeController(
    controller.BaselinePredictor(weights, scene.TWO_D, m=12),
    scene.TWO_D, policy)

commands = controller.run_stream(timeline, ctl)
print(f"{len(commands)} commands over {timeline.duration_s:.0f} s\n")

switches = [c for prev, c in zip(commands, commands[1:]) if c.target != prev.target]
print(f"target switches: {len(switches)}")
for c in switches[:8]:
    name = "none" if c.target is None else scene.LABELS[scene.TWO_D][c.target]
    print(f"  t={c.t_s:7.3f} s -> {name:4} (pan {c.pan_deg:7.2f} deg, "
          f"rate {c.pan_rate_dps:7.2f} deg/s)")

rates = np.array([c.pan_rate_dps for c in commands])
print(f"\npan rate: max |rate| = {np.abs(rates).max():.1f} deg/s "
      f"(limit {policy.max_pan_rate_dps})")

dwells = np.diff([c.tick for c in commands if c.target is not None
                  and commands[c.tick - 1].target != c.target])
if len(dwells):
    print(f"min ticks between switches: {dwells.min()} "
          f"({dwells.min() / timeline.fps:.2f} s)")
