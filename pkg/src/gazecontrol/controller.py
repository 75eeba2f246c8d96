"""Real-time gaze decision loop: sliding-window inference over a live frame
stream with target hysteresis and rate-limited head-pan commands.

The pan angle stands in for a robot head: it slews toward the current
target's angle, never faster than the policy's rate limit. Target switches
require either a probability margin over the current target or an elapsed
minimum dwell, which suppresses per-tick argmax flicker.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import features, scene
from .features import encode_frame
from .models import SequenceModel
from .baselines import HeuristicWeights, ea_score
from .scene import SceneFrame, Timeline


class VariantMismatch(ValueError):
    pass


@dataclass
class ControllerPolicy:
    min_dwell_s: float = 0.5
    switch_margin: float = 0.1
    max_pan_rate_dps: float = 120.0
    warmup_target_deg: float = 0.0


@dataclass
class GazeCommand:
    tick: int
    t_s: float
    target: int | None
    pan_deg: float
    pan_rate_dps: float
    probs: list[float] | None

    def to_json(self) -> str:
        return json.dumps({
            "tick": self.tick, "t_s": round(self.t_s, 6), "target": self.target,
            "pan_deg": round(self.pan_deg, 6),
            "pan_rate_dps": round(self.pan_rate_dps, 6),
            "probs": None if self.probs is None else [round(p, 6) for p in self.probs],
        })


class ModelPredictor:
    """Adapts a SequenceModel to single-window probability queries."""

    def __init__(self, model: SequenceModel):
        self.model = model
        self.m = model.config.m
        self.n_labels = model.config.C

    def window_probs(self, window: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(window[None, :, :])[0]


class BaselinePredictor:
    """Scores the newest frame with a heuristic EA model; pseudo-probabilities
    are the positive scores normalized to sum 1."""

    def __init__(self, weights: HeuristicWeights, variant: str, m: int):
        self.weights = weights
        self.variant = variant
        self.m = m
        self.n_labels = len(scene.LABELS[variant])
        self._last_frame: SceneFrame | None = None

    def observe(self, frame: SceneFrame):
        self._last_frame = frame

    def window_probs(self, window: np.ndarray) -> np.ndarray:
        ea = ea_score(self._last_frame, self.weights)
        pos = np.where(np.isfinite(ea), np.maximum(ea, 0.0), 0.0)
        total = pos.sum()
        if total <= 0:
            finite = np.isfinite(ea)
            return finite / finite.sum()
        return pos / total


class GazeController:
    """Stateful tick loop; output depends only on the last m frames, the
    policy, and the predictor parameters (plus dwell bookkeeping)."""

    def __init__(self, predictor, variant: str, policy: ControllerPolicy | None = None,
                 normalize: bool = True):
        self.predictor = predictor
        self.variant = variant
        self.policy = policy or ControllerPolicy()
        self.normalize = normalize
        self.m = predictor.m
        self._buffer: list[np.ndarray] = []
        self._frames: list[SceneFrame] = []
        self.pan_deg = 0.0
        self.target: int | None = None
        self.dwell_s = 0.0
        self._tick = 0

    def reset(self):
        self._buffer.clear()
        self._frames.clear()
        self.pan_deg = 0.0
        self.target = None
        self.dwell_s = 0.0
        self._tick = 0

    def _target_angle(self, frame: SceneFrame, label: int | None) -> float:
        if label is None:
            return self.policy.warmup_target_deg
        if self.variant == scene.TWO_D and label == scene.BOX_LABEL_INDEX:
            return 0.0
        state = frame.characters[label]
        if state.present:
            return float(state.angle_deg)
        return scene.STATIONS[self.variant][label]

    def step(self, frame: SceneFrame, dt: float) -> GazeCommand:
        if frame.variant != self.variant:
            raise VariantMismatch(f"frame is {frame.variant}, controller is {self.variant}")
        if dt <= 0:
            raise ValueError("dt must be positive")
        if hasattr(self.predictor, "observe"):
            self.predictor.observe(frame)
        feats = encode_frame(frame, normalize=self.normalize).flat.astype(np.float32)
        self._buffer.append(feats)
        if len(self._buffer) > self.m:
            self._buffer.pop(0)
        probs = None
        if len(self._buffer) == self.m:
            window = np.stack(self._buffer)
            probs = self.predictor.window_probs(window)
            top1 = int(np.argmax(probs))  # argmax ties resolve to the lowest index
            if self.target is None:
                self.target = top1
                self.dwell_s = 0.0
            elif top1 != self.target:
                margin = float(probs[top1] - probs[self.target])
                if margin >= self.policy.switch_margin or self.dwell_s >= self.policy.min_dwell_s:
                    self.target = top1
                    self.dwell_s = 0.0
                else:
                    self.dwell_s += dt
            else:
                self.dwell_s += dt
        desired = self._target_angle(frame, self.target)
        max_step = self.policy.max_pan_rate_dps * dt
        delta = float(np.clip(desired - self.pan_deg, -max_step, max_step))
        self.pan_deg += delta
        cmd = GazeCommand(
            tick=self._tick, t_s=self._tick * dt, target=self.target,
            pan_deg=self.pan_deg, pan_rate_dps=delta / dt,
            probs=None if probs is None else [float(p) for p in probs],
        )
        self._tick += 1
        return cmd


class SourceEnded(StopIteration):
    """Normal termination of a frame stream."""


def run_stream(timeline: Timeline, controller: GazeController,
               sink=None, realtime: bool = False) -> list[GazeCommand]:
    """Drive the controller over a compiled timeline, one command per frame.

    ``sink`` may be a writable file object; commands go out as JSON lines.
    Real-time mode paces ticks to the wall clock; batch mode runs flat out.
    """
    import time
    dt = 1.0 / timeline.fps
    commands = []
    start = time.monotonic()
    for i, frame in enumerate(timeline.frames):
        if realtime:
            due = start + i * dt
            lag = due - time.monotonic()
            if lag > 0:
                time.sleep(lag)
        cmd = controller.step(frame, dt)
        commands.append(cmd)
        if sink is not None:
            sink.write(cmd.to_json() + "\n")
    return commands
