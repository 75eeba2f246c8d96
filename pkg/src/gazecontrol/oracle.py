"""Synthetic gaze generation: parameterized observer personas that attend to
social cues over a compiled timeline, standing in for human gaze recordings.

A persona scores every present target each tick (cue-weight product, distance
decay, angular falloff), keeps or switches targets with inertia, optionally
emits off-target noise, and places gaze points inside the resolver's tolerance
around the chosen target so labels round-trip exactly when noise is off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import features, scene
from .features import GazeSample, NOISE
from .scene import TWO_D, THREE_D, SceneFrame, Movement2D, Characteristic3D

CUE_NAMES = ("waving", "pointing", "talking", "entering", "leaving",
             "crossed_arms", "conversation", "moving")

# gaze angles guaranteed to resolve to no target in each variant
NOISE_ANGLES = {TWO_D: (-13.0, 13.0), THREE_D: (-22.5, 22.5)}


class AbsentTarget(ValueError):
    pass


@dataclass
class GazerPersona:
    cue_weights: dict[str, float]
    distance_decay: float = 0.25        # alpha in exp(-alpha * r)
    angle_width_deg: float = 60.0       # sigma in exp(-theta^2 / (2 sigma^2))
    p_stay: float = 0.0
    noise_rate: float = 0.0
    latency_ticks: int = 0
    temperature: float = 0.3            # 0 = deterministic argmax
    jitter_deg: float = 2.0
    box_weight: float = 0.5             # constant score of the 2D box target
    form: str = "product"               # "product" or "sum" cue combination
    seed: int = 0

    def validate(self):
        if any(w <= 0 for w in self.cue_weights.values()):
            raise ValueError("cue weights must be positive")
        if self.distance_decay < 0 or self.angle_width_deg <= 0:
            raise ValueError("kernel parameters out of range")
        if not (0 <= self.p_stay < 1 and 0 <= self.noise_rate <= 1):
            raise ValueError("probabilities out of range")
        if self.latency_ticks < 0:
            raise ValueError("latency_ticks must be >= 0")
        if self.form not in ("product", "sum"):
            raise ValueError(f"unknown persona form {self.form!r}")


def active_cues(state) -> tuple[str, ...]:
    """Names of the social cues a character is currently emitting."""
    cues = []
    if isinstance(state, scene.CharacterState2D):
        if state.waving:
            cues.append("waving")
        if state.pointing:
            cues.append("pointing")
        if state.talking:
            cues.append("talking")
        if state.movement in (Movement2D.ENTERING_SLOW, Movement2D.ENTERING_FAST):
            cues.append("entering")
        if state.movement in (Movement2D.LEAVING_SLOW, Movement2D.LEAVING_FAST):
            cues.append("leaving")
    else:
        ch = state.characteristic
        if ch == Characteristic3D.WAVING:
            cues.append("waving")
        elif ch == Characteristic3D.POINTING:
            cues.append("pointing")
        elif ch == Characteristic3D.CROSSED_ARMS:
            cues.append("crossed_arms")
        elif ch == Characteristic3D.CONVERSATION:
            cues.append("conversation")
        elif ch == Characteristic3D.ENTER_EXIT:
            cues.append("entering")
        elif ch in (Characteristic3D.MOVING_SIDE, Characteristic3D.MOVING_FORWARD):
            cues.append("moving")
        if state.talking:
            cues.append("talking")
    return tuple(cues)


def salience(state, persona: GazerPersona) -> float:
    """Cue combination times distance and angle kernels for one present target."""
    if not state.present:
        raise AbsentTarget("salience of an absent character")
    cues = active_cues(state)
    if persona.form == "product":
        combined = 1.0
        for c in cues:
            combined *= persona.cue_weights.get(c, 1.0)
    else:
        combined = sum(persona.cue_weights.get(c, 1.0) for c in cues)
    r = state.distance_m
    theta = state.angle_deg
    sigma = persona.angle_width_deg
    return combined * math.exp(-persona.distance_decay * r) * math.exp(-(theta * theta) / (2 * sigma * sigma))


def _target_scores(frame: SceneFrame, persona: GazerPersona) -> np.ndarray:
    n_labels = len(scene.LABELS[frame.variant])
    scores = np.zeros(n_labels)
    available = np.zeros(n_labels, dtype=bool)
    for i, s in enumerate(frame.characters):
        if s.present:
            scores[i] = salience(s, persona)
            available[i] = True
    if frame.variant == TWO_D:
        scores[scene.BOX_LABEL_INDEX] = persona.box_weight
        available[scene.BOX_LABEL_INDEX] = True
    scores[~available] = 0.0
    return np.where(available, scores, -np.inf)


def _choose(scores: np.ndarray, persona: GazerPersona, rng: np.random.Generator) -> int:
    finite = np.isfinite(scores)
    if persona.temperature <= 0:
        return int(np.argmax(scores))  # argmax; ties go to the lowest index
    logs = np.full_like(scores, -np.inf)
    pos = finite & (scores > 0)
    logs[pos] = np.log(scores[pos]) / persona.temperature
    if not pos.any():
        p = finite / finite.sum()
    else:
        logs = logs - logs[pos].max()
        w = np.where(np.isfinite(logs), np.exp(logs), 0.0)
        p = w / w.sum()
    return int(rng.choice(len(scores), p=p))


@dataclass
class SimulationResult:
    samples: list[GazeSample]
    truth: np.ndarray  # per-tick emitted target label, NOISE where off-target


def simulate_gazer(timeline: scene.Timeline, persona: GazerPersona) -> SimulationResult:
    """Per-tick target decisions and gaze emissions, reproducible from the seed."""
    persona.validate()
    rng = np.random.default_rng(persona.seed)
    n = len(timeline.frames)
    decisions = np.empty(n, dtype=np.int64)
    prev = -1
    for t, frame in enumerate(timeline.frames):
        scores = _target_scores(frame, persona)
        if prev >= 0 and np.isfinite(scores[prev]) and rng.random() < persona.p_stay:
            decisions[t] = prev
        else:
            decisions[t] = _choose(scores, persona, rng)
        prev = decisions[t]
    samples: list[GazeSample] = []
    truth = np.empty(n, dtype=np.int64)
    half_h = features.SCREEN_H / 2
    for t, frame in enumerate(timeline.frames):
        src = max(0, t - persona.latency_ticks)
        target = int(decisions[src])
        if not np.isfinite(_target_scores(frame, persona)[target]):
            target = int(decisions[t])  # delayed target already left the scene
        t_s = t / timeline.fps
        if persona.noise_rate > 0 and rng.random() < persona.noise_rate:
            truth[t] = NOISE
            angle = NOISE_ANGLES[timeline.variant][int(rng.integers(2))]
            if timeline.variant == TWO_D:
                samples.append(GazeSample(t_s, point=(features.angle_to_px(angle), half_h)))
            else:
                samples.append(GazeSample(t_s, yaw=angle))
            continue
        truth[t] = target
        jitter = float(rng.uniform(-persona.jitter_deg, persona.jitter_deg))
        if timeline.variant == TWO_D:
            if target == scene.BOX_LABEL_INDEX:
                angle = 0.0
            else:
                angle = frame.characters[target].angle_deg
            y = half_h + float(rng.uniform(-100, 100))
            samples.append(GazeSample(t_s, point=(features.angle_to_px(angle + jitter), y)))
        else:
            angle = frame.characters[target].angle_deg
            samples.append(GazeSample(t_s, yaw=angle + jitter))
    return SimulationResult(samples, truth)


def make_default_personas(n: int, seed: int = 0, deterministic: bool = False,
                          form: str = "product", noise_rate: float = 0.05,
                          variation: float = 0.1,
                          latency_ticks: int | None = None) -> list[GazerPersona]:
    """A family of personas with shared planted structure and mild per-persona
    variation; deterministic=True zeroes all stochastic knobs, variation=0
    makes every persona share the exact planted parameters. A non-None
    latency_ticks applies the same deterministic reaction delay to everyone."""
    base = {
        "waving": 6.0, "pointing": 4.0, "talking": 3.0, "entering": 2.5,
        "leaving": 2.0, "crossed_arms": 2.5, "conversation": 3.5, "moving": 1.5,
    }
    rng = np.random.default_rng(seed)
    personas = []
    for i in range(n):
        factors = rng.uniform(1.0 - variation, 1.0 + variation, size=len(base))
        weights = {k: float(v * f) for (k, v), f in zip(base.items(), factors)}
        personas.append(GazerPersona(
            cue_weights=weights,
            distance_decay=float(rng.uniform(0.25 - variation / 4, 0.25 + variation / 4)),
            angle_width_deg=float(rng.uniform(62.5 - 30 * variation, 62.5 + 30 * variation)),
            p_stay=0.0 if deterministic else 0.7,
            noise_rate=0.0 if deterministic else noise_rate,
            latency_ticks=(latency_ticks if latency_ticks is not None
                           else 0 if deterministic else int(rng.integers(0, 4))),
            temperature=0.0 if deterministic else 0.3,
            jitter_deg=2.0,
            box_weight=0.5,
            form=form,
            seed=int(seed * 1000 + i),
        ))
    return personas


def personas_to_json(personas: list[GazerPersona]) -> str:
    import json
    return json.dumps([asdict(p) for p in personas], indent=2, sort_keys=True) + "\n"


def personas_from_json(text: str) -> list[GazerPersona]:
    import json
    records = json.loads(text)
    personas = [GazerPersona(**rec) for rec in records]
    for p in personas:
        p.validate()
    return personas


def synth_corpus(timeline: scene.Timeline, personas: list[GazerPersona], m: int,
                 step: int = 1, geometry: features.LabelGeometry = features.DEFAULT_GEOMETRY,
                 normalize: bool = True, stagger: bool = False) -> features.Dataset:
    """Windowed dataset pooled over personas; provenance embedded in metadata.

    With ``stagger`` and step > 1, each persona's windows start at a different
    phase of the step grid so the pooled corpus covers more distinct ticks.
    """
    if not personas:
        raise ValueError("need at least one persona")
    parts = []
    for i, persona in enumerate(personas):
        sim = simulate_gazer(timeline, persona)
        labeled = features.label_frames(timeline, sim.samples, geometry, normalize=normalize)
        offset = (i * step) // len(personas) if stagger else 0
        try:
            part = features.window_dataset(labeled, m, step=step, offset=offset,
                                           meta={"persona": asdict(persona)})
        except features.TooShort:
            continue
        parts.append(part)
    nonempty = [p for p in parts if len(p)]
    if not nonempty:
        head = parts[0] if parts else None
        L = features.FEATURE_WIDTH[timeline.variant]
        return features.Dataset(
            timeline.variant, m, L,
            np.empty((0, m, L), dtype=np.float32),
            np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
            scene.LABELS[timeline.variant], normalize,
            {"source": "synth", "n_personas": len(personas)},
        )
    ds = features.concat_datasets(parts)
    ds.meta = {
        "source": "synth",
        "n_personas": len(personas),
        "personas": [asdict(p) for p in personas],
        "seed": personas[0].seed,
    }
    return ds
