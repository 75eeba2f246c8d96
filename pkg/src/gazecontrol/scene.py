"""Social-scene domain model: deterministic scenario enumeration for the 2D
(screen) and 3D (headset) variants, and timeline compilation into per-tick
frames.

Scene geometry convention: each character owns a fixed station slot
(2D: -60/-30/+30/+60 degrees, 3D: -45/0/+45), "near" and "far" are fixed
distance bands, and a stationary box sits at 0 degrees in the 2D variant.
The 2D segment schedule alternates: activity flags change at t = 10n s,
entries/exits start at t = 5+10n s and play out inside that odd segment.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

import numpy as np

TWO_D = "2d"
THREE_D = "3d"

SEGMENT_S = 5.0
FPS = {TWO_D: 24, THREE_D: 25}
STATIONS = {TWO_D: (-60.0, -30.0, 30.0, 60.0), THREE_D: (-45.0, 0.0, 45.0)}
CAPACITY = {TWO_D: 4, THREE_D: 3}
LABELS = {TWO_D: ("P1", "P2", "P3", "P4", "Box"), THREE_D: ("P1", "P2", "P3")}
BOX_LABEL_INDEX = 4  # 2D only

NEAR_M = 1.5
FAR_M = 3.0
OFFSTAGE_M = 5.0
ENTRY_ANGLE_OFFSET_DEG = 15.0  # 2D walkers slide in from outside their station
FAST_WALK_S = 2.5
SLOW_WALK_S = 5.0
TRANSITION_3D_S = 2.5


class MixedVariant(ValueError):
    pass


class OutOfRange(ValueError):
    pass


class Movement2D(IntEnum):
    STANDING = 0
    ENTERING_SLOW = 1
    ENTERING_FAST = 2
    LEAVING_SLOW = 3
    LEAVING_FAST = 4


class Characteristic3D(IntEnum):
    STANDING = 1
    MOVING_SIDE = 2
    MOVING_FORWARD = 3
    WAVING = 4
    CROSSED_ARMS = 5
    CONVERSATION = 6
    ENTER_EXIT = 7
    POINTING = 8


class Action3D(IntEnum):
    STAND = 0
    WAVE = 1
    CROSS = 2
    CONVERSE = 3
    POINT = 4


_ACTION_CHARACTERISTIC = {
    Action3D.STAND: Characteristic3D.STANDING,
    Action3D.WAVE: Characteristic3D.WAVING,
    Action3D.CROSS: Characteristic3D.CROSSED_ARMS,
    Action3D.CONVERSE: Characteristic3D.CONVERSATION,
    Action3D.POINT: Characteristic3D.POINTING,
}


@dataclass(frozen=True)
class CharacterState2D:
    present: bool
    distance_m: float = 0.0
    waving: bool = False
    pointing: bool = False
    talking: bool = False
    angle_deg: float = 0.0
    movement: Movement2D = Movement2D.STANDING


@dataclass(frozen=True)
class CharacterState3D:
    present: bool
    distance_m: float = 0.0
    characteristic: Characteristic3D = Characteristic3D.STANDING
    talking: bool = False
    pointed_at_count: int = 0
    angle_deg: float = 0.0


@dataclass(frozen=True)
class CharPlan2D:
    present: bool
    near: bool = False
    waving: bool = False
    pointing: bool = False
    talking: bool = False
    fast_walk: bool = False  # speed of any entry/exit played inside this segment


@dataclass(frozen=True)
class CharPlan3D:
    present: bool
    near: bool = False
    action: Action3D = Action3D.STAND
    speaking: bool = False
    point_target: int | None = None


@dataclass(frozen=True)
class SituationSpec:
    variant: str
    situation_id: int
    character_specs: tuple
    duration_s: float = SEGMENT_S


@dataclass(frozen=True)
class SceneFrame:
    variant: str
    tick: int
    characters: tuple
    box_present: bool = False  # 2D only; the box never moves from 0 degrees


@dataclass
class Timeline:
    variant: str
    fps: int
    frames: list[SceneFrame]
    situation_ids: np.ndarray  # per-frame situation id
    specs: list[SituationSpec] = field(default_factory=list)

    @property
    def duration_s(self) -> float:
        return len(self.frames) / self.fps

    def situation_of(self, tick: int) -> int:
        return int(self.situation_ids[tick])


# ---------------------------------------------------------------------------
# 2D enumeration
#
# Canonical per-segment bit table, 128 segments x 4 characters. Bits per
# character: 1 present, 2 near, 4 waving, 8 pointing, 16 talking. The table
# was generated once from a constrained search so that:
#   * presence counts are {2 chars: 32, 3: 64, 4: 32} segments,
#   * every character is present in 96 segments with each binary activity
#     (near, waving, pointing, talking) true in exactly 48 of them,
#   * presence changes happen at every t = 5+10n boundary and only there,
#   * activity bits of persisting characters change only at t = 10n,
#   * all 128 segment specs are pairwise distinct.
# The properties are re-verified by the test suite, not trusted.

_TABLE_2D = (
    (31, 7, 0, 0), (31, 7, 0, 11), (31, 7, 0, 15), (31, 0, 15, 15), (15, 0, 27, 7), (15, 0, 0, 7), (23, 0, 0, 7), (23, 31, 7, 7),
    (15, 31, 23, 3), (15, 0, 23, 3), (7, 0, 15, 23), (7, 7, 15, 23), (7, 31, 31, 11), (7, 31, 0, 11), (7, 23, 0, 11), (0, 23, 0, 11),
    (0, 19, 0, 3), (0, 0, 27, 3), (0, 0, 19, 23), (0, 19, 19, 23), (0, 15, 31, 7), (19, 15, 0, 7), (31, 15, 0, 15), (31, 15, 11, 15),
    (27, 15, 11, 19), (27, 0, 11, 19), (15, 0, 15, 19), (15, 23, 0, 19), (23, 11, 0, 27), (0, 0, 7, 27), (0, 0, 3, 27), (19, 11, 3, 0),
    (23, 11, 19, 0), (23, 11, 19, 23), (19, 3, 15, 15), (19, 3, 0, 0), (19, 19, 0, 0), (19, 19, 27, 31), (3, 15, 23, 19), (3, 15, 0, 0),
    (3, 23, 0, 0), (3, 23, 15, 3), (23, 19, 3, 31), (23, 0, 3, 31), (27, 0, 7, 11), (0, 0, 7, 11), (0, 0, 23, 23), (27, 19, 23, 0),
    (7, 23, 15, 0), (0, 0, 15, 15), (0, 0, 3, 11), (7, 11, 3, 11), (11, 11, 3, 19), (11, 11, 3, 0), (19, 23, 15, 0), (19, 23, 15, 5),
    (19, 15, 3, 17), (0, 0, 3, 17), (0, 0, 27, 21), (19, 11, 27, 21), (27, 31, 15, 29), (0, 0, 15, 29), (0, 0, 19, 25), (13, 5, 0, 25),
    (25, 29, 0, 13), (25, 29, 1, 13), (21, 17, 9, 1), (21, 17, 9, 0), (9, 29, 17, 0), (9, 29, 17, 3), (9, 17, 25, 15), (0, 0, 25, 15),
    (0, 0, 5, 27), (21, 29, 5, 0), (9, 5, 5, 0), (0, 5, 5, 5), (0, 25, 13, 21), (13, 25, 13, 0), (17, 17, 25, 0), (17, 17, 0, 29),
    (9, 1, 0, 29), (9, 1, 11, 29), (1, 1, 23, 5), (1, 1, 0, 5), (9, 25, 0, 1), (9, 25, 17, 1), (25, 17, 21, 25), (25, 0, 21, 25),
    (9, 0, 25, 25), (0, 15, 25, 0), (0, 15, 29, 0), (0, 15, 29, 13), (0, 11, 5, 25), (13, 11, 5, 25), (13, 15, 25, 29), (0, 0, 25, 29),
    (0, 0, 17, 17), (0, 9, 17, 17), (0, 5, 21, 17), (5, 5, 21, 0), (29, 17, 5, 0), (29, 17, 0, 1), (5, 9, 0, 21), (5, 9, 17, 0),
    (21, 13, 5, 0), (21, 13, 0, 17), (9, 17, 0, 1), (9, 0, 17, 0), (9, 0, 29, 0), (9, 1, 29, 13), (21, 1, 1, 5), (21, 1, 0, 5),
    (1, 17, 0, 17), (0, 17, 13, 17), (0, 29, 25, 17), (25, 29, 25, 0), (25, 5, 29, 0), (25, 5, 0, 9), (5, 25, 0, 13), (5, 25, 1, 0),
    (5, 25, 13, 0), (5, 25, 13, 25), (9, 21, 25, 13), (9, 21, 25, 0), (29, 17, 29, 0), (0, 0, 29, 29), (0, 0, 17, 13), (23, 15, 0, 0),
)


def _walk_speed_bits() -> dict[tuple[int, int], bool]:
    """fast/slow per (character, segment containing the walk), alternating per
    character over its entry/exit events in time order."""
    speeds: dict[tuple[int, int], bool] = {}
    for c in range(4):
        events = []
        prev = bool(_TABLE_2D[0][c] & 1)
        for j in range(1, len(_TABLE_2D)):
            cur = bool(_TABLE_2D[j][c] & 1)
            if cur != prev:
                events.append(j)  # walk plays inside segment j
            prev = cur
        for i, j in enumerate(events):
            speeds[(c, j)] = i % 2 == 1
    return speeds


def enumerate_situations_2d() -> list[SituationSpec]:
    """All 128 screen-variant situations in canonical schedule order."""
    speeds = _walk_speed_bits()
    specs = []
    for j, row in enumerate(_TABLE_2D):
        plans = []
        for c, bits in enumerate(row):
            plans.append(CharPlan2D(
                present=bool(bits & 1),
                near=bool(bits & 2),
                waving=bool(bits & 4),
                pointing=bool(bits & 8),
                talking=bool(bits & 16),
                fast_walk=speeds.get((c, j), False),
            ))
        specs.append(SituationSpec(TWO_D, j, tuple(plans)))
    return specs


# ---------------------------------------------------------------------------
# 3D enumeration
#
# 20 station placements (12 two-character, 8 three-character), each played
# through 6 social situations. Templates assign one action per present
# character; rotation over placements spreads the templates, and a global
# per-action counter alternates silent/speaking executions.

_PAIRS_3D = ((0, 1), (0, 2), (1, 2))

_TEMPLATES_2 = (
    (Action3D.STAND, Action3D.STAND),
    (Action3D.WAVE, Action3D.STAND),
    (Action3D.CROSS, Action3D.WAVE),
    (Action3D.CONVERSE, Action3D.CONVERSE),
    (Action3D.POINT, Action3D.CROSS),
    (Action3D.STAND, Action3D.POINT),
)

_TEMPLATES_3 = (
    (Action3D.STAND, Action3D.STAND, Action3D.STAND),
    (Action3D.WAVE, Action3D.CROSS, Action3D.POINT),
    (Action3D.CONVERSE, Action3D.CONVERSE, Action3D.STAND),
    (Action3D.POINT, Action3D.WAVE, Action3D.CROSS),
    (Action3D.CROSS, Action3D.CONVERSE, Action3D.CONVERSE),
    (Action3D.WAVE, Action3D.STAND, Action3D.POINT),
)


def _placements_3d() -> list[tuple[tuple[int, ...], tuple[bool, ...]]]:
    """(occupied char slots, near flags per occupant); 12 + 8 = 20 placements."""
    placements = []
    for pair in _PAIRS_3D:
        for bits in range(4):
            placements.append((pair, (bool(bits & 1), bool(bits & 2))))
    for bits in range(8):
        placements.append(((0, 1, 2), (bool(bits & 1), bool(bits & 2), bool(bits & 4))))
    return placements


def enumerate_situations_3d() -> list[SituationSpec]:
    """All 120 headset-variant situations: 20 placements x 6 social situations."""
    placements = _placements_3d()
    speech_counter: dict[Action3D, int] = {a: 0 for a in Action3D}
    specs = []
    sid = 0
    for p_idx, (slots, near_flags) in enumerate(placements):
        templates = _TEMPLATES_2 if len(slots) == 2 else _TEMPLATES_3
        for s in range(6):
            template = templates[(s + p_idx) % 6]
            # role rotation so no slot is pinned to one template position
            if len(slots) == 2:
                order = (0, 1) if (p_idx % 2 == 0) else (1, 0)
            else:
                r = p_idx % 3
                order = tuple((i + r) % 3 for i in range(3))
            actions = {slots[i]: template[order[i]] for i in range(len(slots))}
            plans: list[CharPlan3D] = []
            for c in range(3):
                if c not in slots:
                    plans.append(CharPlan3D(present=False))
                    continue
                action = actions[c]
                if action == Action3D.CONVERSE:
                    speaking = True
                else:
                    speaking = speech_counter[action] % 2 == 0
                    speech_counter[action] += 1
                target = None
                if action == Action3D.POINT:
                    others = [o for o in slots if o != c]
                    target = others[sid % len(others)]
                plans.append(CharPlan3D(
                    present=True,
                    near=near_flags[slots.index(c)],
                    action=action,
                    speaking=speaking,
                    point_target=target,
                ))
            specs.append(SituationSpec(THREE_D, sid, tuple(plans)))
            sid += 1
    return specs


# ---------------------------------------------------------------------------
# timeline compilation

def _station(variant: str, c: int) -> float:
    return STATIONS[variant][c]


def _edge_angle(station: float) -> float:
    off = ENTRY_ANGLE_OFFSET_DEG
    return station + (off if station >= 0 else -off)


def _lerp(a: float, b: float, frac: float) -> float:
    return a + (b - a) * frac


def _compile_2d(specs: list[SituationSpec], fps: int) -> Timeline:
    seg_ticks = int(round(SEGMENT_S * fps))
    frames: list[SceneFrame] = []
    situation_ids = np.empty(len(specs) * seg_ticks, dtype=np.int64)
    for j, spec in enumerate(specs):
        prev = specs[j - 1] if j > 0 else None
        for k in range(seg_ticks):
            tick = j * seg_ticks + k
            t_in = k / fps
            chars = []
            for c in range(4):
                plan: CharPlan2D = spec.character_specs[c]
                prev_plan: CharPlan2D | None = prev.character_specs[c] if prev else None
                station = _station(TWO_D, c)
                was = prev_plan.present if prev_plan else plan.present
                if plan.present and was:
                    dist = NEAR_M if plan.near else FAR_M
                    chars.append(CharacterState2D(
                        True, dist, plan.waving, plan.pointing, plan.talking,
                        station, Movement2D.STANDING))
                elif plan.present and not was:
                    walk_s = FAST_WALK_S if plan.fast_walk else SLOW_WALK_S
                    if t_in < walk_s:
                        frac = t_in / walk_s
                        dist = _lerp(OFFSTAGE_M, NEAR_M if plan.near else FAR_M, frac)
                        ang = _lerp(_edge_angle(station), station, frac)
                        mv = Movement2D.ENTERING_FAST if plan.fast_walk else Movement2D.ENTERING_SLOW
                        chars.append(CharacterState2D(
                            True, dist, plan.waving, plan.pointing, plan.talking, ang, mv))
                    else:
                        dist = NEAR_M if plan.near else FAR_M
                        chars.append(CharacterState2D(
                            True, dist, plan.waving, plan.pointing, plan.talking,
                            station, Movement2D.STANDING))
                elif not plan.present and was:
                    walk_s = FAST_WALK_S if plan.fast_walk else SLOW_WALK_S
                    if t_in < walk_s:
                        frac = t_in / walk_s
                        start_dist = NEAR_M if prev_plan.near else FAR_M
                        dist = _lerp(start_dist, OFFSTAGE_M, frac)
                        ang = _lerp(station, _edge_angle(station), frac)
                        mv = Movement2D.LEAVING_FAST if plan.fast_walk else Movement2D.LEAVING_SLOW
                        chars.append(CharacterState2D(
                            True, dist, prev_plan.waving, prev_plan.pointing,
                            prev_plan.talking, ang, mv))
                    else:
                        chars.append(CharacterState2D(False))
                else:
                    chars.append(CharacterState2D(False))
            frames.append(SceneFrame(TWO_D, tick, tuple(chars), box_present=True))
            situation_ids[tick] = spec.situation_id
    return Timeline(TWO_D, fps, frames, situation_ids, list(specs))


def _placement_signature(spec: SituationSpec) -> tuple:
    return tuple((p.present, p.near) for p in spec.character_specs)


def _compile_3d(specs: list[SituationSpec], fps: int) -> Timeline:
    seg_ticks = int(round(SEGMENT_S * fps))
    frames: list[SceneFrame] = []
    situation_ids = np.empty(len(specs) * seg_ticks, dtype=np.int64)
    for j, spec in enumerate(specs):
        prev = specs[j - 1] if j > 0 else None
        placement_change = prev is not None and _placement_signature(prev) != _placement_signature(spec)
        for k in range(seg_ticks):
            tick = j * seg_ticks + k
            t_in = k / fps
            in_transition = placement_change and t_in < TRANSITION_3D_S
            frac = t_in / TRANSITION_3D_S if in_transition else 1.0
            raw: list[dict] = []
            for c in range(3):
                plan: CharPlan3D = spec.character_specs[c]
                prev_plan: CharPlan3D | None = prev.character_specs[c] if prev else None
                station = _station(THREE_D, c)
                target_dist = NEAR_M if plan.near else FAR_M
                if plan.present:
                    if in_transition and prev_plan is not None:
                        if not prev_plan.present:
                            raw.append(dict(present=True,
                                            dist=_lerp(OFFSTAGE_M, target_dist, frac),
                                            char=Characteristic3D.ENTER_EXIT,
                                            talking=False, angle=station, plan=plan,
                                            acting=False))
                            continue
                        prev_dist = NEAR_M if prev_plan.near else FAR_M
                        if prev_dist != target_dist:
                            raw.append(dict(present=True,
                                            dist=_lerp(prev_dist, target_dist, frac),
                                            char=Characteristic3D.MOVING_FORWARD,
                                            talking=False, angle=station, plan=plan,
                                            acting=False))
                            continue
                    raw.append(dict(present=True, dist=target_dist,
                                    char=_ACTION_CHARACTERISTIC[plan.action],
                                    talking=plan.speaking, angle=station, plan=plan,
                                    acting=True))
                else:
                    if in_transition and prev_plan is not None and prev_plan.present:
                        prev_dist = NEAR_M if prev_plan.near else FAR_M
                        raw.append(dict(present=True,
                                        dist=_lerp(prev_dist, OFFSTAGE_M, frac),
                                        char=Characteristic3D.ENTER_EXIT,
                                        talking=False, angle=station, plan=plan,
                                        acting=False))
                    else:
                        raw.append(dict(present=False, dist=0.0,
                                        char=Characteristic3D.STANDING,
                                        talking=False, angle=0.0, plan=plan,
                                        acting=False))
            pointed = [0, 0, 0]
            for c, r in enumerate(raw):
                plan = spec.character_specs[c]
                if r["present"] and r["acting"] and plan.action == Action3D.POINT \
                        and plan.point_target is not None and raw[plan.point_target]["present"]:
                    pointed[plan.point_target] += 1
            chars = tuple(
                CharacterState3D(
                    present=r["present"], distance_m=r["dist"] if r["present"] else 0.0,
                    characteristic=r["char"] if r["present"] else Characteristic3D.STANDING,
                    talking=r["talking"] if r["present"] else False,
                    pointed_at_count=pointed[c] if r["present"] else 0,
                    angle_deg=r["angle"] if r["present"] else 0.0,
                )
                for c, r in enumerate(raw)
            )
            frames.append(SceneFrame(THREE_D, tick, chars))
            situation_ids[tick] = spec.situation_id
    return Timeline(THREE_D, fps, frames, situation_ids, list(specs))


def compile_timeline(specs: Iterable[SituationSpec], fps: int | None = None) -> Timeline:
    """Realize an ordered list of situations as uniformly ticked frames."""
    specs = list(specs)
    if not specs:
        raise MixedVariant("no situations to compile")
    variants = {s.variant for s in specs}
    if len(variants) != 1:
        raise MixedVariant(f"mixed variants {sorted(variants)}")
    variant = specs[0].variant
    if fps is None:
        fps = FPS[variant]
    if variant == TWO_D:
        return _compile_2d(specs, fps)
    return _compile_3d(specs, fps)


def frame_at(timeline: Timeline, t: float) -> SceneFrame:
    """Frame covering time t (floor to the containing tick)."""
    if t < 0 or t >= timeline.duration_s:
        raise OutOfRange(f"t={t} outside [0, {timeline.duration_s})")
    return timeline.frames[int(t * timeline.fps)]


# ---------------------------------------------------------------------------
# serialization (JSON-lines; schema documented in docs/timeline_schema.md)

TIMELINE_SCHEMA_VERSION = 1


def _frame_to_json(frame: SceneFrame, fps: int, situation_id: int) -> dict:
    if frame.variant == TWO_D:
        chars = [
            {"present": s.present, "distance_m": s.distance_m,
             "angle_deg": s.angle_deg, "waving": s.waving,
             "pointing": s.pointing, "talking": s.talking, "movement": int(s.movement)}
            for s in frame.characters
        ]
        return {"tick": frame.tick, "t_s": round(frame.tick / fps, 6),
                "situation_id": situation_id, "characters": chars,
                "box": {"present": True, "angle_deg": 0.0}}
    chars = [
        {"present": s.present, "distance_m": s.distance_m,
         "angle_deg": s.angle_deg, "characteristic": int(s.characteristic),
         "talking": s.talking, "pointed_at_count": s.pointed_at_count}
        for s in frame.characters
    ]
    return {"tick": frame.tick, "t_s": round(frame.tick / fps, 6),
            "situation_id": situation_id, "characters": chars}


def write_timeline_jsonl(timeline: Timeline, path):
    header = {"schema_version": TIMELINE_SCHEMA_VERSION, "variant": timeline.variant,
              "fps": timeline.fps, "n_frames": len(timeline.frames)}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for frame in timeline.frames:
            fh.write(json.dumps(_frame_to_json(frame, timeline.fps, timeline.situation_of(frame.tick))) + "\n")


def read_timeline_jsonl(path) -> Timeline:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("schema_version") != TIMELINE_SCHEMA_VERSION:
            raise ValueError(f"unsupported timeline schema {header.get('schema_version')}")
        variant = header["variant"]
        fps = int(header["fps"])
        frames: list[SceneFrame] = []
        situation_ids = []
        for line in fh:
            rec = json.loads(line)
            if variant == TWO_D:
                chars = tuple(
                    CharacterState2D(c["present"], c["distance_m"], c["waving"],
                                     c["pointing"], c["talking"], c["angle_deg"],
                                     Movement2D(c["movement"]))
                    for c in rec["characters"])
                frames.append(SceneFrame(variant, rec["tick"], chars, box_present=True))
            else:
                chars = tuple(
                    CharacterState3D(c["present"], c["distance_m"],
                                     Characteristic3D(c["characteristic"]), c["talking"],
                                     c["pointed_at_count"], c["angle_deg"])
                    for c in rec["characters"])
                frames.append(SceneFrame(variant, rec["tick"], chars))
            situation_ids.append(rec["situation_id"])
    return Timeline(variant, fps, frames, np.asarray(situation_ids, dtype=np.int64))
