"""Feature extraction and dataset assembly.

Scene frames become fixed-width numeric matrices (4x7 for the screen variant,
3x6 for the headset variant), gaze traces are resampled onto the video tick
grid and resolved to target labels, and labeled frames are sliced into
sliding-window training examples partitioned by social situation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import scene
from .scene import TWO_D, THREE_D, SceneFrame, Characteristic3D

NOISE = -1  # label sentinel: gaze resolved to no target

ROWS = {TWO_D: 4, THREE_D: 3}
COLS = {TWO_D: 7, THREE_D: 6}
FEATURE_WIDTH = {v: ROWS[v] * COLS[v] for v in (TWO_D, THREE_D)}

# normalization ranges (divisors; angle maps degrees to [0,1] via (a/90+1)/2)
DISTANCE_MAX_M = 5.0
ANGLE_MAX_DEG = 90.0
MOVEMENT_MAX = 4.0
CHARACTERISTIC_MAX = 8.0
POINTED_AT_MAX = 2.0

SCREEN_W = 1920
SCREEN_H = 1080
SCREEN_PX_PER_DEG = (SCREEN_W / 2) / 80.0  # +-80 degrees spans the frame; scene
                                           # angles never exceed +-75



class EmptyInput(ValueError):
    pass


class TooShort(ValueError):
    pass


class TooFewSituations(ValueError):
    pass


@dataclass
class FrameFeatures:
    variant: str
    matrix: np.ndarray  # (rows, cols)
    normalized: bool

    @property
    def flat(self) -> np.ndarray:
        return self.matrix.reshape(-1)


@dataclass(frozen=True)
class GazeSample:
    """One gaze observation: a screen point (x, y) for 2D or a yaw angle for 3D."""
    t: float
    point: tuple[float, float] | None = None
    yaw: float | None = None
    valid: bool = True


@dataclass
class LabeledFrame:
    tick: int
    features: FrameFeatures
    label: int          # 0..C-1 or NOISE
    situation_id: int
    valid: bool = True  # False when the gaze sample itself was unusable


@dataclass(frozen=True)
class WindowedExample:
    window: np.ndarray  # (m, L)
    label: int
    situation_id: int


@dataclass
class Dataset:
    variant: str
    m: int
    L: int
    windows: np.ndarray        # (n, m, L) float32
    labels: np.ndarray         # (n,) int64
    situation_ids: np.ndarray  # (n,) int64
    label_names: tuple[str, ...]
    normalized: bool = True
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def example(self, i: int) -> WindowedExample:
        return WindowedExample(self.windows[i], int(self.labels[i]), int(self.situation_ids[i]))

    def subset(self, idx) -> "Dataset":
        return Dataset(self.variant, self.m, self.L, self.windows[idx],
                       self.labels[idx], self.situation_ids[idx],
                       self.label_names, self.normalized, dict(self.meta))


@dataclass(frozen=True)
class FoldPlan:
    k: int
    test_situations: tuple[frozenset, ...]


@dataclass(frozen=True)
class LabelGeometry:
    """Tolerances that map gaze coordinates to target labels."""
    char_tol_deg: float = 12.0  # 2D: half-width of a character's screen band
    box_tol_deg: float = 8.0    # 2D: half-width of the box band
    yaw_tol_deg: float = 15.0   # 3D: yaw tolerance around a character


DEFAULT_GEOMETRY = LabelGeometry()


# ---------------------------------------------------------------------------
# frame encoding

def encode_frame(frame: SceneFrame, normalize: bool = True) -> FrameFeatures:
    """Per-character feature rows; absent characters are all-zero rows.

    2D row: [present, distance_m, waving, pointing, talking, angle_deg, movement]
    3D row: [present, distance_m, characteristic, talking, pointed_at_count, angle_deg]
    """
    variant = frame.variant
    mat = np.zeros((ROWS[variant], COLS[variant]), dtype=np.float64)
    for i, s in enumerate(frame.characters):
        if not s.present:
            continue
        if variant == TWO_D:
            row = [1.0, s.distance_m, float(s.waving), float(s.pointing),
                   float(s.talking), s.angle_deg, float(int(s.movement))]
            if normalize:
                row[1] /= DISTANCE_MAX_M
                row[5] = (row[5] / ANGLE_MAX_DEG + 1.0) / 2.0
                row[6] /= MOVEMENT_MAX
        else:
            row = [1.0, s.distance_m, float(int(s.characteristic)), float(s.talking),
                   float(s.pointed_at_count), s.angle_deg]
            if normalize:
                row[1] /= DISTANCE_MAX_M
                row[2] /= CHARACTERISTIC_MAX
                row[4] /= POINTED_AT_MAX
                row[5] = (row[5] / ANGLE_MAX_DEG + 1.0) / 2.0
        mat[i] = row
    return FrameFeatures(variant, mat, normalized=normalize)


def features_from_flat(flat: np.ndarray, variant: str, normalized: bool = True) -> FrameFeatures:
    """Inverse of FrameFeatures.flat (row-major reshape)."""
    return FrameFeatures(variant, np.asarray(flat).reshape(ROWS[variant], COLS[variant]), normalized)


def decode_rows(flat: np.ndarray, variant: str, normalized: bool = True) -> dict[str, np.ndarray]:
    """Recover physical per-target quantities and cue flags from feature vectors.

    flat: (..., L). Returns arrays shaped (..., rows): present, distance_m,
    angle_deg, plus boolean cue channels used by the heuristic models.
    """
    flat = np.asarray(flat, dtype=np.float64)
    mat = flat.reshape(flat.shape[:-1] + (ROWS[variant], COLS[variant]))
    present = mat[..., 0] > 0.5
    out: dict[str, np.ndarray] = {"present": present}
    if variant == TWO_D:
        dist = mat[..., 1] * (DISTANCE_MAX_M if normalized else 1.0)
        angle = (mat[..., 5] * 2.0 - 1.0) * ANGLE_MAX_DEG if normalized else mat[..., 5]
        movement = np.rint(mat[..., 6] * (MOVEMENT_MAX if normalized else 1.0)).astype(int)
        out.update(
            distance_m=dist, angle_deg=angle, movement=movement,
            waving=mat[..., 2] > 0.5, pointing=mat[..., 3] > 0.5, talking=mat[..., 4] > 0.5,
            entering=present & ((movement == 1) | (movement == 2)),
            leaving=present & ((movement == 3) | (movement == 4)),
        )
    else:
        dist = mat[..., 1] * (DISTANCE_MAX_M if normalized else 1.0)
        char = np.rint(mat[..., 2] * (CHARACTERISTIC_MAX if normalized else 1.0)).astype(int)
        angle = (mat[..., 5] * 2.0 - 1.0) * ANGLE_MAX_DEG if normalized else mat[..., 5]
        out.update(
            distance_m=dist, angle_deg=angle, characteristic=char,
            talking=mat[..., 3] > 0.5,
            pointed_at_count=np.rint(mat[..., 4] * (POINTED_AT_MAX if normalized else 1.0)).astype(int),
            waving=present & (char == int(Characteristic3D.WAVING)),
            pointing=present & (char == int(Characteristic3D.POINTING)),
            crossed_arms=present & (char == int(Characteristic3D.CROSSED_ARMS)),
            conversation=present & (char == int(Characteristic3D.CONVERSATION)),
            entering=present & (char == int(Characteristic3D.ENTER_EXIT)),
            moving=present & ((char == int(Characteristic3D.MOVING_SIDE))
                              | (char == int(Characteristic3D.MOVING_FORWARD))),
        )
    # absent targets carry no physical values
    out["distance_m"] = np.where(present, out["distance_m"], 0.0)
    out["angle_deg"] = np.where(present, out["angle_deg"], 0.0)
    return out


# ---------------------------------------------------------------------------
# gaze resampling

def resample_eyelink(samples: Sequence[GazeSample]) -> list[GazeSample]:
    """1000 Hz screen gaze to 24 fps: each 125-sample block yields 3 frames
    averaged over 42/42/41 samples. A frame is invalid when more than half of
    its group is invalid; otherwise the mean skips invalid samples.
    """
    if not samples:
        raise EmptyInput("no gaze samples")
    out: list[GazeSample] = []
    t0 = samples[0].t
    frame_i = 0
    n_blocks = len(samples) // 125
    for b in range(n_blocks):
        block = samples[b * 125:(b + 1) * 125]
        for lo, hi in ((0, 42), (42, 84), (84, 125)):
            group = block[lo:hi]
            good = [s for s in group if s.valid and s.point is not None]
            if len(good) * 2 < len(group):
                out.append(GazeSample(t0 + frame_i / 24.0, valid=False))
            else:
                xs = float(np.mean([s.point[0] for s in good]))
                ys = float(np.mean([s.point[1] for s in good]))
                out.append(GazeSample(t0 + frame_i / 24.0, point=(xs, ys)))
            frame_i += 1
    return out


def resample_vr(samples: Sequence[GazeSample], tick: float = 0.04) -> list[GazeSample]:
    """Linearly interpolate headset yaw onto the uniform tick grid.

    The grid starts at the first sample time; grid points outside the span of
    valid samples come back invalid.
    """
    if not samples:
        raise EmptyInput("no gaze samples")
    t0 = samples[0].t
    span = samples[-1].t - t0
    n = int(span / tick + 1e-9) + 1
    good = [(s.t, s.yaw) for s in samples if s.valid and s.yaw is not None]
    out: list[GazeSample] = []
    if not good:
        return [GazeSample(t0 + i * tick, valid=False) for i in range(n)]
    ts = np.array([g[0] for g in good])
    ys = np.array([g[1] for g in good])
    for i in range(n):
        t = t0 + i * tick
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            out.append(GazeSample(t, valid=False))
        else:
            out.append(GazeSample(t, yaw=float(np.interp(t, ts, ys))))
    return out


# ---------------------------------------------------------------------------
# labeling

def angle_to_px(angle_deg: float) -> float:
    return SCREEN_W / 2 + angle_deg * SCREEN_PX_PER_DEG


def px_to_angle(x: float) -> float:
    return (x - SCREEN_W / 2) / SCREEN_PX_PER_DEG


def resolve_label(sample: GazeSample, frame: SceneFrame,
                  geometry: LabelGeometry = DEFAULT_GEOMETRY) -> int:
    """Map a gaze sample to a target label on the frame, or NOISE.

    2D: the gaze point must fall inside a present character's angular band
    (full body height) or the box band at 0 degrees; among hits the nearest
    band center wins, ties to the lowest label index. 3D: yaw within
    tolerance of a present character's angle, nearest angle wins.
    """
    if not sample.valid:
        return NOISE
    if frame.variant == TWO_D:
        if sample.point is None:
            return NOISE
        x, y = sample.point
        if not (0 <= x <= SCREEN_W and 0 <= y <= SCREEN_H):
            return NOISE
        gaze_angle = px_to_angle(x)
        best = NOISE
        best_diff = np.inf
        for i, s in enumerate(frame.characters):
            if not s.present:
                continue
            diff = abs(gaze_angle - s.angle_deg)
            if diff <= geometry.char_tol_deg and diff < best_diff:
                best, best_diff = i, diff
        box_diff = abs(gaze_angle)
        if frame.box_present and box_diff <= geometry.box_tol_deg and box_diff < best_diff:
            best = scene.BOX_LABEL_INDEX
        return best
    if sample.yaw is None:
        return NOISE
    best = NOISE
    best_diff = np.inf
    for i, s in enumerate(frame.characters):
        if not s.present:
            continue
        diff = abs(sample.yaw - s.angle_deg)
        if diff <= geometry.yaw_tol_deg and diff < best_diff:
            best, best_diff = i, diff
    return best


def label_frames(timeline: scene.Timeline, samples: Sequence[GazeSample],
                 geometry: LabelGeometry = DEFAULT_GEOMETRY,
                 normalize: bool = True) -> list[LabeledFrame]:
    """Pair tick-aligned gaze samples with frames: encode features, resolve labels."""
    n = min(len(samples), len(timeline.frames))
    out = []
    for i in range(n):
        frame = timeline.frames[i]
        sample = samples[i]
        label = resolve_label(sample, frame, geometry)
        out.append(LabeledFrame(
            tick=frame.tick,
            features=encode_frame(frame, normalize=normalize),
            label=label,
            situation_id=timeline.situation_of(frame.tick),
            valid=sample.valid,
        ))
    return out


# ---------------------------------------------------------------------------
# windowing and folds

def window_dataset(labeled: Sequence[LabeledFrame], m: int, step: int = 1,
                   offset: int = 0, meta: dict | None = None) -> Dataset:
    """Slide an m-frame window; the example label is the frame after the window.

    A window is emitted when all m feature frames are valid and the label
    frame is valid with a non-noise label. Noise-labeled frames still serve
    as feature frames. ``offset`` shifts the first window position (useful
    for staggered subsampling when step > 1).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if offset < 0:
        raise ValueError("offset must be >= 0")
    if len(labeled) < m + 1:
        raise TooShort(f"need at least {m + 1} frames, got {len(labeled)}")
    variant = labeled[0].features.variant
    L = FEATURE_WIDTH[variant]
    normalized = labeled[0].features.normalized
    flats = np.stack([lf.features.flat for lf in labeled]).astype(np.float32)
    valid = np.array([lf.valid for lf in labeled], dtype=bool)
    labels = np.array([lf.label for lf in labeled], dtype=np.int64)
    sit = np.array([lf.situation_id for lf in labeled], dtype=np.int64)
    windows, out_labels, out_sit = [], [], []
    for t in range(m - 1 + offset, len(labeled) - 1, step):
        if not valid[t - m + 1:t + 1].all():
            continue
        if not valid[t + 1] or labels[t + 1] == NOISE:
            continue
        windows.append(flats[t - m + 1:t + 1])
        out_labels.append(labels[t + 1])
        out_sit.append(sit[t + 1])
    n = len(windows)
    label_names = scene.LABELS[variant]
    return Dataset(
        variant=variant, m=m, L=L,
        windows=np.stack(windows) if n else np.empty((0, m, L), dtype=np.float32),
        labels=np.asarray(out_labels, dtype=np.int64),
        situation_ids=np.asarray(out_sit, dtype=np.int64),
        label_names=label_names, normalized=normalized,
        meta=dict(meta or {}),
    )


def concat_datasets(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise EmptyInput("no datasets to concatenate")
    head = parts[0]
    for p in parts[1:]:
        if (p.variant, p.m, p.L, p.normalized) != (head.variant, head.m, head.L, head.normalized):
            raise ValueError("datasets are not compatible")
    return Dataset(
        head.variant, head.m, head.L,
        np.concatenate([p.windows for p in parts]),
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.situation_ids for p in parts]),
        head.label_names, head.normalized,
        {"parts": [p.meta for p in parts]},
    )


def plan_folds(dataset: Dataset, k: int = 10, seed: int = 0) -> FoldPlan:
    """Shuffle situation ids by seed, deal them round-robin into k test sets."""
    ids = np.unique(dataset.situation_ids)
    if len(ids) < k:
        raise TooFewSituations(f"{len(ids)} situations < k={k}")
    rng = np.random.default_rng(seed)
    shuffled = ids[rng.permutation(len(ids))]
    test_sets = [frozenset(int(s) for s in shuffled[i::k]) for i in range(k)]
    return FoldPlan(k=k, test_situations=tuple(test_sets))


def fold_split(dataset: Dataset, plan: FoldPlan, fold: int) -> tuple[np.ndarray, np.ndarray]:
    """(train indices, test indices) for one fold, by situation membership."""
    test_ids = plan.test_situations[fold]
    mask = np.isin(dataset.situation_ids, sorted(test_ids))
    return np.where(~mask)[0], np.where(mask)[0]


# ---------------------------------------------------------------------------
# dataset files (JSON-lines; schema documented in docs/dataset_schema.md)

DATASET_SCHEMA_VERSION = 1


def write_dataset_jsonl(dataset: Dataset, path):
    header = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "variant": dataset.variant,
        "m": dataset.m,
        "L": dataset.L,
        "labels": list(dataset.label_names),
        "normalization": {
            "normalized": dataset.normalized,
            "distance_max_m": DISTANCE_MAX_M,
            "angle_max_deg": ANGLE_MAX_DEG,
        },
        "seed": dataset.meta.get("seed"),
        "provenance": {k: v for k, v in dataset.meta.items() if k != "seed"},
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for i in range(len(dataset)):
            rec = {
                "window": [[round(float(v), 7) for v in row] for row in dataset.windows[i]],
                "label": int(dataset.labels[i]),
                "situation_id": int(dataset.situation_ids[i]),
            }
            fh.write(json.dumps(rec) + "\n")


def read_dataset_jsonl(path) -> Dataset:
    errors = validate_dataset_jsonl(path)
    if errors:
        raise ValueError(f"{path}: {errors[0]}")
    with open(path) as fh:
        header = json.loads(fh.readline())
        windows, labels, sits = [], [], []
        for line in fh:
            rec = json.loads(line)
            windows.append(rec["window"])
            labels.append(rec["label"])
            sits.append(rec["situation_id"])
    m, L = header["m"], header["L"]
    n = len(labels)
    meta = dict(header.get("provenance") or {})
    if header.get("seed") is not None:
        meta["seed"] = header["seed"]
    return Dataset(
        header["variant"], m, L,
        np.asarray(windows, dtype=np.float32).reshape(n, m, L) if n else np.empty((0, m, L), np.float32),
        np.asarray(labels, dtype=np.int64),
        np.asarray(sits, dtype=np.int64),
        tuple(header["labels"]),
        header["normalization"]["normalized"],
        meta,
    )


def validate_dataset_jsonl(path) -> list[str]:
    """Schema and invariant check; returns human-readable errors with line numbers."""
    errors: list[str] = []
    try:
        fh = open(path)
    except OSError as exc:
        return [str(exc)]
    with fh:
        try:
            header = json.loads(fh.readline())
        except ValueError:
            return ["line 1: header is not valid JSON"]
        for key in ("schema_version", "variant", "m", "L", "labels", "normalization"):
            if key not in header:
                errors.append(f"line 1: header missing {key!r}")
        if errors:
            return errors
        if header["schema_version"] != DATASET_SCHEMA_VERSION:
            return [f"line 1: unsupported schema_version {header['schema_version']}"]
        if header["variant"] not in (TWO_D, THREE_D):
            return [f"line 1: unknown variant {header['variant']!r}"]
        m, L = header["m"], header["L"]
        if L != FEATURE_WIDTH[header["variant"]]:
            errors.append(f"line 1: L={L} does not match variant {header['variant']} "
                          f"(expected {FEATURE_WIDTH[header['variant']]})")
        n_labels = len(header["labels"])
        normalized = bool(header["normalization"].get("normalized"))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError:
                errors.append(f"line {lineno}: not valid JSON")
                continue
            win = rec.get("window")
            if (not isinstance(win, list) or len(win) != m
                    or any(not isinstance(r, list) or len(r) != L for r in win)):
                errors.append(f"line {lineno}: window is not {m}x{L}")
                continue
            if normalized:
                arr = np.asarray(win, dtype=np.float64)
                if arr.min() < -1e-6 or arr.max() > 1.0 + 1e-6:
                    errors.append(f"line {lineno}: normalized values outside [0, 1]")
            label = rec.get("label")
            if not isinstance(label, int) or not (0 <= label < n_labels):
                errors.append(f"line {lineno}: label {label!r} outside 0..{n_labels - 1}")
            if not isinstance(rec.get("situation_id"), int):
                errors.append(f"line {lineno}: situation_id missing or not an integer")
            if len(errors) >= 20:
                errors.append("too many errors, stopping")
                break
    return errors
