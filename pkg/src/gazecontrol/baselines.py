"""Heuristic effective-attention baselines and their genetic-algorithm fitting.

Two weight-combination rules over a target's active social cues:
  product: EA = (prod of active cue weights) * P(r) * Theta(theta)
  sum:     EA = (sum of active cue weights)  * P(r) * O(theta)
with exponential distance decay P(r) = exp(-alpha r) and Gaussian angular
falloff Theta = O = exp(-theta^2 / (2 sigma^2)). The 2D box target competes
with a learned constant. Prediction is the EA argmax over present targets.

Baselines are instantaneous: on windowed data they score the most recent
frame of the window (decoded back to physical quantities).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import features, scene
from .features import Dataset
from .oracle import CUE_NAMES, active_cues
from .scene import TWO_D, SceneFrame

PRODUCT = "product"
SUM = "sum"

ALPHA_BOUNDS = (0.0, 2.0)
SIGMA_BOUNDS = (5.0, 180.0)

# the quoted reduced cue set used by the sum-form comparison model
SUM_QUOTED_CUES = ("talking", "waving", "entering", "leaving")


class NoPresentTarget(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


@dataclass
class HeuristicWeights:
    model_kind: str                       # "product" or "sum"
    w: dict[str, float]                   # cue -> positive weight
    alpha: float = 0.25                   # distance decay
    sigma_deg: float = 60.0               # angular width
    w_box: float = 0.5                    # constant EA of the 2D box
    cue_mask: tuple[str, ...] = CUE_NAMES

    def validate(self):
        if self.model_kind not in (PRODUCT, SUM):
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        if any(v <= 0 for v in self.w.values()) or self.w_box <= 0:
            raise ValueError("weights must be strictly positive")
        if not (ALPHA_BOUNDS[0] <= self.alpha <= ALPHA_BOUNDS[1]):
            raise ValueError(f"alpha {self.alpha} outside {ALPHA_BOUNDS}")
        if not (SIGMA_BOUNDS[0] <= self.sigma_deg <= SIGMA_BOUNDS[1]):
            raise ValueError(f"sigma {self.sigma_deg} outside {SIGMA_BOUNDS}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HeuristicWeights":
        data = json.loads(text)
        data["cue_mask"] = tuple(data.get("cue_mask", CUE_NAMES))
        return cls(**data)


def ea_score(frame: SceneFrame, weights: HeuristicWeights) -> np.ndarray:
    """Per-label EA values on one frame; absent targets get -inf."""
    labels = scene.LABELS[frame.variant]
    out = np.full(len(labels), -np.inf)
    any_present = False
    for i, s in enumerate(frame.characters):
        if not s.present:
            continue
        any_present = True
        cues = [c for c in active_cues(s) if c in weights.cue_mask]
        if weights.model_kind == PRODUCT:
            combined = 1.0
            for c in cues:
                combined *= weights.w.get(c, 1.0)
        else:
            combined = float(sum(weights.w.get(c, 0.0) for c in cues))
        kernel = np.exp(-weights.alpha * s.distance_m) * \
            np.exp(-(s.angle_deg ** 2) / (2.0 * weights.sigma_deg ** 2))
        out[i] = combined * kernel
    if frame.variant == TWO_D and frame.box_present:
        out[scene.BOX_LABEL_INDEX] = weights.w_box
        any_present = True
    if not any_present:
        raise NoPresentTarget("no present target on frame")
    return out


def predict(frame: SceneFrame, weights: HeuristicWeights) -> int:
    """EA argmax; ties break toward the lowest label index."""
    return int(np.argmax(ea_score(frame, weights)))


# ---------------------------------------------------------------------------
# vectorized scoring over windowed datasets

@dataclass
class _FrameBatch:
    """Decoded most-recent-frame quantities for every example."""
    variant: str
    present: np.ndarray        # (n, targets) bool
    cue_active: np.ndarray     # (n, targets, n_cues) bool, CUE_NAMES order
    distance: np.ndarray       # (n, targets)
    angle: np.ndarray          # (n, targets)


def frame_batch_from_dataset(dataset: Dataset) -> _FrameBatch:
    last = dataset.windows[:, -1, :]
    dec = features.decode_rows(last, dataset.variant, dataset.normalized)
    cue_layers = []
    for cue in CUE_NAMES:
        if cue in dec:
            cue_layers.append(dec[cue])
        else:
            cue_layers.append(np.zeros_like(dec["present"]))
    return _FrameBatch(
        variant=dataset.variant,
        present=dec["present"],
        cue_active=np.stack(cue_layers, axis=-1) & dec["present"][..., None],
        distance=dec["distance_m"],
        angle=dec["angle_deg"],
    )


def ea_scores_batch(batch: _FrameBatch, weights: HeuristicWeights) -> np.ndarray:
    """(n, n_labels) EA matrix; absent targets -inf, box column for 2D."""
    mask = np.array([c in weights.cue_mask for c in CUE_NAMES])
    wvec = np.array([weights.w.get(c, 1.0) for c in CUE_NAMES])
    active = (batch.cue_active & mask[None, None, :]).astype(np.float64)
    if weights.model_kind == PRODUCT:
        combined = np.exp(active @ np.log(wvec))
    else:
        combined = active @ np.array([weights.w.get(c, 0.0) for c in CUE_NAMES])
    kernel = np.exp(-weights.alpha * batch.distance
                    - (batch.angle ** 2) / (2.0 * weights.sigma_deg ** 2))
    ea = np.where(batch.present, combined * kernel, -np.inf)
    if batch.variant == TWO_D:
        box = np.full((len(ea), 1), weights.w_box)
        ea = np.concatenate([ea, box], axis=1)
    return ea


def predict_batch(batch: _FrameBatch, weights: HeuristicWeights) -> np.ndarray:
    ea = ea_scores_batch(batch, weights)
    preds = ea.argmax(axis=1)
    none_present = ~np.isfinite(ea).any(axis=1)
    preds[none_present] = -1
    return preds


def accuracy_on_dataset(dataset: Dataset, weights: HeuristicWeights,
                        batch: _FrameBatch | None = None) -> float:
    if batch is None:
        batch = frame_batch_from_dataset(dataset)
    preds = predict_batch(batch, weights)
    return float((preds == dataset.labels).mean())


# ---------------------------------------------------------------------------
# genetic algorithm

@dataclass
class GaConfig:
    pop: int = 60
    generations: int = 200
    mutation_sigma: float = 0.25   # gaussian step in log-weight space
    elite: int = 2
    tournament: int = 3
    crossover_rate: float = 0.6
    holdout_frac: float = 0.2
    seed: int = 0


@dataclass
class GaResult:
    weights: HeuristicWeights
    train_accuracy: float
    holdout_accuracy: float
    best_per_generation: list[float] = field(default_factory=list)


def _genome_to_weights(genome: np.ndarray, model_kind: str,
                       cue_mask: tuple[str, ...]) -> HeuristicWeights:
    w = {c: float(np.exp(genome[i])) for i, c in enumerate(CUE_NAMES)}
    return HeuristicWeights(
        model_kind=model_kind, w=w,
        alpha=float(np.clip(genome[len(CUE_NAMES)], *ALPHA_BOUNDS)),
        sigma_deg=float(np.clip(genome[len(CUE_NAMES) + 1], *SIGMA_BOUNDS)),
        w_box=float(np.exp(genome[len(CUE_NAMES) + 2])),
        cue_mask=cue_mask,
    )


def fit_ga(dataset: Dataset, model_kind: str, config: GaConfig | None = None,
           cue_mask: tuple[str, ...] | None = None) -> GaResult:
    """Maximize top-1 argmax accuracy with tournament selection, uniform
    crossover, log-space mutation, and elitism. Deterministic given the seed."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    config = config or GaConfig()
    cue_mask = tuple(cue_mask) if cue_mask is not None else CUE_NAMES
    rng = np.random.default_rng(config.seed)

    n = len(dataset)
    perm = rng.permutation(n)
    n_hold = int(n * config.holdout_frac)
    hold_idx, fit_idx = perm[:n_hold], perm[n_hold:]
    fit_ds = dataset.subset(fit_idx)
    hold_ds = dataset.subset(hold_idx) if n_hold else dataset.subset(fit_idx)
    fit_batch = frame_batch_from_dataset(fit_ds)
    hold_batch = frame_batch_from_dataset(hold_ds)

    dim = len(CUE_NAMES) + 3  # log-weights, alpha, sigma, log w_box

    def random_genome():
        # mild priors: gentle kernels and a weak box so initial populations
        # rank people rather than collapsing into the constant-box optimum
        g = np.empty(dim)
        g[:len(CUE_NAMES)] = rng.normal(0.0, 1.0, size=len(CUE_NAMES))
        g[len(CUE_NAMES)] = rng.uniform(0.0, 0.8)
        g[len(CUE_NAMES) + 1] = rng.uniform(30.0, 120.0)
        g[len(CUE_NAMES) + 2] = rng.normal(-2.0, 1.0)
        return g

    def fitness(genome):
        weights = _genome_to_weights(genome, model_kind, cue_mask)
        return accuracy_on_dataset(fit_ds, weights, fit_batch)

    population = [random_genome() for _ in range(config.pop)]
    scores = np.array([fitness(g) for g in population])
    best_history = []
    for _gen in range(config.generations):
        order = np.argsort(-scores, kind="stable")
        population = [population[i] for i in order]
        scores = scores[order]
        best_history.append(float(scores[0]))
        next_pop = [population[i].copy() for i in range(min(config.elite, config.pop))]
        while len(next_pop) < config.pop:
            idx = rng.integers(0, config.pop, size=config.tournament)
            a = population[int(idx[np.argmax(scores[idx])])]
            if rng.random() < config.crossover_rate:
                idx = rng.integers(0, config.pop, size=config.tournament)
                b = population[int(idx[np.argmax(scores[idx])])]
                mask = rng.random(dim) < 0.5
                child = np.where(mask, a, b)
            else:
                child = a.copy()
            child = child + rng.normal(0.0, config.mutation_sigma, size=dim)
            child[len(CUE_NAMES)] = np.clip(child[len(CUE_NAMES)], *ALPHA_BOUNDS)
            child[len(CUE_NAMES) + 1] = np.clip(child[len(CUE_NAMES) + 1], *SIGMA_BOUNDS)
            next_pop.append(child)
        population = next_pop
        new_scores = np.array([fitness(g) for g in population])
        # elitism guarantees the champion survives verbatim
        scores = new_scores
    order = np.argsort(-scores, kind="stable")
    best = population[int(order[0])]
    best_history.append(float(scores[order[0]]))
    weights = _genome_to_weights(best, model_kind, cue_mask)
    return GaResult(
        weights=weights,
        train_accuracy=accuracy_on_dataset(fit_ds, weights, fit_batch),
        holdout_accuracy=accuracy_on_dataset(hold_ds, weights, hold_batch),
        best_per_generation=best_history,
    )
