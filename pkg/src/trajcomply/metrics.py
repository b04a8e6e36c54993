"""Accuracy and map-compliance metrics over prediction sets and corpora."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCorpus, LengthMismatch
from .losses import LossConfig, aux_components
from .scene import PredictionSet, Scene, Trajectory

# A scene is a miss when its best final displacement strictly exceeds this.
MISS_THRESHOLD_M = 2.0


@dataclass(frozen=True)
class SceneReport:
    """Per-scene metric values plus the winning mode indices."""

    scene_id: str
    min_ade: float
    min_fde: float
    miss: bool
    offroad: float
    direction: float
    diversity: float
    ade_winner: int
    fde_winner: int


@dataclass(frozen=True)
class CorpusReport:
    """Equal-weight per-scene means and the underlying table (sorted by id)."""

    scene_count: int
    mean_min_ade: float
    mean_min_fde: float
    miss_rate: float
    mean_offroad: float
    mean_direction: float
    mean_diversity: float
    scenes: tuple[SceneReport, ...]


def _gt_points(gt) -> np.ndarray:
    return gt.points if isinstance(gt, Trajectory) else np.asarray(gt, dtype=np.float64)


def _mode_displacements(preds, gt) -> np.ndarray:
    modes = preds.modes if isinstance(preds, PredictionSet) else np.asarray(preds, dtype=np.float64)
    ref = _gt_points(gt)
    if modes.shape[1] != len(ref):
        raise LengthMismatch(
            f"prediction horizon {modes.shape[1]} != ground truth length {len(ref)}")
    diff = modes - ref[None, :, :]
    return np.sqrt(diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1])


def min_ade(preds, gt) -> tuple[float, int]:
    """Minimum over modes of the per-step-averaged displacement error."""
    per_mode = _mode_displacements(preds, gt).mean(axis=1)
    winner = int(np.argmin(per_mode))
    return float(per_mode[winner]), winner


def min_fde(preds, gt) -> tuple[float, int]:
    """Minimum over modes of the final-step displacement error."""
    final = _mode_displacements(preds, gt)[:, -1]
    winner = int(np.argmin(final))
    return float(final[winner]), winner


def miss_rate(reports) -> float:
    """Fraction of scenes whose min_fde strictly exceeds 2 meters."""
    reports = list(reports)
    if not reports:
        raise EmptyCorpus("miss rate over zero scenes")
    return sum(1 for r in reports if r.min_fde > MISS_THRESHOLD_M) / len(reports)


def quality_metrics(preds, scene: Scene, cfg: LossConfig,
                    per_step_average: bool = False) -> tuple[float, float, float]:
    """The three auxiliary loss values evaluated as metrics (no gradients).

    ``per_step_average`` divides the offroad and direction values by the
    horizon for reporting; the diversity value already averages per step.
    """
    parts = aux_components(preds, scene, cfg)
    off = parts["offroad"].value
    direction = parts["direction"].value
    if per_step_average:
        horizon = (preds.modes if isinstance(preds, PredictionSet) else np.asarray(preds)).shape[1]
        off /= horizon
        direction /= horizon
    return off, direction, parts["diversity"].value


def evaluate_scene(preds, scene: Scene, cfg: LossConfig,
                   per_step_average: bool = False) -> SceneReport:
    """All metrics for one (scene, predictions) pair."""
    ade, ade_winner = min_ade(preds, scene.ground_truth)
    fde, fde_winner = min_fde(preds, scene.ground_truth)
    off, direction, div = quality_metrics(preds, scene, cfg, per_step_average)
    return SceneReport(scene_id=scene.id, min_ade=ade, min_fde=fde,
                       miss=fde > MISS_THRESHOLD_M, offroad=off, direction=direction,
                       diversity=div, ade_winner=ade_winner, fde_winner=fde_winner)


def aggregate(reports) -> CorpusReport:
    """Equal-weight corpus means, scenes ordered by id."""
    table = tuple(sorted(reports, key=lambda r: r.scene_id))
    if not table:
        raise EmptyCorpus("aggregate over zero scenes")
    mean = lambda key: float(np.mean([getattr(r, key) for r in table]))
    return CorpusReport(
        scene_count=len(table),
        mean_min_ade=mean("min_ade"),
        mean_min_fde=mean("min_fde"),
        miss_rate=miss_rate(table),
        mean_offroad=mean("offroad"),
        mean_direction=mean("direction"),
        mean_diversity=mean("diversity"),
        scenes=table,
    )
