"""Synthetic corridor scenarios.

Deterministic generator for straight-corridor scenes with a fan of
multimodal predictions, several of which leave the road. Used by the
verification suite and handy as demo data: the corpus exercises every
loss, the refiner, and the turn perturbation without any real map data.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import DrivableArea
from .scene import CenterlineSet, PredictionSet, Scene, Trajectory, save_predictions, save_scene

# Fan geometry: modes steering less than ~3 deg stay inside the narrowest
# corridor over the full horizon; those beyond ~12 deg are guaranteed out.
_ONROAD_MAX_RAD = np.deg2rad(3.0)
_OFFROAD_MIN_RAD = np.deg2rad(12.0)
_OFFROAD_MAX_RAD = np.deg2rad(30.0)


def _rotate(points: np.ndarray, angle: float, offset: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return points @ rot.T + offset


def corridor_scene(scene_id: str, rng: np.random.Generator, *,
                   horizon: int = 12, dt: float = 0.5,
                   n_modes: int = 6) -> tuple[Scene, PredictionSet]:
    """One straight-corridor scene plus a fan of predictions.

    Between 50% and ~83% of the modes (3 to 5 of 6) steer off the corridor
    within the horizon; mode 0 hugs the ground truth and stays on the road.
    The whole scene is placed at a random pose so nothing is axis-aligned.
    """
    width = float(rng.uniform(6.0, 8.0))
    speed = float(rng.uniform(4.5, 5.5))
    length_fwd = 45.0
    length_back = 15.0
    pose_angle = float(rng.uniform(-np.pi, np.pi))
    pose_offset = rng.uniform(-30.0, 30.0, 2)

    half = width / 2.0
    xs = np.arange(-length_back, length_fwd + 1e-9, 1.5)
    bottom = np.column_stack([xs, np.full_like(xs, -half)])
    top = np.column_stack([xs[::-1], np.full_like(xs, half)])
    ring = np.concatenate([bottom, top])

    cl_x = np.arange(-length_back, length_fwd + 1e-9, 1.0)
    centerline = np.column_stack([cl_x, np.zeros_like(cl_x), np.zeros_like(cl_x)])

    n_hist = 5
    hist_x = (np.arange(n_hist) - (n_hist - 1)) * speed * dt
    history = np.column_stack([hist_x, np.zeros(n_hist)])

    gt_x = (np.arange(horizon) + 1) * speed * dt
    gt = np.column_stack([gt_x, np.zeros(horizon)])

    n_off = int(rng.integers(3, 6))
    fan = [float(rng.uniform(-0.4, 0.4))]  # mode 0: near ground truth (lateral, m)
    angles = [0.0]
    for k in range(1, n_modes):
        if k <= n_off:
            mag = rng.uniform(_OFFROAD_MIN_RAD, _OFFROAD_MAX_RAD)
        else:
            mag = rng.uniform(0.2 * _ONROAD_MAX_RAD, _ONROAD_MAX_RAD)
        angles.append(float(mag if rng.random() < 0.5 else -mag))
        fan.append(0.0)
    modes = []
    for k in range(n_modes):
        ray = np.column_stack([gt_x * np.cos(angles[k]) ,
                               gt_x * np.sin(angles[k]) + fan[k]])
        modes.append(ray)
    modes = np.stack(modes)

    place = lambda pts: _rotate(pts, pose_angle, pose_offset)
    scene = Scene(
        id=scene_id,
        histories=(Trajectory(points=place(history), dt=dt),),
        drivable=DrivableArea([place(ring)]),
        centerlines=CenterlineSet([np.column_stack([
            place(centerline[:, :2]), centerline[:, 2] + pose_angle])]),
        ground_truth=Trajectory(points=place(gt), dt=dt),
        horizon=horizon,
    )
    preds = PredictionSet(modes=np.stack([place(m) for m in modes]), dt=dt)
    return scene, preds


def corridor_corpus(n_scenes: int = 20, seed: int = 0, **kw) -> list[tuple[Scene, PredictionSet]]:
    """Deterministic corpus of corridor scenes keyed by (seed, index)."""
    out = []
    for i in range(n_scenes):
        rng = np.random.default_rng([seed, i])
        out.append(corridor_scene(f"corridor-{i:03d}", rng, **kw))
    return out


def straight_predictions(scene: Scene) -> PredictionSet:
    """A single straight-ahead mode: the ground truth itself."""
    return PredictionSet(modes=scene.ground_truth.points[None, :, :].copy(),
                         dt=scene.dt)


def write_corpus(pairs, scenes_dir, predictions_path) -> None:
    """Write scenes one file per id plus a combined predictions file."""
    scenes_dir = Path(scenes_dir)
    scenes_dir.mkdir(parents=True, exist_ok=True)
    for scene, _ in pairs:
        save_scene(scene, scenes_dir / f"{scene.id}.json")
    save_predictions({scene.id: preds for scene, preds in pairs}, predictions_path)
