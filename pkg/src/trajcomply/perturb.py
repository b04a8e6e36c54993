"""Map perturbation: inject a turn into the road ahead of the ego agent.

Every map vertex beyond a trigger distance along the ego's heading is
progressively rotated about the trigger point, bending the drivable area
and centerlines into a turn while agent histories and the ground truth
stay untouched. Useful for probing how predictions degrade on
out-of-distribution road geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import wrap_to_pi
from .errors import DegenerateHeading
from .geometry import DrivableArea
from .scene import CenterlineSet, Scene

_MIN_HEADING_STEP = 1e-6


@dataclass(frozen=True)
class TurnSpec:
    """A turn of ``turn_angle`` radians starting ``trigger_distance`` meters
    ahead of the ego, blended linearly over ``arc_length`` meters."""

    trigger_distance: float
    turn_angle: float
    arc_length: float

    def __post_init__(self):
        if not (np.isfinite(self.trigger_distance) and self.trigger_distance > 0):
            raise ValueError(f"trigger_distance must be > 0, got {self.trigger_distance}")
        if not (np.isfinite(self.arc_length) and self.arc_length > 0):
            raise ValueError(f"arc_length must be > 0, got {self.arc_length}")
        if not (np.isfinite(self.turn_angle) and abs(self.turn_angle) <= np.pi):
            raise ValueError(f"turn_angle must be in [-pi, pi], got {self.turn_angle}")


def ego_heading(scene: Scene) -> tuple[np.ndarray, np.ndarray]:
    """Ego position (last observed point) and unit heading from its history."""
    pts = scene.ego_history.points
    anchor = pts[-1]
    for prev in pts[-2::-1]:
        d = anchor - prev
        norm = float(np.hypot(d[0], d[1]))
        if norm >= _MIN_HEADING_STEP:
            return anchor, d / norm
    raise DegenerateHeading(f"scene {scene.id!r}: ego history is stationary")


def _bend(xy: np.ndarray, ego: np.ndarray, direction: np.ndarray,
          spec: TurnSpec) -> tuple[np.ndarray, np.ndarray]:
    """Rotate points past the trigger; returns (new_xy, per-point angle).

    Points at or before the trigger are copied without any arithmetic so
    they stay bit-identical.
    """
    u = (xy - ego) @ direction
    frac = np.clip((u - spec.trigger_distance) / spec.arc_length, 0.0, 1.0)
    ang = spec.turn_angle * frac
    out = xy.copy()
    moved = ang != 0.0
    if np.any(moved):
        pivot = ego + spec.trigger_distance * direction
        rel = xy[moved] - pivot
        c = np.cos(ang[moved])
        s = np.sin(ang[moved])
        out[moved, 0] = pivot[0] + c * rel[:, 0] - s * rel[:, 1]
        out[moved, 1] = pivot[1] + s * rel[:, 0] + c * rel[:, 1]
    return out, ang


def apply_turn(scene: Scene, spec: TurnSpec) -> Scene:
    """Bend the map ahead of the ego; histories and ground truth are kept.

    Centerline yaw values are incremented by each point's local rotation
    angle and renormalized. The result is re-validated against all scene
    invariants. The transform is not an involution: applying the opposite
    turn afterwards does not restore the original scene, because
    along-track coordinates are measured on the already-bent map.
    """
    ego, direction = ego_heading(scene)
    polygons = []
    for poly in scene.drivable.polygons:
        bent, _ = _bend(poly.vertices, ego, direction, spec)
        polygons.append(bent)
    segments = []
    for seg in scene.centerlines.segments:
        bent, ang = _bend(seg[:, :2], ego, direction, spec)
        theta = np.where(ang != 0.0, wrap_to_pi(seg[:, 2] + ang), seg[:, 2])
        segments.append(np.column_stack([bent, theta]))
    return Scene(id=scene.id, histories=scene.histories,
                 drivable=DrivableArea(polygons),
                 centerlines=CenterlineSet(segments),
                 ground_truth=scene.ground_truth, horizon=scene.horizon)
