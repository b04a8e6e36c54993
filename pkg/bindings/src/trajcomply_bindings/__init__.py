"""Batch array bindings over the trajcomply losses.

Exposes loss/gradient evaluation with an array-in/array-out calling
convention (64-bit floats throughout) so the losses can run as auxiliary
terms inside an external training loop. Gradients are returned, never
applied: the host framework owns the update step.

Scenes are pre-loaded once into immutable handles; `batch_losses` is
reentrant, keeps no global state, and its outputs are bit-identical to
the corresponding single-scene core calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trajcomply.losses import LossConfig, LossWeights, aux_components
from trajcomply.scene import Scene, load_scene

__version__ = "0.1.0"

__all__ = [
    "BatchRequest",
    "BatchResult",
    "SceneHandle",
    "ShapeError",
    "batch_losses",
    "load_scene_handle",
]


class ShapeError(ValueError):
    """An input array does not match the documented calling convention."""


@dataclass(frozen=True)
class SceneHandle:
    """Immutable reference to a fully validated scene."""

    scene: Scene

    @property
    def scene_id(self) -> str:
        return self.scene.id


def load_scene_handle(path) -> SceneHandle:
    """Load a scenario file into a handle; errors mirror the core loader.

    Every call returns an independent handle, so hosts may cache or drop
    them freely.
    """
    return SceneHandle(scene=load_scene(path))


@dataclass(frozen=True)
class BatchRequest:
    """A batch of prediction sets, one scene handle per batch entry.

    ``predictions`` must be (B, M, T, 2); anything array-like is accepted
    and converted to float64.
    """

    predictions: np.ndarray
    handles: tuple
    config: LossConfig
    weights: LossWeights

    def __post_init__(self):
        arr = np.asarray(self.predictions, dtype=np.float64)
        if arr.ndim != 4 or arr.shape[3] != 2:
            raise ShapeError(f"predictions must be (B, M, T, 2), got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ShapeError("batch must contain at least one prediction set")
        handles = tuple(self.handles)
        if len(handles) != arr.shape[0]:
            raise ShapeError(
                f"got {len(handles)} scene handles for batch size {arr.shape[0]}")
        for i, h in enumerate(handles):
            if not isinstance(h, SceneHandle):
                raise ShapeError(f"handles[{i}] is not a SceneHandle")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("predictions contain non-finite values")
        object.__setattr__(self, "predictions", arr)
        object.__setattr__(self, "handles", handles)


@dataclass(frozen=True)
class BatchResult:
    """Per-scene loss values and the combined auxiliary gradient.

    ``values[b]`` holds (offroad, direction, diversity) for batch entry b;
    ``gradients`` is (B, M, T, 2), the gradient of
    w_off * offroad + w_dir * direction - w_div * diversity.
    """

    values: np.ndarray
    gradients: np.ndarray


def batch_losses(req: BatchRequest) -> BatchResult:
    """Evaluate all three losses and the combined gradient per batch entry."""
    b, m, t, _ = req.predictions.shape
    values = np.empty((b, 3), dtype=np.float64)
    grads = np.empty((b, m, t, 2), dtype=np.float64)
    w = req.weights
    for i in range(b):
        parts = aux_components(req.predictions[i], req.handles[i].scene, req.config)
        values[i, 0] = parts["offroad"].value
        values[i, 1] = parts["direction"].value
        values[i, 2] = parts["diversity"].value
        grads[i] = (w.w_off * parts["offroad"].grad
                    + w.w_dir * parts["direction"].grad
                    - w.w_div * parts["diversity"].grad)
    return BatchResult(values=values, gradients=grads)
