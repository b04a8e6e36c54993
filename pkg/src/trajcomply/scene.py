"""Scene container and scenario-file ingestion/serialization.

A scenario file is UTF-8 JSON:

    {"id": str, "dt": number, "horizon": int,
     "histories": [[[x, y], ...], ...],          # agent 0 is the ego
     "drivable_area": [[[x, y], ...], ...],      # one vertex list per polygon
     "centerlines": [[[x, y, theta], ...], ...],
     "ground_truth": [[x, y], ...]}

A predictions file is {"scenes": [{"id": str, "modes": [[[x, y], ...], ...]}]}.
All numbers are finite doubles, angles in radians. Loading is total: any
byte stream yields a valid object, a ParseError or a ValidationError.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .angles import wrap_to_pi
from .errors import ParseError, UnknownSceneId, ValidationError
from .geometry import DrivableArea


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """Ordered 2D points sampled every ``dt`` seconds."""

    points: np.ndarray
    dt: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValidationError("points", f"expected an (N, 2) array, got shape {pts.shape}")
        if len(pts) < 1:
            raise ValidationError("points", "trajectory must have at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points", "coordinates must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("dt", f"dt must be a positive finite number, got {self.dt}")
        object.__setattr__(self, "points", _freeze(pts))

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Trajectory) and self.dt == other.dt
                and np.array_equal(self.points, other.points))


@dataclass(frozen=True)
class PredictionSet:
    """M candidate future trajectories of uniform length T."""

    modes: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=np.float64)
        if m.ndim != 3 or m.shape[2] != 2:
            raise ValidationError("modes", f"expected an (M, T, 2) array, got shape {m.shape}")
        if m.shape[0] < 1 or m.shape[1] < 1:
            raise ValidationError("modes", "need at least one mode with at least one point")
        if not np.all(np.isfinite(m)):
            raise ValidationError("modes", "coordinates must be finite")
        object.__setattr__(self, "modes", _freeze(m))

    @property
    def num_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def horizon(self) -> int:
        return self.modes.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, PredictionSet) and np.array_equal(self.modes, other.modes)


class CenterlineSet:
    """Lane-center polylines; every point carries position and yaw.

    Segments may have different lengths. Yaw values are normalized into
    (-pi, pi] on construction. ``flat_xy`` / ``flat_theta`` stack all
    points in (segment, point) order, which is the argmin tie-break order
    for the direction-consistency loss.
    """

    def __init__(self, segments):
        segs = []
        for i, seg in enumerate(segments):
            arr = np.asarray(seg, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ValidationError(f"segments[{i}]",
                                      f"expected a (K, 3) array of (x, y, theta), got shape {arr.shape}")
            if len(arr) < 1:
                raise ValidationError(f"segments[{i}]", "centerline segment is empty")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"segments[{i}]", "values must be finite")
            arr = arr.copy()
            arr[:, 2] = wrap_to_pi(arr[:, 2])
            segs.append(_freeze(arr))
        if not segs:
            raise ValidationError("segments", "need at least one centerline segment")
        self.segments = tuple(segs)
        flat = np.concatenate(segs, axis=0)
        self.flat_xy = _freeze(flat[:, :2].copy())
        self.flat_theta = _freeze(flat[:, 2].copy())

    def __len__(self) -> int:
        return len(self.segments)

    def __eq__(self, other) -> bool:
        return (isinstance(other, CenterlineSet)
                and len(self.segments) == len(other.segments)
                and all(np.array_equal(a, b) for a, b in zip(self.segments, other.segments)))


@dataclass(frozen=True)
class Scene:
    """One prediction problem: agent histories, map, and ground truth."""

    id: str
    histories: tuple
    drivable: DrivableArea
    centerlines: CenterlineSet
    ground_truth: Trajectory
    horizon: int = field(default=0)

    def __post_init__(self):
        if not self.histories:
            raise ValidationError("histories", "need at least the ego history")
        horizon = self.horizon or len(self.ground_truth)
        if len(self.ground_truth) != horizon:
            raise ValidationError(
                "ground_truth",
                f"length {len(self.ground_truth)} does not match horizon {horizon}")
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "histories", tuple(self.histories))

    @property
    def ego_history(self) -> Trajectory:
        return self.histories[0]

    @property
    def dt(self) -> float:
        return self.ground_truth.dt

    def __eq__(self, other) -> bool:
        return (isinstance(other, Scene)
                and self.id == other.id
                and self.horizon == other.horizon
                and self.histories == other.histories
                and self.ground_truth == other.ground_truth
                and self.centerlines == other.centerlines
                and len(self.drivable.polygons) == len(other.drivable.polygons)
                and all(a == b for a, b in zip(self.drivable.polygons, other.drivable.polygons)))


def _read_json(path) -> object:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError as err:
        raise ParseError(f"{path}: {err}") from None
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ParseError(f"{path}: {err}") from None


def _require(obj: dict, key: str, kind, path: str):
    if key not in obj:
        raise ValidationError(f"{path}{key}", "missing required field")
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValidationError(f"{path}{key}", f"expected a number, got {type(val).__name__}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ValidationError(f"{path}{key}", f"expected an integer, got {type(val).__name__}")
        return val
    if not isinstance(val, kind):
        raise ValidationError(f"{path}{key}", f"expected {kind.__name__}, got {type(val).__name__}")
    return val


def _point_array(rows, width: int, path: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise ValidationError(path, "expected a non-empty list of points")
    try:
        arr = np.asarray(rows, dtype=np.float64)
    except (TypeError, ValueError):
        raise ValidationError(path, "points are not numeric") from None
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValidationError(path, f"expected rows of {width} numbers")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(path, "values must be finite")
    return arr


def load_scene(path) -> Scene:
    """Load and fully validate one scenario file."""
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ValidationError("$", "top level must be an object")

    scene_id = _require(doc, "id", str, "")
    dt = _require(doc, "dt", float, "")
    horizon = _require(doc, "horizon", int, "")
    if horizon < 1:
        raise ValidationError("horizon", "must be >= 1")

    histories_raw = _require(doc, "histories", list, "")
    if not histories_raw:
        raise ValidationError("histories", "need at least the ego history")
    histories = []
    for i, rows in enumerate(histories_raw):
        pts = _point_array(rows, 2, f"histories[{i}]")
        histories.append(Trajectory(points=pts, dt=dt))

    area_raw = _require(doc, "drivable_area", list, "")
    try:
        drivable = DrivableArea(area_raw)
    except ValidationError as err:
        raise ValidationError(f"drivable_area.{err.path}", err.message) from None

    lines_raw = _require(doc, "centerlines", list, "")
    try:
        centerlines = CenterlineSet(lines_raw)
    except ValidationError as err:
        raise ValidationError(f"centerlines.{err.path}", err.message) from None

    gt_pts = _point_array(_require(doc, "ground_truth", list, ""), 2, "ground_truth")
    if len(gt_pts) != horizon:
        raise ValidationError("ground_truth",
                              f"length {len(gt_pts)} does not match horizon {horizon}")
    ground_truth = Trajectory(points=gt_pts, dt=dt)

    return Scene(id=scene_id, histories=tuple(histories), drivable=drivable,
                 centerlines=centerlines, ground_truth=ground_truth, horizon=horizon)


def save_scene(scene: Scene, path) -> None:
    """Write a scene back to the scenario schema; inverse of load_scene."""
    doc = {
        "id": scene.id,
        "dt": scene.dt,
        "horizon": scene.horizon,
        "histories": [t.points.tolist() for t in scene.histories],
        "drivable_area": [p.vertices.tolist() for p in scene.drivable.polygons],
        "centerlines": [seg.tolist() for seg in scene.centerlines.segments],
        "ground_truth": scene.ground_truth.points.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_predictions(path, scenes: dict[str, Scene] | None = None,
                     strict: bool = True) -> dict[str, PredictionSet]:
    """Load a predictions file, keyed by scene id.

    With ``scenes`` given, every referenced id must exist (UnknownSceneId
    unless ``strict`` is False) and every mode length must match the
    scene's horizon; dt is taken from the matching scene.
    """
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ValidationError("$", "top level must be an object")
    entries = _require(doc, "scenes", list, "")
    out: dict[str, PredictionSet] = {}
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ValidationError(f"scenes[{i}]", "expected an object")
        sid = _require(entry, "id", str, f"scenes[{i}].")
        if sid in out:
            raise ValidationError(f"scenes[{i}].id", f"duplicate scene id {sid!r}")
        modes_raw = _require(entry, "modes", list, f"scenes[{i}].")
        if not modes_raw:
            raise ValidationError(f"scenes[{i}].modes", "need at least one mode")
        lengths = {len(m) if isinstance(m, list) else -1 for m in modes_raw}
        if len(lengths) != 1:
            raise ValidationError(f"scenes[{i}].modes",
                                  f"modes have differing lengths {sorted(lengths)}")
        arr = np.stack([_point_array(m, 2, f"scenes[{i}].modes[{j}]")
                        for j, m in enumerate(modes_raw)])
        dt = None
        if scenes is not None and sid in scenes:
            scene = scenes[sid]
            if arr.shape[1] != scene.horizon:
                raise ValidationError(
                    f"scenes[{i}].modes",
                    f"mode length {arr.shape[1]} does not match horizon {scene.horizon}")
            dt = scene.dt
        out[sid] = PredictionSet(modes=arr, dt=dt)
    if scenes is not None and strict:
        unknown = set(out) - set(scenes)
        if unknown:
            raise UnknownSceneId(unknown)
    return out


def save_predictions(preds: dict[str, PredictionSet], path) -> None:
    """Write predictions keyed by scene id, in sorted-id order."""
    doc = {"scenes": [{"id": sid, "modes": preds[sid].modes.tolist()}
                      for sid in sorted(preds)]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
