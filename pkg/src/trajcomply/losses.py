"""Map-aware auxiliary losses over multimodal trajectory predictions.

Three losses, each with its analytic gradient with respect to every
predicted coordinate, applied across all modes rather than only the
mode closest to ground truth:

* offroad: hinge on the signed distance to the drivable area,
* direction consistency: hinge-penalized position/heading mismatch
  against the best-matching centerline point,
* mode diversity: pairwise spread of the modes that stay on the road.

Values average over modes but deliberately not over timesteps (the
diversity term carries its own per-step average); per-step scaling for
reporting lives in the metrics module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import abs_angle_diff, wrap_to_pi
from .errors import EmptyCenterlines
from .geometry import DrivableArea, signed_distance_batch
from .scene import CenterlineSet, PredictionSet, Scene, Trajectory

# Heading segments shorter than this carry the previous step's heading.
DEGENERATE_STEP = 1e-6


@dataclass(frozen=True)
class LossConfig:
    """Margins for the hinge terms.

    The defaults are lane-width-scale tolerances, not values from any
    benchmark. ``feasibility_uses_margin`` controls whether the diversity
    feasibility test applies ``offroad_margin`` on top of the interior test.
    """

    offroad_margin: float = 0.0
    direction_dist_margin: float = 2.0
    direction_angle_margin: float = np.pi / 12
    feasibility_uses_margin: bool = False

    def __post_init__(self):
        for name in ("offroad_margin", "direction_dist_margin", "direction_angle_margin"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class LossWeights:
    """Relative weights of the auxiliary components.

    ``w_div`` enters the combined loss negatively: diversity is maximized.
    """

    w_off: float = 1.0
    w_dir: float = 1.0
    w_div: float = 0.0


@dataclass(frozen=True)
class LossValueAndGrad:
    """A scalar loss and its (M, T, 2) gradient wrt predicted coordinates."""

    value: float
    grad: np.ndarray


def _modes_array(preds) -> np.ndarray:
    if isinstance(preds, PredictionSet):
        return preds.modes
    arr = np.asarray(preds, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"expected an (M, T, 2) array, got shape {arr.shape}")
    return arr


def _history_point(ego_history) -> np.ndarray | None:
    if ego_history is None:
        return None
    if isinstance(ego_history, Trajectory):
        return ego_history.points[-1]
    arr = np.asarray(ego_history, dtype=np.float64)
    return arr if arr.ndim == 1 else arr[-1]


def _headings_with_deps(points: np.ndarray, hist: np.ndarray | None):
    """Per-step headings plus the index pair of the segment defining each.

    dep rows hold (a, b) indices into ``points``; a == -1 means the fixed
    history point, (-2, -2) means the heading is a carried constant.
    Degenerate steps inherit both the heading and the defining segment of
    the previous step, so gradients chain through carries.
    """
    t_len = len(points)
    gamma = np.zeros(t_len)
    deps = np.full((t_len, 2), -2, dtype=np.intp)
    carry_set = False
    if hist is not None:
        d = points[0] - hist
        if float(np.hypot(d[0], d[1])) >= DEGENERATE_STEP:
            gamma[0] = np.arctan2(d[1], d[0])
            deps[0] = (-1, 0)
        carry_set = True
    for t in range(1, t_len):
        d = points[t] - points[t - 1]
        if float(np.hypot(d[0], d[1])) >= DEGENERATE_STEP:
            gamma[t] = np.arctan2(d[1], d[0])
            deps[t] = (t - 1, t)
        elif carry_set or t > 1:
            gamma[t] = gamma[t - 1]
            deps[t] = deps[t - 1]
        carry_set = True
    if hist is None and t_len > 1:
        gamma[0] = gamma[1]
        deps[0] = deps[1]
    return gamma, deps


def heading_of(traj, ego_history=None) -> np.ndarray:
    """Heading angle of each trajectory step.

    Step t's heading is the direction of the segment arriving at point t.
    The first step uses the segment from the ego's last observed point
    when a history is given, otherwise it copies the second step's
    heading. Steps shorter than 1e-6 m carry the previous heading
    (0 when there is nothing to carry).
    """
    points = traj.points if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    gamma, _ = _headings_with_deps(points, _history_point(ego_history))
    return gamma


def offroad_loss(preds, area: DrivableArea, cfg: LossConfig) -> LossValueAndGrad:
    """Hinge on signed distance to the drivable area, summed over points.

    value = mean over modes of sum over steps of max(dist + margin, 0).
    The gradient at each offending point is the unit direction of
    increasing distance scaled by 1/M; points inside the margin get zero.
    """
    modes = _modes_array(preds)
    m, t_len = modes.shape[0], modes.shape[1]
    sd = signed_distance_batch(modes.reshape(-1, 2), area)
    slack = sd.distance + cfg.offroad_margin
    active = slack > 0.0
    # np.maximum keeps NaNs flowing into the value instead of masking them
    value = float(np.sum(np.maximum(slack, 0.0))) / m
    grad = np.where(active[:, None], sd.gradient, 0.0) / m
    return LossValueAndGrad(value=value, grad=grad.reshape(m, t_len, 2))


def direction_consistency_loss(preds, centerlines: CenterlineSet, cfg: LossConfig,
                               ego_history=None) -> LossValueAndGrad:
    """Best-centerline-point mismatch summed over all predicted points.

    Each point pays a hinged position distance plus a hinged heading
    difference against its best-matching centerline point (ties to the
    lowest (segment, point) index). Gradients flow only through the argmin
    point and only through active hinges; the heading term chains through
    the two endpoints of the segment that defines the step's heading.
    """
    modes = _modes_array(preds)
    cl_xy = centerlines.flat_xy
    cl_theta = centerlines.flat_theta
    if len(cl_xy) == 0:
        raise EmptyCenterlines("no centerline points")
    hist = _history_point(ego_history)

    m, t_len = modes.shape[0], modes.shape[1]
    value = 0.0
    grad = np.zeros((m, t_len, 2))
    rows = np.arange(t_len)
    for i in range(m):
        pts = modes[i]
        gamma, deps = _headings_with_deps(pts, hist)
        dx = pts[:, 0:1] - cl_xy[None, :, 0]
        dy = pts[:, 1:2] - cl_xy[None, :, 1]
        dist = np.sqrt(dx * dx + dy * dy)
        pos_slack = dist - cfg.direction_dist_margin
        ang_slack = abs_angle_diff(cl_theta[None, :], gamma[:, None]) - cfg.direction_angle_margin
        delta = np.maximum(pos_slack, 0.0) + np.maximum(ang_slack, 0.0)
        best = np.argmin(delta, axis=1)
        value += float(delta[rows, best].sum())

        pos_active = pos_slack[rows, best] > 0.0
        if np.any(pos_active):
            d = dist[rows, best][pos_active, None]
            grad[i, pos_active] += (pts[pos_active] - cl_xy[best][pos_active]) / d

        ang_active = (ang_slack[rows, best] > 0.0) & (deps[:, 1] >= 0)
        if np.any(ang_active):
            a_idx = deps[ang_active, 0]
            b_idx = deps[ang_active, 1]
            a_pts = np.where(a_idx[:, None] >= 0,
                             pts[np.maximum(a_idx, 0)],
                             hist[None, :] if hist is not None else 0.0)
            seg = pts[b_idx] - a_pts
            ll = seg[:, 0] * seg[:, 0] + seg[:, 1] * seg[:, 1]
            sgn = np.sign(wrap_to_pi(cl_theta[best][ang_active] - gamma[ang_active]))
            contrib = (sgn / ll)[:, None] * np.column_stack([seg[:, 1], -seg[:, 0]])
            np.add.at(grad[i], b_idx, contrib)
            movable = a_idx >= 0
            if np.any(movable):
                np.add.at(grad[i], a_idx[movable], -contrib[movable])
    return LossValueAndGrad(value=value / m, grad=grad / m)


def feasibility_indicator(preds, area: DrivableArea, cfg: LossConfig) -> np.ndarray:
    """Per-mode flag: every point stays within the drivable area.

    With ``feasibility_uses_margin`` the offroad margin is added to the
    signed distance before the test.
    """
    modes = _modes_array(preds)
    phi = signed_distance_batch(modes.reshape(-1, 2), area).distance
    if cfg.feasibility_uses_margin:
        phi = phi + cfg.offroad_margin
    return np.all(phi.reshape(modes.shape[0], modes.shape[1]) <= 0.0, axis=1)


def diversity_loss(preds, feasible) -> LossValueAndGrad:
    """Sum of per-step-averaged pairwise distances over feasible modes.

    Infeasible modes contribute nothing and receive zero gradient. The
    value is not normalized by the pair count, so it grows as O(M^2);
    with fewer than two feasible modes it is zero.
    """
    modes = _modes_array(preds)
    feasible = np.asarray(feasible, dtype=bool)
    if feasible.shape != (modes.shape[0],):
        raise ValueError(f"feasible must have shape ({modes.shape[0]},), got {feasible.shape}")
    m, t_len = modes.shape[0], modes.shape[1]
    grad = np.zeros((m, t_len, 2))
    idx = np.flatnonzero(feasible)
    if len(idx) < 2:
        return LossValueAndGrad(value=0.0, grad=grad)
    sub = modes[idx]
    diff = sub[:, None, :, :] - sub[None, :, :, :]
    dist = np.sqrt(diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1])
    value = float(dist.sum()) / 2.0 / t_len
    unit = np.zeros_like(diff)
    nz = dist > 0.0
    unit[nz] = diff[nz] / dist[nz, None]
    grad[idx] = unit.sum(axis=1) / t_len
    return LossValueAndGrad(value=value, grad=grad)


def aux_components(preds, scene: Scene, cfg: LossConfig) -> dict[str, LossValueAndGrad]:
    """All three auxiliary losses for one scene, keyed by name.

    The feasibility indicator for the diversity term is recomputed from
    the current predictions on every call.
    """
    feasible = feasibility_indicator(preds, scene.drivable, cfg)
    return {
        "offroad": offroad_loss(preds, scene.drivable, cfg),
        "direction": direction_consistency_loss(preds, scene.centerlines, cfg,
                                                scene.ego_history),
        "diversity": diversity_loss(preds, feasible),
    }


def combined_aux_loss(preds, scene: Scene, cfg: LossConfig,
                      weights: LossWeights) -> LossValueAndGrad:
    """Weighted sum of the auxiliary losses; diversity counts negatively."""
    parts = aux_components(preds, scene, cfg)
    value = (weights.w_off * parts["offroad"].value
             + weights.w_dir * parts["direction"].value
             - weights.w_div * parts["diversity"].value)
    grad = (weights.w_off * parts["offroad"].grad
            + weights.w_dir * parts["direction"].grad
            - weights.w_div * parts["diversity"].grad)
    return LossValueAndGrad(value=value, grad=grad)
