"""Gradient-descent refinement of prediction sets.

Optimizes the trajectory coordinates directly under
total = winner_takes_all_error + alpha * weighted_auxiliary_losses,
with plain gradient descent and multiplicative step decay. One refine run
is sequential and fully deterministic; sweep points and scenes are
independent and may run concurrently.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LengthMismatch, NonFiniteLoss
from .losses import LossConfig, LossValueAndGrad, LossWeights, aux_components
from .metrics import min_ade, quality_metrics
from .scene import PredictionSet, Scene, Trajectory


@dataclass(frozen=True)
class RefineConfig:
    """Hyperparameters of the descent loop.

    ``alpha`` balances the winner-takes-all error against the auxiliary
    losses. ``diversity_warmup`` keeps w_div at zero for the first N
    iterations; introducing the diversity term from the start tends to
    destabilize the descent, so it can be warm-started. ``seed`` feeds any
    perturbation noise a caller layers on top; the loop itself draws none.
    """

    alpha: float = 1.0
    weights: LossWeights = field(default_factory=LossWeights)
    step_size: float = 0.05
    max_iters: int = 300
    step_decay: float = 0.99
    convergence_tol: float = 0.0
    seed: int = 0
    diversity_warmup: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 < self.step_decay <= 1:
            raise ValueError(f"step_decay must be in (0, 1], got {self.step_decay}")


@dataclass(frozen=True)
class TraceRecord:
    """Loss components after a given number of descent iterations."""

    iteration: int
    original: float
    offroad: float
    direction: float
    diversity: float
    final: float


@dataclass(frozen=True)
class RefineTrace:
    """Per-iteration records (first entry is the initial state) and the result."""

    records: tuple[TraceRecord, ...]
    final: PredictionSet


@dataclass(frozen=True)
class SweepRow:
    """Corpus-mean metrics of refined predictions for one alpha."""

    alpha: float
    min_ade: float
    offroad: float
    direction: float
    diversity: float


def original_loss(preds, gt) -> LossValueAndGrad:
    """Winner-takes-all displacement objective.

    value is the minimum per-step-averaged displacement over modes; the
    gradient is exactly zero on every non-winner mode, which is the whole
    shortcoming this package's auxiliary losses exist to compensate.
    Coincident points take subgradient zero.
    """
    modes = preds.modes if isinstance(preds, PredictionSet) else np.asarray(preds, dtype=np.float64)
    ref = gt.points if isinstance(gt, Trajectory) else np.asarray(gt, dtype=np.float64)
    if modes.shape[1] != len(ref):
        raise LengthMismatch(
            f"prediction horizon {modes.shape[1]} != ground truth length {len(ref)}")
    diff = modes - ref[None, :, :]
    dist = np.sqrt(diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1])
    per_mode = dist.mean(axis=1)
    winner = int(np.argmin(per_mode))
    grad = np.zeros_like(modes)
    d = dist[winner]
    nz = d > 0.0
    grad[winner, nz] = diff[winner, nz] / d[nz, None] / modes.shape[1]
    return LossValueAndGrad(value=float(per_mode[winner]), grad=grad)


def _effective_weights(cfg: RefineConfig, iteration: int) -> LossWeights:
    if iteration < cfg.diversity_warmup:
        return replace(cfg.weights, w_div=0.0)
    return cfg.weights


def _evaluate(modes, scene, loss_cfg, weights, alpha, iteration):
    orig = original_loss(modes, scene.ground_truth)
    parts = aux_components(modes, scene, loss_cfg)
    for name, lvg in [("original", orig), ("offroad", parts["offroad"]),
                      ("direction", parts["direction"]), ("diversity", parts["diversity"])]:
        if not np.isfinite(lvg.value):
            raise NonFiniteLoss(name, lvg.value, iteration)
    aux_value = (weights.w_off * parts["offroad"].value
                 + weights.w_dir * parts["direction"].value
                 - weights.w_div * parts["diversity"].value)
    aux_grad = (weights.w_off * parts["offroad"].grad
                + weights.w_dir * parts["direction"].grad
                - weights.w_div * parts["diversity"].grad)
    record = TraceRecord(iteration=iteration, original=orig.value,
                         offroad=parts["offroad"].value,
                         direction=parts["direction"].value,
                         diversity=parts["diversity"].value,
                         final=orig.value + alpha * aux_value)
    return record, orig.grad + alpha * aux_grad


def refine(preds, scene: Scene, loss_cfg: LossConfig, refine_cfg: RefineConfig) -> RefineTrace:
    """Descend total = original + alpha * aux from the given predictions.

    Stops after ``max_iters`` iterations or when the total loss changes by
    less than ``convergence_tol``. The trace starts with the initial state
    and then records every completed iteration.
    """
    modes = np.array(preds.modes if isinstance(preds, PredictionSet) else preds,
                     dtype=np.float64)
    dt = preds.dt if isinstance(preds, PredictionSet) else None
    records = []
    step = refine_cfg.step_size
    record, grad = _evaluate(modes, scene, loss_cfg,
                             _effective_weights(refine_cfg, 0), refine_cfg.alpha, 0)
    records.append(record)
    for it in range(1, refine_cfg.max_iters + 1):
        modes -= step * grad
        step *= refine_cfg.step_decay
        record, grad = _evaluate(modes, scene, loss_cfg,
                                 _effective_weights(refine_cfg, it), refine_cfg.alpha, it)
        records.append(record)
        if abs(record.final - records[-2].final) < refine_cfg.convergence_tol:
            break
    return RefineTrace(records=tuple(records),
                       final=PredictionSet(modes=modes, dt=dt))


def _sweep_cell(args):
    scene, preds, loss_cfg, refine_cfg, alpha = args
    trace = refine(preds, scene, loss_cfg, replace(refine_cfg, alpha=alpha))
    ade, _ = min_ade(trace.final, scene.ground_truth)
    off, direction, div = quality_metrics(trace.final, scene, loss_cfg)
    return ade, off, direction, div


def alpha_sweep(pairs, loss_cfg: LossConfig, refine_cfg: RefineConfig,
                alphas, jobs: int = 1) -> list[SweepRow]:
    """One refine run per (alpha, scene) from the same initial predictions.

    ``pairs`` is a sequence of (scene, predictions). Returns corpus-mean
    rows in the given alpha order; duplicated alphas give identical rows.
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("alphas must be non-empty")
    if any(a < 0 for a in alphas):
        raise ValueError("alphas must be >= 0")
    pairs = list(pairs)
    tasks = [(scene, preds, loss_cfg, refine_cfg, alpha)
             for alpha in alphas for (scene, preds) in pairs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(_sweep_cell, tasks, chunksize=1))
    else:
        flat = [_sweep_cell(t) for t in tasks]
    rows = []
    n = len(pairs)
    for k, alpha in enumerate(alphas):
        cells = flat[k * n:(k + 1) * n]
        means = np.mean(np.asarray(cells, dtype=np.float64), axis=0)
        rows.append(SweepRow(alpha=alpha, min_ade=float(means[0]), offroad=float(means[1]),
                             direction=float(means[2]), diversity=float(means[3])))
    return rows
