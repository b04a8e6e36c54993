"""Figure rendering for reports, sweeps, traces and scenes.

All functions write a file and return its path; none of the delimited
outputs depend on them, so reports stay byte-stable whether or not
figures are rendered.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METRIC_KEYS = ("min_ade", "min_fde", "offroad", "direction", "diversity")
_METRIC_LABELS = ("minADE [m]", "minFDE [m]", "offroad", "direction", "diversity")


def render_report(report, path):
    """Per-scene bars for each metric with the corpus mean as a line."""
    fig, axes = plt.subplots(1, len(_METRIC_KEYS), figsize=(3.2 * len(_METRIC_KEYS), 3.4))
    ids = [r.scene_id for r in report.scenes]
    x = np.arange(len(ids))
    for ax, key, label in zip(axes, _METRIC_KEYS, _METRIC_LABELS):
        vals = [getattr(r, key) for r in report.scenes]
        ax.bar(x, vals, color="#4878a8")
        ax.axhline(float(np.mean(vals)), color="#b04030", lw=1.2, label="mean")
        ax.set_title(label, fontsize=10)
        ax.set_xlabel("scene")
        ax.tick_params(labelsize=7)
        ax.legend(fontsize=7)
    fig.suptitle(f"{report.scene_count} scenes, miss rate {report.miss_rate:.2f}")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_sweep(rows, path):
    """Accuracy-vs-compliance trade-off curves over the alpha grid."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5), sharex=True)
    alphas = [r.alpha for r in rows]
    series = [("min_ade", "minADE [m]"), ("offroad", "offroad"),
              ("direction", "direction"), ("diversity", "diversity")]
    for ax, (key, label) in zip(axes.ravel(), series):
        ax.plot(alphas, [getattr(r, key) for r in rows], marker="o", color="#4878a8")
        ax.set_ylabel(label)
        ax.set_xscale("symlog", linthresh=max(min((a for a in alphas if a > 0), default=1.0), 1e-6))
        ax.grid(alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("auxiliary weight alpha")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_traces(traces, path):
    """Loss components vs iteration; thin lines per scene, thick mean."""
    fig, axes = plt.subplots(1, 4, figsize=(14, 3.4))
    keys = ("original", "offroad", "direction", "final")
    for ax, key in zip(axes, keys):
        stacks = []
        for records in traces.values():
            ys = [getattr(rec, key) for rec in records]
            ax.plot(range(len(ys)), ys, color="#4878a8", alpha=0.25, lw=0.8)
            stacks.append(ys)
        longest = max(len(s) for s in stacks)
        padded = np.full((len(stacks), longest), np.nan)
        for i, s in enumerate(stacks):
            padded[i, :len(s)] = s
        ax.plot(np.nanmean(padded, axis=0), color="#b04030", lw=1.8)
        ax.set_title(key, fontsize=10)
        ax.set_xlabel("iteration")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _draw_scene(ax, scene, preds=None):
    for poly in scene.drivable.polygons:
        ring = np.vstack([poly.vertices, poly.vertices[:1]])
        ax.fill(ring[:, 0], ring[:, 1], color="#d8d8d8", zorder=0)
        ax.plot(ring[:, 0], ring[:, 1], color="#808080", lw=0.8, zorder=1)
    for seg in scene.centerlines.segments:
        ax.plot(seg[:, 0], seg[:, 1], color="#d0a860", lw=1.0, ls="--", zorder=2)
    ego = scene.ego_history.points
    ax.plot(ego[:, 0], ego[:, 1], color="#303030", lw=1.6, zorder=4)
    gt = scene.ground_truth.points
    ax.plot(gt[:, 0], gt[:, 1], color="#308030", lw=1.6, zorder=4, label="ground truth")
    if preds is not None:
        modes = preds.modes if hasattr(preds, "modes") else np.asarray(preds)
        for mode in modes:
            ax.plot(mode[:, 0], mode[:, 1], color="#b04030", lw=1.0, alpha=0.8, zorder=3)
    ax.set_aspect("equal")
    ax.tick_params(labelsize=7)


def render_scene_pair(before, after, path, preds=None, titles=("original", "perturbed")):
    """Side-by-side map view, e.g. original vs perturbed scene."""
    fig, axes = plt.subplots(1, 2, figsize=(11, 5))
    for ax, scene, title in zip(axes, (before, after), titles):
        _draw_scene(ax, scene, preds)
        ax.set_title(f"{title}: {scene.id}", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
