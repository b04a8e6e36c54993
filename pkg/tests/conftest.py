"""Shared fixture builders for the test suite."""

import numpy as np


def star_polygon(rng, n_min=5, n_max=40, r_min=1.0, r_max=3.0, center=(0.0, 0.0)):
    """Random simple polygon: radial vertices around a center, sorted by angle."""
    n = int(rng.integers(n_min, n_max + 1))
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    while np.any(np.diff(angles) < 1e-3):
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    radii = rng.uniform(r_min, r_max, n)
    return np.stack([center[0] + radii * np.cos(angles),
                     center[1] + radii * np.sin(angles)], axis=1)


def sample_boundary(polygons, spacing):
    """Dense point samples along every polygon edge, ~`spacing` apart."""
    pts = []
    for poly in polygons:
        v = np.asarray(poly, dtype=np.float64)
        nxt = np.roll(v, -1, axis=0)
        for a, b in zip(v, nxt):
            length = float(np.linalg.norm(b - a))
            k = max(int(np.ceil(length / spacing)), 1)
            t = np.linspace(0.0, 1.0, k + 1)[:-1]
            pts.append(a + t[:, None] * (b - a))
    return np.concatenate(pts)


def query_points(rng, polygons, n, pad=1.0):
    """Uniform query points over the padded bounding box of the polygons."""
    allv = np.concatenate([np.asarray(p) for p in polygons])
    lo = allv.min(axis=0) - pad
    hi = allv.max(axis=0) + pad
    return rng.uniform(lo, hi, size=(n, 2))


def random_walk(rng, start, n, step_lo=0.3, step_hi=1.2):
    """Jittery polyline of n points starting at `start`."""
    heading = rng.uniform(-np.pi, np.pi)
    pts = [np.asarray(start, dtype=np.float64)]
    for _ in range(n - 1):
        heading += rng.uniform(-0.4, 0.4)
        step = rng.uniform(step_lo, step_hi)
        pts.append(pts[-1] + step * np.array([np.cos(heading), np.sin(heading)]))
    return np.asarray(pts)


def random_scene(rng, scene_id="scene", horizon=8, n_agents=2, n_segments=2, dt=0.5):
    """Random but valid Scene for loss/metric fixtures."""
    from trajcomply.geometry import DrivableArea
    from trajcomply.scene import CenterlineSet, Scene, Trajectory

    area = DrivableArea([star_polygon(rng, r_min=4.0, r_max=9.0)])
    segments = []
    for _ in range(n_segments):
        k = int(rng.integers(3, 12))
        line = random_walk(rng, rng.uniform(-4, 4, 2), k, 0.8, 1.2)
        theta = np.empty(k)
        theta[1:] = np.arctan2(np.diff(line[:, 1]), np.diff(line[:, 0]))
        theta[0] = theta[1] if k > 1 else 0.0
        segments.append(np.column_stack([line, theta]))
    histories = tuple(
        Trajectory(points=random_walk(rng, rng.uniform(-3, 3, 2), int(rng.integers(1, 6))), dt=dt)
        for _ in range(n_agents))
    gt = Trajectory(points=random_walk(rng, histories[0].points[-1], horizon), dt=dt)
    return Scene(id=scene_id, histories=histories, drivable=area,
                 centerlines=CenterlineSet(segments), ground_truth=gt, horizon=horizon)


def random_predictions(rng, scene, n_modes=4):
    """Random PredictionSet consistent with a scene's horizon."""
    from trajcomply.scene import PredictionSet

    start = scene.ego_history.points[-1]
    modes = np.stack([random_walk(rng, start + rng.uniform(-1, 1, 2), scene.horizon)
                      for _ in range(n_modes)])
    return PredictionSet(modes=modes, dt=scene.dt)
