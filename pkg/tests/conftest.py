"""Shared builders and hand-rolled oracles.

The oracles are deliberately independent of the package: the assignment
oracle is a bitmask dynamic program and the registration oracle is the
textbook unweighted Kabsch solution. Tests compare library output against
these, never the other way around.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from boxcalib import DetectionBox, RigidTransform, Scene


def make_box(center, dims=(4.0, 2.0, 1.5), yaw=0.0, confidence=1.0, label=None):
    return DetectionBox(
        np.asarray(center, dtype=float), np.asarray(dims, dtype=float), yaw, confidence, label
    )


def make_scene(boxes, agent_id="test", frame_id=0):
    return Scene(tuple(boxes), agent_id, frame_id)


def spread_scene(n, seed=0, span=25.0, min_sep=6.0):
    """n boxes with distinct dims and centers at least min_sep apart."""
    rng = np.random.default_rng(seed)
    centers = []
    while len(centers) < n:
        c = rng.uniform(-span, span, 3) * np.array([1.0, 1.0, 0.05])
        if all(np.linalg.norm(c - p) >= min_sep for p in centers):
            centers.append(c)
    boxes = [
        make_box(
            c,
            dims=rng.uniform((2.5, 1.4, 1.1), (5.5, 2.6, 2.3)),
            yaw=rng.uniform(0.0, 2.0 * np.pi),
        )
        for c in centers
    ]
    return make_scene(boxes)


def yaw_transform(yaw, translation=(0.0, 0.0, 0.0)):
    return RigidTransform.from_yaw(yaw, np.asarray(translation, dtype=float))


def rotation_angle_deg(r_a, r_b):
    """Geodesic angle between two rotation matrices, degrees (independent
    of the package's own metric)."""
    cos = (np.trace(r_a.T @ r_b) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def kabsch_oracle(src, dst):
    """Unweighted best-fit (R, t) with R @ src + t ~ dst, textbook form."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (dst - cd).T @ (src - cs)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(U @ Vt))
    R = U @ np.diag([1.0, 1.0, d]) @ Vt
    return R, cd - R @ cs


def assignment_max_oracle(M):
    """Maximum total over one-to-one partial assignments that never pick
    zero entries, by dynamic programming over column bitmasks."""
    M = np.asarray(M, dtype=float)
    n, m = M.shape

    @lru_cache(maxsize=None)
    def best(i, used):
        if i == n:
            return 0.0
        out = best(i + 1, used)
        for j in range(m):
            if not used & (1 << j) and M[i, j] > 0:
                out = max(out, M[i, j] + best(i + 1, used | (1 << j)))
        return out

    total = best(0, 0)
    best.cache_clear()
    return total
