"""Scene-level object association between two agents' detections.

No initial relative pose is assumed. Every (ego box, coop box) pair is
treated as a candidate anchor: the rigid motion mapping the coop box onto
the ego box is computed from the corner matrices, the whole coop scene is
brought into the ego frame under that motion, and the quality of the pair
is scored by how well the rest of the scene lines up:

* confidence: how many box pairs fall within tau of each other under a
  greedy one-to-one pairing by ascending distance, and
* mean_distance: the mean pair distance over that valid set.

High-confidence, low-distance anchors fill an affinity matrix and a
one-to-one assignment with maximum total affinity picks the matches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import DetectionBox, RigidTransform, Scene, corners_of, with_flipped_yaw
from .registration import DegenerateCorners, _svd_rotation


class NoCoVisibleObjects(RuntimeError):
    """No box pair supports a consistent alignment of the two scenes."""


@dataclass(frozen=True)
class ODistParams:
    """Scoring parameters.

    tau gates the per-pair distance when forming the valid set, tau1 gates
    the mean distance when filling the affinity matrix. alpha and beta
    weight the center-distance and corner-distance terms of box_distance;
    the default beta = 1/sqrt(8) puts the 8-corner Frobenius norm on a
    per-corner scale. try_yaw_flip additionally evaluates every anchor
    under a reversed coop heading convention (yaw + pi) and keeps the
    better variant, which recovers detectors that disagree about the
    front of a box.
    """

    tau: float = 3.0
    tau1: float = 1.5
    alpha: float = 1.0
    beta: float = math.sqrt(0.125)
    try_yaw_flip: bool = True

    def __post_init__(self):
        if not (0.0 < self.tau <= 3.0):
            raise ValueError(f"tau must be in (0, 3], got {self.tau}")
        if not (0.0 < self.tau1 <= 2.0):
            raise ValueError(f"tau1 must be in (0, 2], got {self.tau1}")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("alpha and beta must be nonnegative and not both zero")


@dataclass(frozen=True)
class PairScore:
    """Scene-consistency score of one candidate anchor pair."""

    confidence: float  # size of the valid set (integer-valued)
    mean_distance: float  # mean pair distance over the valid set, inf if empty
    valid_pairs: tuple[tuple[int, int, float], ...]
    coop_flipped: bool = False


@dataclass(frozen=True)
class Match:
    ego_index: int
    coop_index: int
    confidence: float
    coop_yaw_flipped: bool = False


@dataclass(frozen=True)
class MatchSet:
    matches: tuple[Match, ...]

    def __post_init__(self):
        object.__setattr__(self, "matches", tuple(self.matches))
        rows = [m.ego_index for m in self.matches]
        cols = [m.coop_index for m in self.matches]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ValueError("matches must be one-to-one")
        if any(m.confidence <= 0 for m in self.matches):
            raise ValueError("match confidence must be positive")

    def __len__(self) -> int:
        return len(self.matches)

    def __iter__(self):
        return iter(self.matches)


@dataclass(frozen=True)
class AffinityMatrix:
    """entries[i, j] is the anchor confidence of (ego i, coop j), zeroed
    where the anchor was filtered (mean distance >= tau1 or empty valid
    set). coop_flip marks anchors whose winning variant used the reversed
    coop heading."""

    entries: np.ndarray
    coop_flip: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2:
            raise ValueError("entries must be 2-D")
        if np.any(e < 0) or not np.all(np.isfinite(e)):
            raise ValueError("entries must be finite and nonnegative")
        flip = self.coop_flip
        flip = np.zeros(e.shape, dtype=bool) if flip is None else np.asarray(flip, dtype=bool)
        if flip.shape != e.shape:
            raise ValueError("coop_flip shape mismatch")
        e.setflags(write=False)
        flip.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "coop_flip", flip)


def box_distance(a: DetectionBox, b: DetectionBox, params: ODistParams = ODistParams()) -> float:
    """alpha * |center difference| + beta * Frobenius norm of corner difference."""
    center = float(np.linalg.norm(a.center - b.center))
    corner = float(np.linalg.norm(corners_of(a) - corners_of(b)))
    return params.alpha * center + params.beta * corner


class _SceneArrays:
    """Stacked per-scene geometry reused across anchor evaluations."""

    def __init__(self, scene: Scene, with_flip: bool = False):
        n = len(scene)
        self.centers = np.array([b.center for b in scene]) if n else np.zeros((0, 3))
        self.corners = (
            np.array([corners_of(b) for b in scene]) if n else np.zeros((0, 8, 3))
        )
        self.flipped = (
            np.array([corners_of(with_flipped_yaw(b)) for b in scene])
            if with_flip and n
            else None
        )


def _greedy_valid_pairs(
    ego: _SceneArrays,
    coop_centers: np.ndarray,
    coop_corners: np.ndarray,
    params: ODistParams,
) -> tuple[tuple[tuple[int, int, float], ...], float, float]:
    """One-to-one pairing by ascending distance, admitting pairs within tau.

    Ties in distance are broken by (ego index, coop index) so the result
    does not depend on evaluation order.
    """
    n, m = ego.centers.shape[0], coop_centers.shape[0]
    if n == 0 or m == 0:
        return (), 0.0, math.inf
    center_d = np.linalg.norm(ego.centers[:, None, :] - coop_centers[None, :, :], axis=-1)
    diff = ego.corners[:, None, :, :] - coop_corners[None, :, :, :]
    corner_d = np.sqrt(np.einsum("ijkl,ijkl->ij", diff, diff))
    d = params.alpha * center_d + params.beta * corner_d

    flat = np.flatnonzero(d <= params.tau)
    order = flat[np.argsort(d.reshape(-1)[flat], kind="stable")]
    row_used = np.zeros(n, dtype=bool)
    col_used = np.zeros(m, dtype=bool)
    picked: list[tuple[int, int, float]] = []
    for f in order:
        i, j = divmod(int(f), m)
        if row_used[i] or col_used[j]:
            continue
        row_used[i] = True
        col_used[j] = True
        picked.append((i, j, float(d[i, j])))
    if not picked:
        return (), 0.0, math.inf
    mean = float(np.mean([p[2] for p in picked]))
    return tuple(picked), float(len(picked)), mean


def _score_transform(
    ego: _SceneArrays,
    coop: _SceneArrays,
    rotation: np.ndarray,
    translation: np.ndarray,
    params: ODistParams,
    use_flipped_corners: bool,
) -> tuple[tuple[tuple[int, int, float], ...], float, float]:
    corners = coop.flipped if use_flipped_corners else coop.corners
    moved_centers = coop.centers @ rotation.T + translation
    moved_corners = corners @ rotation.T + translation
    return _greedy_valid_pairs(ego, moved_centers, moved_corners, params)


def _anchor_rotation(ego: _SceneArrays, coop: _SceneArrays, i: int, j: int, flipped: bool):
    corners = coop.flipped if flipped else coop.corners
    A = ego.corners[i] - ego.centers[i]
    B = corners[j] - coop.centers[j]
    R = _svd_rotation(A.T @ B, DegenerateCorners)
    t = ego.centers[i] - R @ coop.centers[j]
    return R, t


def _pair_score(
    ego: _SceneArrays, coop: _SceneArrays, i: int, j: int, params: ODistParams
) -> PairScore:
    variants = [False, True] if params.try_yaw_flip else [False]
    best: PairScore | None = None
    for flipped in variants:
        R, t = _anchor_rotation(ego, coop, i, j, flipped)
        pairs, conf, mean = _score_transform(ego, coop, R, t, params, flipped)
        score = PairScore(conf, mean, pairs, flipped)
        if (
            best is None
            or score.confidence > best.confidence
            or (score.confidence == best.confidence and score.mean_distance < best.mean_distance)
        ):
            best = score
    assert best is not None
    return best


def odist(ego: Scene, coop: Scene, i: int, j: int, params: ODistParams = ODistParams()) -> PairScore:
    """Score anchor pair (ego[i], coop[j]) by whole-scene alignment consistency."""
    ego_a = _SceneArrays(ego)
    coop_a = _SceneArrays(coop, with_flip=params.try_yaw_flip)
    return _pair_score(ego_a, coop_a, i, j, params)


def alignment_score(
    ego: Scene, coop: Scene, transform: RigidTransform, params: ODistParams = ODistParams()
) -> PairScore:
    """Scene-consistency score of a given transform (no anchor search).

    Pairs are formed exactly as in odist: greedy one-to-one by ascending
    distance, admitting pairs within tau.
    """
    ego_a = _SceneArrays(ego)
    coop_a = _SceneArrays(coop)
    pairs, conf, mean = _score_transform(
        ego_a, coop_a, transform.rotation, transform.translation, params, False
    )
    return PairScore(conf, mean, pairs, False)


def build_affinity(ego: Scene, coop: Scene, params: ODistParams = ODistParams()) -> AffinityMatrix:
    """Score every anchor pair, keeping confidences where mean distance < tau1."""
    n, m = len(ego), len(coop)
    entries = np.zeros((n, m))
    flips = np.zeros((n, m), dtype=bool)
    ego_a = _SceneArrays(ego)
    coop_a = _SceneArrays(coop, with_flip=params.try_yaw_flip)
    for i in range(n):
        for j in range(m):
            try:
                score = _pair_score(ego_a, coop_a, i, j, params)
            except DegenerateCorners:
                continue
            if score.mean_distance < params.tau1:
                entries[i, j] = score.confidence
                flips[i, j] = score.coop_flipped
    return AffinityMatrix(entries, flips)


def _max_assignment_total(entries: np.ndarray) -> float:
    if entries.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(entries, maximize=True)
    return float(entries[rows, cols].sum())


def solve_assignment(affinity: AffinityMatrix | np.ndarray) -> MatchSet:
    """One-to-one assignment maximizing total affinity.

    Zero entries are never selected (an unsupported pairing is worse than
    no pairing). Among assignments of equal total, the one whose sorted
    (ego, coop) index list is lexicographically smallest is returned, so
    results are reproducible across solver versions.
    """
    if isinstance(affinity, AffinityMatrix):
        entries, flips = affinity.entries, affinity.coop_flip
    else:
        entries = np.asarray(affinity, dtype=float)
        if entries.ndim != 2:
            raise ValueError("affinity must be 2-D")
        if np.any(entries < 0) or not np.all(np.isfinite(entries)):
            raise ValueError("affinity entries must be finite and nonnegative")
        flips = np.zeros(entries.shape, dtype=bool)

    n, m = entries.shape
    best_total = _max_assignment_total(entries)
    tol = 1e-9 * max(1.0, abs(best_total))
    if best_total <= tol:
        return MatchSet(())

    # Fix pairs in lexicographic order, keeping only choices that still
    # reach the optimal total on the remaining submatrix. At the start of
    # iteration i, `remaining` holds rows i.. restricted to the free cols,
    # so the current row is always its row 0.
    forced_total = 0.0
    free_cols = list(range(m))
    matches: list[Match] = []
    remaining = entries
    for i in range(n):
        chosen = None
        for cj, j in enumerate(free_cols):
            if entries[i, j] <= 0.0:
                continue
            sub = np.delete(remaining[1:], cj, axis=1)
            candidate = forced_total + entries[i, j] + _max_assignment_total(sub)
            if candidate >= best_total - tol:
                chosen = (cj, j)
                break
        if chosen is None:
            remaining = remaining[1:]
            continue
        cj, j = chosen
        matches.append(Match(i, j, float(entries[i, j]), bool(flips[i, j])))
        forced_total += entries[i, j]
        free_cols.pop(cj)
        remaining = np.delete(remaining[1:], cj, axis=1)
    return MatchSet(tuple(matches))


def associate(ego: Scene, coop: Scene, params: ODistParams = ODistParams()) -> MatchSet:
    """Full association: affinity matrix plus optimal assignment."""
    matches = solve_assignment(build_affinity(ego, coop, params))
    if len(matches) == 0:
        raise NoCoVisibleObjects("no anchor pair supports a consistent scene alignment")
    return matches


def top_k_by_volume(scene: Scene, k: int | float | None) -> Scene:
    """Keep the k largest boxes by volume, preserving scene order.

    Pass None (or infinity) to keep everything. Ties at the volume cutoff
    are resolved toward the earlier index.
    """
    if k is None or (isinstance(k, float) and math.isinf(k)):
        return scene
    k = int(k)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= len(scene):
        return scene
    ranked = sorted(range(len(scene)), key=lambda i: (-scene[i].volume, i))
    keep = sorted(ranked[:k])
    return Scene(tuple(scene[i] for i in keep), scene.agent_id, scene.frame_id)
