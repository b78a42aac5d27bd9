"""Synthetic scene generation, noise injection, and the sweep harness."""
from __future__ import annotations

import math

import numpy as np
import pytest

from boxcalib import (
    NoiseConfig,
    PlacementFailure,
    SynthConfig,
    apply_transform,
    generate_scene_pair,
    grid_product,
    inject_noise,
    kappa_for_circular_std,
    noise_sweep,
)
from boxcalib.geometry import RigidTransform


def box_key(box):
    return tuple(np.round(box.center, 9)) + tuple(np.round(box.dims, 9)) + (round(box.yaw, 9),)


# ---- generate_scene_pair ----


def test_identity_transform_full_visibility_reproduces_the_scene():
    cfg = SynthConfig(n_boxes=5, coop_transform=RigidTransform.identity(), seed=3)
    ego, coop, t_true = generate_scene_pair(cfg)
    assert np.allclose(t_true.rotation, np.eye(3))
    assert np.allclose(t_true.translation, 0.0)
    assert sorted(map(box_key, ego)) == sorted(map(box_key, coop))


def test_same_seed_is_bit_identical():
    cfg = SynthConfig(n_boxes=12, seed=77)
    ego_a, coop_a, t_a = generate_scene_pair(cfg)
    ego_b, coop_b, t_b = generate_scene_pair(cfg)
    assert np.array_equal(t_a.rotation, t_b.rotation)
    assert np.array_equal(t_a.translation, t_b.translation)
    for x, y in zip(list(ego_a) + list(coop_a), list(ego_b) + list(coop_b)):
        assert np.array_equal(x.center, y.center)
        assert np.array_equal(x.dims, y.dims)
        assert x.yaw == y.yaw


def test_different_seeds_differ():
    ego_a, _, _ = generate_scene_pair(SynthConfig(n_boxes=5, seed=1))
    ego_b, _, _ = generate_scene_pair(SynthConfig(n_boxes=5, seed=2))
    assert sorted(map(box_key, ego_a)) != sorted(map(box_key, ego_b))


def test_partial_visibility_yields_a_subset_in_the_ego_frame():
    cfg = SynthConfig(n_boxes=10, visibility=0.6, seed=5)
    ego, coop, t_true = generate_scene_pair(cfg)
    assert len(ego) == 10
    assert len(coop) == 6
    ego_keys = set(map(box_key, ego))
    for box in coop:
        mapped = apply_transform(t_true, box.center[None, :])[0]
        back = box_key(box)
        # dims and (rotated) center must come from some ego box
        candidates = [k for k in ego_keys if np.allclose(k[3:6], back[3:6], atol=1e-9)]
        assert any(np.allclose(k[0:3], mapped, atol=1e-6) for k in candidates)


def test_min_separation_is_respected():
    cfg = SynthConfig(n_boxes=15, min_separation=5.0, seed=11)
    ego, _, _ = generate_scene_pair(cfg)
    centers = np.array([b.center for b in ego])
    d = np.linalg.norm(centers[:, None] - centers[None, :], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 5.0


def test_agent_ids_label_the_two_views():
    ego, coop, _ = generate_scene_pair(SynthConfig(n_boxes=4, seed=0))
    assert ego.agent_id == "ego"
    assert coop.agent_id == "coop"


def test_impossible_separation_raises_placement_failure():
    cfg = SynthConfig(
        n_boxes=30,
        x_range=(-5.0, 5.0),
        y_range=(-5.0, 5.0),
        min_separation=10.0,
        seed=0,
        generic_guard=False,
    )
    with pytest.raises(PlacementFailure):
        generate_scene_pair(cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_boxes=0)
    with pytest.raises(ValueError):
        SynthConfig(min_separation=0.0)
    with pytest.raises(ValueError):
        SynthConfig(visibility=0.0)
    with pytest.raises(ValueError):
        SynthConfig(visibility=1.1)
    with pytest.raises(ValueError):
        SynthConfig(dims_range=((0.0, 6.0), (1.2, 2.8), (1.0, 2.5)))


# ---- inject_noise ----


def test_zero_noise_returns_the_scene_unchanged():
    ego, _, _ = generate_scene_pair(SynthConfig(n_boxes=5, seed=9))
    assert inject_noise(ego, NoiseConfig(0.0, 0.0, seed=1)) is ego


def test_noise_perturbs_centers_and_yaws_but_not_dims():
    ego, _, _ = generate_scene_pair(SynthConfig(n_boxes=8, seed=9))
    noisy = inject_noise(ego, NoiseConfig(0.5, 10.0, seed=2))
    assert noisy is not ego
    assert len(noisy) == len(ego)
    for a, b in zip(ego, noisy):
        assert np.array_equal(a.dims, b.dims)
        assert not np.allclose(a.center, b.center)
        assert a.yaw != b.yaw


def test_noise_is_deterministic_under_seed():
    ego, _, _ = generate_scene_pair(SynthConfig(n_boxes=6, seed=9))
    a = inject_noise(ego, NoiseConfig(0.5, 10.0, seed=3))
    b = inject_noise(ego, NoiseConfig(0.5, 10.0, seed=3))
    c = inject_noise(ego, NoiseConfig(0.5, 10.0, seed=4))
    assert all(np.array_equal(x.center, y.center) for x, y in zip(a, b))
    assert any(not np.array_equal(x.center, y.center) for x, y in zip(a, c))


def big_flat_scene(n):
    """A dense single-use scene for Monte-Carlo noise statistics."""
    from conftest import make_box, make_scene

    side = int(math.ceil(math.sqrt(n)))
    boxes = [
        make_box((100.0 * (i % side), 100.0 * (i // side), 0.0), yaw=0.0)
        for i in range(n)
    ]
    return make_scene(boxes)


def test_position_noise_matches_the_half_normal_mean():
    n = 100_000
    scene = big_flat_scene(n)
    noisy = inject_noise(scene, NoiseConfig(0.5, 0.0, seed=42))
    dx = np.array([b.center[0] for b in noisy]) - np.array([b.center[0] for b in scene])
    expected = 0.5 * math.sqrt(2 / math.pi)
    assert abs(np.mean(np.abs(dx)) - expected) / expected < 0.02


def test_yaw_noise_matches_the_target_circular_std():
    n = 100_000
    scene = big_flat_scene(n)
    noisy = inject_noise(scene, NoiseConfig(0.0, 25.0, seed=43))
    dyaw = np.array([b.yaw for b in noisy]) - np.array([b.yaw for b in scene])
    r = abs(np.mean(np.exp(1j * dyaw)))
    circ_std_deg = math.degrees(math.sqrt(-2.0 * math.log(r)))
    assert abs(circ_std_deg - 25.0) / 25.0 < 0.03


def test_kappa_inversion_hits_the_requested_spread_exactly():
    from scipy.special import ive

    for std_deg in (1.0, 5.0, 10.0, 25.0, 45.0):
        s = math.radians(std_deg)
        kappa = kappa_for_circular_std(s)
        r = ive(1, kappa) / ive(0, kappa)
        assert math.sqrt(-2.0 * math.log(r)) == pytest.approx(s, rel=1e-9)


def test_kappa_validation():
    with pytest.raises(ValueError):
        kappa_for_circular_std(0.0)
    with pytest.raises(ValueError):
        kappa_for_circular_std(-1.0)
    with pytest.raises(ValueError):
        NoiseConfig(-0.1, 0.0)
    with pytest.raises(ValueError):
        NoiseConfig(0.0, 181.0)


# ---- noise_sweep ----


def test_grid_product_is_sigma_major():
    grid = grid_product((0.0, 1.0), (0.0, 10.0, 25.0))
    assert [(g.sigma_pos, g.yaw_std_deg) for g in grid] == [
        (0.0, 0.0),
        (0.0, 10.0),
        (0.0, 25.0),
        (1.0, 0.0),
        (1.0, 10.0),
        (1.0, 25.0),
    ]


def test_sweep_zero_cell_is_exact():
    cells = noise_sweep(
        grid_product((0.0,), (0.0,)),
        SynthConfig(n_boxes=8, seed=1),
        n_trials=5,
        threshold_m=1.0,
        seed=7,
    )
    assert len(cells) == 1
    s = cells[0].summary
    assert s.success_rate == 1.0
    assert s.mrte_m < 1e-6
    assert s.mrre_deg < 1e-6


def test_sweep_is_deterministic():
    kwargs = dict(n_trials=4, threshold_m=1.0, seed=5)
    base = SynthConfig(n_boxes=8, seed=0)
    grid = grid_product((0.0, 0.5), (0.0,))
    a = noise_sweep(grid, base, **kwargs)
    b = noise_sweep(grid, base, **kwargs)
    for ca, cb in zip(a, b):
        for ta, tb in zip(ca.trials, cb.trials):
            assert ta == tb


def test_sweep_counts_failed_trials_in_the_totals():
    # tiny sparse scenes at heavy noise produce some solver failures; they
    # must appear in n_total but never in n_valid
    cells = noise_sweep(
        grid_product((2.0,), (25.0,)),
        SynthConfig(n_boxes=4, seed=0),
        n_trials=12,
        threshold_m=1.0,
        seed=3,
    )
    s = cells[0].summary
    assert s.n_total == 12
    assert len(cells[0].trials) == 12
    assert s.n_valid <= s.n_total


def test_sweep_rejects_an_empty_grid():
    with pytest.raises(ValueError):
        noise_sweep([], SynthConfig(n_boxes=5), n_trials=1)
