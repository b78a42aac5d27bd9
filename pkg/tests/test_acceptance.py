"""End-to-end acceptance checks.

One test per acceptance criterion, each printing a single PASS/FAIL line
with its measurements. Criterion 4's noise-envelope bound at the extreme
grid cell is asserted literally even though the dual-view noise model
cannot meet it (see the sub-check message for the mechanism); that test
is expected to fail until the envelope itself is revisited.
"""
from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest

from boxcalib import (
    ODistParams,
    RigidTransform,
    SynthConfig,
    TrialError,
    WeightedCorrespondences,
    apply_transform,
    calibrate_scenes,
    cli,
    generate_scene_pair,
    grid_product,
    health_check,
    invert,
    noise_sweep,
    random_yaw_transform,
    rre,
    rte,
    solve_assignment,
    summarize,
    transform_scene,
    weighted_kabsch,
    with_flipped_yaw,
)
from boxcalib.io import save_scene
from conftest import (
    assignment_max_oracle,
    kabsch_oracle,
    make_scene,
    spread_scene,
    yaw_transform,
)


def verdict(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def seeded_trial(trial, base=1000, flip_coop=False):
    """Scene pair in the acceptance configuration: 15 boxes, visibility
    0.8, random yaw transform with translation up to ~30 m."""
    s_scene, s_transform = (
        int(s) for s in np.random.SeedSequence([base, trial]).generate_state(2, np.uint64)
    )
    transform = random_yaw_transform(np.random.default_rng(s_transform))
    cfg = SynthConfig(n_boxes=15, visibility=0.8, seed=s_scene, coop_transform=transform)
    ego, coop, t_true = generate_scene_pair(cfg)
    if flip_coop:
        coop = make_scene([with_flipped_yaw(b) for b in coop], agent_id=coop.agent_id)
    return ego, coop, t_true


def run_exact_recovery(n_trials, flip_coop=False, params=ODistParams()):
    worst_rre = worst_rte = worst_time = 0.0
    failures = 0
    for trial in range(n_trials):
        ego, coop, t_true = seeded_trial(trial, flip_coop=flip_coop)
        start = time.perf_counter()
        try:
            report = calibrate_scenes(ego, coop, params)
        except Exception:
            failures += 1
            continue
        elapsed = time.perf_counter() - start
        e_rot = rre(t_true.rotation, report.transform.rotation)
        e_tra = rte(t_true.translation, report.transform.translation)
        worst_rre = max(worst_rre, e_rot)
        worst_rte = max(worst_rte, e_tra)
        worst_time = max(worst_time, elapsed)
        if e_rot >= 1e-6 or e_tra >= 1e-6:
            failures += 1
    return failures, worst_rre, worst_rte, worst_time


def test_criterion_1_noise_free_exact_recovery():
    failures, worst_rre, worst_rte, worst_time = run_exact_recovery(100)
    ok = failures == 0 and worst_time < 0.1
    verdict(
        1,
        ok,
        f"100 trials, {100 - failures}/100 within 1e-6 deg / 1e-6 m "
        f"(worst RRE {worst_rre:.2e} deg, worst RTE {worst_rte:.2e} m, "
        f"slowest frame {worst_time * 1e3:.1f} ms, bound 100 ms)",
    )


def test_criterion_2_assignment_matches_brute_force():
    rng = np.random.default_rng(12345)
    bad = 0
    zero_selected = 0
    for _ in range(1000):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        entries = rng.integers(0, 8, (n, m)).astype(float)
        if rng.random() < 0.25:
            entries[int(rng.integers(0, n)), :] = 0.0
        if rng.random() < 0.25:
            entries[:, int(rng.integers(0, m))] = 0.0
        matches = solve_assignment(entries)
        total = sum(mt.confidence for mt in matches)
        if abs(total - assignment_max_oracle(entries)) > 1e-9:
            bad += 1
        if any(entries[mt.ego_index, mt.coop_index] == 0.0 for mt in matches):
            zero_selected += 1
    ok = bad == 0 and zero_selected == 0
    verdict(
        2,
        ok,
        f"1000 random matrices up to 6x6: {1000 - bad}/1000 optimal, "
        f"{zero_selected} selections of zero entries",
    )


def test_criterion_3_weighted_kabsch_reductions():
    rng = np.random.default_rng(777)
    worst_equal = worst_rescale = worst_exact = 0.0
    for _ in range(1000):
        n = int(rng.integers(4, 13))
        src = rng.uniform(-20, 20, (n, 3))
        t = yaw_transform(rng.uniform(0, 2 * math.pi), rng.uniform(-15, 15, 3))
        exact_dst = apply_transform(t, src)
        noisy_dst = exact_dst + rng.normal(0, 0.05, (n, 3))

        ours = weighted_kabsch(WeightedCorrespondences(src, noisy_dst, np.ones(n)))
        r_ref, t_ref = kabsch_oracle(src, noisy_dst)
        worst_equal = max(
            worst_equal,
            float(np.linalg.norm(ours.transform.rotation - r_ref)),
            float(np.linalg.norm(ours.transform.translation - t_ref)),
        )

        w = rng.uniform(0.1, 3.0, n)
        scale = float(rng.uniform(1e-3, 1e3))
        a = weighted_kabsch(WeightedCorrespondences(src, noisy_dst, w)).transform
        b = weighted_kabsch(WeightedCorrespondences(src, noisy_dst, w * scale)).transform
        worst_rescale = max(
            worst_rescale,
            float(np.linalg.norm(a.rotation - b.rotation)),
            float(np.linalg.norm(a.translation - b.translation)),
        )

        exact = weighted_kabsch(WeightedCorrespondences(src, exact_dst, w))
        worst_exact = max(
            worst_exact,
            exact.rms_residual,
            float(np.linalg.norm(exact.transform.rotation - t.rotation)),
            float(np.linalg.norm(exact.transform.translation - t.translation)),
        )
    ok = worst_equal < 1e-12 and worst_rescale < 1e-12 and worst_exact < 1e-9
    verdict(
        3,
        ok,
        f"1000 correspondence sets: oracle gap {worst_equal:.2e} (bound 1e-12), "
        f"rescale gap {worst_rescale:.2e} (1e-12), exact-model residual "
        f"{worst_exact:.2e} (1e-9)",
    )


def test_criterion_4_noise_envelope():
    sigma_grid = (0.0, 0.5, 1.0, 2.0)
    yaw_grid = (0.0, 10.0, 25.0)
    start = time.perf_counter()
    cells = noise_sweep(
        grid_product(sigma_grid, yaw_grid),
        SynthConfig(n_boxes=15, visibility=0.8),
        n_trials=100,
        threshold_m=1.0,
        seed=0,
    )
    elapsed = time.perf_counter() - start
    by_cell = {(c.sigma_pos, c.yaw_std_deg): c for c in cells}
    rate = {key: c.summary.success_rate for key, c in by_cell.items()}
    problems = []

    zero = by_cell[(0.0, 0.0)].summary
    if zero.success_rate != 1.0 or not (zero.mrte_m < 1e-6):
        problems.append(
            f"zero cell not exact (success {zero.success_rate}, mRTE {zero.mrte_m})"
        )

    # error envelope at the extreme cell, read over the RTE<3m subset
    extreme = summarize(by_cell[(2.0, 25.0)].trials, 3.0)
    if extreme.n_valid == 0:
        problems.append("extreme cell (2.0 m, 25 deg): no trials within 3 m")
    elif not (extreme.mrte_m <= 2.0 and extreme.mrre_deg <= 4.0):
        problems.append(
            f"extreme cell envelope exceeded: mRTE@3m {extreme.mrte_m:.2f} m "
            f"(bound 2.0), mRRE@3m {extreme.mrre_deg:.1f} deg (bound 4.0) over "
            f"{extreme.n_valid}/100 trials; with noise in both views the "
            f"pair distances double and the distance gates (tau <= 3, "
            f"tau1 <= 2) filter the scene-consistent anchors before the "
            f"spurious single-pair ones, so the assignment degenerates"
        )

    # success@1m degrades along each axis, one-cell sampling noise allowed
    slack = 0.03
    for yaw in yaw_grid:
        rates = [rate[(s, yaw)] for s in sigma_grid]
        if any(b > a + slack for a, b in zip(rates, rates[1:])):
            problems.append(f"success not monotone in sigma at yaw {yaw}: {rates}")
    for sigma in sigma_grid:
        rates = [rate[(sigma, y)] for y in yaw_grid]
        if any(b > a + slack for a, b in zip(rates, rates[1:])):
            problems.append(f"success not monotone in yaw at sigma {sigma}: {rates}")

    # single-axis noise outlives combined noise (yaw-0 row vs diagonal)
    for sigma, yaw in ((0.5, 10.0), (1.0, 25.0), (2.0, 25.0)):
        if rate[(sigma, 0.0)] < rate[(sigma, yaw)] - slack:
            problems.append(
                f"pure-position row below combined cell at sigma {sigma}: "
                f"{rate[(sigma, 0.0)]} < {rate[(sigma, yaw)]}"
            )

    if elapsed >= 600:
        problems.append(f"sweep took {elapsed:.0f}s (bound 600s)")

    verdict(
        4,
        not problems,
        f"12-cell grid, 100 trials/cell in {elapsed:.0f}s; "
        + ("all sub-checks hold" if not problems else "; ".join(problems)),
    )


def test_criterion_5_metric_fixtures():
    problems = []
    s = summarize(
        [TrialError(1.0, 0.5), TrialError(2.0, 1.5), TrialError(3.0, 2.5)], 2.0
    )
    if s.success_rate != 2 / 3 or s.mrte_m != 1.0:
        problems.append(f"summary fixture: rate {s.success_rate}, mRTE {s.mrte_m}")

    eye = np.eye(3)

    def rot_z(deg):
        a = math.radians(deg)
        return np.array(
            [[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]]
        )

    if abs(rre(eye, eye)) > 1e-12:
        problems.append("rre of equal rotations not 0")
    if abs(rre(rot_z(30), rot_z(40)) - 10.0) > 1e-9:
        problems.append("rre of a 10 deg offset not 10")
    if abs(rre(eye, rot_z(180)) - 180.0) > 1e-9:
        problems.append("rre of an antipodal rotation not 180")
    if rte((0, 0, 0), (3, 4, 0)) != 5.0:
        problems.append("rte 3-4-5 not 5")
    if rte((1, 1, 1), (1, 1, 2)) != 1.0:
        problems.append("rte unit offset not 1")
    if rte((2, 2, 2), (2, 2, 2)) != 0.0:
        problems.append("rte of equal vectors not 0")
    verdict(5, not problems, "hand-countable summary and rre/rte examples exact"
            if not problems else "; ".join(problems))


def test_criterion_6_health_signal_shape():
    scene = spread_scene(10, seed=3, span=30.0, min_sep=8.0)
    deltas = np.linspace(0.0, 3.0, 61)
    confidences, means = [], []
    for delta in deltas:
        c, d = health_check(
            scene, scene, RigidTransform(np.eye(3), np.array([delta, 0.0, 0.0]))
        )
        confidences.append(c)
        means.append(d)

    problems = []
    if any(b < a - 1e-9 for a, b in zip(means, means[1:])):
        problems.append("mean distance decreased along the sweep")
    if any(b > a for a, b in zip(confidences, confidences[1:])):
        problems.append("confidence increased along the sweep")
    full = [i for i, c in enumerate(confidences) if c == 10]
    linear_gap = max(abs(means[i] - 2.0 * deltas[i]) for i in full)
    if linear_gap > 1e-9:
        problems.append(f"single-pairing regime not linear (gap {linear_gap:.2e})")
    if confidences[0] != 10 or means[0] != 0.0:
        problems.append("zero perturbation not a perfect health check")
    verdict(
        6,
        not problems,
        f"61-step translation sweep: D̄ = 2*delta to {linear_gap:.1e} over "
        f"{len(full)} single-pairing steps, then pairs drop together"
        if not problems
        else "; ".join(problems),
    )


def monitor_stream(tmp_path, name, frames):
    stream = tmp_path / name
    stream.mkdir()
    for i, (ego, coop) in enumerate(frames):
        save_scene(ego, stream / f"{i:02d}.ego.json")
        save_scene(coop, stream / f"{i:02d}.coop.json")
    return stream


def read_event_kinds(out_dir):
    lines = (out_dir / "events.jsonl").read_text().strip().splitlines()
    return [json.loads(line)["kind"] for line in lines]


def test_criterion_7_monitor_conformance(tmp_path, capsys):
    ego = spread_scene(6, seed=12)
    t_true = yaw_transform(0.6, (4.0, 1.0, 0.2))
    coop = transform_scene(invert(t_true), ego)
    drifted = RigidTransform(t_true.rotation, t_true.translation + [2.0, 0.0, 0.0])
    coop_drifted = transform_scene(invert(drifted), ego)
    empty = make_scene([], agent_id="coop")
    problems = []

    clean = monitor_stream(tmp_path, "clean", [(ego, coop)] * 10)
    assert cli.main(["monitor", str(clean), "--out", str(tmp_path / "out_clean")]) == 0
    kinds = read_event_kinds(tmp_path / "out_clean")
    if kinds != ["BootCalibrated"] + ["HealthOk"] * 9:
        problems.append(f"clean stream events {kinds}")

    drift_frames = [(ego, coop)] * 5 + [(ego, coop_drifted)] * 5
    drift = monitor_stream(tmp_path, "drift", drift_frames)
    assert cli.main(["monitor", str(drift), "--out", str(tmp_path / "out_drift")]) == 0
    kinds = read_event_kinds(tmp_path / "out_drift")
    expected = ["BootCalibrated"] + ["HealthOk"] * 4 + ["Recalibrated"] + ["HealthOk"] * 4
    if kinds != expected:
        problems.append(f"drift stream events {kinds}")

    lost_frames = [(ego, coop)] * 7 + [(ego, empty)] * 3
    lost = monitor_stream(tmp_path, "lost", lost_frames)
    assert (
        cli.main(
            ["monitor", str(lost), "--out", str(tmp_path / "out_lost"),
             "--max-retries", "2"]
        )
        == 0
    )
    kinds = read_event_kinds(tmp_path / "out_lost")
    expected = (
        ["BootCalibrated"]
        + ["HealthOk"] * 6
        + ["RetryExhausted", "RetryExhausted", "DegradedEntered"] * 3
    )
    if kinds != expected:
        problems.append(f"lost-covisibility events {kinds}")
    lost_state = json.loads((tmp_path / "out_lost" / "state.json").read_text())
    if lost_state["status"] != "Degraded" or lost_state["extrinsic"] is None:
        problems.append(f"lost-covisibility final state {lost_state['status']}")

    first = monitor_stream(tmp_path, "first_half", drift_frames[:5])
    second = monitor_stream(tmp_path, "second_half", drift_frames[5:])
    out_split = tmp_path / "out_split"
    assert cli.main(["monitor", str(first), "--out", str(out_split)]) == 0
    assert cli.main(["monitor", str(second), "--out", str(out_split)]) == 0
    if read_event_kinds(out_split) != read_event_kinds(tmp_path / "out_drift"):
        problems.append("persisted state did not replay identically")
    split_state = json.loads((out_split / "state.json").read_text())
    full_state = json.loads((tmp_path / "out_drift" / "state.json").read_text())
    if split_state != full_state:
        problems.append("resumed final state differs from the straight run")

    capsys.readouterr()
    verdict(
        7,
        not problems,
        "clean / drift-at-5 / lost-covisibility streams and the persistence "
        "round trip all match the scripted event sequences"
        if not problems
        else "; ".join(problems),
    )


def test_criterion_8_yaw_flip_robustness():
    failures, worst_rre, worst_rte, _ = run_exact_recovery(100, flip_coop=True)
    problems = []
    if failures:
        problems.append(
            f"flip handling on: {failures}/100 flipped-heading trials missed "
            f"the 1e-6 bounds (worst RRE {worst_rre:.2e}, RTE {worst_rte:.2e})"
        )

    # with flip handling off, document the failure mode
    observed = []
    exceptions = 0
    params = ODistParams(try_yaw_flip=False)
    for trial in range(20):
        ego, coop, t_true = seeded_trial(trial, flip_coop=True)
        try:
            report = calibrate_scenes(ego, coop, params)
        except Exception:
            exceptions += 1
            continue
        observed.append(rre(t_true.rotation, report.transform.rotation))
    clean = sum(1 for v in observed if v < 1e-6)
    if clean == 20:
        problems.append("disabling flip handling had no effect on flipped scenes")
    mode = (
        f"median RRE {np.median(observed):.0f} deg over {len(observed)} solved trials"
        if observed
        else "no trial produced a transform"
    )
    verdict(
        8,
        not problems,
        f"flip on: 100/100 exact; flip off: {clean}/20 clean, {exceptions} "
        f"exceptions, failure mode = {mode}"
        if not problems
        else "; ".join(problems),
    )
