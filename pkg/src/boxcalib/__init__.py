"""Cross-agent LiDAR extrinsic calibration from 3D detection boxes.

Estimates the rigid transform between two agents' sensor frames using
nothing but each agent's detected boxes: candidate anchors are scored by
whole-scene alignment consistency, an optimal one-to-one assignment picks
the object matches, and a confidence-weighted SVD over the matched box
corners produces the transform. Includes error metrics, a synthetic
noise-robustness harness, and a runtime health/recalibration monitor.
"""

from .geometry import (
    DetectionBox,
    RigidTransform,
    Scene,
    apply_transform,
    compose,
    corners_of,
    invert,
    rot_z,
    transform_box,
    transform_scene,
    with_flipped_yaw,
)
from .registration import (
    DegenerateCorners,
    DegenerateGeometry,
    EmptyMatchSet,
    RegistrationResult,
    WeightedCorrespondences,
    build_feature_clouds,
    pair_hypothesis,
    weighted_kabsch,
)
from .association import (
    AffinityMatrix,
    Match,
    MatchSet,
    NoCoVisibleObjects,
    ODistParams,
    PairScore,
    alignment_score,
    associate,
    box_distance,
    build_affinity,
    odist,
    solve_assignment,
    top_k_by_volume,
)
from .metrics import EmptyTrialSet, MetricSummary, TrialError, rre, rte, summarize
from .pipeline import DEFAULT_TOP_K, CalibrationReport, calibrate_scenes
from .synth import (
    NoiseConfig,
    PlacementFailure,
    SweepCell,
    SynthConfig,
    generate_scene_pair,
    grid_product,
    inject_noise,
    kappa_for_circular_std,
    noise_sweep,
    random_yaw_transform,
    run_trial,
)
from .monitor import (
    CalibrationAttempt,
    EventKind,
    MonitorConfig,
    MonitorEvent,
    MonitorState,
    MonitorStatus,
    RetryResult,
    calibrate_with_retries,
    health_check,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "DetectionBox", "RigidTransform", "Scene", "apply_transform", "compose",
    "corners_of", "invert", "rot_z", "transform_box", "transform_scene",
    "with_flipped_yaw",
    "DegenerateCorners", "DegenerateGeometry", "EmptyMatchSet",
    "RegistrationResult", "WeightedCorrespondences", "build_feature_clouds",
    "pair_hypothesis", "weighted_kabsch",
    "AffinityMatrix", "Match", "MatchSet", "NoCoVisibleObjects", "ODistParams",
    "PairScore", "alignment_score", "associate", "box_distance",
    "build_affinity", "odist", "solve_assignment", "top_k_by_volume",
    "EmptyTrialSet", "MetricSummary", "TrialError", "rre", "rte", "summarize",
    "DEFAULT_TOP_K", "CalibrationReport", "calibrate_scenes",
    "NoiseConfig", "PlacementFailure", "SweepCell", "SynthConfig",
    "generate_scene_pair", "grid_product", "inject_noise",
    "kappa_for_circular_std", "noise_sweep", "random_yaw_transform",
    "run_trial",
    "CalibrationAttempt", "EventKind", "MonitorConfig", "MonitorEvent",
    "MonitorState", "MonitorStatus", "RetryResult", "calibrate_with_retries",
    "health_check", "step",
    "__version__",
]
