import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from . import defaults
from .admm_solver import Decomposition, SolverParams, solve
from .errors import TooFewFrames, UsageError
from .evaluation import roc_curves
from .loader import write_manifest
from .sequence import (
    FrameSequence,
    GrayImage,
    WindowPlan,
    average_windows,
    build_windows,
    reconstruct_maps,
    write_image,
)
from .synth import GroundTruth
from .utils import StageMonitor, describe, fmt, write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WindowTiming:
    window: int
    iterations: int
    final_residual: float
    wall_seconds: float
    rss_delta_mb: float


@dataclass(frozen=True)
class DetectionResult:
    plan: WindowPlan
    decompositions: List[Decomposition]
    target_maps: List[GrayImage]
    background_maps: List[GrayImage]
    timings: List[WindowTiming]

    @property
    def iterations(self) -> int:
        return sum(d.iterations for d in self.decompositions)


class DetectionPipeline:
    """Sliding windows over a sequence, one ADMM decomposition per window, per-frame maps."""

    def __init__(
        self,
        params: SolverParams,
        step: Optional[int] = defaults.WINDOW_STEP,
        patch_size: Optional[int] = defaults.PATCH_SIZE,
        patch_stride: Optional[int] = defaults.PATCH_STRIDE,
        progress: bool = True,
    ):
        self.params = params
        self.step = step
        self.patch_size = patch_size
        self.patch_stride = patch_stride
        self.progress = progress

    def __call__(self, seq: FrameSequence) -> DetectionResult:
        logger.info("--- Building windows ---")
        plan = build_windows(
            seq, self.params.frames_per_window, self.step, self.patch_size, self.patch_stride
        )
        logger.info(
            f"{len(seq)} frames of {seq.width}x{seq.height}, L={plan.frames_per_window}, "
            f"step={plan.step}: {len(plan)} windows"
        )

        logger.info("--- Decomposing windows ---")
        decompositions, timings = [], []
        windows = tqdm(plan.windows, desc="Windows", unit="win", disable=not self.progress)
        for i, window in enumerate(windows):
            with StageMonitor(f"Window {i} (start frame {window.start_frame})") as monitor:
                result = solve(window.tensor, self.params)
            describe(f"window {i} target", result.target)
            decompositions.append(result)
            timings.append(
                WindowTiming(i, result.iterations, result.final_residual, monitor.seconds, monitor.rss_delta_mb)
            )

        logger.info("--- Reconstructing maps ---")
        target_maps = reconstruct_maps(plan, [d.target for d in decompositions])
        backgrounds = np.clip(average_windows(plan, [d.background for d in decompositions]), 0.0, 1.0)
        return DetectionResult(
            plan=plan,
            decompositions=decompositions,
            target_maps=target_maps,
            background_maps=[GrayImage(b) for b in backgrounds],
            timings=timings,
        )


def save_detection(result: DetectionResult, out_dir) -> List[Path]:
    """Write per-frame maps, the target-map manifest, diagnostics.csv and timing.csv."""
    out_dir = Path(out_dir)
    written = []
    target_paths = []
    for k, (t, b) in enumerate(zip(result.target_maps, result.background_maps)):
        target_paths.append(write_image(t, out_dir / f"target_{k:04d}.pgm", bits=16))
        written.append(write_image(b, out_dir / f"background_{k:04d}.pgm", bits=16))
    written += target_paths
    written.append(write_manifest(out_dir / defaults.TARGET_MAPS_NAME, target_paths))

    rows = []
    for w, d in enumerate(result.decompositions):
        for it, (res, mu) in enumerate(zip(d.residual_history, d.mu_history), start=1):
            rows.append((w, it, fmt(res), fmt(mu)))
    written.append(write_csv(out_dir / defaults.DIAGNOSTICS_NAME, ("window", "iteration", "residual", "mu"), rows))

    timing_rows = [
        (t.window, t.iterations, fmt(t.final_residual), f"{t.wall_seconds:.4f}", f"{t.rss_delta_mb:.1f}")
        for t in result.timings
    ]
    written.append(
        write_csv(
            out_dir / defaults.TIMING_NAME,
            ("window", "iterations", "final_residual", "wall_seconds", "rss_delta_mb"),
            timing_rows,
        )
    )
    return written


@dataclass(frozen=True)
class SweepPoint:
    param: str
    value: float
    auc_pf_pd: float
    auc_pf_tau: float
    auc_pd_tau: float
    iterations: int
    windows: int


def _cast(param: str, value: float):
    return int(value) if param in ("r", "frames_per_window") else float(value)


def parameter_sweep(
    seq: FrameSequence,
    gt: GroundTruth,
    params: SolverParams,
    param: str,
    values: Optional[Sequence[float]] = None,
    step: Optional[int] = None,
    n_thresholds: int = defaults.ROC_THRESHOLDS,
    match_radius: float = defaults.MATCH_RADIUS,
    roc_mode: str = defaults.ROC_MODE,
    patch_size: Optional[int] = defaults.PATCH_SIZE,
    patch_stride: Optional[int] = defaults.PATCH_STRIDE,
    progress: bool = True,
) -> List[SweepPoint]:
    """Detect and score the same sequence for each value of one solver parameter."""
    values = list(values) if values is not None else list(defaults.SWEEP_GRIDS[param])
    points = []
    for value in tqdm(values, desc=f"Sweep {param}", disable=not progress):
        try:
            p = replace(params, **{param: _cast(param, value)})
            result = DetectionPipeline(p, step, patch_size, patch_stride, progress=False)(seq)
        except (UsageError, TooFewFrames) as e:
            logger.warning(f"Skipping {param}={value}: {type(e).__name__}: {e}")
            continue
        roc = roc_curves(result.target_maps, gt, n_thresholds, match_radius, roc_mode)
        points.append(
            SweepPoint(
                param, _cast(param, value), roc.auc_pf_pd, roc.auc_pf_tau, roc.auc_pd_tau,
                result.iterations, len(result.plan),
            )
        )
    return points


def write_sweep(path, points: Sequence[SweepPoint]) -> Path:
    rows = [
        (p.param, p.value, fmt(p.auc_pf_pd), fmt(p.auc_pf_tau), fmt(p.auc_pd_tau), p.iterations)
        for p in points
    ]
    return write_csv(path, ("param", "value", "auc_pf_pd", "auc_pf_tau", "auc_pd_tau", "iterations"), rows)
