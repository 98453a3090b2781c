"""Detection scoring: Pd / Fa per threshold, the three ROC curves and their AUCs.

Two scoring modes:

``component``
    Threshold the map, label 8-connected components, match component
    centroids to ground-truth centroids (greedy, nearest first, within the
    match radius). Pd = matched targets / targets, Fa = pixels of unmatched
    components / all pixels.
``pixel``
    A target is detected when the map value at its rounded centroid pixel
    reaches the threshold. Fa = fraction of pixels outside every target's
    match disc that reach the threshold.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid

from . import defaults
from .errors import AlignmentMismatch, ConfigError, LengthMismatch, UnsortedInput
from .sequence import GrayImage
from .synth import GroundTruth
from .utils import fmt, write_csv

logger = logging.getLogger(__name__)

ROC_MODES = ("component", "pixel")
# 8-connectivity
_STRUCTURE = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    pixels: int
    peak: float


@dataclass(frozen=True)
class RocData:
    # descending from 1 to 0
    thresholds: np.ndarray
    pd: np.ndarray
    fa: np.ndarray
    auc_pf_pd: float
    auc_pf_tau: float
    auc_pd_tau: float
    mode: str = "component"

    def rows(self):
        return [(fmt(t), fmt(p), fmt(f)) for t, p, f in zip(self.thresholds, self.pd, self.fa)]

    def auc_rows(self):
        return [
            ("auc_pf_pd", fmt(self.auc_pf_pd)),
            ("auc_pf_tau", fmt(self.auc_pf_tau)),
            ("auc_pd_tau", fmt(self.auc_pd_tau)),
        ]


def _as_array(m) -> np.ndarray:
    return m.pixels if isinstance(m, GrayImage) else np.asarray(m, dtype=np.float64)


def detect_components(score_map, tau: float) -> List[Detection]:
    values = _as_array(score_map)
    labels, count = ndimage.label(values >= tau, structure=_STRUCTURE)
    if count == 0:
        return []

    flat = labels.ravel()
    rows, cols = np.indices(values.shape)
    n = count + 1
    size = np.bincount(flat, minlength=n)
    weight = np.bincount(flat, weights=values.ravel(), minlength=n)
    wx = np.bincount(flat, weights=(values * cols).ravel(), minlength=n)
    wy = np.bincount(flat, weights=(values * rows).ravel(), minlength=n)
    gx = np.bincount(flat, weights=cols.ravel().astype(np.float64), minlength=n)
    gy = np.bincount(flat, weights=rows.ravel().astype(np.float64), minlength=n)
    peaks = ndimage.maximum(values, labels, index=np.arange(1, n))

    detections = []
    for i in range(1, n):
        if weight[i] > 0:
            x, y = wx[i] / weight[i], wy[i] / weight[i]
        else:
            # all-zero component (tau = 0): geometric centre
            x, y = gx[i] / size[i], gy[i] / size[i]
        detections.append(Detection(float(x), float(y), int(size[i]), float(peaks[i - 1])))
    return detections


def match_detections(detections: Sequence[Detection], targets, match_radius: float) -> List[bool]:
    """Greedy nearest-first matching; returns, per detection, whether it is a true detection."""
    pairs = []
    for i, d in enumerate(detections):
        for j, (tx, ty) in enumerate(targets):
            dist = float(np.hypot(d.x - tx, d.y - ty))
            if dist <= match_radius:
                pairs.append((dist, i, j))
    pairs.sort()
    used_det, used_gt = set(), set()
    for _, i, j in pairs:
        if i not in used_det and j not in used_gt:
            used_det.add(i)
            used_gt.add(j)
    return [i in used_det for i in range(len(detections))]


def pd_fa(
    detections: Sequence[Sequence[Detection]],
    gt: GroundTruth,
    match_radius: float = defaults.MATCH_RADIUS,
    *,
    image_pixels: int,
) -> Tuple[float, float]:
    if not match_radius > 0:
        raise ConfigError(f"match_radius must be > 0, got {match_radius}")
    if image_pixels < 1:
        raise ConfigError(f"image_pixels must be >= 1, got {image_pixels}")
    if len(detections) != gt.frames:
        raise AlignmentMismatch(f"{len(detections)} frames of detections, {gt.frames} of ground truth")
    hits = 0
    false_pixels = 0
    for dets, targets in zip(detections, gt.centroids):
        true_flags = match_detections(dets, targets, match_radius)
        hits += sum(true_flags)
        false_pixels += sum(d.pixels for d, ok in zip(dets, true_flags) if not ok)
    pd = hits / gt.n_targets if gt.n_targets else 0.0
    fa = false_pixels / (image_pixels * max(gt.frames, 1))
    return pd, fa


def auc(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise LengthMismatch(f"xs has shape {xs.shape}, ys has shape {ys.shape}")
    if len(xs) < 2:
        raise LengthMismatch(f"need at least 2 points, got {len(xs)}")
    if np.any(np.diff(xs) < 0):
        raise UnsortedInput("xs must be sorted ascending")
    return float(trapezoid(ys, xs))


def threshold_grid(n_thresholds: int) -> np.ndarray:
    if n_thresholds < 2:
        raise ConfigError(f"need at least 2 thresholds, got {n_thresholds}")
    return np.arange(n_thresholds - 1, -1, -1, dtype=np.float64) / (n_thresholds - 1)


def normalize_maps(maps) -> List[np.ndarray]:
    arrays = [np.clip(_as_array(m), 0.0, None) for m in maps]
    peak = max(float(a.max()) for a in arrays)
    if peak > 0:
        arrays = [a / peak for a in arrays]
    return arrays


def _component_counts(arrays, gt, thresholds, match_radius):
    image_pixels = arrays[0].size
    pd = np.empty(len(thresholds))
    fa = np.empty(len(thresholds))
    for i, tau in enumerate(thresholds):
        detections = [detect_components(a, tau) for a in arrays]
        pd[i], fa[i] = pd_fa(detections, gt, match_radius, image_pixels=image_pixels)
    return pd, fa


def _pixel_counts(arrays, gt, thresholds, match_radius):
    target_vals, background_vals = [], []
    for a, targets in zip(arrays, gt.centroids):
        h, w = a.shape
        rows, cols = np.indices(a.shape)
        outside = np.ones(a.shape, dtype=bool)
        for tx, ty in targets:
            r = min(max(int(round(ty)), 0), h - 1)
            c = min(max(int(round(tx)), 0), w - 1)
            target_vals.append(a[r, c])
            outside &= np.hypot(cols - tx, rows - ty) > match_radius
        background_vals.append(a[outside])
    target_vals = np.sort(np.asarray(target_vals, dtype=np.float64))
    background_vals = np.sort(np.concatenate(background_vals))

    def rate(sorted_vals):
        if len(sorted_vals) == 0:
            return np.zeros(len(thresholds))
        above = len(sorted_vals) - np.searchsorted(sorted_vals, thresholds, side="left")
        return above / len(sorted_vals)

    return rate(target_vals), rate(background_vals)


def _envelope(values: np.ndarray, name: str) -> np.ndarray:
    # values ordered from the highest threshold down
    out = np.maximum.accumulate(values)
    if not np.array_equal(out, values):
        logger.debug(f"ROC {name} made monotone at {int(np.sum(out != values))} thresholds")
    return out


def roc_curves(
    maps,
    gt: GroundTruth,
    n_thresholds: int = defaults.ROC_THRESHOLDS,
    match_radius: float = defaults.MATCH_RADIUS,
    mode: str = defaults.ROC_MODE,
) -> RocData:
    if mode not in ROC_MODES:
        raise ConfigError(f"roc mode must be one of {ROC_MODES}, got {mode!r}")
    if not match_radius > 0:
        raise ConfigError(f"match_radius must be > 0, got {match_radius}")
    if len(maps) != gt.frames:
        raise AlignmentMismatch(f"{len(maps)} maps for {gt.frames} ground-truth frames")
    thresholds = threshold_grid(n_thresholds)
    arrays = normalize_maps(maps)
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise AlignmentMismatch(f"maps have different sizes: {sorted(shapes)}")

    count = _component_counts if mode == "component" else _pixel_counts
    pd, fa = count(arrays, gt, thresholds, match_radius)
    pd = _envelope(pd, "pd")
    fa = _envelope(fa, "fa")
    assert np.all(np.diff(pd) >= 0) and np.all(np.diff(fa) >= 0), "ROC is not monotone in the threshold"

    # thresholds descend, so fa ascends; close the curve at (0, 0) and (1, 1)
    auc_pf_pd = auc(np.concatenate([[0.0], fa, [1.0]]), np.concatenate([[0.0], pd, [1.0]]))
    tau_up = thresholds[::-1]
    roc = RocData(
        thresholds=thresholds,
        pd=pd,
        fa=fa,
        auc_pf_pd=auc_pf_pd,
        auc_pf_tau=auc(tau_up, fa[::-1]),
        auc_pd_tau=auc(tau_up, pd[::-1]),
        mode=mode,
    )
    logger.info(
        f"ROC ({mode}, {n_thresholds} thresholds): AUC(PF,PD)={roc.auc_pf_pd:.4f} "
        f"AUC(PF,tau)={roc.auc_pf_tau:.4f} AUC(PD,tau)={roc.auc_pd_tau:.4f}"
    )
    return roc


def write_roc(roc: RocData, roc_path, auc_path) -> None:
    write_csv(roc_path, ("tau", "pd", "fa"), roc.rows())
    write_csv(auc_path, ("metric", "value"), roc.auc_rows())
