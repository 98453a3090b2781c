"""Synthetic infrared sequences with exact ground truth.

Background: a sum of ``background_rank`` separable products of smooth cosine
profiles, with a slow phase drift per frame. Targets: Gaussian spots moving on
given trajectories. Noise: i.i.d. Gaussian. Randomness comes from numpy's
PCG64 seeded with ``seed``; per-frame noise streams are spawned from one
SeedSequence, so frame t does not depend on how many frames follow it.

Coordinates are zero-based pixels, x = column, y = row.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from . import defaults
from .errors import InvalidSpec
from .sequence import FrameSequence, GrayImage

logger = logging.getLogger(__name__)

# Sum of the background component weights; keeps the noise-free background in [0.075, 0.675]
BACKGROUND_LEVEL = 0.3
# Highest spatial frequency (cycles per frame) of a background profile
MAX_PROFILE_CYCLES = 3

Point = Tuple[float, float]


@dataclass(frozen=True)
class TargetSpec:
    trajectory: Tuple[Point, ...]
    amplitude: float
    sigma: float = defaults.TARGET_SIGMA


@dataclass(frozen=True)
class SynthSpec:
    width: int = defaults.SYNTH_WIDTH
    height: int = defaults.SYNTH_HEIGHT
    frames: int = defaults.SYNTH_FRAMES
    background_rank: int = defaults.SYNTH_BACKGROUND_RANK
    noise_sigma: float = defaults.SYNTH_NOISE_SIGMA
    drift: float = defaults.SYNTH_DRIFT
    seed: int = defaults.SYNTH_SEED
    targets: Tuple[TargetSpec, ...] = field(default_factory=tuple)

    def validate(self) -> "SynthSpec":
        for name in ("width", "height", "frames", "background_rank"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidSpec(f"{name} must be a positive integer, got {value}")
        if not (self.noise_sigma >= 0 and math.isfinite(self.noise_sigma)):
            raise InvalidSpec(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not math.isfinite(self.drift):
            raise InvalidSpec(f"drift must be finite, got {self.drift}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidSpec(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for i, t in enumerate(self.targets):
            if len(t.trajectory) != self.frames:
                raise InvalidSpec(
                    f"target {i}: trajectory has {len(t.trajectory)} points, expected {self.frames}"
                )
            if not t.amplitude > 0:
                raise InvalidSpec(f"target {i}: amplitude must be > 0, got {t.amplitude}")
            if not t.sigma > 0:
                raise InvalidSpec(f"target {i}: sigma must be > 0, got {t.sigma}")
            for k, (x, y) in enumerate(t.trajectory):
                if not (0 <= x <= self.width - 1 and 0 <= y <= self.height - 1):
                    raise InvalidSpec(f"target {i} leaves the frame at frame {k}: ({x}, {y})")
        return self


@dataclass(frozen=True)
class GroundTruth:
    # centroids[frame] = ((x, y), ...)
    centroids: Tuple[Tuple[Point, ...], ...]

    @property
    def frames(self) -> int:
        return len(self.centroids)

    @property
    def n_targets(self) -> int:
        return sum(len(c) for c in self.centroids)


def linear_target(x0, y0, vx, vy, amplitude, frames, sigma=defaults.TARGET_SIGMA) -> TargetSpec:
    trajectory = tuple((float(x0 + vx * t), float(y0 + vy * t)) for t in range(frames))
    return TargetSpec(trajectory, float(amplitude), float(sigma))


def default_spec(**overrides) -> SynthSpec:
    frames = overrides.get("frames", defaults.SYNTH_FRAMES)
    targets = tuple(linear_target(*t, frames=frames) for t in defaults.SYNTH_TARGETS)
    return replace(SynthSpec(targets=targets), **overrides)


def render_background(spec: SynthSpec) -> np.ndarray:
    """Noise-free background, (frames, height, width)."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    rank = spec.background_rank
    weights = BACKGROUND_LEVEL * rng.dirichlet(np.ones(rank))
    row_cycles = rng.integers(1, MAX_PROFILE_CYCLES + 1, size=rank)
    col_cycles = rng.integers(1, MAX_PROFILE_CYCLES + 1, size=rank)
    row_phase = rng.uniform(0.0, 2 * np.pi, size=rank)
    col_phase = rng.uniform(0.0, 2 * np.pi, size=rank)

    y = np.arange(spec.height, dtype=np.float64)
    x = np.arange(spec.width, dtype=np.float64)
    out = np.zeros((spec.frames, spec.height, spec.width), dtype=np.float64)
    for t in range(spec.frames):
        shift = 2 * np.pi * spec.drift * t
        for q in range(rank):
            u = 1 + 0.5 * np.cos(2 * np.pi * row_cycles[q] * y / spec.height + row_phase[q] + shift)
            v = 1 + 0.5 * np.cos(2 * np.pi * col_cycles[q] * x / spec.width + col_phase[q] + shift)
            out[t] += weights[q] * np.outer(u, v)
    return out


def render_targets(spec: SynthSpec) -> np.ndarray:
    yy, xx = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    out = np.zeros((spec.frames, spec.height, spec.width), dtype=np.float64)
    for target in spec.targets:
        for t, (cx, cy) in enumerate(target.trajectory):
            d2 = (xx - cx) ** 2 + (yy - cy) ** 2
            out[t] += target.amplitude * np.exp(-d2 / (2 * target.sigma ** 2))
    return out


def render_noise(spec: SynthSpec) -> np.ndarray:
    out = np.zeros((spec.frames, spec.height, spec.width), dtype=np.float64)
    if spec.noise_sigma == 0:
        return out
    children = np.random.SeedSequence(spec.seed).spawn(spec.frames)
    for t, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        out[t] = rng.normal(0.0, spec.noise_sigma, size=(spec.height, spec.width))
    return out


def render(spec: SynthSpec, clip: bool = True) -> np.ndarray:
    spec.validate()
    frames = render_background(spec) + render_targets(spec) + render_noise(spec)
    return np.clip(frames, 0.0, 1.0) if clip else frames


def ground_truth(spec: SynthSpec) -> GroundTruth:
    return GroundTruth(
        tuple(tuple(t.trajectory[k] for t in spec.targets) for k in range(spec.frames))
    )


def background_std(spec: SynthSpec) -> float:
    return float(render_background(spec).std())


def scale_targets_to_background(spec: SynthSpec, factor: float = 3.0) -> SynthSpec:
    """Set every target amplitude to ``factor`` times the background standard deviation."""
    amplitude = factor * background_std(spec)
    return replace(spec, targets=tuple(replace(t, amplitude=amplitude) for t in spec.targets))


def gen_sequence(spec: SynthSpec) -> Tuple[FrameSequence, GroundTruth]:
    frames = render(spec)
    logger.info(
        f"Synthesized {spec.frames} frames of {spec.width}x{spec.height}, "
        f"rank {spec.background_rank}, {len(spec.targets)} targets, seed {spec.seed}"
    )
    sources = tuple(f"synth{k:04d}" for k in range(spec.frames))
    seq = FrameSequence(tuple(GrayImage(f) for f in frames), sources)
    return seq, ground_truth(spec)
