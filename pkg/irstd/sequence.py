"""Frame I/O (binary PGM, PNG preview) and sliding-window construction of K.

A window tensor is (rows, cols, L): frontal slice k is frame ``start + k``.
Frame and window indices are zero-based.
"""
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from PIL import Image

from . import tensor_core as tc
from .errors import (
    AlignmentMismatch,
    BadMagic,
    ConfigError,
    FrameSizeMismatch,
    TooFewFrames,
    TruncatedPayload,
    UnsupportedMaxval,
)
from .utils import atomic_write_bytes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GrayImage:
    # (height, width) float64 in [0, 1]
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or min(px.shape) < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape={px.shape}")
        if not np.isfinite(px).all() or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError(f"GrayImage pixels must lie in [0, 1], got [{px.min()}, {px.max()}]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class FrameSequence:
    frames: Tuple[GrayImage, ...]
    sources: Tuple[str, ...] = ()

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise TooFewFrames("a frame sequence needs at least one frame")
        size = (frames[0].height, frames[0].width)
        for i, f in enumerate(frames):
            if (f.height, f.width) != size:
                raise FrameSizeMismatch(
                    f"frame {i} is {f.width}x{f.height}, expected {size[1]}x{size[0]} like frame 0"
                )
        sources = tuple(self.sources) or tuple(f"frame{i}" for i in range(len(frames)))
        if len(sources) != len(frames):
            raise ValueError(f"{len(sources)} source ids for {len(frames)} frames")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "sources", sources)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    def to_tensor(self) -> tc.Tensor3:
        """(height, width, frames) tensor of the whole sequence."""
        return torch.from_numpy(np.stack([f.pixels for f in self.frames], axis=2)).to(tc.DTYPE)

    @classmethod
    def from_tensor(cls, k: tc.Tensor3, sources: Sequence[str] = ()) -> "FrameSequence":
        arr = tc.as_tensor3(k).numpy()
        return cls(tuple(GrayImage(arr[:, :, i].copy()) for i in range(arr.shape[2])), tuple(sources))


@dataclass(frozen=True)
class Window:
    start_frame: int
    row: int
    col: int
    tensor: tc.Tensor3

    @property
    def shape(self):
        return tuple(self.tensor.shape)


@dataclass(frozen=True)
class WindowPlan:
    frames_per_window: int
    step: int
    n_frames: int
    height: int
    width: int
    windows: Tuple[Window, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def starts(self) -> List[int]:
        return [w.start_frame for w in self.windows]


def window_starts(n: int, size: int, step: int) -> List[int]:
    """Starts 0, step, 2*step, ... plus a final start n-size if the stride leaves a tail."""
    starts = list(range(0, n - size + 1, step))
    if starts[-1] + size < n:
        starts.append(n - size)
    return starts


def build_windows(
    seq: FrameSequence,
    frames_per_window: int,
    step: Optional[int] = None,
    patch_size: Optional[int] = None,
    patch_stride: Optional[int] = None,
) -> WindowPlan:
    L = frames_per_window
    step = L if step is None else step
    if L < 1 or step < 1:
        raise ConfigError(f"frames per window and step must be >= 1, got L={L}, step={step}")
    if len(seq) < L:
        raise TooFewFrames(f"{len(seq)} frames, but a window needs L={L}")

    rows, cols = [0], [0]
    ph, pw = seq.height, seq.width
    if patch_size is not None:
        stride = patch_size if patch_stride is None else patch_stride
        if patch_size < 1 or stride < 1:
            raise ConfigError(f"patch size and stride must be >= 1, got {patch_size}, {stride}")
        if patch_size > min(seq.height, seq.width):
            raise ConfigError(
                f"patch size {patch_size} exceeds the frame size {seq.width}x{seq.height}"
            )
        rows = window_starts(seq.height, patch_size, stride)
        cols = window_starts(seq.width, patch_size, stride)
        ph = pw = patch_size

    k = seq.to_tensor()
    windows = []
    for s in window_starts(len(seq), L, step):
        for r in rows:
            for c in cols:
                windows.append(Window(s, r, c, k[r:r + ph, c:c + pw, s:s + L].contiguous()))

    logger.debug(f"build_windows: {len(seq)} frames, L={L}, step={step} -> {len(windows)} windows")
    return WindowPlan(L, step, len(seq), seq.height, seq.width, tuple(windows))


def average_windows(plan: WindowPlan, tensors: Sequence[tc.Tensor3]) -> np.ndarray:
    """Per-pixel mean of every window slice that covers it, as (frames, height, width)."""
    if len(tensors) != len(plan.windows):
        raise AlignmentMismatch(f"{len(tensors)} tensors for {len(plan.windows)} windows")
    acc = np.zeros((plan.n_frames, plan.height, plan.width), dtype=np.float64)
    count = np.zeros_like(acc)
    for i, (w, t) in enumerate(zip(plan.windows, tensors)):
        t = torch.as_tensor(t)
        if tuple(t.shape) != w.shape:
            raise AlignmentMismatch(f"tensor {i} has shape {tuple(t.shape)}, window {i} is {w.shape}")
        arr = t.detach().to(tc.DTYPE).numpy()
        n1, n2, n3 = w.shape
        for k in range(n3):
            acc[w.start_frame + k, w.row:w.row + n1, w.col:w.col + n2] += arr[:, :, k]
            count[w.start_frame + k, w.row:w.row + n1, w.col:w.col + n2] += 1
    return acc / count


def reconstruct_maps(plan: WindowPlan, targets: Sequence[tc.Tensor3]) -> List[GrayImage]:
    maps = np.clip(average_windows(plan, targets), 0.0, None)
    peak = maps.max()
    if peak > 0:
        maps = maps / peak
    else:
        logger.warning("All target maps are zero")
    return [GrayImage(m) for m in maps]


# --- Image files ---

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_pgm(data: bytes, source: str) -> GrayImage:
    if data[:2] != b"P5":
        raise BadMagic(f"{source}: expected binary PGM magic 'P5', got {data[:2]!r}")
    pos = 2
    values = []
    for name in ("width", "height", "maxval"):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise TruncatedPayload(f"{source}: header ends before {name}")
        try:
            values.append(int(m.group(1)))
        except ValueError:
            raise BadMagic(f"{source}: {name} is not an integer: {m.group(1)!r}") from None
        pos = m.end()
    width, height, maxval = values
    if maxval not in (255, 65535):
        raise UnsupportedMaxval(f"{source}: maxval {maxval}, expected 255 or 65535")
    if width < 1 or height < 1:
        raise BadMagic(f"{source}: bad size {width}x{height}")
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    need = width * height * dtype.itemsize
    # one whitespace byte ends the header; CRLF when the rest is exactly one raster
    pos += 2 if data[pos:pos + 2] == b"\r\n" and len(data) - pos - 2 == need else 1
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise TruncatedPayload(f"{source}: raster has {len(payload)} bytes, expected {need}")
    raw = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return GrayImage(raw.astype(np.float64) / maxval)


def read_image(path) -> GrayImage:
    path = Path(path)
    if path.suffix.lower() == ".png":
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I"):
                return GrayImage(np.clip(np.asarray(im, dtype=np.float64) / 65535.0, 0.0, 1.0))
            return GrayImage(np.asarray(im.convert("L"), dtype=np.float64) / 255.0)
    return _parse_pgm(path.read_bytes(), str(path))


def encode_pgm(img: GrayImage, bits: int = 8) -> bytes:
    if bits not in (8, 16):
        raise ValueError(f"bits must be 8 or 16, got {bits}")
    maxval = 255 if bits == 8 else 65535
    q = np.round(img.pixels * maxval)
    raw = q.astype(">u2" if bits == 16 else "u1")
    return f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii") + raw.tobytes()


def write_image(img: GrayImage, path, bits: int = 8) -> Path:
    path = Path(path)
    if path.suffix.lower() == ".png":
        im = Image.fromarray(np.round(img.pixels * 255).astype(np.uint8))
        tmp = path.with_name(f".{path.name}.tmp")
        path.parent.mkdir(parents=True, exist_ok=True)
        im.save(tmp, format="PNG")
        tmp.replace(path)
        return path
    return atomic_write_bytes(path, encode_pgm(img, bits))


def load_sequence(paths: Sequence) -> FrameSequence:
    paths = [Path(p) for p in paths]
    return FrameSequence(tuple(read_image(p) for p in paths), tuple(str(p) for p in paths))
