"""Text formats: sequence manifests, ground-truth CSVs, key=value files and synth specs."""
import csv
import io
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from . import defaults
from .errors import ConfigError, InvalidSpec, ManifestError
from .synth import GroundTruth, SynthSpec, linear_target
from .utils import atomic_write_text, format_csv, fmt

logger = logging.getLogger(__name__)


def parse_key_values(text: str, source: str = "<config>") -> List[Tuple[str, str, int]]:
    """``key = value`` lines; blank lines and ``#`` comments are skipped. Returns (key, value, line)."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: missing key")
        entries.append((key, value, lineno))
    return entries


# --- Manifests ---

def read_manifest(path) -> List[Path]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from None
    paths = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        paths.append(p if p.is_absolute() else path.parent / p)
    if not paths:
        raise ManifestError(f"manifest {path} lists no images")
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise ManifestError(f"manifest {path}: {len(missing)} missing files, first {missing[0]}")
    logger.debug(f"Manifest {path}: {len(paths)} images")
    return paths


def write_manifest(path, entries: Sequence) -> Path:
    """Entries are written relative to the manifest directory when possible."""
    path = Path(path)
    lines = []
    for e in entries:
        e = Path(e)
        try:
            lines.append(e.relative_to(path.parent).as_posix())
        except ValueError:
            lines.append(str(e))
    return atomic_write_text(path, "".join(f"{line}\n" for line in lines))


# --- Ground truth ---

def read_ground_truth(path, frames: int = None) -> GroundTruth:
    """CSV with header ``frame,x,y``; frames without rows have no targets."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read ground truth {path}: {e}") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["frame", "x", "y"]:
        raise InvalidSpec(f"{path}: expected header 'frame,x,y', got {header}")

    points: Dict[int, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            frame, x, y = int(row[0]), float(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise InvalidSpec(f"{path}:{lineno}: bad row {row}") from None
        if frame < 0:
            raise InvalidSpec(f"{path}:{lineno}: negative frame index {frame}")
        points.setdefault(frame, []).append((x, y))

    n = frames if frames is not None else (max(points) + 1 if points else 0)
    if points and max(points) >= n:
        raise InvalidSpec(f"{path}: frame {max(points)} is beyond the {n} frames of the sequence")
    return GroundTruth(tuple(tuple(points.get(k, ())) for k in range(n)))


def write_ground_truth(path, gt: GroundTruth) -> Path:
    rows = [(k, fmt(x), fmt(y)) for k, pts in enumerate(gt.centroids) for x, y in pts]
    return atomic_write_text(path, format_csv(("frame", "x", "y"), rows))


# --- Synth spec files ---

_SYNTH_INT_KEYS = ("width", "height", "frames", "background_rank", "seed")
_SYNTH_FLOAT_KEYS = ("noise_sigma", "drift")


def parse_synth_spec(text: str, source: str = "<synth spec>") -> SynthSpec:
    values = {}
    raw_targets = []
    for key, value, lineno in parse_key_values(text, source):
        try:
            if key in _SYNTH_INT_KEYS:
                values[key] = int(value)
            elif key in _SYNTH_FLOAT_KEYS:
                values[key] = float(value)
            elif key == "target":
                fields = [float(v) for v in value.split(",")]
                if len(fields) not in (5, 6):
                    raise InvalidSpec(
                        f"{source}:{lineno}: target needs x0, y0, vx, vy, amplitude[, sigma]"
                    )
                raw_targets.append(fields)
            else:
                raise InvalidSpec(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as e:
            if isinstance(e, InvalidSpec):
                raise
            raise InvalidSpec(f"{source}:{lineno}: bad value for {key}: {value!r}") from None

    frames = values.get("frames", defaults.SYNTH_FRAMES)
    targets = tuple(
        linear_target(*f[:5], frames=frames, sigma=f[5] if len(f) == 6 else defaults.TARGET_SIGMA)
        for f in raw_targets
    )
    return SynthSpec(targets=targets, **values).validate()


def read_synth_spec(path) -> SynthSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidSpec(f"cannot read synth spec {path}: {e}") from None
    return parse_synth_spec(text, str(path))
