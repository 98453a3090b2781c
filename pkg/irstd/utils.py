import csv
import io
import logging
import os
import tempfile
import time
from pathlib import Path

import psutil

logger = logging.getLogger(__name__)


def atomic_write_bytes(path, data: bytes) -> Path:
    """Write to a temp file in the destination directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, format_csv(header, rows))


def fmt(x: float) -> str:
    """Shortest round-trip text for a float, so CSVs are byte-stable."""
    return repr(float(x))


def describe(name: str, t) -> None:
    logger.debug(
        f"{name}: shape={tuple(t.shape)}, dtype={t.dtype} | "
        f"Mean: {float(t.mean()):.6f} | Std: {float(t.std()):.6f} | Sum: {float(t.sum()):.6f}"
    )


class StageMonitor:
    """Wall time and resident-memory delta of a block of work."""

    def __init__(self, name: str):
        self.name = name
        self.process = psutil.Process(os.getpid())
        self.seconds = 0.0
        self.rss_delta_mb = 0.0

    def __enter__(self):
        self._start_time = time.time()
        self._start_ram = self.process.memory_info().rss
        return self

    def __exit__(self, exc_type, exc, tb):
        self.seconds = time.time() - self._start_time
        self.rss_delta_mb = (self.process.memory_info().rss - self._start_ram) / (1024 * 1024)
        if exc_type is None:
            logger.info(f"{self.name}: took {self.seconds * 1000:.0f}ms - RAM Delta: {self.rss_delta_mb:.0f}MB")
        return False
