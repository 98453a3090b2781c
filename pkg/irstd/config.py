"""Run configuration: defaults, then a key=value config file, then command-line flags."""
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from . import defaults
from .admm_solver import SolverParams
from .errors import ConfigError
from .loader import parse_key_values

logger = logging.getLogger(__name__)

COMMANDS = ("synth", "detect", "roc", "selftest", "sweep")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text) -> Tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(",", " ").split())


# key -> converter; the keys double as SolverParams field names
SOLVER_KEYS = {
    "r": int,
    "frames_per_window": int,
    "h_tuning": float,
    "lambda_s": float,
    "lambda_tv": float,
    "lambda3": float,
    "delta": float,
    "mu0": float,
    "rho": float,
    "mu_max": float,
    "xi": float,
    "inner_iters": int,
    "max_outer_iters": int,
    "trifactor_iters": int,
    "trifactor_eps": float,
    "plain_residual": _bool,
}

RUN_KEYS = {
    "input": Path,
    "ground_truth": Path,
    "synth_spec": Path,
    "out": Path,
    "step": int,
    "patch_size": int,
    "patch_stride": int,
    "seed": int,
    "thresholds": int,
    "match_radius": float,
    "roc_mode": str,
    "sweep_param": str,
    "sweep_values": _float_list,
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    solver: SolverParams = field(default_factory=SolverParams)
    out: Path = Path(defaults.DEFAULT_OUT_DIR)
    input: Optional[Path] = None
    ground_truth: Optional[Path] = None
    synth_spec: Optional[Path] = None
    step: Optional[int] = defaults.WINDOW_STEP
    patch_size: Optional[int] = defaults.PATCH_SIZE
    patch_stride: Optional[int] = defaults.PATCH_STRIDE
    seed: Optional[int] = None
    thresholds: int = defaults.ROC_THRESHOLDS
    match_radius: float = defaults.MATCH_RADIUS
    roc_mode: str = defaults.ROC_MODE
    sweep_param: str = "r"
    sweep_values: Optional[Tuple[float, ...]] = None
    config_path: Optional[Path] = None

    @classmethod
    def build(
        cls,
        command: str,
        file_values: Optional[Dict[str, str]] = None,
        flag_values: Optional[Dict[str, Any]] = None,
        config_path: Optional[Path] = None,
    ) -> "RunConfig":
        """Merge config-file values and flag values (flags win) over the defaults."""
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}, expected one of {COMMANDS}")
        merged: Dict[str, Any] = {}
        for layer, values in (("config file", file_values or {}), ("flags", flag_values or {})):
            for key, value in values.items():
                if value is None:
                    continue
                converter = SOLVER_KEYS.get(key) or RUN_KEYS.get(key)
                if converter is None:
                    raise ConfigError(f"unknown key {key!r} in {layer}")
                try:
                    merged[key] = converter(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"bad value for {key} in {layer}: {value!r}") from None

        solver = SolverParams(**{k: v for k, v in merged.items() if k in SOLVER_KEYS})
        run = {k: v for k, v in merged.items() if k in RUN_KEYS}
        cfg = cls(command=command, solver=solver, config_path=config_path, **run)
        return cfg.with_command_defaults()

    @classmethod
    def from_file(cls, command: str, path, flag_values=None) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        file_values = {}
        for key, value, lineno in parse_key_values(text, str(path)):
            if key in file_values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            file_values[key] = value
        return cls.build(command, file_values, flag_values, config_path=path)

    def with_command_defaults(self) -> "RunConfig":
        """Fill per-command inputs from the output directory of the previous stage and check them."""
        updates = {}
        if self.command in ("detect", "sweep") and self.input is None:
            updates["input"] = self.out / defaults.MANIFEST_NAME
        if self.command == "roc" and self.input is None:
            updates["input"] = self.out / defaults.TARGET_MAPS_NAME
        if self.command in ("roc", "sweep") and self.ground_truth is None:
            updates["ground_truth"] = self.out / defaults.GROUND_TRUTH_NAME
        cfg = self.__class__(**{**{f.name: getattr(self, f.name) for f in fields(self)}, **updates})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.roc_mode not in ("component", "pixel"):
            raise ConfigError(f"roc_mode must be 'component' or 'pixel', got {self.roc_mode!r}")
        if self.thresholds < 2:
            raise ConfigError(f"thresholds must be >= 2, got {self.thresholds}")
        if not self.match_radius > 0:
            raise ConfigError(f"match_radius must be > 0, got {self.match_radius}")
        for name in ("step", "patch_size", "patch_stride"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.patch_stride is not None and self.patch_size is None:
            raise ConfigError("patch_stride needs patch_size")
        if self.command == "sweep" and self.sweep_param not in defaults.SWEEP_GRIDS:
            raise ConfigError(
                f"sweep_param must be one of {sorted(defaults.SWEEP_GRIDS)}, got {self.sweep_param!r}"
            )
        required = {
            "detect": ("input",),
            "roc": ("input", "ground_truth"),
            "sweep": ("input", "ground_truth"),
        }
        for name in required.get(self.command, ()):
            if getattr(self, name) is None:
                raise ConfigError(f"{self.command} needs {name}")

    def resolved_lines(self):
        """Every parameter with its effective value, for run.log."""
        lines = [f"command = {self.command}"]
        for f in fields(self.solver):
            value = getattr(self.solver, f.name)
            lines.append(f"{f.name} = {'derived per window' if value is None else value}")
        for f in fields(self):
            if f.name in ("command", "solver"):
                continue
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return lines
