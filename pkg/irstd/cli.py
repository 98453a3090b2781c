"""Command-line front end: synth | detect | roc | sweep | selftest."""
import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import coloredlogs
import torch

from . import defaults, oracles
from .config import RunConfig
from .errors import ConfigError, IrstdError, NumericalError
from .evaluation import roc_curves, write_roc
from .loader import read_ground_truth, read_manifest, read_synth_spec, write_ground_truth, write_manifest
from .pipeline import DetectionPipeline, parameter_sweep, save_detection, write_sweep
from .sequence import load_sequence, read_image, write_image
from .synth import default_spec, gen_sequence

logger = logging.getLogger(__name__)
package_logger = logging.getLogger("irstd")

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"
THREADS_ENV = "IRSTD_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value file; flags override it.")
    common.add_argument("--out", type=Path, help=f"Output directory (default: {defaults.DEFAULT_OUT_DIR}).")
    common.add_argument("--input", type=Path, help="Manifest of input images.")
    common.add_argument("--ground-truth", type=Path, help="Ground-truth CSV (frame,x,y).")
    common.add_argument("--synth-spec", type=Path, help="Synthetic sequence spec file.")
    common.add_argument("--verbose", action="store_true", help="Debug logging.")
    common.add_argument("--no-progress", action="store_true", help="Hide progress bars.")

    solver = common.add_argument_group("solver")
    solver.add_argument("--r", type=int, help="Core size of the L*D*R factorization.")
    solver.add_argument("--frames-per-window", type=int, help="Frames per window (L).")
    solver.add_argument("--step", type=int, help="Temporal step between windows (default: L).")
    solver.add_argument("--h-tuning", type=float, help="H in lambda_s = H / sqrt(max(n1, n2) * L).")
    solver.add_argument("--lambda-s", type=float, help="Sparsity weight; overrides the H rule.")
    solver.add_argument("--lambda-tv", type=float, help="ASSTV weight.")
    solver.add_argument("--lambda3", type=float, help="Noise weight.")
    solver.add_argument("--delta", type=float, help="Temporal TV weight.")
    solver.add_argument("--mu0", type=float)
    solver.add_argument("--rho", type=float)
    solver.add_argument("--mu-max", type=float)
    solver.add_argument("--xi", type=float, help="Stopping tolerance.")
    solver.add_argument("--inner-iters", type=int, help="TLNMTQR passes per Z-update.")
    solver.add_argument("--max-outer-iters", type=int, help="ADMM iteration cap.")
    solver.add_argument("--trifactor-iters", type=int, help="Tri-factorization fitting iterations.")
    solver.add_argument("--plain-residual", action="store_true", default=None,
                        help="Stop on ||K-B-T-N||^2/||K||^2 instead of the residual with y1/mu.")
    solver.add_argument("--patch-size", type=int, help="Spatial patch mode: square patch side.")
    solver.add_argument("--patch-stride", type=int, help="Spatial patch stride (default: patch size).")

    scoring = common.add_argument_group("synthesis and scoring")
    scoring.add_argument("--seed", type=int, help="Overrides the synthetic spec seed.")
    scoring.add_argument("--thresholds", type=int, help=f"ROC thresholds (default: {defaults.ROC_THRESHOLDS}).")
    scoring.add_argument("--match-radius", type=float, help=f"Match radius in px (default: {defaults.MATCH_RADIUS}).")
    scoring.add_argument("--roc-mode", choices=("component", "pixel"))
    scoring.add_argument("--sweep-param", choices=sorted(defaults.SWEEP_GRIDS))
    scoring.add_argument("--sweep-values", type=str, help="Comma-separated values for --sweep-param.")

    parser = _Parser(prog="irstd", description="Infrared small target detection by low-rank and sparse tensor decomposition.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="Write a synthetic sequence and its ground truth.")
    sub.add_parser("detect", parents=[common], help="Decompose a sequence into background and target maps.")
    sub.add_parser("roc", parents=[common], help="Score target maps against ground truth.")
    sub.add_parser("sweep", parents=[common], help="Repeat detect + roc over a parameter grid.")
    sub.add_parser("selftest", parents=[common], help="Run the numerical oracle suite.")
    return parser


_NOT_CONFIG = {"command", "config", "verbose", "no_progress"}


def load_config(args: argparse.Namespace) -> RunConfig:
    flags = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if args.config is not None:
        return RunConfig.from_file(args.command, args.config, flags)
    return RunConfig.build(args.command, None, flags)


def setup_logging(out_dir: Path, verbose: bool) -> List[logging.Handler]:
    """Colored console output plus <out>/run.log. Returns the handlers added; the file handler is last."""
    level = logging.DEBUG if verbose else logging.INFO
    before = list(package_logger.handlers)
    coloredlogs.install(level=level, logger=package_logger, fmt=LOG_FORMAT, stream=sys.stderr)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / defaults.RUN_LOG_NAME, mode="w", encoding="utf-8")
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    package_logger.addHandler(handler)
    return [h for h in package_logger.handlers if h not in before]


def setup_torch() -> None:
    torch.use_deterministic_algorithms(True)
    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            torch.set_num_threads(int(threads))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {threads!r}") from None


# --- Commands ---

def run_synth(cfg: RunConfig, progress: bool) -> None:
    spec = read_synth_spec(cfg.synth_spec) if cfg.synth_spec is not None else default_spec()
    if cfg.seed is not None:
        spec = replace(spec, seed=cfg.seed)
    seq, gt = gen_sequence(spec)
    paths = [write_image(f, cfg.out / f"frame_{k:04d}.pgm", bits=16) for k, f in enumerate(seq.frames)]
    write_manifest(cfg.out / defaults.MANIFEST_NAME, paths)
    write_ground_truth(cfg.out / defaults.GROUND_TRUTH_NAME, gt)
    logger.info(f"Wrote {len(paths)} frames, {defaults.MANIFEST_NAME} and {defaults.GROUND_TRUTH_NAME} to {cfg.out}")


def run_detect(cfg: RunConfig, progress: bool) -> None:
    seq = load_sequence(read_manifest(cfg.input))
    pipeline = DetectionPipeline(cfg.solver, cfg.step, cfg.patch_size, cfg.patch_stride, progress=progress)
    written = save_detection(pipeline(seq), cfg.out)
    logger.info(f"Wrote {len(written)} files to {cfg.out}")


def run_roc(cfg: RunConfig, progress: bool) -> None:
    maps = [read_image(p) for p in read_manifest(cfg.input)]
    gt = read_ground_truth(cfg.ground_truth, frames=len(maps))
    roc = roc_curves(maps, gt, cfg.thresholds, cfg.match_radius, cfg.roc_mode)
    write_roc(roc, cfg.out / defaults.ROC_NAME, cfg.out / defaults.AUC_NAME)


def run_sweep(cfg: RunConfig, progress: bool) -> None:
    seq = load_sequence(read_manifest(cfg.input))
    gt = read_ground_truth(cfg.ground_truth, frames=len(seq))
    points = parameter_sweep(
        seq, gt, cfg.solver, cfg.sweep_param, cfg.sweep_values, cfg.step,
        cfg.thresholds, cfg.match_radius, cfg.roc_mode, cfg.patch_size, cfg.patch_stride, progress=progress,
    )
    write_sweep(cfg.out / defaults.SWEEP_NAME, points)


def run_selftest(cfg: RunConfig, progress: bool) -> None:
    results = oracles.run_all(seed=cfg.seed or 0)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  error={r.error:.3e}  tol={r.tolerance:.0e}  {r.seconds:.2f}s")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise NumericalError(f"{len(failed)} oracle(s) failed: {', '.join(failed)}")


COMMANDS = {
    "synth": run_synth,
    "detect": run_detect,
    "roc": run_roc,
    "sweep": run_sweep,
    "selftest": run_selftest,
}


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    handlers: List[logging.Handler] = []
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            # --help
            return int(e.code or 0)
        cfg = load_config(args)
        handlers = setup_logging(cfg.out, args.verbose)
        setup_torch()

        logger.info(f"--- irstd {cfg.command} ---")
        for line in cfg.resolved_lines():
            logger.info(f"  {line}")
        COMMANDS[cfg.command](cfg, progress=not args.no_progress)
        logger.info(f"--- {cfg.command} done ---")
        return 0
    except IrstdError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        if handlers:
            handlers[-1].stream.write(f"error: {type(e).__name__}: {e}\n")
        return e.exit_code
    finally:
        for h in handlers:
            package_logger.removeHandler(h)
            h.close()


def main() -> int:
    return dispatch(sys.argv[1:])
