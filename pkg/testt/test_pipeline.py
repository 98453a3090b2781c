import numpy as np
import pytest

from irstd import defaults
from irstd.admm_solver import SolverParams
from irstd.evaluation import roc_curves
from irstd.pipeline import DetectionPipeline, parameter_sweep, save_detection, write_sweep
from irstd.synth import SynthSpec, gen_sequence, linear_target, scale_targets_to_background

FAST = dict(max_outer_iters=20, trifactor_iters=3)


def tiny_sequence(frames=6, noise=0.01):
    spec = SynthSpec(
        width=24, height=20, frames=frames, background_rank=2, noise_sigma=noise, seed=21,
        targets=(linear_target(6, 5, 1, 1, 0.4, frames),),
    )
    return gen_sequence(spec)


def acceptance_sequence():
    frames = 9
    spec = SynthSpec(
        width=64, height=64, frames=frames, background_rank=2, noise_sigma=0.02, drift=0.02, seed=7,
        targets=(
            linear_target(16, 20, 1.0, 0.5, 1.0, frames),
            linear_target(44, 40, -1.0, 0.0, 1.0, frames),
            linear_target(30, 52, 0.5, -1.0, 1.0, frames),
        ),
    )
    return gen_sequence(scale_targets_to_background(spec, 3.0))


def test_pipeline_covers_every_frame():
    seq, _ = tiny_sequence(frames=7)
    result = DetectionPipeline(SolverParams(r=20, **FAST), progress=False)(seq)
    assert result.plan.starts == [0, 3, 4]
    assert len(result.target_maps) == 7 and len(result.background_maps) == 7
    assert len(result.timings) == 3
    assert result.iterations == sum(t.iterations for t in result.timings)
    peak = max(float(m.pixels.max()) for m in result.target_maps)
    assert peak in (0.0, 1.0)


def test_patch_mode_windows():
    seq, _ = tiny_sequence(frames=3)
    result = DetectionPipeline(SolverParams(r=12, **FAST), patch_size=12, patch_stride=8, progress=False)(seq)
    # rows 0, 8; cols 0, 8, 12
    assert len(result.plan) == 6
    assert result.target_maps[0].pixels.shape == (20, 24)


def test_save_detection(tmp_path):
    seq, _ = tiny_sequence(frames=3)
    result = DetectionPipeline(SolverParams(r=20, **FAST), progress=False)(seq)
    save_detection(result, tmp_path)
    assert (tmp_path / defaults.TARGET_MAPS_NAME).read_text().splitlines() == [
        "target_0000.pgm", "target_0001.pgm", "target_0002.pgm"
    ]
    rows = (tmp_path / defaults.DIAGNOSTICS_NAME).read_text().splitlines()
    assert len(rows) == 1 + result.decompositions[0].iterations
    assert rows[1].startswith("0,1,")
    timing = (tmp_path / defaults.TIMING_NAME).read_text().splitlines()
    assert len(timing) == 2


def test_sweep_skips_values_that_do_not_fit(tmp_path):
    seq, gt = tiny_sequence()
    points = parameter_sweep(
        seq, gt, SolverParams(**FAST), "r", [8, 100], n_thresholds=11, roc_mode="pixel", progress=False
    )
    assert [p.value for p in points] == [8]
    assert isinstance(points[0].value, int)
    assert 0.0 <= points[0].auc_pf_pd <= 1.0
    lines = write_sweep(tmp_path / "sweep.csv", points).read_text().splitlines()
    assert lines[0] == "param,value,auc_pf_pd,auc_pf_tau,auc_pd_tau,iterations"
    assert lines[1].startswith("r,8,")


def test_sweep_frames_per_window():
    seq, gt = tiny_sequence()
    points = parameter_sweep(
        seq, gt, SolverParams(r=20, **FAST), "frames_per_window", [2, 7],
        n_thresholds=11, roc_mode="pixel", progress=False,
    )
    # 7 frames per window on a 6-frame sequence is skipped
    assert [p.value for p in points] == [2]


def test_sweep_keeps_patch_tiling():
    seq, gt = tiny_sequence(frames=3)
    points = parameter_sweep(
        seq, gt, SolverParams(**FAST), "r", [8], n_thresholds=11, roc_mode="pixel",
        patch_size=12, patch_stride=8, progress=False,
    )
    assert len(points) == 1
    # rows 0, 8; cols 0, 8, 12
    assert points[0].windows == 6

    full = parameter_sweep(seq, gt, SolverParams(**FAST), "r", [8], n_thresholds=11, roc_mode="pixel", progress=False)
    assert full[0].windows == 1


@pytest.mark.slow
def test_synthetic_targets_are_separated_from_background():
    seq, gt = acceptance_sequence()
    result = DetectionPipeline(SolverParams(r=64), progress=False)(seq)
    assert all(d.converged for d in result.decompositions)
    for d, w in zip(result.decompositions, result.plan.windows):
        assert np.isfinite(d.final_residual)
        assert d.reconstruction_error(w.tensor) <= 1e-2
    roc = roc_curves(result.target_maps, gt, mode="pixel")
    assert roc.auc_pf_pd >= 0.95
    assert roc.auc_pf_tau <= 0.05


@pytest.mark.slow
def test_small_core_does_not_beat_full_core():
    seq, gt = acceptance_sequence()
    aucs = {}
    for r in (10, 64):
        result = DetectionPipeline(SolverParams(r=r), progress=False)(seq)
        aucs[r] = roc_curves(result.target_maps, gt, mode="pixel").auc_pf_pd
    assert aucs[10] <= aucs[64] + 0.02
