import pytest

from irstd import defaults
from irstd.cli import build_parser, dispatch

SMALL_SPEC = """\
width = 32
height = 32
frames = 6
background_rank = 2
noise_sigma = 0.01
seed = 5
target = 8, 10, 1, 1, 0.4
"""

FAST_SOLVER = ["--r", "32", "--max-outer-iters", "30", "--trifactor-iters", "5", "--no-progress"]


def write_spec(tmp_path, text=SMALL_SPEC):
    path = tmp_path / "spec.txt"
    path.write_text(text)
    return path


def test_unknown_flag_is_a_usage_error(capsys):
    assert dispatch(["detect", "--colour", "red"]) == 1
    assert "error: ConfigError" in capsys.readouterr().err


def test_missing_command_is_a_usage_error():
    assert dispatch([]) == 1


def test_help_exits_cleanly(capsys):
    assert dispatch(["--help"]) == 0
    assert "selftest" in capsys.readouterr().out


def test_parser_maps_flags_to_config_keys():
    args = build_parser().parse_args(["detect", "--lambda-tv", "0.2", "--ground-truth", "gt.csv"])
    assert args.lambda_tv == 0.2 and str(args.ground_truth) == "gt.csv"
    assert args.plain_residual is None


def test_bad_config_value(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("rho = 0.5\n")
    assert dispatch(["detect", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 1
    assert "rho" in capsys.readouterr().err


def test_too_few_frames(tmp_path, capsys):
    spec = write_spec(tmp_path, "width = 16\nheight = 16\nframes = 2\nseed = 1\n")
    out = tmp_path / "run"
    assert dispatch(["synth", "--synth-spec", str(spec), "--out", str(out)]) == 0
    capsys.readouterr()
    assert dispatch(["detect", "--out", str(out), "--no-progress"]) == 2
    assert "TooFewFrames" in capsys.readouterr().err
    assert "TooFewFrames" in (out / defaults.RUN_LOG_NAME).read_text()


def test_missing_manifest(tmp_path):
    assert dispatch(["detect", "--out", str(tmp_path / "empty")]) == 2


def test_synth_outputs(tmp_path):
    out = tmp_path / "run"
    assert dispatch(["synth", "--synth-spec", str(write_spec(tmp_path)), "--out", str(out), "--seed", "8"]) == 0
    manifest = (out / defaults.MANIFEST_NAME).read_text().splitlines()
    assert manifest == [f"frame_{k:04d}.pgm" for k in range(6)]
    assert (out / "frame_0000.pgm").read_bytes().startswith(b"P5\n32 32\n65535\n")
    gt = (out / defaults.GROUND_TRUTH_NAME).read_text().splitlines()
    assert gt[0] == "frame,x,y" and gt[1] == "0,8.0,10.0" and len(gt) == 7
    log = (out / defaults.RUN_LOG_NAME).read_text()
    assert "seed = 8" in log and "lambda_tv = 0.5" in log


def run_chain(tmp_path, name):
    out = tmp_path / name
    spec = str(write_spec(tmp_path))
    assert dispatch(["synth", "--synth-spec", spec, "--out", str(out)]) == 0
    assert dispatch(["detect", "--out", str(out)] + FAST_SOLVER) == 0
    assert dispatch(["roc", "--out", str(out), "--roc-mode", "pixel", "--thresholds", "11"]) == 0
    return out


@pytest.mark.slow
def test_synth_detect_roc_is_reproducible(tmp_path):
    first = run_chain(tmp_path, "a")
    second = run_chain(tmp_path, "b")

    for k in range(6):
        assert (first / f"target_{k:04d}.pgm").exists()
        assert (first / f"background_{k:04d}.pgm").exists()
    assert len((first / defaults.TARGET_MAPS_NAME).read_text().splitlines()) == 6

    roc = (first / defaults.ROC_NAME).read_text().splitlines()
    assert roc[0] == "tau,pd,fa" and len(roc) == 12
    diagnostics = (first / defaults.DIAGNOSTICS_NAME).read_text().splitlines()
    assert diagnostics[0] == "window,iteration,residual,mu"
    assert (first / defaults.TIMING_NAME).read_text().startswith("window,iterations,")

    for name in (defaults.ROC_NAME, defaults.AUC_NAME, defaults.DIAGNOSTICS_NAME, defaults.GROUND_TRUTH_NAME):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    assert (first / "target_0003.pgm").read_bytes() == (second / "target_0003.pgm").read_bytes()


@pytest.mark.slow
def test_selftest_passes(tmp_path, capsys):
    assert dispatch(["selftest", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 9
