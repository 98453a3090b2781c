import numpy as np
import pytest
import torch

from irstd import tensor_core as tc
from irstd.errors import (
    AlignmentMismatch,
    BadMagic,
    ConfigError,
    FrameSizeMismatch,
    TooFewFrames,
    TruncatedPayload,
    UnsupportedMaxval,
)
from irstd.sequence import (
    FrameSequence,
    GrayImage,
    average_windows,
    build_windows,
    encode_pgm,
    load_sequence,
    read_image,
    reconstruct_maps,
    window_starts,
    write_image,
)


def make_sequence(rng, n, h=6, w=5):
    return FrameSequence(tuple(GrayImage(rng.random((h, w))) for _ in range(n)))


# --- PGM ---

def test_read_minimal_pgm(pgm_file):
    img = read_image(pgm_file(b"P5 4 3 255\n" + bytes(range(0, 240, 20))))
    assert (img.width, img.height) == (4, 3)
    assert img.pixels[0, 1] == pytest.approx(20 / 255)
    assert img.pixels[2, 3] == pytest.approx(220 / 255)


def test_read_pgm_with_comments(pgm_file):
    data = b"P5\n# made by hand\n2 2\n# depth\n255\n" + bytes([0, 255, 128, 64])
    img = read_image(pgm_file(data))
    np.testing.assert_allclose(img.pixels, np.array([[0, 255], [128, 64]]) / 255)


def test_read_pgm_with_crlf_header(pgm_file):
    img = read_image(pgm_file(b"P5\r\n2 1\r\n255\r\n" + bytes([10, 200])))
    np.testing.assert_allclose(img.pixels, [[10 / 255, 200 / 255]])


def test_pgm_raster_may_start_with_a_newline_byte(pgm_file):
    img = read_image(pgm_file(b"P5 3 1 255\n" + bytes([10, 13, 10])))
    np.testing.assert_allclose(img.pixels, [[10 / 255, 13 / 255, 10 / 255]])


def test_read_16bit_pgm_is_big_endian(pgm_file):
    data = b"P5 2 1 65535\n" + bytes([0x01, 0x00, 0xFF, 0xFF])
    img = read_image(pgm_file(data))
    np.testing.assert_allclose(img.pixels, [[256 / 65535, 1.0]])


def test_ascii_pgm_is_rejected(pgm_file):
    with pytest.raises(BadMagic):
        read_image(pgm_file(b"P2 2 2 255\n0 1 2 3\n"))


def test_truncated_payload(pgm_file):
    with pytest.raises(TruncatedPayload):
        read_image(pgm_file(b"P5 4 3 255\n" + bytes(11)))


@pytest.mark.parametrize("maxval", [b"0", b"1023", b"70000"])
def test_unsupported_maxval(pgm_file, maxval):
    with pytest.raises(UnsupportedMaxval):
        read_image(pgm_file(b"P5 1 1 " + maxval + b"\n\x00\x00"))


@pytest.mark.parametrize("bits, tol", [(8, 1 / 255), (16, 1 / 65535)])
def test_pgm_write_read_within_quantization(tmp_path, rng, bits, tol):
    img = GrayImage(rng.random((7, 9)))
    path = write_image(img, tmp_path / f"f{bits}.pgm", bits=bits)
    back = read_image(path)
    assert float(np.abs(back.pixels - img.pixels).max()) <= tol


def test_encode_pgm_header():
    data = encode_pgm(GrayImage(np.ones((2, 3))))
    assert data.startswith(b"P5\n3 2\n255\n")
    assert data[-6:] == bytes([255] * 6)
    with pytest.raises(ValueError):
        encode_pgm(GrayImage(np.ones((1, 1))), bits=12)


def test_png_preview(tmp_path, rng):
    img = GrayImage(rng.random((5, 4)))
    back = read_image(write_image(img, tmp_path / "preview.png"))
    assert float(np.abs(back.pixels - img.pixels).max()) <= 1 / 255


def test_load_sequence_checks_sizes(tmp_path):
    a = write_image(GrayImage(np.zeros((3, 3))), tmp_path / "a.pgm")
    b = write_image(GrayImage(np.zeros((3, 4))), tmp_path / "b.pgm")
    assert len(load_sequence([a, a])) == 2
    with pytest.raises(FrameSizeMismatch):
        load_sequence([a, b])


# --- Images and sequences ---

@pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.full((2, 2), 1.5), np.zeros((2, 2, 2))])
def test_gray_image_validation(bad):
    with pytest.raises(ValueError):
        GrayImage(bad)


def test_sequence_tensor_layout(rng):
    seq = make_sequence(rng, 4)
    k = seq.to_tensor()
    assert k.shape == (6, 5, 4) and k.dtype == tc.DTYPE
    np.testing.assert_array_equal(k[:, :, 2].numpy(), seq.frames[2].pixels)
    again = FrameSequence.from_tensor(k)
    np.testing.assert_array_equal(again.frames[3].pixels, seq.frames[3].pixels)


def test_empty_sequence():
    with pytest.raises(TooFewFrames):
        FrameSequence(())


# --- Windows ---

def test_window_starts():
    assert len(window_starts(120, 3, 3)) == 40
    assert window_starts(5, 3, 3) == [0, 2]
    assert window_starts(3, 3, 1) == [0]
    assert window_starts(7, 3, 2) == [0, 2, 4]


def test_build_windows_counts_and_contents(rng):
    seq = make_sequence(rng, 5)
    plan = build_windows(seq, 3)
    assert plan.starts == [0, 2]
    k = seq.to_tensor()
    torch.testing.assert_close(plan.windows[1].tensor, k[:, :, 2:5])


def test_every_frame_is_covered(rng):
    seq = make_sequence(rng, 11)
    plan = build_windows(seq, 3, step=4)
    covered = set()
    for w in plan.windows:
        covered.update(range(w.start_frame, w.start_frame + 3))
    assert covered == set(range(11))


def test_too_few_frames(rng):
    with pytest.raises(TooFewFrames):
        build_windows(make_sequence(rng, 2), 3)


@pytest.mark.parametrize("kwargs", [{"step": 0}, {"patch_size": 10}, {"patch_size": 3, "patch_stride": 0}])
def test_window_config_errors(rng, kwargs):
    with pytest.raises(ConfigError):
        build_windows(make_sequence(rng, 4), 3, **kwargs)


def test_patch_windows_tile_the_frame(rng):
    seq = make_sequence(rng, 3, h=6, w=5)
    plan = build_windows(seq, 3, patch_size=4, patch_stride=2)
    # rows start at 0, 2; cols at 0, 1
    assert {(w.row, w.col) for w in plan.windows} == {(0, 0), (0, 1), (2, 0), (2, 1)}
    assert all(w.shape == (4, 4, 3) for w in plan.windows)


@pytest.mark.parametrize("kwargs", [{"step": 1}, {"step": 3, "patch_size": 4, "patch_stride": 1}])
def test_averaging_own_windows_recovers_frames(rng, kwargs):
    seq = make_sequence(rng, 7)
    plan = build_windows(seq, 3, **kwargs)
    out = average_windows(plan, [w.tensor for w in plan.windows])
    assert out.shape == (7, 6, 5)
    expected = np.stack([f.pixels for f in seq.frames])
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)


def test_reconstruct_maps_clips_and_normalizes(rng):
    seq = make_sequence(rng, 3)
    plan = build_windows(seq, 3)
    t = torch.full((6, 5, 3), -1.0, dtype=tc.DTYPE)
    t[2, 3, 1] = 4.0
    t[0, 0, 0] = 2.0
    maps = reconstruct_maps(plan, [t])
    assert len(maps) == 3
    assert maps[1].pixels[2, 3] == 1.0
    assert maps[0].pixels[0, 0] == 0.5
    assert maps[2].pixels.max() == 0.0


def test_reconstruct_all_zero_maps(rng):
    plan = build_windows(make_sequence(rng, 3), 3)
    maps = reconstruct_maps(plan, [tc.zeros(6, 5, 3)])
    assert all(m.pixels.max() == 0.0 for m in maps)


def test_alignment_mismatch(rng):
    plan = build_windows(make_sequence(rng, 6), 3)
    with pytest.raises(AlignmentMismatch):
        average_windows(plan, [tc.zeros(6, 5, 3)])
    with pytest.raises(AlignmentMismatch):
        average_windows(plan, [tc.zeros(6, 5, 3), tc.zeros(5, 5, 3)])
