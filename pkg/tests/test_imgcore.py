import numpy as np
import pytest

from faceverify.imgcore import (
    EyePair,
    FaceModelConfig,
    align,
    as_image,
    gaussian_kernel,
    histogram_equalize,
    read_image,
    smooth,
    write_image,
)

CFG = FaceModelConfig(eye_distance=32, out_width=64, out_height=80, eye_row=28.0, eye_center_col=32.0)


def test_as_image_rejects_bad_input():
    with pytest.raises(ValueError):
        as_image(np.ones(5))
    with pytest.raises(ValueError):
        as_image(np.array([[0.0, np.nan]]))
    with pytest.raises(ValueError):
        as_image(np.zeros((0, 3)))


def test_eyepair_validation():
    EyePair(left=(10.0, 5.0), right=(10.0, 20.0)).validate(30, 30)
    with pytest.raises(ValueError):
        EyePair(left=(10.0, 5.0), right=(10.0, 5.0)).validate(30, 30)
    with pytest.raises(ValueError):
        EyePair(left=(10.0, 20.0), right=(10.0, 5.0)).validate(30, 30)  # swapped
    with pytest.raises(ValueError):
        EyePair(left=(10.0, -1.0), right=(10.0, 5.0)).validate(30, 30)
    with pytest.raises(ValueError):
        EyePair(left=(40.0, 5.0), right=(10.0, 20.0)).validate(30, 30)


def test_face_model_validation():
    with pytest.raises(ValueError):
        FaceModelConfig(eye_distance=70, out_width=64, out_height=80, eye_row=28.0, eye_center_col=32.0)
    with pytest.raises(ValueError):
        FaceModelConfig(eye_distance=32, out_width=64, out_height=80, eye_row=90.0, eye_center_col=32.0)
    with pytest.raises(ValueError):
        # eye span sticks out of the crop on the right
        FaceModelConfig(eye_distance=32, out_width=64, out_height=80, eye_row=28.0, eye_center_col=50.0)


def test_align_identity_equals_crop():
    """Eyes already at target positions: align is a pure integer-grid crop."""
    rng = np.random.default_rng(1)
    src = rng.random((120, 100))
    eyes = EyePair(left=CFG.target_left, right=CFG.target_right)
    out = align(src, eyes, CFG)
    assert out.shape == (80, 64)
    assert np.max(np.abs(out - src[:80, :64])) < 1e-12


def test_align_rejects_swapped_and_coincident_eyes():
    img = np.zeros((50, 50))
    with pytest.raises(ValueError):
        align(img, EyePair(left=(20.0, 35.0), right=(20.0, 10.0)), CFG)
    with pytest.raises(ValueError):
        align(img, EyePair(left=(20.0, 20.0), right=(20.0, 20.0)), CFG)


def test_align_tilted_eyes_land_on_targets():
    """30 deg tilt at twice the target eye distance: blob centroids must land
    within 0.5 px of the configured positions."""
    h, w = 120, 140
    mid_c, mid_r = 70.0, 60.0
    half = 32.0
    ang = np.deg2rad(30)
    left = (mid_r - half * np.sin(ang), mid_c - half * np.cos(ang))
    right = (mid_r + half * np.sin(ang), mid_c + half * np.cos(ang))
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    img = np.zeros((h, w))
    for er, ec in (left, right):
        img += np.exp(-((rr - er) ** 2 + (cc - ec) ** 2) / (2 * 1.5**2))

    out = align(img, EyePair(left=left, right=right), CFG)
    for tr, tc in (CFG.target_left, CFG.target_right):
        r0, c0 = int(tr) - 4, int(tc) - 4
        win = out[r0 : r0 + 9, c0 : c0 + 9]
        wr = (win * np.arange(r0, r0 + 9)[:, None]).sum() / win.sum()
        wc = (win * np.arange(c0, c0 + 9)[None, :]).sum() / win.sum()
        assert np.hypot(wr - tr, wc - tc) < 0.5


def test_align_rotation_equivariance():
    rng = np.random.default_rng(2)
    src = smooth(rng.random((90, 110)), 2.0)  # smooth so resampling error stays small
    eyes = EyePair(left=(40.0, 30.0), right=(44.0, 70.0))
    out = align(src, eyes, CFG)

    rot = np.rot90(src)  # moves (r, c) to (W-1-c, r)
    w = src.shape[1]
    rot_eyes = EyePair(
        left=(w - 1 - eyes.left[1], eyes.left[0]),
        right=(w - 1 - eyes.right[1], eyes.right[0]),
    )
    # Same physical eyes in the rotated frame: the aligned crops must agree
    # up to resampling error.
    out_rot = align(rot, rot_eyes, CFG)
    assert np.mean(np.abs(out - out_rot)) < 2e-2


def test_align_deterministic():
    rng = np.random.default_rng(3)
    src = rng.random((100, 100))
    eyes = EyePair(left=(50.0, 30.0), right=(52.0, 68.0))
    a = align(src, eyes, CFG)
    b = align(src, eyes, CFG)
    assert np.array_equal(a, b)


def test_histogram_equalize_constant():
    out = histogram_equalize(np.full((10, 10), 0.4))
    assert np.all(out == out[0, 0])


def test_histogram_equalize_two_level():
    # 25% at 0.2 and 75% at 0.8 -> CDF maps them to 0.25 and 1.0
    img = np.full((4, 4), 0.8)
    img[0, :] = 0.2
    out = histogram_equalize(img)
    assert np.allclose(out[0, :], 0.25)
    assert np.allclose(out[1:, :], 1.0)


def test_histogram_equalize_uniform_histogram_near_identity():
    levels = np.arange(256, dtype=np.float64) / 255.0
    img = levels.reshape(16, 16)
    out = histogram_equalize(img)
    assert np.max(np.abs(out - img)) <= 1.0 / 255.0 + 1e-12


def test_histogram_equalize_idempotent_within_quantization():
    rng = np.random.default_rng(4)
    img = rng.random((32, 32))
    once = histogram_equalize(img)
    twice = histogram_equalize(once)
    assert np.max(np.abs(twice - once)) <= 1.0 / 255.0 + 1e-12


def test_histogram_equalize_monotone_and_range():
    rng = np.random.default_rng(5)
    img = rng.random((20, 20))
    out = histogram_equalize(img)
    assert out.min() >= 0.0 and out.max() <= 1.0
    order = np.argsort(img.ravel(), kind="stable")
    assert np.all(np.diff(out.ravel()[order]) >= -1e-15)


def test_histogram_equalize_rejects_out_of_range():
    with pytest.raises(ValueError):
        histogram_equalize(np.array([[0.5, 1.2]]))


def test_smooth_sigma_zero_identity():
    rng = np.random.default_rng(6)
    img = rng.random((9, 9))
    out = smooth(img, 0.0)
    assert np.array_equal(out, img)
    assert out is not img


def test_smooth_constant_preserved():
    out = smooth(np.full((12, 12), 0.37), 2.5)
    assert np.max(np.abs(out - 0.37)) < 1e-12


def test_smooth_impulse_matches_kernel():
    """Interior impulse response is the outer product of the 1-D kernel."""
    k = gaussian_kernel(1.0)
    assert k.size == 7  # radius ceil(3*1) = 3
    assert abs(k.sum() - 1.0) < 1e-12
    img = np.zeros((15, 15))
    img[7, 7] = 1.0
    out = smooth(img, 1.0)
    assert abs(out[7, 7] - k[3] * k[3]) < 1e-12
    assert abs(out.sum() - 1.0) < 1e-12  # support fits: mass preserved


def test_smooth_stays_within_input_range():
    rng = np.random.default_rng(7)
    img = rng.random((20, 20))
    out = smooth(img, 1.7)
    assert out.min() >= img.min() - 1e-12
    assert out.max() <= img.max() + 1e-12


def test_smooth_rejects_negative_sigma():
    with pytest.raises(ValueError):
        smooth(np.zeros((4, 4)), -1.0)


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    q = rng.integers(0, 256, size=(11, 13), dtype=np.uint8)
    img = q / 255.0
    p = tmp_path / "x.pgm"
    write_image(p, img)
    back = read_image(p)
    assert np.array_equal(back, img)


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    q = rng.integers(0, 256, size=(7, 5), dtype=np.uint8)
    img = q / 255.0
    p = tmp_path / "x.png"
    write_image(p, img)
    assert np.array_equal(read_image(p), img)


def test_write_clamps_out_of_range(tmp_path):
    img = np.array([[-0.5, 0.5], [1.5, 1.0]])
    p = tmp_path / "c.pgm"
    write_image(p, img)
    back = read_image(p)
    assert back[0, 0] == 0.0
    assert back[1, 0] == 1.0


def test_pgm_header_with_comment(tmp_path):
    p = tmp_path / "c.pgm"
    raster = bytes(range(6))
    p.write_bytes(b"P5\n# a comment\n3 2\n255\n" + raster)
    img = read_image(p)
    assert img.shape == (2, 3)
    assert img[1, 2] == 5 / 255.0


def test_read_missing_and_bad_magic(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_image(tmp_path / "nope.pgm")
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ValueError):
        read_image(bad)
