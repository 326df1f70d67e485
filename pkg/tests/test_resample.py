import numpy as np
import pytest

from mdseg.resample import fit_size, resize_bilinear, resize_image_bilinear, resize_nearest


def _oracle_bilinear(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Scalar reference: half-pixel centers, edge clamp, lerp blending."""
    h, w = arr.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            sx = (ox + 0.5) * w / out_w - 0.5
            sy = (oy + 0.5) * h / out_h - 0.5
            x0, y0 = int(np.floor(sx)), int(np.floor(sy))
            fx, fy = sx - x0, sy - y0
            x0c, x1c = min(max(x0, 0), w - 1), min(max(x0 + 1, 0), w - 1)
            y0c, y1c = min(max(y0, 0), h - 1), min(max(y0 + 1, 0), h - 1)
            a, b = arr[y0c, x0c], arr[y0c, x1c]
            c, d = arr[y1c, x0c], arr[y1c, x1c]
            top = a + fx * (b - a)
            bot = c + fx * (d - c)
            out[oy, ox] = top + fy * (bot - top)
    return out


def test_fit_size_examples():
    assert fit_size(2048, 1024, 2048, 1024) == (2048, 1024)
    assert fit_size(2048, 1024, 1024, 512) == (1024, 512)
    assert fit_size(100, 100, 2048, 1024) == (1024, 1024)  # upscale, height-bound
    assert fit_size(3, 1, 2, 2) == (2, 1)


def test_fit_size_never_collapses():
    assert fit_size(1000, 1, 10, 10) == (10, 1)


def test_fit_size_rejects_degenerate():
    with pytest.raises(ValueError):
        fit_size(0, 5, 10, 10)
    with pytest.raises(ValueError):
        fit_size(5, 5, 0, 10)


def test_bilinear_hand_computed_2x2_to_2x4():
    # columns [0, 1] upscaled across width: weights 0, .25, .75, 1
    plane = np.array([[0.0, 1.0], [0.0, 1.0]], dtype=np.float32)
    out = resize_bilinear(plane, 4, 2)
    expected = np.array([[0.0, 0.25, 0.75, 1.0]] * 2, dtype=np.float32)
    assert np.array_equal(out, expected)


def test_bilinear_matches_scalar_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10):
        h, w = rng.integers(1, 9, 2)
        oh, ow = rng.integers(1, 13, 2)
        arr = rng.random((h, w)).astype(np.float64)
        got = resize_bilinear(arr, int(ow), int(oh))
        want = _oracle_bilinear(arr, int(ow), int(oh))
        assert np.allclose(got, want, atol=1e-12)


def test_bilinear_identity_is_exact_copy():
    arr = np.random.default_rng(1).random((5, 7)).astype(np.float32)
    out = resize_bilinear(arr, 7, 5)
    assert np.array_equal(out, arr)


def test_bilinear_preserves_constants_bit_exactly():
    arr = np.full((3, 4), 0.1234567, dtype=np.float32)
    for ow, oh in [(1, 1), (9, 2), (17, 11)]:
        out = resize_bilinear(arr, ow, oh)
        assert (out == np.float32(0.1234567)).all()


def test_bilinear_channels_last():
    arr = np.random.default_rng(2).random((4, 6, 3)).astype(np.float32)
    out = resize_bilinear(arr, 12, 8)
    for c in range(3):
        assert np.allclose(out[:, :, c], resize_bilinear(arr[:, :, c], 12, 8))


def test_nearest_never_invents_values():
    rng = np.random.default_rng(3)
    arr = rng.choice(np.array([0, 3, 9, 250], dtype=np.uint8), size=(6, 5))
    out = resize_nearest(arr, 13, 4)
    assert out.dtype == np.uint8
    assert set(np.unique(out)) <= set(np.unique(arr))


def test_nearest_identity():
    arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
    assert np.array_equal(resize_nearest(arr, 4, 3), arr)


def test_image_bilinear_rounds_to_uint8():
    img = np.random.default_rng(4).integers(0, 256, (8, 8, 3), dtype=np.uint8)
    out = resize_image_bilinear(img, 5, 5)
    assert out.dtype == np.uint8 and out.shape == (5, 5, 3)


def test_resize_rejects_bad_sizes():
    arr = np.zeros((2, 2), dtype=np.float32)
    with pytest.raises(ValueError):
        resize_bilinear(arr, 0, 2)
    with pytest.raises(ValueError):
        resize_nearest(arr, 2, -1)


def test_window_bilinear_equals_sliced_full():
    from mdseg.resample import resize_bilinear_window

    rng = np.random.default_rng(8)
    arr = rng.random((9, 13, 2)).astype(np.float32)
    full = resize_bilinear(arr, 40, 30)
    for wx, wy, ww, wh in [(0, 0, 40, 30), (5, 7, 12, 9), (39, 29, 1, 1), (10, 0, 30, 5)]:
        window = resize_bilinear_window(arr, 40, 30, wx, wy, ww, wh)
        assert np.array_equal(window, full[wy : wy + wh, wx : wx + ww])


def test_window_nearest_equals_sliced_full():
    from mdseg.resample import resize_nearest_window

    rng = np.random.default_rng(9)
    arr = rng.integers(0, 9, (7, 11)).astype(np.uint8)
    full = resize_nearest(arr, 23, 17)
    for wx, wy, ww, wh in [(0, 0, 23, 17), (3, 4, 10, 6), (22, 16, 1, 1)]:
        window = resize_nearest_window(arr, 23, 17, wx, wy, ww, wh)
        assert np.array_equal(window, full[wy : wy + wh, wx : wx + ww])


def test_window_bounds_validated():
    from mdseg.resample import resize_bilinear_window

    arr = np.zeros((4, 4), dtype=np.float32)
    with pytest.raises(ValueError):
        resize_bilinear_window(arr, 8, 8, 5, 0, 4, 4)
