import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectralmatch.errors import InputError
from spectralmatch.geometry import (
    Homography,
    classify_pair,
    estimate_homography,
    interpolate_keypoints,
    load_homography,
    reprojection_errors,
    save_homography,
)

SQUARE = np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 100.0], [0.0, 100.0]])


def pairs_from(H, src):
    dst = interpolate_keypoints(Homography(H), src)
    return np.hstack([src, dst])


def random_homography(rng):
    H = np.eye(3)
    H[:2, :2] += rng.normal(scale=0.2, size=(2, 2))
    H[:2, 2] = rng.normal(scale=20, size=2)
    H[2, :2] = rng.normal(scale=5e-4, size=2)
    return H


def test_identity_fit():
    H = estimate_homography(np.hstack([SQUARE, SQUARE]))
    np.testing.assert_allclose(H.H, np.eye(3), atol=1e-9)


def test_translation_fit():
    H = estimate_homography(np.hstack([SQUARE, SQUARE + [5, 3]]))
    assert H.H[0, 2] == pytest.approx(5, abs=1e-9)
    assert H.H[1, 2] == pytest.approx(3, abs=1e-9)
    assert reprojection_errors(H, np.hstack([SQUARE, SQUARE + [5, 3]])).max() <= 1e-6


def test_collinear_is_degenerate():
    src = np.array([[0.0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(InputError, match="degenerate configuration"):
        estimate_homography(np.hstack([src, src]))


def test_too_few_pairs():
    with pytest.raises(InputError):
        estimate_homography(np.hstack([SQUARE[:3], SQUARE[:3]]))


def test_apply_examples():
    T = Homography(np.array([[1.0, 0, 5], [0, 1, 3], [0, 0, 1]]))
    assert interpolate_keypoints(T, [[10, 10]]).tolist() == [[15.0, 13.0]]
    S = Homography(np.diag([2.0, 2.0, 1.0]))
    assert interpolate_keypoints(S, [[3, 4]]).tolist() == [[6.0, 8.0]]
    I = Homography(np.eye(3))
    np.testing.assert_array_equal(interpolate_keypoints(I, SQUARE), SQUARE)


def test_points_at_infinity():
    H = Homography(np.array([[1.0, 0, 0], [0, 1, 0], [1, 0, 1]]))
    out = interpolate_keypoints(H, [[-1.0, 5.0], [1.0, 2.0]])
    assert np.isnan(out[0]).all()
    np.testing.assert_allclose(out[1], [0.5, 1.0])


def test_singular_rejected():
    with pytest.raises(InputError, match="singular"):
        Homography(np.zeros((3, 3)))
    with pytest.raises(InputError, match="singular"):
        Homography(np.array([[1.0, 2, 0], [2, 4, 0], [0, 0, 1]]))


def test_classify_examples(rng):
    H = random_homography(rng)
    pairs = pairs_from(H, SQUARE)
    fit = estimate_homography(pairs)
    assert classify_pair(fit, pairs, 10) == "easy"
    src = np.vstack([SQUARE, [[50.0, 50.0]]])
    pairs = pairs_from(H, src)
    pairs[-1, 2] += 50
    assert classify_pair(Homography(H), pairs, 10) == "difficult"
    assert classify_pair(Homography(H), pairs, np.inf) == "easy"


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 14))
def test_random_fit_recovers(seed, n):
    rng = np.random.default_rng(seed)
    H = random_homography(rng)
    src = rng.uniform(0, 128, size=(n, 2))
    pairs = pairs_from(H, src)
    try:
        fit = estimate_homography(pairs)
    except InputError:
        return  # near-degenerate draw
    assert reprojection_errors(fit, pairs).max() <= 1e-6
    back = interpolate_keypoints(fit.inverse(), interpolate_keypoints(fit, src))
    assert np.abs(back - src).max() <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 50), st.floats(0, 50))
def test_classify_monotone_in_rho(seed, r1, r2):
    rng = np.random.default_rng(seed)
    H = Homography(random_homography(rng))
    pairs = pairs_from(H.H, rng.uniform(0, 128, size=(6, 2)))
    pairs[:, 2:] += rng.normal(scale=10, size=(6, 2))
    lo, hi = sorted((r1, r2))
    if classify_pair(H, pairs, lo) == "easy":
        assert classify_pair(H, pairs, hi) == "easy"


def test_save_load(tmp_path, rng):
    H = Homography(random_homography(rng))
    save_homography(H, tmp_path / "h.txt")
    np.testing.assert_array_equal(load_homography(tmp_path / "h.txt").H, H.H)
