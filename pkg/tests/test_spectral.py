import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spectralmatch.errors import InputError
from spectralmatch.features import DescriptorSet
from spectralmatch.graph import JointGraph, build_joint_graph, joint_graph
from spectralmatch.spectral import (
    SpectralEmbedding,
    canonical_signs,
    cross_jsed,
    eig_sym,
    format_spectrum,
    jsed,
    normalized_laplacian,
    spectral_embedding,
)


def random_symmetric(rng, n):
    A = rng.normal(size=(n, n))
    return (A + A.T) / 2


def test_k3_spectrum():
    vals, _ = eig_sym(np.array([[2.0, -1, -1], [-1, 2, -1], [-1, -1, 2]]))
    np.testing.assert_allclose(vals, [0, 3, 3], atol=1e-9)


def test_diagonal():
    vals, vecs = eig_sym(np.diag([3.0, 1.0, 2.0]))
    assert vals.tolist() == [1.0, 2.0, 3.0]
    np.testing.assert_array_equal(np.abs(vecs), [[0, 0, 1], [1, 0, 0], [0, 1, 0]])


def test_reconstruction_8x8(rng):
    M = random_symmetric(rng, 8)
    vals, V = eig_sym(M)
    assert np.linalg.norm(V @ np.diag(vals) @ V.T - M) <= 1e-7 * np.linalg.norm(M)
    np.testing.assert_allclose(V.T @ V, np.eye(8), atol=1e-12)


def test_matches_reference_solver(rng):
    M = random_symmetric(rng, 12)
    np.testing.assert_allclose(eig_sym(M)[0], np.linalg.eigvalsh(M), atol=1e-12)


def test_asymmetric_rejected():
    with pytest.raises(InputError):
        eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_eig_properties(n, seed):
    M = random_symmetric(np.random.default_rng(seed), n)
    vals, V = eig_sym(M)
    assert np.all(np.diff(vals) >= 0)
    scale = 1 + np.linalg.norm(M)
    assert np.max(np.linalg.norm(M @ V - V * vals, axis=0)) <= 1e-8 * scale
    # canonical sign: the largest-magnitude entry of each vector is positive
    for k in range(n):
        assert V[np.argmax(np.abs(V[:, k])), k] > 0


def test_canonical_signs_idempotent(rng):
    V = rng.normal(size=(6, 4))
    once = canonical_signs(V)
    np.testing.assert_array_equal(canonical_signs(-V), once)
    np.testing.assert_array_equal(canonical_signs(once), once)


def test_laplacian_examples():
    L = normalized_laplacian(JointGraph(1, 1, np.ones((2, 2))))
    np.testing.assert_allclose(L, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    L = normalized_laplacian(JointGraph(1, 1, np.eye(2)))
    assert not L.any()


def test_laplacian_null_vector(rng):
    d = DescriptorSet(rng.normal(size=(5, 3)))
    g = build_joint_graph(d, DescriptorSet(rng.normal(size=(4, 3))))
    v = np.sqrt(g.W.sum(axis=1))
    assert np.max(np.abs(normalized_laplacian(g) @ v)) <= 1e-12


@pytest.mark.parametrize("c", [0.1, 0.367879, 0.9])
def test_two_node_embedding(c):
    emb = spectral_embedding(joint_graph([[1.0]], [[1.0]], [[c]]), m=1)
    assert emb.m == 1
    assert abs(emb.eigenvalues[0] - 2 * c / (1 + c)) <= 1e-9
    assert abs(abs(emb.coords[0, 0]) - 1 / np.sqrt(2)) <= 1e-9
    assert emb.coords[0, 0] == pytest.approx(-emb.coords[1, 0], abs=1e-12)
    assert abs(jsed(emb, 0, 1) - np.sqrt(2)) <= 1e-9
    assert jsed(emb, 0, 0) == 0.0


def test_identical_images_blocks_equal(rng):
    d = DescriptorSet(rng.normal(size=(9, 9)))
    emb = spectral_embedding(build_joint_graph(d, d), m=4)
    # the leading non-trivial modes here are all symmetric across the two copies
    keep = emb.eigenvalues < 1 - 1e-9
    np.testing.assert_allclose(emb.coords_a[:, keep], emb.coords_b[:, keep], atol=1e-8)


def test_full_spectrum(rng):
    a = DescriptorSet(rng.normal(size=(3, 2)))
    b = DescriptorSet(rng.normal(size=(3, 2)))
    emb = spectral_embedding(build_joint_graph(a, b), m=5)
    assert emb.coords.shape == (6, 5)
    with pytest.raises(InputError):
        spectral_embedding(build_joint_graph(a, b), m=6)


def test_jsed_bad_index(rng):
    emb = SpectralEmbedding(2, 2, np.array([0.5]), rng.normal(size=(4, 1)))
    with pytest.raises(IndexError):
        jsed(emb, 0, 4)


def test_cross_jsed_matches_pointwise(rng):
    emb = SpectralEmbedding(3, 4, np.array([0.2, 0.5]), rng.normal(size=(7, 2)))
    X = cross_jsed(emb)
    assert X.shape == (3, 4)
    for i in range(3):
        for j in range(4):
            assert X[i, j] == pytest.approx(jsed(emb, i, 3 + j), abs=1e-14)


def test_sign_flip_invariance(rng):
    coords = rng.normal(size=(8, 3))
    flipped = coords * np.array([1.0, -1.0, -1.0])
    a = SpectralEmbedding(4, 4, np.array([0.1, 0.2, 0.3]), coords)
    b = SpectralEmbedding(4, 4, np.array([0.1, 0.2, 0.3]), flipped)
    assert np.max(np.abs(cross_jsed(a) - cross_jsed(b))) <= 1e-12


def test_format_spectrum():
    emb = spectral_embedding(joint_graph([[1.0]], [[1.0]], [[0.5]]), m=1)
    text = format_spectrum(emb, "level 0")
    assert "level 0" in text
    assert repr(float(emb.eigenvalues[0])) in text
    assert "np." not in text
