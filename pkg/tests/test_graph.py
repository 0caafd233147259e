import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from spectralmatch.errors import InputError
from spectralmatch.features import DescriptorSet
from spectralmatch.graph import (
    affinity_submatrix,
    build_joint_graph,
    cosine_distance,
    cross_affinity,
    joint_graph,
    pairwise_cosine_distance,
)


@pytest.mark.parametrize("a, b, d", [((1, 0), (1, 0), 0.0), ((1, 0), (0, 1), 1.0), ((1, 0), (-1, 0), 2.0)])
def test_cosine_distance(a, b, d):
    assert cosine_distance(a, b) == d


def test_cosine_distance_zero_vectors():
    assert cosine_distance((0, 0), (0, 0)) == 0.0
    assert cosine_distance((0, 0), (1, 0)) == 1.0


def test_affinity_examples():
    d = DescriptorSet(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
    W = affinity_submatrix(d, sigma=1.0)
    assert np.all(np.diag(W) == 1.0)
    assert W[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-15)
    assert W[0, 2] == 1.0


def test_cross_affinity():
    a = DescriptorSet(np.array([[1.0, 0.0]]))
    b = DescriptorSet(np.array([[1.0, 0.0], [0.0, 1.0]]))
    C = cross_affinity(a, b, 1.0)
    assert C[0, 0] == 1.0
    assert C[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-15)


def test_cross_affinity_dimension_mismatch():
    a = DescriptorSet(np.ones((2, 1)), "mpi")
    b = DescriptorSet(np.ones((2, 9)), "hog")
    with pytest.raises(InputError, match="descriptor dimension mismatch"):
        cross_affinity(a, b)


def test_two_node_assembly():
    g = joint_graph(np.array([[1.0]]), np.array([[1.0]]), np.array([[0.3]]))
    np.testing.assert_array_equal(g.W, [[1.0, 0.3], [0.3, 1.0]])
    assert (g.n1, g.n2) == (1, 1)


def test_identical_inputs_give_identical_blocks(rng):
    d = DescriptorSet(rng.normal(size=(12, 9)))
    g = build_joint_graph(d, d, 1.0)
    np.testing.assert_array_equal(g.C, g.W1)
    np.testing.assert_array_equal(g.W2, g.W1)


@settings(max_examples=40, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 10), st.just(4)), elements=st.floats(-5, 5)),
    arrays(np.float64, st.tuples(st.integers(1, 10), st.just(4)), elements=st.floats(-5, 5)),
    st.floats(0.1, 3.0),
)
def test_joint_graph_symmetric_and_bounded(a, b, sigma):
    g = build_joint_graph(DescriptorSet(a), DescriptorSet(b), sigma)
    assert np.max(np.abs(g.W - g.W.T)) <= 1e-12
    assert g.W.min() >= 0 and g.W.max() <= 1
    D = pairwise_cosine_distance(a, b)
    assert D.min() >= 0 and D.max() <= 2 + 1e-12
