"""Joint affinity graph over the patches of two images."""

from dataclasses import dataclass, field

import numpy as np

from spectralmatch.errors import InputError
from spectralmatch.features import DescriptorSet


@dataclass(frozen=True)
class JointGraph:
    """Block affinity matrix ``W = [[W1, C], [C.T, W2]]``."""

    n1: int
    n2: int
    W: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def W1(self):
        return self.W[: self.n1, : self.n1]

    @property
    def W2(self):
        return self.W[self.n1:, self.n1:]

    @property
    def C(self):
        return self.W[: self.n1, self.n1:]


def cosine_distance(a, b) -> float:
    """``1 - cos(a, b)`` in [0, 2].

    A zero vector is at distance 1 from every non-zero vector and at distance 0
    from another zero vector.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.size} vs {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InputError("non-finite input")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0 if na == nb else 1.0
    return float(np.clip(1.0 - np.dot(a / na, b / nb), 0.0, 2.0))


def _unit_rows(x: np.ndarray):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    unit = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)
    return unit, norms[:, 0] == 0


def pairwise_cosine_distance(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    ua, za = _unit_rows(np.asarray(A, dtype=np.float64))
    ub, zb = _unit_rows(np.asarray(B, dtype=np.float64))
    # Elementwise products summed along d: exactly symmetric, unlike BLAS gemm,
    # so identical inputs give bit-identical W1, W2 and C blocks.
    dots = np.empty((ua.shape[0], ub.shape[0]))
    step = max(1, (1 << 22) // max(1, ub.size))
    for start in range(0, ua.shape[0], step):
        dots[start:start + step] = (ua[start:start + step, None, :] * ub[None, :, :]).sum(axis=-1)
    dist = np.clip(1.0 - dots, 0.0, 2.0)
    zero_a, zero_b = za[:, None], zb[None, :]
    dist = np.where(zero_a ^ zero_b, 1.0, dist)
    return np.where(zero_a & zero_b, 0.0, dist)


def _check_sigma(sigma):
    if not sigma > 0:
        raise InputError("sigma must be positive")


def affinity_submatrix(descs: DescriptorSet, sigma: float = 1.0) -> np.ndarray:
    _check_sigma(sigma)
    if descs.n == 0:
        raise InputError("empty descriptor set")
    dist = pairwise_cosine_distance(descs.values, descs.values)
    W = np.exp(-((dist / sigma) ** 2))
    np.fill_diagonal(W, 1.0)
    return W


def cross_affinity(descs_a: DescriptorSet, descs_b: DescriptorSet, sigma: float = 1.0) -> np.ndarray:
    _check_sigma(sigma)
    if descs_a.d != descs_b.d:
        raise InputError(
            f"descriptor dimension mismatch ({descs_a.d} vs {descs_b.d}); "
            "feature kinds are incompatible"
        )
    return np.exp(-((pairwise_cosine_distance(descs_a.values, descs_b.values) / sigma) ** 2))


def joint_graph(W1, W2, C) -> JointGraph:
    W1, W2, C = (np.asarray(m, dtype=np.float64) for m in (W1, W2, C))
    n1, n2 = W1.shape[0], W2.shape[0]
    if W1.shape != (n1, n1) or W2.shape != (n2, n2) or C.shape != (n1, n2):
        raise InputError(
            f"block dimension mismatch: W1 {W1.shape}, W2 {W2.shape}, C {C.shape}"
        )
    W = np.block([[W1, C], [C.T, W2]])
    W = 0.5 * (W + W.T)
    W.setflags(write=False)
    return JointGraph(n1, n2, W)


def build_joint_graph(descs_a: DescriptorSet, descs_b: DescriptorSet, sigma: float = 1.0) -> JointGraph:
    C = cross_affinity(descs_a, descs_b, sigma)
    return joint_graph(affinity_submatrix(descs_a, sigma), affinity_submatrix(descs_b, sigma), C)
