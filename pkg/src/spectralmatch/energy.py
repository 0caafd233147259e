"""Terms of the matching energy and their weighted total.

Every term is a mean over matched pairs of a per-pair value in [0, 1]:

* data: JSED of the pair divided by the largest cross-image JSED,
* regularization: appearance dissimilarity (MPI difference or halved
  cosine distance),
* saliency: ``1 - (s_a + s_b) / 2``, penalizing textureless matches.

Because the total is a weighted mean of per-pair values, it is separable over
source points; the optimizer relies on this.
"""

from dataclasses import dataclass, field

import numpy as np

from spectralmatch.errors import InputError
from spectralmatch.features import DescriptorSet, SaliencyMap
from spectralmatch.graph import pairwise_cosine_distance
from spectralmatch.spectral import SpectralEmbedding, cross_jsed

UNMATCHED = -1
REG_MODES = ("mpi", "hog", "feature")


@dataclass(frozen=True)
class EnergyWeights:
    lambda1: float = 0.75
    lambda2: float = 0.10
    lambda3: float = 0.15

    def __post_init__(self):
        w = (self.lambda1, self.lambda2, self.lambda3)
        if any(not np.isfinite(x) or x < 0 for x in w):
            raise InputError("energy weights must be non-negative")
        if abs(sum(w) - 1.0) > 1e-12:
            raise InputError(f"energy weights must sum to 1, got {sum(w)!r}")

    def astuple(self):
        return (self.lambda1, self.lambda2, self.lambda3)


@dataclass(frozen=True)
class Mapping:
    """Source index -> target index, ``UNMATCHED`` (-1) where no target is set."""

    assignments: np.ndarray = field()
    n_targets: int = 0

    def __post_init__(self):
        a = np.array(self.assignments, dtype=np.int64).reshape(-1)
        if np.any((a < UNMATCHED) | (a >= self.n_targets)):
            raise InputError(f"mapping target index outside [0, {self.n_targets})")
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    @property
    def matched(self) -> np.ndarray:
        return np.flatnonzero(self.assignments != UNMATCHED)

    def pairs(self):
        src = self.matched
        return src, self.assignments[src]

    def __eq__(self, other):
        if not isinstance(other, Mapping):
            return NotImplemented
        return self.n_targets == other.n_targets and np.array_equal(self.assignments, other.assignments)

    def __hash__(self):
        return hash((self.n_targets, self.assignments.tobytes()))


def _gather_mean(costs: np.ndarray, mapping: Mapping) -> float:
    src, dst = mapping.pairs()
    if src.size == 0:
        raise InputError("mapping has no matched pairs")
    return float(np.mean(costs[src, dst]))


def data_cost_matrix(embedding: SpectralEmbedding) -> np.ndarray:
    d = cross_jsed(embedding)
    top = d.max()
    if top <= 0:
        return np.zeros_like(d)
    return np.clip(d / top, 0.0, 1.0)


def reg_cost_matrix(desc_a: DescriptorSet, desc_b: DescriptorSet, mode: str) -> np.ndarray:
    if mode not in REG_MODES:
        raise InputError(f"unknown regularization mode {mode!r}")
    if desc_a.d != desc_b.d:
        raise InputError(f"descriptor dimension mismatch ({desc_a.d} vs {desc_b.d})")
    if mode == "mpi":
        if desc_a.d != 1:
            raise InputError(f"mpi regularization needs 1-dim descriptors, got {desc_a.d}")
        return np.clip(np.abs(desc_a.values[:, :1] - desc_b.values[:, 0][None, :]), 0.0, 1.0)
    if mode == "hog" and desc_a.d != 9:
        raise InputError(f"hog regularization needs 9-dim descriptors, got {desc_a.d}")
    return pairwise_cosine_distance(desc_a.values, desc_b.values) / 2.0


def saliency_cost_matrix(sal_a: SaliencyMap, sal_b: SaliencyMap) -> np.ndarray:
    return 1.0 - (sal_a.scores[:, None] + sal_b.scores[None, :]) / 2.0


def data_term(embedding: SpectralEmbedding, mapping: Mapping) -> float:
    return _gather_mean(data_cost_matrix(embedding), mapping)


def regularization_term(desc_a, desc_b, mapping: Mapping, mode: str) -> float:
    return _gather_mean(reg_cost_matrix(desc_a, desc_b, mode), mapping)


def saliency_term(sal_a: SaliencyMap, sal_b: SaliencyMap, mapping: Mapping) -> float:
    return _gather_mean(saliency_cost_matrix(sal_a, sal_b), mapping)


def total_energy(data: float, reg: float, sal: float, w: EnergyWeights) -> float:
    for name, v in (("data", data), ("regularization", reg), ("saliency", sal)):
        if not 0.0 <= v <= 1.0:
            raise InputError(f"{name} term {v!r} outside [0, 1]")
    return w.lambda1 * data + w.lambda2 * reg + w.lambda3 * sal


def pair_cost_matrix(data_costs, reg_costs, sal_costs, w: EnergyWeights) -> np.ndarray:
    """Weighted per-pair contribution; the total energy is its mean over matched pairs."""
    return w.lambda1 * data_costs + w.lambda2 * reg_costs + w.lambda3 * sal_costs


def mapping_energy(costs: np.ndarray, mapping: Mapping) -> float:
    return _gather_mean(costs, mapping)
