"""Spectral correspondence matching for disparate image pairs.

Both images are tessellated into patches, embedded jointly in the low-frequency
eigenvectors of a combined affinity graph, and matched by minimizing a weighted
energy of embedding distance, appearance dissimilarity and saliency,
coarse-to-fine over an image pyramid.
"""

from spectralmatch.imageio import ImageRaster, Pyramid, build_pyramid, load_raster
from spectralmatch.optimizer import CorrespondenceSet, MatchConfig, match_multiresolution
from spectralmatch.energy import EnergyWeights

__all__ = [
    "ImageRaster",
    "Pyramid",
    "build_pyramid",
    "load_raster",
    "CorrespondenceSet",
    "MatchConfig",
    "match_multiresolution",
    "EnergyWeights",
]

__version__ = "0.1.0"
