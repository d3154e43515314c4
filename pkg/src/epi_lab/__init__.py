"""Numerical laboratory for entropies of additive channels, MMSE identities
and the entropy power inequality."""

from .channel import ChannelModel, EntropyBreakdown, mutual_information, output_density
from .distributions import Gaussian, MixedDistribution, Pyramid, UniformBox, entropy
from .quadrature import QuadratureConfig, integrate

__all__ = [
    "ChannelModel", "EntropyBreakdown", "Gaussian", "MixedDistribution", "Pyramid",
    "QuadratureConfig", "UniformBox", "entropy", "integrate", "mutual_information",
    "output_density",
]
__version__ = "0.1.0"
