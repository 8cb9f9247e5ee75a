"""Temporal radial basis function networks for vowel classification."""

__version__ = "0.1.0"

from .core import NetConfig, TrbfEnsemble, TrbfNetwork, classify, network_response
from .estimator import TRBFClassifier
from .ols import TrainConfig, train_ensemble, train_network
from .quantizer import SomConfig, SomQuantizer

__all__ = [
    "NetConfig",
    "SomConfig",
    "SomQuantizer",
    "TRBFClassifier",
    "TrainConfig",
    "TrbfEnsemble",
    "TrbfNetwork",
    "classify",
    "network_response",
    "train_ensemble",
    "train_network",
]
