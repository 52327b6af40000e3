"""Generalized Bayesian network classifiers for multi-dimensional classification."""

from gbnc.dataset import DatasetBundle, FeatureSchema, load_csv, make_bundle
from gbnc.local_learners import LearnerConfig
from gbnc.model import GbncModel, fit_gbnc, train
from gbnc.inference import predict, predict_bundle

__version__ = "0.1.0"

__all__ = [
    "DatasetBundle",
    "FeatureSchema",
    "GbncModel",
    "LearnerConfig",
    "fit_gbnc",
    "load_csv",
    "make_bundle",
    "predict",
    "predict_bundle",
    "train",
]
