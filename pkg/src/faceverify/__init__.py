"""Face verification under variable illumination.

Pipeline: eye-based geometric normalization, gradient-domain illumination
correction, hybrid Fourier features over nested frequency bands, subspace
projection, and multi-classifier score fusion.
"""

from faceverify.imgcore import (
    DEFAULT_FACE_MODELS,
    EyePair,
    FaceModelConfig,
    align,
    histogram_equalize,
    read_image,
    smooth,
    write_image,
)
from faceverify.ingi import IngiParams, ingi
from faceverify.fourier import BandSpec, FeatureVector, extract_features
from faceverify.subspace import SubspaceModel, kpca_train, pca_train, project
from faceverify.matching import FusionModel, fuse_scores, similarity, train_fusion
from faceverify.evalproto import RocCurve, roc, vr_at_far

__all__ = [
    "DEFAULT_FACE_MODELS",
    "EyePair",
    "FaceModelConfig",
    "align",
    "histogram_equalize",
    "read_image",
    "smooth",
    "write_image",
    "IngiParams",
    "ingi",
    "BandSpec",
    "FeatureVector",
    "extract_features",
    "SubspaceModel",
    "kpca_train",
    "pca_train",
    "project",
    "FusionModel",
    "fuse_scores",
    "similarity",
    "train_fusion",
    "RocCurve",
    "roc",
    "vr_at_far",
]

__version__ = "0.1.0"
