"""Optical-guided nonlocal-means despeckling for SAR intensity images."""

from .core import FilterConfig, FilterOutput, PredictorSet, candidate_offsets, filter, select_predictors
from .distances import (
    PatchGeometry,
    optical_patch_distance,
    pixel_distance,
    sar_patch_distance,
    speckle_free_distance,
)
from .gbf import GbfConfig, filter_gbf
from .rasters import OpticalGuide, SarImage
from .speckle_stats import DistanceStats, SpeckleModel, distance_moments, distance_pdf, patch_sigma, threshold

despeckle = filter

__version__ = "0.1.0"

__all__ = [
    "DistanceStats",
    "FilterConfig",
    "FilterOutput",
    "GbfConfig",
    "OpticalGuide",
    "PatchGeometry",
    "PredictorSet",
    "SarImage",
    "SpeckleModel",
    "candidate_offsets",
    "despeckle",
    "distance_moments",
    "distance_pdf",
    "filter",
    "filter_gbf",
    "optical_patch_distance",
    "patch_sigma",
    "pixel_distance",
    "sar_patch_distance",
    "select_predictors",
    "speckle_free_distance",
    "threshold",
]
