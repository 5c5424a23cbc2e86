"""Weakly supervised leaf segmentation: a three-class classifier whose
class-activation heatmaps, thresholded, become binary attention masks."""

from .classify import LeafClass, SegConfig, load_classifier, save_classifier, train_lflseg
from .gradcam import gradcam
from .segment import load_mask, save_mask, segment, threshold_mask

__all__ = [
    "LeafClass",
    "SegConfig",
    "train_lflseg",
    "save_classifier",
    "load_classifier",
    "gradcam",
    "threshold_mask",
    "segment",
    "save_mask",
    "load_mask",
]
