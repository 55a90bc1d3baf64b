"""Causal pre-processing: project real-world data towards the FiND world."""

from .adaptation import AdaptModel, adapt_apply, adapt_fit
from .graph import AdjacencyInfo
from .warping import WarpModel, warp_apply, warp_fit

__all__ = [
    "AdjacencyInfo",
    "AdaptModel",
    "WarpModel",
    "adapt_apply",
    "adapt_fit",
    "warp_apply",
    "warp_fit",
]
