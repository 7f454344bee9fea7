"""Hierarchical segmentation with stochastic watershed re-weighting and
automatic selection of the hierarchy and cut level."""
from .chain import HierarchyBuilder, HierarchySpec, base_hierarchy, enumerate_specs, parse_spec
from .errors import ConfigError, DataError, DegenerateMeasureError, SwsError
from .graph import (IndexedHierarchy, build_dendrogram, build_rag, cut_at, cut_to_k,
                    marker_segmentation, minimum_spanning_tree)
from .pixel import (StructuringElement, eroded_area, morphological_gradient,
                    watershed_fine_partition)
from .scoring import MsConfig, mumford_shah, whdr
from .select import CutGrid, ImageCase, evaluate, oracle, train_model
from .sws import MarkerModel, edge_probabilities, monte_carlo_cut_frequency, sws_reweight

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CutGrid", "DataError", "DegenerateMeasureError", "HierarchyBuilder",
    "HierarchySpec", "ImageCase", "IndexedHierarchy", "MarkerModel", "MsConfig",
    "StructuringElement", "SwsError", "base_hierarchy", "build_dendrogram", "build_rag",
    "cut_at", "cut_to_k", "edge_probabilities", "enumerate_specs", "eroded_area", "evaluate",
    "marker_segmentation", "minimum_spanning_tree", "monte_carlo_cut_frequency",
    "morphological_gradient", "mumford_shah", "oracle", "parse_spec", "sws_reweight",
    "train_model", "watershed_fine_partition", "whdr",
]
