"""Key-point graphs of branching patterns in images, and graph matching for identification."""

from treekp._backend import BACKEND
from treekp.alignment import MatchScore, RigidTransform, fit_rigid, project
from treekp.augment import AugmentSpec, SynthParams, augment_points, generate_dendrite
from treekp.graph import PatternGraph, compute_features, load_graph, save_graph
from treekp.imaging import load_image, save_image
from treekp.matching import FeatureWeights, assign_munkres
from treekp.pipeline import PipelineConfig, extract, match_graphs
from treekp.store import enroll, identify, load_store

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "MatchScore", "RigidTransform", "fit_rigid", "project",
    "AugmentSpec", "SynthParams", "augment_points", "generate_dendrite",
    "PatternGraph", "compute_features", "load_graph", "save_graph",
    "load_image", "save_image", "FeatureWeights", "assign_munkres",
    "PipelineConfig", "extract", "match_graphs", "enroll", "identify", "load_store",
]
