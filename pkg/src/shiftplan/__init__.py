"""Semantic-aware coverage planning over terrain with incremental local replanning."""

from .astar import AStarCostParams, SearchGrid, UnreachableError, astar_search
from .ikd import DistanceField, IncrementalKdTree
from .landmark import CoveragePath, boustrophedon_order, grid_landmarks
from .rficp import CoverageParams, SemanticField, TimedPath, allocate_velocities, dwell_time, speed
from .surface import (ParametricSurface, PointCloud, curvature, extract_elevation, filter_surface, fit_surface,
                      fundamental_forms, laplacian_smooth)
from .swopt import (LocalPlanner, SafetyParams, SwoptParams, Window, WindowCostParams, identify_noncompliant,
                    ikd_swopt, optimize_window, safety_score, window_cost)

__version__ = "0.1.0"

__all__ = [
    "AStarCostParams", "SearchGrid", "UnreachableError", "astar_search",
    "DistanceField", "IncrementalKdTree",
    "CoveragePath", "boustrophedon_order", "grid_landmarks",
    "CoverageParams", "SemanticField", "TimedPath", "allocate_velocities", "dwell_time", "speed",
    "ParametricSurface", "PointCloud", "curvature", "extract_elevation", "filter_surface", "fit_surface",
    "fundamental_forms", "laplacian_smooth",
    "LocalPlanner", "SafetyParams", "SwoptParams", "Window", "WindowCostParams", "identify_noncompliant",
    "ikd_swopt", "optimize_window", "safety_score", "window_cost",
]
