"""Measured diagnostics: flatness, dichotomy, regularity, geometry and comparison tests."""

from .comparison import (SubsolutionReport, TangencyWitness, comparison_touch_test,
                         discrete_laplacian, subsolution_certificate)
from .flatness import (FlatnessReport, best_direction_flatness, fit_alpha, flatness_eps,
                       improvement_of_flatness_run)
from .geometry import free_boundary_measure, hausdorff_distance
from .regularity import (DichotomyTrace, DistanceBound, default_C, dichotomy_sequence,
                         distance_bound_check, free_boundary_points, gradient_holder_seminorm,
                         holder_seminorm, nondegeneracy_scan)

__all__ = [
    "DichotomyTrace", "DistanceBound", "FlatnessReport", "SubsolutionReport", "TangencyWitness",
    "best_direction_flatness", "comparison_touch_test", "default_C", "dichotomy_sequence",
    "discrete_laplacian", "distance_bound_check", "fit_alpha", "flatness_eps",
    "free_boundary_measure", "free_boundary_points", "gradient_holder_seminorm",
    "hausdorff_distance", "holder_seminorm", "improvement_of_flatness_run",
    "nondegeneracy_scan", "subsolution_certificate",
]
