"""Random looptrees and planar maps coded by Lukasiewicz paths."""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    ExponentError,
    InfeasibleModelError,
    LevyMapsError,
    ValidationError,
)
from .levy import LevyTriplet, JumpFamily, bg_exponents, derived_exponents, phi, psi
from .paths import (
    LukasiewiczPath,
    StepLaw,
    boltzmann_stable_law,
    k_n_for_theta,
    sample_bridge,
    sample_bridge_biconditioned,
    sample_excursion,
    simple_walk_law,
    stable_gw_law,
    vervaat,
)
from .looptree import FormulaDistance, InterpolatedPath, Looptree, build_looptree, encode_looptree
from .labels import GoodLabelling, LabelProcess, gaussian_labels, sample_good_labelling
from .maps import PointedMap, audit_bijection, looptree_to_map
from .dimension import DimensionEstimate, MetricSample, covering_number, minkowski_estimate
from .spine import SpineMarks, sample_spine_marks, spine_subordinators
from .rng import make_rng

__all__ = [name for name in dir() if not name.startswith("_")]
