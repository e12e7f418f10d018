"""Unfolding planar linkages by expansive motions.

Two backends straighten open chains and convexify closed polygons: a
minimum-norm quadratic program integrated over time (:func:`run_unfold`)
and a sequence of pointed-pseudotriangulation mechanisms
(:func:`run_streinu_unfold`). Equilibrium-stress and lifting tools check the
rigidity facts behind them.
"""

from .errors import (DegeneratePosition, LinkageSyntaxError, NumericalError, SimplicityError, StructuralError,
                     UnlockError)
from .expansion import ExpansionParams, expansive_velocity
from .flow import FlowParams, MotionTrace, check_monotone_expansion, run_unfold
from .framework import Framework, build_framework, find_equilibrium_stress, rigidity_matrix
from .geometry import Chain, Linkage, is_simple, is_unfolded
from .io import parse_linkage, serialize_linkage
from .lifting import maxwell_cremona_lift, planarize, verify_lift
from .pseudotri import StreinuParams, build_pointed_pseudotriangulation, run_streinu_unfold
from .qp import qp_solve

__version__ = "0.1.0"

__all__ = [
    "Chain", "Linkage", "is_simple", "is_unfolded",
    "Framework", "build_framework", "rigidity_matrix", "find_equilibrium_stress",
    "ExpansionParams", "expansive_velocity", "qp_solve",
    "FlowParams", "MotionTrace", "run_unfold", "check_monotone_expansion",
    "planarize", "maxwell_cremona_lift", "verify_lift",
    "StreinuParams", "build_pointed_pseudotriangulation", "run_streinu_unfold",
    "parse_linkage", "serialize_linkage",
    "UnlockError", "StructuralError", "SimplicityError", "DegeneratePosition", "NumericalError",
    "LinkageSyntaxError",
]
