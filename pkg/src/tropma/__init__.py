"""Tropical toric pluripotential theory: exact PL convex calculus and Monge-Ampere solvers."""

from ._exact import InvalidInput, NoConvergence
from .abelian import (Cocycle, PeriodicPL, PolarizedTropAV, check_automorphy, periodic_ma_measure,
                      solve_torus_ma, tropical_theta, validate_ptav)
from .convex import (MaxAffine, canonical_form, double_transform, induced_decomposition,
                     legendre_transform, rational_pl_approximate, stability_set)
from .monge_ampere import (DiscreteMeasure, comparison_check, ma_measure, mass_identity_check,
                           mixed_ma)
from .mumford import MumfordContext, nef_at_vertex, skeleton_measure_lift, vertex_degree
from .oracles import p1_measure_mass, p1_pipeline, p1_solution
from .polytope import Polytope, box
from .sbp import SbpProblem, solve_sbp, verify_sbp
from .toric import Fan, GreenData, canonical_green, is_psh, is_theta_psh, validate_fan

__version__ = "0.1.0"
