"""Chains of near-CMC spheres glued by catenoidal necks in axially
symmetric warped-product 3-manifolds: construction, weighted-norm
verification, and the flux/balancing mechanism."""

__version__ = "0.1.0"

from .ambient import (BUILTIN_PROFILES, MetricProfile, curvature_frame_data,
                      even_bump_profile, flat_profile, hyperbolic_profile,
                      one_ended_exp_profile, profile_from_expression,
                      scalar_curvature, scalar_curvature_gradient)
from .assembly import (GluedConfiguration, SamplingSpec, assemble,
                       configuration_from_sigma, cutoff, derive_configuration,
                       invert_lambda, lambda_map, matching_mismatch)
from .balance import (BalancedSolution, CalibratedConstants, calibrate_constants,
                      flux, leading_residual, projections, solve_balancing)
from .blocks import (DelaunayEnd, GreenSolution, catenoid_graph, delaunay_period,
                     delaunay_solve, expansion_constants, jacobi_neck,
                     jacobi_sphere, solve_green)
from .charts import NormalChart
from .norms import (WeightedNormReport, deviation_report, weight,
                    weighted_sup)
from .revgeom import (FundamentalForms, ProfileCurve, ambient_forms_exact,
                      ambient_mean_curvature_expansion, euclidean_forms,
                      expansion_geodesic_sphere, graph_forms,
                      linearized_operator, normal_graph)
